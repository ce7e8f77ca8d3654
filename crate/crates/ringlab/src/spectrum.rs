//! Frequency grids, complex responses, group delay, and delay-bandwidth metrics.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Vacuum speed of light in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform angular-frequency grid centered on an optical wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    center_wavelength_m: f64,
    span_rad_s: f64,
    points: usize,
}

impl FrequencyGrid {
    pub fn new(center_wavelength_m: f64, span_rad_s: f64, points: usize) -> Result<Self> {
        if !(center_wavelength_m > 0.0) {
            return Err(Error::Domain("center wavelength must be positive".into()));
        }
        if !(span_rad_s > 0.0) {
            return Err(Error::Domain("frequency span must be positive".into()));
        }
        if points < 3 {
            return Err(Error::Domain(format!("grid needs >= 3 points, got {points}")));
        }
        Ok(Self { center_wavelength_m, span_rad_s, points })
    }

    /// Default scan window: 1550 nm center, 500 GHz span, 8192 points.
    pub fn default_scan() -> Self {
        Self::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, 8192).unwrap()
    }

    /// Same window as `default_scan` but with a caller-chosen point count,
    /// used where many evaluations must stay cheap.
    pub fn scan_with_points(points: usize) -> Result<Self> {
        Self::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, points)
    }

    pub fn center_wavelength_m(&self) -> f64 {
        self.center_wavelength_m
    }

    pub fn center_omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.center_wavelength_m
    }

    pub fn span_rad_s(&self) -> f64 {
        self.span_rad_s
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Spacing between adjacent samples in rad/s.
    pub fn step(&self) -> f64 {
        self.span_rad_s / (self.points - 1) as f64
    }

    /// Angular frequency of sample `i`.
    pub fn omega(&self, i: usize) -> f64 {
        debug_assert!(i < self.points);
        self.center_omega() - 0.5 * self.span_rad_s + i as f64 * self.step()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.omega(i)).collect()
    }

    /// Grid with the same window but a different number of points.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.center_wavelength_m, self.span_rad_s, points)
    }
}

/// Complex transfer function sampled on a frequency grid.
#[derive(Debug, Clone)]
pub struct ComplexResponse {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl ComplexResponse {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::Domain(format!(
                "response has {} values for a {}-point grid",
                values.len(),
                grid.points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Power transmission in dB per sample.
    pub fn transmission_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 20.0 * v.norm().log10()).collect()
    }
}

const MIN_MAGNITUDE: f64 = 1e-12;
const MAX_PHASE_STEP: f64 = 0.999 * std::f64::consts::PI;

/// Group delay spectrum in ps: tau = -d(arg T)/d(omega).
///
/// Unwraps the phase with the usual +-2pi correction, then applies a
/// central difference (one-sided at the endpoints). Requires the per-sample
/// phase step to stay below pi, which is checked.
pub fn group_delay(resp: &ComplexResponse) -> Result<Vec<f64>> {
    let n = resp.values.len();
    if n < 3 {
        return Err(Error::Domain("group delay needs >= 3 samples".into()));
    }
    for (i, v) in resp.values.iter().enumerate() {
        if v.norm() < MIN_MAGNITUDE {
            return Err(Error::ZeroResponse { omega_rad_s: resp.grid.omega(i) });
        }
    }

    let mut phase = Vec::with_capacity(n);
    let mut prev_raw = resp.values[0].arg();
    phase.push(prev_raw);
    for i in 1..n {
        let raw = resp.values[i].arg();
        let mut d = raw - prev_raw;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        if d.abs() > MAX_PHASE_STEP {
            return Err(Error::PhaseStep { index: i, step_rad: d });
        }
        let prev = *phase.last().unwrap();
        phase.push(prev + d);
        prev_raw = raw;
    }

    let h = resp.grid.step();
    let mut tau = Vec::with_capacity(n);
    for i in 0..n {
        let dphi_domega = if i == 0 {
            (phase[1] - phase[0]) / h
        } else if i == n - 1 {
            (phase[n - 1] - phase[n - 2]) / h
        } else {
            (phase[i + 1] - phase[i - 1]) / (2.0 * h)
        };
        tau.push(-dphi_domega * 1e12);
    }
    Ok(tau)
}

/// Which delay figure multiplies the bandwidth in the DBP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayFactor {
    /// Mean delay across the band (default).
    #[default]
    BandMean,
    /// Peak delay.
    Peak,
}

/// Reference level the half-level band threshold is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandFloor {
    /// Threshold at half_level * tau_peak.
    Zero,
    /// Threshold at tau_min + half_level * (tau_peak - tau_min), with
    /// tau_min the smallest delay in the window. This measures usable
    /// bandwidth as delay contrast over the off-resonance baseline
    /// (default).
    #[default]
    GridMin,
}

/// Band and DBP extraction policy. The band is the maximal contiguous
/// interval around the global delay peak where tau stays above the
/// half-level threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsPolicy {
    pub half_level: f64,
    pub delay_factor: DelayFactor,
    pub floor: BandFloor,
    /// Bands wider than this are rejected; a usable band wider than one
    /// free spectral range double-counts resonances. None disables the cap.
    pub max_bandwidth_ghz: Option<f64>,
    /// Minimum peak-over-floor contrast for a usable resonance, ps.
    pub min_contrast_ps: f64,
    /// Minimum contrast as a fraction of the peak delay.
    pub min_contrast_frac: f64,
}

impl Default for MetricsPolicy {
    fn default() -> Self {
        Self {
            half_level: 0.5,
            delay_factor: DelayFactor::BandMean,
            floor: BandFloor::GridMin,
            max_bandwidth_ghz: None,
            min_contrast_ps: 1e-3,
            min_contrast_frac: 0.05,
        }
    }
}

/// Delay-bandwidth summary of a delay spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMetrics {
    /// Peak group delay, ps.
    pub tau_peak_ps: f64,
    /// Mean delay across the band, ps.
    pub tau_band_ps: f64,
    /// Band width as ordinary frequency, GHz.
    pub bandwidth_ghz: f64,
    /// Band edges, rad/s.
    pub band_lo_rad_s: f64,
    pub band_hi_rad_s: f64,
    /// Delay-bandwidth product, ps*GHz.
    pub dbp_ps_ghz: f64,
}

/// Extract delay-bandwidth metrics from a delay spectrum with the default
/// policy (band at half of peak delay, in-band mean delay).
pub fn delay_metrics(grid: &FrequencyGrid, delays_ps: &[f64]) -> Result<DelayMetrics> {
    delay_metrics_with(grid, delays_ps, MetricsPolicy::default())
}

/// Extracts the usable band of a delay spectrum: every qualifying local
/// resonance is measured at its own half level and the band with the best
/// DBP wins. Parasitic high-Q spikes therefore cannot hijack the figure of
/// merit, and replicated resonances (one per free spectral range) tie-break
/// toward the scan center.
pub fn delay_metrics_with(
    grid: &FrequencyGrid,
    delays_ps: &[f64],
    policy: MetricsPolicy,
) -> Result<DelayMetrics> {
    let n = delays_ps.len();
    if n != grid.points() {
        return Err(Error::Domain("delay spectrum does not match grid".into()));
    }
    if delays_ps.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("delay spectrum contains non-finite samples".into()));
    }
    if !delays_ps.iter().any(|&d| d > 0.0) {
        return Err(Error::Domain("no positive delay peak in spectrum".into()));
    }

    let floor = match policy.floor {
        BandFloor::Zero => 0.0,
        BandFloor::GridMin => {
            delays_ps.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0)
        }
    };

    // Candidate peaks: local maxima (plateaus count once, at their start).
    let mut candidates: Vec<usize> = Vec::new();
    for i in 0..n {
        let left_lower = i == 0 || delays_ps[i - 1] < delays_ps[i];
        let mut j = i;
        while j + 1 < n && delays_ps[j + 1] == delays_ps[i] {
            j += 1;
        }
        let right_lower = j == n - 1 || delays_ps[j + 1] < delays_ps[i];
        if left_lower && right_lower {
            candidates.push(i);
        }
    }

    let mut best: Option<DelayMetrics> = None;
    let mut saw_edge = false;
    let mut saw_contrast = false;
    let center_omega = grid.omega((n - 1) / 2);
    for &peak in &candidates {
        let tau_peak = delays_ps[peak];
        let contrast = tau_peak - floor;
        if contrast < policy.min_contrast_ps || contrast < policy.min_contrast_frac * tau_peak {
            saw_contrast = true;
            continue;
        }
        if peak == 0 || peak == n - 1 {
            saw_edge = true;
            continue;
        }
        let half = floor + policy.half_level * contrast;

        // Walk outward to the first samples below the half level.
        let mut lo = peak;
        while lo > 0 && delays_ps[lo - 1] >= half {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < n && delays_ps[hi + 1] >= half {
            hi += 1;
        }
        if lo == 0 || hi == n - 1 {
            saw_edge = true;
            continue;
        }
        // The band must belong to its peak: a band walked from a low local
        // max that swallows a taller resonance is measured from that taller
        // peak instead.
        if delays_ps[lo..=hi].iter().any(|&d| d > tau_peak) {
            continue;
        }

        // Linear interpolation of the crossings just outside [lo, hi].
        let interp = |i_out: usize, i_in: usize| -> f64 {
            let (d_out, d_in) = (delays_ps[i_out], delays_ps[i_in]);
            let w = (half - d_out) / (d_in - d_out);
            grid.omega(i_out) + w * (grid.omega(i_in) - grid.omega(i_out))
        };
        let band_lo = interp(lo - 1, lo);
        let band_hi = interp(hi + 1, hi);

        // Trapezoid mean over the band, edge segments included.
        let mut area = 0.0;
        for i in lo..hi {
            area += 0.5 * (delays_ps[i] + delays_ps[i + 1]) * grid.step();
        }
        area += 0.5 * (half + delays_ps[lo]) * (grid.omega(lo) - band_lo);
        area += 0.5 * (delays_ps[hi] + half) * (band_hi - grid.omega(hi));
        let width = band_hi - band_lo;
        let tau_band = area / width;

        let bandwidth_ghz = width / (2.0 * std::f64::consts::PI) * 1e-9;
        if let Some(cap) = policy.max_bandwidth_ghz {
            if bandwidth_ghz > cap {
                saw_edge = true;
                continue;
            }
        }
        let tau_for_dbp = match policy.delay_factor {
            DelayFactor::BandMean => tau_band,
            DelayFactor::Peak => tau_peak,
        };
        let m = DelayMetrics {
            tau_peak_ps: tau_peak,
            tau_band_ps: tau_band,
            bandwidth_ghz,
            band_lo_rad_s: band_lo,
            band_hi_rad_s: band_hi,
            dbp_ps_ghz: tau_for_dbp * bandwidth_ghz,
        };
        let take = match &best {
            None => true,
            Some(b) => {
                let rel = (m.dbp_ps_ghz - b.dbp_ps_ghz) / b.dbp_ps_ghz.abs().max(1e-300);
                // Meaningfully better, or an equal-DBP replica nearer the
                // scan center.
                rel > 1e-3
                    || (rel.abs() <= 1e-3
                        && band_center_dist(&m, center_omega) < band_center_dist(b, center_omega))
            }
        };
        if take {
            best = Some(m);
        }
    }

    match best {
        Some(m) => Ok(m),
        None if saw_edge => Err(Error::WidenScanWindow(
            "every usable delay band reaches the scan-window edge or the bandwidth cap".into(),
        )),
        None if saw_contrast => Err(Error::Domain(
            "delay contrast over the floor is below the usable minimum everywhere".into(),
        )),
        None => Err(Error::Domain("no usable delay peak in spectrum".into())),
    }
}

fn band_center_dist(m: &DelayMetrics, center_omega: f64) -> f64 {
    (0.5 * (m.band_lo_rad_s + m.band_hi_rad_s) - center_omega).abs()
}
