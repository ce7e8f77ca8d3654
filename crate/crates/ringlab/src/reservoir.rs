//! Time-domain simulation of the all-optical reservoir: header waveform
//! synthesis, the per-bit amplitude mask, a loop of identical ring-filter
//! delay nodes with one saturable-gain pass per circulation, and
//! photodetected node readings forming feature vectors.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::netlist::PhotonicNetlist;
use crate::seeds::substream;
use crate::spectrum::{
    group_delay, ComplexResponse, FrequencyGrid, SPEED_OF_LIGHT,
};
use crate::topology::{drr_metrics_policy, to_netlist, DrrParams, PhysicsConstants};

/// Complex field samples on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub dt_ps: f64,
    pub start_ps: f64,
}

impl Waveform {
    pub fn new(samples: Vec<Complex64>, dt_ps: f64) -> Result<Self> {
        if !(dt_ps > 0.0) {
            return Err(Error::Config("sample interval must be > 0".into()));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::Config("waveform contains non-finite samples".into()));
        }
        Ok(Self { samples, dt_ps, start_ps: 0.0 })
    }

    pub fn duration_ps(&self) -> f64 {
        self.samples.len() as f64 * self.dt_ps
    }

    pub fn power(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_sqr()).collect()
    }
}

/// Returns k such that k * dt == span within tolerance, or an error.
fn exact_samples(span_ps: f64, dt_ps: f64, what: &str) -> Result<usize> {
    let k = span_ps / dt_ps;
    let rounded = k.round();
    if (k - rounded).abs() > 1e-6 || rounded < 0.0 {
        return Err(Error::Config(format!(
            "{what} of {span_ps} ps is not a multiple of dt = {dt_ps} ps"
        )));
    }
    Ok(rounded as usize)
}

/// Non-return-to-zero on-off keying: amplitude 1 for '1', 0 for '0',
/// constant across each bit period.
pub fn encode_bits(bits: &[bool], rate_gbps: f64, dt_ps: f64) -> Result<Waveform> {
    if !(rate_gbps > 0.0) {
        return Err(Error::Config("signal rate must be > 0".into()));
    }
    let bit_ps = 1000.0 / rate_gbps;
    let per_bit = exact_samples(bit_ps, dt_ps, "bit period")?;
    if per_bit == 0 {
        return Err(Error::Config("dt larger than the bit period".into()));
    }
    let mut samples = Vec::with_capacity(bits.len() * per_bit);
    for &b in bits {
        let amp = if b { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        samples.extend(std::iter::repeat(amp).take(per_bit));
    }
    Waveform::new(samples, dt_ps)
}

/// Per-bit amplitude mask: fixed channel weights applied chip by chip.
#[derive(Debug, Clone)]
pub struct MaskConfig {
    pub channels: usize,
    pub weights: Vec<f64>,
    pub chip_ps: f64,
}

impl MaskConfig {
    /// Draws the channel weights once, uniform on [0, 1], from the mask
    /// sub-stream of the master seed.
    pub fn random(bit_period_ps: f64, channels: usize, master_seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("mask needs at least one channel".into()));
        }
        let mut rng = substream(master_seed, "mask", 0);
        let weights = (0..channels).map(|_| rng.gen_range(0.0..=1.0)).collect();
        Ok(Self { channels, weights, chip_ps: bit_period_ps / channels as f64 })
    }

    pub fn uniform(bit_period_ps: f64, channels: usize, weight: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("mask needs at least one channel".into()));
        }
        Ok(Self { channels, weights: vec![weight; channels], chip_ps: bit_period_ps / channels as f64 })
    }

    pub fn bit_period_ps(&self) -> f64 {
        self.chip_ps * self.channels as f64
    }
}

/// Multiplies the field by the channel weight of the current chip. The
/// waveform must be aligned to the chip grid.
pub fn apply_mask(w: &Waveform, mask: &MaskConfig) -> Result<Waveform> {
    let per_chip = exact_samples(mask.chip_ps, w.dt_ps, "chip duration")?;
    if per_chip == 0 {
        return Err(Error::Config("dt larger than the chip duration".into()));
    }
    let per_bit = per_chip * mask.channels;
    if w.samples.len() % per_bit != 0 {
        return Err(Error::Config(format!(
            "waveform of {} samples is not bit-aligned to the {}-sample mask period",
            w.samples.len(),
            per_bit
        )));
    }
    let mut out = w.clone();
    for (k, s) in out.samples.iter_mut().enumerate() {
        let chip = (k / per_chip) % mask.channels;
        *s *= mask.weights[chip];
    }
    Ok(out)
}

/// A delay node: the frequency response of one ring device, with its band
/// center as the optical carrier reference and nominal delay/bandwidth.
#[derive(Debug, Clone)]
pub struct NodeModel {
    /// Response sampled around the carrier, wide enough for waveform grids.
    pub response: ComplexResponse,
    pub netlist: PhotonicNetlist,
    pub tau_delay_ps: f64,
    pub bandwidth_ghz: f64,
    /// Optical carrier (rad/s), centered on the delay band.
    pub carrier_omega: f64,
}

/// Span of the response held by a node model, in multiples of 1/dt around
/// the carrier for dt = 1 ps, plus margin.
const NODE_SPAN_RAD_S: f64 = 2.0 * std::f64::consts::PI * 2.2e12;
const NODE_POINTS: usize = 32768;

impl NodeModel {
    /// Builds a node from device parameters, uniformly rescaling all
    /// waveguide lengths so the in-band mean delay matches `target_delay_ps`
    /// (delay scales by the geometry factor, bandwidth by its inverse).
    pub fn from_params(p: &DrrParams, target_delay_ps: f64) -> Result<Self> {
        if !(target_delay_ps > 0.0) {
            return Err(Error::Config("target node delay must be > 0".into()));
        }
        let phys = PhysicsConstants::default();
        let locate_grid = FrequencyGrid::default_scan();
        let base_net = to_netlist(p)?;
        let base = measure(&base_net, &locate_grid, &phys)?;
        let factor = target_delay_ps / base.tau_band_ps;

        let mut net = base_net;
        for seg in &mut net.segments {
            seg.wg.length_m *= factor;
        }
        let scaled = measure(&net, &locate_grid, &phys)?;
        let center = 0.5 * (scaled.band_lo_rad_s + scaled.band_hi_rad_s);

        // Wide fine response around the band center for waveform filtering.
        let lambda = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / center;
        let wide_grid = FrequencyGrid::new(lambda, NODE_SPAN_RAD_S, NODE_POINTS)?;
        let response = net.solve(&wide_grid)?;

        Ok(Self {
            response,
            netlist: net,
            tau_delay_ps: scaled.tau_band_ps,
            bandwidth_ghz: scaled.bandwidth_ghz,
            carrier_omega: center,
        })
    }

    /// A synthetic node with a directly specified baseband response,
    /// used in tests.
    pub fn synthetic(
        response: ComplexResponse,
        tau_delay_ps: f64,
        bandwidth_ghz: f64,
    ) -> Self {
        let carrier_omega = response.grid.center_omega();
        Self {
            response,
            netlist: PhotonicNetlist::default(),
            tau_delay_ps,
            bandwidth_ghz,
            carrier_omega,
        }
    }

    /// Linear interpolation of the response at absolute frequency omega.
    fn sample(&self, omega: f64) -> Result<Complex64> {
        let grid = &self.response.grid;
        let lo = grid.omega(0);
        let hi = grid.omega(grid.points() - 1);
        if omega < lo || omega > hi {
            return Err(Error::Config(format!(
                "waveform frequency {omega:.3e} rad/s outside the node response span"
            )));
        }
        let pos = (omega - lo) / grid.step();
        let i = (pos.floor() as usize).min(grid.points() - 2);
        let w = pos - i as f64;
        Ok(self.response.values[i] * (1.0 - w) + self.response.values[i + 1] * w)
    }
}

fn measure(
    net: &PhotonicNetlist,
    grid: &FrequencyGrid,
    phys: &PhysicsConstants,
) -> Result<crate::spectrum::DelayMetrics> {
    let resp = net.solve(grid)?;
    let delays = group_delay(&resp)?;
    crate::spectrum::delay_metrics_with(grid, &delays, drr_metrics_policy(phys))
}

/// Nyquist guard: refuses sample intervals coarser than a quarter period of
/// the node bandwidth.
pub fn check_sampling(dt_ps: f64, bandwidth_ghz: f64) -> Result<()> {
    let max_dt_ps = 1000.0 / (4.0 * bandwidth_ghz);
    if dt_ps > max_dt_ps {
        return Err(Error::Config(format!(
            "dt = {dt_ps} ps undersamples a {bandwidth_ghz:.1} GHz node (need <= {max_dt_ps:.3} ps)"
        )));
    }
    Ok(())
}

/// Applies the node's frequency response to a waveform: zero-pads by at
/// least eight node delays, multiplies the spectrum by the response shifted
/// so the optical carrier sits at the node's band center, and transforms
/// back. The output keeps the padded length.
pub fn node_filter(w: &Waveform, node: &NodeModel) -> Result<Waveform> {
    check_sampling(w.dt_ps, node.bandwidth_ghz)?;
    let pad = ((8.0 * node.tau_delay_ps / w.dt_ps).ceil() as usize).max(1);
    let fft_len = (w.samples.len() + pad).next_power_of_two();

    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    buf[..w.samples.len()].copy_from_slice(&w.samples);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);
    fft.process(&mut buf);
    apply_node_spectrum(&mut buf, w.dt_ps, node)?;
    ifft.process(&mut buf);
    let scale = 1.0 / fft_len as f64;
    for s in &mut buf {
        *s *= scale;
    }
    Waveform::new(buf, w.dt_ps)
}

/// Multiplies an FFT spectrum in place by the node response sampled at the
/// baseband bin frequencies.
fn apply_node_spectrum(spec: &mut [Complex64], dt_ps: f64, node: &NodeModel) -> Result<()> {
    let n = spec.len();
    let df_hz = 1.0 / (n as f64 * dt_ps * 1e-12);
    for (k, s) in spec.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let omega = node.carrier_omega + 2.0 * std::f64::consts::PI * bin * df_hz;
        *s *= node.sample(omega)?;
    }
    Ok(())
}

/// Memoryless saturable gain on the field: |E_out|^2 = G * |E_in|^2 with
/// G = G0 / (1 + |E_in|^2 / P_sat); the phase is preserved.
pub fn soa(w: &Waveform, gain_db: f64, p_sat_mw: f64) -> Waveform {
    let g0 = 10f64.powf(gain_db / 10.0);
    let mut out = w.clone();
    for s in &mut out.samples {
        let p = s.norm_sqr();
        let g = g0 / (1.0 + p / p_sat_mw);
        *s *= g.sqrt();
    }
    out
}

/// Photodetection: per-sample power with multiplicative gaussian noise,
/// clipped at zero.
pub fn photodetect(w: &Waveform, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    w.samples
        .iter()
        .map(|s| {
            let p = s.norm_sqr();
            if sigma > 0.0 {
                (p * (1.0 + sigma * gaussian(rng))).max(0.0)
            } else {
                p
            }
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Reservoir loop parameters.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    /// Delay nodes per circulation.
    pub nodes: usize,
    /// Nominal per-node delay, ps.
    pub tau_delay_ps: f64,
    /// Total signal traveling time, ps; an integer multiple of the loop
    /// delay rho = nodes * tau_delay.
    pub travel_time_ps: f64,
    /// Small-signal SOA gain in dB; None auto-compensates the per-loop
    /// node insertion loss.
    pub soa_gain_db: Option<f64>,
    /// SOA saturation power, mW (field power of 1.0 == 1 mW).
    pub p_sat_mw: f64,
    /// Relative photodetector noise.
    pub detector_sigma: f64,
}

impl LoopConfig {
    pub fn rho_ps(&self) -> f64 {
        self.nodes as f64 * self.tau_delay_ps
    }

    pub fn circulations(&self) -> usize {
        (self.travel_time_ps / self.rho_ps()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::Config("loop needs at least one node".into()));
        }
        if !(self.tau_delay_ps > 0.0) {
            return Err(Error::Config("node delay must be > 0".into()));
        }
        let rho = self.rho_ps();
        let ratio = self.travel_time_ps / rho;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
            return Err(Error::Config(format!(
                "travel time {} ps is not a positive integer multiple of rho = {rho} ps",
                self.travel_time_ps
            )));
        }
        if !(self.p_sat_mw > 0.0) {
            return Err(Error::Config("saturation power must be > 0".into()));
        }
        if self.detector_sigma < 0.0 {
            return Err(Error::Config("detector noise must be >= 0".into()));
        }
        Ok(())
    }

    /// Table-style defaults: 20 nodes of 25 ps (rho = 500 ps), 3 ns travel
    /// time, auto gain, 10 mW saturation, 5% detector noise.
    pub fn table_defaults() -> Self {
        Self {
            nodes: 20,
            tau_delay_ps: 25.0,
            travel_time_ps: 3000.0,
            soa_gain_db: None,
            p_sat_mw: 10.0,
            detector_sigma: 0.05,
        }
    }
}

/// Small-signal gain (dB) that exactly compensates the mean in-band power
/// loss of one circulation through all nodes.
pub fn compensation_gain_db(node: &NodeModel, nodes: usize) -> f64 {
    let grid = &node.response.grid;
    let half_bw = std::f64::consts::PI * node.bandwidth_ghz * 1e9;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..grid.points() {
        if (grid.omega(i) - node.carrier_omega).abs() <= half_bw {
            acc += node.response.values[i].norm_sqr();
            count += 1;
        }
    }
    let mean_t2 = if count == 0 { 1.0 } else { acc / count as f64 };
    -10.0 * (mean_t2.max(1e-300)).log10() * nodes as f64
}

/// Runs the reservoir on one masked header waveform and returns the feature
/// vector in node-major order: features[i * circulations + c] is node i's
/// reading at the end of circulation c.
///
/// Each circulation applies the node filter once per node and ends with one
/// saturable-gain pass. At the end of circulation c every node output is
/// photodetected over the dwell window [(c+1)*rho - tau, (c+1)*rho): node i
/// carries i+1 filter passes of extra delay, so each node reads a different
/// slice of the packet at a different filtering depth.
pub fn run_reservoir(
    masked: &Waveform,
    cfg: &LoopConfig,
    node: &NodeModel,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_sampling(masked.dt_ps, node.bandwidth_ghz)?;
    if masked.duration_ps() > cfg.travel_time_ps {
        return Err(Error::Config(format!(
            "masked waveform of {} ps exceeds the travel time {} ps",
            masked.duration_ps(),
            cfg.travel_time_ps
        )));
    }

    let dt = masked.dt_ps;
    let rho = cfg.rho_ps();
    let circulations = cfg.circulations();
    let n_nodes = cfg.nodes;
    let per_window = exact_samples(cfg.tau_delay_ps, dt, "node dwell window")?;
    let pad = ((8.0 * node.tau_delay_ps / dt).ceil() as usize).max(1);
    let total = exact_samples(cfg.travel_time_ps, dt, "travel time")? + pad + masked.samples.len();
    let fft_len = total.next_power_of_two();

    let gain_db = cfg
        .soa_gain_db
        .unwrap_or_else(|| compensation_gain_db(node, n_nodes));

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);
    let scale = 1.0 / fft_len as f64;

    // Node spectrum on this FFT grid, computed once.
    let mut h = vec![Complex64::new(1.0, 0.0); fft_len];
    {
        let mut tmp = h.clone();
        apply_node_spectrum(&mut tmp, dt, node)?;
        h = tmp;
    }

    let mut rng = substream(seed, "detector", 0);
    let mut state = vec![Complex64::new(0.0, 0.0); fft_len];
    state[..masked.samples.len()].copy_from_slice(&masked.samples);

    let mut features = vec![0.0; n_nodes * circulations];
    let mut time_buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for c in 0..circulations {
        // One forward transform per circulation; node passes accumulate in
        // the frequency domain.
        let mut spec = state.clone();
        fft.process(&mut spec);
        for i in 0..n_nodes {
            for (s, hk) in spec.iter_mut().zip(&h) {
                *s *= hk;
            }
            time_buf.copy_from_slice(&spec);
            ifft.process(&mut time_buf);

            let snapshot = ((c as f64 + 1.0) * rho / dt).round() as usize;
            let w_start = snapshot.saturating_sub(per_window);
            let w_end = snapshot.min(fft_len);
            let mut acc = 0.0;
            for s in &time_buf[w_start..w_end] {
                let p = s.norm_sqr() * scale * scale;
                let detected = if cfg.detector_sigma > 0.0 {
                    (p * (1.0 + cfg.detector_sigma * gaussian(&mut rng))).max(0.0)
                } else {
                    p
                };
                acc += detected;
            }
            features[i * circulations + c] = acc / per_window as f64;
        }
        // Close the circulation: back to time domain, one SOA pass.
        for s in &mut time_buf {
            *s *= scale;
        }
        let after_nodes = Waveform::new(time_buf.clone(), dt)?;
        let amplified = soa(&after_nodes, gain_db, cfg.p_sat_mw);
        state.copy_from_slice(&amplified.samples);
    }
    Ok(features)
}
