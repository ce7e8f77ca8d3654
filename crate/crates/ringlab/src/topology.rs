//! Double-ring topology builders: each wiring lives in a netlist template
//! data file with `$var` placeholders, so correcting a wiring needs no code
//! change. Builders substitute coupling coefficients and derived geometry
//! under the fixed circumference-sum budget.

use crate::error::{Error, Result};
use crate::netlist::PhotonicNetlist;
use crate::spectrum::{
    delay_metrics_with, group_delay, DelayMetrics, FrequencyGrid, MetricsPolicy, SPEED_OF_LIGHT,
};

/// Fixed material/waveguide constants shared by every device in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsConstants {
    pub n_eff: f64,
    pub loss_db_per_cm: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self { n_eff: 1.9, loss_db_per_cm: 0.1 }
    }
}

/// Total circumference budget shared by the two rings, in m.
pub const CIRCUMFERENCE_SUM_M: f64 = 880e-6;

/// Default length of inter-coupling bus/rail pieces, in m.
pub const DEFAULT_GAP_M: f64 = 10e-6;

/// Length of the bus stubs at the input/output ends, in m.
pub const BUS_STUB_M: f64 = 5e-6;

/// The five supported ring arrangements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyId {
    CascadedI,
    ParallelII,
    EmbeddedIII,
    ThreeByThreeIV,
    SingleRing,
}

impl TopologyId {
    pub const ALL: [TopologyId; 5] = [
        TopologyId::CascadedI,
        TopologyId::ParallelII,
        TopologyId::EmbeddedIII,
        TopologyId::ThreeByThreeIV,
        TopologyId::SingleRing,
    ];

    /// Number of coupling coefficients this topology exposes.
    pub fn coupling_count(self) -> usize {
        match self {
            TopologyId::CascadedI | TopologyId::ThreeByThreeIV => 3,
            TopologyId::ParallelII | TopologyId::EmbeddedIII => 4,
            TopologyId::SingleRing => 1,
        }
    }

    /// The netlist template this topology is built from.
    pub fn template(self) -> &'static str {
        match self {
            TopologyId::CascadedI => include_str!("templates/cascaded.ntl"),
            TopologyId::ParallelII => include_str!("templates/parallel.ntl"),
            TopologyId::EmbeddedIII => include_str!("templates/embedded.ntl"),
            TopologyId::ThreeByThreeIV => include_str!("templates/three_by_three.ntl"),
            TopologyId::SingleRing => include_str!("templates/single_ring.ntl"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TopologyId::CascadedI => "cascaded",
            TopologyId::ParallelII => "parallel",
            TopologyId::EmbeddedIII => "embedded",
            TopologyId::ThreeByThreeIV => "three-by-three",
            TopologyId::SingleRing => "single-ring",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        TopologyId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown topology '{s}'")))
    }
}

/// A concrete parameterization of one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DrrParams {
    pub topology: TopologyId,
    /// Through amplitudes t_i in [0, 1], one per coupling region.
    pub couplings: Vec<f64>,
    /// Ring 1's share of the circumference budget, in (0, 1).
    pub split: f64,
    /// Length of each inter-coupling bus/rail piece, in m.
    pub gap_m: f64,
}

impl DrrParams {
    pub fn new(topology: TopologyId, couplings: Vec<f64>) -> Result<Self> {
        Self::with_geometry(topology, couplings, 0.5, DEFAULT_GAP_M)
    }

    pub fn with_geometry(
        topology: TopologyId,
        couplings: Vec<f64>,
        split: f64,
        gap_m: f64,
    ) -> Result<Self> {
        let p = Self { topology, couplings, split, gap_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.couplings.len() != self.topology.coupling_count() {
            return Err(Error::Domain(format!(
                "{} expects {} couplings, got {}",
                self.topology.name(),
                self.topology.coupling_count(),
                self.couplings.len()
            )));
        }
        for (i, t) in self.couplings.iter().enumerate() {
            if !t.is_finite() || !(0.0..=1.0).contains(t) {
                return Err(Error::Domain(format!("t{} = {t} outside [0, 1]", i + 1)));
            }
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Domain(format!("circumference split {} outside (0, 1)", self.split)));
        }
        if !(self.gap_m >= 0.0) {
            return Err(Error::Domain("gap length must be >= 0".into()));
        }
        let (c1, c2) = self.ring_circumferences();
        if (c1 + c2 - CIRCUMFERENCE_SUM_M).abs() > 1e-12 {
            return Err(Error::Domain("circumference sum violated".into()));
        }
        if self.topology == TopologyId::EmbeddedIII && c1 <= self.gap_m {
            return Err(Error::Domain(
                "outer ring circumference must exceed the bus gap".into(),
            ));
        }
        Ok(())
    }

    /// Ring circumferences (c1, c2) with c1 + c2 = the fixed budget.
    /// The single-ring reference uses c1 alone.
    pub fn ring_circumferences(&self) -> (f64, f64) {
        let c1 = self.split * CIRCUMFERENCE_SUM_M;
        (c1, CIRCUMFERENCE_SUM_M - c1)
    }
}

/// Instantiates the topology template into a concrete netlist.
pub fn to_netlist(p: &DrrParams) -> Result<PhotonicNetlist> {
    to_netlist_with(p, &PhysicsConstants::default())
}

pub fn to_netlist_with(p: &DrrParams, phys: &PhysicsConstants) -> Result<PhotonicNetlist> {
    p.validate()?;
    let text = instantiate_template(p.topology.template(), p, phys)?;
    PhotonicNetlist::parse(&text)
}

/// Substitutes `$var` placeholders in a topology template.
pub fn instantiate_template(
    template: &str,
    p: &DrrParams,
    phys: &PhysicsConstants,
) -> Result<String> {
    let (c1, c2) = p.ring_circumferences();
    let mut vars: Vec<(String, f64)> = Vec::new();
    for (i, t) in p.couplings.iter().enumerate() {
        vars.push((format!("t{}", i + 1), *t));
    }
    if p.topology == TopologyId::ThreeByThreeIV {
        // Through amplitudes map to coupling angles via acos; see the
        // template header for which pair each slot addresses.
        let ang = |t: f64| t.clamp(0.0, 1.0).acos();
        vars.push(("k12".into(), ang(p.couplings[0])));
        vars.push(("k23".into(), ang(p.couplings[1])));
    }
    vars.push(("r1_full".into(), c1));
    vars.push(("r2_full".into(), c2));
    vars.push(("r1_half".into(), c1 / 2.0));
    vars.push(("r2_half".into(), c2 / 2.0));
    vars.push(("r2_quarter".into(), c2 / 4.0));
    vars.push(("o_arc".into(), (c1 - p.gap_m) / 3.0));
    vars.push(("gap".into(), p.gap_m));
    vars.push(("stub".into(), BUS_STUB_M));
    vars.push(("n_eff".into(), phys.n_eff));
    vars.push(("loss".into(), phys.loss_db_per_cm));

    // Longest names first so $r1_full is not clobbered by $r1 etc.
    vars.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
    let mut out = template.to_string();
    for (name, value) in &vars {
        out = out.replace(&format!("${name}"), &format!("{value:e}"));
    }
    if let Some(pos) = out.find('$') {
        let tail: String = out[pos..].chars().take(16).collect();
        return Err(Error::Config(format!("unresolved template variable near '{tail}'")));
    }
    Ok(out)
}

/// Band policy for ring devices under the fixed circumference budget: the
/// usable band is capped at one free spectral range of the full budget,
/// since anything wider double-counts resonances of the largest realizable
/// loop.
pub fn drr_metrics_policy(phys: &PhysicsConstants) -> MetricsPolicy {
    let fsr_ghz = SPEED_OF_LIGHT / (phys.n_eff * CIRCUMFERENCE_SUM_M) * 1e-9;
    MetricsPolicy { max_bandwidth_ghz: Some(fsr_ghz), ..MetricsPolicy::default() }
}

/// Evaluates the delay-bandwidth objective: netlist -> response -> group
/// delay -> metrics.
pub fn evaluate_dbp(p: &DrrParams, grid: &FrequencyGrid) -> Result<DelayMetrics> {
    let phys = PhysicsConstants::default();
    let net = to_netlist_with(p, &phys)?;
    let resp = net.solve(grid)?;
    let delays = group_delay(&resp)?;
    delay_metrics_with(grid, &delays, drr_metrics_policy(&phys))
}

/// Reference coupling sets found with the bundled optimizers at the default
/// physics and geometry (50k-evaluation budget, polished by coordinate
/// descent). The cascaded entry is the canonical delay node of the
/// reservoir experiments; all are reproducible via the optimize command.
pub fn optimized_reference(topology: TopologyId) -> DrrParams {
    let couplings = match topology {
        TopologyId::CascadedI => vec![0.485, 0.9, 0.5],
        TopologyId::ParallelII => vec![0.485, 0.5, 0.9, 1.0],
        TopologyId::EmbeddedIII => vec![0.6, 0.605, 0.9, 0.401],
        TopologyId::ThreeByThreeIV => vec![0.7, 0.0, 0.733],
        TopologyId::SingleRing => vec![0.013],
    };
    DrrParams::new(topology, couplings).expect("reference parameters are valid")
}

/// Search-space description shared by every optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub topology: TopologyId,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub init: Vec<f64>,
    pub include_geometry: bool,
}

impl ParamSpace {
    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Decodes a search vector into concrete parameters.
    pub fn decode(&self, x: &[f64]) -> Result<DrrParams> {
        if x.len() != self.dims() {
            return Err(Error::Domain(format!(
                "expected {} parameters, got {}",
                self.dims(),
                x.len()
            )));
        }
        let k = self.topology.coupling_count();
        let couplings = x[..k].to_vec();
        let (split, gap) = if self.include_geometry {
            (x[k], x[k + 1])
        } else {
            (0.5, DEFAULT_GAP_M)
        };
        DrrParams::with_geometry(self.topology, couplings, split, gap)
    }
}

/// Per-parameter bounds and defaults for a topology's search space.
/// Couplings always; the circumference split and the inter-coupling gap
/// only when the widened geometry search is enabled.
pub fn param_space(topology: TopologyId, include_geometry: bool) -> ParamSpace {
    let k = topology.coupling_count();
    let mut names: Vec<String> = (1..=k).map(|i| format!("t{i}")).collect();
    let mut lower = vec![0.0; k];
    let mut upper = vec![1.0; k];
    let mut init = vec![0.5; k];
    if include_geometry {
        names.push("split".into());
        lower.push(0.1);
        upper.push(0.9);
        init.push(0.5);
        names.push("gap".into());
        lower.push(1e-6);
        upper.push(1e-4);
        init.push(DEFAULT_GAP_M);
    }
    ParamSpace { topology, names, lower, upper, init, include_geometry }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::WaveguideSegment;

    #[test]
    fn single_ring_is_one_coupler_two_segments() {
        let p = DrrParams::new(TopologyId::SingleRing, vec![0.9]).unwrap();
        let (c1, _) = p.ring_circumferences();
        assert!((c1 - 440e-6).abs() < 1e-12);
        let net = to_netlist(&p).unwrap();
        assert_eq!(net.couplers.len(), 1);
        assert_eq!(net.segments.len(), 2);
        assert_eq!(net.couplers3.len(), 0);
    }

    #[test]
    fn every_topology_builds_a_valid_netlist() {
        for topo in TopologyId::ALL {
            let k = topo.coupling_count();
            let p = DrrParams::new(topo, vec![0.7; k]).unwrap();
            let net = to_netlist(&p).unwrap();
            net.validate().unwrap_or_else(|e| panic!("{}: {e}", topo.name()));
        }
    }

    #[test]
    fn decoupled_rings_reduce_to_the_bare_bus() {
        let grid = FrequencyGrid::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, 64).unwrap();
        for topo in TopologyId::ALL {
            let k = topo.coupling_count();
            let p = DrrParams::new(topo, vec![1.0; k]).unwrap();
            let net = to_netlist(&p).unwrap();
            let resp = net.solve(&grid).unwrap();

            // Expected: the product of the bus-path segments alone.
            let bus_len: f64 = match topo {
                TopologyId::SingleRing => BUS_STUB_M,
                TopologyId::ThreeByThreeIV => 2.0 * BUS_STUB_M,
                TopologyId::CascadedI | TopologyId::ParallelII | TopologyId::EmbeddedIII => {
                    2.0 * BUS_STUB_M + DEFAULT_GAP_M
                }
            };
            let bus = WaveguideSegment::new(bus_len, 1.9, 0.1).unwrap();
            for (i, v) in resp.values.iter().enumerate() {
                let expected = bus.response(grid.omega(i));
                assert!(
                    (v - expected).norm() < 1e-9,
                    "{}: sample {i} differs by {:.2e}",
                    topo.name(),
                    (v - expected).norm()
                );
            }
        }
    }

    #[test]
    fn passivity_over_random_parameters() {
        let grid = FrequencyGrid::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, 256).unwrap();
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for topo in TopologyId::ALL {
            for _ in 0..40 {
                let k = topo.coupling_count();
                let couplings: Vec<f64> = (0..k).map(|_| next()).collect();
                let p = DrrParams::new(topo, couplings).unwrap();
                let resp = to_netlist(&p).unwrap().solve(&grid).unwrap();
                let max = resp.max_magnitude();
                assert!(max <= 1.0 + 1e-9, "{}: |T|max = {max}", topo.name());
            }
        }
    }

    #[test]
    fn coupling_count_and_bounds() {
        assert_eq!(TopologyId::CascadedI.coupling_count(), 3);
        assert_eq!(TopologyId::ParallelII.coupling_count(), 4);
        assert_eq!(TopologyId::EmbeddedIII.coupling_count(), 4);
        assert_eq!(TopologyId::ThreeByThreeIV.coupling_count(), 3);
        assert_eq!(TopologyId::SingleRing.coupling_count(), 1);

        let ps = param_space(TopologyId::CascadedI, false);
        assert_eq!(ps.dims(), 3);
        // Reported optima of all topologies lie inside the bounds.
        for t in [0.9, 0.01, 0.35, 0.88, 0.0, 1.0, 0.65, 0.67] {
            assert!(t >= ps.lower[0] && t <= ps.upper[0]);
        }

        let ps = param_space(TopologyId::ParallelII, true);
        assert_eq!(ps.dims(), 6);
        let p = ps.decode(&[0.5, 0.5, 0.5, 0.5, 0.4, 2e-5]).unwrap();
        assert_eq!(p.split, 0.4);
        assert_eq!(p.gap_m, 2e-5);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(DrrParams::new(TopologyId::SingleRing, vec![1.2]).is_err());
        assert!(DrrParams::new(TopologyId::SingleRing, vec![0.5, 0.5]).is_err());
        assert!(DrrParams::with_geometry(TopologyId::CascadedI, vec![0.5; 3], 0.0, 1e-5).is_err());
        assert!(DrrParams::with_geometry(TopologyId::CascadedI, vec![0.5; 3], 0.5, -1.0).is_err());
    }

    #[test]
    fn dbp_is_continuous_in_couplings() {
        // Perturbing any coupling by 1e-4 moves the objective only slightly,
        // away from degenerate corners.
        let grid = FrequencyGrid::scan_with_points(2048).unwrap();
        let base = DrrParams::new(TopologyId::SingleRing, vec![0.6]).unwrap();
        let d0 = evaluate_dbp(&base, &grid).unwrap().dbp_ps_ghz;
        let p = DrrParams::new(TopologyId::SingleRing, vec![0.6 + 1e-4]).unwrap();
        let d1 = evaluate_dbp(&p, &grid).unwrap().dbp_ps_ghz;
        assert!((d1 - d0).abs() < 0.02 * d0.abs() + 1.0, "step {} -> {}", d0, d1);
    }
}
