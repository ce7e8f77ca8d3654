//! Photonic circuit netlists: lossy waveguide segments and directional
//! couplers wired between named nets, with a frequency-domain field solver.
//!
//! Conventions: light is unidirectional and every net carries one complex
//! field amplitude. A 2x2 coupler maps its two input nets to its two output
//! nets through the symmetric lossless matrix [[t, i*k], [i*k, t]] with
//! k = sqrt(1 - t^2). A three-guide coupling region maps three inputs to
//! three outputs through exp(i*H) for a real symmetric coupling matrix H
//! with zero diagonal, unitary by construction. Any global phase convention
//! would leave |T| and the group delay unchanged.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::{ComplexResponse, FrequencyGrid, SPEED_OF_LIGHT};

/// A straight waveguide piece with power loss quoted in dB/cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideSegment {
    pub length_m: f64,
    pub n_eff: f64,
    pub loss_db_per_cm: f64,
}

impl WaveguideSegment {
    pub fn new(length_m: f64, n_eff: f64, loss_db_per_cm: f64) -> Result<Self> {
        if !(length_m >= 0.0) {
            return Err(Error::Domain(format!("segment length {length_m} must be >= 0")));
        }
        if !(n_eff > 0.0) {
            return Err(Error::Domain(format!("n_eff {n_eff} must be > 0")));
        }
        if !(loss_db_per_cm >= 0.0) {
            return Err(Error::Domain(format!("loss {loss_db_per_cm} dB/cm must be >= 0")));
        }
        Ok(Self { length_m, n_eff, loss_db_per_cm })
    }

    /// Field attenuation coefficient in 1/m (the quoted loss is on power).
    pub fn alpha_field(&self) -> f64 {
        f64::ln(10.0) * self.loss_db_per_cm / (20.0 * 0.01)
    }

    /// Complex propagation factor exp(-alpha*L) * exp(-i*omega*n_eff*L/c).
    pub fn response(&self, omega: f64) -> Complex64 {
        debug_assert!(omega > 0.0);
        let amp = (-self.alpha_field() * self.length_m).exp();
        let phase = -omega * self.n_eff * self.length_m / SPEED_OF_LIGHT;
        Complex64::from_polar(amp, phase)
    }
}

/// Scattering matrix of a symmetric lossless 2x2 coupler with through
/// amplitude `t`: [[t, i*k], [i*k, t]], k = sqrt(1 - t^2).
pub fn coupler_matrix(t: f64) -> Result<Matrix2<Complex64>> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("coupling coefficient t = {t} outside [0, 1]")));
    }
    let k = (1.0 - t * t).sqrt();
    let re = Complex64::new(t, 0.0);
    let im = Complex64::new(0.0, k);
    Ok(Matrix2::new(re, im, im, re))
}

/// Scattering matrix of a three-guide coupling region, exp(i*H) with
/// H = [[0, k12, k13], [k12, 0, k23], [k13, k23, 0]] (angles in rad).
/// With a single nonzero pair this reduces to the 2x2 coupler, so through
/// amplitudes map to angles via k = acos(t).
pub fn coupler3_matrix(k12: f64, k13: f64, k23: f64) -> Result<Matrix3<Complex64>> {
    for (name, k) in [("k12", k12), ("k13", k13), ("k23", k23)] {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::Domain(format!("coupling angle {name} = {k} must be >= 0")));
        }
    }
    let h = Matrix3::new(0.0, k12, k13, k12, 0.0, k23, k13, k23, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut m = Matrix3::zeros();
    for a in 0..3 {
        let phase = Complex64::new(0.0, eig.eigenvalues[a]).exp();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] += phase * eig.eigenvectors[(i, a)] * eig.eigenvectors[(j, a)];
            }
        }
    }
    Ok(m)
}

/// A segment instance carrying light from one net to another.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentInst {
    pub name: String,
    pub from: String,
    pub to: String,
    pub wg: WaveguideSegment,
}

/// A 2x2 coupler instance. `in1`/`out1` sit on one guide (through path),
/// `in2`/`out2` on the other.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerInst {
    pub name: String,
    pub in1: String,
    pub in2: String,
    pub out1: String,
    pub out2: String,
    pub through: f64,
}

/// A three-guide coupling region; guide i runs ins[i] -> outs[i].
#[derive(Debug, Clone, PartialEq)]
pub struct Coupler3Inst {
    pub name: String,
    pub ins: [String; 3],
    pub outs: [String; 3],
    pub k12: f64,
    pub k13: f64,
    pub k23: f64,
}

/// A closed photonic circuit with one designated input and one output net.
/// Unit field amplitude is injected at the input; any other undriven net
/// injects zero (an unused port). Nets nobody reads radiate away.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhotonicNetlist {
    pub input: String,
    pub output: String,
    pub segments: Vec<SegmentInst>,
    pub couplers: Vec<CouplerInst>,
    pub couplers3: Vec<Coupler3Inst>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Driver {
    CouplerOut(usize),
    Segment(usize),
    CircuitInput,
}

#[derive(Debug, Clone, Copy)]
enum ChainEnd {
    /// Coupler output unknown (flattened index).
    Unknown(usize),
    /// The circuit input (unit injection).
    Input,
    /// An undriven net (zero injection).
    Zero,
}

/// A feed resolved through a run of segments: accumulated n_eff*L and
/// alpha*L sums, terminating at an unknown, the input, or a zero port.
#[derive(Debug, Clone, Copy)]
struct Chain {
    end: ChainEnd,
    sum_nl: f64,
    sum_alpha_l: f64,
}

impl Chain {
    fn factor(&self, omega: f64) -> Complex64 {
        Complex64::from_polar((-self.sum_alpha_l).exp(), -omega * self.sum_nl / SPEED_OF_LIGHT)
    }
}

/// Frequency-independent solver plan with coupler output fields as the
/// unknowns; trivially-chained nets are eliminated exactly.
pub struct CompiledNetlist {
    /// rows[r] lists (scattering coefficient, feeding chain) for unknown r.
    rows: Vec<Vec<(Complex64, Chain)>>,
    out_chain: Chain,
    n: usize,
}

const PIVOT_EPS: f64 = 1e-10;

impl CompiledNetlist {
    pub fn n_unknowns(&self) -> usize {
        self.n
    }

    /// Transfer function at a single angular frequency.
    pub fn eval_at(&self, omega: f64) -> Result<Complex64> {
        let n = self.n;
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        self.eval_into(omega, &mut a, &mut b)
    }

    /// Transfer function over a whole grid.
    pub fn eval_grid(&self, grid: &FrequencyGrid) -> Result<ComplexResponse> {
        let n = self.n;
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        let mut values = Vec::with_capacity(grid.points());
        for i in 0..grid.points() {
            values.push(self.eval_into(grid.omega(i), &mut a, &mut b)?);
        }
        ComplexResponse::new(grid.clone(), values)
    }

    fn eval_into(
        &self,
        omega: f64,
        a: &mut [Complex64],
        b: &mut [Complex64],
    ) -> Result<Complex64> {
        let n = self.n;
        a.fill(Complex64::new(0.0, 0.0));
        b.fill(Complex64::new(0.0, 0.0));
        for r in 0..n {
            a[r * n + r] = Complex64::new(1.0, 0.0);
            for (coef, chain) in &self.rows[r] {
                let f = coef * chain.factor(omega);
                match chain.end {
                    ChainEnd::Unknown(k) => a[r * n + k] -= f,
                    ChainEnd::Input => b[r] += f,
                    ChainEnd::Zero => {}
                }
            }
        }

        // In-place Gaussian elimination with partial pivoting.
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].norm_sqr();
            for r in (col + 1)..n {
                let m = a[r * n + col].norm_sqr();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best.sqrt() < PIVOT_EPS {
                return Err(Error::Singular { omega_rad_s: omega });
            }
            if piv != col {
                for c in 0..n {
                    a.swap(col * n + c, piv * n + c);
                }
                b.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in (col + 1)..n {
                let m = a[r * n + col] / d;
                if m.norm_sqr() == 0.0 {
                    continue;
                }
                for c in (col + 1)..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= m * v;
                }
                b[r] -= m * b[col];
            }
        }
        // Back substitution, only as far as the unknown the output needs.
        let out = match self.out_chain.end {
            ChainEnd::Input => return Ok(self.out_chain.factor(omega)),
            ChainEnd::Zero => return Ok(Complex64::new(0.0, 0.0)),
            ChainEnd::Unknown(k) => k,
        };
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for r in (0..n).rev() {
            let mut s = b[r];
            for c in (r + 1)..n {
                s -= a[r * n + c] * x[c];
            }
            x[r] = s / a[r * n + r];
        }
        Ok(self.out_chain.factor(omega) * x[out])
    }
}

impl PhotonicNetlist {
    /// Checks the structural invariants: at most one driver and one reader
    /// per net, input undriven and consumed, output driven and unconsumed.
    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    /// Builds the frequency-independent solver plan.
    pub fn compile(&self) -> Result<CompiledNetlist> {
        if self.input.is_empty() || self.output.is_empty() {
            return Err(Error::Netlist("input and output nets must be set".into()));
        }
        if self.input == self.output {
            return Err(Error::Netlist("input and output nets must differ".into()));
        }

        // Driver map: net name -> what produces its field.
        let mut drivers: HashMap<&str, Driver> = HashMap::new();

        fn claim_driver<'a>(
            map: &mut HashMap<&'a str, Driver>,
            net: &'a str,
            d: Driver,
        ) -> Result<()> {
            if map.insert(net, d).is_some() {
                return Err(Error::Netlist(format!("net '{net}' is driven more than once")));
            }
            Ok(())
        }

        claim_driver(&mut drivers, &self.input, Driver::CircuitInput)?;
        let mut flat = 0usize;
        for (_ci, c) in self.couplers.iter().enumerate() {
            coupler_matrix(c.through)?;
            claim_driver(&mut drivers, &c.out1, Driver::CouplerOut(flat))?;
            claim_driver(&mut drivers, &c.out2, Driver::CouplerOut(flat + 1))?;
            flat += 2;
            let ports = [&c.in1, &c.in2, &c.out1, &c.out2];
            for (i, p) in ports.iter().enumerate() {
                for q in ports.iter().skip(i + 1) {
                    if p == q {
                        return Err(Error::Netlist(format!(
                            "coupler '{}' reuses net '{p}'",
                            c.name
                        )));
                    }
                }
            }
        }
        for c in &self.couplers3 {
            coupler3_matrix(c.k12, c.k13, c.k23)?;
            for o in &c.outs {
                claim_driver(&mut drivers, o, Driver::CouplerOut(flat))?;
                flat += 1;
            }
        }
        for (si, s) in self.segments.iter().enumerate() {
            WaveguideSegment::new(s.wg.length_m, s.wg.n_eff, s.wg.loss_db_per_cm)?;
            if s.from == s.to {
                return Err(Error::Netlist(format!(
                    "segment '{}' connects net '{}' to itself",
                    s.name, s.from
                )));
            }
            claim_driver(&mut drivers, &s.to, Driver::Segment(si))?;
        }

        // Reader map: each net may feed at most one element input.
        let mut readers: HashMap<&str, &str> = HashMap::new();
        fn claim_reader<'a>(
            map: &mut HashMap<&'a str, &'a str>,
            net: &'a str,
            who: &'a str,
        ) -> Result<()> {
            if let Some(prev) = map.insert(net, who) {
                return Err(Error::Netlist(format!(
                    "net '{net}' feeds both '{prev}' and '{who}'"
                )));
            }
            Ok(())
        }
        for c in &self.couplers {
            claim_reader(&mut readers, &c.in1, &c.name)?;
            claim_reader(&mut readers, &c.in2, &c.name)?;
        }
        for c in &self.couplers3 {
            for i in &c.ins {
                claim_reader(&mut readers, i, &c.name)?;
            }
        }
        for s in &self.segments {
            claim_reader(&mut readers, &s.from, &s.name)?;
        }

        if readers.contains_key(self.output.as_str()) {
            return Err(Error::Netlist(format!(
                "output net '{}' must not feed any element",
                self.output
            )));
        }
        if !readers.contains_key(self.input.as_str()) {
            return Err(Error::Netlist(format!(
                "input net '{}' is not connected to anything",
                self.input
            )));
        }
        if !drivers.contains_key(self.output.as_str()) {
            return Err(Error::Netlist(format!("output net '{}' is never driven", self.output)));
        }

        // Reject closed segment-only cycles: a ring without any coupler has
        // an unconstrained field and is degenerate.
        let seg_reading_net: HashMap<&str, usize> = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (s.from.as_str(), i))
            .collect();
        for start in 0..self.segments.len() {
            let mut cur = start;
            for _ in 0..=self.segments.len() {
                match seg_reading_net.get(self.segments[cur].to.as_str()) {
                    Some(&next) => {
                        if next == start {
                            return Err(Error::Netlist(format!(
                                "segment loop without a coupler through '{}'",
                                self.segments[start].name
                            )));
                        }
                        cur = next;
                    }
                    None => break,
                }
            }
        }

        // Resolve the chain feeding a net by walking backward over segments.
        let resolve = |start: &str| -> Result<Chain> {
            let mut sum_nl = 0.0;
            let mut sum_alpha_l = 0.0;
            let mut net = start;
            let mut hops = 0usize;
            loop {
                match drivers.get(net) {
                    Some(Driver::CouplerOut(k)) => {
                        return Ok(Chain { end: ChainEnd::Unknown(*k), sum_nl, sum_alpha_l })
                    }
                    Some(Driver::CircuitInput) => {
                        return Ok(Chain { end: ChainEnd::Input, sum_nl, sum_alpha_l })
                    }
                    Some(Driver::Segment(si)) => {
                        let s = &self.segments[*si];
                        sum_nl += s.wg.n_eff * s.wg.length_m;
                        sum_alpha_l += s.wg.alpha_field() * s.wg.length_m;
                        net = &s.from;
                        hops += 1;
                        if hops > self.segments.len() {
                            return Err(Error::Netlist(format!(
                                "segment loop without a coupler through net '{start}'"
                            )));
                        }
                    }
                    None => return Ok(Chain { end: ChainEnd::Zero, sum_nl, sum_alpha_l }),
                }
            }
        };

        let mut rows: Vec<Vec<(Complex64, Chain)>> = Vec::with_capacity(flat);
        for c in &self.couplers {
            let m = coupler_matrix(c.through)?;
            let c1 = resolve(&c.in1)?;
            let c2 = resolve(&c.in2)?;
            rows.push(vec![(m[(0, 0)], c1), (m[(0, 1)], c2)]);
            rows.push(vec![(m[(1, 0)], c1), (m[(1, 1)], c2)]);
        }
        for c in &self.couplers3 {
            let m = coupler3_matrix(c.k12, c.k13, c.k23)?;
            let chains = [resolve(&c.ins[0])?, resolve(&c.ins[1])?, resolve(&c.ins[2])?];
            for i in 0..3 {
                rows.push((0..3).map(|j| (m[(i, j)], chains[j])).collect());
            }
        }
        let out_chain = resolve(&self.output)?;

        Ok(CompiledNetlist { rows, out_chain, n: flat })
    }

    /// Solves the field equations over the grid and returns E_out / E_in.
    pub fn solve(&self, grid: &FrequencyGrid) -> Result<ComplexResponse> {
        self.compile()?.eval_grid(grid)
    }

    /// Serializes the netlist to the line-based text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "input {}", self.input);
        let _ = writeln!(s, "output {}", self.output);
        for c in &self.couplers {
            let _ = writeln!(
                s,
                "coupler {} {} {} {} {} t={}",
                c.name, c.in1, c.in2, c.out1, c.out2, c.through
            );
        }
        for c in &self.couplers3 {
            let _ = writeln!(
                s,
                "coupler3 {} {} {} {} {} {} {} k12={} k13={} k23={}",
                c.name,
                c.ins[0],
                c.ins[1],
                c.ins[2],
                c.outs[0],
                c.outs[1],
                c.outs[2],
                c.k12,
                c.k13,
                c.k23
            );
        }
        for seg in &self.segments {
            let _ = writeln!(
                s,
                "segment {} {} {} length={} n_eff={} loss={}",
                seg.name, seg.from, seg.to, seg.wg.length_m, seg.wg.n_eff, seg.wg.loss_db_per_cm
            );
        }
        s
    }

    /// Parses the line-based text format. One element per line:
    ///
    /// ```text
    /// input <net>
    /// output <net>
    /// coupler <name> <in1> <in2> <out1> <out2> t=<v>
    /// coupler3 <name> <in1> <in2> <in3> <out1> <out2> <out3> k12=<v> k13=<v> k23=<v>
    /// segment <name> <from> <to> length=<v> [n_eff=<v>] [loss=<v>]
    /// ```
    ///
    /// '#' starts a comment. Unspecified n_eff/loss default to 1.9 and
    /// 0.1 dB/cm.
    pub fn parse(text: &str) -> Result<Self> {
        let mut net = PhotonicNetlist::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
            match toks[0] {
                "input" => {
                    if toks.len() != 2 {
                        return Err(err("expected: input <net>"));
                    }
                    net.input = toks[1].to_string();
                }
                "output" => {
                    if toks.len() != 2 {
                        return Err(err("expected: output <net>"));
                    }
                    net.output = toks[1].to_string();
                }
                "coupler" => {
                    if toks.len() != 7 {
                        return Err(err(
                            "expected: coupler <name> <in1> <in2> <out1> <out2> t=<v>",
                        ));
                    }
                    let kv = parse_kv(&toks[6..], ln + 1)?;
                    let t = *kv.get("t").ok_or_else(|| err("missing t="))?;
                    net.couplers.push(CouplerInst {
                        name: toks[1].to_string(),
                        in1: toks[2].to_string(),
                        in2: toks[3].to_string(),
                        out1: toks[4].to_string(),
                        out2: toks[5].to_string(),
                        through: t,
                    });
                }
                "coupler3" => {
                    if toks.len() != 11 {
                        return Err(err(
                            "expected: coupler3 <name> <3 ins> <3 outs> k12= k13= k23=",
                        ));
                    }
                    let kv = parse_kv(&toks[8..], ln + 1)?;
                    let get = |k: &str| {
                        kv.get(k).copied().ok_or_else(|| Error::Parse {
                            line: ln + 1,
                            msg: format!("missing {k}="),
                        })
                    };
                    net.couplers3.push(Coupler3Inst {
                        name: toks[1].to_string(),
                        ins: [toks[2].to_string(), toks[3].to_string(), toks[4].to_string()],
                        outs: [toks[5].to_string(), toks[6].to_string(), toks[7].to_string()],
                        k12: get("k12")?,
                        k13: get("k13")?,
                        k23: get("k23")?,
                    });
                }
                "segment" => {
                    if toks.len() < 5 {
                        return Err(err(
                            "expected: segment <name> <from> <to> length=<v> [n_eff=] [loss=]",
                        ));
                    }
                    let kv = parse_kv(&toks[4..], ln + 1)?;
                    let length = *kv.get("length").ok_or_else(|| err("missing length="))?;
                    let n_eff = kv.get("n_eff").copied().unwrap_or(1.9);
                    let loss = kv.get("loss").copied().unwrap_or(0.1);
                    net.segments.push(SegmentInst {
                        name: toks[1].to_string(),
                        from: toks[2].to_string(),
                        to: toks[3].to_string(),
                        wg: WaveguideSegment::new(length, n_eff, loss)?,
                    });
                }
                other => return Err(err(&format!("unknown element '{other}'"))),
            }
        }
        net.validate()?;
        Ok(net)
    }
}

fn parse_kv(toks: &[&str], line: usize) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for t in toks {
        let (k, v) = t.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected key=value, got '{t}'"),
        })?;
        let val: f64 = v.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad number '{v}' for key '{k}'"),
        })?;
        map.insert(k.to_string(), val);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wg(length_m: f64) -> WaveguideSegment {
        WaveguideSegment::new(length_m, 1.9, 0.1).unwrap()
    }

    /// Minimal all-pass ring: one coupler, one ring segment.
    fn all_pass_ring(t: f64, circumference: f64, loss: f64) -> PhotonicNetlist {
        PhotonicNetlist {
            input: "in".into(),
            output: "out".into(),
            couplers: vec![CouplerInst {
                name: "c1".into(),
                in1: "in".into(),
                in2: "ri".into(),
                out1: "out".into(),
                out2: "ro".into(),
                through: t,
            }],
            segments: vec![SegmentInst {
                name: "ring".into(),
                from: "ro".into(),
                to: "ri".into(),
                wg: WaveguideSegment::new(circumference, 1.9, loss).unwrap(),
            }],
            couplers3: vec![],
        }
    }

    /// Closed-form all-pass transfer function, independent of the solver:
    /// T = (t - g) / (1 - t*g), g = a * exp(-i*omega*n*L/c).
    fn all_pass_closed_form(t: f64, l: f64, loss: f64, omega: f64) -> Complex64 {
        let seg = WaveguideSegment::new(l, 1.9, loss).unwrap();
        let g = Complex64::from_polar(
            (-seg.alpha_field() * l).exp(),
            -omega * 1.9 * l / SPEED_OF_LIGHT,
        );
        (Complex64::new(t, 0.0) - g) / (Complex64::new(1.0, 0.0) - t * g)
    }

    #[test]
    fn segment_zero_length_is_identity() {
        let s = wg(0.0);
        let v = s.response(1.2e15);
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn segment_one_cm_loss_magnitude() {
        // 0.1 dB power loss over 1 cm -> field factor 10^(-0.1/20).
        let s = wg(0.01);
        let v = s.response(1.2e15);
        assert_relative_eq!(v.norm(), 10f64.powf(-0.005), epsilon = 1e-12);
    }

    #[test]
    fn segment_phase_matches_independent_route() {
        // Phase computed through the wavelength instead of omega.
        let l = 880e-6;
        let lambda = 1550e-9;
        let omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda;
        let s = wg(l);
        let v = s.response(omega);
        let cycles = 1.9 * l / lambda;
        let frac = cycles - cycles.floor();
        let expected = -2.0 * std::f64::consts::PI * frac;
        let mut got = v.arg();
        while got > expected + std::f64::consts::PI {
            got -= 2.0 * std::f64::consts::PI;
        }
        while got < expected - std::f64::consts::PI {
            got += 2.0 * std::f64::consts::PI;
        }
        assert_relative_eq!(got, expected, epsilon = 1e-7);
    }

    #[test]
    fn coupler_limits_and_unitarity() {
        let id = coupler_matrix(1.0).unwrap();
        assert_relative_eq!((id - Matrix2::identity()).norm(), 0.0, epsilon = 1e-15);

        let cross = coupler_matrix(0.0).unwrap();
        assert_relative_eq!(cross[(0, 0)].norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!((cross[(0, 1)] - Complex64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);

        let m = coupler_matrix(0.6).unwrap();
        assert_relative_eq!(m[(0, 1)].im, 0.8, epsilon = 1e-12);
        let prod = m * m.adjoint();
        let dev = (prod - Matrix2::identity()).map(|v| v.norm()).max();
        assert!(dev < 1e-12, "unitarity deviation {dev}");

        assert!(coupler_matrix(1.2).is_err());
        assert!(coupler_matrix(-0.1).is_err());
    }

    #[test]
    fn coupler3_reduces_to_pairwise_coupler() {
        let theta = 0.7f64;
        let m = coupler3_matrix(theta, 0.0, 0.0).unwrap();
        assert_relative_eq!(m[(0, 0)].re, theta.cos(), epsilon = 1e-12);
        assert_relative_eq!(m[(0, 1)].im, theta.sin(), epsilon = 1e-12);
        assert_relative_eq!(m[(2, 2)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m[(0, 2)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coupler3_is_unitary() {
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 1.5
        };
        for _ in 0..50 {
            let m = coupler3_matrix(next(), next(), next()).unwrap();
            let dev = (m * m.adjoint() - Matrix3::identity()).map(|v| v.norm()).max();
            assert!(dev < 1e-12, "unitarity deviation {dev}");
        }
    }

    #[test]
    fn straight_chain_equals_product_of_segments() {
        let net = PhotonicNetlist {
            input: "a".into(),
            output: "c".into(),
            segments: vec![
                SegmentInst { name: "s1".into(), from: "a".into(), to: "b".into(), wg: wg(100e-6) },
                SegmentInst { name: "s2".into(), from: "b".into(), to: "c".into(), wg: wg(780e-6) },
            ],
            couplers: vec![],
            couplers3: vec![],
        };
        let grid = FrequencyGrid::new(1550e-9, 1e12, 21).unwrap();
        let resp = net.solve(&grid).unwrap();
        for (i, v) in resp.values.iter().enumerate() {
            let omega = grid.omega(i);
            let expected = wg(100e-6).response(omega) * wg(780e-6).response(omega);
            assert!((v - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn all_pass_ring_matches_closed_form() {
        let grid = FrequencyGrid::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, 101).unwrap();
        for &(t, l, loss) in
            &[(0.9, 440e-6, 0.1), (0.5, 300e-6, 0.5), (0.99, 880e-6, 0.0), (0.2, 555e-6, 0.05)]
        {
            let net = all_pass_ring(t, l, loss);
            let resp = net.solve(&grid).unwrap();
            for (i, v) in resp.values.iter().enumerate() {
                let oracle = all_pass_closed_form(t, l, loss, grid.omega(i));
                assert!(
                    (v - oracle).norm() < 1e-9,
                    "t={t} l={l} loss={loss} i={i}: {v} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn lossless_all_pass_is_unit_magnitude() {
        let grid = FrequencyGrid::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, 257).unwrap();
        let net = all_pass_ring(0.7, 440e-6, 0.0);
        let resp = net.solve(&grid).unwrap();
        for v in &resp.values {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lossy_ring_is_passive() {
        let grid = FrequencyGrid::new(1550e-9, 2.0 * std::f64::consts::PI * 500e9, 257).unwrap();
        let net = all_pass_ring(0.8, 440e-6, 0.1);
        let resp = net.solve(&grid).unwrap();
        assert!(resp.max_magnitude() <= 1.0 + 1e-9);
    }

    #[test]
    fn degenerate_lossless_loop_reports_singularity() {
        // Unit loop gain: fully decoupled lossless ring resonant exactly at
        // the center frequency makes the ring field unconstrained.
        let lambda = 1550e-9;
        let l = 540.0 * lambda / 1.9;
        let net = all_pass_ring(1.0, l, 0.0);
        let grid = FrequencyGrid::new(lambda, 1e10, 3).unwrap();
        match net.solve(&grid) {
            Err(Error::Singular { omega_rad_s }) => {
                assert_relative_eq!(omega_rad_s, grid.omega(1), max_relative = 1e-9);
            }
            other => panic!("expected singular system, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn structural_errors_are_caught() {
        // Net driven twice.
        let mut net = all_pass_ring(0.5, 440e-6, 0.1);
        net.segments.push(SegmentInst {
            name: "dup".into(),
            from: "out".into(),
            to: "ri".into(),
            wg: wg(1e-6),
        });
        assert!(matches!(net.validate(), Err(Error::Netlist(_))));

        // Output feeding an element.
        let mut net = all_pass_ring(0.5, 440e-6, 0.1);
        net.segments.push(SegmentInst {
            name: "tail".into(),
            from: "out".into(),
            to: "sink".into(),
            wg: wg(1e-6),
        });
        assert!(matches!(net.validate(), Err(Error::Netlist(_))));

        // Input never consumed.
        let mut net = all_pass_ring(0.5, 440e-6, 0.1);
        net.input = "floating".into();
        assert!(matches!(net.validate(), Err(Error::Netlist(_))));

        // Input equal to output.
        let mut net = all_pass_ring(0.5, 440e-6, 0.1);
        net.output = "in".into();
        assert!(matches!(net.validate(), Err(Error::Netlist(_))));

        // Segment loop with no coupler.
        let net = PhotonicNetlist {
            input: "in".into(),
            output: "out".into(),
            segments: vec![
                SegmentInst { name: "a".into(), from: "x".into(), to: "y".into(), wg: wg(1e-6) },
                SegmentInst { name: "b".into(), from: "y".into(), to: "x".into(), wg: wg(1e-6) },
                SegmentInst { name: "c".into(), from: "in".into(), to: "out".into(), wg: wg(1e-6) },
            ],
            couplers: vec![],
            couplers3: vec![],
        };
        assert!(matches!(net.validate(), Err(Error::Netlist(_))));
    }

    #[test]
    fn text_roundtrip() {
        let net = all_pass_ring(0.63, 440e-6, 0.1);
        let text = net.to_text();
        let back = PhotonicNetlist::parse(&text).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        assert!(PhotonicNetlist::parse("input a\noutput b\nwidget w a b\n").is_err());
        assert!(PhotonicNetlist::parse("input a\noutput b\nsegment s a b\n").is_err());
        assert!(PhotonicNetlist::parse("input a\noutput b\nsegment s a b length=oops\n").is_err());
        // Structurally invalid even if syntactically fine.
        assert!(PhotonicNetlist::parse("input a\noutput b\n").is_err());
    }
}
