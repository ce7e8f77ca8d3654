//! Classical black-box baselines sharing the DBP objective, bounds, and
//! trace format: particle swarm, simple and multi-population genetic
//! algorithms, and numerical-gradient ascent.
//!
//! Hyperparameters are documented defaults: PSO swarm 30, inertia 0.72,
//! cognitive/social 1.49; SGA population 50, mutation 0.05, elitism;
//! MPGA 4 populations with migration every 10 generations; gradient ascent
//! with step 1e-3 and central differences h = 1e-3.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds::substream;
use crate::spectrum::FrequencyGrid;
use crate::topology::{param_space, TopologyId};

use super::env::Objective;
use super::{OptimRun, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Pso,
    Sga,
    Mpga,
    Sgd,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Pso => "pso",
            BaselineKind::Sga => "sga",
            BaselineKind::Mpga => "mpga",
            BaselineKind::Sgd => "sgd",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "pso" => Ok(BaselineKind::Pso),
            "sga" => Ok(BaselineKind::Sga),
            "mpga" => Ok(BaselineKind::Mpga),
            "sgd" => Ok(BaselineKind::Sgd),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub budget: usize,
    pub include_geometry: bool,
    pub grid: FrequencyGrid,
    /// PSO only: particles in the swarm.
    pub swarm: usize,
    /// SGA/MPGA only: individuals per population.
    pub population: usize,
}

impl BaselineConfig {
    pub fn new(budget: usize, grid: FrequencyGrid) -> Self {
        Self { budget, include_geometry: false, grid, swarm: 30, population: 50 }
    }
}

/// Budget-metered objective with trace recording.
struct Meter<'a> {
    objective: &'a Objective,
    budget: usize,
    used: usize,
    trace: Trace,
    best: Option<(Vec<f64>, f64)>,
    started: Instant,
}

impl<'a> Meter<'a> {
    fn new(objective: &'a Objective, budget: usize) -> Self {
        Self { objective, budget, used: 0, trace: Trace::default(), best: None, started: Instant::now() }
    }

    fn exhausted(&self) -> bool {
        self.used >= self.budget
    }

    /// Scores a point; None when the budget is gone or the point fails.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        self.used += 1;
        let v = self.objective.eval(x)?;
        if self.best.as_ref().map_or(true, |(_, b)| v > *b) {
            self.best = Some((x.to_vec(), v));
            self.trace.record(self.started.elapsed().as_secs_f64(), self.used, v, x);
        }
        Some(v)
    }

    fn finish(self, space: &crate::topology::ParamSpace) -> Result<OptimRun> {
        let (x, v) = self
            .best
            .ok_or_else(|| Error::Config("no feasible point found within the budget".into()))?;
        Ok(OptimRun {
            best_params: space.decode(&x)?,
            best_dbp_ps_ghz: v,
            evaluations: self.used,
            trace: self.trace,
        })
    }
}

fn random_point(space: &crate::topology::ParamSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..space.dims()).map(|i| rng.gen_range(space.lower[i]..=space.upper[i])).collect()
}

/// Runs one baseline to budget exhaustion and returns its best point and
/// trace. The initial point (the shared mid-bounds default) is evaluated
/// first so a zero budget still reports it.
pub fn run_baseline(
    kind: BaselineKind,
    topology: TopologyId,
    config: &BaselineConfig,
    seed: u64,
) -> Result<OptimRun> {
    let space = param_space(topology, config.include_geometry);
    let objective = Objective::new(space.clone(), config.grid.clone());
    let mut meter = Meter::new(&objective, config.budget);

    // Baseline point outside the budget, mirroring the RL runner.
    if let Some(v) = objective.eval(&space.init) {
        meter.best = Some((space.init.clone(), v));
        meter.trace.record(0.0, 0, v, &space.init);
    }

    let mut rng = substream(seed, "baseline", kind as u64);
    match kind {
        BaselineKind::Pso => pso(&space, &mut meter, &mut rng, config.swarm),
        BaselineKind::Sga => {
            let mut pop = Population::seeded(&space, &mut meter, &mut rng, config.population);
            while !meter.exhausted() && !pop.members.is_empty() {
                pop.next_generation(&space, &mut meter, &mut rng);
            }
        }
        BaselineKind::Mpga => mpga(&space, &mut meter, &mut rng, config.population),
        BaselineKind::Sgd => sgd(&space, &mut meter, &mut rng),
    }
    meter.finish(&space)
}

fn pso(
    space: &crate::topology::ParamSpace,
    meter: &mut Meter<'_>,
    rng: &mut ChaCha8Rng,
    swarm: usize,
) {
    const INERTIA: f64 = 0.72;
    const COGNITIVE: f64 = 1.49;
    const SOCIAL: f64 = 1.49;
    let d = space.dims();
    let range: Vec<f64> = (0..d).map(|i| space.upper[i] - space.lower[i]).collect();

    let mut pos: Vec<Vec<f64>> = (0..swarm).map(|_| random_point(space, rng)).collect();
    let mut vel: Vec<Vec<f64>> = (0..swarm)
        .map(|_| (0..d).map(|i| rng.gen_range(-0.1..0.1) * range[i]).collect())
        .collect();
    let mut pbest: Vec<(Vec<f64>, f64)> = Vec::with_capacity(swarm);
    let mut gbest: Option<(Vec<f64>, f64)> = None;
    for p in &pos {
        let v = meter.eval(p).unwrap_or(f64::NEG_INFINITY);
        pbest.push((p.clone(), v));
        if gbest.as_ref().map_or(true, |(_, g)| v > *g) {
            gbest = Some((p.clone(), v));
        }
        if meter.exhausted() {
            return;
        }
    }

    while !meter.exhausted() {
        for k in 0..swarm {
            let g = match &gbest {
                Some((g, _)) => g.clone(),
                None => random_point(space, rng),
            };
            for i in 0..d {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                vel[k][i] = INERTIA * vel[k][i]
                    + COGNITIVE * r1 * (pbest[k].0[i] - pos[k][i])
                    + SOCIAL * r2 * (g[i] - pos[k][i]);
                let vmax = 0.2 * range[i];
                vel[k][i] = vel[k][i].clamp(-vmax, vmax);
                pos[k][i] += vel[k][i];
            }
            space.clamp(&mut pos[k]);
            if let Some(v) = meter.eval(&pos[k]) {
                if v > pbest[k].1 {
                    pbest[k] = (pos[k].clone(), v);
                }
                if gbest.as_ref().map_or(true, |(_, g)| v > *g) {
                    gbest = Some((pos[k].clone(), v));
                }
            }
            if meter.exhausted() {
                return;
            }
        }
    }
}

struct Population {
    /// (genome, fitness), kept sorted best-first.
    members: Vec<(Vec<f64>, f64)>,
}

impl Population {
    fn seeded(
        space: &crate::topology::ParamSpace,
        meter: &mut Meter<'_>,
        rng: &mut ChaCha8Rng,
        size: usize,
    ) -> Self {
        let mut members = Vec::with_capacity(size);
        for _ in 0..size {
            if meter.exhausted() {
                break;
            }
            let x = random_point(space, rng);
            let v = meter.eval(&x).unwrap_or(f64::NEG_INFINITY);
            members.push((x, v));
        }
        members.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        Self { members }
    }

    fn tournament(&self, rng: &mut ChaCha8Rng) -> &(Vec<f64>, f64) {
        let mut best = rng.gen_range(0..self.members.len());
        for _ in 0..2 {
            let k = rng.gen_range(0..self.members.len());
            if self.members[k].1 > self.members[best].1 {
                best = k;
            }
        }
        &self.members[best]
    }

    /// One generation: elitism keeps the best individual, the rest come from
    /// tournament selection, uniform crossover, and gaussian mutation.
    fn next_generation(
        &mut self,
        space: &crate::topology::ParamSpace,
        meter: &mut Meter<'_>,
        rng: &mut ChaCha8Rng,
    ) {
        const MUTATION_P: f64 = 0.05;
        let d = space.dims();
        let size = self.members.len();
        let mut next = vec![self.members[0].clone()];
        while next.len() < size && !meter.exhausted() {
            let a = self.tournament(rng).0.clone();
            let b = self.tournament(rng).0.clone();
            let mut child = vec![0.0; d];
            for i in 0..d {
                child[i] = if rng.gen_bool(0.5) { a[i] } else { b[i] };
                if rng.gen_bool(MUTATION_P) {
                    let sigma = 0.1 * (space.upper[i] - space.lower[i]);
                    child[i] += sigma * gaussian(rng);
                }
            }
            space.clamp(&mut child);
            let v = meter.eval(&child).unwrap_or(f64::NEG_INFINITY);
            next.push((child, v));
        }
        next.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        self.members = next;
    }

    fn best(&self) -> &(Vec<f64>, f64) {
        &self.members[0]
    }

    fn worst_mut(&mut self) -> &mut (Vec<f64>, f64) {
        self.members.last_mut().unwrap()
    }
}

fn mpga(
    space: &crate::topology::ParamSpace,
    meter: &mut Meter<'_>,
    rng: &mut ChaCha8Rng,
    population: usize,
) {
    const N_POPS: usize = 4;
    const MIGRATE_EVERY: usize = 10;
    let per_pop = (population / 2).max(8);
    let mut pops: Vec<Population> = (0..N_POPS)
        .map(|_| Population::seeded(space, meter, rng, per_pop))
        .collect();
    if pops.iter().any(|p| p.members.is_empty()) {
        return;
    }
    let mut generation = 0usize;
    while !meter.exhausted() {
        for p in pops.iter_mut() {
            p.next_generation(space, meter, rng);
            if meter.exhausted() {
                return;
            }
        }
        generation += 1;
        if generation % MIGRATE_EVERY == 0 {
            // Ring migration: each population's best replaces the next one's
            // worst.
            let bests: Vec<(Vec<f64>, f64)> =
                pops.iter().map(|p| p.best().clone()).collect();
            for (k, best) in bests.into_iter().enumerate() {
                let target = (k + 1) % N_POPS;
                *pops[target].worst_mut() = best;
                pops[target]
                    .members
                    .sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            }
        }
    }
}

/// Gradient ascent on the objective with central-difference gradients,
/// restarting from a fresh random point when progress stalls.
fn sgd(space: &crate::topology::ParamSpace, meter: &mut Meter<'_>, rng: &mut ChaCha8Rng) {
    const STEP: f64 = 1e-3;
    const H: f64 = 1e-3;
    const STALL_LIMIT: usize = 25;
    let d = space.dims();

    'restart: while !meter.exhausted() {
        let mut x = random_point(space, rng);
        let mut fx = match meter.eval(&x) {
            Some(v) => v,
            None => continue,
        };
        let mut stall = 0usize;
        loop {
            let mut g = vec![0.0; d];
            for i in 0..d {
                let mut xp = x.clone();
                xp[i] += H;
                space.clamp(&mut xp);
                let mut xm = x.clone();
                xm[i] -= H;
                space.clamp(&mut xm);
                let fp = meter.eval(&xp);
                let fm = meter.eval(&xm);
                if meter.exhausted() {
                    return;
                }
                g[i] = match (fp, fm) {
                    (Some(a), Some(b)) => (a - b) / (xp[i] - xm[i]).abs().max(1e-12),
                    _ => 0.0,
                };
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-9 {
                continue 'restart;
            }
            // Normalized ascent step of fixed length in parameter units.
            for i in 0..d {
                x[i] += STEP * g[i] / norm * (space.upper[i] - space.lower[i]);
            }
            space.clamp(&mut x);
            match meter.eval(&x) {
                Some(v) if v > fx + 1e-9 => {
                    fx = v;
                    stall = 0;
                }
                Some(v) => {
                    fx = fx.max(v);
                    stall += 1;
                }
                None => stall += 1,
            }
            if meter.exhausted() {
                return;
            }
            if stall >= STALL_LIMIT {
                continue 'restart;
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, one draw per call.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(budget: usize) -> BaselineConfig {
        BaselineConfig::new(budget, FrequencyGrid::scan_with_points(512).unwrap())
    }

    #[test]
    fn pso_zero_iterations_returns_initial_point() {
        let mut cfg = quick_config(0);
        cfg.swarm = 1;
        let run = run_baseline(BaselineKind::Pso, TopologyId::SingleRing, &cfg, 5).unwrap();
        assert_eq!(run.evaluations, 0);
        assert_eq!(run.best_params.couplings, vec![0.5]);
    }

    #[test]
    fn all_baselines_improve_on_the_default_point() {
        let cfg = quick_config(220);
        let base = Objective::new(
            param_space(TopologyId::SingleRing, false),
            cfg.grid.clone(),
        )
        .eval(&[0.5])
        .unwrap();
        for kind in [BaselineKind::Pso, BaselineKind::Sga, BaselineKind::Mpga, BaselineKind::Sgd] {
            let run = run_baseline(kind, TopologyId::SingleRing, &cfg, 9).unwrap();
            assert!(
                run.best_dbp_ps_ghz >= base,
                "{}: {} < {base}",
                kind.name(),
                run.best_dbp_ps_ghz
            );
            for w in run.trace.rows.windows(2) {
                assert!(w[1].best_dbp_ps_ghz > w[0].best_dbp_ps_ghz, "{} trace", kind.name());
            }
            assert!(run.evaluations <= 220);
        }
    }

    #[test]
    fn baselines_are_reproducible() {
        let cfg = quick_config(150);
        for kind in [BaselineKind::Pso, BaselineKind::Sga, BaselineKind::Mpga, BaselineKind::Sgd] {
            let a = run_baseline(kind, TopologyId::SingleRing, &cfg, 31).unwrap();
            let b = run_baseline(kind, TopologyId::SingleRing, &cfg, 31).unwrap();
            assert_eq!(a.best_dbp_ps_ghz.to_bits(), b.best_dbp_ps_ghz.to_bits(), "{}", kind.name());
            assert_eq!(a.evaluations, b.evaluations);
        }
    }

    use crate::topology::param_space;
}
