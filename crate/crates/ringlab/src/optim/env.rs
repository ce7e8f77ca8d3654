//! The optimization environment: states are searchable device parameters,
//! actions nudge one dimension by a fixed step, the reward is the (scaled)
//! delay-bandwidth product plus a state-regularization term.

use crate::error::{Error, Result};
use crate::spectrum::FrequencyGrid;
use crate::topology::{evaluate_dbp, ParamSpace};

/// Reward and schedule knobs of the reinforcement-learning optimizer.
#[derive(Debug, Clone)]
pub struct RewardConfig {
    /// State-regularization weight added to the reward as lambda * mean(s).
    pub lambda: f64,
    /// Entropy-regularization weight in the loss.
    pub beta: f64,
    /// Reward-regularization weight broadcast into the global update.
    pub eta: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Steps per episode.
    pub episode_len: usize,
    /// Worker count.
    pub workers: usize,
    /// Scale applied to the DBP (ps*GHz) before it enters the reward,
    /// keeping network targets O(1).
    pub dbp_scale: f64,
    /// Action step applied to one dimension per move.
    pub delta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            beta: 0.01,
            eta: 1e-4,
            gamma: 0.99,
            episode_len: 64,
            workers: 12,
            dbp_scale: 1e-3,
            delta: 0.01,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 || self.eta < 0.0 {
            return Err(Error::Config("beta and eta must be >= 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must be in (0, 1]".into()));
        }
        if self.workers == 0 || self.episode_len == 0 {
            return Err(Error::Config("workers and episode length must be >= 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config("action step must be > 0".into()));
        }
        Ok(())
    }
}

/// The DBP objective over a search space on a fixed grid.
#[derive(Debug, Clone)]
pub struct Objective {
    pub space: ParamSpace,
    pub grid: FrequencyGrid,
}

impl Objective {
    pub fn new(space: ParamSpace, grid: FrequencyGrid) -> Self {
        Self { space, grid }
    }

    /// DBP in ps*GHz, or None when the configuration cannot be scored
    /// (solver/metrics failure). Never panics on in-bounds input.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let p = self.space.decode(x).ok()?;
        evaluate_dbp(&p, &self.grid).ok().map(|m| m.dbp_ps_ghz)
    }
}

/// Discrete action set: {+delta, -delta} per dimension plus one no-op.
#[derive(Debug, Clone, Copy)]
pub struct ActionSet {
    pub dims: usize,
    pub delta: f64,
}

impl ActionSet {
    pub fn new(dims: usize, delta: f64) -> Self {
        Self { dims, delta }
    }

    pub fn len(&self) -> usize {
        2 * self.dims + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Applies action `a` to the state; the last index is the no-op.
    pub fn apply(&self, a: usize, x: &[f64]) -> Vec<f64> {
        debug_assert!(a < self.len());
        let mut y = x.to_vec();
        if a < 2 * self.dims {
            let dim = a / 2;
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            y[dim] += sign * self.delta;
        }
        y
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    /// DBP of the new state in ps*GHz, when it evaluated cleanly.
    pub dbp: Option<f64>,
}

/// Episode-scoped environment: steps mutate the state, objective failures
/// fall back to the episode's running-minimum reward (never abort).
pub struct DbpEnv<'a> {
    pub objective: &'a Objective,
    pub actions: ActionSet,
    lambda: f64,
    dbp_scale: f64,
    state: Vec<f64>,
    running_min: Option<f64>,
    pub flagged: usize,
}

impl<'a> DbpEnv<'a> {
    pub fn new(objective: &'a Objective, cfg: &RewardConfig, initial: Vec<f64>) -> Self {
        let dims = objective.space.dims();
        debug_assert_eq!(initial.len(), dims);
        Self {
            objective,
            actions: ActionSet::new(dims, cfg.delta),
            lambda: cfg.lambda,
            dbp_scale: cfg.dbp_scale,
            state: initial,
            running_min: None,
            flagged: 0,
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Applies the action (clamped to bounds), evaluates the objective, and
    /// returns the new state with its reward.
    pub fn step(&mut self, action: usize) -> StepOutcome {
        let mut next = self.actions.apply(action, &self.state);
        self.objective.space.clamp(&mut next);
        let dbp = self.objective.eval(&next);
        let mean_state = next.iter().sum::<f64>() / next.len() as f64;
        let reward = match dbp {
            Some(v) => {
                let r = v * self.dbp_scale + self.lambda * mean_state;
                self.running_min = Some(self.running_min.map_or(r, |m: f64| m.min(r)));
                r
            }
            None => {
                self.flagged += 1;
                self.running_min.unwrap_or(0.0)
            }
        };
        self.state = next;
        StepOutcome { state: self.state.clone(), reward, dbp }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{param_space, TopologyId};

    fn objective() -> Objective {
        let space = param_space(TopologyId::SingleRing, false);
        let grid = FrequencyGrid::scan_with_points(512).unwrap();
        Objective::new(space, grid)
    }

    #[test]
    fn reward_equals_scaled_dbp_when_lambda_zero() {
        let obj = objective();
        let cfg = RewardConfig { lambda: 0.0, ..RewardConfig::default() };
        let mut env = DbpEnv::new(&obj, &cfg, vec![0.6]);
        let noop = env.actions.len() - 1;
        let out = env.step(noop);
        let dbp = obj.eval(&[0.6]).unwrap();
        assert!((out.reward - dbp * cfg.dbp_scale).abs() < 1e-12);
        assert_eq!(out.state, vec![0.6]);
    }

    #[test]
    fn noop_preserves_state_and_adds_state_regularizer() {
        let obj = objective();
        let cfg = RewardConfig { lambda: 0.25, ..RewardConfig::default() };
        let mut env = DbpEnv::new(&obj, &cfg, vec![0.6]);
        let noop = env.actions.len() - 1;
        let out = env.step(noop);
        let dbp = obj.eval(&[0.6]).unwrap();
        assert!((out.reward - (dbp * cfg.dbp_scale + 0.25 * 0.6)).abs() < 1e-12);
    }

    #[test]
    fn outward_action_at_bound_is_clamped() {
        let obj = objective();
        let cfg = RewardConfig::default();
        let mut env = DbpEnv::new(&obj, &cfg, vec![1.0]);
        let up = 0; // +delta on dim 0
        let out = env.step(up);
        assert_eq!(out.state, vec![1.0]);
    }

    #[test]
    fn failures_fall_back_to_running_minimum() {
        let obj = objective();
        let cfg = RewardConfig::default();
        // t = 0.005 has sub-threshold delay contrast, so it cannot be scored.
        let mut env = DbpEnv::new(&obj, &cfg, vec![0.4]);
        let noop = env.actions.len() - 1;
        let good = env.step(noop);
        assert!(good.dbp.is_some());

        let mut env2 = DbpEnv::new(&obj, &cfg, vec![0.005]);
        let out = env2.step(env2.actions.len() - 1);
        assert!(out.dbp.is_none());
        assert_eq!(out.reward, 0.0);
        assert_eq!(env2.flagged, 1);
    }

    #[test]
    fn action_set_size_matches_spec() {
        let a = ActionSet::new(6, 0.01);
        assert_eq!(a.len(), 13);
        let x = vec![0.5; 6];
        assert_eq!(a.apply(12, &x), x);
        let y = a.apply(0, &x);
        assert!((y[0] - 0.51).abs() < 1e-12);
        let z = a.apply(1, &x);
        assert!((z[0] - 0.49).abs() < 1e-12);
    }
}
