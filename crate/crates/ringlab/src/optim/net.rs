//! Shared-trunk policy/value network with hand-written backprop, plus the
//! actor-critic loss in both its literal and standard forms and the Adam
//! update with reward-regularized gradients.

use rand::Rng;

use crate::error::{Error, Result};

/// Value-loss weight in the standard actor-critic objective.
const VALUE_COEF: f64 = 0.5;

/// Two tanh hidden layers feeding a softmax policy head and a scalar value
/// head. All parameters live in one flat vector.
#[derive(Debug, Clone)]
pub struct PolicyValueNet {
    pub input_dim: usize,
    pub hidden: usize,
    pub actions: usize,
    params: Vec<f64>,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub policy: Vec<f64>,
    pub value: f64,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    len: usize,
}

impl PolicyValueNet {
    fn layout(input_dim: usize, hidden: usize, actions: usize) -> Layout {
        let (d, h, m) = (input_dim, hidden, actions);
        let w1 = 0;
        let b1 = w1 + h * d;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let wp = b2 + h;
        let bp = wp + m * h;
        let wv = bp + m;
        let bv = wv + h;
        Layout { w1, b1, w2, b2, wp, bp, wv, bv, len: bv + 1 }
    }

    pub fn new(input_dim: usize, hidden: usize, actions: usize, rng: &mut impl Rng) -> Self {
        let lay = Self::layout(input_dim, hidden, actions);
        let mut params = vec![0.0; lay.len];
        let mut init = |ofs: usize, n: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[ofs..ofs + n] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        init(lay.w1, hidden * input_dim, input_dim);
        init(lay.w2, hidden * hidden, hidden);
        init(lay.wp, actions * hidden, hidden);
        init(lay.wv, hidden, hidden);
        Self { input_dim, hidden, actions, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        assert_eq!(x.len(), self.input_dim);
        let (d, h, m) = (self.input_dim, self.hidden, self.actions);
        let lay = Self::layout(d, h, m);
        let p = &self.params;

        let mut h1 = vec![0.0; h];
        for i in 0..h {
            let mut z = p[lay.b1 + i];
            for j in 0..d {
                z += p[lay.w1 + i * d + j] * x[j];
            }
            h1[i] = z.tanh();
        }
        let mut h2 = vec![0.0; h];
        for i in 0..h {
            let mut z = p[lay.b2 + i];
            for j in 0..h {
                z += p[lay.w2 + i * h + j] * h1[j];
            }
            h2[i] = z.tanh();
        }
        let mut logits = vec![0.0; m];
        for a in 0..m {
            let mut z = p[lay.bp + a];
            for j in 0..h {
                z += p[lay.wp + a * h + j] * h2[j];
            }
            logits[a] = z;
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut policy: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = policy.iter().sum();
        for q in &mut policy {
            *q /= sum;
        }
        let mut value = p[lay.bv];
        for j in 0..h {
            value += p[lay.wv + j] * h2[j];
        }
        Forward { h1, h2, policy, value }
    }

    /// Accumulates parameter gradients given the upstream gradients on the
    /// policy logits and the value output.
    pub fn backward(
        &self,
        x: &[f64],
        fwd: &Forward,
        d_logits: &[f64],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let (d, h, m) = (self.input_dim, self.hidden, self.actions);
        let lay = Self::layout(d, h, m);
        let p = &self.params;
        debug_assert_eq!(grad.len(), lay.len);

        let mut dh2 = vec![0.0; h];
        for a in 0..m {
            grad[lay.bp + a] += d_logits[a];
            for j in 0..h {
                grad[lay.wp + a * h + j] += d_logits[a] * fwd.h2[j];
                dh2[j] += d_logits[a] * p[lay.wp + a * h + j];
            }
        }
        grad[lay.bv] += d_value;
        for j in 0..h {
            grad[lay.wv + j] += d_value * fwd.h2[j];
            dh2[j] += d_value * p[lay.wv + j];
        }

        let mut dh1 = vec![0.0; h];
        for i in 0..h {
            let dz = dh2[i] * (1.0 - fwd.h2[i] * fwd.h2[i]);
            grad[lay.b2 + i] += dz;
            for j in 0..h {
                grad[lay.w2 + i * h + j] += dz * fwd.h1[j];
                dh1[j] += dz * p[lay.w2 + i * h + j];
            }
        }
        for i in 0..h {
            let dz = dh1[i] * (1.0 - fwd.h1[i] * fwd.h1[i]);
            grad[lay.b1 + i] += dz;
            for j in 0..d {
                grad[lay.w1 + i * d + j] += dz * x[j];
            }
        }
    }
}

/// Shannon entropy of a policy vector, with 0*log(0) = 0.
pub fn policy_entropy(policy: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &q in policy {
        if !(q >= 0.0) || q > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("policy entry {q} outside [0, 1]")));
        }
        sum += q;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("policy sums to {sum}, not 1")));
    }
    Ok(policy.iter().map(|&q| if q > 0.0 { -q * q.ln() } else { 0.0 }).sum())
}

/// One step of an episode as seen by the loss.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// Which cost function drives the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// Conventional actor-critic: policy term log pi * (R - V) with a
    /// detached advantage, value term (R - V)^2, entropy bonus (default).
    #[default]
    Standard,
    /// Verbatim product form: log pi * V * sum(R) plus the entropy bonus.
    Literal,
}

/// Discounted returns R_k = r_k + gamma * R_{k+1}, seeded by the bootstrap
/// value of the state after the last step.
pub fn compute_returns(trajectory: &[Step], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let n = trajectory.len();
    let mut returns = vec![0.0; n];
    let mut run = bootstrap;
    for k in (0..n).rev() {
        run = trajectory[k].reward + gamma * run;
        returns[k] = run;
    }
    returns
}

/// Computes the scalar loss (to be minimized) and its parameter gradient
/// over one trajectory. In standard mode the advantages of the policy term
/// are detached: they are computed once from the current parameters and
/// enter the loss as data.
pub fn a3c_loss(
    net: &PolicyValueNet,
    trajectory: &[Step],
    bootstrap: f64,
    gamma: f64,
    beta: f64,
    mode: LossMode,
) -> Result<(f64, Vec<f64>)> {
    if trajectory.is_empty() {
        return Err(Error::Domain("empty trajectory".into()));
    }
    let returns = compute_returns(trajectory, bootstrap, gamma);
    let advantages: Vec<f64> = trajectory
        .iter()
        .zip(&returns)
        .map(|(s, r)| r - net.forward(&s.state).value)
        .collect();
    a3c_loss_frozen(net, trajectory, &returns, &advantages, beta, mode)
}

/// The differentiable core of the loss: `returns` and `advantages` are
/// plain data, so the analytic gradient here matches finite differences of
/// this exact function. `advantages` is only read in standard mode.
pub fn a3c_loss_frozen(
    net: &PolicyValueNet,
    trajectory: &[Step],
    returns: &[f64],
    advantages: &[f64],
    beta: f64,
    mode: LossMode,
) -> Result<(f64, Vec<f64>)> {
    if trajectory.is_empty() {
        return Err(Error::Domain("empty trajectory".into()));
    }
    let sum_r: f64 = trajectory.iter().map(|s| s.reward).sum();

    let mut loss = 0.0;
    let mut grad = vec![0.0; net.n_params()];
    for (k, step) in trajectory.iter().enumerate() {
        let fwd = net.forward(&step.state);
        let pi = &fwd.policy;
        let a = step.action;
        let log_pi_a = pi[a].max(1e-300).ln();
        let entropy = policy_entropy(pi)?;

        let mut d_logits = vec![0.0; net.actions];
        let d_value;
        match mode {
            LossMode::Standard => {
                let adv = advantages[k];
                let residual = returns[k] - fwd.value;
                loss += -log_pi_a * adv + VALUE_COEF * residual * residual - beta * entropy;
                for (i, q) in pi.iter().enumerate() {
                    let indicator = if i == a { 1.0 } else { 0.0 };
                    d_logits[i] = -adv * (indicator - q)
                        + beta * q * (q.max(1e-300).ln() + entropy);
                }
                d_value = -2.0 * VALUE_COEF * residual;
            }
            LossMode::Literal => {
                loss += -(log_pi_a * fwd.value * sum_r) - beta * entropy;
                for (i, q) in pi.iter().enumerate() {
                    let indicator = if i == a { 1.0 } else { 0.0 };
                    d_logits[i] = -fwd.value * sum_r * (indicator - q)
                        + beta * q * (q.max(1e-300).ln() + entropy);
                }
                d_value = -log_pi_a * sum_r;
            }
        }
        net.backward(&step.state, &fwd, &d_logits, d_value, &mut grad);
    }
    Ok((loss, grad))
}

/// Adam state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Applies the reward-regularized global update: the scalar eta * sum(R) is
/// broadcast onto every gradient component, then one Adam step runs.
/// Non-finite gradients skip the update and report false.
pub fn global_update(
    net: &mut PolicyValueNet,
    adam: &mut Adam,
    grad: &[f64],
    sum_r: f64,
    eta: f64,
) -> bool {
    let extra = eta * sum_r;
    if grad.iter().any(|g| !g.is_finite()) || !extra.is_finite() {
        return false;
    }
    let regularized: Vec<f64> = grad.iter().map(|g| g + extra).collect();
    adam.step(net.params_mut(), &regularized);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::substream;

    #[test]
    fn entropy_reference_values() {
        let m = 13;
        let uniform = vec![1.0 / m as f64; m];
        let h = policy_entropy(&uniform).unwrap();
        assert!((h - (m as f64).ln()).abs() < 1e-12);
        assert!((h - 2.5649).abs() < 1e-4);

        let mut one_hot = vec![0.0; 5];
        one_hot[2] = 1.0;
        assert!(policy_entropy(&one_hot).unwrap().abs() < 1e-15);

        let h2 = policy_entropy(&[0.5, 0.5]).unwrap();
        assert!((h2 - 2f64.ln()).abs() < 1e-12);

        assert!(policy_entropy(&[0.5, 0.4]).is_err());
        assert!(policy_entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn policy_is_normalized() {
        let mut rng = substream(3, "net", 0);
        let net = PolicyValueNet::new(4, 16, 9, &mut rng);
        let fwd = net.forward(&[0.3, 0.8, 0.1, 0.5]);
        let sum: f64 = fwd.policy.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(fwd.policy.iter().all(|&q| q >= 0.0));
    }

    #[test]
    fn literal_one_step_loss_value() {
        // With beta = 0 the literal loss is -log pi(a|s) * V(s) * R.
        let mut rng = substream(11, "net", 1);
        let net = PolicyValueNet::new(2, 6, 3, &mut rng);
        let state = vec![0.2, 0.9];
        let traj = vec![Step { state: state.clone(), action: 1, reward: 2.5 }];
        let (loss, _) = a3c_loss(&net, &traj, 0.0, 0.99, 0.0, LossMode::Literal).unwrap();
        let fwd = net.forward(&state);
        let expected = -(fwd.policy[1].ln() * fwd.value * 2.5);
        assert!((loss - expected).abs() < 1e-12);
    }

    fn finite_difference_check(mode: LossMode, seed: u64) -> f64 {
        let mut rng = substream(seed, "fd", 0);
        let dims = 1 + (seed % 3) as usize;
        let actions = 2 * dims + 1;
        let mut net = PolicyValueNet::new(dims, 4, actions, &mut rng);
        use rand::Rng;
        let traj: Vec<Step> = (0..3)
            .map(|_| Step {
                state: (0..dims).map(|_| rng.gen_range(0.0..1.0)).collect(),
                action: rng.gen_range(0..actions),
                reward: rng.gen_range(-1.0..2.0),
            })
            .collect();
        let bootstrap = rng.gen_range(-0.5..0.5);
        let returns = compute_returns(&traj, bootstrap, 0.97);
        let advantages: Vec<f64> = traj
            .iter()
            .zip(&returns)
            .map(|(s, r)| r - net.forward(&s.state).value)
            .collect();

        let loss_of = |net: &PolicyValueNet| {
            a3c_loss_frozen(net, &traj, &returns, &advantages, 0.05, mode).unwrap()
        };
        let (_, grad) = loss_of(&net);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..net.n_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let (lp, _) = loss_of(&net);
            net.params_mut()[i] = orig - h;
            let (lm, _) = loss_of(&net);
            net.params_mut()[i] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((grad[i] - numeric).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..8 {
            let e_std = finite_difference_check(LossMode::Standard, seed);
            assert!(e_std < 1e-4, "standard mode seed {seed}: rel err {e_std}");
            let e_lit = finite_difference_check(LossMode::Literal, seed);
            assert!(e_lit < 1e-4, "literal mode seed {seed}: rel err {e_lit}");
        }
    }

    #[test]
    fn large_entropy_bonus_pushes_toward_uniform() {
        let mut rng = substream(21, "net", 2);
        let mut net = PolicyValueNet::new(2, 8, 5, &mut rng);
        let state = vec![0.4, 0.6];
        let traj = vec![Step { state: state.clone(), action: 0, reward: 0.0 }];
        let h_before = policy_entropy(&net.forward(&state).policy).unwrap();
        let mut adam = Adam::new(net.n_params(), 0.05);
        for _ in 0..20 {
            let (_, grad) = a3c_loss(&net, &traj, 0.0, 0.99, 50.0, LossMode::Standard).unwrap();
            assert!(global_update(&mut net, &mut adam, &grad, 0.0, 0.0));
        }
        let h_after = policy_entropy(&net.forward(&state).policy).unwrap();
        assert!(h_after >= h_before - 1e-9, "{h_before} -> {h_after}");
    }

    #[test]
    fn global_update_contracts() {
        let mut rng = substream(5, "net", 3);
        let net0 = PolicyValueNet::new(2, 4, 5, &mut rng);

        // eta = 0: plain Adam step; verify against a hand-computed step for
        // a constant gradient (first step moves every param by -lr).
        let mut net = net0.clone();
        let mut adam = Adam::new(net.n_params(), 1e-3);
        let grad = vec![0.25; net.n_params()];
        assert!(global_update(&mut net, &mut adam, &grad, 3.0, 0.0));
        for (a, b) in net0.params().iter().zip(net.params()) {
            let delta = b - a;
            assert!((delta + 1e-3).abs() < 1e-9, "delta {delta}");
        }

        // Zero gradient with eta*sum_r = g: every component moves equally.
        let mut net = net0.clone();
        let mut adam = Adam::new(net.n_params(), 1e-3);
        let zeros = vec![0.0; net.n_params()];
        assert!(global_update(&mut net, &mut adam, &zeros, 2.0, 0.5));
        let deltas: Vec<f64> =
            net0.params().iter().zip(net.params()).map(|(a, b)| b - a).collect();
        for d in &deltas {
            assert!((d - deltas[0]).abs() < 1e-12);
        }

        // Determinism: identical calls from identical state match bitwise.
        let mut n1 = net0.clone();
        let mut a1 = Adam::new(n1.n_params(), 1e-3);
        let mut n2 = net0.clone();
        let mut a2 = Adam::new(n2.n_params(), 1e-3);
        let g = vec![0.1; n1.n_params()];
        global_update(&mut n1, &mut a1, &g, 1.0, 1e-4);
        global_update(&mut n2, &mut a2, &g, 1.0, 1e-4);
        assert_eq!(n1.params(), n2.params());

        // Non-finite gradients skip the update.
        let mut net = net0.clone();
        let mut adam = Adam::new(net.n_params(), 1e-3);
        let mut bad = vec![0.0; net.n_params()];
        bad[0] = f64::NAN;
        assert!(!global_update(&mut net, &mut adam, &bad, 1.0, 0.0));
        assert_eq!(net.params(), net0.params());
    }
}
