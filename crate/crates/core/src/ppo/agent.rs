//! Returns, advantages, the clipped surrogate and gradient updates.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::net::{masked_softmax, value_forward, PolicyNet};
use crate::error::{Error, Result};
use crate::rollout::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Adam's denominator constant.
    pub adam_epsilon: f64,
    pub epochs: usize,
    /// Samples per gradient step; 0 means the whole batch.
    pub minibatch_size: usize,
    pub episodes_per_iteration: usize,
    pub critic_coef: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.1,
            gamma: 0.99,
            learning_rate: 1e-5,
            adam_epsilon: 1e-5,
            epochs: 4,
            minibatch_size: 4,
            episodes_per_iteration: 4,
            critic_coef: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.adam_epsilon > 0.0) {
            return bad("learning rate and Adam epsilon must be positive");
        }
        if self.epochs == 0 || self.episodes_per_iteration == 0 {
            return bad("epochs and episodes per iteration must be at least 1");
        }
        Ok(())
    }
}

/// `R_t = sum_{i >= t} gamma^(i - t) r_i`.
pub fn rewards_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

pub fn advantages(returns: &[f64], values: &[f64]) -> Vec<f64> {
    returns.iter().zip(values).map(|(r, v)| r - v).collect()
}

/// `min(ratio * A, g(eps, A))` with `g = (1 + eps) A` for `A >= 0`, `(1 - eps) A` otherwise.
pub fn clip_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let g = if advantage >= 0.0 {
        (1.0 + eps) * advantage
    } else {
        (1.0 - eps) * advantage
    };
    (ratio * advantage).min(g)
}

/// Fills `returns` and `advantages` using the current critic.
pub fn prepare_trajectory(traj: &mut Trajectory, net: &PolicyNet, gamma: f64) -> Result<()> {
    traj.returns = rewards_to_go(&traj.rewards(), gamma);
    let values = traj
        .steps
        .iter()
        .map(|s| value_forward(net, &s.state))
        .collect::<Result<Vec<_>>>()?;
    traj.advantages = advantages(&traj.returns, &values);
    Ok(())
}

/// One decision usable for a gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub behavior_prob: f64,
    pub ret: f64,
    pub advantage: f64,
}

/// Decisions with an action, in trajectory order. Skipped entries carry reward but no gradient.
pub fn samples(trajectories: &[Trajectory]) -> Vec<Sample> {
    trajectories
        .iter()
        .flat_map(|t| {
            t.steps.iter().enumerate().filter_map(|(i, s)| {
                s.action.map(|action| Sample {
                    state: s.state.clone(),
                    mask: s.mask.clone(),
                    action,
                    behavior_prob: s.behavior_prob,
                    ret: t.returns[i],
                    advantage: t.advantages[i],
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    /// Mean surrogate (clip objective, or return-weighted log-probability).
    pub objective: f64,
    pub value_loss: f64,
    /// What the optimiser minimises.
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Ppo,
    Reinforce,
}

/// `loss = -mean(clip objective) + c * mean((V - R)^2)` and its gradient.
pub fn ppo_loss_grad(
    net: &PolicyNet,
    batch: &[&Sample],
    eps: f64,
    critic_coef: f64,
) -> Result<(LossTerms, Vec<f64>)> {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; net.n_params()];
    let mut terms = LossTerms::default();
    for s in batch {
        let fwd = net.forward(&s.state)?;
        let p = masked_softmax(&fwd.logits, &s.mask)?;
        let ratio = p[s.action] / s.behavior_prob;
        let a = s.advantage;
        let obj = clip_objective(ratio, a, eps);
        terms.objective += obj / n;
        let mut dlogits = vec![0.0; p.len()];
        if ratio * a <= obj {
            // unclipped branch: d(ratio * A)/d logit_j = A * ratio * (1[j = a] - p_j)
            for (j, d) in dlogits.iter_mut().enumerate() {
                if s.mask[j] {
                    let onehot = if j == s.action { 1.0 } else { 0.0 };
                    *d = -a * ratio * (onehot - p[j]) / n;
                }
            }
        }
        let err = fwd.value - s.ret;
        terms.value_loss += err * err / n;
        net.backward(&fwd, &dlogits, critic_coef * 2.0 * err / n, &mut grad);
    }
    terms.loss = -terms.objective + critic_coef * terms.value_loss;
    Ok((terms, grad))
}

/// `loss = -mean(R * log pi(a|s))`; the critic is untouched.
pub fn reinforce_loss_grad(net: &PolicyNet, batch: &[&Sample]) -> Result<(LossTerms, Vec<f64>)> {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; net.n_params()];
    let mut terms = LossTerms::default();
    for s in batch {
        let fwd = net.forward(&s.state)?;
        let p = masked_softmax(&fwd.logits, &s.mask)?;
        terms.objective += s.ret * p[s.action].ln() / n;
        let dlogits: Vec<f64> = (0..p.len())
            .map(|j| {
                if !s.mask[j] {
                    return 0.0;
                }
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                -s.ret * (onehot - p[j]) / n
            })
            .collect();
        net.backward(&fwd, &dlogits, 0.0, &mut grad);
    }
    terms.loss = -terms.objective;
    Ok((terms, grad))
}

/// Network plus optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub net: PolicyNet,
    pub adam: Adam,
}

impl Learner {
    pub fn new(net: PolicyNet, hp: &Hyperparams) -> Self {
        let adam = Adam::new(net.n_params(), hp.learning_rate, hp.adam_epsilon);
        Self { net, adam }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub gradient_steps: usize,
    pub mean_objective: f64,
    pub mean_value_loss: f64,
}

/// Runs `epochs` passes over `samples` in shuffled minibatches. On a non-finite loss,
/// gradient or parameter the learner is restored to its state before the call.
pub fn update(
    learner: &mut Learner,
    samples: &[Sample],
    hp: &Hyperparams,
    objective: Objective,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let mut stats = UpdateStats::default();
    if samples.is_empty() {
        return Ok(stats);
    }
    let snapshot = learner.clone();
    let mb = if hp.minibatch_size == 0 {
        samples.len()
    } else {
        hp.minibatch_size
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..hp.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mb) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (terms, grad) = match objective {
                Objective::Ppo => ppo_loss_grad(&learner.net, &batch, hp.clip_epsilon, hp.critic_coef)?,
                Objective::Reinforce => reinforce_loss_grad(&learner.net, &batch)?,
            };
            if !terms.loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                *learner = snapshot;
                return Err(Error::NonFinite("loss or gradient; update rolled back".into()));
            }
            learner.adam.step(learner.net.params_mut(), &grad);
            if !learner.net.is_finite() {
                *learner = snapshot;
                return Err(Error::NonFinite("parameters; update rolled back".into()));
            }
            stats.gradient_steps += 1;
            stats.mean_objective += terms.objective;
            stats.mean_value_loss += terms.value_loss;
        }
    }
    stats.mean_objective /= stats.gradient_steps as f64;
    stats.mean_value_loss /= stats.gradient_steps as f64;
    Ok(stats)
}

pub fn reinforce_update(
    learner: &mut Learner,
    samples: &[Sample],
    hp: &Hyperparams,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    update(learner, samples, hp, Objective::Reinforce, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::net::{policy_forward, Architecture};
    use rand::{Rng, SeedableRng};

    #[test]
    fn rewards_to_go_examples() {
        assert_eq!(rewards_to_go(&[1.0, 1.0, 1.0], 1.0), vec![3.0, 2.0, 1.0]);
        assert_eq!(rewards_to_go(&[0.0, 0.0, 5.0], 0.5), vec![1.25, 2.5, 5.0]);
        assert_eq!(rewards_to_go(&[2.0, -1.0, 4.0], 0.0), vec![2.0, -1.0, 4.0]);
    }

    #[test]
    fn rewards_to_go_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..40);
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let gamma = rng.gen_range(0.0..=1.0);
            let fast = rewards_to_go(&r, gamma);
            for t in 0..n {
                let slow: f64 = (t..n).map(|i| gamma.powi((i - t) as i32) * r[i]).sum();
                assert!((fast[t] - slow).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(advantages(&[1.0, 2.0], &[1.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(advantages(&[2.0], &[0.5]), vec![1.5]);
        assert!(advantages(&[1.0], &[1.5])[0] < 0.0);
    }

    #[test]
    fn clip_branches() {
        assert_eq!(clip_objective(1.0, 2.0, 0.1), 2.0);
        assert_eq!(clip_objective(1.0, -3.0, 0.1), -3.0);
        assert!((clip_objective(1.5, 2.0, 0.1) - 2.2).abs() < 1e-12);
        assert!((clip_objective(0.5, -2.0, 0.1) - (-1.8)).abs() < 1e-12);
    }

    fn one_sample(net: &PolicyNet, advantage: f64, ret: f64) -> Sample {
        let state: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
        let mask = vec![true, true, false, true];
        let p = policy_forward(net, &state, &mask).unwrap();
        Sample { state, mask, action: 1, behavior_prob: p[1], ret, advantage }
    }

    fn small_arch() -> Architecture {
        Architecture { input_dim: 6, hidden: [10, 8, 6], n_actions: 4 }
    }

    #[test]
    fn positive_advantage_raises_taken_action() {
        let net = PolicyNet::init(small_arch(), 9);
        let s = one_sample(&net, 1.0, 0.0);
        let before = policy_forward(&net, &s.state, &s.mask).unwrap()[1];
        let hp = Hyperparams { learning_rate: 1e-3, epochs: 1, ..Hyperparams::default() };
        let mut l = Learner::new(net, &hp);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        update(&mut l, std::slice::from_ref(&s), &hp, Objective::Ppo, &mut rng).unwrap();
        let after = policy_forward(&l.net, &s.state, &s.mask).unwrap()[1];
        assert!(after >= before, "{after} < {before}");
    }

    #[test]
    fn zero_advantage_and_exact_critic_do_nothing() {
        let net = PolicyNet::init(small_arch(), 2);
        let mut s = one_sample(&net, 0.0, 0.0);
        s.ret = value_forward(&net, &s.state).unwrap();
        let hp = Hyperparams::default();
        let mut l = Learner::new(net.clone(), &hp);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        update(&mut l, &[s], &hp, Objective::Ppo, &mut rng).unwrap();
        let change: f64 = l
            .net
            .params()
            .iter()
            .zip(net.params())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(change < 1e-12, "{change}");
    }

    #[test]
    fn reinforce_zero_returns_do_nothing() {
        let net = PolicyNet::init(small_arch(), 4);
        let s = one_sample(&net, 0.0, 0.0);
        let hp = Hyperparams::default();
        let mut l = Learner::new(net.clone(), &hp);
        reinforce_update(&mut l, &[s], &hp, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(l.net, net);
    }

    #[test]
    fn reinforce_positive_return_raises_taken_action() {
        let net = PolicyNet::init(small_arch(), 4);
        let s = one_sample(&net, 0.0, 2.0);
        let before = policy_forward(&net, &s.state, &s.mask).unwrap()[1];
        let hp = Hyperparams { learning_rate: 1e-3, epochs: 1, ..Hyperparams::default() };
        let mut l = Learner::new(net, &hp);
        reinforce_update(&mut l, std::slice::from_ref(&s), &hp, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let after = policy_forward(&l.net, &s.state, &s.mask).unwrap()[1];
        assert!(after >= before);
        // critic head untouched
        let critic = l.net.layers()[4];
        assert_eq!(
            l.net.params()[critic.offset..critic.offset + critic.len()],
            Learner::new(PolicyNet::init(small_arch(), 4), &hp).net.params()
                [critic.offset..critic.offset + critic.len()]
        );
    }

    #[test]
    fn non_finite_update_rolls_back() {
        let net = PolicyNet::init(small_arch(), 4);
        let mut s = one_sample(&net, f64::NAN, 0.0);
        s.advantage = f64::INFINITY;
        let hp = Hyperparams::default();
        let mut l = Learner::new(net, &hp);
        let before = l.clone();
        let err = update(&mut l, &[s], &hp, Objective::Ppo, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(l, before);
    }
}
