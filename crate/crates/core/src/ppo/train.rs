//! The collect-then-update training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::{prepare_trajectory, samples, update, Hyperparams, Learner, Objective, UpdateStats};
use super::net::{policy_forward, Architecture, PolicyNet};
use crate::error::{Error, Result};
use crate::model::ObjectiveReport;
use crate::rollout::{episode_seed, finish_episode, rollout, Choice, Environment, Episode, Policy};
use crate::sim::{DispatchSim, Observation, SimConfig, World};

/// Samples from the masked categorical.
pub struct SamplingPolicy<'a> {
    pub net: &'a PolicyNet,
}

impl Policy for SamplingPolicy<'_> {
    fn choose(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Choice> {
        let p = policy_forward(self.net, obs.state.as_slice(), &obs.mask)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_valid = None;
        for (slot, &pi) in p.iter().enumerate() {
            if pi <= 0.0 {
                continue;
            }
            last_valid = Some(slot);
            acc += pi;
            if u < acc {
                return Ok(Choice { slot, prob: pi });
            }
        }
        // rounding left u above the cumulative sum
        let slot = last_valid.ok_or(Error::NoValidAction)?;
        Ok(Choice { slot, prob: p[slot] })
    }
}

/// Argmax over valid slots; ties go to the lower slot.
pub struct GreedyPolicy<'a> {
    pub net: &'a PolicyNet,
}

impl Policy for GreedyPolicy<'_> {
    fn choose(&mut self, obs: &Observation, _: &mut ChaCha8Rng) -> Result<Choice> {
        let p = policy_forward(self.net, obs.state.as_slice(), &obs.mask)?;
        let mut best: Option<usize> = None;
        for (slot, &pi) in p.iter().enumerate() {
            if obs.mask[slot] && best.map_or(true, |b| pi > p[b]) {
                best = Some(slot);
            }
        }
        let slot = best.ok_or(Error::NoValidAction)?;
        Ok(Choice { slot, prob: p[slot] })
    }
}

/// Produces fresh environments for training episodes and evaluation runs.
pub trait EpisodeSource: Sync {
    type Env: Environment + Send;

    fn start(&self, episode_seed: u64, rng: &mut ChaCha8Rng) -> Result<Self::Env>;

    /// Environment used for greedy evaluation.
    fn evaluation_env(&self) -> Result<Self::Env>;
}

/// Plain offline (or online without deadhead planning) simulator episodes.
#[derive(Debug, Clone)]
pub struct SimSource {
    pub world: World,
    pub config: SimConfig,
}

impl EpisodeSource for SimSource {
    type Env = DispatchSim;

    fn start(&self, episode_seed: u64, _: &mut ChaCha8Rng) -> Result<DispatchSim> {
        DispatchSim::reset_in(self.world.clone(), self.config, episode_seed)
    }

    fn evaluation_env(&self) -> Result<DispatchSim> {
        DispatchSim::reset_in(self.world.clone(), self.config, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hyper: Hyperparams,
    pub objective: Objective,
    pub episodes: usize,
    pub seed: u64,
    /// Greedy evaluation cadence in iterations; 0 evaluates only at the end.
    pub eval_every: usize,
    /// Return the best-evaluated parameters instead of the last ones.
    pub keep_best: bool,
    pub hidden: [usize; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            objective: Objective::Ppo,
            episodes: 1000,
            seed: 0,
            eval_every: 10,
            keep_best: true,
            hidden: super::net::DEFAULT_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub accumulated_reward: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: ObjectiveReport,
    pub total_reward: f64,
}

impl Evaluation {
    fn better_than(&self, other: &Evaluation) -> bool {
        match self.report.lex_key().cmp(&other.report.lex_key()) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.total_reward > other.total_reward,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: PolicyNet,
    /// One point per training episode, in episode order.
    pub curve: Vec<CurvePoint>,
    pub evaluation: Evaluation,
    pub last_update: UpdateStats,
}

pub fn evaluate<S: EpisodeSource>(source: &S, net: &PolicyNet) -> Result<(Episode, Evaluation)> {
    let mut env = source.evaluation_env()?;
    let ep = finish_episode(&mut env, &mut GreedyPolicy { net }, 0)?;
    let eval = Evaluation {
        report: ep.report,
        total_reward: ep.trajectory.total_reward(),
    };
    Ok((ep, eval))
}

/// Trains a fresh network of shape `arch`.
pub fn train<S: EpisodeSource>(source: &S, arch: Architecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let arch = Architecture { hidden: cfg.hidden, ..arch };
    train_from(source, PolicyNet::init(arch, cfg.seed), cfg)
}

pub fn train_from<S: EpisodeSource>(source: &S, net: PolicyNet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.hyper.validate()?;
    let hp = cfg.hyper;
    let mut learner = Learner::new(net, &hp);
    let mut update_rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, u64::MAX));
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut last_update = UpdateStats::default();

    let (_, mut best_eval) = evaluate(source, &learner.net)?;
    let mut best_net = learner.net.clone();

    let mut episode = 0usize;
    let mut iteration = 0usize;
    while episode < cfg.episodes {
        let batch_size = hp.episodes_per_iteration.min(cfg.episodes - episode);
        let net = &learner.net;
        let mut trajectories = (episode..episode + batch_size)
            .into_par_iter()
            .map(|e| {
                let seed = episode_seed(cfg.seed, e as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut env = source.start(seed, &mut rng)?;
                let mut t = rollout(&mut env, &mut SamplingPolicy { net }, &mut rng)?;
                t.seed = seed;
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        for t in &mut trajectories {
            prepare_trajectory(t, &learner.net, hp.gamma)?;
            episode += 1;
            curve.push(CurvePoint {
                episode,
                accumulated_reward: t.total_reward(),
            });
        }
        let batch = samples(&trajectories);
        last_update = update(&mut learner, &batch, &hp, cfg.objective, &mut update_rng)?;
        iteration += 1;

        let at_end = episode >= cfg.episodes;
        if cfg.keep_best && ((cfg.eval_every > 0 && iteration % cfg.eval_every == 0) || at_end) {
            let (_, eval) = evaluate(source, &learner.net)?;
            if eval.better_than(&best_eval) {
                best_eval = eval;
                best_net = learner.net.clone();
            }
        }
    }

    let (net, evaluation) = if cfg.keep_best {
        (best_net, best_eval)
    } else {
        let (_, eval) = evaluate(source, &learner.net)?;
        (learner.net, eval)
    };
    Ok(TrainOutcome {
        net,
        curve,
        evaluation,
        last_update,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::two_line_data;
    use crate::model::ProblemInstance;
    use crate::sim::Observation;
    use crate::screening::StateVector;
    use std::sync::Arc;

    #[test]
    fn sampling_never_picks_masked_slots() {
        let net = PolicyNet::init(Architecture::new(3, 5), 0);
        let obs = Observation {
            state: StateVector(vec![0.2, -0.4, 1.0]),
            mask: vec![false, true, false, true, false],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pol = SamplingPolicy { net: &net };
        for _ in 0..500 {
            let c = pol.choose(&obs, &mut rng).unwrap();
            assert!(obs.mask[c.slot]);
            assert!(c.prob > 0.0);
        }
    }

    #[test]
    fn curve_has_one_point_per_episode_and_is_reproducible() {
        let inst = Arc::new(ProblemInstance::new(two_line_data()).unwrap());
        let source = SimSource { world: World::new(inst), config: SimConfig::offline() };
        let cfg = TrainConfig { episodes: 10, eval_every: 1, ..TrainConfig::default() };
        let arch = Architecture::new(source.world.state_dim(source.config.screening), 8);
        let a = train(&source, arch, &cfg).unwrap();
        let b = train(&source, arch, &cfg).unwrap();
        assert_eq!(a.curve.len(), 10);
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.net, b.net);
        assert!(a.net.is_finite());
    }
}
