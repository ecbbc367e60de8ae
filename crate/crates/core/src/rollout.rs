//! Episodes: environments, policies and the trajectories they produce.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{compute_objectives, ObjectiveReport, ProblemInstance, Schedule};
use crate::sim::{DispatchSim, Observation, SimConfig, StepOutcome};

/// Anything that exposes decisions over a combined timetable.
pub trait Environment {
    fn observation(&self) -> Option<&Observation>;
    fn step(&mut self, slot: usize) -> Result<StepOutcome>;
    fn skip_uncovered(&mut self) -> Result<StepOutcome>;
    fn schedule(&self) -> Schedule;
}

impl Environment for DispatchSim {
    fn observation(&self) -> Option<&Observation> {
        DispatchSim::observation(self)
    }

    fn step(&mut self, slot: usize) -> Result<StepOutcome> {
        DispatchSim::step(self, slot)
    }

    fn skip_uncovered(&mut self) -> Result<StepOutcome> {
        DispatchSim::skip_uncovered(self)
    }

    fn schedule(&self) -> Schedule {
        DispatchSim::schedule(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub slot: usize,
    /// Probability with which the slot was chosen.
    pub prob: f64,
}

pub trait Policy {
    fn choose(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Choice>;
}

/// Always takes the highest-priority valid slot.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstValid;

impl Policy for FirstValid {
    fn choose(&mut self, obs: &Observation, _: &mut ChaCha8Rng) -> Result<Choice> {
        let slot = obs.mask.iter().position(|&m| m).ok_or(Error::NoValidAction)?;
        Ok(Choice { slot, prob: 1.0 })
    }
}

/// Uniform over valid slots.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformValid;

impl Policy for UniformValid {
    fn choose(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Choice> {
        let valid: Vec<usize> = (0..obs.mask.len()).filter(|&i| obs.mask[i]).collect();
        if valid.is_empty() {
            return Err(Error::NoValidAction);
        }
        Ok(Choice {
            slot: valid[rng.gen_range(0..valid.len())],
            prob: 1.0 / valid.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub mask: Vec<bool>,
    /// `None` for entries left uncovered because nothing was selectable.
    pub action: Option<usize>,
    pub behavior_prob: f64,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<Transition>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Runs `env` to completion. Entries with no selectable slot are skipped as uncovered.
pub fn rollout<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &mut E,
    policy: &mut P,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let mut steps = Vec::new();
    while let Some(obs) = env.observation() {
        let obs = obs.clone();
        let (outcome, action, prob) = if obs.has_valid_action() {
            let c = policy.choose(&obs, rng)?;
            (env.step(c.slot)?, Some(c.slot), c.prob)
        } else {
            (env.skip_uncovered()?, None, 1.0)
        };
        steps.push(Transition {
            state: obs.state.0,
            mask: obs.mask,
            action,
            behavior_prob: prob,
            reward: outcome.reward,
            done: outcome.done,
        });
        if outcome.done {
            break;
        }
    }
    Ok(Trajectory {
        steps,
        ..Trajectory::default()
    })
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub schedule: Schedule,
    pub report: ObjectiveReport,
    pub trajectory: Trajectory,
}

pub fn run_episode<P: Policy + ?Sized>(
    instance: Arc<ProblemInstance>,
    policy: &mut P,
    config: SimConfig,
    seed: u64,
) -> Result<Episode> {
    let mut sim = DispatchSim::reset(instance, config, seed)?;
    finish_episode(&mut sim, policy, seed)
}

pub fn finish_episode<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &mut E,
    policy: &mut P,
    seed: u64,
) -> Result<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectory = rollout(env, policy, &mut rng)?;
    trajectory.seed = seed;
    let schedule = env.schedule();
    Ok(Episode {
        report: compute_objectives(&schedule),
        schedule,
        trajectory,
    })
}

/// Deterministic per-episode seed derived from a run seed (SplitMix64 finaliser).
pub fn episode_seed(run_seed: u64, episode: u64) -> u64 {
    let mut z = run_seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(episode.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::two_line_data;
    use crate::model::validate_schedule;

    #[test]
    fn one_transition_per_entry() {
        let inst = Arc::new(ProblemInstance::new(two_line_data()).unwrap());
        let ep = run_episode(inst.clone(), &mut UniformValid, SimConfig::offline(), 3).unwrap();
        assert_eq!(ep.trajectory.steps.len(), 3);
        assert!(ep.trajectory.steps.last().unwrap().done);
        assert!(validate_schedule(&inst, &ep.schedule).is_empty());
        let again = run_episode(inst, &mut UniformValid, SimConfig::offline(), 3).unwrap();
        assert_eq!(ep.schedule, again.schedule);
    }

    #[test]
    fn episode_seeds_differ() {
        assert_ne!(episode_seed(0, 0), episode_seed(0, 1));
        assert_eq!(episode_seed(7, 3), episode_seed(7, 3));
    }
}
