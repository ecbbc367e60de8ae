//! Final and step-wise rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Minute, ObjectiveReport};
use crate::screening::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w1_final: f64,
    pub w2_final: f64,
    pub w1_step: f64,
    pub w2_step: f64,
    pub w3_step: f64,
    pub w4_step: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w1_final: 4.0,
            w2_final: 0.1,
            w1_step: 4.0,
            w2_step: 0.1,
            w3_step: 2.0,
            w4_step: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w1_final,
            self.w2_final,
            self.w1_step,
            self.w2_step,
            self.w3_step,
            self.w4_step,
        ];
        if all.iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("reward weights must be positive and finite".into()))
        }
    }
}

/// `combined` pays step-wise and final rewards; `final_only` keeps just the episode-end term
/// (and the uncovered-entry penalty).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Combined,
    FinalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub mode: RewardMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            mode: RewardMode::Combined,
        }
    }
}

/// Everything the step-wise reward needs about one executed selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub selected_used: bool,
    /// 1-based rest rank among used eligible buses; meaningful only when `selected_used`.
    pub rest_rank: usize,
    /// Number of used eligible buses.
    pub n_used_eligible: usize,
    pub deadhead_minutes: Minute,
    /// The selection came from `v_q`.
    pub via_deadhead: bool,
    /// Demand degree at the selected bus's CP.
    pub demand_origin: f64,
    /// Demand degree at the terminal CP of the departure's line.
    pub demand_terminal: f64,
    pub mode: Mode,
}

pub fn final_reward(report: &ObjectiveReport, w: &RewardWeights) -> f64 {
    -w.w1_final * report.n_used as f64 - w.w2_final * f64::from(report.deadhead_total)
}

/// `(N_o - p) / N_o` for a used selection; 0 for an unused one.
pub fn rest_rank_reward(selected_used: bool, rank: usize, n_used_eligible: usize) -> Result<f64> {
    if !selected_used {
        return Ok(0.0);
    }
    if n_used_eligible == 0 || rank == 0 || rank > n_used_eligible {
        return Err(Error::Contract(format!(
            "rest rank {rank} outside 1..={n_used_eligible}"
        )));
    }
    Ok((n_used_eligible - rank) as f64 / n_used_eligible as f64)
}

pub fn demand_degree(n_short_term: usize, n_used_available: usize) -> f64 {
    n_short_term as f64 / (n_used_available as f64 + 1.0)
}

pub fn step_reward(ctx: &StepContext, w: &RewardWeights) -> Result<f64> {
    let r_n = if !ctx.selected_used && ctx.n_used_eligible > 0 { 1.0 } else { 0.0 };
    let r_k = rest_rank_reward(ctx.selected_used, ctx.rest_rank, ctx.n_used_eligible)?;
    let (k, r_u) = match ctx.mode {
        Mode::Online => (0.0, 0.0),
        Mode::Offline => (
            f64::from(ctx.deadhead_minutes),
            if ctx.via_deadhead && ctx.demand_origin > ctx.demand_terminal { 1.0 } else { 0.0 },
        ),
    };
    Ok(-w.w1_step * r_n - w.w2_step * k + w.w3_step * r_k - w.w4_step * r_u)
}
