//! Experiment configuration files. Command-line flags override whatever a file sets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use busched::reward::RewardMode;
use busched::screening::ScreeningMode;
use busched::Mode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    Reinforce,
    Greedy,
    Lns,
}

impl Algorithm {
    pub fn learns(self) -> bool {
        matches!(self, Algorithm::Ppo | Algorithm::Reinforce)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: Option<PathBuf>,
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub reward_mode: RewardMode,
    pub screening: ScreeningMode,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    /// Frozen offline policy used by the online planner.
    pub offline_model: Option<PathBuf>,
    pub window_minutes: i32,
    pub lns_iterations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instance: None,
            mode: Mode::Offline,
            algorithm: Algorithm::Ppo,
            reward_mode: RewardMode::Combined,
            screening: ScreeningMode::On,
            episodes: 1000,
            seeds: vec![0],
            output_dir: None,
            offline_model: None,
            window_minutes: 60,
            lns_iterations: 300,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing experiment config {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if !self.algorithm.learns() {
            if self.reward_mode != RewardMode::Combined {
                bail!("reward mode only applies to ppo and reinforce");
            }
            if self.screening != ScreeningMode::On {
                bail!("screening switch only applies to ppo and reinforce");
            }
        } else if self.episodes == 0 {
            bail!("learning algorithms need a positive episode budget");
        }
        if self.mode == Mode::Online {
            if self.algorithm != Algorithm::Ppo {
                bail!("online mode runs the ppo controller only");
            }
            if self.screening != ScreeningMode::On {
                bail!("the online controller requires screening");
            }
        }
        if self.lns_iterations == 0 {
            bail!("lns_iterations must be at least 1");
        }
        Ok(())
    }

    pub fn instance(&self) -> Result<&Path> {
        self.instance
            .as_deref()
            .context("no instance given (use --instance or set `instance` in the config)")
    }

    /// Flag, then config file, then `$BUSCHED_OUT`, then `out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os("BUSCHED_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
