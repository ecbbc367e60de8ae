//! Online execution: the online policy picks buses among those already at the departure CP,
//! while the time-window planner replays the frozen offline policy to decide relocations.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BusId, CpId, LineId, Minute, ObjectiveReport, ProblemInstance, Schedule, TravelOverride};
use crate::ppo::{train_from, EpisodeSource, GreedyPolicy, PolicyNet, TrainConfig, TrainOutcome};
use crate::rollout::{finish_episode, Environment, Policy};
use crate::screening::{Mode, Route};
use crate::sim::{DispatchSim, Observation, SimConfig, StepOutcome, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindowConfig {
    pub window_minutes: Minute,
}

impl Default for TimeWindowConfig {
    fn default() -> Self {
        Self { window_minutes: 60 }
    }
}

impl TimeWindowConfig {
    /// The window has to reach past the slowest relocation, or some orders could never fire.
    pub fn validate(&self, instance: &ProblemInstance) -> Result<()> {
        let floor = instance.max_deadhead() + instance.r_min();
        if self.window_minutes <= 0 || self.window_minutes <= floor {
            return Err(Error::Config(format!(
                "time window of {} minutes must exceed max deadhead plus r_min ({floor})",
                self.window_minutes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadheadOrder {
    pub bus_id: BusId,
    pub from_cp: CpId,
    pub to_cp: CpId,
    /// Decision minute at which the order was issued.
    pub issued_minute: Minute,
    /// Departure of the relocation: the issue minute, or the bus's arrival if that is later.
    pub dispatch_minute: Minute,
    /// Arrival of the bus's last trip that the plan assumes.
    pub bus_free_at: Minute,
    pub deadhead_minutes: Minute,
    /// Combined-timetable entry the relocation serves.
    pub trigger_entry: usize,
    pub trigger_minute: Minute,
}

impl DeadheadOrder {
    /// Latest departure that still reaches the trigger with `r_min` to spare.
    pub fn latest_departure(&self, r_min: Minute) -> Minute {
        latest_departure(self.trigger_minute, r_min, self.deadhead_minutes)
    }
}

pub fn latest_departure(t_j: Minute, r_min: Minute, k: Minute) -> Minute {
    t_j - r_min - k
}

/// An order fires at the last decision before its latest departure. `t_next` is `None` at
/// the final entry.
pub fn due_now(t_e: Minute, t_i: Minute, t_next: Option<Minute>) -> bool {
    t_i <= t_e && t_next.map_or(true, |n| t_e < n)
}

fn lookahead_config(live: &SimConfig) -> SimConfig {
    SimConfig {
        mode: Mode::Offline,
        ..*live
    }
}

/// Replays the offline policy greedily from the current entry through `now + W` on a fork
/// and returns the relocations that must start before the next decision.
pub fn plan_deadheads(
    sim: &DispatchSim,
    offline: &PolicyNet,
    window: &TimeWindowConfig,
) -> Result<Vec<DeadheadOrder>> {
    let Some(t_i) = sim.now() else {
        return Ok(Vec::new());
    };
    let t_next = sim.next_minute();
    if t_next.is_none() {
        return Ok(Vec::new());
    }
    let r_min = sim.instance().r_min();
    let cfg = lookahead_config(sim.config());
    let n_slots = sim.world().n_slots(cfg.screening);
    if offline.arch().n_actions != n_slots || offline.arch().input_dim != sim.world().state_dim(cfg.screening) {
        return Err(Error::ModelMismatch(format!(
            "offline policy has shape {}x{}, lookahead needs {}x{n_slots}",
            offline.arch().input_dim,
            offline.arch().n_actions,
            sim.world().state_dim(cfg.screening)
        )));
    }

    let mut fork = sim.fork_from(cfg, t_i)?;
    let mut policy = GreedyPolicy { net: offline };
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let mut ordered = BTreeSet::new();
    let mut orders = Vec::new();
    while let (Some(obs), Some(entry)) = (fork.observation(), fork.current_entry()) {
        if entry.minute > t_i + window.window_minutes {
            break;
        }
        if !obs.has_valid_action() {
            fork.skip_uncovered()?;
            continue;
        }
        let obs = obs.clone();
        let choice = policy.choose(&obs, &mut rng)?;
        let bus = fork.screening().and_then(|s| s.target_set[choice.slot]).ok_or(Error::NoValidAction)?;
        let route = fork.classified().and_then(|c| c.route_of(bus));
        let status = fork.statuses().map(|s| s[bus]);
        let index = fork.state().entry_index;
        fork.step(choice.slot)?;

        let (Some(Route::Deadhead), Some(status)) = (route, status) else {
            continue;
        };
        if entry.minute <= t_i || ordered.contains(&bus) {
            continue;
        }
        let k = status.deadhead_needed;
        let t_e = latest_departure(entry.minute, r_min, k);
        if !due_now(t_e, t_i, t_next) {
            continue;
        }
        let Some(from_cp) = status.location else { continue };
        let dispatch = t_i.max(status.last_arrival);
        if dispatch > t_e {
            continue;
        }
        ordered.insert(bus);
        orders.push(DeadheadOrder {
            bus_id: bus,
            from_cp,
            to_cp: entry.cp_id,
            issued_minute: t_i,
            dispatch_minute: dispatch,
            bus_free_at: status.last_arrival,
            deadhead_minutes: k,
            trigger_entry: index,
            trigger_minute: entry.minute,
        });
    }
    Ok(orders)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub entry_index: usize,
    pub minute: Minute,
    pub cp_id: CpId,
    pub line_id: LineId,
    pub bus: Option<BusId>,
    /// Relocations committed at this decision.
    pub orders: Vec<DeadheadOrder>,
}

/// An online simulator whose relocations come from the time-window planner.
///
/// Orders are planned just before each decision and committed right after it, still at the
/// decision minute. An order whose bus the live decision has just used is dropped: the live
/// selection wins conflicts.
#[derive(Debug, Clone)]
pub struct OnlineEnv {
    sim: DispatchSim,
    offline: Arc<PolicyNet>,
    window: TimeWindowConfig,
    planned: Vec<DeadheadOrder>,
    log: Vec<DecisionRecord>,
}

impl OnlineEnv {
    pub fn new(world: World, config: SimConfig, offline: Arc<PolicyNet>, window: TimeWindowConfig, seed: u64) -> Result<Self> {
        if config.mode != Mode::Online {
            return Err(Error::Config("online environment needs an online-mode simulator".into()));
        }
        window.validate(&world.instance)?;
        let sim = DispatchSim::reset_in(world, config, seed)?;
        let planned = plan_deadheads(&sim, &offline, &window)?;
        Ok(Self {
            sim,
            offline,
            window,
            planned,
            log: Vec::new(),
        })
    }

    pub fn sim(&self) -> &DispatchSim {
        &self.sim
    }

    pub fn log(&self) -> &[DecisionRecord] {
        &self.log
    }

    /// Orders planned for the current decision, not yet committed.
    pub fn planned_orders(&self) -> &[DeadheadOrder] {
        &self.planned
    }

    fn commit_orders(&mut self) -> Result<Vec<DeadheadOrder>> {
        let mut done = Vec::new();
        if self.sim.is_done() {
            return Ok(done);
        }
        for o in std::mem::take(&mut self.planned) {
            let live = &self.sim.state().buses[o.bus_id];
            if live.free_at != o.bus_free_at || live.cp != o.from_cp {
                log::debug!("dropping relocation of bus {} at {}: bus was reassigned", o.bus_id, o.issued_minute);
                continue;
            }
            self.sim.dispatch_deadhead(o.bus_id, o.to_cp, o.dispatch_minute)?;
            done.push(o);
        }
        Ok(done)
    }

    fn finish(&mut self, mut outcome: StepOutcome) -> Result<StepOutcome> {
        let orders = self.commit_orders()?;
        let entry = self.sim.world().timetable.entries[outcome.info.entry_index];
        self.log.push(DecisionRecord {
            entry_index: outcome.info.entry_index,
            minute: entry.minute,
            cp_id: entry.cp_id,
            line_id: entry.line_id,
            bus: outcome.info.bus,
            orders,
        });
        self.planned = plan_deadheads(&self.sim, &self.offline, &self.window)?;
        outcome.observation = self.sim.observation().cloned();
        Ok(outcome)
    }
}

impl Environment for OnlineEnv {
    fn observation(&self) -> Option<&Observation> {
        self.sim.observation()
    }

    fn step(&mut self, slot: usize) -> Result<StepOutcome> {
        let o = self.sim.step(slot)?;
        self.finish(o)
    }

    fn skip_uncovered(&mut self) -> Result<StepOutcome> {
        let o = self.sim.skip_uncovered()?;
        self.finish(o)
    }

    fn schedule(&self) -> Schedule {
        self.sim.schedule()
    }
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub schedule: Schedule,
    pub report: ObjectiveReport,
    pub total_reward: f64,
    pub log: Vec<DecisionRecord>,
}

/// Runs an instance (with whatever overrides it carries) under the online controller,
/// choosing buses greedily with `online`.
pub fn simulate_online(
    instance: Arc<ProblemInstance>,
    online: &PolicyNet,
    offline: Arc<PolicyNet>,
    window: TimeWindowConfig,
) -> Result<OnlineRun> {
    let mut env = OnlineEnv::new(World::new(instance), SimConfig::online(), offline, window, 0)?;
    let ep = finish_episode(&mut env, &mut GreedyPolicy { net: online }, 0)?;
    Ok(OnlineRun {
        total_reward: ep.trajectory.total_reward(),
        schedule: ep.schedule,
        report: ep.report,
        log: env.log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// +`extra` minutes on every line for departures inside one window.
    GlobalWindow,
    /// +`extra` minutes on one line all day.
    SingleLine,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub window_minutes: Minute,
    pub extra_minutes: Minute,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            window_minutes: 190,
            extra_minutes: 15,
        }
    }
}

pub fn scenario_overrides(
    instance: &ProblemInstance,
    kind: ScenarioKind,
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<TravelOverride> {
    let entries = crate::model::merge_timetables(instance).entries;
    let (Some(first), Some(last)) = (entries.first(), entries.last()) else {
        return Vec::new();
    };
    match kind {
        ScenarioKind::None => Vec::new(),
        ScenarioKind::GlobalWindow => {
            let latest = (last.minute - cfg.window_minutes).max(first.minute);
            let start = rng.gen_range(first.minute..=latest);
            vec![TravelOverride {
                line_id: None,
                start,
                end: start + cfg.window_minutes,
                extra_minutes: cfg.extra_minutes,
            }]
        }
        ScenarioKind::SingleLine => {
            let lines = instance.lines();
            let line = lines[rng.gen_range(0..lines.len())].id;
            vec![TravelOverride {
                line_id: Some(line),
                start: first.minute,
                end: last.minute + 1,
                extra_minutes: cfg.extra_minutes,
            }]
        }
    }
}

/// Online training episodes: each draws a disruption scenario on top of the base instance.
#[derive(Debug, Clone)]
pub struct OnlineSource {
    pub base: Arc<ProblemInstance>,
    pub offline: Arc<PolicyNet>,
    pub window: TimeWindowConfig,
    pub scenario: ScenarioConfig,
    pub randomize: bool,
    pub config: SimConfig,
}

impl OnlineSource {
    pub fn new(base: Arc<ProblemInstance>, offline: Arc<PolicyNet>, window: TimeWindowConfig) -> Self {
        Self {
            base,
            offline,
            window,
            scenario: ScenarioConfig::default(),
            randomize: true,
            config: SimConfig::online(),
        }
    }
}

impl EpisodeSource for OnlineSource {
    type Env = OnlineEnv;

    fn start(&self, episode_seed: u64, rng: &mut ChaCha8Rng) -> Result<OnlineEnv> {
        let world = if self.randomize {
            let kind = [ScenarioKind::GlobalWindow, ScenarioKind::SingleLine, ScenarioKind::None][rng.gen_range(0..3)];
            let overrides = scenario_overrides(&self.base, kind, &self.scenario, rng);
            World::new(Arc::new(self.base.with_overrides(overrides)?))
        } else {
            World::new(self.base.clone())
        };
        OnlineEnv::new(world, self.config, self.offline.clone(), self.window, episode_seed)
    }

    fn evaluation_env(&self) -> Result<OnlineEnv> {
        OnlineEnv::new(World::new(self.base.clone()), self.config, self.offline.clone(), self.window, 0)
    }
}

/// Trains the online selection policy, starting from the offline parameters, while the
/// frozen offline policy plans relocations.
pub fn train_online(source: &OnlineSource, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_from(source, (*source.offline).clone(), cfg)
}
