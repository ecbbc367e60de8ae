//! The decision environment: one decision per combined-timetable entry.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    compute_objectives, initial_placement, merge_timetables, BusId, BusPlan, CombinedTimetable,
    CpId, Coverage, LineId, Minute, ObjectiveReport, ProblemInstance, Schedule, TimetableEntry, TripKind,
    TripRecord,
};
use crate::reward::{demand_degree, final_reward, step_reward, RewardConfig, RewardMode, StepContext};
use crate::screening::{
    build_state, build_target_set, classify_buses, cp_features, full_fleet_target, state_dim,
    BusStatus, Classified, CpFeatures, DemandIndex, Mode, Route, ScreeningMode, ScreeningResult,
    StateVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: Mode,
    pub screening: ScreeningMode,
    pub reward: RewardConfig,
    /// Service trips include the instance's travel-time overrides.
    pub apply_overrides: bool,
}

impl SimConfig {
    pub fn offline() -> Self {
        Self {
            mode: Mode::Offline,
            screening: ScreeningMode::On,
            reward: RewardConfig::default(),
            apply_overrides: false,
        }
    }

    /// Online runs see disruptions as they happen.
    pub fn online() -> Self {
        Self {
            mode: Mode::Online,
            apply_overrides: true,
            ..Self::offline()
        }
    }
}

/// Shared, read-only view of an instance plus its derived tables.
#[derive(Debug, Clone)]
pub struct World {
    pub instance: Arc<ProblemInstance>,
    pub timetable: Arc<CombinedTimetable>,
    pub demand: Arc<DemandIndex>,
}

impl World {
    pub fn new(instance: Arc<ProblemInstance>) -> Self {
        let timetable = Arc::new(merge_timetables(&instance));
        let demand = Arc::new(DemandIndex::new(&instance));
        Self {
            instance,
            timetable,
            demand,
        }
    }

    /// Number of action slots the policy sees under `screening`.
    pub fn n_slots(&self, screening: ScreeningMode) -> usize {
        match screening {
            ScreeningMode::On => self.instance.target_set_capacity(),
            ScreeningMode::Off => self.instance.fleet_size(),
        }
    }

    pub fn state_dim(&self, screening: ScreeningMode) -> usize {
        state_dim(self.instance.n_cps(), self.n_slots(screening))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BusRuntime {
    pub used: bool,
    /// Where the bus is parked, or where its current trip ends.
    pub cp: CpId,
    /// Arrival minute of its last trip (for unused buses, operation start minus `r_min`).
    pub free_at: Minute,
}

/// The dynamic part of the world. Replaying `trips` reproduces `buses`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    pub entry_index: usize,
    pub buses: Vec<BusRuntime>,
    pub trips: Vec<Vec<TripRecord>>,
    pub covered: Vec<Option<BusId>>,
    pub n_uncovered: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub state: StateVector,
    pub mask: Vec<bool>,
}

impl Observation {
    pub fn has_valid_action(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    pub entry_index: usize,
    pub bus: Option<BusId>,
    pub deadhead_minutes: Minute,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Observation for the next decision; `None` once done.
    pub observation: Option<Observation>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct Decision {
    statuses: Vec<BusStatus>,
    classified: Classified,
    screening: ScreeningResult,
    cps: Vec<CpFeatures>,
    observation: Observation,
}

#[derive(Debug, Clone)]
pub struct DispatchSim {
    world: World,
    config: SimConfig,
    state: SimState,
    op_start: Minute,
    decision: Option<Decision>,
    /// Set on lookahead forks: the minute the fork was taken from the live run.
    lookahead_from: Option<Minute>,
}

impl DispatchSim {
    pub fn reset(instance: Arc<ProblemInstance>, config: SimConfig, seed: u64) -> Result<Self> {
        Self::reset_in(World::new(instance), config, seed)
    }

    pub fn reset_in(world: World, config: SimConfig, seed: u64) -> Result<Self> {
        config.reward.weights.validate()?;
        let op_start = world.timetable.first_minute().ok_or(Error::EmptyTimetable)?;
        let r_min = world.instance.r_min();
        let buses = initial_placement(&world.instance)
            .into_iter()
            .map(|cp| BusRuntime {
                used: false,
                cp,
                free_at: op_start - r_min,
            })
            .collect::<Vec<_>>();
        let n = world.timetable.len();
        let state = SimState {
            entry_index: 0,
            trips: vec![Vec::new(); buses.len()],
            buses,
            covered: vec![None; n],
            n_uncovered: 0,
            seed,
        };
        let mut sim = Self {
            world,
            config,
            state,
            op_start,
            decision: None,
            lookahead_from: None,
        };
        sim.refresh()?;
        Ok(sim)
    }

    /// Independent copy that runs under another configuration, for lookahead.
    pub fn fork(&self, config: SimConfig) -> Result<Self> {
        let mut f = Self {
            world: self.world.clone(),
            config,
            state: self.state.clone(),
            op_start: self.op_start,
            decision: None,
            lookahead_from: self.lookahead_from,
        };
        f.refresh()?;
        Ok(f)
    }

    /// Lookahead fork taken at minute `now`. A relocation may not start before `now` or
    /// before the bus has arrived, so a deadhead is eligible only if
    /// `t_j - r_min - k >= max(now, a)` for last arrival `a`, and it departs at that lower
    /// bound. Travel times are forecast as those in effect at `now` (when the config applies
    /// overrides at all).
    pub fn fork_from(&self, config: SimConfig, now: Minute) -> Result<Self> {
        let mut f = self.clone();
        f.config = config;
        f.lookahead_from = Some(now);
        f.refresh()?;
        Ok(f)
    }

    fn deadhead_departure(&self, free_at: Minute) -> Minute {
        match self.lookahead_from {
            Some(now) => free_at.max(now),
            None => free_at + self.world.instance.r_min(),
        }
    }

    fn travel_time(&self, line: LineId, depart: Minute) -> Result<Minute> {
        let at = self.lookahead_from.unwrap_or(depart);
        self.world.instance.travel_time(line, at, self.config.apply_overrides)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.world.instance
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.state.hash(&mut h);
        h.finish()
    }

    pub fn is_done(&self) -> bool {
        self.state.entry_index >= self.world.timetable.len()
    }

    pub fn current_entry(&self) -> Option<TimetableEntry> {
        self.world.timetable.entries.get(self.state.entry_index).copied()
    }

    pub fn now(&self) -> Option<Minute> {
        self.current_entry().map(|e| e.minute)
    }

    /// Minute of the entry after the current one.
    pub fn next_minute(&self) -> Option<Minute> {
        self.world
            .timetable
            .entries
            .get(self.state.entry_index + 1)
            .map(|e| e.minute)
    }

    pub fn observation(&self) -> Option<&Observation> {
        self.decision.as_ref().map(|d| &d.observation)
    }

    pub fn screening(&self) -> Option<&ScreeningResult> {
        self.decision.as_ref().map(|d| &d.screening)
    }

    pub fn classified(&self) -> Option<&Classified> {
        self.decision.as_ref().map(|d| &d.classified)
    }

    pub fn statuses(&self) -> Option<&[BusStatus]> {
        self.decision.as_ref().map(|d| d.statuses.as_slice())
    }

    pub fn cp_features(&self) -> Option<&[CpFeatures]> {
        self.decision.as_ref().map(|d| d.cps.as_slice())
    }

    pub fn bus_status(&self, bus: BusId, now: Minute, dep_cp: CpId) -> Result<BusStatus> {
        let b = &self.state.buses[bus];
        Ok(if now < b.free_at {
            BusStatus {
                bus_id: bus,
                used: b.used,
                location: None,
                last_arrival: b.free_at,
                rest: 0,
                deadhead_needed: 0,
            }
        } else {
            BusStatus {
                bus_id: bus,
                used: b.used,
                location: Some(b.cp),
                last_arrival: b.free_at,
                rest: now - b.free_at,
                deadhead_needed: self.world.instance.deadhead(b.cp, dep_cp)?,
            }
        })
    }

    /// Rebuilds screening, features and the observation for the current entry.
    pub fn refresh(&mut self) -> Result<()> {
        let Some(entry) = self.current_entry() else {
            self.decision = None;
            return Ok(());
        };
        let inst = &self.world.instance;
        let statuses = (0..self.state.buses.len())
            .map(|b| self.bus_status(b, entry.minute, entry.cp_id))
            .collect::<Result<Vec<_>>>()?;
        let mut classified = classify_buses(&statuses, entry.cp_id, inst.r_min(), self.config.mode);
        if self.lookahead_from.is_some() {
            let r_min = inst.r_min();
            classified
                .v_q
                .retain(|b| entry.minute - r_min - b.deadhead_needed >= self.deadhead_departure(b.last_arrival));
        }
        let screening = match self.config.screening {
            ScreeningMode::On => {
                build_target_set(&classified.v_p, &classified.v_q, inst.target_set_capacity())
            }
            ScreeningMode::Off => full_fleet_target(&classified, inst.fleet_size()),
        };
        let cps = cp_features(&statuses, inst, &self.world.demand, entry.minute);
        let line = inst.line(entry.line_id)?;
        let travel = self.travel_time(line.id, entry.minute)?;
        let slots: Vec<Option<BusStatus>> = screening
            .target_set
            .iter()
            .map(|s| s.map(|b| statuses[b]))
            .collect();
        let observation = Observation {
            state: build_state(&cps, line, travel, &slots),
            mask: screening.mask(&classified),
        };
        self.decision = Some(Decision {
            statuses,
            classified,
            screening,
            cps,
            observation,
        });
        Ok(())
    }

    /// Executes the bus held in `slot` of the current target set.
    pub fn step(&mut self, slot: usize) -> Result<StepOutcome> {
        let d = self
            .decision
            .as_ref()
            .ok_or_else(|| Error::Contract("step after episode end".into()))?;
        if !d.observation.mask.get(slot).copied().unwrap_or(false) {
            return Err(Error::Contract(format!("slot {slot} is masked or out of range")));
        }
        let bus = d.screening.target_set[slot]
            .ok_or_else(|| Error::Contract(format!("slot {slot} is a sentinel")))?;
        self.assign_bus(bus)
    }

    /// Assigns `bus` to the current entry, bypassing target-set truncation. The bus must be
    /// eligible under the current mode.
    pub fn assign_bus(&mut self, bus: BusId) -> Result<StepOutcome> {
        let entry = self
            .current_entry()
            .ok_or_else(|| Error::Contract("assign after episode end".into()))?;
        let d = self.decision.as_ref().expect("decision exists while entries remain");
        let route = d
            .classified
            .route_of(bus)
            .ok_or_else(|| Error::Contract(format!("bus {bus} is not eligible at entry {}", self.state.entry_index)))?;
        let status = d.statuses[bus];
        let inst = &self.world.instance;
        let line = inst.line(entry.line_id)?;

        let used_order = d.classified.used_by_rest();
        let rest_rank = used_order.iter().position(|&b| b == bus).map_or(0, |p| p + 1);
        let cp_demand = |cp: CpId| {
            d.cps
                .iter()
                .find(|c| c.cp_id == cp)
                .map_or(0.0, |c| demand_degree(c.n_short_term, c.n_used_available))
        };
        let deadhead_minutes = match route {
            Route::Direct => 0,
            Route::Deadhead => status.deadhead_needed,
        };
        let ctx = StepContext {
            selected_used: status.used,
            rest_rank,
            n_used_eligible: used_order.len(),
            deadhead_minutes,
            via_deadhead: route == Route::Deadhead,
            demand_origin: status.location.map_or(0.0, cp_demand),
            demand_terminal: cp_demand(line.terminal_cp),
            mode: self.config.mode,
        };
        let mut reward = match self.config.reward.mode {
            RewardMode::Combined => step_reward(&ctx, &self.config.reward.weights)?,
            RewardMode::FinalOnly => 0.0,
        };

        let travel = self.travel_time(line.id, entry.minute)?;
        let depart = self.deadhead_departure(self.state.buses[bus].free_at);
        let runtime = &mut self.state.buses[bus];
        let trips = &mut self.state.trips[bus];
        if route == Route::Deadhead {
            trips.push(TripRecord {
                bus_id: bus,
                kind: TripKind::Deadhead,
                line_id: None,
                from_cp: runtime.cp,
                to_cp: entry.cp_id,
                depart_minute: depart,
                arrive_minute: depart + deadhead_minutes,
            });
        }
        trips.push(TripRecord {
            bus_id: bus,
            kind: TripKind::Service,
            line_id: Some(line.id),
            from_cp: entry.cp_id,
            to_cp: line.terminal_cp,
            depart_minute: entry.minute,
            arrive_minute: entry.minute + travel,
        });
        runtime.used = true;
        runtime.cp = line.terminal_cp;
        runtime.free_at = entry.minute + travel;
        self.state.covered[self.state.entry_index] = Some(bus);

        let info = StepInfo {
            entry_index: self.state.entry_index,
            bus: Some(bus),
            deadhead_minutes,
            covered: true,
        };
        self.advance(&mut reward)?;
        Ok(self.outcome(reward, info))
    }

    /// Marks the current entry uncovered. Only legal when no slot is selectable.
    pub fn skip_uncovered(&mut self) -> Result<StepOutcome> {
        let d = self
            .decision
            .as_ref()
            .ok_or_else(|| Error::Contract("skip after episode end".into()))?;
        if !d.classified.is_empty() {
            return Err(Error::Contract(
                "skip_uncovered called while eligible buses exist".into(),
            ));
        }
        self.leave_uncovered()
    }

    /// Leaves the current entry uncovered regardless of eligibility (used by search
    /// baselines that deliberately skip).
    pub fn leave_uncovered(&mut self) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::Contract("skip after episode end".into()));
        }
        let info = StepInfo {
            entry_index: self.state.entry_index,
            ..StepInfo::default()
        };
        self.state.n_uncovered += 1;
        let mut reward = -self.config.reward.weights.w1_step;
        self.advance(&mut reward)?;
        Ok(self.outcome(reward, info))
    }

    /// Sends a bus to `to_cp`, leaving at `depart`. The departure may not precede the last
    /// decided entry (no decision has observed that span yet) nor the bus's last arrival.
    pub fn dispatch_deadhead(&mut self, bus: BusId, to_cp: CpId, depart: Minute) -> Result<TripRecord> {
        if self.is_done() {
            return Err(Error::Contract("dispatch after episode end".into()));
        }
        let entries = &self.world.timetable.entries;
        let now = entries[self.state.entry_index.saturating_sub(1)].minute;
        let inst = &self.world.instance;
        let runtime = self
            .state
            .buses
            .get_mut(bus)
            .ok_or_else(|| Error::Contract(format!("bus {bus} is outside the fleet")))?;
        if depart < now {
            return Err(Error::Contract(format!("deadhead departure {depart} precedes minute {now}")));
        }
        if depart < runtime.free_at {
            return Err(Error::Contract(format!("bus {bus} is still travelling at minute {depart}")));
        }
        if runtime.cp == to_cp {
            return Err(Error::Contract(format!("bus {bus} is already at CP {to_cp}")));
        }
        let k = inst.deadhead(runtime.cp, to_cp)?;
        let trip = TripRecord {
            bus_id: bus,
            kind: TripKind::Deadhead,
            line_id: None,
            from_cp: runtime.cp,
            to_cp,
            depart_minute: depart,
            arrive_minute: depart + k,
        };
        runtime.cp = to_cp;
        runtime.free_at = depart + k;
        self.state.trips[bus].push(trip.clone());
        self.refresh()?;
        Ok(trip)
    }

    fn advance(&mut self, reward: &mut f64) -> Result<()> {
        self.state.entry_index += 1;
        if self.is_done() {
            *reward += final_reward(&self.objectives(), &self.config.reward.weights);
        }
        self.refresh()
    }

    fn outcome(&self, reward: f64, info: StepInfo) -> StepOutcome {
        StepOutcome {
            observation: self.observation().cloned(),
            reward,
            done: self.is_done(),
            info,
        }
    }

    pub fn schedule(&self) -> Schedule {
        let placement = initial_placement(&self.world.instance);
        Schedule {
            buses: self
                .state
                .trips
                .iter()
                .enumerate()
                .map(|(bus_id, trips)| BusPlan {
                    bus_id,
                    initial_cp: placement[bus_id],
                    trips: trips.clone(),
                })
                .collect(),
            coverage: self
                .world
                .timetable
                .entries
                .iter()
                .zip(&self.state.covered)
                .map(|(&entry, &bus_id)| Coverage { entry, bus_id })
                .collect(),
            overrides_applied: self.config.apply_overrides,
        }
    }

    pub fn objectives(&self) -> ObjectiveReport {
        compute_objectives(&self.schedule())
    }
}

/// Rebuilds every bus's runtime state from a schedule, as the simulator would hold it just
/// just before `before_minute`: every trip departing earlier has been applied.
pub fn replay_runtime(
    instance: &ProblemInstance,
    schedule: &Schedule,
    op_start: Minute,
    before_minute: Minute,
) -> Vec<BusRuntime> {
    schedule
        .buses
        .iter()
        .map(|plan| {
            let mut rt = BusRuntime {
                used: false,
                cp: plan.initial_cp,
                free_at: op_start - instance.r_min(),
            };
            for t in plan.trips.iter().filter(|t| t.depart_minute < before_minute) {
                rt.used |= t.kind == TripKind::Service;
                rt.cp = t.to_cp;
                rt.free_at = t.arrive_minute;
            }
            rt
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::two_line_data;
    use crate::model::validate_schedule;

    fn sim_for(data: crate::model::InstanceData, config: SimConfig) -> DispatchSim {
        DispatchSim::reset(Arc::new(ProblemInstance::new(data).unwrap()), config, 0).unwrap()
    }

    #[test]
    fn reset_state() {
        let sim = sim_for(two_line_data(), SimConfig::offline());
        assert!(sim.state().buses.iter().all(|b| !b.used));
        let at_cp1 = sim.state().buses.iter().filter(|b| b.cp == 1).count();
        assert_eq!(at_cp1, 2);
        let again = sim_for(two_line_data(), SimConfig::offline());
        assert_eq!(sim.observation(), again.observation());
        assert_eq!(sim.now(), Some(300));
    }

    #[test]
    fn empty_timetable_rejected() {
        let mut d = two_line_data();
        d.timetables.iter_mut().for_each(|t| t.departures.clear());
        let inst = Arc::new(ProblemInstance::new(d).unwrap());
        assert!(matches!(
            DispatchSim::reset(inst, SimConfig::offline(), 0),
            Err(Error::EmptyTimetable)
        ));
    }

    #[test]
    fn direct_service_trip() {
        let mut d = two_line_data();
        d.timetables[0].departures = vec![600];
        d.timetables[1].departures = vec![];
        let mut sim = sim_for(d, SimConfig::offline());
        let out = sim.step(0).unwrap();
        assert!(out.done);
        let s = sim.schedule();
        let t = &s.buses[0].trips[0];
        assert_eq!((t.depart_minute, t.arrive_minute), (600, 640));
        // one unused bus with no used alternative, final reward -4 for one bus
        assert_eq!(out.reward, -4.0);
    }

    #[test]
    fn deadhead_departs_as_early_as_possible() {
        // bus 0 serves 460 (A->B, arrives 500 at B); at 600 on line 3 (C) it is the only used
        // candidate and deadheads B->C (k = 12 after adjusting the matrix).
        let mut d = two_line_data();
        d.control_points[0].initial_bus_count = 1;
        d.control_points[1].initial_bus_count = 0;
        d.control_points[2].initial_bus_count = 0;
        d.fleet_size = 1;
        d.deadhead_matrix.0[1][2] = 12;
        d.deadhead_matrix.0[2][1] = 12;
        d.timetables[0].departures = vec![460];
        d.timetables[1].departures = vec![];
        d.timetables[2].departures = vec![600];
        let mut sim = sim_for(d, SimConfig::offline());
        sim.step(0).unwrap();
        assert_eq!(sim.screening().unwrap().v_q, vec![0]);
        let out = sim.step(0).unwrap();
        assert!(out.done);
        let s = sim.schedule();
        let trips: Vec<_> = s.buses[0]
            .trips
            .iter()
            .map(|t| (t.kind, t.depart_minute, t.arrive_minute))
            .collect();
        assert_eq!(
            trips,
            vec![
                (TripKind::Service, 460, 500),
                (TripKind::Deadhead, 505, 517),
                (TripKind::Service, 600, 630),
            ]
        );
        assert!(validate_schedule(sim.instance(), &s).is_empty());
    }

    #[test]
    fn masked_slot_is_contract_violation() {
        let mut sim = sim_for(two_line_data(), SimConfig::offline());
        let mask = sim.observation().unwrap().mask.clone();
        let bad = mask.iter().position(|m| !m).unwrap();
        assert!(matches!(sim.step(bad), Err(Error::Contract(_))));
        assert!(matches!(sim.step(99), Err(Error::Contract(_))));
        assert!(matches!(sim.skip_uncovered(), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_fleet_leaves_everything_uncovered() {
        let mut d = two_line_data();
        d.control_points.iter_mut().for_each(|c| c.initial_bus_count = 0);
        d.fleet_size = 0;
        let mut sim = sim_for(d, SimConfig::offline());
        let mut rewards = Vec::new();
        while !sim.is_done() {
            assert!(!sim.observation().unwrap().has_valid_action());
            rewards.push(sim.skip_uncovered().unwrap().reward);
        }
        let rep = sim.objectives();
        assert_eq!(rep.n_uncovered, 3);
        assert_eq!(rewards, vec![-4.0, -4.0, -4.0]);
        assert_eq!(sim.schedule().trips().count(), 0);
    }

    #[test]
    fn fork_leaves_original_untouched() {
        let sim = sim_for(two_line_data(), SimConfig::offline());
        let h = sim.state_hash();
        let mut f = sim.fork(SimConfig::offline()).unwrap();
        f.step(0).unwrap();
        assert_eq!(sim.state_hash(), h);
        assert_ne!(f.state_hash(), h);
    }

    #[test]
    fn dispatch_moves_bus_and_keeps_feasibility() {
        let mut d = two_line_data();
        d.timetables[2].departures = vec![400];
        let mut sim = sim_for(d, SimConfig::online());
        // at 300 bus 3 sits at CP3 idle; send bus 2 (at CP2) to CP1
        let trip = sim.dispatch_deadhead(2, 1, 300).unwrap();
        assert_eq!((trip.depart_minute, trip.arrive_minute), (300, 320));
        assert!(sim.dispatch_deadhead(2, 3, 300).is_err());
        assert!(sim.dispatch_deadhead(3, 1, 299).is_err());
        while !sim.is_done() {
            if sim.observation().unwrap().has_valid_action() {
                sim.step(0).unwrap();
            } else {
                sim.skip_uncovered().unwrap();
            }
        }
        assert!(validate_schedule(sim.instance(), &sim.schedule()).is_empty());
    }
}
