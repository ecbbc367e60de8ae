//! Non-learning comparators: greedy dispatch, destroy-and-repair search and an exhaustive
//! solver for tiny instances.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    initial_placement, merge_timetables, BusId, CpId, Minute, ObjectiveReport, ProblemInstance,
    Schedule, TimetableEntry,
};
use crate::rollout::{run_episode, FirstValid};
use crate::screening::{eligibility, BusStatus, Route};
use crate::sim::{DispatchSim, SimConfig};
use crate::Mode;

/// Dispatches the top-priority bus of the offline target set at every entry.
pub fn greedy_schedule(instance: Arc<ProblemInstance>) -> Result<Schedule> {
    Ok(run_episode(instance, &mut FirstValid, SimConfig::offline(), 0)?.schedule)
}

/// Pairwise compatibility of consecutive entries on one bus, with the simulator's offline
/// eligibility rule.
struct Links<'a> {
    instance: &'a ProblemInstance,
    entries: Vec<TimetableEntry>,
    /// Terminal CP and arrival minute after serving each entry.
    after: Vec<(CpId, Minute)>,
    start: Vec<(CpId, Minute)>,
}

impl<'a> Links<'a> {
    fn new(instance: &'a ProblemInstance) -> Result<Self> {
        let entries = merge_timetables(instance).entries;
        let op_start = entries.first().ok_or(Error::EmptyTimetable)?.minute;
        let after = entries
            .iter()
            .map(|e| {
                let line = instance.line(e.line_id)?;
                Ok((line.terminal_cp, e.minute + instance.travel_time(e.line_id, e.minute, false)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let start = initial_placement(instance)
            .into_iter()
            .map(|cp| (cp, op_start - instance.r_min()))
            .collect();
        Ok(Self {
            instance,
            entries,
            after,
            start,
        })
    }

    /// Deadhead minutes needed to serve entry `j` from position `from`, or `None` if the bus
    /// cannot make it.
    fn link(&self, from: (CpId, Minute), j: usize) -> Option<Minute> {
        let (cp, free_at) = from;
        let e = self.entries[j];
        if e.minute < free_at {
            return None;
        }
        let k = self.instance.deadhead(cp, e.cp_id).ok()?;
        let status = BusStatus {
            bus_id: 0,
            used: true,
            location: Some(cp),
            last_arrival: free_at,
            rest: e.minute - free_at,
            deadhead_needed: k,
        };
        match eligibility(&status, e.cp_id, self.instance.r_min(), Mode::Offline)? {
            Route::Direct => Some(0),
            Route::Deadhead => Some(k),
        }
    }

    fn origin(&self, bus: BusId, prev: Option<usize>) -> (CpId, Minute) {
        prev.map_or(self.start[bus], |p| self.after[p])
    }

    fn chain_deadhead(&self, bus: BusId, chain: &[usize]) -> Option<Minute> {
        let mut total = 0;
        let mut prev = None;
        for &j in chain {
            total += self.link(self.origin(bus, prev), j)?;
            prev = Some(j);
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Plan {
    /// Entry indices served by each bus, ascending.
    chains: Vec<Vec<usize>>,
    n_entries: usize,
}

impl Plan {
    fn from_schedule(links: &Links, schedule: &Schedule) -> Result<Self> {
        if schedule.coverage.len() != links.entries.len() || schedule.buses.len() != links.start.len() {
            return Err(Error::ScheduleMismatch("schedule shape differs from the instance".into()));
        }
        let mut chains = vec![Vec::new(); links.start.len()];
        for (j, c) in schedule.coverage.iter().enumerate() {
            if c.entry != links.entries[j] {
                return Err(Error::ScheduleMismatch(format!("coverage entry {j} does not match the timetable")));
            }
            if let Some(b) = c.bus_id {
                chains
                    .get_mut(b)
                    .ok_or_else(|| Error::ScheduleMismatch(format!("bus {b} outside the fleet")))?
                    .push(j);
            }
        }
        for (b, chain) in chains.iter().enumerate() {
            if links.chain_deadhead(b, chain).is_none() {
                return Err(Error::ScheduleMismatch(format!("bus {b} cannot serve its entries in sequence")));
            }
        }
        Ok(Self {
            chains,
            n_entries: links.entries.len(),
        })
    }

    fn report(&self, links: &Links) -> ObjectiveReport {
        let covered: usize = self.chains.iter().map(Vec::len).sum();
        ObjectiveReport {
            n_used: self.chains.iter().filter(|c| !c.is_empty()).count(),
            deadhead_total: self
                .chains
                .iter()
                .enumerate()
                .map(|(b, c)| links.chain_deadhead(b, c).expect("plans stay feasible"))
                .sum(),
            n_uncovered: self.n_entries - covered,
        }
    }

    fn uncovered(&self) -> Vec<usize> {
        let mut covered = vec![false; self.n_entries];
        for &j in self.chains.iter().flatten() {
            covered[j] = true;
        }
        (0..self.n_entries).filter(|&j| !covered[j]).collect()
    }
}

/// Replays a plan through the simulator so trips carry the simulator's exact timing.
fn realize(instance: Arc<ProblemInstance>, plan: &Plan) -> Result<Schedule> {
    let mut owner = vec![None; plan.n_entries];
    for (b, chain) in plan.chains.iter().enumerate() {
        for &j in chain {
            owner[j] = Some(b);
        }
    }
    let mut sim = DispatchSim::reset(instance, SimConfig::offline(), 0)?;
    for o in owner {
        match o {
            Some(b) => sim.assign_bus(b)?,
            None => sim.leave_uncovered()?,
        };
    }
    Ok(sim.schedule())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnsConfig {
    pub iterations: usize,
    /// Share of used buses whose entries are released per iteration.
    pub destroy_fraction: f64,
    pub seed: u64,
}

impl Default for LnsConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            destroy_fraction: 0.3,
            seed: 0,
        }
    }
}

impl LnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("LNS needs at least one iteration".into()));
        }
        if !(self.destroy_fraction > 0.0 && self.destroy_fraction < 1.0) {
            return Err(Error::Config(format!(
                "destroy fraction {} outside (0, 1)",
                self.destroy_fraction
            )));
        }
        Ok(())
    }
}

/// Greedy reinsertion: each released entry, in time order, goes to the bus where it adds
/// the least, preferring buses already in service.
fn repair(links: &Links, plan: &mut Plan, mut free: Vec<usize>, rng: &mut ChaCha8Rng) {
    free.sort_unstable();
    for j in free {
        let mut best: Option<((bool, Minute, u32), BusId, usize)> = None;
        for (b, chain) in plan.chains.iter().enumerate() {
            let pos = chain.partition_point(|&x| x < j);
            let prev = pos.checked_sub(1).map(|p| chain[p]);
            let Some(d_in) = links.link(links.origin(b, prev), j) else {
                continue;
            };
            let (d_out, d_old) = match chain.get(pos) {
                Some(&n) => {
                    let Some(d_out) = links.link(links.after[j], n) else {
                        continue;
                    };
                    (d_out, links.link(links.origin(b, prev), n).expect("chain is feasible"))
                }
                None => (0, 0),
            };
            let key = (chain.is_empty(), d_in + d_out - d_old, rng.gen::<u32>());
            if best.as_ref().map_or(true, |(k, _, _)| key < *k) {
                best = Some((key, b, pos));
            }
        }
        if let Some((_, b, pos)) = best {
            plan.chains[b].insert(pos, j);
        }
    }
}

/// Destroy-and-repair search from a feasible schedule. Never returns anything
/// lexicographically worse than `initial`.
pub fn lns_improve(instance: Arc<ProblemInstance>, initial: &Schedule, cfg: &LnsConfig) -> Result<Schedule> {
    cfg.validate()?;
    let links = Links::new(&instance)?;
    let mut best = Plan::from_schedule(&links, initial)?;
    let mut best_key = best.report(&links).lex_key();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.iterations {
        let used: Vec<BusId> = (0..best.chains.len()).filter(|&b| !best.chains[b].is_empty()).collect();
        let mut cand = best.clone();
        let mut free = cand.uncovered();
        if !used.is_empty() {
            let n = ((cfg.destroy_fraction * used.len() as f64).round() as usize).clamp(1, used.len());
            for &b in used.choose_multiple(&mut rng, n) {
                free.append(&mut cand.chains[b]);
            }
        }
        if free.is_empty() {
            break;
        }
        repair(&links, &mut cand, free, &mut rng);
        let key = cand.report(&links).lex_key();
        if key < best_key {
            log::debug!("lns improved {best_key:?} -> {key:?}");
            best = cand;
            best_key = key;
        }
    }
    realize(instance, &best)
}

pub const BRUTE_FORCE_MAX_ENTRIES: usize = 12;
pub const BRUTE_FORCE_MAX_FLEET: usize = 4;

/// Exhaustive lexicographic optimum of (N_d, N_u, T_d) over every way of serving or skipping
/// each entry with any eligible bus.
pub fn brute_force_optimal(instance: Arc<ProblemInstance>) -> Result<ObjectiveReport> {
    Ok(brute_force_schedule(instance)?.1)
}

pub fn brute_force_schedule(instance: Arc<ProblemInstance>) -> Result<(Schedule, ObjectiveReport)> {
    let n = instance.total_departures();
    if n > BRUTE_FORCE_MAX_ENTRIES || instance.fleet_size() > BRUTE_FORCE_MAX_FLEET {
        return Err(Error::TooLarge(format!(
            "{n} entries and {} buses (limits {BRUTE_FORCE_MAX_ENTRIES} and {BRUTE_FORCE_MAX_FLEET})",
            instance.fleet_size()
        )));
    }
    let root = DispatchSim::reset(instance.clone(), SimConfig::offline(), 0)?;
    let greedy = greedy_schedule(instance)?;
    let mut best = (crate::model::compute_objectives(&greedy), greedy);
    search(&root, &mut best)?;
    Ok((best.1, best.0))
}

fn partial_key(sim: &DispatchSim) -> (usize, usize, Minute) {
    let s = sim.state();
    let used = s.buses.iter().filter(|b| b.used).count();
    let dh = s
        .trips
        .iter()
        .flatten()
        .filter(|t| t.kind == crate::model::TripKind::Deadhead)
        .map(|t| t.duration())
        .sum();
    (s.n_uncovered, used, dh)
}

fn search(sim: &DispatchSim, best: &mut (ObjectiveReport, Schedule)) -> Result<()> {
    let key = partial_key(sim);
    if key >= best.0.lex_key() {
        return Ok(());
    }
    if sim.is_done() {
        best.0 = sim.objectives();
        best.1 = sim.schedule();
        return Ok(());
    }
    let classified = sim.classified().expect("decision exists while entries remain");
    let mut options: Vec<BusId> = Vec::new();
    let mut unused_seen: Vec<CpId> = Vec::new();
    for s in classified.v_p.iter().chain(&classified.v_q) {
        // unused buses at one CP are interchangeable
        if !s.used {
            let cp = s.location.expect("eligible buses are parked");
            if unused_seen.contains(&cp) {
                continue;
            }
            unused_seen.push(cp);
        }
        options.push(s.bus_id);
    }
    options.sort_unstable();
    for bus in options {
        let mut child = sim.clone();
        child.assign_bus(bus)?;
        search(&child, best)?;
    }
    let mut child = sim.clone();
    child.leave_uncovered()?;
    search(&child, best)
}
