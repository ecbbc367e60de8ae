//! Bus priority screening and state features.
//!
//! At each decision the fleet is split into buses that can depart from the current CP without
//! relocating (`v_p`) and, offline only, buses parked elsewhere with enough slack to deadhead
//! there first (`v_q`). The target set exposed to the policy takes, in order: used `v_p` by
//! longest rest, used `v_q` by shortest deadhead, unused `v_p`, unused `v_q`; truncated or
//! padded to `N_s` slots.

use serde::{Deserialize, Serialize};

use crate::model::{BusId, BusLine, CpId, Minute, ProblemInstance, MINUTES_PER_DAY};

/// Short-term demand horizon for `n_s`.
pub const SHORT_TERM_MINUTES: Minute = 300;

/// Feature value used for every field of an empty target-set slot.
pub const SENTINEL: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Offline,
    Online,
}

/// With screening off the target set is the whole fleet in id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreeningMode {
    On,
    Off,
}

/// View of one bus at a decision minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BusStatus {
    pub bus_id: BusId,
    pub used: bool,
    /// `None` while running.
    pub location: Option<CpId>,
    pub last_arrival: Minute,
    pub rest: Minute,
    /// Deadhead minutes to the current departure CP; 0 when already there or running.
    pub deadhead_needed: Minute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Parked at the departure CP with enough rest.
    Direct,
    /// Parked elsewhere; must relocate first.
    Deadhead,
}

/// Eligibility of a single bus for a departure from `dep_cp`.
///
/// Direct requires `rest >= r_min`. Deadhead (offline only) requires `k > 0` and the strict
/// inequality `rest > k + r_min`.
pub fn eligibility(status: &BusStatus, dep_cp: CpId, r_min: Minute, mode: Mode) -> Option<Route> {
    let loc = status.location?;
    if loc == dep_cp {
        (status.rest >= r_min).then_some(Route::Direct)
    } else if mode == Mode::Offline
        && status.deadhead_needed > 0
        && status.rest > status.deadhead_needed + r_min
    {
        Some(Route::Deadhead)
    } else {
        None
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Classified {
    pub v_p: Vec<BusStatus>,
    pub v_q: Vec<BusStatus>,
}

impl Classified {
    pub fn route_of(&self, bus: BusId) -> Option<Route> {
        if self.v_p.iter().any(|s| s.bus_id == bus) {
            Some(Route::Direct)
        } else if self.v_q.iter().any(|s| s.bus_id == bus) {
            Some(Route::Deadhead)
        } else {
            None
        }
    }

    pub fn status_of(&self, bus: BusId) -> Option<&BusStatus> {
        self.v_p.iter().chain(&self.v_q).find(|s| s.bus_id == bus)
    }

    pub fn is_empty(&self) -> bool {
        self.v_p.is_empty() && self.v_q.is_empty()
    }

    /// Used eligible buses in descending rest order (ties by bus id). A selected used bus's
    /// 1-based position in this list is its rest rank.
    pub fn used_by_rest(&self) -> Vec<BusId> {
        let mut used: Vec<&BusStatus> = self.v_p.iter().chain(&self.v_q).filter(|s| s.used).collect();
        used.sort_by_key(|s| (std::cmp::Reverse(s.rest), s.bus_id));
        used.into_iter().map(|s| s.bus_id).collect()
    }
}

/// Splits the fleet into `v_p` and `v_q` for a departure from `dep_cp`. Online mode never
/// populates `v_q`.
pub fn classify_buses(statuses: &[BusStatus], dep_cp: CpId, r_min: Minute, mode: Mode) -> Classified {
    let mut out = Classified::default();
    for s in statuses {
        match eligibility(s, dep_cp, r_min, mode) {
            Some(Route::Direct) => out.v_p.push(*s),
            Some(Route::Deadhead) => out.v_q.push(*s),
            None => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreeningResult {
    /// Eligible without deadhead, in priority order.
    pub v_p: Vec<BusId>,
    /// Eligible with deadhead, in priority order.
    pub v_q: Vec<BusId>,
    /// Exactly `N_s` slots; `None` is a sentinel.
    pub target_set: Vec<Option<BusId>>,
    pub padding_count: usize,
}

impl ScreeningResult {
    pub fn mask(&self, classified: &Classified) -> Vec<bool> {
        self.target_set
            .iter()
            .map(|slot| slot.map_or(false, |b| classified.route_of(b).is_some()))
            .collect()
    }
}

fn split_used(group: &[BusStatus]) -> (Vec<BusStatus>, Vec<BusStatus>) {
    let (used, mut unused): (Vec<_>, Vec<_>) = group.iter().copied().partition(|s| s.used);
    unused.sort_by_key(|s| s.bus_id);
    (used, unused)
}

pub fn build_target_set(v_p_raw: &[BusStatus], v_q_raw: &[BusStatus], n_s: usize) -> ScreeningResult {
    let (mut p_used, p_unused) = split_used(v_p_raw);
    let (mut q_used, q_unused) = split_used(v_q_raw);
    p_used.sort_by_key(|s| (std::cmp::Reverse(s.rest), s.bus_id));
    q_used.sort_by_key(|s| (s.deadhead_needed, s.bus_id));

    let ids = |v: &[BusStatus]| v.iter().map(|s| s.bus_id).collect::<Vec<_>>();
    let mut target_set: Vec<Option<BusId>> = p_used
        .iter()
        .chain(&q_used)
        .chain(&p_unused)
        .chain(&q_unused)
        .take(n_s)
        .map(|s| Some(s.bus_id))
        .collect();
    let padding_count = n_s - target_set.len();
    target_set.resize(n_s, None);

    ScreeningResult {
        v_p: [ids(&p_used), ids(&p_unused)].concat(),
        v_q: [ids(&q_used), ids(&q_unused)].concat(),
        target_set,
        padding_count,
    }
}

/// Screening-off arm: every bus is a slot, in id order.
pub fn full_fleet_target(classified: &Classified, fleet_size: usize) -> ScreeningResult {
    let mut sorted = build_target_set(&classified.v_p, &classified.v_q, 0);
    sorted.target_set = (0..fleet_size).map(Some).collect();
    sorted.padding_count = 0;
    sorted
}

/// Per-CP departures, sorted, for demand counting.
#[derive(Debug, Clone)]
pub struct DemandIndex {
    per_cp: Vec<(CpId, Vec<Minute>)>,
}

impl DemandIndex {
    pub fn new(instance: &ProblemInstance) -> Self {
        let per_cp = instance
            .control_points()
            .iter()
            .map(|cp| {
                let deps = instance
                    .timetables()
                    .iter()
                    .find(|t| t.cp_id == cp.id)
                    .map(|t| t.departures.clone())
                    .unwrap_or_default();
                (cp.id, deps)
            })
            .collect();
        Self { per_cp }
    }

    /// Departures at `cp` in `[from, to)`.
    pub fn count(&self, cp_idx: usize, from: Minute, to: Minute) -> usize {
        let deps = &self.per_cp[cp_idx].1;
        deps.partition_point(|&d| d < to) - deps.partition_point(|&d| d < from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpFeatures {
    pub cp_id: CpId,
    /// Departures from now to the end of the day.
    pub n_remaining: usize,
    /// Departures in `[now, now + 300)`.
    pub n_short_term: usize,
    /// Parked buses with `rest >= r_min`.
    pub n_available: usize,
    /// Those of them already used.
    pub n_used_available: usize,
}

pub fn cp_features(
    statuses: &[BusStatus],
    instance: &ProblemInstance,
    demand: &DemandIndex,
    now: Minute,
) -> Vec<CpFeatures> {
    let r_min = instance.r_min();
    instance
        .control_points()
        .iter()
        .enumerate()
        .map(|(ci, cp)| {
            let rested = statuses
                .iter()
                .filter(|s| s.location == Some(cp.id) && s.rest >= r_min);
            let (mut n_available, mut n_used_available) = (0, 0);
            for s in rested {
                n_available += 1;
                n_used_available += usize::from(s.used);
            }
            CpFeatures {
                cp_id: cp.id,
                n_remaining: demand.count(ci, now, Minute::MAX),
                n_short_term: demand.count(ci, now, now + SHORT_TERM_MINUTES),
                n_available,
                n_used_available,
            }
        })
        .collect()
}

/// Flat policy input: CP block, line block, then four features per target-set slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn state_dim(n_cps: usize, n_slots: usize) -> usize {
    5 * n_cps + 3 + 4 * n_slots
}

fn scale_time(m: Minute) -> f64 {
    f64::from(m) / f64::from(MINUTES_PER_DAY)
}

pub fn build_state(
    cps: &[CpFeatures],
    line: &BusLine,
    travel_time: Minute,
    slots: &[Option<BusStatus>],
) -> StateVector {
    let mut v = Vec::with_capacity(state_dim(cps.len(), slots.len()));
    for c in cps {
        v.extend_from_slice(&[
            f64::from(c.cp_id),
            c.n_remaining as f64,
            c.n_short_term as f64,
            c.n_available as f64,
            c.n_used_available as f64,
        ]);
    }
    v.extend_from_slice(&[
        f64::from(line.departure_cp),
        f64::from(line.terminal_cp),
        scale_time(travel_time),
    ]);
    for slot in slots {
        match slot {
            Some(s) => v.extend_from_slice(&[
                if s.used { 1.0 } else { 0.0 },
                scale_time(s.rest),
                s.location.map_or(-1.0, f64::from),
                scale_time(s.deadhead_needed),
            ]),
            None => v.extend_from_slice(&[SENTINEL; 4]),
        }
    }
    StateVector(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tests::two_line_data, ProblemInstance};

    fn st(bus_id: BusId, used: bool, loc: CpId, rest: Minute, k: Minute) -> BusStatus {
        BusStatus {
            bus_id,
            used,
            location: Some(loc),
            last_arrival: 0,
            rest,
            deadhead_needed: k,
        }
    }

    #[test]
    fn direct_boundary_is_inclusive() {
        let b = st(0, true, 1, 5, 0);
        assert_eq!(eligibility(&b, 1, 5, Mode::Offline), Some(Route::Direct));
        let b = st(0, true, 1, 4, 0);
        assert_eq!(eligibility(&b, 1, 5, Mode::Offline), None);
    }

    #[test]
    fn deadhead_rule_is_strict_and_offline_only() {
        let b = st(0, true, 2, 20, 12);
        assert_eq!(eligibility(&b, 1, 5, Mode::Offline), Some(Route::Deadhead));
        assert_eq!(eligibility(&b, 1, 5, Mode::Online), None);
        let b = st(0, true, 2, 17, 12);
        assert_eq!(eligibility(&b, 1, 5, Mode::Offline), None);
        let c = classify_buses(&[st(0, true, 2, 20, 12), st(1, false, 1, 9, 0)], 1, 5, Mode::Online);
        assert!(c.v_q.is_empty());
        assert_eq!(c.v_p.len(), 1);
    }

    #[test]
    fn running_bus_never_eligible() {
        let b = BusStatus { location: None, rest: 0, ..st(0, true, 1, 0, 0) };
        assert_eq!(eligibility(&b, 1, 0, Mode::Offline), None);
    }

    /// The worked example: 9 buses in v_p (4 used), 5 in v_q (2 used), capacity 8.
    fn figure_three() -> (Vec<BusStatus>, Vec<BusStatus>) {
        let v_p = vec![
            st(4, true, 1, 80, 0),
            st(13, true, 1, 95, 0),
            st(26, true, 1, 20, 0),
            st(8, true, 1, 50, 0),
            st(28, false, 1, 30, 0),
            st(5, false, 1, 30, 0),
            st(27, false, 1, 30, 0),
            st(14, false, 1, 30, 0),
            st(31, false, 1, 30, 0),
        ];
        let v_q = vec![
            st(2, true, 2, 90, 15),
            st(38, true, 3, 90, 9),
            st(7, false, 2, 90, 15),
            st(40, false, 2, 90, 15),
            st(41, false, 3, 90, 9),
        ];
        (v_p, v_q)
    }

    #[test]
    fn figure_three_offline() {
        let (p, q) = figure_three();
        let r = build_target_set(&p, &q, 8);
        assert_eq!(
            r.target_set,
            [13, 4, 8, 26, 38, 2, 5, 14].map(Some).to_vec()
        );
        assert_eq!(r.padding_count, 0);
    }

    #[test]
    fn figure_three_online() {
        let (p, _) = figure_three();
        let r = build_target_set(&p, &[], 8);
        assert_eq!(
            r.target_set,
            [13, 4, 8, 26, 5, 14, 27, 28].map(Some).to_vec()
        );
        assert!(r.v_q.is_empty());
    }

    #[test]
    fn empty_sets_pad_everything() {
        let r = build_target_set(&[], &[], 8);
        assert_eq!(r.target_set, vec![None; 8]);
        assert_eq!(r.padding_count, 8);
    }

    #[test]
    fn rest_ties_break_by_bus_id() {
        let p = vec![st(9, true, 1, 40, 0), st(3, true, 1, 40, 0)];
        let r = build_target_set(&p, &[], 2);
        assert_eq!(r.target_set, vec![Some(3), Some(9)]);
    }

    #[test]
    fn short_term_window_is_half_open() {
        let mut d = two_line_data();
        d.timetables[0].departures = vec![100 + 299, 100 + 300];
        let inst = ProblemInstance::new(d).unwrap();
        let demand = DemandIndex::new(&inst);
        let f = cp_features(&[], &inst, &demand, 100);
        // counting oracle
        let oracle = inst.timetables()[0]
            .departures
            .iter()
            .filter(|&&m| (100..100 + SHORT_TERM_MINUTES).contains(&m))
            .count();
        assert_eq!(f[0].n_short_term, oracle);
        assert_eq!(f[0].n_short_term, 1);
        assert_eq!(f[0].n_remaining, 2);
    }

    #[test]
    fn whole_timetable_inside_window_at_midnight() {
        let mut d = two_line_data();
        d.timetables[0].departures = (0..10).map(|i| 10 * i).collect();
        let inst = ProblemInstance::new(d).unwrap();
        let f = cp_features(&[], &inst, &DemandIndex::new(&inst), 0);
        assert_eq!((f[0].n_remaining, f[0].n_short_term), (10, 10));
        let f = cp_features(&[], &inst, &DemandIndex::new(&inst), 91);
        assert_eq!(f[0].n_remaining, 0);
    }

    #[test]
    fn available_counts() {
        let inst = ProblemInstance::new(two_line_data()).unwrap();
        let statuses = vec![
            st(0, true, 1, 10, 0),
            st(1, false, 1, 10, 0),
            st(2, true, 1, 2, 0),
            BusStatus { location: None, rest: 0, ..st(3, true, 1, 0, 0) },
        ];
        let f = cp_features(&statuses, &inst, &DemandIndex::new(&inst), 0);
        assert_eq!((f[0].n_available, f[0].n_used_available), (2, 1));
    }

    #[test]
    fn state_layout_and_scaling() {
        let inst = ProblemInstance::new(two_line_data()).unwrap();
        let cps = cp_features(&[], &inst, &DemandIndex::new(&inst), 0);
        let line = inst.line(1).unwrap();
        let mut slots = vec![None; 8];
        slots[0] = Some(st(0, true, 1, 720, 0));
        let s = build_state(&cps, line, 40, &slots);
        assert_eq!(s.dim(), 5 * 4 + 3 + 4 * 8);
        assert_eq!(s.dim(), 55);
        let bus0 = &s.0[23..27];
        // inverse scaling oracle
        assert_eq!(bus0[1] * 1440.0, 720.0);
        assert_eq!(bus0[1], 0.5);
        assert_eq!(&s.0[27..31], &[-1.0; 4]);
        assert_eq!(&s.0[20..23], &[1.0, 2.0, 40.0 / 1440.0]);
    }
}
