//! Static problem definition, the combined timetable, schedules, feasibility and objectives.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes from midnight of the operating day.
pub type Minute = i32;
pub type CpId = u32;
pub type LineId = u32;
/// Buses are numbered `0..fleet_size`.
pub type BusId = usize;

pub const MINUTES_PER_DAY: Minute = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub id: CpId,
    pub initial_bus_count: u32,
}

/// One direction of a physical line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusLine {
    pub id: LineId,
    pub departure_cp: CpId,
    pub terminal_cp: CpId,
    pub base_travel_time: Minute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timetable {
    pub cp_id: CpId,
    pub departures: Vec<Minute>,
}

/// Extra travel minutes for trips departing inside `[start, end)`.
/// `line_id: None` applies to every line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TravelOverride {
    #[serde(default)]
    pub line_id: Option<LineId>,
    pub start: Minute,
    pub end: Minute,
    pub extra_minutes: Minute,
}

impl TravelOverride {
    pub fn applies(&self, line_id: LineId, minute: Minute) -> bool {
        self.line_id.map_or(true, |l| l == line_id) && self.start <= minute && minute < self.end
    }
}

/// Deadhead minutes between control points. Rows and columns follow the order of
/// `control_points` in the instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeadheadMatrix(pub Vec<Vec<Minute>>);

/// Serialized form of an instance. Build a [`ProblemInstance`] from it to get validation and
/// the lookup tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceData {
    pub control_points: Vec<ControlPoint>,
    pub lines: Vec<BusLine>,
    pub timetables: Vec<Timetable>,
    pub deadhead_matrix: DeadheadMatrix,
    pub r_min: Minute,
    pub fleet_size: u32,
    pub target_set_capacity: u32,
    #[serde(default)]
    pub overrides: Vec<TravelOverride>,
}

/// A validated, immutable instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    data: InstanceData,
    cp_index: HashMap<CpId, usize>,
    line_index: HashMap<LineId, usize>,
    /// Line departing from each CP (by CP index), if any.
    cp_line: Vec<Option<usize>>,
}

impl Serialize for ProblemInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.data.serialize(s)
    }
}

impl ProblemInstance {
    pub fn new(data: InstanceData) -> Result<Self> {
        let mut cp_index = HashMap::new();
        for (i, cp) in data.control_points.iter().enumerate() {
            if cp_index.insert(cp.id, i).is_some() {
                return Err(Error::invalid(
                    format!("control_points[{i}].id"),
                    format!("duplicate control point id {}", cp.id),
                ));
            }
        }
        let n_cp = data.control_points.len();

        let mut line_index = HashMap::new();
        let mut cp_line = vec![None; n_cp];
        for (i, line) in data.lines.iter().enumerate() {
            if line_index.insert(line.id, i).is_some() {
                return Err(Error::invalid(
                    format!("lines[{i}].id"),
                    format!("duplicate line id {}", line.id),
                ));
            }
            let dep = *cp_index.get(&line.departure_cp).ok_or_else(|| {
                Error::invalid(
                    format!("lines[{i}].departure_cp"),
                    format!("unknown control point {}", line.departure_cp),
                )
            })?;
            if !cp_index.contains_key(&line.terminal_cp) {
                return Err(Error::invalid(
                    format!("lines[{i}].terminal_cp"),
                    format!("unknown control point {}", line.terminal_cp),
                ));
            }
            if line.departure_cp == line.terminal_cp {
                return Err(Error::invalid(
                    format!("lines[{i}]"),
                    "departure_cp and terminal_cp must differ",
                ));
            }
            if line.base_travel_time <= 0 {
                return Err(Error::invalid(
                    format!("lines[{i}].base_travel_time"),
                    "must be positive",
                ));
            }
            if cp_line[dep].is_some() {
                return Err(Error::invalid(
                    format!("lines[{i}].departure_cp"),
                    format!("control point {} already departs another line", line.departure_cp),
                ));
            }
            cp_line[dep] = Some(i);
        }

        let mut seen_tt = vec![false; n_cp];
        for (i, tt) in data.timetables.iter().enumerate() {
            let ci = *cp_index.get(&tt.cp_id).ok_or_else(|| {
                Error::invalid(
                    format!("timetables[{i}].cp_id"),
                    format!("unknown control point {}", tt.cp_id),
                )
            })?;
            if cp_line[ci].is_none() {
                return Err(Error::invalid(
                    format!("timetables[{i}].cp_id"),
                    format!("control point {} is not the departure of any line", tt.cp_id),
                ));
            }
            if std::mem::replace(&mut seen_tt[ci], true) {
                return Err(Error::invalid(
                    format!("timetables[{i}].cp_id"),
                    format!("second timetable for control point {}", tt.cp_id),
                ));
            }
            for (j, &d) in tt.departures.iter().enumerate() {
                if !(0..MINUTES_PER_DAY).contains(&d) {
                    return Err(Error::invalid(
                        format!("timetables[{i}].departures[{j}]"),
                        format!("{d} is outside [0, 1440)"),
                    ));
                }
                if j > 0 && tt.departures[j - 1] >= d {
                    return Err(Error::invalid(
                        format!("timetables[{i}].departures[{j}]"),
                        "departures must be strictly increasing",
                    ));
                }
            }
        }

        let m = &data.deadhead_matrix.0;
        if m.len() != n_cp {
            return Err(Error::invalid(
                "deadhead_matrix",
                format!("expected {n_cp} rows, found {}", m.len()),
            ));
        }
        for (r, row) in m.iter().enumerate() {
            if row.len() != n_cp {
                return Err(Error::invalid(
                    format!("deadhead_matrix[{r}]"),
                    format!("expected {n_cp} columns, found {}", row.len()),
                ));
            }
            for (c, &v) in row.iter().enumerate() {
                if v < 0 {
                    return Err(Error::invalid(format!("deadhead_matrix[{r}][{c}]"), "negative"));
                }
                if r == c && v != 0 {
                    return Err(Error::invalid(
                        format!("deadhead_matrix[{r}][{c}]"),
                        "diagonal must be zero",
                    ));
                }
            }
        }

        if data.r_min < 0 {
            return Err(Error::invalid("r_min", "must be non-negative"));
        }
        if data.target_set_capacity < 1 {
            return Err(Error::invalid("target_set_capacity", "must be at least 1"));
        }
        let placed: u32 = data.control_points.iter().map(|c| c.initial_bus_count).sum();
        if placed != data.fleet_size {
            return Err(Error::invalid(
                "fleet_size",
                format!("initial_bus_count sums to {placed}, fleet_size is {}", data.fleet_size),
            ));
        }
        for (i, o) in data.overrides.iter().enumerate() {
            if let Some(l) = o.line_id {
                if !line_index.contains_key(&l) {
                    return Err(Error::invalid(
                        format!("overrides[{i}].line_id"),
                        format!("unknown line {l}"),
                    ));
                }
            }
            if o.end < o.start {
                return Err(Error::invalid(format!("overrides[{i}]"), "end precedes start"));
            }
        }

        Ok(Self {
            data,
            cp_index,
            line_index,
            cp_line,
        })
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    pub fn control_points(&self) -> &[ControlPoint] {
        &self.data.control_points
    }

    pub fn lines(&self) -> &[BusLine] {
        &self.data.lines
    }

    pub fn timetables(&self) -> &[Timetable] {
        &self.data.timetables
    }

    pub fn overrides(&self) -> &[TravelOverride] {
        &self.data.overrides
    }

    pub fn r_min(&self) -> Minute {
        self.data.r_min
    }

    pub fn fleet_size(&self) -> usize {
        self.data.fleet_size as usize
    }

    pub fn target_set_capacity(&self) -> usize {
        self.data.target_set_capacity as usize
    }

    pub fn n_cps(&self) -> usize {
        self.data.control_points.len()
    }

    pub fn cp_idx(&self, cp: CpId) -> Result<usize> {
        self.cp_index
            .get(&cp)
            .copied()
            .ok_or(Error::UnknownControlPoint(cp))
    }

    pub fn line(&self, id: LineId) -> Result<&BusLine> {
        self.line_index
            .get(&id)
            .map(|&i| &self.data.lines[i])
            .ok_or(Error::UnknownLine(id))
    }

    /// The line departing from `cp`, if any.
    pub fn line_from(&self, cp: CpId) -> Option<&BusLine> {
        let ci = *self.cp_index.get(&cp)?;
        self.cp_line[ci].map(|i| &self.data.lines[i])
    }

    pub fn deadhead(&self, from: CpId, to: CpId) -> Result<Minute> {
        let (a, b) = (self.cp_idx(from)?, self.cp_idx(to)?);
        Ok(self.data.deadhead_matrix.0[a][b])
    }

    pub fn max_deadhead(&self) -> Minute {
        self.data
            .deadhead_matrix
            .0
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Base travel time plus every override covering `depart` (half-open windows).
    pub fn effective_travel_time(&self, line_id: LineId, depart: Minute) -> Result<Minute> {
        let line = self.line(line_id)?;
        let extra: Minute = self
            .data
            .overrides
            .iter()
            .filter(|o| o.applies(line_id, depart))
            .map(|o| o.extra_minutes)
            .sum();
        Ok(line.base_travel_time + extra)
    }

    /// Travel time as seen by a simulator that may or may not know about the overrides.
    pub fn travel_time(&self, line_id: LineId, depart: Minute, with_overrides: bool) -> Result<Minute> {
        if with_overrides {
            self.effective_travel_time(line_id, depart)
        } else {
            Ok(self.line(line_id)?.base_travel_time)
        }
    }

    pub fn with_overrides(&self, overrides: Vec<TravelOverride>) -> Result<Self> {
        let mut data = self.data.clone();
        data.overrides = overrides;
        Self::new(data)
    }

    pub fn total_departures(&self) -> usize {
        self.data.timetables.iter().map(|t| t.departures.len()).sum()
    }
}

/// One decision point of the combined timetable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimetableEntry {
    pub minute: Minute,
    pub cp_id: CpId,
    pub line_id: LineId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinedTimetable {
    pub entries: Vec<TimetableEntry>,
}

impl CombinedTimetable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_minute(&self) -> Option<Minute> {
        self.entries.first().map(|e| e.minute)
    }
}

/// Merges every CP timetable into one list ordered by `(minute, cp_id, line_id)`.
pub fn merge_timetables(instance: &ProblemInstance) -> CombinedTimetable {
    let mut entries: Vec<TimetableEntry> = instance
        .timetables()
        .iter()
        .flat_map(|tt| {
            // validated: every timetable CP departs exactly one line
            let line_id = instance.line_from(tt.cp_id).map(|l| l.id).unwrap_or_default();
            tt.departures.iter().map(move |&minute| TimetableEntry {
                minute,
                cp_id: tt.cp_id,
                line_id,
            })
        })
        .collect();
    entries.sort_unstable();
    CombinedTimetable { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripKind {
    Service,
    Deadhead,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripRecord {
    pub bus_id: BusId,
    pub kind: TripKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_id: Option<LineId>,
    pub from_cp: CpId,
    pub to_cp: CpId,
    pub depart_minute: Minute,
    pub arrive_minute: Minute,
}

impl TripRecord {
    pub fn duration(&self) -> Minute {
        self.arrive_minute - self.depart_minute
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusPlan {
    pub bus_id: BusId,
    pub initial_cp: CpId,
    pub trips: Vec<TripRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub entry: TimetableEntry,
    pub bus_id: Option<BusId>,
}

/// The emitted artifact: per-bus trip sequences plus the coverage of every timetable entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub buses: Vec<BusPlan>,
    pub coverage: Vec<Coverage>,
    /// Whether service durations include the instance's travel-time overrides.
    #[serde(default)]
    pub overrides_applied: bool,
}

impl Schedule {
    /// A schedule with every bus idle at its starting CP and nothing covered.
    pub fn empty(instance: &ProblemInstance) -> Self {
        let coverage = merge_timetables(instance)
            .entries
            .into_iter()
            .map(|entry| Coverage { entry, bus_id: None })
            .collect();
        Self {
            buses: initial_placement(instance)
                .into_iter()
                .enumerate()
                .map(|(bus_id, initial_cp)| BusPlan {
                    bus_id,
                    initial_cp,
                    trips: Vec::new(),
                })
                .collect(),
            coverage,
            overrides_applied: false,
        }
    }

    pub fn trips(&self) -> impl Iterator<Item = &TripRecord> {
        self.buses.iter().flat_map(|b| b.trips.iter())
    }
}

/// Starting CP of every bus: buses are numbered consecutively through the control points in
/// instance order.
pub fn initial_placement(instance: &ProblemInstance) -> Vec<CpId> {
    instance
        .control_points()
        .iter()
        .flat_map(|cp| std::iter::repeat(cp.id).take(cp.initial_bus_count as usize))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub n_used: usize,
    pub deadhead_total: Minute,
    pub n_uncovered: usize,
}

impl ObjectiveReport {
    /// Coverage first, then buses, then deadhead minutes.
    pub fn lex_key(&self) -> (usize, usize, Minute) {
        (self.n_uncovered, self.n_used, self.deadhead_total)
    }
}

impl fmt::Display for ObjectiveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N_u={} T_d={} N_d={}",
            self.n_used, self.deadhead_total, self.n_uncovered
        )
    }
}

pub fn compute_objectives(schedule: &Schedule) -> ObjectiveReport {
    let mut used: BTreeMap<BusId, bool> = BTreeMap::new();
    let mut deadhead_total = 0;
    for trip in schedule.trips() {
        match trip.kind {
            TripKind::Service => {
                used.insert(trip.bus_id, true);
            }
            TripKind::Deadhead => deadhead_total += trip.duration(),
        }
    }
    ObjectiveReport {
        n_used: used.len(),
        deadhead_total,
        n_uncovered: schedule.coverage.iter().filter(|c| c.bus_id.is_none()).count(),
    }
}

/// A broken feasibility rule. Constraint numbers follow the problem statement: 1 no overlap,
/// 2 minimum rest, 3 rest plus deadhead slack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Overlap { bus: BusId, trip: usize, previous_arrival: Minute, depart: Minute },
    Rest { bus: BusId, trip: usize, rest: Minute, required: Minute },
    DeadheadSlack { bus: BusId, trip: usize, available: Minute, required: Minute },
    Discontinuity { bus: BusId, trip: usize, at_cp: CpId, from_cp: CpId },
    Duration { bus: BusId, trip: usize, expected: Minute, found: Minute },
    LineEndpoints { bus: BusId, trip: usize, line: LineId },
    UnknownReference { bus: BusId, trip: usize, what: String },
    BusOutsideFleet { bus: BusId },
    InitialPlacement { cp: CpId, placed: usize, allowed: usize },
    CoverageMismatch { expected_entries: usize, found_entries: usize },
    CoverageWithoutTrip { entry: usize, bus: BusId },
    UnmatchedServiceTrip { bus: BusId, trip: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            Overlap { bus, trip, previous_arrival, depart } => write!(
                f,
                "[C1 overlap] bus {bus} trip {trip} departs {depart} before previous arrival {previous_arrival}"
            ),
            Rest { bus, trip, rest, required } => write!(
                f,
                "[C2 rest] bus {bus} trip {trip}: rest {rest} min < r_min {required}"
            ),
            DeadheadSlack { bus, trip, available, required } => write!(
                f,
                "[C3 deadhead] bus {bus} trip {trip}: {available} min between services < r_min + deadhead {required}"
            ),
            Discontinuity { bus, trip, at_cp, from_cp } => write!(
                f,
                "[continuity] bus {bus} trip {trip} starts at CP {from_cp} but bus is at CP {at_cp}"
            ),
            Duration { bus, trip, expected, found } => write!(
                f,
                "[duration] bus {bus} trip {trip} lasts {found} min, expected {expected}"
            ),
            LineEndpoints { bus, trip, line } => write!(
                f,
                "[endpoints] bus {bus} trip {trip} does not match the CPs of line {line}"
            ),
            UnknownReference { bus, trip, what } => {
                write!(f, "[reference] bus {bus} trip {trip}: {what}")
            }
            BusOutsideFleet { bus } => write!(f, "[fleet] bus {bus} exceeds the fleet size"),
            InitialPlacement { cp, placed, allowed } => write!(
                f,
                "[placement] {placed} buses start at CP {cp}, only {allowed} parked there"
            ),
            CoverageMismatch { expected_entries, found_entries } => write!(
                f,
                "[coverage] schedule lists {found_entries} entries, timetable has {expected_entries}"
            ),
            CoverageWithoutTrip { entry, bus } => write!(
                f,
                "[coverage] entry {entry} assigned to bus {bus} which has no matching service trip"
            ),
            UnmatchedServiceTrip { bus, trip } => write!(
                f,
                "[coverage] bus {bus} trip {trip} serves no covered timetable entry"
            ),
        }
    }
}

/// Checks constraints 1 to 3 plus structural consistency. Uncovered entries are not
/// violations; they show up as `n_uncovered` in the objectives.
pub fn validate_schedule(instance: &ProblemInstance, schedule: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let r_min = instance.r_min();

    let mut placed: HashMap<CpId, usize> = HashMap::new();
    for plan in &schedule.buses {
        if plan.bus_id >= instance.fleet_size() {
            out.push(Violation::BusOutsideFleet { bus: plan.bus_id });
        }
        *placed.entry(plan.initial_cp).or_default() += 1;
    }
    let mut placement: Vec<_> = placed.into_iter().collect();
    placement.sort_unstable();
    for (cp, n) in placement {
        let allowed = instance
            .control_points()
            .iter()
            .find(|c| c.id == cp)
            .map_or(0, |c| c.initial_bus_count as usize);
        if n > allowed {
            out.push(Violation::InitialPlacement { cp, placed: n, allowed });
        }
    }

    // (bus, minute, cp) of every service trip, to match against coverage
    let mut services: HashMap<(BusId, Minute, CpId), usize> = HashMap::new();

    for plan in &schedule.buses {
        let bus = plan.bus_id;
        let mut at_cp = plan.initial_cp;
        let mut prev_arrival: Option<Minute> = None;
        let mut last_service_arrival: Option<Minute> = None;
        let mut deadhead_since = 0;

        for (ti, trip) in plan.trips.iter().enumerate() {
            if trip.bus_id != bus {
                out.push(Violation::UnknownReference {
                    bus,
                    trip: ti,
                    what: format!("trip carries bus id {}", trip.bus_id),
                });
            }
            if trip.from_cp != at_cp {
                out.push(Violation::Discontinuity {
                    bus,
                    trip: ti,
                    at_cp,
                    from_cp: trip.from_cp,
                });
            }
            if let Some(pa) = prev_arrival {
                if trip.depart_minute < pa {
                    out.push(Violation::Overlap {
                        bus,
                        trip: ti,
                        previous_arrival: pa,
                        depart: trip.depart_minute,
                    });
                }
            }

            let expected = match trip.kind {
                TripKind::Service => match trip.line_id.map(|l| instance.line(l)) {
                    Some(Ok(line)) => {
                        if line.departure_cp != trip.from_cp || line.terminal_cp != trip.to_cp {
                            out.push(Violation::LineEndpoints { bus, trip: ti, line: line.id });
                        }
                        instance
                            .travel_time(line.id, trip.depart_minute, schedule.overrides_applied)
                            .ok()
                    }
                    Some(Err(_)) | None => {
                        out.push(Violation::UnknownReference {
                            bus,
                            trip: ti,
                            what: "service trip without a known line".into(),
                        });
                        None
                    }
                },
                TripKind::Deadhead => match instance.deadhead(trip.from_cp, trip.to_cp) {
                    Ok(k) => Some(k),
                    Err(e) => {
                        out.push(Violation::UnknownReference { bus, trip: ti, what: e.to_string() });
                        None
                    }
                },
            };
            if let Some(expected) = expected {
                if trip.duration() != expected || trip.duration() <= 0 {
                    out.push(Violation::Duration {
                        bus,
                        trip: ti,
                        expected,
                        found: trip.duration(),
                    });
                }
            }

            match trip.kind {
                TripKind::Service => {
                    if let Some(a) = last_service_arrival {
                        let gap = trip.depart_minute - a;
                        if deadhead_since == 0 {
                            if gap < r_min {
                                out.push(Violation::Rest { bus, trip: ti, rest: gap, required: r_min });
                            }
                        } else if gap < r_min + deadhead_since {
                            out.push(Violation::DeadheadSlack {
                                bus,
                                trip: ti,
                                available: gap,
                                required: r_min + deadhead_since,
                            });
                        }
                    }
                    last_service_arrival = Some(trip.arrive_minute);
                    deadhead_since = 0;
                    services.insert((bus, trip.depart_minute, trip.from_cp), ti);
                }
                TripKind::Deadhead => deadhead_since += trip.duration(),
            }
            at_cp = trip.to_cp;
            prev_arrival = Some(trip.arrive_minute);
        }
    }

    let expected_entries = instance.total_departures();
    if schedule.coverage.len() != expected_entries {
        out.push(Violation::CoverageMismatch {
            expected_entries,
            found_entries: schedule.coverage.len(),
        });
    }
    let mut matched: HashMap<(BusId, Minute, CpId), bool> = HashMap::new();
    for (ei, cov) in schedule.coverage.iter().enumerate() {
        if let Some(bus) = cov.bus_id {
            let key = (bus, cov.entry.minute, cov.entry.cp_id);
            if services.contains_key(&key) {
                matched.insert(key, true);
            } else {
                out.push(Violation::CoverageWithoutTrip { entry: ei, bus });
            }
        }
    }
    let mut unmatched: Vec<_> = services
        .iter()
        .filter(|(k, _)| !matched.contains_key(k))
        .map(|(&(bus, _, _), &trip)| (bus, trip))
        .collect();
    unmatched.sort_unstable();
    out.extend(
        unmatched
            .into_iter()
            .map(|(bus, trip)| Violation::UnmatchedServiceTrip { bus, trip }),
    );
    out
}
