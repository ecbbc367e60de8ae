//! Random instances: headway-driven timetables thinned by uniform deletion.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::greedy_schedule;
use crate::error::{Error, Result};
use crate::model::{
    compute_objectives, merge_timetables, BusLine, ControlPoint, DeadheadMatrix, InstanceData,
    Minute, ProblemInstance, Timetable, MINUTES_PER_DAY,
};
use crate::rollout::episode_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Physical lines; each has two directions and two control points.
    pub n_lines: usize,
    /// Departures drawn per control point before deletion.
    pub departures_per_cp: usize,
    pub day_start: Minute,
    pub day_end: Minute,
    pub headway: (Minute, Minute),
    pub travel_time: (Minute, Minute),
    pub deadhead_time: (Minute, Minute),
    pub r_min: Minute,
    /// Fixed fleet, or `None` to size the fleet as the smallest one greedy covers fully.
    pub fleet_size: Option<u32>,
    /// Extra buses on top of the automatic size, as a share of it (rounded up).
    pub fleet_margin: f64,
    pub target_set_capacity: u32,
    pub deletion_fraction: f64,
    pub seed: u64,
    /// Fresh draws allowed when a fixed fleet cannot cover the timetable.
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_lines: 2,
            departures_per_cp: 20,
            day_start: 360,
            day_end: 1320,
            headway: (20, 60),
            travel_time: (30, 60),
            deadhead_time: (10, 30),
            r_min: 5,
            fleet_size: None,
            fleet_margin: 0.0,
            target_set_capacity: 8,
            deletion_fraction: 0.0,
            seed: 0,
            max_attempts: 20,
        }
    }
}

fn check_bounds(name: &str, (lo, hi): (Minute, Minute)) -> Result<()> {
    if lo <= 0 || hi < lo {
        return Err(Error::Config(format!("{name} bounds ({lo}, {hi}) must be positive and ordered")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lines == 0 || self.departures_per_cp == 0 {
            return Err(Error::Config("need at least one line and one departure per CP".into()));
        }
        if !(0 <= self.day_start && self.day_start < self.day_end && self.day_end <= MINUTES_PER_DAY) {
            return Err(Error::Config(format!(
                "service span [{}, {}) must lie inside one day",
                self.day_start, self.day_end
            )));
        }
        check_bounds("headway", self.headway)?;
        check_bounds("travel time", self.travel_time)?;
        check_bounds("deadhead time", self.deadhead_time)?;
        if self.r_min < 0 {
            return Err(Error::Config("r_min must be non-negative".into()));
        }
        if self.target_set_capacity == 0 {
            return Err(Error::Config("target set capacity must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.deletion_fraction) {
            return Err(Error::Config(format!("deletion fraction {} outside [0, 1)", self.deletion_fraction)));
        }
        if !(self.fleet_margin >= 0.0 && self.fleet_margin.is_finite()) {
            return Err(Error::Config("fleet margin must be a non-negative number".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of entries kept when deleting a fraction `f` of `n`.
pub fn kept_count(n: usize, f: f64) -> usize {
    ((1.0 - f) * n as f64).round() as usize
}

/// Removes entries from the combined timetable uniformly at random, keeping
/// `round((1 - f) * N)` of them.
fn delete_entries(data: &mut InstanceData, f: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let instance = ProblemInstance::new(data.clone())?;
    let entries = merge_timetables(&instance).entries;
    let n = entries.len();
    let drop = sample(rng, n, n - kept_count(n, f)).into_vec();
    let mut gone = vec![false; n];
    for i in drop {
        gone[i] = true;
    }
    for tt in &mut data.timetables {
        tt.departures.clear();
    }
    for (e, _) in entries.iter().zip(&gone).filter(|(_, &g)| !g) {
        let tt = data
            .timetables
            .iter_mut()
            .find(|t| t.cp_id == e.cp_id)
            .expect("entry comes from a timetable");
        tt.departures.push(e.minute);
    }
    Ok(())
}

/// Splits `fleet` over control points in proportion to their departures (largest remainder,
/// ties to the lower index).
fn distribute(fleet: u32, weights: &[usize]) -> Vec<u32> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        let mut out = vec![0; weights.len()];
        if let Some(first) = out.first_mut() {
            *first = fleet;
        }
        return out;
    }
    let exact: Vec<f64> = weights.iter().map(|&w| fleet as f64 * w as f64 / total as f64).collect();
    let mut out: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let mut rest = fleet - out.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

fn with_fleet(mut data: InstanceData, fleet: u32) -> Result<ProblemInstance> {
    let weights: Vec<usize> = data
        .control_points
        .iter()
        .map(|cp| {
            data.timetables
                .iter()
                .find(|t| t.cp_id == cp.id)
                .map_or(0, |t| t.departures.len())
        })
        .collect();
    for (cp, n) in data.control_points.iter_mut().zip(distribute(fleet, &weights)) {
        cp.initial_bus_count = n;
    }
    data.fleet_size = fleet;
    ProblemInstance::new(data)
}

fn greedy_covers(instance: &ProblemInstance) -> Result<bool> {
    let s = greedy_schedule(Arc::new(instance.clone()))?;
    Ok(compute_objectives(&s).n_uncovered == 0)
}

fn draw(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<InstanceData> {
    let n_cps = 2 * cfg.n_lines;
    let control_points: Vec<ControlPoint> = (1..=n_cps as u32)
        .map(|id| ControlPoint { id, initial_bus_count: 0 })
        .collect();
    let mut lines = Vec::with_capacity(n_cps);
    for l in 0..cfg.n_lines as u32 {
        let (a, b) = (2 * l + 1, 2 * l + 2);
        let outbound = rng.gen_range(cfg.travel_time.0..=cfg.travel_time.1);
        let inbound = rng.gen_range(cfg.travel_time.0..=cfg.travel_time.1);
        lines.push(BusLine { id: a, departure_cp: a, terminal_cp: b, base_travel_time: outbound });
        lines.push(BusLine { id: b, departure_cp: b, terminal_cp: a, base_travel_time: inbound });
    }
    let timetables = control_points
        .iter()
        .map(|cp| {
            let mut departures = Vec::with_capacity(cfg.departures_per_cp);
            let mut t = cfg.day_start + rng.gen_range(0..cfg.headway.1);
            while departures.len() < cfg.departures_per_cp && t < cfg.day_end {
                departures.push(t);
                t += rng.gen_range(cfg.headway.0..=cfg.headway.1);
            }
            Timetable { cp_id: cp.id, departures }
        })
        .collect();
    let mut matrix = vec![vec![0; n_cps]; n_cps];
    for i in 0..n_cps {
        for j in i + 1..n_cps {
            let k = rng.gen_range(cfg.deadhead_time.0..=cfg.deadhead_time.1);
            matrix[i][j] = k;
            matrix[j][i] = k;
        }
    }
    let mut data = InstanceData {
        control_points,
        lines,
        timetables,
        deadhead_matrix: DeadheadMatrix(matrix),
        r_min: cfg.r_min,
        fleet_size: 0,
        target_set_capacity: cfg.target_set_capacity,
        overrides: Vec::new(),
    };
    delete_entries(&mut data, cfg.deletion_fraction, rng)?;
    Ok(data)
}

/// Builds a random instance whose greedy schedule covers every departure.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<ProblemInstance> {
    cfg.validate()?;
    for attempt in 0..cfg.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, attempt as u64));
        let data = draw(cfg, &mut rng)?;
        let n: usize = data.timetables.iter().map(|t| t.departures.len()).sum();
        if n == 0 {
            continue;
        }
        match cfg.fleet_size {
            Some(fleet) => {
                let inst = with_fleet(data, fleet)?;
                if greedy_covers(&inst)? {
                    return Ok(inst);
                }
                log::debug!("attempt {attempt}: fleet {fleet} leaves departures uncovered");
            }
            None => {
                // with one bus per departure greedy always covers, so this terminates
                let mut fleet = 1;
                let inst = loop {
                    let inst = with_fleet(data.clone(), fleet)?;
                    if greedy_covers(&inst)? {
                        break inst;
                    }
                    fleet += 1;
                };
                if cfg.fleet_margin == 0.0 {
                    return Ok(inst);
                }
                let padded = fleet + (fleet as f64 * cfg.fleet_margin).ceil() as u32;
                return with_fleet(inst.into_data(), padded);
            }
        }
    }
    Err(Error::Generation(format!(
        "no coverable instance in {} attempts",
        cfg.max_attempts
    )))
}

/// Deletes a fraction of the base instance's combined entries, deterministically per seed.
/// Fleet and placement are kept.
pub fn derive_instance(base: &ProblemInstance, deletion_fraction: f64, seed: u64) -> Result<ProblemInstance> {
    if !(0.0..1.0).contains(&deletion_fraction) {
        return Err(Error::Config(format!("deletion fraction {deletion_fraction} outside [0, 1)")));
    }
    let mut data = base.data().clone();
    delete_entries(&mut data, deletion_fraction, &mut ChaCha8Rng::seed_from_u64(seed))?;
    ProblemInstance::new(data)
}
