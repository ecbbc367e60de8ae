//! Files: instances, schedules, scenarios, reports and learning curves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_objectives, InstanceData, ObjectiveReport, ProblemInstance, Schedule, TravelOverride};
use crate::ppo::CurvePoint;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .map(|n| format!(".{}.tmp", n.to_string_lossy()))
        .unwrap_or_else(|| ".tmp".into());
    tmp.set_file_name(name);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn to_json<T: Serialize>(value: &T, what: &Path) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        what: what.display().to_string(),
        source: e,
    })
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, what: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Json {
        what: what.display().to_string(),
        source: e,
    })
}

pub fn parse_instance(text: &str, origin: &Path) -> Result<ProblemInstance> {
    let data: InstanceData = from_json(text, origin)?;
    ProblemInstance::new(data)
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    parse_instance(&read_text(path)?, path)
}

pub fn save_instance(instance: &ProblemInstance, path: &Path) -> Result<()> {
    write_atomic(path, to_json(instance.data(), path)?.as_bytes())
}

/// Exported schedule: trips, coverage and the objectives computed from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub schedule: Schedule,
    pub report: ObjectiveReport,
}

impl ScheduleDocument {
    pub fn new(schedule: Schedule) -> Self {
        let report = compute_objectives(&schedule);
        Self { schedule, report }
    }
}

pub fn save_schedule(schedule: &Schedule, path: &Path) -> Result<()> {
    write_atomic(path, to_json(&ScheduleDocument::new(schedule.clone()), path)?.as_bytes())
}

pub fn load_schedule(path: &Path) -> Result<ScheduleDocument> {
    from_json(&read_text(path)?, path)
}

/// Disruption scenario files are a JSON list of overrides.
pub fn load_scenario(path: &Path) -> Result<Vec<TravelOverride>> {
    from_json(&read_text(path)?, path)
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("episode,accumulated_reward\n");
    for p in curve {
        let _ = writeln!(s, "{},{}", p.episode, p.accumulated_reward);
    }
    s
}

pub fn reports_csv(rows: &[(String, ObjectiveReport)]) -> String {
    let mut s = String::from("label,n_used,deadhead_total,n_uncovered\n");
    for (label, r) in rows {
        let _ = writeln!(s, "{label},{},{},{}", r.n_used, r.deadhead_total, r.n_uncovered);
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::two_line_data;

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_instance("{\n  \"control_points\": [\n  oops\n]}", Path::new("x.json"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn semantic_errors_carry_field_paths() {
        let mut d = two_line_data();
        d.lines[1].departure_cp = 42;
        let text = serde_json::to_string(&d).unwrap();
        let err = parse_instance(&text, Path::new("x.json")).unwrap_err().to_string();
        assert!(err.contains("lines[1].departure_cp"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = serde_json::to_value(two_line_data()).unwrap();
        v["colour"] = serde_json::json!("red");
        let err = parse_instance(&v.to_string(), Path::new("x.json")).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn instance_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/i.json");
        let inst = ProblemInstance::new(two_line_data()).unwrap();
        save_instance(&inst, &p).unwrap();
        assert_eq!(load_instance(&p).unwrap(), inst);
    }

    #[test]
    fn csv_layout() {
        let c = curve_csv(&[CurvePoint { episode: 1, accumulated_reward: -2.5 }]);
        assert_eq!(c, "episode,accumulated_reward\n1,-2.5\n");
    }
}
