//! Multi-line bus scheduling toolkit.
//!
//! Departures from every control point are merged into one combined timetable and each entry
//! becomes a decision point: a policy picks which bus serves it. The crate provides the static
//! problem model, bus screening and state features, the step-wise and final rewards, the
//! dispatch simulator, a from-scratch PPO agent, the online controller with its time-window
//! deadhead planner, heuristic baselines, instance generation and schedule rendering.

pub mod baselines;
pub mod error;
pub mod gantt;
pub mod generator;
pub mod io;
pub mod model;
pub mod online;
pub mod ppo;
pub mod reward;
pub mod rollout;
pub mod screening;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    BusId, BusLine, CombinedTimetable, ControlPoint, CpId, DeadheadMatrix, LineId, Minute,
    ObjectiveReport, ProblemInstance, Schedule, Timetable, TimetableEntry, TravelOverride,
    TripKind, TripRecord, Violation,
};
pub use screening::Mode;
