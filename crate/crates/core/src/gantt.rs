//! Gantt-style SVG of a schedule: one row per used bus, one bar per trip.
//!
//! Every `<rect>` in the output is a trip bar, so bars can be counted by tag. Legend swatches
//! are circles.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{merge_timetables, LineId, Minute, ProblemInstance, Schedule, TripKind};

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];
const LEFT: f64 = 70.0;
const TOP: f64 = 30.0;
const ROW: f64 = 22.0;
const BAR: f64 = 14.0;
const PX_PER_MINUTE: f64 = 1.0;

fn line_colour(lines: &[LineId], id: LineId) -> &'static str {
    let i = lines.iter().position(|&l| l == id).unwrap_or(0);
    PALETTE[i % PALETTE.len()]
}

pub fn render_gantt(schedule: &Schedule, instance: &ProblemInstance) -> Result<String> {
    let entries = merge_timetables(instance).entries;
    if schedule.buses.len() != instance.fleet_size() {
        return Err(Error::ScheduleMismatch(format!(
            "schedule has {} buses, instance fleet is {}",
            schedule.buses.len(),
            instance.fleet_size()
        )));
    }
    if schedule.coverage.len() != entries.len()
        || schedule.coverage.iter().zip(&entries).any(|(c, e)| c.entry != *e)
    {
        return Err(Error::ScheduleMismatch("coverage does not follow the instance timetable".into()));
    }

    let rows: Vec<_> = schedule.buses.iter().filter(|b| !b.trips.is_empty()).collect();
    let lo = schedule
        .trips()
        .map(|t| t.depart_minute)
        .chain(entries.first().map(|e| e.minute))
        .min()
        .unwrap_or(0);
    let hi = schedule
        .trips()
        .map(|t| t.arrive_minute)
        .chain(entries.last().map(|e| e.minute))
        .max()
        .unwrap_or(60);
    let t0: Minute = lo.div_euclid(60) * 60;
    let t1: Minute = (hi.div_euclid(60) + 1) * 60;
    let x = |m: Minute| LEFT + (m - t0) as f64 * PX_PER_MINUTE;
    let line_ids: Vec<LineId> = instance.lines().iter().map(|l| l.id).collect();

    let plot_h = rows.len() as f64 * ROW;
    let legend_y = TOP + plot_h + 40.0;
    let width = x(t1) + 20.0;
    let height = legend_y + 30.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="#555" stroke-width="2"/></pattern></defs>
"##,
    );

    // time axis with hourly ticks
    let axis_y = TOP + plot_h + 5.0;
    let _ = writeln!(
        s,
        r##"<g class="axes" stroke="#333"><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{axis_y}"/><line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}"/></g>"##,
        x(t1)
    );
    let mut tick = t0;
    while tick <= t1 {
        let tx = x(tick);
        let _ = writeln!(
            s,
            r##"<g class="tick"><line x1="{tx}" y1="{axis_y}" x2="{tx}" y2="{}" stroke="#333"/><text x="{tx}" y="{}" text-anchor="middle">{:02}:{:02}</text></g>"##,
            axis_y + 4.0,
            axis_y + 16.0,
            tick / 60,
            tick % 60
        );
        tick += 60;
    }

    for (r, plan) in rows.iter().enumerate() {
        let y = TOP + r as f64 * ROW;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">bus {}</text>"#,
            LEFT - 6.0,
            y + BAR - 3.0,
            plan.bus_id
        );
        for t in &plan.trips {
            let (fill, label) = match (t.kind, t.line_id) {
                (TripKind::Service, Some(l)) => (line_colour(&line_ids, l).to_string(), format!("line {l}")),
                _ => ("url(#hatch)".to_string(), "deadhead".to_string()),
            };
            let _ = writeln!(
                s,
                r##"<rect class="trip" x="{}" y="{y}" width="{}" height="{BAR}" fill="{fill}" stroke="#222" stroke-width="0.5"><title>bus {} {label} {}-{}</title></rect>"##,
                x(t.depart_minute),
                (t.arrive_minute - t.depart_minute).max(0) as f64 * PX_PER_MINUTE,
                plan.bus_id,
                t.depart_minute,
                t.arrive_minute
            );
        }
    }

    s.push_str("<g class=\"legend\">\n");
    let mut lx = LEFT;
    let shown: BTreeSet<LineId> = line_ids.iter().copied().collect();
    for l in shown {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{legend_y}" r="6" fill="{}"/><text x="{}" y="{}">line {l}</text>"#,
            lx + 6.0,
            line_colour(&line_ids, l),
            lx + 16.0,
            legend_y + 4.0
        );
        lx += 70.0;
    }
    let _ = writeln!(
        s,
        r##"<circle cx="{}" cy="{legend_y}" r="6" fill="url(#hatch)" stroke="#222"/><text x="{}" y="{}">deadhead</text>"##,
        lx + 6.0,
        lx + 16.0,
        legend_y + 4.0
    );
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
