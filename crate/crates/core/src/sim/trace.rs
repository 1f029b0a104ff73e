//! Trace, summary and plot-data files.

use super::runner::{Summary, Trace, TraceRecord};
use crate::params::NUM_ACTUATORS;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Column names of the trace CSV, in order.
pub fn trace_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "Va", "alpha", "beta", "phase",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..NUM_ACTUATORS).map(|i| format!("u_cmd_{i}")));
    cols.extend((0..NUM_ACTUATORS).map(|i| format!("u_eff_{i}")));
    cols.extend((0..6).map(|i| format!("Wd_{i}")));
    cols.extend((0..6).map(|i| format!("Wa_{i}")));
    cols.extend(["J", "residual", "saturated"].iter().map(|s| s.to_string()));
    cols
}

/// Row values matching [`trace_columns`]; the phase is written as its numeric code.
pub fn record_values(r: &TraceRecord) -> Vec<f64> {
    let s = &r.state;
    let q = &s.attitude;
    let mut v = vec![
        r.t,
        s.position.x,
        s.position.y,
        s.position.z,
        s.velocity.x,
        s.velocity.y,
        s.velocity.z,
        q.w,
        q.i,
        q.j,
        q.k,
        s.angular_rate.x,
        s.angular_rate.y,
        s.angular_rate.z,
        r.aero.airspeed,
        r.aero.alpha,
        r.aero.beta,
        r.phase.code() as f64,
    ];
    v.extend(r.u_cmd.as_slice());
    v.extend(r.u_eff.as_slice());
    v.extend(r.desired.0.iter());
    v.extend(r.achieved.0.iter());
    v.push(r.objective);
    v.push(r.residual);
    v.push(if r.saturated { 1.0 } else { 0.0 });
    v
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", trace_columns().join(","))?;
    let mut line = String::new();
    for r in &trace.records {
        line.clear();
        for (i, v) in record_values(r).iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("writing to a string");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_trace_csv(trace: &Trace, path: &Path) -> io::Result<()> {
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    write_trace_csv(trace, &mut out)?;
    out.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.3}"))
}

/// `key = value` lines.
pub fn summary_kv(s: &Summary) -> String {
    format!(
        "name = {}\ncrashed = {}\ncrash_time_s = {}\nreference_time_s = {:.3}\ntime_to_converge_s = {}\n\
         max_attitude_dev_deg = {:.3}\nmax_heading_dev_deg = {:.3}\naltitude_variation_m = {:.3}\n\
         max_cross_track_m = {:.3}\nsaturation_count = {}\nfinal_phase = {}\nsimulated_time_s = {:.3}\n",
        s.name,
        s.crashed,
        opt(s.crash_time),
        s.reference_time,
        opt(s.time_to_converge),
        s.max_attitude_dev_deg,
        s.max_heading_dev_deg,
        s.altitude_variation_m,
        s.max_cross_track_m,
        s.saturation_count,
        s.final_phase,
        s.simulated_time,
    )
}

pub const SUMMARY_HEADER: &str =
    "name,crashed,time_to_converge_s,max_attitude_dev_deg,altitude_variation_m,max_heading_dev_deg,max_cross_track_m,saturation_count";

pub fn summary_csv_row(s: &Summary) -> String {
    format!(
        "{},{},{},{:.3},{:.3},{:.3},{:.3},{}",
        s.name,
        s.crashed,
        opt(s.time_to_converge),
        s.max_attitude_dev_deg,
        s.altitude_variation_m,
        s.max_heading_dev_deg,
        s.max_cross_track_m,
        s.saturation_count
    )
}

/// Fixed-width table for terminals.
pub fn summary_table(rows: &[Summary]) -> String {
    let mut out = format!(
        "{:<34} {:>7} {:>10} {:>10} {:>9} {:>5}\n",
        "scenario", "crash", "settle_s", "att_dev°", "alt_var_m", "sat"
    );
    for s in rows {
        let _ = writeln!(
            out,
            "{:<34} {:>7} {:>10} {:>10.2} {:>9.2} {:>5}",
            s.name,
            s.crashed,
            opt(s.time_to_converge),
            s.max_attitude_dev_deg,
            s.altitude_variation_m,
            s.saturation_count
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlotError {
    #[error("unknown channel {name:?}; valid channels: {}", .valid.join(", "))]
    UnknownChannel { name: String, valid: Vec<String> },
    #[error("{0}")]
    Io(String),
}

/// One `t value` file per channel, named `<scenario>_<channel>.dat`.
pub fn emit_plotdata(trace: &Trace, channels: &[String], dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let cols = trace_columns();
    let idx: Vec<usize> = channels
        .iter()
        .map(|c| {
            cols.iter()
                .position(|k| k == c)
                .ok_or_else(|| PlotError::UnknownChannel { name: c.clone(), valid: cols.clone() })
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<Vec<f64>> = trace.records.iter().map(record_values).collect();
    let mut paths = Vec::new();
    for (c, &j) in channels.iter().zip(&idx) {
        let path = dir.join(format!("{}_{}.dat", trace.scenario, c));
        let mut text = String::new();
        for row in &rows {
            let _ = writeln!(text, "{} {}", row[0], row[j]);
        }
        std::fs::write(&path, text).map_err(|e| PlotError::Io(format!("{}: {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}
