//! Diagnostics table, snapshot files and the run summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use curveflow_core::driver::GammaRow;
use curveflow_core::{Functionals, Series, Termination};
use serde_json::{json, Value};

use crate::config::OutputFormat;
use crate::curves::format_vertices;
use crate::error::{CliError, Result};

pub const DIAGNOSTICS_HEADER: &str = "step,B,L,A,lambda,mu,gamma,mesh_ratio,solver_iters,residual";
pub const GAMMA_HEADER: &str = "dt,n_vertices,gamma,abs_gamma,steps,termination";

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

pub fn format_diagnostics(series: &Series) -> String {
    let mut out = String::with_capacity(256 * (series.diagnostics.len() + 1));
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for d in &series.diagnostics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            d.step,
            sci(d.bending),
            sci(d.length),
            sci(d.area),
            optional(d.lambda),
            optional(d.mu),
            optional(d.gamma),
            sci(d.mesh_ratio),
            d.solver_iterations,
            sci(d.residual),
        );
    }
    out
}

pub fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step}.csv")
}

fn functionals_json(f: &Functionals<f64>) -> Value {
    json!({ "B": f.bending, "L": f.length, "A": f.area })
}

pub fn termination_json(t: &Termination) -> Value {
    match t {
        Termination::SolverFailure { step, message } | Termination::GeometryFailure { step, message } => {
            json!({ "reason": t.name(), "step": step, "message": message })
        }
        _ => json!({ "reason": t.name() }),
    }
}

pub fn summary_json(series: &Series, echo: &Value) -> Value {
    let last = series.diagnostics.last();
    let final_functionals = match last {
        Some(d) => json!({ "B": d.bending, "L": d.length, "A": d.area }),
        None => series.initial.as_ref().map_or(Value::Null, functionals_json),
    };
    json!({
        "config": echo,
        "termination": termination_json(&series.termination),
        "steps": series.steps_taken(),
        "initial": series.initial.as_ref().map_or(Value::Null, functionals_json),
        "final": final_functionals,
        "final_multipliers": {
            "lambda": last.and_then(|d| d.lambda),
            "mu": last.and_then(|d| d.mu),
            "gamma": last.and_then(|d| d.gamma),
        },
        "final_mesh_ratio": last.map(|d| d.mesh_ratio),
        "snapshots": series.snapshots.iter().map(|(s, _)| s).collect::<Vec<_>>(),
    })
}

/// Writes the requested files into `dir`, creating it if needed, and returns their paths.
pub fn write_outputs(series: &Series, echo: &Value, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&OutputFormat::Diagnostics) {
        let path = dir.join("diagnostics.csv");
        write_atomic(&path, format_diagnostics(series).as_bytes())?;
        written.push(path);
    }
    if formats.contains(&OutputFormat::Snapshots) {
        for (step, curve) in &series.snapshots {
            let path = dir.join(snapshot_name(*step));
            write_atomic(&path, format_vertices(curve).as_bytes())?;
            written.push(path);
        }
    }
    if formats.contains(&OutputFormat::Summary) {
        let path = dir.join("run_summary.json");
        let text = serde_json::to_string_pretty(&summary_json(series, echo)).expect("summary is plain data");
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

pub fn format_gamma_rows(rows: &[GammaRow<f64>]) -> String {
    let mut out = String::from(GAMMA_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sci(r.dt),
            r.n_vertices,
            optional(r.final_gamma),
            optional(r.final_gamma.map(f64::abs)),
            r.steps,
            r.termination.name(),
        );
    }
    out
}
