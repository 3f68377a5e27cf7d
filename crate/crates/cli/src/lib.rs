//! Configuration, curve generation and file output for the `curveflow` binary.

pub mod config;
pub mod curves;
pub mod error;
pub mod output;

use std::path::Path;

use curveflow_core::driver::{self, gamma_study, GammaRow, StudyAxis};
use curveflow_core::{Curve, Series};

pub use config::{parse_config, ConfigFile, ExperimentConfig, OutputFormat, Relocation};
pub use curves::{generate_curve, read_vertices, write_vertices, CurveFields, CurveKind, CurveSpec};
pub use error::{CliError, Result, EXIT_CONFIG, EXIT_FAILURE};
pub use output::write_outputs;

/// Relocates `curve` with the configured solver tolerances.
pub fn apply_relocation(curve: &Curve, relocation: &Relocation, config: &ExperimentConfig) -> Result<Curve> {
    log::info!(
        "relocating {} vertices: alpha {}, dt {}, until t = {}",
        curve.len(),
        relocation.alpha,
        relocation.dt,
        relocation.until_time
    );
    driver::relocate_with(curve, relocation.alpha, relocation.dt, relocation.until_time, &config.run.solver)
        .map_err(|source| CliError::Flow { context: "relocation failed", source })
}

/// Generated curve of `spec`, relocated when the config asks for it.
pub fn prepare_curve(spec: &CurveSpec, config: &ExperimentConfig) -> Result<Curve> {
    let curve = generate_curve(spec)?;
    match &config.relocation {
        Some(r) => apply_relocation(&curve, r, config),
        None => Ok(curve),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Series> {
    let initial = prepare_curve(&config.curve, config)?;
    log::info!(
        "{} flow, {} vertices, dt {}, up to {} steps",
        config.run.flow.name(),
        initial.len(),
        config.run.params.dt,
        config.run.max_steps
    );
    Ok(driver::run(&initial, &config.run)?)
}

/// Config echo written into the run summary.
pub fn config_echo(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(&config.file).expect("config is plain data")
}

pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<Series> {
    let series = run_experiment(config)?;
    write_outputs(&series, &config_echo(config), dir, &config.output.formats)?;
    Ok(series)
}

pub fn study_gamma(config: &ExperimentConfig, axis: &StudyAxis<f64>) -> Result<Vec<GammaRow<f64>>> {
    if axis.is_empty() {
        return Err(CliError::validation("values", "at least one value is required"));
    }
    let base_n = match &config.curve {
        CurveSpec::Kubire { n_vertices }
        | CurveSpec::Rectangle { n_vertices, .. }
        | CurveSpec::RegularPolygon { n_vertices, .. } => *n_vertices,
        CurveSpec::File { .. } => match axis {
            StudyAxis::Dt(_) => prepare_curve(&config.curve, config)?.len(),
            StudyAxis::Vertices(_) => {
                return Err(CliError::validation("curve", "a vertex-count study needs a generated curve"))
            }
        },
    };
    match axis {
        StudyAxis::Dt(values) => {
            for &dt in values {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(CliError::validation("values", format!("time steps must be positive, got {dt}")));
                }
            }
        }
        StudyAxis::Vertices(values) => {
            for &n in values {
                config.curve.with_vertices(n)?;
            }
        }
    }
    // Failures inside individual rows are reported through their termination.
    let make_curve = |n: usize| {
        let spec = if n == base_n { config.curve.clone() } else { config.curve.with_vertices(n).map_err(to_flow)? };
        prepare_curve(&spec, config).map_err(to_flow)
    };
    Ok(gamma_study(&config.run, axis, base_n, make_curve))
}

fn to_flow(err: CliError) -> curveflow_core::FlowError {
    match err {
        CliError::Flow { source, .. } => source,
        other => curveflow_core::FlowError::InvalidParameter { name: "curve", reason: other.to_string() },
    }
}
