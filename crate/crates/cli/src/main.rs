use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use curveflow::output::{format_gamma_rows, write_atomic};
use curveflow::{
    apply_relocation, generate_curve, parse_config, run_to_dir, study_gamma, write_vertices, CliError, CurveFields,
    EXIT_FAILURE,
};
use curveflow_core::driver::StudyAxis;

#[derive(Parser)]
#[command(name = "curveflow", version, about = "Structure-preserving Willmore and Helfrich flows of closed polygons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an initial curve as `i,x,y` CSV.
    Generate {
        /// JSON file with the curve keys of a config.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Even out the vertex spacing of the configured curve.
    Relocate {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `relocated.csv` in the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a flow and write diagnostics, snapshots and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Final multiplier gamma over a sweep of time steps or vertex counts.
    StudyGamma {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Dt,
    N,
}

fn parse_axis(axis: Axis, values: &[String]) -> Result<StudyAxis<f64>, CliError> {
    let bad = |v: &String| CliError::validation("values", format!("cannot parse `{v}`"));
    Ok(match axis {
        Axis::Dt => {
            StudyAxis::Dt(values.iter().map(|v| v.trim().parse().map_err(|_| bad(v))).collect::<Result<_, _>>()?)
        }
        Axis::N => {
            StudyAxis::Vertices(values.iter().map(|v| v.trim().parse().map_err(|_| bad(v))).collect::<Result<_, _>>()?)
        }
    })
}

fn generate(spec: &Path, out: &Path) -> Result<i32, CliError> {
    let fields = CurveFields::parse(spec)?;
    let curve = generate_curve(&fields.resolve(spec.parent().unwrap_or(Path::new(".")))?)?;
    write_vertices(out, &curve)?;
    log::info!("wrote {} vertices to {}", curve.len(), out.display());
    Ok(0)
}

fn relocate(config_path: &Path, out: Option<PathBuf>) -> Result<i32, CliError> {
    let config = parse_config(config_path)?;
    let out = match (out, &config.output.directory) {
        (Some(p), _) => p,
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
            dir.join("relocated.csv")
        }
        (None, None) => return Err(CliError::validation("output_dir", "needed when --out is not given")),
    };
    let relocation = config.file.relocation()?;
    let curve = apply_relocation(&generate_curve(&config.curve)?, &relocation, &config)?;
    write_vertices(&out, &curve)?;
    log::info!("wrote relocated curve to {}", out.display());
    Ok(0)
}

fn run(config_path: &Path, out_dir: &Path) -> Result<i32, CliError> {
    let config = parse_config(config_path)?;
    let series = run_to_dir(&config, out_dir)?;
    log::info!("{} after {} steps; outputs in {}", series.termination.name(), series.steps_taken(), out_dir.display());
    Ok(if series.termination.is_failure() { EXIT_FAILURE } else { 0 })
}

fn study(config_path: &Path, axis: Axis, values: &[String], out: Option<PathBuf>) -> Result<i32, CliError> {
    let config = parse_config(config_path)?;
    let rows = study_gamma(&config, &parse_axis(axis, values)?)?;
    let table = format_gamma_rows(&rows);
    print!("{table}");
    if let Some(path) = out {
        write_atomic(&path, table.as_bytes())?;
    }
    Ok(if rows.iter().any(|r| r.termination.is_failure()) { EXIT_FAILURE } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate { spec, out } => generate(&spec, &out),
        Command::Relocate { config, out } => relocate(&config, out),
        Command::Run { config, out_dir } => run(&config, &out_dir),
        Command::StudyGamma { config, axis, values, out } => study(&config, axis, &values, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            log::error!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
