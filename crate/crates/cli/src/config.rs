//! Experiment configuration: one flat JSON object per file.

use std::path::{Path, PathBuf};

use curveflow_core::solver::{Damping, SolverConfig};
use curveflow_core::{Config, FlowKind, Params, SecondDiffScale};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::curves::{CurveFields, CurveKind, CurveSpec};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowName {
    Willmore,
    Helfrich,
    Relocate,
}

impl From<FlowName> for FlowKind {
    fn from(f: FlowName) -> Self {
        match f {
            FlowName::Willmore => FlowKind::Willmore,
            FlowName::Helfrich => FlowKind::Helfrich,
            FlowName::Relocate => FlowKind::Relocate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    InvDuSquared,
    InvDu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Diagnostics,
    Snapshots,
    Summary,
}

pub const ALL_FORMATS: [OutputFormat; 3] = [OutputFormat::Diagnostics, OutputFormat::Snapshots, OutputFormat::Summary];

fn default_relocate_alpha() -> f64 {
    5.0
}
fn default_relocate_dt() -> f64 {
    1e-4
}
fn default_relocate_until() -> f64 {
    0.1
}
fn default_snapshot_every() -> usize {
    100
}
fn default_rel_tol() -> f64 {
    1e-6
}
fn default_abs_tol() -> f64 {
    1e-12
}
fn default_max_iters() -> usize {
    50
}
fn default_fd_step() -> f64 {
    1e-7
}
fn default_max_halvings() -> u32 {
    20
}
fn default_continuation_levels() -> u32 {
    8
}
fn default_stencil() -> Stencil {
    Stencil::InvDuSquared
}
fn default_formats() -> Vec<OutputFormat> {
    ALL_FORMATS.to_vec()
}

/// The file as written, with every default filled in. Serialising it gives the
/// config echo stored next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub flow: FlowName,

    pub curve: CurveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vertices: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,

    #[serde(default)]
    pub relocate: bool,
    #[serde(default = "default_relocate_alpha")]
    pub relocate_alpha: f64,
    #[serde(default = "default_relocate_dt")]
    pub relocate_dt: f64,
    #[serde(default = "default_relocate_until")]
    pub relocate_until: f64,

    pub c0: f64,
    pub alpha: f64,
    pub dt: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub stop_epsilon: Option<f64>,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_stencil")]
    pub second_diff: Stencil,

    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: u32,
    #[serde(default)]
    pub parallel_jacobian: bool,
    #[serde(default = "default_continuation_levels")]
    pub continuation_levels: u32,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relocation {
    pub alpha: f64,
    pub dt: f64,
    pub until_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub file: ConfigFile,
    pub curve: CurveSpec,
    /// Applied to the generated curve before the run. Always set for `relocate`.
    pub relocation: Option<Relocation>,
    pub run: Config,
    pub output: OutputSpec,
}

impl ConfigFile {
    pub fn curve_fields(&self) -> CurveFields {
        CurveFields {
            curve: self.curve,
            n_vertices: self.n_vertices,
            width: self.width,
            height: self.height,
            radius: self.radius,
            center: self.center,
            path: self.path.clone(),
        }
    }

    pub fn relocation(&self) -> Result<Relocation> {
        if !(self.relocate_alpha >= 0.0 && self.relocate_alpha.is_finite()) {
            return Err(CliError::validation(
                "relocate_alpha",
                format!("must be non-negative, got {}", self.relocate_alpha),
            ));
        }
        if !(self.relocate_dt > 0.0 && self.relocate_dt.is_finite()) {
            return Err(CliError::validation("relocate_dt", format!("must be positive, got {}", self.relocate_dt)));
        }
        if !(self.relocate_until > 0.0 && self.relocate_until.is_finite()) {
            return Err(CliError::validation(
                "relocate_until",
                format!("must be positive, got {}", self.relocate_until),
            ));
        }
        Ok(Relocation { alpha: self.relocate_alpha, dt: self.relocate_dt, until_time: self.relocate_until })
    }

    pub fn run_config(&self) -> Result<Config> {
        let mut params = Params::new(self.c0, self.alpha, self.dt);
        params.second_diff = match self.second_diff {
            Stencil::InvDuSquared => SecondDiffScale::InvDuSquared,
            Stencil::InvDu => SecondDiffScale::InvDu,
        };
        let mut config = Config::new(self.flow.into(), params, self.max_steps);
        config.stop_epsilon = self.stop_epsilon;
        config.snapshot_every = self.snapshot_every;
        config.continuation_levels = self.continuation_levels;
        config.solver = SolverConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_iters: self.max_iters,
            fd_step: self.fd_step,
            damping: if self.max_halvings == 0 {
                Damping::None
            } else {
                Damping::Halving { max_halvings: self.max_halvings }
            },
            parallel: self.parallel_jacobian,
        };
        config.validate()?;
        Ok(config)
    }

    /// Full validation. `base_dir` anchors a relative curve `path`.
    pub fn validate(self, base_dir: &Path) -> Result<ExperimentConfig> {
        let curve = self.curve_fields().resolve(base_dir)?;
        let relocation = self.relocation()?;
        let run = self.run_config()?;
        if self.formats.is_empty() {
            return Err(CliError::validation("formats", "list at least one of diagnostics, snapshots, summary"));
        }
        let output = OutputSpec { directory: self.output_dir.clone(), formats: self.formats.clone() };
        let relocation = self.relocate.then_some(relocation);
        Ok(ExperimentConfig { file: self, curve, relocation, run, output })
    }
}

pub(crate) fn parse_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        // serde_json appends " at line L column C"; the position is reported separately.
        let full = e.to_string();
        let message = full.rsplit_once(" at line ").map_or(full.as_str(), |(m, _)| m).to_string();
        CliError::Parse { path: path.to_path_buf(), line: e.line(), column: e.column(), message }
    })
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let file: ConfigFile = parse_json(path)?;
    file.validate(path.parent().unwrap_or(Path::new(".")))
}
