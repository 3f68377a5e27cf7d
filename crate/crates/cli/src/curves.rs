//! Initial-curve specifications and the `i,x,y` vertex CSV format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use curveflow_core::shapes;
use curveflow_core::{Curve, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::write_atomic;

pub const CURVE_HEADER: &str = "i,x,y";
const MIN_VERTICES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Kubire,
    Rectangle,
    Circle,
    RegularPolygon,
    File,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Kubire => "kubire",
            CurveKind::Rectangle => "rectangle",
            CurveKind::Circle => "circle",
            CurveKind::RegularPolygon => "regular_polygon",
            CurveKind::File => "file",
        }
    }
}

/// Curve keys as they appear in a spec or config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFields {
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
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSpec {
    Kubire { n_vertices: usize },
    Rectangle { n_vertices: usize, width: f64, height: f64, center: [f64; 2] },
    RegularPolygon { n_vertices: usize, radius: f64, center: [f64; 2] },
    File { path: PathBuf, n_vertices: Option<usize> },
}

impl CurveSpec {
    /// Same curve family with a different vertex count. File curves cannot be resampled.
    pub fn with_vertices(&self, n: usize) -> Result<CurveSpec> {
        if n < MIN_VERTICES {
            return Err(CliError::validation("n_vertices", format!("must be at least {MIN_VERTICES}, got {n}")));
        }
        let mut spec = self.clone();
        match &mut spec {
            CurveSpec::Kubire { n_vertices }
            | CurveSpec::Rectangle { n_vertices, .. }
            | CurveSpec::RegularPolygon { n_vertices, .. } => *n_vertices = n,
            CurveSpec::File { .. } => {
                return Err(CliError::validation("curve", "a curve read from a file has a fixed vertex count"))
            }
        }
        Ok(spec)
    }
}

impl CurveFields {
    pub fn parse(path: &Path) -> Result<Self> {
        crate::config::parse_json(path)
    }

    /// Validates the keys against the curve kind. Relative file paths resolve against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<CurveSpec> {
        let kind = self.curve.name();
        let forbid = |field: &str, present: bool| {
            if present {
                Err(CliError::validation(field, format!("not used by curve kind `{kind}`")))
            } else {
                Ok(())
            }
        };
        let count = || match self.n_vertices {
            None => Err(CliError::validation("n_vertices", format!("required for curve kind `{kind}`"))),
            Some(n) if n < MIN_VERTICES => {
                Err(CliError::validation("n_vertices", format!("must be at least {MIN_VERTICES}, got {n}")))
            }
            Some(n) => Ok(n),
        };
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::validation(field, format!("must be positive and finite, got {v}")))
            }
        };
        let center = self.center.unwrap_or([0.0, 0.0]);
        if !center.iter().all(|c| c.is_finite()) {
            return Err(CliError::validation("center", "must be finite"));
        }
        match self.curve {
            CurveKind::Kubire => {
                forbid("width", self.width.is_some())?;
                forbid("height", self.height.is_some())?;
                forbid("radius", self.radius.is_some())?;
                forbid("center", self.center.is_some())?;
                forbid("path", self.path.is_some())?;
                Ok(CurveSpec::Kubire { n_vertices: count()? })
            }
            CurveKind::Rectangle => {
                forbid("radius", self.radius.is_some())?;
                forbid("path", self.path.is_some())?;
                Ok(CurveSpec::Rectangle {
                    n_vertices: count()?,
                    width: positive("width", self.width.unwrap_or(2.0))?,
                    height: positive("height", self.height.unwrap_or(1.0))?,
                    center,
                })
            }
            CurveKind::Circle | CurveKind::RegularPolygon => {
                forbid("width", self.width.is_some())?;
                forbid("height", self.height.is_some())?;
                forbid("path", self.path.is_some())?;
                Ok(CurveSpec::RegularPolygon {
                    n_vertices: count()?,
                    radius: positive("radius", self.radius.unwrap_or(1.0))?,
                    center,
                })
            }
            CurveKind::File => {
                forbid("width", self.width.is_some())?;
                forbid("height", self.height.is_some())?;
                forbid("radius", self.radius.is_some())?;
                forbid("center", self.center.is_some())?;
                let path =
                    self.path.as_ref().ok_or_else(|| CliError::validation("path", "required for curve kind `file`"))?;
                if self.n_vertices.is_some() {
                    count()?;
                }
                Ok(CurveSpec::File { path: base_dir.join(path), n_vertices: self.n_vertices })
            }
        }
    }
}

/// Builds the initial polygon, counterclockwise.
pub fn generate_curve(spec: &CurveSpec) -> Result<Curve> {
    let shape_error = |err| CliError::from(err);
    match *spec {
        CurveSpec::Kubire { n_vertices } => shapes::kubire(n_vertices).map_err(shape_error),
        CurveSpec::Rectangle { n_vertices, width, height, center } => {
            shapes::rectangle(n_vertices, width, height, Vec2::from(center)).map_err(shape_error)
        }
        CurveSpec::RegularPolygon { n_vertices, radius, center } => {
            shapes::regular_polygon(n_vertices, radius, Vec2::from(center)).map_err(shape_error)
        }
        CurveSpec::File { ref path, n_vertices } => {
            let vertices = read_vertices(path)?;
            if let Some(n) = n_vertices {
                if n != vertices.len() {
                    return Err(CliError::validation(
                        "n_vertices",
                        format!("{} lists {} vertices, config says {n}", path.display(), vertices.len()),
                    ));
                }
            }
            Curve::counterclockwise(vertices).map_err(|err| CliError::CurveFile {
                path: path.clone(),
                line: 0,
                message: format!("not a valid closed polygon: {err}"),
            })
        }
    }
}

/// Reads `i,x,y` rows. Indices must run 0, 1, 2, ... in order.
pub fn read_vertices(path: &Path) -> Result<Vec<Vec2>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_vertices(&text).map_err(|(line, message)| CliError::CurveFile { path: path.to_path_buf(), line, message })
}

fn parse_vertices(text: &str) -> std::result::Result<Vec<Vec2>, (usize, String)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, CURVE_HEADER)) => {}
        Some((line, other)) => return Err((line, format!("expected header `{CURVE_HEADER}`, found `{other}`"))),
        None => return Err((1, "empty file".into())),
    }
    let mut vertices = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        let [i, x, y] = fields[..] else {
            return Err((line, format!("expected 3 fields, found {}", fields.len())));
        };
        let index: usize = i.parse().map_err(|_| (line, format!("bad vertex index `{i}`")))?;
        if index != vertices.len() {
            return Err((line, format!("vertex index {index} out of sequence (expected {})", vertices.len())));
        }
        let coord = |s: &str| s.parse::<f64>().map_err(|_| (line, format!("bad coordinate `{s}`")));
        vertices.push(Vec2::new(coord(x)?, coord(y)?));
    }
    Ok(vertices)
}

pub fn format_vertices(curve: &Curve) -> String {
    let mut out = String::with_capacity(48 * (curve.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for (i, v) in curve.vertices().iter().enumerate() {
        let _ = writeln!(out, "{i},{:.16e},{:.16e}", v.x, v.y);
    }
    out
}

pub fn write_vertices(path: &Path, curve: &Curve) -> Result<()> {
    write_atomic(path, format_vertices(curve).as_bytes())
}
