//! Run configuration: a flat `key = value` file overridden by command-line
//! flags.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use biharm_core::geometry::{Circle, Ellipse, Star};
use biharm_core::problems::{self, NamedProblem};
use biharm_core::{Error, LevelSet, PenaltyScaling, Point, Result};

/// Every setting of a run. `None` means "use the problem's default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub problem: Option<String>,
    pub order: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub refinements: Option<usize>,
    pub eta: Option<f64>,
    pub patch_size: Option<usize>,
    pub quad_order: Option<usize>,
    pub geom_tol: Option<f64>,
    pub penalty_scaling: Option<PenaltyScaling>,
    pub interface: Option<String>,
    pub params: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub mesh_file: Option<PathBuf>,
    pub dump_system: Option<PathBuf>,
}

impl Settings {
    /// Parses a config file. Blank lines and `#` comments are ignored; keys
    /// may use `-` or `_`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeMap::new();
        let mut out = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_error(i + 1, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            if let Some(first) = seen.insert(key.clone(), i + 1) {
                return Err(config_error(i + 1, format!("'{key}' already set on line {first}")));
            }
            out.set(&key, value).map_err(|e| config_error(i + 1, e))?;
        }
        Ok(out)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "problem" => self.problem = Some(value.to_string()),
            "order" => self.order = Some(parse(key, value)?),
            "n" => self.n = Some(parse_list(key, value)?),
            "refinements" => self.refinements = Some(parse(key, value)?),
            "eta" => self.eta = Some(parse(key, value)?),
            "patch_size" => self.patch_size = Some(parse(key, value)?),
            "quad_order" => self.quad_order = Some(parse(key, value)?),
            "geom_tol" => self.geom_tol = Some(parse(key, value)?),
            "penalty_scaling" => {
                self.penalty_scaling = Some(PenaltyScaling::from_str(value).map_err(|e| e.to_string())?)
            }
            "interface" => self.interface = Some(value.to_string()),
            "params" => self.params = Some(parse_list(key, value)?),
            "output" => self.output = Some(value.into()),
            "mesh_file" => self.mesh_file = Some(value.into()),
            "dump_system" => self.dump_system = Some(value.into()),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(self, flags: Settings) -> Settings {
        Settings {
            problem: flags.problem.or(self.problem),
            order: flags.order.or(self.order),
            n: flags.n.or(self.n),
            refinements: flags.refinements.or(self.refinements),
            eta: flags.eta.or(self.eta),
            patch_size: flags.patch_size.or(self.patch_size),
            quad_order: flags.quad_order.or(self.quad_order),
            geom_tol: flags.geom_tol.or(self.geom_tol),
            penalty_scaling: flags.penalty_scaling.or(self.penalty_scaling),
            interface: flags.interface.or(self.interface),
            params: flags.params.or(self.params),
            output: flags.output.or(self.output),
            mesh_file: flags.mesh_file.or(self.mesh_file),
            dump_system: flags.dump_system.or(self.dump_system),
        }
    }
}

fn config_error(line: usize, message: String) -> Error {
    Error::InvalidInput(format!("config line {line}: {message}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value '{value}' for '{key}'"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<std::result::Result<Vec<T>, String>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(format!("'{key}' is empty"))
            } else {
                Ok(v)
            }
        })
}

/// Where the meshes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Structured meshes with these cells per direction.
    Structured(Vec<usize>),
    /// A structured base mesh refined uniformly.
    StructuredRefined { n: usize, refinements: usize },
    /// A mesh file refined uniformly.
    File { path: PathBuf, refinements: usize },
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: NamedProblem,
    pub order: usize,
    pub meshes: MeshSource,
    pub eta: Option<f64>,
    pub patch_size: Option<usize>,
    pub quad_order: Option<usize>,
    pub geom_tol: Option<f64>,
    pub penalty_scaling: PenaltyScaling,
    pub output: Option<PathBuf>,
    pub dump_system: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_settings(s: Settings) -> Result<Self> {
        let mut problem = problems::by_name(s.problem.as_deref().unwrap_or("example1"))?;
        let order = s.order.unwrap_or(2);
        if order < 2 {
            return Err(Error::InvalidInput(format!("order must be at least 2, got {order}")));
        }
        match (s.interface.as_deref(), s.params.as_deref()) {
            (Some(name), params) => problem.level_set = interface(name, params.unwrap_or(&[]))?,
            (None, Some(_)) => return Err(Error::InvalidInput("'params' needs 'interface'".into())),
            (None, None) => {}
        }
        let meshes = match (s.mesh_file, s.n, s.refinements) {
            (Some(_), Some(_), _) => {
                return Err(Error::InvalidInput("'mesh_file' and 'n' are mutually exclusive".into()))
            }
            (Some(path), None, r) => MeshSource::File {
                path,
                refinements: r.unwrap_or(0),
            },
            (None, Some(n), Some(refinements)) => match n.as_slice() {
                [n] => MeshSource::StructuredRefined { n: *n, refinements },
                _ => return Err(Error::InvalidInput("'refinements' needs a single 'n'".into())),
            },
            (None, n, None) => MeshSource::Structured(n.unwrap_or_else(|| problem.default_n.clone())),
            (None, None, Some(_)) => return Err(Error::InvalidInput("'refinements' needs 'n' or 'mesh_file'".into())),
        };
        if let MeshSource::Structured(ns) = &meshes {
            if ns.contains(&0) {
                return Err(Error::InvalidInput("'n' values must be positive".into()));
            }
            if ns.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput("'n' values must be strictly increasing".into()));
            }
        }
        Ok(Self {
            problem,
            order,
            meshes,
            eta: s.eta,
            patch_size: s.patch_size,
            quad_order: s.quad_order,
            geom_tol: s.geom_tol,
            penalty_scaling: s.penalty_scaling.unwrap_or_default(),
            output: s.output,
            dump_system: s.dump_system,
        })
    }
}

/// Level set by name:
/// `circle` (`r` or `cx,cy,r`), `ellipse` (`a,b` for `a x^2 + b y^2 = 1`),
/// `star` (`r0,amplitude,lobes`; no parameters gives the five-pointed star).
pub fn interface(name: &str, params: &[f64]) -> Result<Arc<dyn LevelSet>> {
    let bad = || Error::InvalidInput(format!("invalid parameters {params:?} for interface '{name}'"));
    Ok(match (name, params) {
        ("circle", []) => Arc::new(Circle::new(Point::origin(), 0.5)),
        ("circle", &[r]) if r > 0.0 => Arc::new(Circle::new(Point::origin(), r)),
        ("circle", &[cx, cy, r]) if r > 0.0 => Arc::new(Circle::new(Point::new(cx, cy), r)),
        ("ellipse", []) => Arc::new(Ellipse { a: 2.0, b: 3.0 }),
        ("ellipse", &[a, b]) if a > 0.0 && b > 0.0 => Arc::new(Ellipse { a, b }),
        ("star", []) => Arc::new(Star::five_pointed()),
        ("star", &[r0, amplitude, lobes]) if r0 > amplitude.abs() => Arc::new(Star { r0, amplitude, lobes }),
        ("circle" | "ellipse" | "star", _) => return Err(bad()),
        (other, _) => {
            return Err(Error::InvalidInput(format!(
                "unknown interface '{other}' (expected circle, ellipse or star)"
            )))
        }
    })
}
