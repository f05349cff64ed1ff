//! JSON run and experiment descriptions.
//!
//! A run file pins physics (`params`), discretization (`grid`), the force law
//! (`potential`), initial data, horizon, and timestep. `dt` is either the
//! string `"auto"` (half the stability limit) or an explicit number, which is
//! still checked against the limit before any stepping happens. Every field
//! that bears on the numbers ends up embedded in the run summary, so a run is
//! reproducible from its outputs.

use crate::dynamics::{auto_dt, SimSetup};
use crate::operator::{BeamParams, BeamState, Grid, ModelError};
use crate::potential::{PotentialError, PotentialSpec};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Auto-selected record strides aim for roughly this many snapshots.
const TARGET_RECORDS: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("dt must be \"auto\" or a positive number, got \"{0}\"")]
    BadDt(String),
    #[error("initial data file {path}: {detail}")]
    BadInitialFile { path: String, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub rho: f64,
    pub mu: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: usize,
}

/// Force law selection, flat on purpose: `{"kind": "exact"}` or
/// `{"kind": "smoothed", "eps": 0.1}`, optionally with `selection_at_one`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSection {
    Exact {
        #[serde(default)]
        selection_at_one: f64,
    },
    Smoothed {
        eps: f64,
        #[serde(default)]
        selection_at_one: f64,
    },
}

impl PotentialSection {
    pub fn resolve(&self) -> Result<PotentialSpec, ConfigError> {
        let spec = match *self {
            PotentialSection::Exact { selection_at_one } => {
                PotentialSpec::exact_capped().with_selection_at_one(selection_at_one)?
            }
            PotentialSection::Smoothed {
                eps,
                selection_at_one,
            } => PotentialSpec::smoothed(eps)?.with_selection_at_one(selection_at_one)?,
        };
        Ok(spec)
    }
}

fn default_mode() -> u32 {
    1
}

/// Initial data, tagged by `type`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    /// Constant displacement and velocity.
    Uniform {
        u0: f64,
        #[serde(default)]
        v0: f64,
    },
    /// `u(x) = amplitude * cos(2 pi mode x / length)` at rest.
    Cosine {
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: u32,
    },
    /// CSV with header `u,v` and one row per grid node, resolved relative to
    /// the config file.
    FromFile { path: String },
}

impl InitialSection {
    pub fn resolve(&self, grid: &Grid, base_dir: &Path) -> Result<BeamState, ConfigError> {
        let n = grid.n_points();
        match self {
            InitialSection::Uniform { u0, v0 } => Ok(BeamState::uniform(grid, *u0, *v0)),
            InitialSection::Cosine { amplitude, mode } => {
                let k = 2.0 * std::f64::consts::PI * f64::from(*mode) / grid.length();
                let u0: Vec<f64> = (0..n)
                    .map(|i| amplitude * (k * grid.node(i)).cos())
                    .collect();
                Ok(BeamState::new(0.0, u0, vec![0.0; n]))
            }
            InitialSection::FromFile { path } => {
                let full = base_dir.join(path);
                let text = fs::read_to_string(&full).map_err(|source| ConfigError::Io {
                    path: full.display().to_string(),
                    source,
                })?;
                parse_initial_csv(&text, n).map_err(|detail| ConfigError::BadInitialFile {
                    path: full.display().to_string(),
                    detail,
                })
            }
        }
    }
}

fn parse_initial_csv(text: &str, n: usize) -> Result<BeamState, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(header) if header.trim() == "u,v" => {}
        other => return Err(format!("expected header \"u,v\", got {other:?}")),
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for (row, line) in lines.enumerate() {
        let mut fields = line.trim().split(',');
        let parse = |s: Option<&str>| -> Result<f64, String> {
            s.ok_or_else(|| format!("row {}: missing field", row + 1))?
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("row {}: {e}", row + 1))
        };
        u.push(parse(fields.next())?);
        v.push(parse(fields.next())?);
        if fields.next().is_some() {
            return Err(format!("row {}: expected exactly two fields", row + 1));
        }
    }
    if u.len() != n {
        return Err(format!("expected {n} rows, found {}", u.len()));
    }
    Ok(BeamState::new(0.0, u, v))
}

/// `"auto"` or an explicit timestep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DtChoice {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for DtChoice {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            DtChoice::Auto => ser.serialize_str("auto"),
            DtChoice::Fixed(dt) => ser.serialize_f64(*dt),
        }
    }
}

impl<'de> Deserialize<'de> for DtChoice {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Word(String),
        }
        match Repr::deserialize(de)? {
            Repr::Number(dt) => Ok(DtChoice::Fixed(dt)),
            Repr::Word(w) if w == "auto" => Ok(DtChoice::Auto),
            Repr::Word(w) => Err(D::Error::custom(format!(
                "dt must be \"auto\" or a number, got \"{w}\""
            ))),
        }
    }
}

fn default_seed() -> u64 {
    42
}

/// A complete run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub initial: InitialSection,
    pub horizon: f64,
    #[serde(default)]
    pub dt: DtChoice,
    /// Record every this-many steps; omitted means aim for about a thousand
    /// snapshots.
    #[serde(default)]
    pub record_stride: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl SimConfig {
    pub fn from_path(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: SimConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        let base = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Ok((cfg, base))
    }

    /// Turns the description into a runnable setup. Stability of the chosen
    /// timestep is still checked by `SimSetup::validate` before stepping.
    pub fn resolve(&self, base_dir: &Path) -> Result<SimSetup, ConfigError> {
        let params = BeamParams::new(self.params.rho, self.params.mu, self.params.length)?;
        let grid = Grid::new(self.params.length, self.grid.n_points)?;
        let potential = self.potential.resolve()?;
        let initial = self.initial.resolve(&grid, base_dir)?;
        let dt = match self.dt {
            DtChoice::Auto => auto_dt(&params, &grid),
            DtChoice::Fixed(dt) => dt,
        };
        let record_stride = match self.record_stride {
            Some(s) => s,
            None => auto_stride(self.horizon, dt),
        };
        Ok(SimSetup {
            params,
            grid,
            potential,
            initial,
            horizon: self.horizon,
            dt,
            record_stride,
        })
    }
}

/// Stride that yields about `TARGET_RECORDS` snapshots.
pub fn auto_stride(horizon: f64, dt: f64) -> usize {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return 1;
    }
    let n_steps = (horizon / dt).ceil().max(1.0);
    (n_steps / TARGET_RECORDS).round().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdhesionSection {
    /// Number of random sub-threshold initial conditions.
    #[serde(default = "AdhesionSection::default_cases")]
    pub cases: usize,
    #[serde(default = "AdhesionSection::default_horizon")]
    pub horizon: f64,
    /// Random data are scaled to this sup-norm before the energy cap applies.
    #[serde(default = "AdhesionSection::default_sup_u0")]
    pub sup_u0: f64,
    /// Upper bound on the initial energy, kept below the detachment
    /// threshold.
    #[serde(default = "AdhesionSection::default_energy_cap")]
    pub energy_cap: f64,
}

impl AdhesionSection {
    fn default_cases() -> usize {
        20
    }
    fn default_horizon() -> f64 {
        50.0
    }
    fn default_sup_u0() -> f64 {
        0.8
    }
    fn default_energy_cap() -> f64 {
        1.2
    }
}

impl Default for AdhesionSection {
    fn default() -> Self {
        Self {
            cases: Self::default_cases(),
            horizon: Self::default_horizon(),
            sup_u0: Self::default_sup_u0(),
            energy_cap: Self::default_energy_cap(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizeSection {
    /// Amplitude factors applied to the base initial data.
    #[serde(default = "LinearizeSection::default_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "LinearizeSection::default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub record_stride: Option<usize>,
}

impl LinearizeSection {
    fn default_scales() -> Vec<f64> {
        (1..=5).map(|k| 1.0 / k as f64).collect()
    }
    fn default_horizon() -> f64 {
        2.0
    }
}

impl Default for LinearizeSection {
    fn default() -> Self {
        Self {
            scales: Self::default_scales(),
            horizon: Self::default_horizon(),
            record_stride: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    /// Uniform `1 - eps` at rest.
    BelowThreshold,
    /// Uniform `1 + eps` moving outward at speed eps.
    AboveThreshold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeSection {
    #[serde(default = "RegularizeSection::default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "RegularizeSection::default_family")]
    pub family: FamilyChoice,
    #[serde(default = "RegularizeSection::default_horizon")]
    pub horizon: f64,
}

impl RegularizeSection {
    fn default_eps_list() -> Vec<f64> {
        vec![0.1, 0.05, 0.02, 0.01]
    }
    fn default_family() -> FamilyChoice {
        FamilyChoice::BelowThreshold
    }
    fn default_horizon() -> f64 {
        2.0
    }
}

impl Default for RegularizeSection {
    fn default() -> Self {
        Self {
            eps_list: Self::default_eps_list(),
            family: Self::default_family(),
            horizon: Self::default_horizon(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongtimeSection {
    /// Fraction of the time span that is averaged for the affine fit.
    #[serde(default = "LongtimeSection::default_window_fraction")]
    pub window_fraction: f64,
}

impl LongtimeSection {
    fn default_window_fraction() -> f64 {
        0.25
    }
}

impl Default for LongtimeSection {
    fn default() -> Self {
        Self {
            window_fraction: Self::default_window_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamplesSection {
    #[serde(default = "ExamplesSection::default_eps")]
    pub eps: f64,
    #[serde(default = "ExamplesSection::default_horizon")]
    pub horizon: f64,
}

impl ExamplesSection {
    fn default_eps() -> f64 {
        0.1
    }
    fn default_horizon() -> f64 {
        2.0
    }
}

impl Default for ExamplesSection {
    fn default() -> Self {
        Self {
            eps: Self::default_eps(),
            horizon: Self::default_horizon(),
        }
    }
}

/// Settings for the experiment harnesses; every section has defaults, so a
/// minimal file only needs `sim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    #[serde(default)]
    pub adhesion: AdhesionSection,
    #[serde(default)]
    pub linearize: LinearizeSection,
    #[serde(default)]
    pub regularize: RegularizeSection,
    #[serde(default)]
    pub longtime: LongtimeSection,
    #[serde(default)]
    pub examples: ExamplesSection,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        let base = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Ok((cfg, base))
    }
}
