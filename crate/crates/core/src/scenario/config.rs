//! Scenario configuration files.
//!
//! The format is TOML restricted to flat dotted keys. Every key is
//! optional; omitted keys take the values of the reference scenario listed
//! in [`ScenarioConfig::default`].
//!
//! ```toml
//! dt = 15.0                 # sampling period, seconds
//! q = 0.01                  # acceleration noise intensity
//! horizon = 100             # N
//! runs = 1000               # Monte-Carlo runs for fig2
//! fig1_runs = 50            # trajectories per model for fig1
//! measure_until = 9         # last measured time index
//! seed = 42
//! workers = 0               # 0 = one per core
//! out_dir = "out"
//! origin.mean = [2000, 70, 5000, 0]
//! origin.cov = [1000, 10, 1000, 10]          # diagonal ...
//! destination.mean = [130000, 70, 10000, 0]
//! destination.cov = [[1000, 0, 0, 0],        # ... or a full matrix
//!                    [0, 10, 0, 0],
//!                    [0, 0, 1000, 0],
//!                    [0, 0, 0, 10]]
//! cross_cov = [0, 0, 0, 0]                   # C_{0,N}, diagonal or full
//! measurement.noise_cov = [100, 100]
//! ```
//!
//! States are `[x, ẋ, y, ẏ]`; the sensor measures position.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::ScenarioError;
use crate::cml::{CmlModelParams, EndpointSpec};
use crate::estimate::MeasurementModel;
use crate::gaussian::GaussianDensity;
use crate::markov::{build_cv_model, MarkovModelParams};

/// Seed used when the configuration does not name one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensitySpec {
    mean: Option<Vec<f64>>,
    cov: Option<MatrixSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementSpec {
    noise_cov: Option<MatrixSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dt: Option<f64>,
    q: Option<f64>,
    horizon: Option<usize>,
    runs: Option<usize>,
    fig1_runs: Option<usize>,
    measure_until: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    out_dir: Option<PathBuf>,
    #[serde(default)]
    origin: DensitySpec,
    #[serde(default)]
    destination: DensitySpec,
    cross_cov: Option<MatrixSpec>,
    #[serde(default)]
    measurement: MeasurementSpec,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub dt: f64,
    pub q: f64,
    pub horizon: usize,
    pub origin: GaussianDensity,
    pub destination: GaussianDensity,
    pub cross_cov: DMatrix<f64>,
    pub measurement_noise: DMatrix<f64>,
    pub runs: usize,
    pub fig1_runs: usize,
    pub measure_until: usize,
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
    pub out_dir: PathBuf,
}

fn diag4(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(&[a, b, a, b]))
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: 15.0,
            q: 0.01,
            horizon: 100,
            origin: GaussianDensity::new(
                DVector::from_column_slice(&[2000.0, 70.0, 5000.0, 0.0]),
                diag4(1000.0, 10.0),
            )
            .expect("reference origin"),
            destination: GaussianDensity::new(
                DVector::from_column_slice(&[130000.0, 70.0, 10000.0, 0.0]),
                diag4(1000.0, 10.0),
            )
            .expect("reference destination"),
            cross_cov: DMatrix::zeros(4, 4),
            measurement_noise: DMatrix::identity(2, 2) * 100.0,
            runs: 1000,
            fig1_runs: 50,
            measure_until: 9,
            seed: DEFAULT_SEED,
            workers: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn matrix(field: &str, spec: MatrixSpec, dim: usize) -> Result<DMatrix<f64>, ScenarioError> {
    match spec {
        MatrixSpec::Diagonal(v) => {
            if v.len() != dim {
                return Err(invalid(field, format!("expected {dim} diagonal entries, got {}", v.len())));
            }
            Ok(DMatrix::from_diagonal(&DVector::from_vec(v)))
        }
        MatrixSpec::Full(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(invalid(field, format!("expected a {dim}x{dim} matrix")));
            }
            Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
        }
    }
}

fn density(
    field: &str,
    spec: DensitySpec,
    fallback: &GaussianDensity,
) -> Result<GaussianDensity, ScenarioError> {
    let mean = match spec.mean {
        Some(m) if m.len() != 4 => {
            return Err(invalid(&format!("{field}.mean"), "expected 4 entries [x, vx, y, vy]"))
        }
        Some(m) => DVector::from_vec(m),
        None => fallback.mean().clone(),
    };
    let cov = match spec.cov {
        Some(c) => matrix(&format!("{field}.cov"), c, 4)?,
        None => fallback.cov().clone(),
    };
    GaussianDensity::new(mean, cov).map_err(|e| invalid(&format!("{field}.cov"), e.to_string()))
}

/// Line and column (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ScenarioConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| line_col(text, s.start))
                .map(|(l, c)| format!("line {l}, column {c}: "))
                .unwrap_or_default();
            ScenarioError::Parse(format!("{location}{}", e.message()))
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ScenarioError> {
        let d = Self::default();
        let cfg = Self {
            dt: raw.dt.unwrap_or(d.dt),
            q: raw.q.unwrap_or(d.q),
            horizon: raw.horizon.unwrap_or(d.horizon),
            origin: density("origin", raw.origin, &d.origin)?,
            destination: density("destination", raw.destination, &d.destination)?,
            cross_cov: match raw.cross_cov {
                Some(c) => matrix("cross_cov", c, 4)?,
                None => d.cross_cov,
            },
            measurement_noise: match raw.measurement.noise_cov {
                Some(c) => matrix("measurement.noise_cov", c, 2)?,
                None => d.measurement_noise,
            },
            runs: raw.runs.unwrap_or(d.runs),
            fig1_runs: raw.fig1_runs.unwrap_or(d.fig1_runs),
            measure_until: raw.measure_until.unwrap_or(d.measure_until),
            seed: raw.seed.unwrap_or(d.seed),
            workers: raw.workers.unwrap_or(d.workers),
            out_dir: raw.out_dir.unwrap_or(d.out_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant; also run after command-line overrides.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(invalid("q", "must be positive"));
        }
        if self.horizon < 2 {
            return Err(invalid("horizon", "must be at least 2"));
        }
        if self.measure_until < 1 || self.measure_until >= self.horizon {
            return Err(invalid(
                "measure_until",
                format!("must lie in [1, {}]", self.horizon - 1),
            ));
        }
        if self.runs < 1 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if self.fig1_runs < 1 {
            return Err(invalid("fig1_runs", "must be at least 1"));
        }
        self.endpoints()
            .map_err(|e| invalid("cross_cov", e.to_string()))?;
        self.measurement()
            .map_err(|e| invalid("measurement.noise_cov", e.to_string()))?;
        Ok(())
    }

    pub fn endpoints(&self) -> crate::Result<EndpointSpec> {
        EndpointSpec::new(
            self.origin.clone(),
            self.destination.clone(),
            self.cross_cov.clone(),
        )
    }

    pub fn measurement(&self) -> crate::Result<MeasurementModel> {
        MeasurementModel::position(self.measurement_noise.clone())
    }

    /// Nearly-constant-velocity Markov model started at the origin density.
    pub fn markov_model(&self) -> crate::Result<MarkovModelParams> {
        build_cv_model(self.dt, self.q, self.horizon, self.origin.clone())
    }

    /// CM_L model induced by [`Self::markov_model`] with the configured
    /// endpoints.
    pub fn cml_model(&self) -> crate::Result<CmlModelParams> {
        CmlModelParams::induced(&self.markov_model()?, &self.endpoints()?)
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    ScenarioConfig::from_toml_str(&text).map_err(|e| match e {
        ScenarioError::Parse(m) => ScenarioError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
