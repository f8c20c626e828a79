//! Experiment configuration: a single JSON document, every field optional.
//!
//! ```json
//! {
//!   "mode": "design-trace",
//!   "dims": { "n_tx": 2, "n_rx": 2, "n_dat": 2, "m": 2 },
//!   "power": 1.0,
//!   "trials": 10,
//!   "seed": 7,
//!   "tolerances": { "gap": 1e-6 },
//!   "instance": {
//!     "kind": "point-to-point",
//!     "h": [[[1, 0], [0, 0]], [[0, 0], [0.5, 0]]],
//!     "noise_cov": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
//!     "weights": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]],
//!     "pi": [[[0.1, 0], [0, 0]], [[0, 0], [0.1, 0]]]
//!   }
//! }
//! ```
//!
//! Matrices are row-major nested arrays of `[re, im]` pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::instance::{Dims, SystemInstance};
use crate::model::SystemModel;
use crate::relay::RelayModel;
use crate::spectral::{ComplexMatrix, HermitianMatrix};
use crate::weighting::WeightingOperator;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    DesignTrace,
    DesignDet,
    RelayMse,
    RelayCapacity,
    VerifyInequalities,
    VerifyEquivalence,
    OracleCompare,
    DemoSchur,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::DesignTrace,
        Mode::DesignDet,
        Mode::RelayMse,
        Mode::RelayCapacity,
        Mode::VerifyInequalities,
        Mode::VerifyEquivalence,
        Mode::OracleCompare,
        Mode::DemoSchur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::DesignTrace => "design-trace",
            Mode::DesignDet => "design-det",
            Mode::RelayMse => "relay-mse",
            Mode::RelayCapacity => "relay-capacity",
            Mode::VerifyInequalities => "verify-inequalities",
            Mode::VerifyEquivalence => "verify-equivalence",
            Mode::OracleCompare => "oracle-compare",
            Mode::DemoSchur => "demo-schur",
        }
    }

    pub fn is_relay(self) -> bool {
        matches!(self, Mode::RelayMse | Mode::RelayCapacity | Mode::VerifyEquivalence)
    }

    fn default_trials(self) -> usize {
        match self {
            Mode::VerifyInequalities | Mode::VerifyEquivalence => 100,
            Mode::OracleCompare => 10,
            _ => 1,
        }
    }

    fn default_budget(self) -> usize {
        match self {
            Mode::OracleCompare => 10_000,
            _ => 0,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named tolerances. All of them end up in the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed amount by which an oracle may beat a structured design.
    pub gap: f64,
    /// Two-route identities (relative).
    pub equivalence: f64,
    /// Assembled objective vs scalar water-filling form (relative).
    pub consistency: f64,
    /// Stationarity residual of active modes (relative).
    pub kkt: f64,
    /// Power budget slack (relative).
    pub power: f64,
    /// Equality cases of the eigenvalue inequalities (relative).
    pub inequality: f64,
    /// Loewner-order comparisons.
    pub loewner: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            equivalence: 1e-9,
            consistency: 1e-8,
            kkt: 1e-8,
            power: 1e-9,
            inequality: 1e-9,
            loewner: 1e-8,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let named = [
            ("gap", self.gap),
            ("equivalence", self.equivalence),
            ("consistency", self.consistency),
            ("kkt", self.kkt),
            ("power", self.power),
            ("inequality", self.inequality),
            ("loewner", self.loewner),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("field `tolerances.{name}`: must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

/// An explicit problem instance; overrides random generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSpec {
    PointToPoint {
        h: MatrixSpec,
        noise_cov: MatrixSpec,
        /// One `N_Dat × M` matrix per term.
        weights: Vec<MatrixSpec>,
        pi: MatrixSpec,
    },
    Relay {
        h1: MatrixSpec,
        h2: MatrixSpec,
        source_cov: MatrixSpec,
        relay_noise_cov: MatrixSpec,
        dest_noise_cov: MatrixSpec,
    },
}

fn field_error(field: &str, e: impl fmt::Display) -> Error {
    Error::Config(format!("field `instance.{field}`: {e}"))
}

pub fn matrix_from_spec(spec: &MatrixSpec, field: &str) -> Result<ComplexMatrix> {
    let rows = spec.len();
    let cols = spec.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(field_error(field, "matrix must be non-empty"));
    }
    if let Some((i, r)) = spec.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(field_error(field, format!("row {i} has {} entries, expected {cols}", r.len())));
    }
    let m = ComplexMatrix::from_fn(rows, cols, |i, j| Complex64::new(spec[i][j][0], spec[i][j][1]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(field_error(field, "entries must be finite"));
    }
    Ok(m)
}

pub fn matrix_to_spec(m: &ComplexMatrix) -> MatrixSpec {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn hermitian_from_spec(spec: &MatrixSpec, field: &str) -> Result<HermitianMatrix> {
    HermitianMatrix::new(matrix_from_spec(spec, field)?).map_err(|e| field_error(field, e))
}

impl InstanceSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            InstanceSpec::PointToPoint { .. } => "point-to-point",
            InstanceSpec::Relay { .. } => "relay",
        }
    }

    pub fn to_system(&self, power: f64) -> Result<SystemInstance> {
        let InstanceSpec::PointToPoint { h, noise_cov, weights, pi } = self else {
            return Err(Error::Config("field `instance.kind`: expected `point-to-point`".into()));
        };
        let h = matrix_from_spec(h, "h")?;
        let rn = hermitian_from_spec(noise_cov, "noise_cov")?;
        let weights = weights
            .iter()
            .enumerate()
            .map(|(k, w)| matrix_from_spec(w, &format!("weights[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let pi = hermitian_from_spec(pi, "pi")?;
        let n_streams = weights.first().map(|w| w.nrows()).ok_or_else(|| field_error("weights", "need at least one term"))?;
        let model = SystemModel::new(h, rn, n_streams, power).map_err(|e| field_error("h", e))?;
        let operator = WeightingOperator::new(weights, pi).map_err(|e| field_error("weights", e))?;
        Ok(SystemInstance { model, operator })
    }

    pub fn to_relay(&self, power: f64) -> Result<RelayModel> {
        let InstanceSpec::Relay { h1, h2, source_cov, relay_noise_cov, dest_noise_cov } = self else {
            return Err(Error::Config("field `instance.kind`: expected `relay`".into()));
        };
        RelayModel::new(
            matrix_from_spec(h1, "h1")?,
            matrix_from_spec(h2, "h2")?,
            hermitian_from_spec(source_cov, "source_cov")?,
            hermitian_from_spec(relay_noise_cov, "relay_noise_cov")?,
            hermitian_from_spec(dest_noise_cov, "dest_noise_cov")?,
            power,
        )
        .map_err(|e| Error::Config(format!("field `instance`: {e}")))
    }
}

/// On-disk shape: every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<Mode>,
    dims: Option<Dims>,
    power: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    budget: Option<usize>,
    refinements: Option<usize>,
    max_iterations: Option<usize>,
    jitter_pi: Option<bool>,
    tolerances: Option<Tolerances>,
    instance: Option<InstanceSpec>,
}

/// Fully resolved configuration, echoed verbatim in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dims: Dims,
    pub power: f64,
    pub trials: usize,
    pub seed: u64,
    /// Random samples for the search oracle; zero disables the oracle.
    pub budget: usize,
    pub refinements: usize,
    pub max_iterations: usize,
    pub jitter_pi: bool,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instance: Option<InstanceSpec>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            dims: Dims::default(),
            power: 1.0,
            trials: mode.default_trials(),
            seed: 0,
            budget: mode.default_budget(),
            refinements: 100,
            max_iterations: 500,
            jitter_pi: false,
            tolerances: Tolerances::default(),
            instance: None,
        }
    }

    /// Parses a config document. `mode` comes from the file, the caller,
    /// or both if they agree.
    pub fn from_json(text: &str, mode: Option<Mode>) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m).to_string();
            let field = if path == "." { String::new() } else { format!(", field `{path}`") };
            Error::Config(format!("line {}, column {}{field}: {msg}", inner.line(), inner.column()))
        })?;
        let mode = match (file.mode, mode) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("field `mode`: config says `{a}` but `{b}` was requested")))
            }
            (Some(m), _) | (None, Some(m)) => m,
            (None, None) => return Err(Error::Config("field `mode`: missing".into())),
        };
        let d = Self::new(mode);
        let config = Self {
            mode,
            dims: file.dims.unwrap_or(d.dims),
            power: file.power.unwrap_or(d.power),
            trials: file.trials.unwrap_or(d.trials),
            seed: file.seed.unwrap_or(d.seed),
            budget: file.budget.unwrap_or(d.budget),
            refinements: file.refinements.unwrap_or(d.refinements),
            max_iterations: file.max_iterations.unwrap_or(d.max_iterations),
            jitter_pi: file.jitter_pi.unwrap_or(d.jitter_pi),
            tolerances: file.tolerances.unwrap_or(d.tolerances),
            instance: file.instance,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("field `trials`: must be >= 1".into()));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::Config("field `power`: must be finite and > 0".into()));
        }
        self.tolerances.validate()?;
        if let Some(instance) = &self.instance {
            let wants_relay = self.mode.is_relay();
            match (instance, wants_relay) {
                (InstanceSpec::Relay { .. }, true) => {
                    instance.to_relay(self.power)?;
                }
                (InstanceSpec::PointToPoint { .. }, false) => {
                    if matches!(self.mode, Mode::VerifyInequalities | Mode::DemoSchur) {
                        return Err(Error::Config(format!(
                            "field `instance`: mode `{}` does not take an explicit instance",
                            self.mode
                        )));
                    }
                    instance.to_system(self.power)?;
                }
                _ => {
                    return Err(Error::Config(format!(
                        "field `instance.kind`: `{}` does not fit mode `{}`",
                        instance.kind(),
                        self.mode
                    )))
                }
            }
        }
        Ok(())
    }
}
