//! Scenario configuration: JSON schema, defaults and validation.
//!
//! Complex numbers are `[re, im]` pairs. Matrices are lists of rows of
//! complex entries; polynomial matrices are lists of rows of entries, each
//! entry a coefficient list (constant term first) of `[re, im]` pairs.

use std::fmt;
use std::path::Path;

use hipdyn::evolution::uniform_times;
use hipdyn::pictures::{DysonFactorization, OBSERVABLE_HERMITIAN_TOL};
use hipdyn::poly::{CPoly, PolyMatrix, TimeMatrixFn};
use hipdyn::toy::{toy_model, ToyParams, GRID_A, GRID_B, GRID_R, GRID_T};
use hipdyn::{CMatrix, IntegratorSpec, PictureModel, PictureTag, C64};
use serde::{Deserialize, Serialize};

pub type Matrix = Vec<Vec<C64>>;
pub type PolyMatrixJson = Vec<Vec<Vec<C64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "toy2")]
    Toy2 { r: f64, a: f64, b: f64 },
    #[serde(rename = "explicit")]
    Explicit {
        omega1: PolyMatrixJson,
        omega2: PolyMatrixJson,
        hamiltonian: PolyMatrixJson,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Explicit sample times. Takes precedence over `samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_times: Option<Vec<f64>>,
    /// Number of uniform intervals over the window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// Verification grid. Parameter axes apply to the toy model only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub picture: PictureTag,
    /// Auxiliary-space ket at the window start.
    pub initial_state: Vec<C64>,
    #[serde(default)]
    pub observables: Vec<Matrix>,
    pub window: [f64; 2],
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

/// A validation failure naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Names accepted by `--dump-default`.
pub const DEFAULT_NAMES: &[&str] = &["toy2"];

pub fn default_config(name: &str) -> Option<ScenarioConfig> {
    match name {
        "toy2" => Some(ScenarioConfig {
            model: ModelConfig::Toy2 { r: 0.5, a: 1.0, b: 0.5 },
            picture: PictureTag::HipKphysical,
            initial_state: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            observables: vec![vec![
                vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            ]],
            window: [0.0, 1.0],
            integrator: IntegratorSpec::rk4(1e-3),
            outputs: OutputConfig { sample_times: None, samples: Some(100) },
            grid: None,
        }),
        _ => None,
    }
}

/// Everything a command needs, resolved and checked.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: PictureModel,
    pub toy: Option<ToyParams>,
    pub picture: PictureTag,
    pub initial_state: Vec<C64>,
    pub observables: Vec<CMatrix>,
    pub integrator: IntegratorSpec,
    pub sample_times: Vec<f64>,
    pub grid_params: Vec<ToyParams>,
    pub grid_times: Vec<f64>,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::new("<json>", e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn poly_matrix(field: &str, rows: &PolyMatrixJson) -> Result<PolyMatrix, ConfigError> {
    let n = rows.len();
    if n == 0 {
        return Err(ConfigError::new(field, "matrix is empty"));
    }
    let mut out = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(ConfigError::new(format!("{field}[{i}]"), format!("expected {n} entries, got {}", row.len())));
        }
        let mut entries = Vec::with_capacity(n);
        for (j, coeffs) in row.iter().enumerate() {
            if coeffs.iter().any(|z| !z.is_finite()) {
                return Err(ConfigError::new(format!("{field}[{i}][{j}]"), "coefficients must be finite"));
            }
            entries.push(CPoly::new(coeffs.clone()));
        }
        out.push(entries);
    }
    Ok(PolyMatrix::from_rows(out))
}

fn matrix(field: &str, rows: &Matrix, n: usize) -> Result<CMatrix, ConfigError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::new(field, format!("expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|z| !z.is_finite()) {
        return Err(ConfigError::new(field, "entries must be finite"));
    }
    Ok(CMatrix::from_rows(rows))
}

fn check_axis(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::new(field, "axis is empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(field, "values must be finite"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        let [t0, t1] = self.window;
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(ConfigError::new("window", "bounds must be finite"));
        }
        if !(t1 > t0) {
            return Err(ConfigError::new("window", format!("need t_min < t_max, got [{t0}, {t1}]")));
        }
        self.integrator.validate().map_err(|e| ConfigError::new("integrator", e.to_string()))?;

        let (model, toy) = match &self.model {
            ModelConfig::Toy2 { r, a, b } => {
                let p = ToyParams::new(*r, *a, *b).with_window(t0, t1);
                p.validate().map_err(|e| ConfigError::new("model", e.to_string()))?;
                (toy_model(&p).map_err(|e| ConfigError::new("model", e.to_string()))?, Some(p))
            }
            ModelConfig::Explicit { omega1, omega2, hamiltonian } => {
                let o1 = poly_matrix("model.omega1", omega1)?;
                let o2 = poly_matrix("model.omega2", omega2)?;
                let h = poly_matrix("model.hamiltonian", hamiltonian)?;
                let dyson = DysonFactorization::new(TimeMatrixFn::Exact(o1), TimeMatrixFn::Exact(o2))
                    .map_err(|e| ConfigError::new("model.omega2", e.to_string()))?;
                let model = PictureModel::new(dyson, TimeMatrixFn::Exact(h), (t0, t1))
                    .map_err(|e| ConfigError::new("model.hamiltonian", e.to_string()))?;
                (model, None)
            }
        };
        let n = model.dim();

        if self.initial_state.len() != n {
            return Err(ConfigError::new("initial_state", format!("expected {n} components, got {}", self.initial_state.len())));
        }
        if self.initial_state.iter().any(|z| !z.is_finite()) || self.initial_state.iter().all(|z| z.norm() == 0.0) {
            return Err(ConfigError::new("initial_state", "must be finite and nonzero"));
        }

        let mut observables = Vec::with_capacity(self.observables.len());
        for (k, rows) in self.observables.iter().enumerate() {
            let field = format!("observables[{k}]");
            let m = matrix(&field, rows, n)?;
            let dev = m.hermitian_deviation();
            if dev > OBSERVABLE_HERMITIAN_TOL * m.fro_norm().max(1.0) {
                return Err(ConfigError::new(field, format!("not Hermitian (deviation {dev:e})")));
            }
            observables.push(m);
        }

        let sample_times = match (&self.outputs.sample_times, self.outputs.samples) {
            (Some(ts), _) => {
                if ts.is_empty() {
                    return Err(ConfigError::new("outputs.sample_times", "list is empty"));
                }
                if ts.iter().any(|&t| !(t >= t0 && t <= t1)) {
                    return Err(ConfigError::new("outputs.sample_times", format!("times must lie in [{t0}, {t1}]")));
                }
                if ts.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(ConfigError::new("outputs.sample_times", "times must be strictly increasing"));
                }
                ts.clone()
            }
            (None, Some(0)) => return Err(ConfigError::new("outputs.samples", "must be at least 1")),
            (None, Some(k)) => uniform_times(t0, t1, k),
            (None, None) => uniform_times(t0, t1, 100),
        };

        let grid = self.grid.clone().unwrap_or_default();
        let grid_times = match &grid.t {
            Some(ts) => {
                check_axis("grid.t", ts)?;
                if ts.iter().any(|&t| t < t0 || t > t1) {
                    return Err(ConfigError::new("grid.t", format!("probe times must lie in [{t0}, {t1}]")));
                }
                ts.clone()
            }
            None if GRID_T.iter().all(|&t| t >= t0 && t <= t1) => GRID_T.to_vec(),
            None => uniform_times(t0, t1, 4),
        };
        let grid_params = match &toy {
            Some(_) => {
                let axis = |field: &str, v: &Option<Vec<f64>>, default: &[f64]| -> Result<Vec<f64>, ConfigError> {
                    let v = v.clone().unwrap_or_else(|| default.to_vec());
                    check_axis(field, &v)?;
                    Ok(v)
                };
                let rs = axis("grid.r", &grid.r, &GRID_R)?;
                let as_ = axis("grid.a", &grid.a, &GRID_A)?;
                let bs = axis("grid.b", &grid.b, &GRID_B)?;
                let mut params = Vec::new();
                for &r in &rs {
                    for &a in &as_ {
                        for &b in &bs {
                            params.push(ToyParams::new(r, a, b).with_window(t0, t1));
                        }
                    }
                }
                params
            }
            None => {
                if grid.r.is_some() || grid.a.is_some() || grid.b.is_some() {
                    return Err(ConfigError::new("grid", "parameter axes apply to the toy2 model only"));
                }
                Vec::new()
            }
        };

        Ok(Scenario {
            model,
            toy,
            picture: self.picture,
            initial_state: self.initial_state.clone(),
            observables,
            integrator: self.integrator,
            sample_times,
            grid_params,
            grid_times,
        })
    }
}
