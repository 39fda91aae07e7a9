//! Run configuration: TOML text in, validated [`RunConfig`] out.
//!
//! ```toml
//! model = "damage"
//! solver = "both"          # tsm | mc | both
//! seed = 0
//!
//! [time]
//! t_end = 100.0
//! dt = 0.005
//!
//! [load]
//! kind = "proportional"
//! direction = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//! rate = 2e-4
//!
//! [material]
//! lambda = { mean = 12e9, std = 1.8e9 }
//! mu = { mean = 8e9, std = 1.2e9 }
//! eta = 10e6
//! ```
//!
//! The phase model lists its phases as `[[phases]]` tables with `lambda`, `mu`
//! and `transformation`; the viscoplastic model adds `sigma_y`. Correlations go
//! in `[correlation]` with `kind = "independent" | "fully_dependent" | "matrix"`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::TimeGrid;
use crate::error::ConfigError;
use crate::load::LoadCase;
use crate::models::{DamageModel, PhaseModel, ViscoplasticModel};
use crate::moments::MIN_MOMENT_SAMPLES;
use crate::stochastic::{CorrelationSpec, FluctuatingScalar, StochasticParams};
use crate::voigt::VoigtVector;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_MC_N: usize = 1000;
pub const DEFAULT_MOMENT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_OUTPUT_DIR: &str = "tsm-out";
pub const DEFAULT_INITIAL_FRACTION: f64 = 0.99;
pub const DEFAULT_FD_STEP: f64 = 1e-6;
pub const DEFAULT_FROZEN_SAMPLES: usize = 1_000_000;
pub const DEFAULT_SNAPSHOTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Damage,
    Phase,
    Viscoplastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Tsm,
    Mc,
    #[default]
    Both,
}

impl Solver {
    pub fn runs_tsm(self) -> bool {
        self != Solver::Mc
    }

    pub fn runs_mc(self) -> bool {
        self != Solver::Tsm
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTime {
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMaterial {
    pub lambda: Option<FluctuatingScalar>,
    pub mu: Option<FluctuatingScalar>,
    /// Viscosity of damage, transformation or viscoplastic flow, in Pa·s.
    pub eta: Option<f64>,
    pub sigma_y: Option<FluctuatingScalar>,
    /// Potential-wall magnitude; calibrated when absent.
    pub wall: Option<f64>,
    /// Initial volume fraction of the first phase.
    pub initial_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhase {
    pub lambda: FluctuatingScalar,
    pub mu: FluctuatingScalar,
    #[serde(default)]
    pub transformation: [f64; 6],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawCorrelation {
    #[default]
    Independent,
    FullyDependent,
    /// Rows of the correlation matrix, in parameter order.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    /// Finite-difference step relative to the parameter's magnitude.
    pub fd_step: Option<f64>,
    pub frozen_samples: Option<usize>,
    pub snapshots: Option<usize>,
    /// Scales every tangent rate; anything but 1 injects a fault.
    pub fault_tangent_scale: Option<f64>,
}

/// The document as written, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: Option<ModelKind>,
    pub solver: Option<Solver>,
    pub seed: Option<u64>,
    pub mc_n: Option<usize>,
    pub moment_samples: Option<usize>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Write every k-th step to the CSV outputs.
    pub output_every: Option<usize>,
    /// CSV strain table, resolved against the config file's directory.
    pub load_file: Option<PathBuf>,
    pub time: Option<RawTime>,
    pub load: Option<LoadCase>,
    pub material: Option<RawMaterial>,
    pub phases: Option<Vec<RawPhase>>,
    pub correlation: Option<RawCorrelation>,
    pub verify: Option<RawVerify>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Damage { eta: f64 },
    Phase { transformation: [VoigtVector; 2], viscosity: f64, wall: f64, initial_fraction: f64 },
    Viscoplastic { eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub fd_step: f64,
    pub frozen_samples: usize,
    pub snapshots: usize,
    pub fault_tangent_scale: f64,
}

/// A validated run with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub params: StochasticParams,
    pub correlation: CorrelationSpec,
    pub load: LoadCase,
    pub grid: TimeGrid,
    pub solver: Solver,
    pub seed: u64,
    pub mc_n: usize,
    pub moment_samples: usize,
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub output_every: usize,
    pub verify: VerifySettings,
}

impl RunConfig {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            ModelSpec::Damage { .. } => ModelKind::Damage,
            ModelSpec::Phase { .. } => ModelKind::Phase,
            ModelSpec::Viscoplastic { .. } => ModelKind::Viscoplastic,
        }
    }

    pub fn damage_model(&self) -> Option<DamageModel> {
        match self.model {
            ModelSpec::Damage { eta } => Some(DamageModel::new(self.params.mean_stiffness(0), eta)),
            _ => None,
        }
    }

    pub fn phase_model(&self) -> Option<PhaseModel> {
        match self.model {
            ModelSpec::Phase { transformation, viscosity, wall, initial_fraction } => Some(PhaseModel::new(
                [self.params.mean_stiffness(0), self.params.mean_stiffness(1)],
                transformation,
                viscosity,
                wall,
                initial_fraction,
            )),
            _ => None,
        }
    }

    pub fn viscoplastic_model(&self) -> Option<ViscoplasticModel> {
        match self.model {
            ModelSpec::Viscoplastic { eta } => {
                let y = self.params.scalars.last().map_or(0.0, |(_, s)| s.mean);
                Some(ViscoplasticModel::new(self.params.mean_stiffness(0), y, eta))
            }
            _ => None,
        }
    }

    /// True when every parameter is deterministic.
    pub fn is_degenerate(&self) -> bool {
        self.params.all_deterministic()
    }

    /// The fully resolved configuration as TOML, for provenance.
    pub fn echo(&self) -> String {
        let mut raw = RawConfig {
            model: Some(self.kind()),
            solver: Some(self.solver),
            seed: Some(self.seed),
            mc_n: Some(self.mc_n),
            moment_samples: Some(self.moment_samples),
            workers: self.workers,
            output_dir: Some(self.output_dir.clone()),
            output_every: Some(self.output_every),
            load_file: None,
            time: Some(RawTime { t_end: Some(self.grid.t_end), dt: Some(self.grid.dt) }),
            load: Some(self.load.clone()),
            material: None,
            phases: None,
            correlation: Some(match &self.correlation {
                CorrelationSpec::Independent => RawCorrelation::Independent,
                CorrelationSpec::FullyDependent => RawCorrelation::FullyDependent,
                CorrelationSpec::Matrix(m) => {
                    RawCorrelation::Matrix { rows: m.row_iter().map(|r| r.iter().copied().collect()).collect() }
                }
            }),
            verify: Some(RawVerify {
                fd_step: Some(self.verify.fd_step),
                frozen_samples: Some(self.verify.frozen_samples),
                snapshots: Some(self.verify.snapshots),
                fault_tangent_scale: Some(self.verify.fault_tangent_scale),
            }),
        };
        let s = &self.params.scalars;
        match &self.model {
            ModelSpec::Damage { eta } => {
                raw.material =
                    Some(RawMaterial { lambda: Some(s[0].1), mu: Some(s[1].1), eta: Some(*eta), ..Default::default() });
            }
            ModelSpec::Viscoplastic { eta } => {
                raw.material = Some(RawMaterial {
                    lambda: Some(s[0].1),
                    mu: Some(s[1].1),
                    eta: Some(*eta),
                    sigma_y: Some(s[2].1),
                    ..Default::default()
                });
            }
            ModelSpec::Phase { transformation, viscosity, wall, initial_fraction } => {
                raw.material = Some(RawMaterial {
                    eta: Some(*viscosity),
                    wall: Some(*wall),
                    initial_fraction: Some(*initial_fraction),
                    ..Default::default()
                });
                raw.phases = Some(
                    (0..2)
                        .map(|j| RawPhase {
                            lambda: s[2 * j].1,
                            mu: s[2 * j + 1].1,
                            transformation: transformation[j].into(),
                        })
                        .collect(),
                );
            }
        }
        toml::to_string(&raw).expect("resolved configuration serializes")
    }
}

/// Parses and validates configuration text; relative `load_file` paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    validate(raw, base_dir)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        line: 0,
        key: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text, path.parent())
}

fn parse_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let message = e.message().to_string();
    let key = message.split('`').nth(1).map(str::to_string);
    ConfigError::Parse { line, key, message }
}

fn check_scalar(name: &str, s: &FluctuatingScalar, errors: &mut Vec<String>) {
    if !(s.mean.is_finite() && s.mean > 0.0) {
        errors.push(format!("{name}.mean must be positive and finite (got {})", s.mean));
    }
    if !(s.std.is_finite() && s.std >= 0.0) {
        errors.push(format!("{name}.std must be non-negative and finite (got {})", s.std));
    }
}

fn required<T: Copy>(value: Option<T>, key: &str, errors: &mut Vec<String>) -> Option<T> {
    if value.is_none() {
        errors.push(format!("missing `{key}`"));
    }
    value
}

fn positive(value: Option<f64>, key: &str, errors: &mut Vec<String>) -> Option<f64> {
    let v = required(value, key, errors)?;
    if !(v.is_finite() && v > 0.0) {
        errors.push(format!("`{key}` must be positive and finite (got {v})"));
        return None;
    }
    Some(v)
}

fn validate(raw: RawConfig, base_dir: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    let kind = required(raw.model, "model", &mut errors);
    let time = raw.time.clone().unwrap_or_default();
    let t_end = positive(time.t_end, "time.t_end", &mut errors);
    let dt = positive(time.dt, "time.dt", &mut errors);
    let grid = match (t_end, dt) {
        (Some(t), Some(h)) => TimeGrid::new(t, h).map_err(|e| errors.push(format!("time grid: {e}"))).ok(),
        _ => None,
    };

    let load = match (raw.load.clone(), &raw.load_file) {
        (Some(_), Some(_)) => {
            errors.push("give either `[load]` or `load_file`, not both".into());
            None
        }
        (None, None) => {
            errors.push("missing `load`".into());
            None
        }
        (Some(l), None) => Some(l),
        (None, Some(file)) => {
            let path = base_dir.map_or_else(|| file.clone(), |b| b.join(file));
            match std::fs::File::open(&path) {
                Ok(f) => LoadCase::table_from_csv(f).map_err(|e| errors.push(format!("load_file: {e}"))).ok(),
                Err(e) => {
                    errors.push(format!("load_file: cannot read {}: {e}", path.display()));
                    None
                }
            }
        }
    };
    if let (Some(l), Some(g)) = (&load, &grid) {
        if let Err(e) = l.validate() {
            errors.push(format!("load: {e}"));
        } else if let Err(e) = l.strain_at(g.t_end, g.t_end) {
            errors.push(format!("load does not cover the time grid: {e}"));
        }
    } else if let Some(Err(e)) = load.as_ref().map(LoadCase::validate) {
        errors.push(format!("load: {e}"));
    }

    let material = raw.material.clone().unwrap_or_default();
    let mut model = None;
    let mut params = None;
    match kind {
        Some(ModelKind::Damage) | Some(ModelKind::Viscoplastic) => {
            if raw.phases.is_some() {
                errors.push("`phases` only applies to model = \"phase\"".into());
            }
            let lambda = required(material.lambda, "material.lambda", &mut errors);
            let mu = required(material.mu, "material.mu", &mut errors);
            let eta = positive(material.eta, "material.eta", &mut errors);
            lambda.iter().for_each(|s| check_scalar("material.lambda", s, &mut errors));
            mu.iter().for_each(|s| check_scalar("material.mu", s, &mut errors));
            let yield_limit = if kind == Some(ModelKind::Viscoplastic) {
                let y = required(material.sigma_y, "material.sigma_y", &mut errors);
                y.iter().for_each(|s| check_scalar("material.sigma_y", s, &mut errors));
                y.map(Some)
            } else {
                if material.sigma_y.is_some() {
                    errors.push("`material.sigma_y` only applies to model = \"viscoplastic\"".into());
                }
                Some(None)
            };
            for (key, present) in
                [("wall", material.wall.is_some()), ("initial_fraction", material.initial_fraction.is_some())]
            {
                if present {
                    errors.push(format!("`material.{key}` only applies to model = \"phase\""));
                }
            }
            if let (Some(l), Some(m), Some(eta), Some(y)) = (lambda, mu, eta, yield_limit) {
                params = Some(StochasticParams::new(&[(l, m)], y));
                model = Some(if kind == Some(ModelKind::Damage) {
                    ModelSpec::Damage { eta }
                } else {
                    ModelSpec::Viscoplastic { eta }
                });
            }
        }
        Some(ModelKind::Phase) => {
            if material.lambda.is_some() || material.mu.is_some() || material.sigma_y.is_some() {
                errors.push("model = \"phase\" takes its moduli from `[[phases]]`, not `[material]`".into());
            }
            let phases = raw.phases.clone().unwrap_or_default();
            if phases.len() != 2 {
                errors.push(format!("model = \"phase\" needs exactly two `[[phases]]` (got {})", phases.len()));
            }
            for (j, p) in phases.iter().enumerate() {
                check_scalar(&format!("phases[{j}].lambda"), &p.lambda, &mut errors);
                check_scalar(&format!("phases[{j}].mu"), &p.mu, &mut errors);
                if p.transformation.iter().any(|v| !v.is_finite()) {
                    errors.push(format!("phases[{j}].transformation must be finite"));
                }
            }
            let viscosity = positive(material.eta, "material.eta", &mut errors);
            let fraction = material.initial_fraction.unwrap_or(DEFAULT_INITIAL_FRACTION);
            if !(fraction > 0.0 && fraction < 1.0) {
                errors.push(format!("`material.initial_fraction` must lie in (0, 1) (got {fraction})"));
            }
            if let Some(w) = material.wall {
                if !(w.is_finite() && w >= 0.0) {
                    errors.push(format!("`material.wall` must be non-negative and finite (got {w})"));
                }
            }
            if let (Some(viscosity), 2) = (viscosity, phases.len()) {
                let p =
                    StochasticParams::new(&[(phases[0].lambda, phases[0].mu), (phases[1].lambda, phases[1].mu)], None);
                let stiffness = [p.mean_stiffness(0), p.mean_stiffness(1)];
                let transformation =
                    [VoigtVector::from(phases[0].transformation), VoigtVector::from(phases[1].transformation)];
                let wall =
                    material.wall.unwrap_or_else(|| PhaseModel::calibrated_wall(stiffness, transformation, fraction));
                model = Some(ModelSpec::Phase { transformation, viscosity, wall, initial_fraction: fraction });
                params = Some(p);
            }
        }
        None => {}
    }

    let correlation = match raw.correlation.clone().unwrap_or_default() {
        RawCorrelation::Independent => CorrelationSpec::Independent,
        RawCorrelation::FullyDependent => CorrelationSpec::FullyDependent,
        RawCorrelation::Matrix { rows } => {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                errors.push("correlation.rows must form a square matrix".into());
                CorrelationSpec::Independent
            } else {
                CorrelationSpec::Matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    };
    if let Some(p) = &params {
        if let Err(e) = correlation.validate(p.len()) {
            errors.push(format!("correlation: {e}"));
        } else if let Err(e) = p.check_source_coupling(&correlation) {
            errors.push(format!("correlation: {e}"));
        }
        if let Err(e) = crate::stochastic::Sampler::new(p, &correlation) {
            errors.push(format!("correlation: {e}"));
        }
    }

    let solver = raw.solver.unwrap_or_default();
    let mc_n = raw.mc_n.unwrap_or(DEFAULT_MC_N);
    if solver.runs_mc() && mc_n < 2 {
        errors.push(format!("`mc_n` must be at least 2 (got {mc_n})"));
    }
    let moment_samples = raw.moment_samples.unwrap_or(DEFAULT_MOMENT_SAMPLES);
    if moment_samples < MIN_MOMENT_SAMPLES {
        errors.push(format!("`moment_samples` must be at least {MIN_MOMENT_SAMPLES} (got {moment_samples})"));
    }
    if raw.workers == Some(0) {
        errors.push("`workers` must be at least 1".into());
    }
    let output_every = raw.output_every.unwrap_or(1);
    if output_every == 0 {
        errors.push("`output_every` must be at least 1".into());
    }

    let v = raw.verify.clone().unwrap_or_default();
    let fd_step = v.fd_step.unwrap_or(DEFAULT_FD_STEP);
    if !(fd_step.is_finite() && fd_step > 0.0) {
        errors.push(format!("`verify.fd_step` must be positive (got {fd_step})"));
    }
    let frozen_samples = v.frozen_samples.unwrap_or(DEFAULT_FROZEN_SAMPLES);
    if frozen_samples < 2 {
        errors.push(format!("`verify.frozen_samples` must be at least 2 (got {frozen_samples})"));
    }
    let snapshots = v.snapshots.unwrap_or(DEFAULT_SNAPSHOTS);
    if snapshots == 0 {
        errors.push("`verify.snapshots` must be at least 1".into());
    }
    let fault_tangent_scale = v.fault_tangent_scale.unwrap_or(1.0);
    if !fault_tangent_scale.is_finite() {
        errors.push("`verify.fault_tangent_scale` must be finite".into());
    }

    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    Ok(RunConfig {
        model: model.expect("validated"),
        params: params.expect("validated"),
        correlation,
        load: load.expect("validated"),
        grid: grid.expect("validated"),
        solver,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        mc_n,
        moment_samples,
        workers: raw.workers,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        output_every,
        verify: VerifySettings { fd_step, frozen_samples, snapshots, fault_tangent_scale },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAMAGE: &str = r#"
model = "damage"

[time]
t_end = 100.0
dt = 0.005

[load]
kind = "proportional"
direction = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
rate = 2e-4

[material]
lambda = { mean = 12e9, std = 1.8e9 }
mu = { mean = 8e9, std = 1.2e9 }
eta = 10e6
"#;

    fn messages(text: &str) -> Vec<String> {
        match parse_config(text, None) {
            Err(ConfigError::Validation(m)) => m,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_damage_gets_defaults() {
        let c = parse_config(DAMAGE, None).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.mc_n, 1000);
        assert_eq!(c.moment_samples, 1_000_000);
        assert_eq!(c.solver, Solver::Both);
        assert_eq!(c.grid.n_steps, 20_000);
        assert_eq!(c.model, ModelSpec::Damage { eta: 10e6 });
        assert_eq!(c.correlation, CorrelationSpec::Independent);
        assert!(c.damage_model().is_some() && c.phase_model().is_none());
    }

    #[test]
    fn missing_yield_limit_is_named() {
        let text = DAMAGE.replace("model = \"damage\"", "model = \"viscoplastic\"");
        let m = messages(&text);
        assert!(m.iter().any(|s| s.contains("material.sigma_y")), "{m:?}");
    }

    #[test]
    fn zero_dt_rejected() {
        let m = messages(&DAMAGE.replace("dt = 0.005", "dt = 0.0"));
        assert!(m.iter().any(|s| s.contains("time.dt")), "{m:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text =
            DAMAGE.replace("dt = 0.005", "dt = -1.0").replace("eta = 10e6", "").replace("mean = 8e9", "mean = -8e9");
        let m = messages(&text);
        assert!(m.len() >= 3, "{m:?}");
        assert!(m.iter().any(|s| s.contains("time.dt")));
        assert!(m.iter().any(|s| s.contains("material.eta")));
        assert!(m.iter().any(|s| s.contains("material.mu")));
    }

    #[test]
    fn parse_error_reports_line_and_key() {
        let text = DAMAGE.replace("eta = 10e6", "eta = 10e6\nviscosity = 3.0");
        match parse_config(&text, None) {
            Err(ConfigError::Parse { line, key, .. }) => {
                assert_eq!(key.as_deref(), Some("viscosity"));
                assert_eq!(line, text.lines().position(|l| l.starts_with("viscosity")).unwrap() + 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_config("model = \"damage\"\nseed = \"x\"\n", None) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn phase_wall_is_calibrated_and_echoed() {
        let text = r#"
model = "phase"
[time]
t_end = 40.0
dt = 4e-4
[load]
kind = "triangular_cycle"
direction = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
amplitude = 0.08
period = 40.0
two_sided = false
[material]
eta = 0.2e9
[[phases]]
lambda = { mean = 70e9, std = 7e9 }
mu = { mean = 30e9, std = 3e9 }
[[phases]]
lambda = { mean = 35e9, std = 3.5e9 }
mu = { mean = 15e9, std = 1.5e9 }
transformation = [0.055, -0.02475, -0.02475, 0.0, 0.0, 0.0]
"#;
        let c = parse_config(text, None).unwrap();
        let ModelSpec::Phase { wall, initial_fraction, .. } = c.model else { panic!() };
        assert!(wall > 0.0);
        assert_eq!(initial_fraction, 0.99);
        let again = parse_config(&c.echo(), None).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn echo_roundtrips() {
        let c = parse_config(&DAMAGE.replace("[load]", "[correlation]\nkind = \"fully_dependent\"\n\n[load]"), None)
            .unwrap();
        assert_eq!(parse_config(&c.echo(), None).unwrap(), c);
    }

    #[test]
    fn load_file_resolves_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("path.csv"), "t,exx\n0,0\n100,0.02\n").unwrap();
        let text = DAMAGE
            .replace("[load]\nkind = \"proportional\"\ndirection = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]\nrate = 2e-4\n", "");
        let text = text.replace("model = \"damage\"", "model = \"damage\"\nload_file = \"path.csv\"");
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, text).unwrap();
        let c = load_config(&cfg).unwrap();
        assert!(matches!(c.load, LoadCase::Table { .. }));
        assert!((c.load.strain_at(50.0, 100.0).unwrap()[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn bad_correlation_matrix_rejected() {
        let text =
            DAMAGE.replace("[load]", "[correlation]\nkind = \"matrix\"\nrows = [[1.0, 2.0], [2.0, 1.0]]\n\n[load]");
        let m = messages(&text);
        assert!(m.iter().any(|s| s.contains("correlation")), "{m:?}");
    }
}
