//! Extended-model integration and moment post-processing.
//!
//! An extended model carries, next to its deterministic internal variables
//! `y⁽⁰⁾`, the tangents `I = ∂y/∂Φ` with respect to every fluctuation source.
//! Both are advanced by explicit Euler; the tangent right-hand side only reads
//! the step-`n` deterministic state, so one integration pass yields everything
//! needed. Expectation and variance then follow from contracting the tangents
//! with the moment tensors.

use std::time::{Duration, Instant};

use nalgebra::SMatrix;

use crate::error::{EngineError, ModelError};
use crate::load::LoadCase;
use crate::moments::{CovarianceFactor, MomentSet};
use crate::voigt::{VoigtMatrix, VoigtVector};

/// Names of the six stress components as reported in every output.
pub const STRESS_NAMES: [&str; 6] = ["sxx", "syy", "szz", "syz", "sxz", "sxy"];

/// State containers advanced by explicit Euler.
pub trait EulerState: Clone + Send + Sync {
    /// `self += h·rate`.
    fn add_scaled(&mut self, h: f64, rate: &Self);
    fn scale(&mut self, k: f64);
    fn all_finite(&self) -> bool;
}

impl EulerState for f64 {
    fn add_scaled(&mut self, h: f64, rate: &Self) {
        *self += h * rate;
    }
    fn scale(&mut self, k: f64) {
        *self *= k;
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl<const R: usize, const C: usize> EulerState for SMatrix<f64, R, C> {
    fn add_scaled(&mut self, h: f64, rate: &Self) {
        *self += rate * h;
    }
    fn scale(&mut self, k: f64) {
        *self *= k;
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<T: EulerState, const N: usize> EulerState for [T; N] {
    fn add_scaled(&mut self, h: f64, rate: &Self) {
        for (a, r) in self.iter_mut().zip(rate) {
            a.add_scaled(h, r);
        }
    }
    fn scale(&mut self, k: f64) {
        self.iter_mut().for_each(|a| a.scale(k));
    }
    fn all_finite(&self) -> bool {
        self.iter().all(EulerState::all_finite)
    }
}

impl<A: EulerState, B: EulerState> EulerState for (A, B) {
    fn add_scaled(&mut self, h: f64, rate: &Self) {
        self.0.add_scaled(h, &rate.0);
        self.1.add_scaled(h, &rate.1);
    }
    fn scale(&mut self, k: f64) {
        self.0.scale(k);
        self.1.scale(k);
    }
    fn all_finite(&self) -> bool {
        self.0.all_finite() && self.1.all_finite()
    }
}

/// A scalar output and its gradient with respect to the fluctuation vector
/// `Φ = [vec D_0, …, vec D_{nE−1}, σ̃ʸ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinQuantity {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A material model together with its tangent equations.
pub trait ExtendedModel: Sync {
    type State: EulerState;
    type Tangents: EulerState;

    /// Model name as used in configuration files.
    fn name(&self) -> &'static str;
    /// Names of the tracked internal-variable quantities.
    fn iv_names(&self) -> Vec<String>;
    fn n_elastic_sources(&self) -> usize;
    fn n_scalar_sources(&self) -> usize;

    fn initial_state(&self) -> Self::State;
    fn initial_tangents(&self) -> Self::Tangents;

    fn det_rhs(&self, y: &Self::State, strain: &VoigtVector) -> Result<Self::State, ModelError>;
    fn tangent_rhs(
        &self,
        y: &Self::State,
        tangents: &Self::Tangents,
        strain: &VoigtVector,
    ) -> Result<Self::Tangents, ModelError>;

    /// Tracked internal-variable values, in [`ExtendedModel::iv_names`] order.
    fn iv_values(&self, y: &Self::State) -> Vec<f64>;
    fn stress(&self, y: &Self::State, strain: &VoigtVector) -> Result<VoigtVector, ModelError>;

    fn linearize_iv(&self, y: &Self::State, tangents: &Self::Tangents) -> Vec<LinQuantity>;
    fn linearize_stress(
        &self,
        y: &Self::State,
        tangents: &Self::Tangents,
        strain: &VoigtVector,
    ) -> Result<Vec<LinQuantity>, ModelError>;

    /// The same model with `E_j ↦ E_j + d[j]` and scalar parameters shifted by `y`.
    fn with_fluctuation(&self, d: &[VoigtMatrix], y: &[f64]) -> Self
    where
        Self: Sized;

    /// Label of the smooth piece the right-hand side is on; a change between
    /// two nearby runs marks a nonsmooth step.
    fn regime(&self, _y: &Self::State, _strain: &VoigtVector) -> u32 {
        0
    }

    /// Length of the fluctuation vector `Φ`.
    fn fluctuation_dim(&self) -> usize {
        36 * self.n_elastic_sources() + self.n_scalar_sources()
    }

    /// Internal-variable names followed by the stress components.
    fn quantity_names(&self) -> Vec<String> {
        let mut names = self.iv_names();
        names.extend(STRESS_NAMES.iter().map(|s| s.to_string()));
        names
    }

    /// Internal variables followed by stress, matching [`ExtendedModel::quantity_names`].
    fn quantities(&self, y: &Self::State, strain: &VoigtVector) -> Result<Vec<f64>, ModelError> {
        let mut q = self.iv_values(y);
        q.extend(self.stress(y, strain)?.iter());
        Ok(q)
    }
}

/// Uniform time discretization `t_n = n·dt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, dt: f64) -> Result<Self, EngineError> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
            return Err(EngineError::InvalidGrid(format!("need dt > 0 and t_end > 0, got dt = {dt}, t_end = {t_end}")));
        }
        let n_steps = (t_end / dt).round() as usize;
        if n_steps == 0 || ((n_steps as f64 * dt - t_end) / t_end).abs() > 1e-9 {
            return Err(EngineError::InvalidGrid(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
        }
        Ok(Self { t_end, dt, n_steps })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| self.time(n)).collect()
    }

    /// Strain at every grid point.
    pub fn strains(&self, load: &LoadCase) -> Result<Vec<VoigtVector>, EngineError> {
        (0..=self.n_steps)
            .map(|n| {
                load.strain_at(self.time(n), self.t_end).map_err(|e| EngineError::Model { step: n, source: e.into() })
            })
            .collect()
    }
}

/// Wall-clock time of the two integration parts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationTiming {
    pub mean: Duration,
    pub tangent: Duration,
}

/// States and tangents at every grid point.
#[derive(Debug, Clone)]
pub struct Trajectory<S, T> {
    pub grid: TimeGrid,
    pub strains: Vec<VoigtVector>,
    pub states: Vec<S>,
    pub tangents: Vec<T>,
    pub timing: IntegrationTiming,
}

pub type ModelTrajectory<M> = Trajectory<<M as ExtendedModel>::State, <M as ExtendedModel>::Tangents>;

fn model_err(step: usize) -> impl Fn(ModelError) -> EngineError {
    move |source| EngineError::Model { step, source }
}

/// Integrates the deterministic state and its tangents from the model's
/// initial conditions.
pub fn integrate_extended<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
) -> Result<ModelTrajectory<M>, EngineError> {
    integrate_extended_from(model, strains, grid, model.initial_state(), model.initial_tangents())
}

pub fn integrate_extended_from<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
    y0: M::State,
    tan0: M::Tangents,
) -> Result<ModelTrajectory<M>, EngineError> {
    check_strains(strains, grid)?;
    if !y0.all_finite() || !tan0.all_finite() {
        return Err(EngineError::NonFiniteState { step: 0 });
    }
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    let mut tangents = Vec::with_capacity(grid.n_steps + 1);
    states.push(y0);
    tangents.push(tan0);
    let mut timing = IntegrationTiming::default();
    for n in 0..grid.n_steps {
        let (y, tan) = (&states[n], &tangents[n]);
        let t0 = Instant::now();
        let rate = model.det_rhs(y, &strains[n]).map_err(model_err(n))?;
        let mut next = y.clone();
        next.add_scaled(grid.dt, &rate);
        let t1 = Instant::now();
        let trate = model.tangent_rhs(y, tan, &strains[n]).map_err(model_err(n))?;
        let mut tnext = tan.clone();
        tnext.add_scaled(grid.dt, &trate);
        let t2 = Instant::now();
        timing.mean += t1 - t0;
        timing.tangent += t2 - t1;
        if !next.all_finite() || !tnext.all_finite() {
            return Err(EngineError::NonFiniteState { step: n + 1 });
        }
        states.push(next);
        tangents.push(tnext);
    }
    Ok(Trajectory { grid, strains: strains.to_vec(), states, tangents, timing })
}

/// Runs the deterministic model alone, handing every state to `visit`.
///
/// Uses the same update as [`integrate_extended`], so the visited states are
/// bit-identical to its deterministic trajectory.
pub fn simulate<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
    mut visit: impl FnMut(usize, &M::State, &VoigtVector) -> Result<(), ModelError>,
) -> Result<M::State, EngineError> {
    check_strains(strains, grid)?;
    let mut y = model.initial_state();
    if !y.all_finite() {
        return Err(EngineError::NonFiniteState { step: 0 });
    }
    for n in 0..=grid.n_steps {
        visit(n, &y, &strains[n]).map_err(model_err(n))?;
        if n == grid.n_steps {
            break;
        }
        let rate = model.det_rhs(&y, &strains[n]).map_err(model_err(n))?;
        y.add_scaled(grid.dt, &rate);
        if !y.all_finite() {
            return Err(EngineError::NonFiniteState { step: n + 1 });
        }
    }
    Ok(y)
}

fn check_strains(strains: &[VoigtVector], grid: TimeGrid) -> Result<(), EngineError> {
    if strains.len() != grid.n_steps + 1 {
        return Err(EngineError::ShapeMismatch(format!(
            "{} strain samples for {} grid points",
            strains.len(),
            grid.n_steps + 1
        )));
    }
    Ok(())
}

/// Expectation and variance of every tracked quantity at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct StatSeries {
    pub names: Vec<String>,
    /// Number of leading internal-variable quantities; the rest is stress.
    pub n_iv: usize,
    pub t: Vec<f64>,
    /// Row-major `[step][quantity]`.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl StatSeries {
    pub fn n_quantities(&self) -> usize {
        self.names.len()
    }

    pub fn n_points(&self) -> usize {
        self.t.len()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn mean(&self, step: usize, q: usize) -> f64 {
        self.mean[step * self.names.len() + q]
    }

    pub fn var(&self, step: usize, q: usize) -> f64 {
        self.var[step * self.names.len() + q]
    }

    /// Standard deviation; tiny negative variances from rounding map to zero.
    pub fn std(&self, step: usize, q: usize) -> f64 {
        self.var(step, q).max(0.0).sqrt()
    }

    pub fn mean_series(&self, q: usize) -> Vec<f64> {
        (0..self.n_points()).map(|s| self.mean(s, q)).collect()
    }

    pub fn std_series(&self, q: usize) -> Vec<f64> {
        (0..self.n_points()).map(|s| self.std(s, q)).collect()
    }
}

/// Wall-clock time of the two post-processing parts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PostTiming {
    pub iv_stats: Duration,
    pub stress_stats: Duration,
}

fn check_moments<M: ExtendedModel>(model: &M, moments: &MomentSet) -> Result<(), EngineError> {
    if moments.n_elastic() != model.n_elastic_sources() || moments.n_scalar != model.n_scalar_sources() {
        return Err(EngineError::ShapeMismatch(format!(
            "model `{}` has {} elastic and {} scalar sources, moments have {} and {}",
            model.name(),
            model.n_elastic_sources(),
            model.n_scalar_sources(),
            moments.n_elastic(),
            moments.n_scalar
        )));
    }
    Ok(())
}

/// Linear-order expectation and variance along a trajectory.
pub fn postprocess<M: ExtendedModel>(
    model: &M,
    traj: &ModelTrajectory<M>,
    moments: &MomentSet,
) -> Result<(StatSeries, PostTiming), EngineError> {
    check_moments(model, moments)?;
    let factor = moments.factor();
    let names = model.quantity_names();
    let n_iv = model.iv_names().len();
    let nq = names.len();
    let np = traj.states.len();
    let mut mean = vec![0.0; np * nq];
    let mut var = vec![0.0; np * nq];
    let mut timing = PostTiming::default();
    let mut store = |row: usize, offset: usize, lin: &[LinQuantity], factor: &CovarianceFactor| {
        for (k, q) in lin.iter().enumerate() {
            mean[row * nq + offset + k] = q.value;
            var[row * nq + offset + k] = factor.variance(&q.grad);
        }
    };
    for n in 0..np {
        let (y, tan) = (&traj.states[n], &traj.tangents[n]);
        let t0 = Instant::now();
        let iv = model.linearize_iv(y, tan);
        store(n, 0, &iv, &factor);
        let t1 = Instant::now();
        let sigma = model
            .linearize_stress(y, tan, &traj.strains[n])
            .map_err(|source| EngineError::Model { step: n, source })?;
        store(n, n_iv, &sigma, &factor);
        let t2 = Instant::now();
        timing.iv_stats += t1 - t0;
        timing.stress_stats += t2 - t1;
    }
    let series = StatSeries { names, n_iv, t: traj.grid.times(), mean, var };
    Ok((series, timing))
}

/// Dense-contraction variant of [`postprocess`] at a single step, used as a
/// cross-check of the low-rank path.
pub fn step_statistics_dense<M: ExtendedModel>(
    model: &M,
    traj: &ModelTrajectory<M>,
    moments: &MomentSet,
    step: usize,
) -> Result<Vec<(f64, f64)>, EngineError> {
    check_moments(model, moments)?;
    let (y, tan) = (&traj.states[step], &traj.tangents[step]);
    let mut lin = model.linearize_iv(y, tan);
    lin.extend(
        model.linearize_stress(y, tan, &traj.strains[step]).map_err(|source| EngineError::Model { step, source })?,
    );
    Ok(lin.iter().map(|q| (q.value, moments.variance(&q.grad))).collect())
}

/// Wraps a model and scales its tangent right-hand side, for fault injection.
#[derive(Debug, Clone)]
pub struct ScaledTangent<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: ExtendedModel> ExtendedModel for ScaledTangent<M> {
    type State = M::State;
    type Tangents = M::Tangents;

    fn name(&self) -> &'static str {
        self.inner.name()
    }
    fn iv_names(&self) -> Vec<String> {
        self.inner.iv_names()
    }
    fn n_elastic_sources(&self) -> usize {
        self.inner.n_elastic_sources()
    }
    fn n_scalar_sources(&self) -> usize {
        self.inner.n_scalar_sources()
    }
    fn initial_state(&self) -> Self::State {
        self.inner.initial_state()
    }
    fn initial_tangents(&self) -> Self::Tangents {
        self.inner.initial_tangents()
    }
    fn det_rhs(&self, y: &Self::State, strain: &VoigtVector) -> Result<Self::State, ModelError> {
        self.inner.det_rhs(y, strain)
    }
    fn tangent_rhs(
        &self,
        y: &Self::State,
        tan: &Self::Tangents,
        strain: &VoigtVector,
    ) -> Result<Self::Tangents, ModelError> {
        let mut r = self.inner.tangent_rhs(y, tan, strain)?;
        r.scale(self.factor);
        Ok(r)
    }
    fn iv_values(&self, y: &Self::State) -> Vec<f64> {
        self.inner.iv_values(y)
    }
    fn stress(&self, y: &Self::State, strain: &VoigtVector) -> Result<VoigtVector, ModelError> {
        self.inner.stress(y, strain)
    }
    fn linearize_iv(&self, y: &Self::State, tan: &Self::Tangents) -> Vec<LinQuantity> {
        self.inner.linearize_iv(y, tan)
    }
    fn linearize_stress(
        &self,
        y: &Self::State,
        tan: &Self::Tangents,
        strain: &VoigtVector,
    ) -> Result<Vec<LinQuantity>, ModelError> {
        self.inner.linearize_stress(y, tan, strain)
    }
    fn with_fluctuation(&self, d: &[VoigtMatrix], y: &[f64]) -> Self {
        Self { inner: self.inner.with_fluctuation(d, y), factor: self.factor }
    }
    fn regime(&self, y: &Self::State, strain: &VoigtVector) -> u32 {
        self.inner.regime(y, strain)
    }
}
