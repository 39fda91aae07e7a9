//! Independent oracles for the extended models.
//!
//! [`fd_tangent_check`] compares the integrated tangents with central finite
//! differences of two perturbed deterministic runs. [`frozen_state_sampling_check`]
//! samples fluctuations, evaluates the linearized quantities of a stored
//! trajectory and compares their empirical moments with the closed-form
//! contractions, which isolates the post-processing from the linearization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::engine::{integrate_extended, simulate, ExtendedModel, LinQuantity, ModelTrajectory, TimeGrid};
use crate::error::{EngineError, SamplingError};
use crate::moments::MomentSet;
use crate::stochastic::{realization_rng, CorrelationSpec, ParamRealization, Sampler, StochasticParams};
use crate::voigt::{flatten, normalized_symmetric, VoigtMatrix, VoigtVector};

/// Acceptance bound on the finite-difference relative error.
pub const FD_TOLERANCE: f64 = 1e-3;
/// Steps on either side of a regime change left out of the comparison.
pub const NONSMOOTH_WINDOW: usize = 2;
/// Relative variance tolerance of the frozen-state check.
pub const FROZEN_VAR_TOLERANCE: f64 = 0.01;
/// Standard errors allowed by the frozen-state check.
pub const FROZEN_SE_MULTIPLIER: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Elasticity tensor `j`.
    Elastic(usize),
    /// Scalar parameter `k` (the yield limit).
    Scalar(usize),
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Elastic(j) => write!(f, "E{}", j + 1),
            Source::Scalar(_) => write!(f, "yield"),
        }
    }
}

/// Random symmetric 6×6 direction with unit Frobenius norm.
pub fn random_direction(seed: u64) -> VoigtMatrix {
    let mut rng = realization_rng(seed, u64::MAX);
    normalized_symmetric(&VoigtMatrix::from_fn(|_, _| rng.sample(StandardNormal)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdQuantity {
    pub name: String,
    pub max_abs_err: f64,
    /// `max_n |I:A|` over the trajectory.
    pub scale: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub source: Source,
    pub h: f64,
    pub quantities: Vec<FdQuantity>,
    /// Per step, the largest relative error over all quantities.
    pub step_rel_err: Vec<f64>,
    pub excluded_steps: Vec<usize>,
}

impl FdReport {
    pub fn max_rel_err(&self) -> f64 {
        self.quantities.iter().map(|q| q.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= FD_TOLERANCE
    }

    pub fn worst(&self) -> Option<&FdQuantity> {
        self.quantities.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

fn perturbation<M: ExtendedModel>(
    model: &M,
    source: Source,
    dir: &VoigtMatrix,
    h: f64,
) -> (Vec<VoigtMatrix>, Vec<f64>) {
    let mut d = vec![VoigtMatrix::zeros(); model.n_elastic_sources()];
    let mut y = vec![0.0; model.n_scalar_sources()];
    match source {
        Source::Elastic(j) => d[j] = dir * h,
        Source::Scalar(k) => y[k] = h,
    }
    (d, y)
}

/// `∂q/∂(source)` contracted with the direction, from a gradient laid out like `Φ`.
fn directional(grad: &[f64], source: Source, dir: &Option<Vec<f64>>, n_elastic: usize) -> f64 {
    match (source, dir) {
        (Source::Elastic(j), Some(v)) => grad[36 * j..36 * (j + 1)].iter().zip(v).map(|(g, a)| g * a).sum(),
        (Source::Scalar(k), _) => grad[36 * n_elastic + k],
        _ => unreachable!("elastic sources always carry a direction"),
    }
}

fn record<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
) -> Result<(Vec<Vec<f64>>, Vec<u32>), EngineError> {
    let mut q = Vec::with_capacity(grid.n_steps + 1);
    let mut regime = Vec::with_capacity(grid.n_steps + 1);
    simulate(model, strains, grid, |_, y, eps| {
        q.push(model.quantities(y, eps)?);
        regime.push(model.regime(y, eps));
        Ok(())
    })?;
    Ok((q, regime))
}

/// Central-difference check of the tangents of one fluctuation source.
///
/// For an elastic source the parameter is perturbed by `±h·direction`; for a
/// scalar source by `±h`. Every internal variable and stress component is
/// compared at every step. Steps where the perturbed runs sit on different
/// smooth pieces of the right-hand side are excluded together with
/// [`NONSMOOTH_WINDOW`] neighbours on each side.
pub fn fd_tangent_check<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
    source: Source,
    direction: &VoigtMatrix,
    h: f64,
) -> Result<FdReport, EngineError> {
    let traj = integrate_extended(model, strains, grid)?;
    fd_tangent_check_on(model, &traj, source, direction, h)
}

/// As [`fd_tangent_check`], reusing an already integrated trajectory.
pub fn fd_tangent_check_on<M: ExtendedModel>(
    model: &M,
    traj: &ModelTrajectory<M>,
    source: Source,
    direction: &VoigtMatrix,
    h: f64,
) -> Result<FdReport, EngineError> {
    let (grid, strains) = (traj.grid, &traj.strains);
    let (dp, yp) = perturbation(model, source, direction, h);
    let (dm, ym) = perturbation(model, source, direction, -h);
    let (qp, rp) = record(&model.with_fluctuation(&dp, &yp), strains, grid)?;
    let (qm, rm) = record(&model.with_fluctuation(&dm, &ym), strains, grid)?;

    let dir_flat = match source {
        Source::Elastic(_) => Some(flatten(direction).as_slice().to_vec()),
        Source::Scalar(_) => None,
    };
    let ne = model.n_elastic_sources();
    let names = model.quantity_names();
    let np = grid.n_steps + 1;

    let mut excluded = vec![false; np];
    for n in 0..np {
        let nominal = model.regime(&traj.states[n], &strains[n]);
        if rp[n] != rm[n] || rp[n] != nominal {
            for k in n.saturating_sub(NONSMOOTH_WINDOW)..=(n + NONSMOOTH_WINDOW).min(np - 1) {
                excluded[k] = true;
            }
        }
    }

    let mut lin = vec![vec![0.0; names.len()]; np];
    for n in 0..np {
        let mut q: Vec<LinQuantity> = model.linearize_iv(&traj.states[n], &traj.tangents[n]);
        q.extend(
            model
                .linearize_stress(&traj.states[n], &traj.tangents[n], &strains[n])
                .map_err(|source| EngineError::Model { step: n, source })?,
        );
        for (k, lq) in q.iter().enumerate() {
            lin[n][k] = directional(&lq.grad, source, &dir_flat, ne);
        }
    }

    let mut quantities = Vec::with_capacity(names.len());
    let mut abs_err = vec![vec![0.0; names.len()]; np];
    for (k, name) in names.iter().enumerate() {
        let mut max_abs_err = 0.0f64;
        let mut scale = 0.0f64;
        for n in (0..np).filter(|&n| !excluded[n]) {
            let fd = (qp[n][k] - qm[n][k]) / (2.0 * h);
            let err = (fd - lin[n][k]).abs();
            abs_err[n][k] = err;
            max_abs_err = max_abs_err.max(err);
            scale = scale.max(lin[n][k].abs());
        }
        let max_rel_err = relative(max_abs_err, scale);
        quantities.push(FdQuantity { name: name.clone(), max_abs_err, scale, max_rel_err });
    }
    let step_rel_err = (0..np)
        .map(|n| quantities.iter().zip(&abs_err[n]).map(|(q, e)| relative(*e, q.scale)).fold(0.0, f64::max))
        .collect();
    Ok(FdReport { source, h, quantities, step_rel_err, excluded_steps: (0..np).filter(|&n| excluded[n]).collect() })
}

fn relative(err: f64, scale: f64) -> f64 {
    if err == 0.0 {
        0.0
    } else if scale > 0.0 {
        err / scale
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenCheck {
    pub step: usize,
    pub name: String,
    pub closed_var: f64,
    pub sampled_mean: f64,
    pub sampled_var: f64,
    /// Closed-form and sampled `2·Cov(g_E·D, g_Y·σ̃ʸ)`; zero without a scalar source.
    pub closed_cross: f64,
    pub sampled_cross: f64,
    pub var_ok: bool,
    pub mean_ok: bool,
    pub cross_ok: bool,
}

impl FrozenCheck {
    pub fn rel_var_err(&self) -> f64 {
        if self.closed_var == 0.0 {
            if self.sampled_var == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.sampled_var / self.closed_var - 1.0).abs()
        }
    }

    pub fn passed(&self) -> bool {
        self.var_ok && self.mean_ok && self.cross_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenReport {
    pub n_samples: usize,
    pub checks: Vec<FrozenCheck>,
    /// Every closed-form variance is zero.
    pub degenerate: bool,
}

impl FrozenReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(FrozenCheck::passed)
    }

    pub fn worst(&self) -> Option<&FrozenCheck> {
        self.checks.iter().filter(|c| c.closed_var > 0.0).max_by(|a, b| a.rel_var_err().total_cmp(&b.rel_var_err()))
    }
}

/// `k·n_steps/count` for `k = 1..=count`.
pub fn snapshot_steps(grid: TimeGrid, count: usize) -> Vec<usize> {
    (1..=count).map(|k| (grid.n_steps * k) / count).collect()
}

/// Samples the linearized quantities of `traj` at `steps` and compares their
/// empirical moments with the closed-form contractions of `moments`.
pub fn frozen_state_sampling_check<M: ExtendedModel>(
    model: &M,
    traj: &ModelTrajectory<M>,
    steps: &[usize],
    sampler: &Sampler,
    moments: &MomentSet,
    n: usize,
    seed: u64,
) -> Result<FrozenReport, FrozenError> {
    let dim = model.fluctuation_dim();
    let ne = model.n_elastic_sources();
    let has_y = model.n_scalar_sources() > 0;
    if moments.dim() != dim {
        return Err(FrozenError::Engine(EngineError::ShapeMismatch("moment set does not match model".into())));
    }
    let names = model.quantity_names();
    let mut labels = Vec::new();
    let mut grads: Vec<Vec<f64>> = Vec::new();
    for &s in steps {
        let (y, tan) = (&traj.states[s], &traj.tangents[s]);
        let mut q = model.linearize_iv(y, tan);
        q.extend(
            model
                .linearize_stress(y, tan, &traj.strains[s])
                .map_err(|source| FrozenError::Engine(EngineError::Model { step: s, source }))?,
        );
        for (k, lq) in q.into_iter().enumerate() {
            labels.push((s, names[k].clone()));
            grads.push(lq.grad);
        }
    }
    let m = grads.len();
    // rows: full gradients, then elastic-only parts
    let g_full = DMatrix::from_fn(m, dim, |r, c| grads[r][c]);
    let g_elastic = DMatrix::from_fn(m, 36 * ne, |r, c| grads[r][c]);
    let g_y: Vec<f64> = grads.iter().map(|g| if has_y { g[36 * ne] } else { 0.0 }).collect();

    let params = sampler.params();
    let mut rng = realization_rng(seed, 0);
    let mut sum = vec![0.0; m];
    let mut sum2 = vec![0.0; m];
    let mut sum_x = vec![0.0; m];
    let mut sum_y = vec![0.0; m];
    let mut sum_xx = vec![0.0; m];
    let mut sum_yy = vec![0.0; m];
    let mut sum_xy = vec![0.0; m];
    let mut phi = DVector::zeros(dim);
    for _ in 0..n {
        let (r, _) = sampler.sample(&mut rng).map_err(FrozenError::Sampling)?;
        for (j, d) in r.elastic_fluctuations(params).iter().enumerate() {
            phi.rows_mut(36 * j, 36).copy_from(&flatten(d));
        }
        let yv = if has_y { r.scalar_fluctuations(params)[0] } else { 0.0 };
        if has_y {
            phi[36 * ne] = yv;
        }
        let full = &g_full * &phi;
        let x = &g_elastic * phi.rows(0, 36 * ne);
        for k in 0..m {
            let v = full[k];
            sum[k] += v;
            sum2[k] += v * v;
            let (xv, yk) = (x[k], g_y[k] * yv);
            sum_x[k] += xv;
            sum_y[k] += yk;
            sum_xx[k] += xv * xv;
            sum_yy[k] += yk * yk;
            sum_xy[k] += xv * yk;
        }
    }

    let nf = n as f64;
    let cov = |s: f64, sa: f64, sb: f64| (s - sa * sb / nf) / (nf - 1.0);
    let mut checks = Vec::with_capacity(m);
    let mut degenerate = true;
    for k in 0..m {
        let g = &grads[k];
        let closed_var = moments.variance(g);
        let closed_cross = if has_y {
            let gy = g[36 * ne];
            2.0 * (0..ne).map(|j| (0..36).map(|c| g[36 * j + c] * flatten(&moments.yd[j])[c]).sum::<f64>()).sum::<f64>()
                * gy
        } else {
            0.0
        };
        degenerate &= closed_var == 0.0;
        let sampled_mean = sum[k] / nf;
        let sampled_var = cov(sum2[k], sum[k], sum[k]);
        let var_x = cov(sum_xx[k], sum_x[k], sum_x[k]);
        let var_y = cov(sum_yy[k], sum_y[k], sum_y[k]);
        let sampled_cross = 2.0 * cov(sum_xy[k], sum_x[k], sum_y[k]);

        let se_var = closed_var * (2.0 / (nf - 1.0)).sqrt();
        let var_ok = (sampled_var - closed_var).abs()
            <= (FROZEN_VAR_TOLERANCE * closed_var).max(FROZEN_SE_MULTIPLIER * se_var)
            || (closed_var == 0.0 && sampled_var.abs() <= f64::EPSILON * sum2[k] / nf);
        let mean_ok = sampled_mean.abs()
            <= FROZEN_SE_MULTIPLIER * (closed_var / nf).sqrt() + f64::EPSILON * (sum2[k] / nf).sqrt();
        let se_cross = 2.0 * ((var_x * var_y + (sampled_cross / 2.0).powi(2)) / nf).sqrt();
        let cross_ok = (sampled_cross - closed_cross).abs()
            <= (FROZEN_VAR_TOLERANCE * closed_cross.abs()).max(FROZEN_SE_MULTIPLIER * se_cross);
        checks.push(FrozenCheck {
            step: labels[k].0,
            name: labels[k].1.clone(),
            closed_var,
            sampled_mean,
            sampled_var,
            closed_cross,
            sampled_cross,
            var_ok,
            mean_ok,
            cross_ok,
        });
    }
    Ok(FrozenReport { n_samples: n, checks, degenerate })
}

#[derive(Debug, thiserror::Error)]
pub enum FrozenError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Second-order correction to the mean of every quantity at every step:
/// `½·Σ_i [q(p⁰ + s_i) + q(p⁰ − s_i) − 2·q(p⁰)]`, where the sigma points `s_i` are
/// the columns of the covariance factor of the scalar parameters.
///
/// The first-order mean is the mean-parameter trajectory; this estimates the
/// curvature term it omits, `½·tr(H·Σ)`, up to fourth-order contributions.
/// Rows are steps, columns follow [`ExtendedModel::quantity_names`].
pub fn second_order_mean_shift<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
    params: &StochasticParams,
    correlation: &CorrelationSpec,
) -> Result<Vec<Vec<f64>>, EngineError> {
    let run = |m: &M| -> Result<Vec<Vec<f64>>, EngineError> {
        let mut out = Vec::with_capacity(grid.n_steps + 1);
        simulate(m, strains, grid, |_, y, eps| {
            out.push(m.quantities(y, eps)?);
            Ok(())
        })?;
        Ok(out)
    };
    let nominal = run(model)?;
    let mut shift = vec![vec![0.0; nominal[0].len()]; nominal.len()];
    let factor = correlation.factor(params.len());
    for col in factor.column_iter() {
        if col.iter().zip(&params.scalars).all(|(c, (_, s))| c * s.std == 0.0) {
            continue;
        }
        for sign in [1.0, -1.0] {
            let values = params.scalars.iter().zip(col.iter()).map(|((_, s), c)| s.mean + sign * c * s.std).collect();
            let r = ParamRealization { values };
            let perturbed = model.with_fluctuation(&r.elastic_fluctuations(params), &r.scalar_fluctuations(params));
            for (row, (p, n)) in shift.iter_mut().zip(run(&perturbed)?.iter().zip(&nominal)) {
                for (s, (a, b)) in row.iter_mut().zip(p.iter().zip(n)) {
                    *s += 0.5 * (a - b);
                }
            }
        }
    }
    Ok(shift)
}
