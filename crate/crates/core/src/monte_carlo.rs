//! Monte Carlo reference.
//!
//! Realization `k` draws its parameters from the stream `(base_seed, k)` and runs
//! the plain deterministic model. Realizations are grouped into fixed-size
//! blocks; each block is accumulated with Welford updates and blocks are merged
//! in index order, so the statistics do not depend on the worker count.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::engine::{simulate, ExtendedModel, TimeGrid};
use crate::error::McError;
use crate::stochastic::{realization_rng, Sampler};
use crate::voigt::VoigtVector;

/// Realizations per block.
pub const BLOCK: usize = 25;
/// Upper bound on stored sample trajectories.
pub const MAX_STORED: usize = 20;

/// Streaming mean and sum of squared deviations over many series.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub n: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Self { n: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta * inv;
            *s += delta * (v - *m);
        }
    }

    /// Pairwise combination of two disjoint accumulators.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * (nb / n);
            self.m2[k] += other.m2[k] + delta * delta * (na * nb / n);
        }
        self.n += other.n;
    }

    /// Unbiased variance; zero when fewer than two samples were seen.
    pub fn variance(&self, k: usize) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2[k] / (self.n - 1) as f64).max(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n: usize,
    pub base_seed: u64,
    pub workers: usize,
    /// Number of sample trajectories to keep, capped at [`MAX_STORED`].
    pub store_samples: usize,
}

impl McOptions {
    pub fn new(n: usize, base_seed: u64) -> Self {
        Self { n, base_seed, workers: 1, store_samples: 0 }
    }
}

/// Per-step Monte Carlo statistics of every tracked quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct McStats {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    pub n: u64,
    pub seed: u64,
    /// Row-major `[step][quantity]`.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Parameter draws rejected for non-physical stiffness.
    pub rejections: usize,
    /// Sample trajectories, `[realization][step·n_quantities + q]`.
    pub samples: Vec<Vec<f64>>,
    pub elapsed: Duration,
}

impl McStats {
    pub fn n_quantities(&self) -> usize {
        self.names.len()
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

    pub fn std(&self, step: usize, q: usize) -> f64 {
        self.var(step, q).sqrt()
    }

    /// True when the variance is undefined (fewer than two realizations).
    pub fn variance_undefined(&self) -> bool {
        self.n < 2
    }
}

/// Standard errors of the Monte Carlo mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    /// `√(var/n)`.
    pub mean: Vec<f64>,
    /// `std/√(2(n−1))`, the normal-theory approximation.
    pub std: Vec<f64>,
}

pub fn mc_standard_error(stats: &McStats) -> Result<StandardErrors, McError> {
    if stats.n < 2 {
        return Err(McError::InsufficientSamples(stats.n));
    }
    let n = stats.n as f64;
    Ok(StandardErrors {
        mean: stats.var.iter().map(|v| (v / n).sqrt()).collect(),
        std: stats.var.iter().map(|v| v.sqrt() / (2.0 * (n - 1.0)).sqrt()).collect(),
    })
}

struct BlockResult {
    acc: Accumulator,
    rejections: usize,
    samples: Vec<Vec<f64>>,
}

fn run_block<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
    sampler: &Sampler,
    opts: &McOptions,
    block: usize,
    nq: usize,
) -> Result<BlockResult, McError> {
    let params = sampler.params();
    let len = (grid.n_steps + 1) * nq;
    let mut acc = Accumulator::new(len);
    let mut rejections = 0;
    let mut samples = Vec::new();
    let mut row = vec![0.0; len];
    let keep = opts.store_samples.min(MAX_STORED);
    for index in block * BLOCK..((block + 1) * BLOCK).min(opts.n) {
        let mut rng = realization_rng(opts.base_seed, index as u64);
        let (r, rej) = sampler.sample(&mut rng).map_err(|source| McError::Sampling { index, source })?;
        rejections += rej;
        let m = model.with_fluctuation(&r.elastic_fluctuations(params), &r.scalar_fluctuations(params));
        simulate(&m, strains, grid, |step, y, eps| {
            let q = m.quantities(y, eps)?;
            row[step * nq..(step + 1) * nq].copy_from_slice(&q);
            Ok(())
        })
        .map_err(|e| McError::Realization { index, source: Box::new(e) })?;
        acc.push(&row);
        if index < keep {
            samples.push(row.clone());
        }
    }
    Ok(BlockResult { acc, rejections, samples })
}

/// Runs `opts.n` realizations of the deterministic model.
pub fn run_mc<M: ExtendedModel>(
    model: &M,
    strains: &[VoigtVector],
    grid: TimeGrid,
    sampler: &Sampler,
    opts: &McOptions,
) -> Result<McStats, McError> {
    if opts.n == 0 {
        return Err(McError::Setup("need at least one realization".into()));
    }
    if sampler.params().n_elastic_sources() != model.n_elastic_sources()
        || usize::from(sampler.params().has_yield()) != model.n_scalar_sources()
    {
        return Err(McError::Setup(format!("parameter sources do not match model `{}`", model.name())));
    }
    if strains.len() != grid.n_steps + 1 {
        return Err(McError::Setup(format!("{} strain samples for {} grid points", strains.len(), grid.n_steps + 1)));
    }
    let start = Instant::now();
    let nq = model.quantity_names().len();
    let n_blocks = opts.n.div_ceil(BLOCK);
    let workers = opts.workers.max(1);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| McError::Setup(e.to_string()))?;

    let mut total = Accumulator::new((grid.n_steps + 1) * nq);
    let mut rejections = 0;
    let mut samples = Vec::new();
    // Waves bound the number of live block accumulators to the worker count.
    for wave in (0..n_blocks).collect::<Vec<_>>().chunks(workers) {
        let results: Vec<Result<BlockResult, McError>> = if workers == 1 {
            wave.iter().map(|&b| run_block(model, strains, grid, sampler, opts, b, nq)).collect()
        } else {
            pool.install(|| wave.par_iter().map(|&b| run_block(model, strains, grid, sampler, opts, b, nq)).collect())
        };
        for r in results {
            let r = r?;
            total.merge(&r.acc);
            rejections += r.rejections;
            samples.extend(r.samples);
        }
    }

    let var = (0..total.mean.len()).map(|k| total.variance(k)).collect();
    Ok(McStats {
        names: model.quantity_names(),
        t: grid.times(),
        n: total.n,
        seed: opts.base_seed,
        mean: total.mean,
        var,
        rejections,
        samples,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DamageModel;
    use crate::stochastic::{CorrelationSpec, FluctuatingScalar, StochasticParams};
    use crate::voigt::isotropic_stiffness;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn setup(std: f64) -> (DamageModel, Vec<VoigtVector>, TimeGrid, Sampler) {
        let p = StochasticParams::new(
            &[(FluctuatingScalar::relative(12e9, std), FluctuatingScalar::relative(8e9, std))],
            None,
        );
        let sampler = Sampler::new(&p, &CorrelationSpec::Independent).unwrap();
        let g = TimeGrid::new(20.0, 0.05).unwrap();
        let load = crate::load::LoadCase::Proportional { direction: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], rate: 2e-4 };
        let m = DamageModel::new(p.mean_stiffness(0), 10e6);
        (m, g.strains(&load).unwrap(), g, sampler)
    }

    #[test]
    fn single_realization_flags_variance() {
        let (m, s, g, sampler) = setup(0.15);
        let st = run_mc(&m, &s, g, &sampler, &McOptions::new(1, 3)).unwrap();
        assert!(st.variance_undefined());
        assert!(st.var.iter().all(|v| *v == 0.0));
        assert!(matches!(mc_standard_error(&st), Err(McError::InsufficientSamples(1))));
    }

    #[test]
    fn zero_std_reproduces_deterministic_run() {
        let (m, s, g, sampler) = setup(0.0);
        let st = run_mc(&m, &s, g, &sampler, &McOptions::new(60, 3)).unwrap();
        assert!(st.var.iter().all(|v| *v == 0.0));
        let mut det = Vec::new();
        simulate(&m, &s, g, |_, y, eps| {
            det.extend(m.quantities(y, eps)?);
            Ok(())
        })
        .unwrap();
        assert_eq!(st.mean, det);
        assert_eq!(m.e0, isotropic_stiffness(12e9, 8e9));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (m, s, g, sampler) = setup(0.15);
        let mut opts = McOptions::new(130, 11);
        let a = run_mc(&m, &s, g, &sampler, &opts).unwrap();
        opts.workers = 3;
        let b = run_mc(&m, &s, g, &sampler, &opts).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.var, b.var);
    }

    #[test]
    fn stored_samples_capped() {
        let (m, s, g, sampler) = setup(0.15);
        let mut opts = McOptions::new(60, 1);
        opts.store_samples = 100;
        let st = run_mc(&m, &s, g, &sampler, &opts).unwrap();
        assert_eq!(st.samples.len(), MAX_STORED);
    }

    #[test]
    fn standard_error_formulas() {
        let mk = |n: u64, var: f64| McStats {
            names: vec!["x".into()],
            t: vec![0.0],
            n,
            seed: 0,
            mean: vec![0.0],
            var: vec![var],
            rejections: 0,
            samples: vec![],
            elapsed: Duration::ZERO,
        };
        assert_eq!(mc_standard_error(&mk(10, 0.0)).unwrap().mean[0], 0.0);
        let a = mc_standard_error(&mk(100, 2.0)).unwrap().mean[0];
        let b = mc_standard_error(&mk(400, 2.0)).unwrap().mean[0];
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn gaussian_self_test() {
        // |mean| < 3·SE for N(0, 1) streams of 10⁴ draws in at least 99% of seeds
        let mut inside = 0;
        for seed in 0..300u64 {
            let mut rng = realization_rng(seed, 0);
            let mut acc = Accumulator::new(1);
            for _ in 0..10_000 {
                let x: f64 = rng.sample(StandardNormal);
                acc.push(&[x]);
            }
            let se = (acc.variance(0) / acc.n as f64).sqrt();
            if acc.mean[0].abs() < 3.0 * se {
                inside += 1;
            }
        }
        assert!(inside as f64 >= 0.99 * 300.0, "{inside}");
    }

    proptest! {
        #[test]
        fn merge_equals_single_stream(xs in proptest::collection::vec(-1e3..1e3f64, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut whole = Accumulator::new(1);
            xs.iter().for_each(|x| whole.push(&[*x]));
            let mut a = Accumulator::new(1);
            let mut b = Accumulator::new(1);
            xs[..split].iter().for_each(|x| a.push(&[*x]));
            xs[split..].iter().for_each(|x| b.push(&[*x]));
            a.merge(&b);
            prop_assert_eq!(a.n, whole.n);
            let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!((a.mean[0] - whole.mean[0]).abs() <= 1e-12 * scale);
            prop_assert!((a.m2[0] - whole.m2[0]).abs() <= 1e-12 * whole.m2[0].max(scale * scale));
        }
    }
}
