//! Random material parameters and their realizations.
//!
//! Every model exposes its uncertain inputs as a flat list of scalars, each tagged
//! with the role it plays: a Lamé parameter of one of the elasticity tensors, or
//! the yield limit. The fluctuation of an elasticity tensor is
//! `D = E(λ, μ) − E(⟨λ⟩, ⟨μ⟩)`, which is linear in the scalar fluctuations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::SamplingError;
use crate::voigt::{isotropic_stiffness, VoigtMatrix};

/// Consecutive rejected draws tolerated before giving up.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Normal,
    /// Uniform on `mean ± √3·std`; only sampled independently.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuatingScalar {
    pub mean: f64,
    pub std: f64,
    #[serde(default)]
    pub distribution: Distribution,
}

impl FluctuatingScalar {
    pub fn normal(mean: f64, std: f64) -> Self {
        Self { mean, std, distribution: Distribution::Normal }
    }

    /// Normal scalar whose standard deviation is `rel` times its mean.
    pub fn relative(mean: f64, rel: f64) -> Self {
        Self::normal(mean, rel * mean.abs())
    }

    pub fn deterministic(mean: f64) -> Self {
        Self::normal(mean, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    /// First Lamé parameter of elasticity source `j`.
    Lambda(usize),
    /// Shear modulus of elasticity source `j`.
    Mu(usize),
    YieldLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationSpec {
    Independent,
    /// One shared standard-normal factor, scaled by each scalar's own std.
    FullyDependent,
    /// Correlation matrix over the scalar fluctuations, in parameter order.
    Matrix(DMatrix<f64>),
}

impl CorrelationSpec {
    /// Checks unit diagonal, symmetry and positive semi-definiteness.
    pub fn validate(&self, n: usize) -> Result<(), SamplingError> {
        let CorrelationSpec::Matrix(m) = self else {
            return Ok(());
        };
        if m.nrows() != n || m.ncols() != n {
            return Err(SamplingError::InvalidCorrelation(format!(
                "expected a {n}x{n} matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(SamplingError::InvalidCorrelation(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(SamplingError::InvalidCorrelation(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(SamplingError::InvalidCorrelation(format!(
                "not positive semi-definite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// `L` with `C = L Lᵀ` over `n` scalars: the identity, a single column of
    /// ones, or the symmetric eigen factor.
    pub fn factor(&self, n: usize) -> DMatrix<f64> {
        match self {
            CorrelationSpec::Independent => DMatrix::identity(n, n),
            CorrelationSpec::FullyDependent => DMatrix::from_element(n, 1, 1.0),
            CorrelationSpec::Matrix(m) => {
                let eig = SymmetricEigen::new(m.clone());
                let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
            }
        }
    }

    /// Correlation coefficient between scalars `p` and `q`.
    pub fn coefficient(&self, p: usize, q: usize) -> f64 {
        match self {
            CorrelationSpec::Independent => f64::from(u8::from(p == q)),
            CorrelationSpec::FullyDependent => 1.0,
            CorrelationSpec::Matrix(m) => m[(p, q)],
        }
    }
}

/// The uncertain parameters of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticParams {
    pub scalars: Vec<(ParamRole, FluctuatingScalar)>,
}

impl StochasticParams {
    /// Lamé pairs for each elasticity source, optionally followed by a yield limit.
    pub fn new(lame: &[(FluctuatingScalar, FluctuatingScalar)], yield_limit: Option<FluctuatingScalar>) -> Self {
        let mut scalars = Vec::new();
        for (j, (l, m)) in lame.iter().enumerate() {
            scalars.push((ParamRole::Lambda(j), *l));
            scalars.push((ParamRole::Mu(j), *m));
        }
        if let Some(y) = yield_limit {
            scalars.push((ParamRole::YieldLimit, y));
        }
        Self { scalars }
    }

    pub fn len(&self) -> usize {
        self.scalars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty()
    }

    pub fn n_elastic_sources(&self) -> usize {
        self.scalars
            .iter()
            .filter_map(|(r, _)| match r {
                ParamRole::Lambda(j) | ParamRole::Mu(j) => Some(j + 1),
                ParamRole::YieldLimit => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn index_of(&self, role: ParamRole) -> Option<usize> {
        self.scalars.iter().position(|(r, _)| *r == role)
    }

    pub fn has_yield(&self) -> bool {
        self.index_of(ParamRole::YieldLimit).is_some()
    }

    pub fn mean_stiffness(&self, source: usize) -> VoigtMatrix {
        let l = self.index_of(ParamRole::Lambda(source)).map_or(0.0, |i| self.scalars[i].1.mean);
        let m = self.index_of(ParamRole::Mu(source)).map_or(0.0, |i| self.scalars[i].1.mean);
        isotropic_stiffness(l, m)
    }

    pub fn mean_values(&self) -> ParamRealization {
        ParamRealization { values: self.scalars.iter().map(|(_, s)| s.mean).collect() }
    }

    pub fn all_deterministic(&self) -> bool {
        self.scalars.iter().all(|(_, s)| s.std == 0.0)
    }

    /// Elasticity source that scalar `p` belongs to, if any.
    pub fn source_of(&self, p: usize) -> Option<usize> {
        match self.scalars[p].0 {
            ParamRole::Lambda(j) | ParamRole::Mu(j) => Some(j),
            ParamRole::YieldLimit => None,
        }
    }

    /// Rejects correlations coupling two different elasticity tensors; the
    /// moment set has no block for such coupling.
    pub fn check_source_coupling(&self, correlation: &CorrelationSpec) -> Result<(), SamplingError> {
        for p in 0..self.len() {
            for q in 0..self.len() {
                if let (Some(a), Some(b)) = (self.source_of(p), self.source_of(q)) {
                    let active = self.scalars[p].1.std > 0.0 && self.scalars[q].1.std > 0.0;
                    if a != b && active && correlation.coefficient(p, q) != 0.0 {
                        return Err(SamplingError::InvalidCorrelation(format!(
                            "elasticity sources {a} and {b} are correlated; only independent elasticity tensors are supported"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One draw of every scalar parameter, in [`StochasticParams`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRealization {
    pub values: Vec<f64>,
}

impl ParamRealization {
    pub fn lame(&self, params: &StochasticParams, source: usize) -> (f64, f64) {
        let l = params.index_of(ParamRole::Lambda(source)).map_or(0.0, |i| self.values[i]);
        let m = params.index_of(ParamRole::Mu(source)).map_or(0.0, |i| self.values[i]);
        (l, m)
    }

    pub fn stiffness(&self, params: &StochasticParams, source: usize) -> VoigtMatrix {
        let (l, m) = self.lame(params, source);
        isotropic_stiffness(l, m)
    }

    pub fn yield_limit(&self, params: &StochasticParams) -> Option<f64> {
        params.index_of(ParamRole::YieldLimit).map(|i| self.values[i])
    }

    /// `D_j = E_j − E_j⁽⁰⁾` for every elasticity source.
    pub fn elastic_fluctuations(&self, params: &StochasticParams) -> Vec<VoigtMatrix> {
        (0..params.n_elastic_sources()).map(|j| self.stiffness(params, j) - params.mean_stiffness(j)).collect()
    }

    /// `σ̃ʸ` for models with a random yield limit, empty otherwise.
    pub fn scalar_fluctuations(&self, params: &StochasticParams) -> Vec<f64> {
        params
            .index_of(ParamRole::YieldLimit)
            .map(|i| vec![self.values[i] - params.scalars[i].1.mean])
            .unwrap_or_default()
    }

    /// `μ > 0` and bulk modulus `λ + 2μ/3 > 0` for every elasticity source.
    pub fn is_physical(&self, params: &StochasticParams) -> bool {
        (0..params.n_elastic_sources()).all(|j| {
            let (l, m) = self.lame(params, j);
            m > 0.0 && l + 2.0 * m / 3.0 > 0.0
        })
    }
}

/// Independent RNG stream for realization `index` under `base_seed`.
pub fn realization_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Key for an independent consumer of randomness (moment estimation,
/// verification) derived from a run's base seed, so its draws never coincide
/// with the Monte Carlo streams of the same seed.
pub fn derived_seed(base_seed: u64, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(u64::MAX - 1 - purpose);
    rng.gen()
}

/// Draws correlated parameter realizations.
#[derive(Debug, Clone)]
pub struct Sampler {
    params: StochasticParams,
    correlation: CorrelationSpec,
    /// `C = L Lᵀ` for matrix correlations.
    factor: Option<DMatrix<f64>>,
}

impl Sampler {
    pub fn new(params: &StochasticParams, correlation: &CorrelationSpec) -> Result<Self, SamplingError> {
        correlation.validate(params.len())?;
        let non_normal = params.scalars.iter().any(|(_, s)| s.distribution != Distribution::Normal);
        if non_normal && *correlation != CorrelationSpec::Independent {
            return Err(SamplingError::UnsupportedDistribution(
                "uniform (only independent sampling is available)".into(),
            ));
        }
        let factor = match correlation {
            CorrelationSpec::Matrix(_) => Some(correlation.factor(params.len())),
            _ => None,
        };
        Ok(Self { params: params.clone(), correlation: correlation.clone(), factor })
    }

    pub fn params(&self) -> &StochasticParams {
        &self.params
    }

    pub fn correlation(&self) -> &CorrelationSpec {
        &self.correlation
    }

    /// One vector of unit-variance fluctuations with the configured correlation.
    fn standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.params.len();
        match &self.correlation {
            CorrelationSpec::Independent => self
                .params
                .scalars
                .iter()
                .map(|(_, s)| match s.distribution {
                    Distribution::Normal => rng.sample::<f64, _>(StandardNormal),
                    Distribution::Uniform => 3f64.sqrt() * (2.0 * rng.gen::<f64>() - 1.0),
                })
                .collect(),
            CorrelationSpec::FullyDependent => {
                let z: f64 = rng.sample(StandardNormal);
                vec![z; n]
            }
            CorrelationSpec::Matrix(_) => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let l = self.factor.as_ref().expect("factor built for matrix correlation");
                (l * z).iter().copied().collect()
            }
        }
    }

    /// Draws until the stiffness is positive definite; returns the realization
    /// and the number of rejected draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(ParamRealization, usize), SamplingError> {
        for rejected in 0..MAX_REJECTIONS {
            let z = self.standardized(rng);
            let values = self.params.scalars.iter().zip(&z).map(|((_, s), z)| s.mean + s.std * z).collect();
            let r = ParamRealization { values };
            if r.is_physical(&self.params) {
                return Ok((r, rejected));
            }
        }
        Err(SamplingError::RetryExhausted { attempts: MAX_REJECTIONS })
    }
}

/// Draws one realization with the given correlation.
pub fn sample_realization<R: Rng + ?Sized>(
    params: &StochasticParams,
    correlation: &CorrelationSpec,
    rng: &mut R,
) -> Result<ParamRealization, SamplingError> {
    Sampler::new(params, correlation)?.sample(rng).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damage_params(rel: f64) -> StochasticParams {
        StochasticParams::new(&[(FluctuatingScalar::relative(12e9, rel), FluctuatingScalar::relative(8e9, rel))], None)
    }

    #[test]
    fn zero_std_reproduces_means() {
        let params = StochasticParams::new(
            &[(FluctuatingScalar::deterministic(12e9), FluctuatingScalar::deterministic(8e9))],
            Some(FluctuatingScalar::deterministic(50e6)),
        );
        let mut rng = realization_rng(7, 0);
        for corr in [CorrelationSpec::Independent, CorrelationSpec::FullyDependent] {
            let r = sample_realization(&params, &corr, &mut rng).unwrap();
            assert_eq!(r.values, vec![12e9, 8e9, 50e6]);
        }
    }

    #[test]
    fn fully_dependent_shares_one_factor() {
        let params = StochasticParams::new(
            &[(FluctuatingScalar::relative(12e9, 0.1), FluctuatingScalar::relative(8e9, 0.1))],
            Some(FluctuatingScalar::relative(50e6, 0.2)),
        );
        let sampler = Sampler::new(&params, &CorrelationSpec::FullyDependent).unwrap();
        let mut rng = realization_rng(3, 1);
        for _ in 0..1000 {
            let (r, _) = sampler.sample(&mut rng).unwrap();
            let zl = (r.values[0] - 12e9) / 1.2e9;
            let zy = (r.values[2] - 50e6) / 10e6;
            assert!((zl - zy).abs() < 1e-9, "{zl} vs {zy}");
        }
    }

    #[test]
    fn independent_normals_are_uncorrelated() {
        let params = damage_params(0.15);
        let sampler = Sampler::new(&params, &CorrelationSpec::Independent).unwrap();
        let mut rng = realization_rng(11, 0);
        let n = 1_000_000;
        let (mut sl, mut sm, mut sll, mut smm, mut slm) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let (r, _) = sampler.sample(&mut rng).unwrap();
            let (a, b) = ((r.values[0] - 12e9) / 1.8e9, (r.values[1] - 8e9) / 1.2e9);
            sl += a;
            sm += b;
            sll += a * a;
            smm += b * b;
            slm += a * b;
        }
        let nf = n as f64;
        let cov = slm / nf - (sl / nf) * (sm / nf);
        let corr = cov / ((sll / nf - (sl / nf).powi(2)) * (smm / nf - (sm / nf).powi(2))).sqrt();
        // 3/√n standard-error bound
        assert!(corr.abs() < 0.005, "sample correlation {corr}");
    }

    #[test]
    fn matrix_correlation_is_reproduced() {
        let params = damage_params(0.1);
        let rho = 0.6;
        let corr = CorrelationSpec::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]));
        let sampler = Sampler::new(&params, &corr).unwrap();
        let mut rng = realization_rng(5, 0);
        let n = 200_000;
        let mut s = [0.0; 3];
        for _ in 0..n {
            let (r, _) = sampler.sample(&mut rng).unwrap();
            let (a, b) = ((r.values[0] - 12e9) / 1.2e9, (r.values[1] - 8e9) / 0.8e9);
            s[0] += a * a;
            s[1] += b * b;
            s[2] += a * b;
        }
        let est = s[2] / (s[0] * s[1]).sqrt();
        assert!((est - rho).abs() < 0.01, "{est}");
    }

    #[test]
    fn invalid_correlations_rejected() {
        let bad_diag = CorrelationSpec::Matrix(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert!(matches!(bad_diag.validate(2), Err(SamplingError::InvalidCorrelation(_))));
        let not_psd =
            CorrelationSpec::Matrix(DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]));
        assert!(not_psd.validate(3).is_err());
        let wrong_size = CorrelationSpec::Matrix(DMatrix::identity(3, 3));
        assert!(wrong_size.validate(2).is_err());
    }

    #[test]
    fn non_physical_std_exhausts_retries() {
        // a strongly negative shear modulus: every draw is rejected
        let params =
            StochasticParams::new(&[(FluctuatingScalar::normal(1.0, 0.0), FluctuatingScalar::normal(-1e6, 1.0))], None);
        let mut rng = realization_rng(0, 0);
        let err = sample_realization(&params, &CorrelationSpec::Independent, &mut rng).unwrap_err();
        assert_eq!(err, SamplingError::RetryExhausted { attempts: MAX_REJECTIONS });
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| realization_rng(9, 2).gen()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let b: u64 = realization_rng(9, 3).gen();
        assert_ne!(a[0], b);
    }

    #[test]
    fn derived_seeds_differ_from_base_and_each_other() {
        let a = derived_seed(0, 0);
        let b = derived_seed(0, 1);
        assert_ne!(a, b);
        assert_ne!(a, 0);
        assert_eq!(a, derived_seed(0, 0));
        let mc: u64 = realization_rng(0, 0).gen();
        let est: u64 = realization_rng(a, 0).gen();
        assert_ne!(mc, est);
    }

    #[test]
    fn cross_source_coupling_detected() {
        let params = StochasticParams::new(
            &[
                (FluctuatingScalar::relative(70e9, 0.1), FluctuatingScalar::relative(30e9, 0.1)),
                (FluctuatingScalar::relative(35e9, 0.1), FluctuatingScalar::relative(15e9, 0.1)),
            ],
            None,
        );
        assert!(params.check_source_coupling(&CorrelationSpec::Independent).is_ok());
        assert!(params.check_source_coupling(&CorrelationSpec::FullyDependent).is_err());
    }
}
