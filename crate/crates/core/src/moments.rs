//! Moment tensors of the parameter fluctuations.
//!
//! A [`MomentSet`] holds `⟨D_j ⊗ D_j⟩` for every elasticity source, plus
//! `⟨(σ̃ʸ)²⟩` and `⟨σ̃ʸ D_j⟩` when the yield limit fluctuates. These act as extra
//! material parameters: they are computed once per material and contracted with
//! the tangents of every load case.
//!
//! The concatenated fluctuation vector is `Φ = [vec D_0, …, vec D_{n−1}, σ̃ʸ]`
//! with the row-major `vec` of [`crate::voigt::flatten`]. A linearized quantity
//! `q ≈ q⁽⁰⁾ + g·Φ` then has `Var(q) = gᵀ ⟨Φ ⊗ Φ⟩ g`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::SamplingError;
use crate::stochastic::{realization_rng, CorrelationSpec, Distribution, ParamRole, Sampler, StochasticParams};
use crate::voigt::{flatten, outer4, Flat36, FluctuationBasis, Tensor4, VoigtMatrix};

/// Minimum sample count accepted by [`estimate_moments`].
pub const MIN_MOMENT_SAMPLES: usize = 10_000;

/// Samples per independently seeded shard in [`estimate_moments`].
const SHARD: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `⟨D_j ⊗ D_j⟩`, one per elasticity source.
    pub dd: Vec<Tensor4>,
    /// `⟨(σ̃ʸ)²⟩`; zero without a yield source.
    pub yy: f64,
    /// `⟨σ̃ʸ D_j⟩`, one per elasticity source; empty without a yield source.
    pub yd: Vec<VoigtMatrix>,
    /// Number of scalar (yield) sources: 0 or 1.
    pub n_scalar: usize,
    /// Samples behind the estimate; 0 for closed-form sets.
    pub n_samples: usize,
}

/// Sampling diagnostics returned alongside an estimated [`MomentSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    /// Empirical `⟨D_j⟩` of the estimation run.
    pub mean_d: Vec<VoigtMatrix>,
    /// Empirical entry-wise standard deviation of `D_j`.
    pub std_d: Vec<VoigtMatrix>,
    pub rejections: usize,
}

impl MomentSet {
    pub fn zeros(n_elastic: usize, n_scalar: usize) -> Self {
        Self {
            dd: vec![Tensor4::zeros(); n_elastic],
            yy: 0.0,
            yd: vec![VoigtMatrix::zeros(); if n_scalar > 0 { n_elastic } else { 0 }],
            n_scalar,
            n_samples: 0,
        }
    }

    pub fn n_elastic(&self) -> usize {
        self.dd.len()
    }

    /// Length of the concatenated fluctuation vector `Φ`.
    pub fn dim(&self) -> usize {
        36 * self.n_elastic() + self.n_scalar
    }

    pub fn is_zero(&self) -> bool {
        self.yy == 0.0
            && self.dd.iter().all(|t| t.iter().all(|v| *v == 0.0))
            && self.yd.iter().all(|t| t.iter().all(|v| *v == 0.0))
    }

    /// `gᵀ ⟨Φ ⊗ Φ⟩ g` from the dense blocks, `g` laid out like `Φ`.
    pub fn variance(&self, g: &[f64]) -> f64 {
        assert_eq!(g.len(), self.dim(), "gradient length does not match the moment set");
        let mut var = 0.0;
        let gy = if self.n_scalar > 0 { g[36 * self.n_elastic()] } else { 0.0 };
        for (j, dd) in self.dd.iter().enumerate() {
            let gj = Flat36::from_column_slice(&g[36 * j..36 * (j + 1)]);
            var += gj.dot(&(dd * gj));
            if self.n_scalar > 0 {
                var += 2.0 * gj.dot(&flatten(&self.yd[j])) * gy;
            }
        }
        var + gy * gy * self.yy
    }

    /// The full `⟨Φ ⊗ Φ⟩` as a dense matrix.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        let ne = self.n_elastic();
        let mut c = DMatrix::zeros(n, n);
        for (j, dd) in self.dd.iter().enumerate() {
            c.view_mut((36 * j, 36 * j), (36, 36)).copy_from(dd);
        }
        if self.n_scalar > 0 {
            let y = 36 * ne;
            c[(y, y)] = self.yy;
            for (j, yd) in self.yd.iter().enumerate() {
                let v = flatten(yd);
                for k in 0..36 {
                    c[(36 * j + k, y)] = v[k];
                    c[(y, 36 * j + k)] = v[k];
                }
            }
        }
        c
    }

    /// Low-rank factor of the joint covariance for fast repeated contractions.
    pub fn factor(&self) -> CovarianceFactor {
        CovarianceFactor::new(&self.joint_covariance())
    }

    /// Writes the flat CSV form: one row per tensor entry.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tensor", "source", "i", "j", "k", "l", "value"])?;
        let n = self.n_samples.to_string();
        out.write_record(["n_samples", "", "", "", "", "", n.as_str()])?;
        out.write_record(["n_scalar", "", "", "", "", "", self.n_scalar.to_string().as_str()])?;
        for (s, dd) in self.dd.iter().enumerate() {
            for r in 0..36 {
                for c in 0..36 {
                    out.write_record(&[
                        "dd".to_string(),
                        s.to_string(),
                        (r / 6).to_string(),
                        (r % 6).to_string(),
                        (c / 6).to_string(),
                        (c % 6).to_string(),
                        dd[(r, c)].to_string(),
                    ])?;
                }
            }
        }
        if self.n_scalar > 0 {
            out.write_record(["yy", "", "", "", "", "", self.yy.to_string().as_str()])?;
            for (s, yd) in self.yd.iter().enumerate() {
                for a in 0..6 {
                    for b in 0..6 {
                        out.write_record(&[
                            "yd".to_string(),
                            s.to_string(),
                            a.to_string(),
                            b.to_string(),
                            String::new(),
                            String::new(),
                            yd[(a, b)].to_string(),
                        ])?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut set = MomentSet::zeros(0, 0);
        let bad = |msg: String| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, msg));
        for rec in rdr.records() {
            let rec = rec?;
            let idx = |k: usize| -> Result<usize, csv::Error> {
                rec[k].parse::<usize>().map_err(|e| bad(format!("column {k}: {e}")))
            };
            let value: f64 = rec[6].parse().map_err(|e| bad(format!("value `{}`: {e}", &rec[6])))?;
            match &rec[0] {
                "n_samples" => set.n_samples = value as usize,
                "n_scalar" => set.n_scalar = value as usize,
                "yy" => set.yy = value,
                "dd" => {
                    let s = idx(1)?;
                    if set.dd.len() <= s {
                        set.dd.resize(s + 1, Tensor4::zeros());
                    }
                    set.dd[s][(6 * idx(2)? + idx(3)?, 6 * idx(4)? + idx(5)?)] = value;
                }
                "yd" => {
                    let s = idx(1)?;
                    if set.yd.len() <= s {
                        set.yd.resize(s + 1, VoigtMatrix::zeros());
                    }
                    set.yd[s][(idx(2)?, idx(3)?)] = value;
                }
                other => return Err(bad(format!("unknown tensor tag `{other}`"))),
            }
        }
        Ok(set)
    }
}

/// `C ≈ L Lᵀ` with `L` of rank equal to the number of significant eigenvalues.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    /// `Lᵀ`, one row per retained eigenpair.
    lt: DMatrix<f64>,
}

impl CovarianceFactor {
    pub fn new(c: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(c.clone());
        let max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let keep: Vec<usize> =
            (0..eig.eigenvalues.len()).filter(|&k| max > 0.0 && eig.eigenvalues[k] > 1e-13 * max).collect();
        let mut lt = DMatrix::zeros(keep.len(), c.nrows());
        for (row, &k) in keep.iter().enumerate() {
            let s = eig.eigenvalues[k].sqrt();
            for i in 0..c.nrows() {
                lt[(row, i)] = s * eig.eigenvectors[(i, k)];
            }
        }
        Self { lt }
    }

    pub fn rank(&self) -> usize {
        self.lt.nrows()
    }

    pub fn dim(&self) -> usize {
        self.lt.ncols()
    }

    /// `‖Lᵀ g‖²`.
    pub fn variance(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.dim());
        let g = DVector::from_column_slice(g);
        (&self.lt * g).norm_squared()
    }
}

/// Empirical moments from `n_samples` parameter draws.
pub fn estimate_moments(
    params: &StochasticParams,
    correlation: &CorrelationSpec,
    n_samples: usize,
    base_seed: u64,
) -> Result<(MomentSet, EstimationReport), SamplingError> {
    if n_samples < MIN_MOMENT_SAMPLES {
        return Err(SamplingError::TooFewSamples { min: MIN_MOMENT_SAMPLES, got: n_samples });
    }
    params.check_source_coupling(correlation)?;
    let sampler = Sampler::new(params, correlation)?;
    let ne = params.n_elastic_sources();
    let ny = usize::from(params.has_yield());

    #[derive(Clone)]
    struct Sums {
        dd: Vec<Tensor4>,
        d: Vec<Flat36>,
        d2: Vec<Flat36>,
        yy: f64,
        yd: Vec<Flat36>,
        rejections: usize,
    }
    let zero = Sums {
        dd: vec![Tensor4::zeros(); ne],
        d: vec![Flat36::zeros(); ne],
        d2: vec![Flat36::zeros(); ne],
        yy: 0.0,
        yd: vec![Flat36::zeros(); ne],
        rejections: 0,
    };

    let n_shards = n_samples.div_ceil(SHARD);
    let mut total = zero.clone();
    // Shards are seeded by index and merged in index order, so the result does
    // not depend on how they are scheduled.
    for shard in 0..n_shards {
        let count = SHARD.min(n_samples - shard * SHARD);
        let mut rng = realization_rng(base_seed, shard as u64);
        let mut s = zero.clone();
        for _ in 0..count {
            let (r, rej) = sampler.sample(&mut rng)?;
            s.rejections += rej;
            let y = r.scalar_fluctuations(params).first().copied().unwrap_or(0.0);
            for (j, d) in r.elastic_fluctuations(params).iter().enumerate() {
                let v = flatten(d);
                s.dd[j].ger(1.0, &v, &v, 1.0);
                s.d[j] += v;
                s.d2[j] += v.component_mul(&v);
                if ny > 0 {
                    s.yd[j] += y * v;
                }
            }
            s.yy += y * y;
        }
        for j in 0..ne {
            total.dd[j] += s.dd[j];
            total.d[j] += s.d[j];
            total.d2[j] += s.d2[j];
            total.yd[j] += s.yd[j];
        }
        total.yy += s.yy;
        total.rejections += s.rejections;
    }

    let nf = n_samples as f64;
    let unflat = |v: &Flat36| VoigtMatrix::from_fn(|a, b| v[6 * a + b]);
    let set = MomentSet {
        dd: total.dd.iter().map(|t| t / nf).collect(),
        yy: if ny > 0 { total.yy / nf } else { 0.0 },
        yd: if ny > 0 { total.yd.iter().map(|v| unflat(&(v / nf))).collect() } else { Vec::new() },
        n_scalar: ny,
        n_samples,
    };
    let mean_d: Vec<VoigtMatrix> = total.d.iter().map(|v| unflat(&(v / nf))).collect();
    let std_d = total
        .d2
        .iter()
        .zip(&total.d)
        .map(|(sq, s)| unflat(&Flat36::from_fn(|k, _| (sq[k] / nf - (s[k] / nf).powi(2)).max(0.0).sqrt())))
        .collect();
    Ok((set, EstimationReport { mean_d, std_d, rejections: total.rejections }))
}

/// Closed-form moments for normally distributed parameters.
///
/// Since `D_j = Σ_p φ_p J_p` over the Lamé scalars of source `j`,
/// `⟨D_j ⊗ D_j⟩ = Σ_{p,q} Cov(φ_p, φ_q) J_p ⊗ J_q`.
pub fn analytic_gaussian_moments(
    params: &StochasticParams,
    correlation: &CorrelationSpec,
) -> Result<MomentSet, SamplingError> {
    if let Some((_, s)) = params.scalars.iter().find(|(_, s)| s.distribution != Distribution::Normal) {
        return Err(SamplingError::UnsupportedDistribution(format!("{:?}", s.distribution).to_lowercase()));
    }
    correlation.validate(params.len())?;
    params.check_source_coupling(correlation)?;
    let basis = FluctuationBasis::new();
    let basis_of = |role: ParamRole| match role {
        ParamRole::Lambda(_) => Some(basis.j_lambda),
        ParamRole::Mu(_) => Some(basis.j_mu),
        ParamRole::YieldLimit => None,
    };
    let cov = |p: usize, q: usize| correlation.coefficient(p, q) * params.scalars[p].1.std * params.scalars[q].1.std;

    let ne = params.n_elastic_sources();
    let y = params.index_of(ParamRole::YieldLimit);
    let mut set = MomentSet::zeros(ne, usize::from(y.is_some()));
    for p in 0..params.len() {
        let Some(jp) = basis_of(params.scalars[p].0) else { continue };
        let src = params.source_of(p).expect("Lamé scalar has a source");
        for q in 0..params.len() {
            if params.source_of(q) != Some(src) {
                continue;
            }
            let jq = basis_of(params.scalars[q].0).expect("Lamé scalar has a basis");
            set.dd[src] += cov(p, q) * outer4(&jp, &jq);
        }
        if let Some(y) = y {
            set.yd[src] += cov(y, p) * jp;
        }
    }
    if let Some(y) = y {
        set.yy = cov(y, y);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::FluctuatingScalar;
    use crate::voigt::unflatten;

    fn lame(std_l: f64, std_m: f64) -> StochasticParams {
        StochasticParams::new(&[(FluctuatingScalar::normal(12e9, std_l), FluctuatingScalar::normal(8e9, std_m))], None)
    }

    #[test]
    fn zero_std_gives_zero_moments() {
        let p = lame(0.0, 0.0);
        assert!(analytic_gaussian_moments(&p, &CorrelationSpec::Independent).unwrap().is_zero());
        let (est, _) = estimate_moments(&p, &CorrelationSpec::Independent, MIN_MOMENT_SAMPLES, 1).unwrap();
        assert!(est.is_zero());
    }

    #[test]
    fn analytic_values() {
        let p = lame(1.8e9, 1.2e9);
        let ind = analytic_gaussian_moments(&p, &CorrelationSpec::Independent).unwrap();
        // Var(λ + 2μ) = 1.8² + 4·1.2² GPa²
        assert!((ind.dd[0][(0, 0)] - 9.0e18).abs() < 1e4);
        let dep = analytic_gaussian_moments(&p, &CorrelationSpec::FullyDependent).unwrap();
        assert!((dep.dd[0][(0, 0)] - 17.64e18).abs() < 1e4);
        // shear entry only sees μ
        assert!((ind.dd[0][(21, 21)] - 1.44e18).abs() < 1e4);
    }

    #[test]
    fn too_few_samples_rejected() {
        let err = estimate_moments(&lame(1.0, 1.0), &CorrelationSpec::Independent, 10, 0).unwrap_err();
        assert!(matches!(err, SamplingError::TooFewSamples { .. }));
    }

    #[test]
    fn uniform_not_supported_analytically() {
        let mut p = lame(1.8e9, 1.2e9);
        p.scalars[0].1.distribution = Distribution::Uniform;
        assert!(matches!(
            analytic_gaussian_moments(&p, &CorrelationSpec::Independent),
            Err(SamplingError::UnsupportedDistribution(_))
        ));
    }

    #[test]
    fn variance_matches_dense_joint_form_and_factor() {
        let p = StochasticParams::new(
            &[(FluctuatingScalar::relative(12e9, 0.1), FluctuatingScalar::relative(8e9, 0.1))],
            Some(FluctuatingScalar::relative(50e6, 0.2)),
        );
        let m = analytic_gaussian_moments(&p, &CorrelationSpec::FullyDependent).unwrap();
        let c = m.joint_covariance();
        let f = m.factor();
        assert!(f.rank() <= 3);
        let g: Vec<f64> = (0..m.dim()).map(|k| ((k * 7919) % 13) as f64 * 1e-9 - 5e-9).collect();
        let gv = DVector::from_column_slice(&g);
        let dense = gv.dot(&(&c * &gv));
        assert!((m.variance(&g) - dense).abs() <= 1e-12 * dense.abs());
        assert!((f.variance(&g) - dense).abs() <= 1e-9 * dense.abs());
    }

    #[test]
    fn estimate_matches_yield_coupling() {
        let p = StochasticParams::new(
            &[(FluctuatingScalar::relative(12e9, 0.1), FluctuatingScalar::relative(8e9, 0.1))],
            Some(FluctuatingScalar::relative(50e6, 0.2)),
        );
        let (ind, _) = estimate_moments(&p, &CorrelationSpec::Independent, 200_000, 3).unwrap();
        // independent yield limit: ⟨σ̃ʸ D⟩ ≈ 0 within 3 standard errors
        let se = (0.2 * 50e6) * (0.1 * 12e9 + 0.2 * 8e9) / (200_000f64).sqrt();
        assert!(ind.yd[0].iter().all(|v| v.abs() < 3.0 * se), "{:?}", ind.yd[0]);
        let (dep, _) = estimate_moments(&p, &CorrelationSpec::FullyDependent, 200_000, 3).unwrap();
        let exact = analytic_gaussian_moments(&p, &CorrelationSpec::FullyDependent).unwrap();
        assert!((dep.yd[0][(0, 0)] / exact.yd[0][(0, 0)] - 1.0).abs() < 0.02);
        assert!((dep.yy / exact.yy - 1.0).abs() < 0.02);
    }

    #[test]
    fn csv_roundtrip() {
        let p = StochasticParams::new(
            &[(FluctuatingScalar::relative(12e9, 0.1), FluctuatingScalar::relative(8e9, 0.1))],
            Some(FluctuatingScalar::relative(50e6, 0.2)),
        );
        let mut m = analytic_gaussian_moments(&p, &CorrelationSpec::FullyDependent).unwrap();
        m.n_samples = 12345;
        m.dd[0][(3, 17)] = std::f64::consts::PI * 1e17;
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = MomentSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn dd_has_pair_symmetry() {
        let p = lame(1.8e9, 1.2e9);
        let (m, _) = estimate_moments(&p, &CorrelationSpec::Independent, 20_000, 9).unwrap();
        let t = &m.dd[0];
        assert_eq!(*t, t.transpose());
        let a = unflatten(&Flat36::from_fn(|k, _| (k as f64).sin()));
        let sym = a + a.transpose();
        assert!(crate::voigt::double_contract(&sym, t) >= 0.0);
    }
}
