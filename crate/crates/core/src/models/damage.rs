//! Viscous damage.
//!
//! Free energy `Ψ = e^{−d}·½ ε·E·ε`; the damage variable evolves as
//! `ḋ = (1/η)·e^{−d}·Ψ₀(ε)` with the undamaged energy `Ψ₀ = ½ ε·E·ε`.
//! The single fluctuation source is the elasticity tensor `E = E⁽⁰⁾ + D`.

use crate::engine::{ExtendedModel, LinQuantity};
use crate::error::ModelError;
use crate::voigt::{flatten, quad_form, Tensor3, VoigtMatrix, VoigtVector};

#[derive(Debug, Clone, PartialEq)]
pub struct DamageModel {
    /// Stiffness `E⁽⁰⁾`.
    pub e0: VoigtMatrix,
    /// Damage viscosity in Pa·s.
    pub eta: f64,
}

impl DamageModel {
    pub fn new(e0: VoigtMatrix, eta: f64) -> Self {
        Self { e0, eta }
    }

    /// `ḋ` at damage `d`.
    pub fn damage_rate(&self, d: f64, strain: &VoigtVector) -> f64 {
        (-d).exp() * quad_form(strain, &self.e0) / self.eta
    }

    /// `İ = (1/2η)·e^{−d}·(−I·(ε·E⁽⁰⁾·ε) + ε⊗ε)`.
    pub fn tangent_rate(&self, d: f64, i: &VoigtMatrix, strain: &VoigtVector) -> VoigtMatrix {
        let k = 0.5 * (-d).exp() / self.eta;
        let energy2 = strain.dot(&(self.e0 * strain));
        (strain * strain.transpose() - i * energy2) * k
    }

    /// `T_{α,st} = e^{−d}(δ_αs ε_t − I_st (E⁽⁰⁾ε)_α)`, row `α` holding `vec T_α`.
    pub fn stress_tangent(&self, d: f64, i: &VoigtMatrix, strain: &VoigtVector) -> Tensor3 {
        let f = (-d).exp();
        let sigma_u = self.e0 * strain;
        let vi = flatten(i);
        let mut t = Tensor3::zeros();
        for a in 0..6 {
            for k in 0..36 {
                t[(a, k)] = -vi[k] * sigma_u[a];
            }
            for c in 0..6 {
                t[(a, 6 * a + c)] += strain[c];
            }
        }
        t * f
    }
}

impl ExtendedModel for DamageModel {
    type State = f64;
    type Tangents = VoigtMatrix;

    fn name(&self) -> &'static str {
        "damage"
    }

    fn iv_names(&self) -> Vec<String> {
        vec!["d".into()]
    }

    fn n_elastic_sources(&self) -> usize {
        1
    }

    fn n_scalar_sources(&self) -> usize {
        0
    }

    fn initial_state(&self) -> f64 {
        0.0
    }

    fn initial_tangents(&self) -> VoigtMatrix {
        VoigtMatrix::zeros()
    }

    fn det_rhs(&self, d: &f64, strain: &VoigtVector) -> Result<f64, ModelError> {
        Ok(self.damage_rate(*d, strain))
    }

    fn tangent_rhs(&self, d: &f64, i: &VoigtMatrix, strain: &VoigtVector) -> Result<VoigtMatrix, ModelError> {
        Ok(self.tangent_rate(*d, i, strain))
    }

    fn iv_values(&self, d: &f64) -> Vec<f64> {
        vec![*d]
    }

    fn stress(&self, d: &f64, strain: &VoigtVector) -> Result<VoigtVector, ModelError> {
        Ok(self.e0 * strain * (-d).exp())
    }

    fn linearize_iv(&self, d: &f64, i: &VoigtMatrix) -> Vec<LinQuantity> {
        vec![LinQuantity { value: *d, grad: flatten(i).as_slice().to_vec() }]
    }

    fn linearize_stress(&self, d: &f64, i: &VoigtMatrix, strain: &VoigtVector) -> Result<Vec<LinQuantity>, ModelError> {
        let sigma = self.stress(d, strain)?;
        let t = self.stress_tangent(*d, i, strain);
        Ok((0..6).map(|a| LinQuantity { value: sigma[a], grad: t.row(a).iter().copied().collect() }).collect())
    }

    fn with_fluctuation(&self, d: &[VoigtMatrix], _y: &[f64]) -> Self {
        Self { e0: self.e0 + d[0], eta: self.eta }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{integrate_extended, postprocess, TimeGrid};
    use crate::load::LoadCase;
    use crate::moments::analytic_gaussian_moments;
    use crate::stochastic::{CorrelationSpec, FluctuatingScalar, StochasticParams};
    use crate::voigt::isotropic_stiffness;
    use proptest::prelude::*;

    fn model() -> DamageModel {
        DamageModel::new(isotropic_stiffness(12e9, 8e9), 10e6)
    }

    fn ex(v: f64) -> VoigtVector {
        VoigtVector::from([v, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn rate_examples() {
        let m = model();
        assert_eq!(m.damage_rate(0.0, &VoigtVector::zeros()), 0.0);
        assert!((m.damage_rate(0.0, &ex(1e-3)) - 1.4e-3).abs() < 1e-15);
        let r1 = m.damage_rate(0.7, &ex(3e-4));
        let r2 = m.damage_rate(0.7, &ex(6e-4));
        assert!((r2 / r1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_rate_examples() {
        let m = model();
        assert_eq!(m.tangent_rate(0.3, &VoigtMatrix::identity(), &VoigtVector::zeros()), VoigtMatrix::zeros());
        let r = m.tangent_rate(0.0, &VoigtMatrix::zeros(), &ex(1e-3));
        let mut expected = VoigtMatrix::zeros();
        expected[(0, 0)] = 1e-6 / (2.0 * 10e6);
        assert!((r - expected).abs().max() < 1e-25);
    }

    #[test]
    fn stress_tangent_matches_definition() {
        // dσ = e^{−d}(D ε − (I:D) E⁽⁰⁾ ε) for any direction D
        let m = model();
        let eps = VoigtVector::from([1e-3, -2e-4, 3e-4, 1e-4, -5e-5, 2e-4]);
        let i = VoigtMatrix::from_fn(|a, b| ((a * 7 + b * 3) % 5) as f64 * 1e-11);
        let dd = VoigtMatrix::from_fn(|a, b| ((a + 2 * b) % 7) as f64 * 1e8 - 3e8);
        let d = 0.4;
        let t = m.stress_tangent(d, &i, &eps);
        let expected = (dd * eps - m.e0 * eps * flatten(&i).dot(&flatten(&dd))) * (-d).exp();
        let got = t * flatten(&dd);
        assert!((got - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn initial_stress_variance_is_linear_elastic() {
        // With d = 0, I = 0 the stress is (E⁽⁰⁾ + D)ε, so Var(σx) = Var(λ + 2μ)·εx².
        let m = model();
        let p = StochasticParams::new(
            &[(FluctuatingScalar::normal(12e9, 1.8e9), FluctuatingScalar::normal(8e9, 1.2e9))],
            None,
        );
        let mom = analytic_gaussian_moments(&p, &CorrelationSpec::Independent).unwrap();
        let eps = ex(1e-3);
        let lin = m.linearize_stress(&0.0, &VoigtMatrix::zeros(), &eps).unwrap();
        let var = mom.variance(&lin[0].grad);
        assert!((var / (9.0e18 * 1e-6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_invariants() {
        let m = model();
        let g = TimeGrid::new(100.0, 0.05).unwrap();
        let load = LoadCase::Harmonic { direction: [1.0, 0.3, 0.0, 0.0, 0.0, 0.2], amplitude: 0.01, frequency: 0.05 };
        let traj = integrate_extended(&m, &g.strains(&load).unwrap(), g).unwrap();
        for w in traj.states.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for i in &traj.tangents {
            assert!((i - i.transpose()).abs().max() <= 1e-12 * i.abs().max());
        }
        let p = StochasticParams::new(
            &[(FluctuatingScalar::deterministic(12e9), FluctuatingScalar::deterministic(8e9))],
            None,
        );
        let mom = analytic_gaussian_moments(&p, &CorrelationSpec::Independent).unwrap();
        let (s, _) = postprocess(&m, &traj, &mom).unwrap();
        assert!(s.var.iter().all(|v| *v == 0.0));
        assert_eq!(s.mean_series(0), traj.states);
    }

    proptest! {
        #[test]
        fn rate_nonnegative(e in proptest::array::uniform6(-0.05..0.05f64), d in 0.0..10.0f64) {
            prop_assert!(model().damage_rate(d, &VoigtVector::from(e)) >= 0.0);
        }

        #[test]
        fn stress_decays_with_damage(e in proptest::array::uniform6(-0.05..0.05f64), d in 0.0..5.0f64, dd in 1e-3..1.0f64) {
            let m = model();
            let eps = VoigtVector::from(e);
            prop_assume!(eps.norm() > 1e-6);
            let s0 = m.stress(&d, &eps).unwrap().norm();
            let s1 = m.stress(&(d + dd), &eps).unwrap().norm();
            prop_assert!(s1 < s0);
        }
    }
}
