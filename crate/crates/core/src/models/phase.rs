//! Viscous two-phase transformation.
//!
//! Volume fractions `λ_i = (1 + e^{−χ_i})⁻¹` are driven by the free energy
//!
//! ```text
//! Ψ = ½ (ε − η̄)·Ē·(ε − η̄) + Λ Σ_i [λ_i (1 − λ_i)]⁻²
//! Ē = (Σ λ_i E_i⁻¹)⁻¹,   η̄ = Σ λ_i η_i
//! ```
//!
//! and evolve as `χ̇_i = (η λ'_i)⁻¹ (−F_i + (1/n) Σ_k F_k)` with `F_i = ∂Ψ/∂λ_i`.
//! The Lagrange term keeps `Σ λ_i = 1`. With two phases and `χ_2 = −χ_1` the
//! rates are exactly antisymmetric, which the implementation exploits.
//!
//! Every phase stiffness is a fluctuation source: `E_j = E_j⁽⁰⁾ + D_j`.

use crate::engine::{ExtendedModel, LinQuantity};
use crate::error::ModelError;
use crate::voigt::{flatten, VoigtMatrix, VoigtVector};

pub const N_PHASES: usize = 2;
const N: usize = N_PHASES;

/// Volume fractions closer than this to 0 or 1 are rejected.
pub const DEGENERACY_TOL: f64 = 1e-12;

pub type Chi = [f64; N];
/// `I[i][j] = ∂χ_i/∂D_j`.
pub type PhaseTangents = [[VoigtMatrix; N]; N];

/// `λ(χ) = (1 + e^{−χ})⁻¹`.
pub fn lambda_of_chi(chi: f64) -> f64 {
    1.0 / (1.0 + (-chi).exp())
}

/// `∂λ/∂χ = λ(χ)·λ(−χ)`, bitwise even in `χ`.
pub fn dlambda_dchi(chi: f64) -> f64 {
    lambda_of_chi(chi) * lambda_of_chi(-chi)
}

pub fn chi_of_lambda(lambda: f64) -> f64 {
    (lambda / (1.0 - lambda)).ln()
}

/// Wall-term derivative per unit `Λ`: `∂/∂λ [λ(1−λ)]⁻² = 2(2λ−1)/[λ(1−λ)]³`.
fn wall_shape(lambda: f64) -> f64 {
    let q = lambda * (1.0 - lambda);
    2.0 * (2.0 * lambda - 1.0) / (q * q * q)
}

/// Second derivative per unit `Λ`.
fn wall_shape_prime(lambda: f64) -> f64 {
    let q = lambda * (1.0 - lambda);
    let r = 2.0 * lambda - 1.0;
    2.0 * (2.0 / (q * q * q) + 3.0 * r * r / (q * q * q * q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseModel {
    pub stiffness: [VoigtMatrix; N],
    /// Transformation strains `η_i` (engineering shear).
    pub transformation: [VoigtVector; N],
    /// Transformation viscosity in Pa·s.
    pub viscosity: f64,
    /// Potential-wall magnitude `Λ` in J/m³.
    pub wall: f64,
    /// Initial volume fraction of phase 1.
    pub initial_fraction: f64,
    compliance: [VoigtMatrix; N],
}

/// Quantities shared by the rate, tangent and stress evaluations.
#[derive(Debug, Clone)]
struct Eval {
    lam: [f64; N],
    dlam: [f64; N],
    ebar: VoigtMatrix,
    sigma: VoigtVector,
    /// `b_k = E_k⁻¹ σ`.
    b: [VoigtVector; N],
    /// `F_i = ∂Ψ/∂λ_i`.
    f: [f64; N],
}

fn invert(m: &VoigtMatrix) -> VoigtMatrix {
    // A singular matrix becomes NaN and is caught by the engine's finiteness check.
    m.try_inverse().unwrap_or_else(|| VoigtMatrix::from_element(f64::NAN))
}

impl PhaseModel {
    pub fn new(
        stiffness: [VoigtMatrix; N],
        transformation: [VoigtVector; N],
        viscosity: f64,
        wall: f64,
        initial_fraction: f64,
    ) -> Self {
        let compliance = [invert(&stiffness[0]), invert(&stiffness[1])];
        Self { stiffness, transformation, viscosity, wall, initial_fraction, compliance }
    }

    /// `Λ` for which `χ̇ = 0` at zero strain and the initial volume fraction.
    ///
    /// The driving-force difference is linear in `Λ`, so this is a closed form.
    pub fn calibrated_wall(
        stiffness: [VoigtMatrix; N],
        transformation: [VoigtVector; N],
        initial_fraction: f64,
    ) -> f64 {
        let m = Self::new(stiffness, transformation, 1.0, 0.0, initial_fraction);
        let chi = m.initial_state();
        let Ok(e) = m.evaluate(&chi, &VoigtVector::zeros()) else { return 0.0 };
        let denom = wall_shape(e.lam[0]) - wall_shape(e.lam[1]);
        if denom.abs() < f64::MIN_POSITIVE {
            return 0.0;
        }
        -(e.f[0] - e.f[1]) / denom
    }

    pub fn fractions(&self, chi: &Chi) -> [f64; N] {
        [lambda_of_chi(chi[0]), lambda_of_chi(chi[1])]
    }

    /// Harmonic-mean stiffness `Ē = (Σ λ_i E_i⁻¹)⁻¹`.
    pub fn effective_stiffness(&self, lam: &[f64; N]) -> VoigtMatrix {
        let a: VoigtMatrix = (0..N).map(|k| self.compliance[k] * lam[k]).sum();
        invert(&a)
    }

    fn evaluate(&self, chi: &Chi, strain: &VoigtVector) -> Result<Eval, ModelError> {
        let lam = self.fractions(chi);
        for (phase, &l) in lam.iter().enumerate() {
            if !(l > DEGENERACY_TOL && 1.0 - l > DEGENERACY_TOL) {
                return Err(ModelError::DegeneratePhase { phase, fraction: l });
            }
        }
        let dlam = [dlambda_dchi(chi[0]), dlambda_dchi(chi[1])];
        let ebar = self.effective_stiffness(&lam);
        let etabar: VoigtVector = (0..N).map(|k| self.transformation[k] * lam[k]).sum();
        let sigma = ebar * (strain - etabar);
        let b = [self.compliance[0] * sigma, self.compliance[1] * sigma];
        let f = std::array::from_fn(|i| {
            -self.transformation[i].dot(&sigma) - 0.5 * sigma.dot(&b[i]) + self.wall * wall_shape(lam[i])
        });
        Ok(Eval { lam, dlam, ebar, sigma, b, f })
    }

    /// Driving forces `∂Ψ/∂λ_i`.
    pub fn driving_forces(&self, chi: &Chi, strain: &VoigtVector) -> Result<[f64; N], ModelError> {
        Ok(self.evaluate(chi, strain)?.f)
    }

    /// Elastic and wall parts of the driving forces, separately.
    pub fn driving_force_parts(&self, chi: &Chi, strain: &VoigtVector) -> Result<([f64; N], [f64; N]), ModelError> {
        let e = self.evaluate(chi, strain)?;
        let wall: [f64; N] = std::array::from_fn(|i| self.wall * wall_shape(e.lam[i]));
        Ok((std::array::from_fn(|i| e.f[i] - wall[i]), wall))
    }

    fn antisymmetric(chi: &Chi) -> bool {
        chi[1] == -chi[0]
    }

    /// `χ̇` from the general n-phase expression.
    pub fn rates_general(&self, chi: &Chi, strain: &VoigtVector) -> Result<Chi, ModelError> {
        let e = self.evaluate(chi, strain)?;
        Ok(self.rates_from(&e))
    }

    fn rates_from(&self, e: &Eval) -> Chi {
        let fbar = e.f.iter().sum::<f64>() / N as f64;
        std::array::from_fn(|i| (fbar - e.f[i]) / (self.viscosity * e.dlam[i]))
    }

    fn rates_shortcut(&self, e: &Eval) -> Chi {
        let g = 0.5 * (e.f[1] - e.f[0]) / (self.viscosity * e.dlam[0]);
        [g, -g]
    }

    /// `∂F_i/∂χ_k`, the Jacobian of the rates, and `v_k = Ē(b_k + η_k)`.
    fn jacobian(&self, e: &Eval, g: &Chi) -> ([[f64; N]; N], [VoigtVector; N]) {
        let v: [VoigtVector; N] = std::array::from_fn(|k| e.ebar * (e.b[k] + self.transformation[k]));
        let dfdchi: [[f64; N]; N] = std::array::from_fn(|i| {
            std::array::from_fn(|k| {
                let mut d = (self.transformation[i] + e.b[i]).dot(&v[k]);
                if i == k {
                    d += self.wall * wall_shape_prime(e.lam[i]);
                }
                d * e.dlam[k]
            })
        });
        let j = std::array::from_fn(|i| {
            std::array::from_fn(|k| {
                let mean = (0..N).map(|m| dfdchi[m][k]).sum::<f64>() / N as f64;
                let mut jik = (mean - dfdchi[i][k]) / (self.viscosity * e.dlam[i]);
                if i == k {
                    jik -= (1.0 - 2.0 * e.lam[i]) * g[i];
                }
                jik
            })
        });
        (j, v)
    }

    /// Explicit parameter derivative `∂F_i/∂D_j` at fixed volume fractions.
    fn explicit_force_derivative(&self, e: &Eval, v: &[VoigtVector; N]) -> [[VoigtMatrix; N]; N] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let c = self.compliance[j] * v[i] * e.lam[j];
                let mut m = -(c * e.b[j].transpose());
                if i == j {
                    m += e.b[j] * e.b[j].transpose() * 0.5;
                }
                m
            })
        })
    }

    fn tangent_rows(&self, e: &Eval, g: &Chi, tan: &PhaseTangents, rows: usize) -> PhaseTangents {
        let (j, v) = self.jacobian(e, g);
        let dfdd = self.explicit_force_derivative(e, &v);
        let mut out = [[VoigtMatrix::zeros(); N]; N];
        for i in 0..rows {
            let k_i = 1.0 / (self.viscosity * e.dlam[i]);
            for src in 0..N {
                let mean: VoigtMatrix = (0..N).map(|m| dfdd[m][src]).sum::<VoigtMatrix>() / N as f64;
                let mut r = (mean - dfdd[i][src]) * k_i;
                for k in 0..N {
                    r += tan[k][src] * j[i][k];
                }
                out[i][src] = r;
            }
        }
        out
    }

    /// Tangent rates from the general n-phase expression, every row computed.
    pub fn tangent_rates_general(
        &self,
        chi: &Chi,
        tan: &PhaseTangents,
        strain: &VoigtVector,
    ) -> Result<PhaseTangents, ModelError> {
        let e = self.evaluate(chi, strain)?;
        let g = self.rates_from(&e);
        Ok(self.tangent_rows(&e, &g, tan, N))
    }

    /// Stress tangent per source: row `α` of `T_j` holds `vec ∂σ_α/∂D_j`.
    fn stress_tangents(&self, e: &Eval, tan: &PhaseTangents) -> [nalgebra::SMatrix<f64, 6, 36>; N] {
        let v: [VoigtVector; N] = std::array::from_fn(|k| e.ebar * (e.b[k] + self.transformation[k]));
        std::array::from_fn(|j| {
            let m = e.ebar * self.compliance[j] * e.lam[j];
            let mut t = nalgebra::SMatrix::<f64, 6, 36>::zeros();
            for a in 0..6 {
                for s in 0..6 {
                    for u in 0..6 {
                        t[(a, 6 * s + u)] = m[(a, s)] * e.b[j][u];
                    }
                }
            }
            for k in 0..N {
                let ik = flatten(&tan[k][j]);
                t -= (v[k] * e.dlam[k]) * ik.transpose();
            }
            t
        })
    }
}

impl ExtendedModel for PhaseModel {
    type State = Chi;
    type Tangents = PhaseTangents;

    fn name(&self) -> &'static str {
        "phase"
    }

    fn iv_names(&self) -> Vec<String> {
        ["chi1", "chi2", "lambda1", "lambda2"].iter().map(|s| s.to_string()).collect()
    }

    fn n_elastic_sources(&self) -> usize {
        N
    }

    fn n_scalar_sources(&self) -> usize {
        0
    }

    fn initial_state(&self) -> Chi {
        let c = chi_of_lambda(self.initial_fraction);
        [c, -c]
    }

    fn initial_tangents(&self) -> PhaseTangents {
        [[VoigtMatrix::zeros(); N]; N]
    }

    fn det_rhs(&self, chi: &Chi, strain: &VoigtVector) -> Result<Chi, ModelError> {
        let e = self.evaluate(chi, strain)?;
        Ok(if Self::antisymmetric(chi) { self.rates_shortcut(&e) } else { self.rates_from(&e) })
    }

    fn tangent_rhs(&self, chi: &Chi, tan: &PhaseTangents, strain: &VoigtVector) -> Result<PhaseTangents, ModelError> {
        let e = self.evaluate(chi, strain)?;
        let tan_antisym = (0..N).all(|j| tan[1][j] == -tan[0][j]);
        if Self::antisymmetric(chi) && tan_antisym {
            let g = self.rates_shortcut(&e);
            let mut out = self.tangent_rows(&e, &g, tan, 1);
            for j in 0..N {
                out[1][j] = -out[0][j];
            }
            Ok(out)
        } else {
            let g = self.rates_from(&e);
            Ok(self.tangent_rows(&e, &g, tan, N))
        }
    }

    fn iv_values(&self, chi: &Chi) -> Vec<f64> {
        let lam = self.fractions(chi);
        vec![chi[0], chi[1], lam[0], lam[1]]
    }

    fn stress(&self, chi: &Chi, strain: &VoigtVector) -> Result<VoigtVector, ModelError> {
        Ok(self.evaluate(chi, strain)?.sigma)
    }

    fn linearize_iv(&self, chi: &Chi, tan: &PhaseTangents) -> Vec<LinQuantity> {
        let lam = self.fractions(chi);
        let mut out = Vec::with_capacity(2 * N);
        for (i, row) in tan.iter().enumerate() {
            let grad = row.iter().flat_map(|m| flatten(m).iter().copied().collect::<Vec<_>>()).collect();
            out.push(LinQuantity { value: chi[i], grad });
        }
        for i in 0..N {
            let dl = dlambda_dchi(chi[i]);
            let grad = out[i].grad.iter().map(|g| g * dl).collect();
            out.push(LinQuantity { value: lam[i], grad });
        }
        out
    }

    fn linearize_stress(
        &self,
        chi: &Chi,
        tan: &PhaseTangents,
        strain: &VoigtVector,
    ) -> Result<Vec<LinQuantity>, ModelError> {
        let e = self.evaluate(chi, strain)?;
        let t = self.stress_tangents(&e, tan);
        Ok((0..6)
            .map(|a| {
                let grad = t.iter().flat_map(|tj| tj.row(a).iter().copied().collect::<Vec<_>>()).collect();
                LinQuantity { value: e.sigma[a], grad }
            })
            .collect())
    }

    fn with_fluctuation(&self, d: &[VoigtMatrix], _y: &[f64]) -> Self {
        Self::new(
            [self.stiffness[0] + d[0], self.stiffness[1] + d[1]],
            self.transformation,
            self.viscosity,
            self.wall,
            self.initial_fraction,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{integrate_extended, TimeGrid};
    use crate::load::LoadCase;
    use crate::voigt::isotropic_stiffness;
    use proptest::prelude::*;

    fn eta2() -> VoigtVector {
        VoigtVector::from([0.055, -0.02475, -0.02475, 0.0, 0.0, 0.0])
    }

    fn model(viscosity: f64) -> PhaseModel {
        let e = [isotropic_stiffness(70e9, 30e9), isotropic_stiffness(35e9, 15e9)];
        let t = [VoigtVector::zeros(), eta2()];
        PhaseModel::new(e, t, viscosity, PhaseModel::calibrated_wall(e, t, 0.99), 0.99)
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(lambda_of_chi(0.0), 0.5);
        assert!((lambda_of_chi(5.0) - 0.9933).abs() < 5e-5);
        assert!((chi_of_lambda(0.99) - 99f64.ln()).abs() < 1e-12);
        assert_eq!(dlambda_dchi(2.3), dlambda_dchi(-2.3));
    }

    #[test]
    fn identical_phases_balance() {
        let e = isotropic_stiffness(70e9, 30e9);
        let m = PhaseModel::new([e, e], [VoigtVector::zeros(); 2], 1e9, 3.0, 0.5);
        let eps = VoigtVector::from([0.01, -0.002, 0.0, 0.003, 0.0, 0.0]);
        let f = m.driving_forces(&[0.0, 0.0], &eps).unwrap();
        assert_eq!(f[0], f[1]);
        assert_eq!(m.det_rhs(&[0.0, 0.0], &eps).unwrap(), [0.0, 0.0]);
        let f0 = m.driving_forces(&[0.0, 0.0], &VoigtVector::zeros()).unwrap();
        assert_eq!(f0, [0.0, 0.0]);
        let zero = m.tangent_rhs(&[0.0, 0.0], &m.initial_tangents(), &VoigtVector::zeros()).unwrap();
        assert!(zero.iter().flatten().all(|t| t.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn harmonic_mean_shear_entry() {
        let m = model(1e9);
        let ebar = m.effective_stiffness(&[0.5, 0.5]);
        let expected = 1.0 / (0.5 / 30e9 + 0.5 / 15e9);
        assert!((ebar[(3, 3)] / expected - 1.0).abs() < 1e-12);
        let near = m.effective_stiffness(&[1.0 - 1e-9, 1e-9]);
        let e1 = isotropic_stiffness(70e9, 30e9);
        assert!((near - e1).abs().max() / e1.abs().max() <= 1e-6);
    }

    #[test]
    fn calibrated_wall_is_stationary_and_small() {
        let m = model(0.2e9);
        assert!(m.wall > 0.0);
        let rate = m.det_rhs(&m.initial_state(), &VoigtVector::zeros()).unwrap();
        assert!(rate[0].abs() < 1e-9, "{rate:?}");
        // the wall stays below 1% of the elastic driving force away from the bounds
        for k in 0..=90 {
            let l = 0.05 + 0.01 * k as f64;
            let c = chi_of_lambda(l);
            for ex in [0.0, 0.02, 0.04, 0.08] {
                let eps = VoigtVector::from([ex, 0.0, 0.0, 0.0, 0.0, 0.0]);
                let (el, wall) = m.driving_force_parts(&[c, -c], &eps).unwrap();
                let scale = el[0].abs().max(el[1].abs());
                assert!(wall[0].abs() < 0.01 * scale && wall[1].abs() < 0.01 * scale, "λ = {l}, ε = {ex}");
            }
        }
    }

    #[test]
    fn wall_repels_from_bounds() {
        for l in [0.01, 0.2, 0.49, 0.51, 0.8, 0.99] {
            assert_eq!(wall_shape(l).signum(), (2.0 * l - 1.0).signum());
        }
    }

    #[test]
    fn degenerate_fraction_rejected() {
        let m = model(1e9);
        let err = m.det_rhs(&[40.0, -40.0], &VoigtVector::zeros()).unwrap_err();
        assert!(matches!(err, ModelError::DegeneratePhase { .. }));
    }

    #[test]
    fn shortcut_matches_general_path() {
        let m = model(0.2e9);
        let g = TimeGrid::new(10.0, 4e-3).unwrap();
        let load = LoadCase::TriangularCycle {
            direction: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            amplitude: 0.08,
            period: 40.0,
            two_sided: false,
        };
        let traj = integrate_extended(&m, &g.strains(&load).unwrap(), g).unwrap();
        for n in (0..=g.n_steps).step_by(250) {
            let (chi, tan, eps) = (&traj.states[n], &traj.tangents[n], &traj.strains[n]);
            let fast = m.det_rhs(chi, eps).unwrap();
            let slow = m.rates_general(chi, eps).unwrap();
            assert!((fast[0] - slow[0]).abs() <= 1e-12 * slow[0].abs().max(1e-300));
            assert!((fast[1] - slow[1]).abs() <= 1e-12 * slow[1].abs().max(1e-300));
            let tf = m.tangent_rhs(chi, tan, eps).unwrap();
            let ts = m.tangent_rates_general(chi, tan, eps).unwrap();
            let scale = ts.iter().flatten().map(|t| t.abs().max()).fold(0.0, f64::max);
            for (a, b) in tf.iter().flatten().zip(ts.iter().flatten()) {
                assert!((a - b).abs().max() <= 1e-10 * scale);
            }
        }
        for (chi, tan) in traj.states.iter().zip(&traj.tangents) {
            assert_eq!(chi[1], -chi[0]);
            let lam = m.fractions(chi);
            assert!((lam[0] + lam[1] - 1.0).abs() <= 1e-12);
            for j in 0..N {
                assert_eq!(tan[1][j], -tan[0][j]);
            }
        }
        assert!(traj.states[g.n_steps][0] < traj.states[0][0]);
    }

    #[test]
    fn stress_tangent_explicit_part() {
        // at I = 0 the stress tangent is dσ = λ_j Ē E_j⁻¹ D_j E_j⁻¹ σ; compare with a central difference
        let m = model(0.2e9);
        let chi = [1.3, -1.3];
        let eps = VoigtVector::from([0.03, -0.004, 0.001, 0.002, 0.0, 0.001]);
        let zero = m.initial_tangents();
        let lin = m.linearize_stress(&chi, &zero, &eps).unwrap();
        let dir = VoigtMatrix::from_fn(|a, b| (((a + 1) * (b + 2)) % 5) as f64 - 2.0);
        let dir = (dir + dir.transpose()) * 1e4;
        for j in 0..N {
            let mut d = [VoigtMatrix::zeros(); N];
            d[j] = dir;
            let sp = m.with_fluctuation(&d, &[]).stress(&chi, &eps).unwrap();
            d[j] = -dir;
            let sm = m.with_fluctuation(&d, &[]).stress(&chi, &eps).unwrap();
            let fd = (sp - sm) / 2.0;
            let v = flatten(&dir);
            for a in 0..6 {
                let tangent: f64 = (0..36).map(|k| lin[a].grad[36 * j + k] * v[k]).sum();
                assert!((tangent - fd[a]).abs() <= 1e-6 * fd.abs().max(), "j = {j}, α = {a}");
            }
        }
    }

    proptest! {
        #[test]
        fn logistic_symmetry(chi in -30.0..30.0f64) {
            prop_assert!((lambda_of_chi(-chi) - (1.0 - lambda_of_chi(chi))).abs() <= 1e-15);
        }

        #[test]
        fn antisymmetric_rates(chi in -4.0..4.0f64, e in proptest::array::uniform6(-0.05..0.05f64)) {
            let m = model(0.2e9);
            let r = m.det_rhs(&[chi, -chi], &VoigtVector::from(e)).unwrap();
            prop_assert_eq!(r[0] + r[1], 0.0);
        }
    }
}
