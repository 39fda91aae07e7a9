//! Voigt-notation tensor algebra.
//!
//! Stress vectors are ordered `(σx, σy, σz, σyz, σxz, σxy)`. Strain vectors use
//! the same ordering with engineering shear (`γ = 2ε`), so `½ εᵀ E ε` with the
//! standard isotropic 6×6 stiffness equals the tensor contraction `½ ε:𝔼:ε`.
//!
//! Rank-4 moment tensors over 6×6 matrices are stored as 36×36 matrices indexed
//! by the row-major flattening `6a + b` of the matrix entry `(a, b)`.

use nalgebra::{SMatrix, SVector};

pub type VoigtVector = SVector<f64, 6>;
pub type VoigtMatrix = SMatrix<f64, 6, 6>;
/// Row-major flattening of a [`VoigtMatrix`].
pub type Flat36 = SVector<f64, 36>;
/// Rank-4 tensor over Voigt matrices, `T[(6a+b, 6c+d)] = T_abcd`.
pub type Tensor4 = SMatrix<f64, 36, 36>;
/// Rank-3 tensor `I[α][s][t]` stored as `m[(α, 6s+t)]`.
pub type Tensor3 = SMatrix<f64, 6, 36>;

/// Basis matrices spanning isotropic stiffness: `E(λ, μ) = λ·Jλ + μ·Jμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationBasis {
    pub j_lambda: VoigtMatrix,
    pub j_mu: VoigtMatrix,
}

impl FluctuationBasis {
    pub fn new() -> Self {
        let mut j_lambda = VoigtMatrix::zeros();
        for a in 0..3 {
            for b in 0..3 {
                j_lambda[(a, b)] = 1.0;
            }
        }
        let j_mu = VoigtMatrix::from_diagonal(&VoigtVector::from([2.0, 2.0, 2.0, 1.0, 1.0, 1.0]));
        Self { j_lambda, j_mu }
    }
}

impl Default for FluctuationBasis {
    fn default() -> Self {
        Self::new()
    }
}

/// Isotropic stiffness in Voigt notation (engineering shear strains).
pub fn isotropic_stiffness(lambda: f64, mu: f64) -> VoigtMatrix {
    let mut m = VoigtMatrix::zeros();
    for a in 0..3 {
        for b in 0..3 {
            m[(a, b)] = lambda;
        }
        m[(a, a)] = lambda + 2.0 * mu;
        m[(a + 3, a + 3)] = mu;
    }
    m
}

/// The deviator operator `S` with `dev(σ) = S·σ`.
pub fn deviator_operator() -> VoigtMatrix {
    let mut s = VoigtMatrix::identity();
    for a in 0..3 {
        for b in 0..3 {
            s[(a, b)] -= 1.0 / 3.0;
        }
    }
    s
}

pub fn deviator(sigma: &VoigtVector) -> VoigtVector {
    let p = (sigma[0] + sigma[1] + sigma[2]) / 3.0;
    VoigtVector::from([sigma[0] - p, sigma[1] - p, sigma[2] - p, sigma[3], sigma[4], sigma[5]])
}

/// Metric weights turning Voigt stress components into the tensor inner product.
pub const STRESS_METRIC: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];

/// Tensor inner product `a:b` of two stress-role Voigt vectors.
pub fn stress_inner(a: &VoigtVector, b: &VoigtVector) -> f64 {
    (0..6).map(|k| STRESS_METRIC[k] * a[k] * b[k]).sum()
}

/// Frobenius norm of a stress-role Voigt vector; shear entries count twice.
pub fn stress_norm(s: &VoigtVector) -> f64 {
    stress_inner(s, s).sqrt()
}

/// `½ εᵀ E ε`.
pub fn quad_form(eps: &VoigtVector, e: &VoigtMatrix) -> f64 {
    0.5 * eps.dot(&(e * eps))
}

pub fn flatten(m: &VoigtMatrix) -> Flat36 {
    Flat36::from_fn(|k, _| m[(k / 6, k % 6)])
}

pub fn unflatten(v: &Flat36) -> VoigtMatrix {
    VoigtMatrix::from_fn(|a, b| v[6 * a + b])
}

/// `A : T : A` for a rank-4 tensor `T`.
pub fn double_contract(a: &VoigtMatrix, t: &Tensor4) -> f64 {
    let v = flatten(a);
    v.dot(&(t * v))
}

/// Outer product `A ⊗ B` of two Voigt matrices.
pub fn outer4(a: &VoigtMatrix, b: &VoigtMatrix) -> Tensor4 {
    flatten(a) * flatten(b).transpose()
}

/// Largest absolute entry, used as a scale for relative comparisons.
pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Random-direction helper: symmetrises `m` and scales it to unit Frobenius norm.
pub fn normalized_symmetric(m: &VoigtMatrix) -> VoigtMatrix {
    let s = 0.5 * (m + m.transpose());
    let n = s.norm();
    if n > 0.0 {
        s / n
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vec6() -> impl Strategy<Value = VoigtVector> {
        proptest::array::uniform6(-1e8..1e8f64).prop_map(VoigtVector::from)
    }

    #[test]
    fn stiffness_entries() {
        let e = isotropic_stiffness(12e9, 8e9);
        assert_eq!(e[(0, 0)], 28e9);
        assert_eq!(e[(3, 3)], 8e9);
        assert_eq!(e[(0, 1)], 12e9);
        assert_eq!(e, e.transpose());
    }

    #[test]
    fn basis_identities() {
        let basis = FluctuationBasis::new();
        assert_eq!(isotropic_stiffness(0.0, 1.0), basis.j_mu);
        assert_eq!(isotropic_stiffness(1.0, 0.0), basis.j_lambda);
        let (l, m) = (3.7e9, -1.25e9);
        assert_eq!(isotropic_stiffness(l, m), l * basis.j_lambda + m * basis.j_mu);
    }

    #[test]
    fn deviator_examples() {
        let z = deviator(&VoigtVector::from([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]));
        assert!(z.norm() < 1e-15);
        let d = deviator(&VoigtVector::from([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let expected = VoigtVector::from([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(d, expected, epsilon = 1e-15);
        let shear = VoigtVector::from([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(deviator(&shear), shear);
        let sigma = VoigtVector::from([1.0, -2.0, 5.0, 0.3, 0.2, 0.1]);
        assert_relative_eq!(deviator(&sigma), deviator_operator() * sigma, epsilon = 1e-14);
    }

    #[test]
    fn norm_examples() {
        let s = VoigtVector::from([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(stress_norm(&s), 2f64.sqrt());
        let d = VoigtVector::from([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(stress_norm(&d), (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(stress_norm(&VoigtVector::zeros()), 0.0);
    }

    #[test]
    fn quad_form_examples() {
        let e = isotropic_stiffness(12e9, 8e9);
        assert_eq!(quad_form(&VoigtVector::zeros(), &e), 0.0);
        let eps = VoigtVector::from([1e-3, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(quad_form(&eps, &e), 14e3, max_relative = 1e-14);
        let eps = VoigtVector::from([1e-3, -2e-4, 5e-4, 1e-4, 0.0, 3e-4]);
        assert_eq!(quad_form(&eps, &e), quad_form(&(-eps), &e));
    }

    #[test]
    fn flatten_roundtrip_and_contraction() {
        let a = VoigtMatrix::from_fn(|i, j| (i * 6 + j) as f64);
        assert_eq!(unflatten(&flatten(&a)), a);
        assert_eq!(flatten(&a)[6 * 2 + 5], a[(2, 5)]);
        let t = outer4(&a, &a);
        assert_relative_eq!(double_contract(&a, &t), a.norm_squared().powi(2), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn deviator_idempotent(s in vec6()) {
            let once = deviator(&s);
            let twice = deviator(&once);
            let scale = once.norm().max(1e-300);
            prop_assert!((twice - once).norm() <= 1e-12 * scale.max(s.norm()));
        }

        #[test]
        fn deviator_traceless(s in vec6()) {
            let d = deviator(&s);
            prop_assert!((d[0] + d[1] + d[2]).abs() <= 1e-12 * s.norm().max(1e-300));
        }

        #[test]
        fn deviator_norm_bounded(s in vec6()) {
            prop_assert!(stress_norm(&deviator(&s)) <= stress_norm(&s) * (1.0 + 1e-12));
        }

        #[test]
        fn stiffness_linear(l1 in -10_000_000_000i64..10_000_000_000, m1 in -10_000_000_000i64..10_000_000_000,
                            l2 in -10_000_000_000i64..10_000_000_000, m2 in -10_000_000_000i64..10_000_000_000) {
            // integer-valued moduli keep every sum exact in f64
            let (l1, m1, l2, m2) = (l1 as f64, m1 as f64, l2 as f64, m2 as f64);
            let sum = isotropic_stiffness(l1, m1) + isotropic_stiffness(l2, m2);
            let joint = isotropic_stiffness(l1 + l2, m1 + m2);
            prop_assert_eq!(sum, joint);
        }
    }
}
