//! Elasto-viscoplasticity with overstress flow.
//!
//! `σ = E(ε − εᵛᵖ)` and `ε̇ᵛᵖ = (1/η)·(‖dev σ‖ − σʸ)₊ · dev σ / ‖dev σ‖`,
//! with the tensor (Frobenius) norm. The flow direction is applied to the Voigt
//! components as they stand. Fluctuation sources: the stiffness `E = E⁽⁰⁾ + D`
//! and the yield limit `σʸ = σʸ⁽⁰⁾ + σ̃ʸ`.

use crate::engine::{ExtendedModel, LinQuantity};
use crate::error::ModelError;
use crate::voigt::{deviator_operator, Tensor3, VoigtMatrix, VoigtVector, STRESS_METRIC};

/// Deviatoric norms at or below this fraction of the yield limit give no flow.
const ZERO_NORM_GUARD: f64 = 1e-12;

/// `(I^E, I^Y)`: `I^E[α][6s+t] = ∂εᵛᵖ_α/∂D_st`, `I^Y[α] = ∂εᵛᵖ_α/∂σ̃ʸ`.
pub type VpTangents = (Tensor3, VoigtVector);

#[derive(Debug, Clone, PartialEq)]
pub struct ViscoplasticModel {
    pub e0: VoigtMatrix,
    pub yield_limit: f64,
    /// Viscosity in Pa·s.
    pub eta: f64,
    dev: VoigtMatrix,
    /// `S·E⁽⁰⁾`.
    dev_e0: VoigtMatrix,
}

/// Deviatoric stress, its norm and the overstress at one state.
struct Flow {
    elastic_strain: VoigtVector,
    s: VoigtVector,
    norm: f64,
    over: f64,
}

impl ViscoplasticModel {
    pub fn new(e0: VoigtMatrix, yield_limit: f64, eta: f64) -> Self {
        let dev = deviator_operator();
        Self { e0, yield_limit, eta, dev, dev_e0: dev * e0 }
    }

    fn flow(&self, evp: &VoigtVector, strain: &VoigtVector) -> Flow {
        let elastic_strain = strain - evp;
        let s = self.dev_e0 * elastic_strain;
        let norm = crate::voigt::stress_norm(&s);
        Flow { elastic_strain, s, norm, over: norm - self.yield_limit }
    }

    fn flowing(&self, f: &Flow) -> bool {
        f.over > 0.0 && f.norm > ZERO_NORM_GUARD * self.yield_limit.abs()
    }

    /// Viscoplastic strain rate.
    pub fn rate(&self, evp: &VoigtVector, strain: &VoigtVector) -> VoigtVector {
        let f = self.flow(evp, strain);
        if !self.flowing(&f) {
            return VoigtVector::zeros();
        }
        f.s * (f.over / (self.eta * f.norm))
    }

    /// Tangent rates. Both vanish outside the flowing regime.
    pub fn tangent_rates(&self, evp: &VoigtVector, tan: &VpTangents, strain: &VoigtVector) -> VpTangents {
        let f = self.flow(evp, strain);
        if !self.flowing(&f) {
            return (Tensor3::zeros(), VoigtVector::zeros());
        }
        let (ie, iy) = tan;
        let n_dir = f.s / f.norm;
        let ms = VoigtVector::from_fn(|k, _| STRESS_METRIC[k] * f.s[k]);
        // d(dev σ)/dD_st = S[:, s]·e_t − S·E⁽⁰⁾·I^E[:, st]
        let mut ds = -(self.dev_e0 * ie);
        for s in 0..6 {
            for t in 0..6 {
                let e_t = f.elastic_strain[t];
                for a in 0..6 {
                    ds[(a, 6 * s + t)] += self.dev[(a, s)] * e_t;
                }
            }
        }
        let dn = (ms.transpose() * ds) / f.norm;
        let k_dir = (1.0 - f.over / f.norm) / self.eta;
        let k_ds = f.over / (f.norm * self.eta);
        let rate_e = n_dir * dn * k_dir + ds * k_ds;

        let ds_y = -(self.dev_e0 * iy);
        let dn_y = ms.dot(&ds_y) / f.norm;
        let rate_y =
            n_dir * ((dn_y - 1.0) / self.eta) + (ds_y / f.norm - n_dir * (dn_y / f.norm)) * (f.over / self.eta);
        (rate_e, rate_y)
    }
}

impl ExtendedModel for ViscoplasticModel {
    type State = VoigtVector;
    type Tangents = VpTangents;

    fn name(&self) -> &'static str {
        "viscoplastic"
    }

    fn iv_names(&self) -> Vec<String> {
        ["evp_xx", "evp_yy", "evp_zz", "evp_yz", "evp_xz", "evp_xy"].iter().map(|s| s.to_string()).collect()
    }

    fn n_elastic_sources(&self) -> usize {
        1
    }

    fn n_scalar_sources(&self) -> usize {
        1
    }

    fn initial_state(&self) -> VoigtVector {
        VoigtVector::zeros()
    }

    fn initial_tangents(&self) -> VpTangents {
        (Tensor3::zeros(), VoigtVector::zeros())
    }

    fn det_rhs(&self, evp: &VoigtVector, strain: &VoigtVector) -> Result<VoigtVector, ModelError> {
        Ok(self.rate(evp, strain))
    }

    fn tangent_rhs(&self, evp: &VoigtVector, tan: &VpTangents, strain: &VoigtVector) -> Result<VpTangents, ModelError> {
        Ok(self.tangent_rates(evp, tan, strain))
    }

    fn iv_values(&self, evp: &VoigtVector) -> Vec<f64> {
        evp.iter().copied().collect()
    }

    fn stress(&self, evp: &VoigtVector, strain: &VoigtVector) -> Result<VoigtVector, ModelError> {
        Ok(self.e0 * (strain - evp))
    }

    fn linearize_iv(&self, evp: &VoigtVector, (ie, iy): &VpTangents) -> Vec<LinQuantity> {
        (0..6)
            .map(|a| {
                let mut grad: Vec<f64> = ie.row(a).iter().copied().collect();
                grad.push(iy[a]);
                LinQuantity { value: evp[a], grad }
            })
            .collect()
    }

    fn linearize_stress(
        &self,
        evp: &VoigtVector,
        (ie, iy): &VpTangents,
        strain: &VoigtVector,
    ) -> Result<Vec<LinQuantity>, ModelError> {
        let e = strain - evp;
        let sigma = self.e0 * e;
        // T^E_α,st = δ_αs e_t − (E⁽⁰⁾ I^E)_α,st,  T^Y = −E⁽⁰⁾ I^Y
        let mut te = -(self.e0 * ie);
        for a in 0..6 {
            for t in 0..6 {
                te[(a, 6 * a + t)] += e[t];
            }
        }
        let ty = -(self.e0 * iy);
        Ok((0..6)
            .map(|a| {
                let mut grad: Vec<f64> = te.row(a).iter().copied().collect();
                grad.push(ty[a]);
                LinQuantity { value: sigma[a], grad }
            })
            .collect())
    }

    fn with_fluctuation(&self, d: &[VoigtMatrix], y: &[f64]) -> Self {
        Self::new(self.e0 + d[0], self.yield_limit + y.first().copied().unwrap_or(0.0), self.eta)
    }

    fn regime(&self, evp: &VoigtVector, strain: &VoigtVector) -> u32 {
        u32::from(self.flowing(&self.flow(evp, strain)))
    }
}
