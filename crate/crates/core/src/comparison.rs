//! Step-by-step comparison of TSM statistics against the Monte Carlo reference.

use crate::engine::StatSeries;
use crate::error::McError;
use crate::monte_carlo::{mc_standard_error, McStats};

/// Allowed deviation in units of the Monte Carlo standard error.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Absolute allowance relative to the largest mean magnitude of a quantity;
/// covers steps where both solvers report zero spread up to rounding.
pub const ROUNDOFF_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityComparison {
    pub name: String,
    /// `TSM − MC` per step.
    pub d_mean: Vec<f64>,
    pub d_std: Vec<f64>,
    pub se_mean: Vec<f64>,
    pub se_std: Vec<f64>,
    pub floor: f64,
}

impl QuantityComparison {
    pub fn mean_ok(&self, step: usize) -> bool {
        self.d_mean[step].abs() <= SE_MULTIPLIER * self.se_mean[step] + self.floor
    }

    pub fn std_ok(&self, step: usize) -> bool {
        self.d_std[step].abs() <= SE_MULTIPLIER * self.se_std[step] + self.floor
    }

    pub fn n_points(&self) -> usize {
        self.d_mean.len()
    }

    /// Fraction of steps passing, over the steps for which `include` holds.
    pub fn mean_pass_fraction(&self, include: impl Fn(usize) -> bool) -> f64 {
        fraction(self.n_points(), |s| self.mean_ok(s), include)
    }

    pub fn std_pass_fraction(&self, include: impl Fn(usize) -> bool) -> f64 {
        fraction(self.n_points(), |s| self.std_ok(s), include)
    }

    /// Largest `|Δ|/SE` of the mean and of the standard deviation.
    pub fn max_z(&self) -> (f64, f64) {
        let z = |d: &[f64], se: &[f64]| {
            d.iter().zip(se).filter(|(d, _)| d.abs() > self.floor).map(|(d, s)| d.abs() / s).fold(0.0, f64::max)
        };
        (z(&self.d_mean, &self.se_mean), z(&self.d_std, &self.se_std))
    }
}

fn fraction(n: usize, ok: impl Fn(usize) -> bool, include: impl Fn(usize) -> bool) -> f64 {
    let (mut pass, mut total) = (0usize, 0usize);
    for s in (0..n).filter(|&s| include(s)) {
        total += 1;
        pass += usize::from(ok(s));
    }
    if total == 0 {
        1.0
    } else {
        pass as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub t: Vec<f64>,
    pub quantities: Vec<QuantityComparison>,
}

impl Comparison {
    pub fn get(&self, name: &str) -> Option<&QuantityComparison> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

pub fn compare(tsm: &StatSeries, mc: &McStats) -> Result<Comparison, McError> {
    if tsm.names != mc.names || tsm.t.len() != mc.t.len() {
        return Err(McError::Setup("TSM and Monte Carlo outputs have different layouts".into()));
    }
    let se = mc_standard_error(mc)?;
    let nq = tsm.names.len();
    let np = tsm.t.len();
    let quantities = (0..nq)
        .map(|q| {
            let idx = |s: usize| s * nq + q;
            let scale = (0..np).map(|s| tsm.mean(s, q).abs().max(mc.mean(s, q).abs())).fold(0.0, f64::max);
            QuantityComparison {
                name: tsm.names[q].clone(),
                d_mean: (0..np).map(|s| tsm.mean(s, q) - mc.mean(s, q)).collect(),
                d_std: (0..np).map(|s| tsm.std(s, q) - mc.std(s, q)).collect(),
                se_mean: (0..np).map(|s| se.mean[idx(s)]).collect(),
                se_std: (0..np).map(|s| se.std[idx(s)]).collect(),
                floor: ROUNDOFF_FLOOR * scale,
            }
        })
        .collect();
    Ok(Comparison { t: tsm.t.clone(), quantities })
}

/// Steps where `std` exceeds `factor` times its median, widened by `dilation`
/// steps on each side. Marks narrow spikes of a standard-deviation series.
pub fn spike_mask(std: &[f64], factor: f64, dilation: usize) -> Vec<bool> {
    let n = std.len();
    let mut sorted: Vec<f64> = std.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n == 0 { 0.0 } else { sorted[n / 2] };
    let mut mask = vec![false; n];
    for (k, v) in std.iter().enumerate() {
        if *v > factor * median {
            mask[k.saturating_sub(dilation)..(k + dilation + 1).min(n)].iter_mut().for_each(|m| *m = true);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn series(mean: Vec<f64>, var: Vec<f64>) -> StatSeries {
        StatSeries { names: vec!["x".into()], n_iv: 1, t: (0..mean.len()).map(|k| k as f64).collect(), mean, var }
    }

    fn mc(mean: Vec<f64>, var: Vec<f64>, n: u64) -> McStats {
        McStats {
            names: vec!["x".into()],
            t: (0..mean.len()).map(|k| k as f64).collect(),
            n,
            seed: 0,
            mean,
            var,
            rejections: 0,
            samples: vec![],
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn brackets() {
        // SE(mean) = √(4/100) = 0.2, SE(std) = 2/√198
        let c = compare(
            &series(vec![1.0, 1.7, 0.0], vec![4.0, 4.0, 0.0]),
            &mc(vec![1.5, 1.0, 0.0], vec![4.0, 4.0, 0.0], 100),
        )
        .unwrap();
        let q = &c.quantities[0];
        assert!(q.mean_ok(0));
        assert!(!q.mean_ok(1));
        assert!(q.mean_ok(2) && q.std_ok(2));
        assert!((q.mean_pass_fraction(|_| true) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(q.mean_pass_fraction(|s| s != 1), 1.0);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let mut m = mc(vec![0.0], vec![0.0], 10);
        m.names = vec!["y".into()];
        assert!(compare(&series(vec![0.0], vec![0.0]), &m).is_err());
    }

    #[test]
    fn spike_mask_marks_dilated_peaks() {
        let mut std = vec![1.0; 20];
        std[10] = 5.0;
        let m = spike_mask(&std, 3.0, 2);
        let marked: Vec<usize> = (0..20).filter(|&k| m[k]).collect();
        assert_eq!(marked, vec![8, 9, 10, 11, 12]);
        assert!(spike_mask(&[], 3.0, 2).is_empty());
        assert!(spike_mask(&[0.0; 5], 3.0, 2).iter().all(|m| !m));
    }
}
