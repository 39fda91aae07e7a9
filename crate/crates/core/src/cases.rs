//! Reference material-point cases: parameter sets, load paths and time grids
//! for the three models, as used by the examples, the acceptance suite and
//! the files in `configs/`.

use std::path::PathBuf;

use crate::config::{
    ModelSpec, RunConfig, Solver, VerifySettings, DEFAULT_FD_STEP, DEFAULT_FROZEN_SAMPLES, DEFAULT_MC_N,
    DEFAULT_MOMENT_SAMPLES, DEFAULT_SNAPSHOTS,
};
use crate::engine::TimeGrid;
use crate::load::LoadCase;
use crate::models::PhaseModel;
use crate::stochastic::{CorrelationSpec, FluctuatingScalar, StochasticParams};
use crate::voigt::VoigtVector;

/// Transformation viscosities of the phase case, Pa·s.
pub const PHASE_VISCOSITIES: [f64; 2] = [0.2e9, 2e9];
/// Flow viscosities of the viscoplastic case, Pa·s.
pub const VISCOPLASTIC_VISCOSITIES: [f64; 3] = [20e9, 80e9, 200e9];

const X: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
const XY: [f64; 6] = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DamageLoad {
    /// Uniaxial strain growing at 2e-4 /s.
    Monotone,
    /// Uniaxial strain `0.0165·sin(2π·0.05·t)`.
    Harmonic,
}

fn base(
    model: ModelSpec,
    params: StochasticParams,
    correlation: CorrelationSpec,
    load: LoadCase,
    grid: TimeGrid,
) -> RunConfig {
    RunConfig {
        model,
        params,
        correlation,
        load,
        grid,
        solver: Solver::Both,
        seed: 0,
        mc_n: DEFAULT_MC_N,
        moment_samples: DEFAULT_MOMENT_SAMPLES,
        workers: None,
        output_dir: PathBuf::from("out"),
        output_every: 1,
        verify: VerifySettings {
            fd_step: DEFAULT_FD_STEP,
            frozen_samples: DEFAULT_FROZEN_SAMPLES,
            snapshots: DEFAULT_SNAPSHOTS,
            fault_tangent_scale: 1.0,
        },
    }
}

/// Viscous damage: λ = 12 GPa, μ = 8 GPa with 15 % spread, η = 10 MPa·s,
/// 100 s at Δt = 5 ms.
pub fn damage(load: DamageLoad) -> RunConfig {
    let rel = |m| FluctuatingScalar::relative(m, 0.15);
    let load = match load {
        DamageLoad::Monotone => LoadCase::Proportional { direction: X, rate: 2e-4 },
        DamageLoad::Harmonic => LoadCase::Harmonic { direction: X, amplitude: 0.0165, frequency: 0.05 },
    };
    base(
        ModelSpec::Damage { eta: 10e6 },
        StochasticParams::new(&[(rel(12e9), rel(8e9))], None),
        CorrelationSpec::Independent,
        load,
        TimeGrid::new(100.0, 5e-3).expect("valid grid"),
    )
}

/// Two-phase transformation: austenite (70/30 GPa, no transformation strain)
/// and martensite (35/15 GPa, `0.055·[1, −0.45, −0.45, 0, 0, 0]`), 10 % spread,
/// 99 % austenite initially, strain ramp to 8 % at 0.4 %/s and back, 40 s at
/// Δt = 0.4 ms. The wall magnitude is calibrated.
pub fn phase(viscosity: f64) -> RunConfig {
    let rel = |m| FluctuatingScalar::relative(m, 0.1);
    let params = StochasticParams::new(&[(rel(70e9), rel(30e9)), (rel(35e9), rel(15e9))], None);
    let transformation = [VoigtVector::zeros(), VoigtVector::from([0.055, -0.02475, -0.02475, 0.0, 0.0, 0.0])];
    let stiffness = [params.mean_stiffness(0), params.mean_stiffness(1)];
    let initial_fraction = 0.99;
    let wall = PhaseModel::calibrated_wall(stiffness, transformation, initial_fraction);
    base(
        ModelSpec::Phase { transformation, viscosity, wall, initial_fraction },
        params,
        CorrelationSpec::Independent,
        LoadCase::TriangularCycle { direction: X, amplitude: 0.08, period: 40.0, two_sided: false },
        TimeGrid::new(40.0, 4e-4).expect("valid grid"),
    )
}

/// Elasto-viscoplasticity: λ = 12 GPa, μ = 8 GPa (10 % spread), yield limit
/// 50 MPa (20 % spread), symmetric shear cycle of γxy with amplitude 1 % over
/// 100 s at Δt = 0.05 s.
pub fn viscoplastic(eta: f64, dependent: bool) -> RunConfig {
    let rel = |m, r| FluctuatingScalar::relative(m, r);
    base(
        ModelSpec::Viscoplastic { eta },
        StochasticParams::new(&[(rel(12e9, 0.1), rel(8e9, 0.1))], Some(rel(50e6, 0.2))),
        if dependent { CorrelationSpec::FullyDependent } else { CorrelationSpec::Independent },
        LoadCase::TriangularCycle { direction: XY, amplitude: 0.01, period: 100.0, two_sided: true },
        TimeGrid::new(100.0, 0.05).expect("valid grid"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;
    use std::path::Path;

    fn shipped(name: &str) -> RunConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let mut c = load_config(&path).unwrap();
        c.output_dir = PathBuf::from("out");
        c.output_every = 1;
        c
    }

    fn close(a: &RunConfig, b: &RunConfig) {
        // Decimal literals in the files may differ from `rel·mean` in the last bit.
        assert_eq!(a.model, b.model);
        assert_eq!(a.load, b.load);
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.correlation, b.correlation);
        for ((ra, sa), (rb, sb)) in a.params.scalars.iter().zip(&b.params.scalars) {
            assert_eq!(ra, rb);
            assert_eq!(sa.mean, sb.mean);
            assert!((sa.std - sb.std).abs() <= 1e-12 * sa.std);
        }
    }

    #[test]
    fn shipped_configs_match_cases() {
        close(&shipped("damage.toml"), &damage(DamageLoad::Monotone));
        close(&shipped("damage_harmonic.toml"), &damage(DamageLoad::Harmonic));
        close(&shipped("phase_low_viscosity.toml"), &phase(PHASE_VISCOSITIES[0]));
        close(&shipped("phase_high_viscosity.toml"), &phase(PHASE_VISCOSITIES[1]));
        close(&shipped("viscoplastic_dependent.toml"), &viscoplastic(VISCOPLASTIC_VISCOSITIES[0], true));
        close(&shipped("viscoplastic_independent.toml"), &viscoplastic(VISCOPLASTIC_VISCOSITIES[0], false));
    }
}
