//! Central-difference check of the tangent equations for every model and
//! fluctuation source, and the truncation/round-off trade-off over the step
//! size for the damage model.
//!
//! ```text
//! cargo run --release --example tangent_verification
//! ```

use std::error::Error;

use tsm_core::cases;
use tsm_core::config::RunConfig;
use tsm_core::engine::{integrate_extended, ExtendedModel, TimeGrid};
use tsm_core::pipeline::verify;
use tsm_core::verification::{fd_tangent_check_on, random_direction, Source, FD_TOLERANCE};

fn shortened(mut cfg: RunConfig, t_end: f64) -> RunConfig {
    cfg.grid = TimeGrid::new(t_end, cfg.grid.dt).expect("valid grid");
    cfg.verify.frozen_samples = 100_000;
    cfg.moment_samples = 100_000;
    cfg
}

fn sweep<M: ExtendedModel>(model: &M, cfg: &RunConfig) -> Result<(), Box<dyn Error>> {
    let strains = cfg.grid.strains(&cfg.load)?;
    let traj = integrate_extended(model, &strains, cfg.grid)?;
    let dir = random_direction(1);
    let scale = cfg.params.mean_stiffness(0).norm();
    println!("{:>8} {:>12}", "h/|E0|", "max rel err");
    for k in 2..=12 {
        let rel = 10f64.powi(-k);
        let report = fd_tangent_check_on(model, &traj, Source::Elastic(0), &dir, rel * scale)?;
        println!("{rel:8.0e} {:12.3e}", report.max_rel_err());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    let models = [
        ("damage", shortened(cases::damage(cases::DamageLoad::Monotone), 100.0)),
        ("phase", shortened(cases::phase(cases::PHASE_VISCOSITIES[0]), 40.0)),
        ("viscoplastic", shortened(cases::viscoplastic(cases::VISCOPLASTIC_VISCOSITIES[0], true), 100.0)),
    ];
    for (name, cfg) in &models {
        let report = verify(cfg)?;
        for fd in &report.fd {
            let worst = fd.worst().map_or("-".to_string(), |q| q.name.clone());
            println!(
                "{name:>12} {:?}: h = {:.3e}, max rel err {:.2e} (worst {worst}), {} steps excluded, {}",
                fd.source,
                fd.h,
                fd.max_rel_err(),
                fd.excluded_steps.len(),
                if fd.passed() { "ok" } else { "FAIL" }
            );
        }
    }
    println!("tolerance {FD_TOLERANCE:e}");
    println!("\nstep-size sweep, damage, direction E1:");
    let cfg = &models[0].1;
    sweep(&cfg.damage_model().expect("damage case"), cfg)
}
