//! Frozen-state sampling check for the dependent viscoplastic case: closed
//! form variances from the tangents and moments against variances of the
//! linearized quantities over sampled parameters, with and without the
//! elastic/yield cross moment.
//!
//! ```text
//! cargo run --release --example frozen_state_check -- [samples]
//! ```

use std::error::Error;

use tsm_core::cases;
use tsm_core::engine::{integrate_extended, ExtendedModel};
use tsm_core::pipeline::moment_set;
use tsm_core::stochastic::{derived_seed, Sampler};
use tsm_core::verification::{frozen_state_sampling_check, snapshot_steps};
use tsm_core::voigt::VoigtMatrix;

fn main() -> Result<(), Box<dyn Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(1_000_000), |s| s.parse())?;
    let cfg = cases::viscoplastic(cases::VISCOPLASTIC_VISCOSITIES[0], true);
    let model = cfg.viscoplastic_model().expect("viscoplastic case");
    let strains = cfg.grid.strains(&cfg.load)?;
    let traj = integrate_extended(&model, &strains, cfg.grid)?;
    let moments = moment_set(&cfg)?;
    let sampler = Sampler::new(&cfg.params, &cfg.correlation)?;
    let steps = snapshot_steps(cfg.grid, 5);
    let seed = derived_seed(cfg.seed, 1);

    let full = frozen_state_sampling_check(&model, &traj, &steps, &sampler, &moments, n, seed)?;
    let mut uncoupled = moments.clone();
    uncoupled.yd.iter_mut().for_each(|m| *m = VoigtMatrix::zeros());
    let without = frozen_state_sampling_check(&model, &traj, &steps, &sampler, &uncoupled, n, seed)?;

    println!("{} samples per snapshot; quantities with nonzero variance", full.n_samples);
    println!(
        "{:>6} {:>7} {:>11} {:>11} {:>8} {:>11} {:>8}",
        "t", "q", "sampled", "closed", "rel err", "no cross", "rel err"
    );
    for (a, b) in full.checks.iter().zip(&without.checks) {
        if a.closed_var <= 0.0 || !["evp_xy", "sxy"].contains(&a.name.as_str()) {
            continue;
        }
        println!(
            "{:6.1} {:>7} {:11.4e} {:11.4e} {:7.3}% {:11.4e} {:7.2}%",
            cfg.grid.time(a.step),
            a.name,
            a.sampled_var,
            a.closed_var,
            100.0 * a.rel_var_err(),
            b.closed_var,
            100.0 * (a.sampled_var / b.closed_var - 1.0).abs()
        );
    }
    println!(
        "{} checks ({} quantities at {} snapshots), all within tolerance: {}",
        full.checks.len(),
        model.quantity_names().len(),
        steps.len(),
        full.passed()
    );
    println!("dropping the cross moment passes: {}", without.passed());
    Ok(())
}
