//! Wall-clock cost of one TSM solve against a single-worker Monte Carlo run
//! of the same load case, for each model. Moment estimation is reported
//! separately because it is done once per material.
//!
//! ```text
//! cargo run --release --example speed_up -- [mc_n]
//! ```

use std::error::Error;

use tsm_core::cases;
use tsm_core::config::{RunConfig, Solver};
use tsm_core::pipeline::run;

fn main() -> Result<(), Box<dyn Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(1000), |s| s.parse())?;
    let out = std::env::temp_dir().join("tsm_speed_up_example");
    let cases: [(&str, RunConfig); 4] = [
        ("damage", cases::damage(cases::DamageLoad::Monotone)),
        ("phase, low viscosity", cases::phase(cases::PHASE_VISCOSITIES[0])),
        ("viscoplastic, dependent", cases::viscoplastic(cases::VISCOPLASTIC_VISCOSITIES[0], true)),
        ("viscoplastic, independent", cases::viscoplastic(cases::VISCOPLASTIC_VISCOSITIES[0], false)),
    ];
    println!("{:>26} {:>8} {:>10} {:>10} {:>9}", "case", "steps", "TSM s", "MC s", "speed-up");
    for (name, mut cfg) in cases {
        cfg.solver = Solver::Both;
        cfg.mc_n = n;
        cfg.workers = Some(1);
        cfg.output_dir = out.clone();
        let report = run(&cfg)?;
        let t = &report.timing;
        println!(
            "{name:>26} {:>8} {:>10.3} {:>10.2} {:>8.1}x   (moments {:.2} s)",
            cfg.grid.n_steps,
            t.tsm_total().as_secs_f64(),
            t.mc.unwrap_or_default().as_secs_f64(),
            t.speed_up().unwrap_or(f64::NAN),
            t.moments.as_secs_f64()
        );
    }
    std::fs::remove_dir_all(&out)?;
    Ok(())
}
