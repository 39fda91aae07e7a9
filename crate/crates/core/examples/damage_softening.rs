//! Viscous damage under monotone or harmonic uniaxial strain: TSM statistics
//! next to a Monte Carlo reference, with the second-order mean shift that the
//! first-order expansion leaves out.
//!
//! ```text
//! cargo run --release --example damage_softening -- [monotone|harmonic] [mc_n]
//! ```

use std::error::Error;
use std::time::Instant;

use tsm_core::cases::{self, DamageLoad};
use tsm_core::comparison::compare;
use tsm_core::engine::{integrate_extended, postprocess};
use tsm_core::monte_carlo::{run_mc, McOptions};
use tsm_core::pipeline::{effective_workers, moment_set};
use tsm_core::stochastic::Sampler;
use tsm_core::verification::second_order_mean_shift;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let load = match args.next().as_deref() {
        Some("harmonic") => DamageLoad::Harmonic,
        _ => DamageLoad::Monotone,
    };
    let n: usize = args.next().map_or(Ok(1000), |s| s.parse())?;
    let cfg = cases::damage(load);
    let model = cfg.damage_model().expect("damage case");
    let strains = cfg.grid.strains(&cfg.load)?;

    let moments = moment_set(&cfg)?;
    let t0 = Instant::now();
    let traj = integrate_extended(&model, &strains, cfg.grid)?;
    let (tsm, _) = postprocess(&model, &traj, &moments)?;
    let tsm_time = t0.elapsed();

    let sampler = Sampler::new(&cfg.params, &cfg.correlation)?;
    let opts = McOptions { workers: effective_workers(&cfg), ..McOptions::new(n, cfg.seed) };
    let mc = run_mc(&model, &strains, cfg.grid, &sampler, &opts)?;
    let cmp = compare(&tsm, &mc)?;
    let shift = second_order_mean_shift(&model, &strains, cfg.grid, &cfg.params, &cfg.correlation)?;

    println!("damage, {load:?} load, {} steps, MC N = {n}", cfg.grid.n_steps);
    println!("TSM {:.3} s, MC {:.3} s", tsm_time.as_secs_f64(), mc.elapsed.as_secs_f64());
    let (d, sx) = (tsm.index("d").unwrap(), tsm.index("sxx").unwrap());
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12} {:>12} {:>11} {:>11}",
        "t", "d tsm", "d mc", "sd(d) tsm", "sd(d) mc", "sxx tsm", "sxx tsm+2nd", "sxx mc", "sd(sxx) tsm", "sd(sxx) mc"
    );
    for s in (0..=cfg.grid.n_steps).step_by(cfg.grid.n_steps / 10) {
        println!(
            "{:6.1} {:10.4} {:10.4} {:10.4} {:10.4} {:12.4e} {:12.4e} {:12.4e} {:11.4e} {:11.4e}",
            tsm.t[s],
            tsm.mean(s, d),
            mc.mean(s, d),
            tsm.std(s, d),
            mc.std(s, d),
            tsm.mean(s, sx),
            tsm.mean(s, sx) + shift[s][sx],
            mc.mean(s, sx),
            tsm.std(s, sx),
            mc.std(s, sx)
        );
    }
    for name in ["d", "sxx"] {
        let q = cmp.get(name).unwrap();
        println!(
            "{name}: mean within 3 SE at {:.1}% of steps, std at {:.1}%",
            100.0 * q.mean_pass_fraction(|_| true),
            100.0 * q.std_pass_fraction(|_| true)
        );
    }
    let last = cfg.grid.n_steps;
    let peak = (0..=last).map(|s| tsm.std(s, sx)).fold(0.0, f64::max);
    println!("late-time Std(sxx)/max Std(sxx) = {:.3}", tsm.std(last, sx) / peak);
    Ok(())
}
