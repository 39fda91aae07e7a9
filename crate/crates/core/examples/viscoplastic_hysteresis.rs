//! Elasto-viscoplastic shear hysteresis with a random yield limit, for
//! dependent or independent elastic and yield fluctuations.
//!
//! ```text
//! cargo run --release --example viscoplastic_hysteresis -- [eta_pa_s] [dependent|independent] [mc_n]
//! ```

use std::error::Error;

use tsm_core::cases;
use tsm_core::comparison::compare;
use tsm_core::engine::{integrate_extended, postprocess};
use tsm_core::monte_carlo::{run_mc, McOptions};
use tsm_core::pipeline::{effective_workers, moment_set};
use tsm_core::stochastic::Sampler;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let eta: f64 = args.next().map_or(Ok(cases::VISCOPLASTIC_VISCOSITIES[0]), |s| s.parse())?;
    let dependent = args.next().as_deref() != Some("independent");
    let n: usize = args.next().map_or(Ok(1000), |s| s.parse())?;
    let cfg = cases::viscoplastic(eta, dependent);
    let model = cfg.viscoplastic_model().expect("viscoplastic case");
    let strains = cfg.grid.strains(&cfg.load)?;

    let traj = integrate_extended(&model, &strains, cfg.grid)?;
    let (tsm, _) = postprocess(&model, &traj, &moment_set(&cfg)?)?;
    let (e, s) = (tsm.index("evp_xy").unwrap(), tsm.index("sxy").unwrap());

    println!("viscoplastic, eta {eta:e} Pa·s, {} parameters", if dependent { "dependent" } else { "independent" });
    println!("{:>6} {:>9} {:>11} {:>11} {:>11} {:>11}", "t", "gamma_xy", "sxy", "sd(sxy)", "evp_xy", "sd(evp_xy)");
    for k in (0..=cfg.grid.n_steps).step_by(cfg.grid.n_steps / 40) {
        println!(
            "{:6.2} {:9.5} {:11.4e} {:11.4e} {:11.4e} {:11.4e}",
            tsm.t[k],
            strains[k][5],
            tsm.mean(k, s),
            tsm.std(k, s),
            tsm.mean(k, e),
            tsm.std(k, e)
        );
    }
    let sd = tsm.std_series(s);
    let first = cfg.grid.n_steps / 100;
    let (min, max) = sd[first..].iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    println!("min/max Std(sxy) after the first 1% of the path: {:.4}", min / max);
    let area: f64 = (1..strains.len())
        .map(|k| 0.5 * (tsm.mean(k, s) + tsm.mean(k - 1, s)) * (strains[k][5] - strains[k - 1][5]))
        .sum();
    println!("dissipated work of the mean loop: {area:.4e} J/m³");

    if n > 0 {
        let sampler = Sampler::new(&cfg.params, &cfg.correlation)?;
        let opts = McOptions { workers: effective_workers(&cfg), ..McOptions::new(n, cfg.seed) };
        let mc = run_mc(&model, &strains, cfg.grid, &sampler, &opts)?;
        let cmp = compare(&tsm, &mc)?;
        for name in ["evp_xy", "sxy"] {
            let q = cmp.get(name).unwrap();
            println!(
                "{name}: mean within 3 SE at {:.1}% of steps, std at {:.1}% (MC N = {n})",
                100.0 * q.mean_pass_fraction(|_| true),
                100.0 * q.std_pass_fraction(|_| true)
            );
        }
    }
    Ok(())
}
