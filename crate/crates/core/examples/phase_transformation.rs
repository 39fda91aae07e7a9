//! Austenite/martensite transformation under a strain ramp and unload: volume
//! fractions, the narrow spikes in Std(χ), stress hysteresis and, optionally,
//! a Monte Carlo check.
//!
//! ```text
//! cargo run --release --example phase_transformation -- [viscosity_pa_s] [mc_n]
//! ```
//! `mc_n = 0` (the default) skips Monte Carlo.

use std::error::Error;
use std::time::Instant;

use tsm_core::cases;
use tsm_core::comparison::{compare, spike_mask};
use tsm_core::engine::{integrate_extended, postprocess, ExtendedModel};
use tsm_core::monte_carlo::{run_mc, McOptions};
use tsm_core::pipeline::{effective_workers, moment_set};
use tsm_core::stochastic::Sampler;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let viscosity: f64 = args.next().map_or(Ok(cases::PHASE_VISCOSITIES[0]), |s| s.parse())?;
    let n: usize = args.next().map_or(Ok(0), |s| s.parse())?;
    let cfg = cases::phase(viscosity);
    let model = cfg.phase_model().expect("phase case");
    let strains = cfg.grid.strains(&cfg.load)?;
    println!("phase transformation, viscosity {viscosity:e} Pa·s, wall {:.4} J/m³", model.wall);

    let moments = moment_set(&cfg)?;
    let t0 = Instant::now();
    let traj = integrate_extended(&model, &strains, cfg.grid)?;
    let (tsm, _) = postprocess(&model, &traj, &moments)?;
    println!("TSM: {} steps in {:.3} s", cfg.grid.n_steps, t0.elapsed().as_secs_f64());

    let volume_err = traj
        .states
        .iter()
        .map(|chi| {
            let v = model.iv_values(chi);
            (v[2] + v[3] - 1.0).abs()
        })
        .fold(0.0, f64::max);
    println!("max |λ1 + λ2 − 1| over the trajectory: {volume_err:e}");

    let (chi, lam, sx) = (tsm.index("chi1").unwrap(), tsm.index("lambda1").unwrap(), tsm.index("sxx").unwrap());
    println!(
        "{:>5} {:>7} {:>9} {:>9} {:>9} {:>11} {:>11}",
        "t", "eps_x", "lam1", "sd(lam1)", "sd(chi1)", "sxx", "sd(sxx)"
    );
    for s in (0..=cfg.grid.n_steps).step_by(cfg.grid.n_steps / 20) {
        println!(
            "{:5.1} {:7.4} {:9.5} {:9.2e} {:9.2e} {:11.4e} {:11.4e}",
            tsm.t[s],
            strains[s][0],
            tsm.mean(s, lam),
            tsm.std(s, lam),
            tsm.std(s, chi),
            tsm.mean(s, sx),
            tsm.std(s, sx)
        );
    }

    let chi_std = tsm.std_series(chi);
    let spikes = spike_mask(&chi_std, 10.0, cfg.grid.n_steps / 100);
    let mut s = 0;
    while s < spikes.len() {
        if spikes[s] {
            let start = s;
            while s < spikes.len() && spikes[s] {
                s += 1;
            }
            let peak = chi_std[start..s].iter().copied().fold(0.0, f64::max);
            println!("Std(χ1) spike from t = {:.2} s to {:.2} s, peak {peak:.3}", tsm.t[start], tsm.t[s - 1]);
        }
        s += 1;
    }

    let area: f64 = (1..strains.len())
        .map(|k| 0.5 * (tsm.mean(k, sx) + tsm.mean(k - 1, sx)) * (strains[k][0] - strains[k - 1][0]))
        .sum();
    println!("work of the mean stress over the load/unload path: {area:.4e} J/m³");

    if n > 0 {
        let sampler = Sampler::new(&cfg.params, &cfg.correlation)?;
        let opts = McOptions { workers: effective_workers(&cfg), ..McOptions::new(n, cfg.seed) };
        let mc = run_mc(&model, &strains, cfg.grid, &sampler, &opts)?;
        let cmp = compare(&tsm, &mc)?;
        println!("Monte Carlo N = {n} in {:.1} s", mc.elapsed.as_secs_f64());
        for name in ["lambda1", "sxx"] {
            let q = cmp.get(name).unwrap();
            println!(
                "{name}: mean within 3 SE at {:.1}% of steps, std at {:.1}%",
                100.0 * q.mean_pass_fraction(|_| true),
                100.0 * q.std_pass_fraction(|_| true)
            );
        }
        let q = cmp.get("chi1").unwrap();
        println!(
            "chi1 outside the spikes: mean {:.1}%, std {:.1}%; inside: mean {:.1}%, std {:.1}%",
            100.0 * q.mean_pass_fraction(|k| !spikes[k]),
            100.0 * q.std_pass_fraction(|k| !spikes[k]),
            100.0 * q.mean_pass_fraction(|k| spikes[k]),
            100.0 * q.std_pass_fraction(|k| spikes[k])
        );
    }
    Ok(())
}
