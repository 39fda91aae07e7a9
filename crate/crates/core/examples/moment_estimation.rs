//! Sample estimate of the elasticity fluctuation moments against the closed
//! form for Gaussian Lamé parameters, positive semi-definiteness of the joint
//! covariance and a CSV round trip.
//!
//! ```text
//! cargo run --release --example moment_estimation -- [samples]
//! ```

use std::error::Error;
use std::fs::File;
use std::time::Instant;

use tsm_core::cases;
use tsm_core::moments::{analytic_gaussian_moments, estimate_moments, MomentSet};

fn max_rel_diff(a: &MomentSet, b: &MomentSet) -> f64 {
    let (ca, cb) = (a.joint_covariance(), b.joint_covariance());
    let scale = cb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for (x, y) in ca.iter().zip(cb.iter()) {
        // Entries far below the largest one are zero in closed form.
        if y.abs() > 1e-6 * scale {
            worst = worst.max((x / y - 1.0).abs());
        }
    }
    worst
}

fn main() -> Result<(), Box<dyn Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(1_000_000), |s| s.parse())?;
    for (label, cfg) in [
        ("damage (independent λ, μ)", cases::damage(cases::DamageLoad::Monotone)),
        ("viscoplastic (fully dependent λ, μ, σy)", cases::viscoplastic(cases::VISCOPLASTIC_VISCOSITIES[0], true)),
    ] {
        let t0 = Instant::now();
        let (est, report) = estimate_moments(&cfg.params, &cfg.correlation, n, cfg.seed)?;
        let elapsed = t0.elapsed();
        let exact = analytic_gaussian_moments(&cfg.params, &cfg.correlation)?;
        let eig = est.joint_covariance().symmetric_eigen().eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        println!("{label}: {n} samples in {:.2} s, {} rejected", elapsed.as_secs_f64(), report.rejections);
        println!("  max relative deviation from the closed form: {:.3}%", 100.0 * max_rel_diff(&est, &exact));
        println!("  joint covariance eigenvalues in [{lo:.3e}, {hi:.3e}], min/max = {:.1e}", lo / hi);
        if exact.yy > 0.0 {
            println!("  Var(σy): estimated {:.4e}, closed form {:.4e}", est.yy, exact.yy);
        }

        let path = std::env::temp_dir().join("tsm_moments_example.csv");
        est.write_csv(File::create(&path)?)?;
        let back = MomentSet::read_csv(File::open(&path)?)?;
        println!("  CSV round trip identical: {}", back == est);
        std::fs::remove_file(&path)?;
    }
    Ok(())
}
