//! Loads a TOML run configuration and executes it through the same pipeline as
//! `tsm run`, printing the timing breakdown and the files written.
//!
//! ```text
//! cargo run --release --example run_from_config -- configs/damage.toml [out_dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use tsm_core::config::load_config;
use tsm_core::pipeline::run;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "configs/damage.toml".into()));
    let mut cfg = load_config(&path)?;
    if let Some(out) = args.next() {
        cfg.output_dir = out.into();
    }
    println!("{:?} model from {}", cfg.kind(), path.display());
    let report = run(&cfg)?;
    print!("{}", report.timing.render(&cfg));
    if let Some(c) = &report.comparison {
        for q in &c.quantities {
            let (zm, zs) = q.max_z();
            println!(
                "{:>8}: mean within 3 SE at {:5.1}% of steps (max z {zm:.2}), std at {:5.1}% (max z {zs:.2})",
                q.name,
                100.0 * q.mean_pass_fraction(|_| true),
                100.0 * q.std_pass_fraction(|_| true)
            );
        }
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
