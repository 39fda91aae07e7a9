//! `run` and `verify` orchestration behind the `tsm` binary.
//!
//! `run` writes, into the output directory:
//! - `tsm.csv` / `mc.csv`: one row per written step, `t` then `<q>_mean,<q>_std`
//!   per quantity, preceded by `#` comment lines carrying the column manifest;
//! - `compare.csv` when both solvers ran: per step and quantity the deltas
//!   `TSM − MC` and the Monte Carlo standard errors;
//! - `timing.txt`: the four TSM cost buckets, the moment estimation, the Monte
//!   Carlo total and the speed-up;
//! - `config.echo`: the resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::comparison::{compare, Comparison, SE_MULTIPLIER};
use crate::config::{ModelKind, RunConfig};
use crate::engine::{integrate_extended, postprocess, ExtendedModel, ScaledTangent, StatSeries};
use crate::error::TsmError;
use crate::moments::{estimate_moments, MomentSet};
use crate::monte_carlo::{run_mc, McOptions, McStats};
use crate::stochastic::{derived_seed, Sampler};
use crate::verification::{
    fd_tangent_check_on, frozen_state_sampling_check, random_direction, snapshot_steps, FdReport, FrozenError,
    FrozenReport, Source,
};
use crate::voigt::VoigtVector;

/// Purpose tags for [`derived_seed`].
const MOMENT_PURPOSE: u64 = 0;
const FROZEN_PURPOSE: u64 = 1;
const DIRECTION_PURPOSE: u64 = 2;

pub const TSM_CSV: &str = "tsm.csv";
pub const MC_CSV: &str = "mc.csv";
pub const COMPARE_CSV: &str = "compare.csv";
pub const TIMING_TXT: &str = "timing.txt";
pub const CONFIG_ECHO: &str = "config.echo";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTiming {
    pub mean: Duration,
    pub tangent: Duration,
    pub iv_stats: Duration,
    pub stress_stats: Duration,
    /// Once per material; not part of the per-load-case TSM cost.
    pub moments: Duration,
    pub mc: Option<Duration>,
    pub workers: usize,
}

impl RunTiming {
    pub fn tsm_total(&self) -> Duration {
        self.mean + self.tangent + self.iv_stats + self.stress_stats
    }

    /// Monte Carlo time over TSM time, when both ran.
    pub fn speed_up(&self) -> Option<f64> {
        let tsm = self.tsm_total().as_secs_f64();
        self.mc.filter(|_| tsm > 0.0).map(|mc| mc.as_secs_f64() / tsm)
    }

    pub fn render(&self, cfg: &RunConfig) -> String {
        let secs = |d: Duration| format!("{:.6} s", d.as_secs_f64());
        let mut s = String::new();
        let _ = writeln!(s, "model: {}", model_name(cfg.kind()));
        let _ = writeln!(s, "steps: {}", cfg.grid.n_steps);
        if cfg.solver.runs_tsm() {
            let _ = writeln!(s, "Mean evaluation: {}", secs(self.mean));
            let _ = writeln!(s, "Tangent evaluation: {}", secs(self.tangent));
            let _ = writeln!(s, "Expectation and variance of internal variable: {}", secs(self.iv_stats));
            let _ = writeln!(s, "Expectation and variance of stress: {}", secs(self.stress_stats));
            let _ = writeln!(s, "TSM total: {}", secs(self.tsm_total()));
            let _ = writeln!(
                s,
                "Moment estimation ({} samples, once per material, not in TSM total): {}",
                cfg.moment_samples,
                secs(self.moments)
            );
        }
        if let Some(mc) = self.mc {
            let _ = writeln!(s, "Monte Carlo (N = {}, workers = {}): {}", cfg.mc_n, self.workers, secs(mc));
        }
        if let Some(r) = self.speed_up() {
            let _ = writeln!(s, "Speed-up: {r:.1}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub tsm: Option<StatSeries>,
    pub mc: Option<McStats>,
    pub comparison: Option<Comparison>,
    pub timing: RunTiming,
    pub files: Vec<PathBuf>,
}

fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Damage => "damage",
        ModelKind::Phase => "phase",
        ModelKind::Viscoplastic => "viscoplastic",
    }
}

/// Worker count: the configured one, else the available parallelism.
pub fn effective_workers(cfg: &RunConfig) -> usize {
    cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// The model-agnostic part of a run, once the model is built.
fn run_model<M: ExtendedModel>(model: &M, cfg: &RunConfig) -> Result<RunReport, TsmError> {
    let grid = cfg.grid;
    let strains = grid.strains(&cfg.load).map_err(TsmError::Simulation)?;
    let mut timing = RunTiming { workers: effective_workers(cfg), ..Default::default() };

    let mut tsm = None;
    if cfg.solver.runs_tsm() {
        let t0 = Instant::now();
        let moments = moment_set(cfg)?;
        timing.moments = t0.elapsed();
        let traj = integrate_extended(model, &strains, grid).map_err(TsmError::Simulation)?;
        timing.mean = traj.timing.mean;
        timing.tangent = traj.timing.tangent;
        let (stats, post) = postprocess(model, &traj, &moments).map_err(TsmError::PostProcessing)?;
        timing.iv_stats = post.iv_stats;
        timing.stress_stats = post.stress_stats;
        tsm = Some(stats);
    }

    let mut mc = None;
    if cfg.solver.runs_mc() {
        let sampler = Sampler::new(&cfg.params, &cfg.correlation).map_err(TsmError::PreProcessing)?;
        let opts = McOptions { workers: timing.workers, ..McOptions::new(cfg.mc_n, cfg.seed) };
        let stats = run_mc(model, &strains, grid, &sampler, &opts).map_err(TsmError::MonteCarlo)?;
        timing.mc = Some(stats.elapsed);
        mc = Some(stats);
    }

    let comparison = match (&tsm, &mc) {
        (Some(t), Some(m)) => Some(compare(t, m).map_err(TsmError::MonteCarlo)?),
        _ => None,
    };
    Ok(RunReport { tsm, mc, comparison, timing, files: Vec::new() })
}

/// Moments of the configured parameters, estimated by sampling.
pub fn moment_set(cfg: &RunConfig) -> Result<MomentSet, TsmError> {
    let seed = derived_seed(cfg.seed, MOMENT_PURPOSE);
    estimate_moments(&cfg.params, &cfg.correlation, cfg.moment_samples, seed)
        .map(|(m, _)| m)
        .map_err(TsmError::PreProcessing)
}

/// Runs the configured solvers and writes every artifact into `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunReport, TsmError> {
    let mut report = match cfg.kind() {
        ModelKind::Damage => run_model(&cfg.damage_model().expect("damage config"), cfg)?,
        ModelKind::Phase => run_model(&cfg.phase_model().expect("phase config"), cfg)?,
        ModelKind::Viscoplastic => run_model(&cfg.viscoplastic_model().expect("viscoplastic config"), cfg)?,
    };
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if let Some(t) = &report.tsm {
        files.push(write_file(
            dir,
            TSM_CSV,
            &stats_csv("tsm", cfg, &t.names, &t.t, |s, q| (t.mean(s, q), t.std(s, q))),
        )?);
    }
    if let Some(m) = &report.mc {
        let header = format!("mc n={} seed={}", m.n, m.seed);
        files.push(write_file(
            dir,
            MC_CSV,
            &stats_csv(&header, cfg, &m.names, &m.t, |s, q| (m.mean(s, q), m.std(s, q))),
        )?);
    }
    if let Some(c) = &report.comparison {
        files.push(write_file(dir, COMPARE_CSV, &compare_csv(cfg, c))?);
    }
    files.push(write_file(dir, TIMING_TXT, &report.timing.render(cfg))?);
    files.push(write_file(dir, CONFIG_ECHO, &cfg.echo())?);
    report.files = files;
    Ok(report)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, TsmError> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn written_steps(cfg: &RunConfig, n_points: usize) -> impl Iterator<Item = usize> {
    let (every, last) = (cfg.output_every, n_points - 1);
    (0..n_points).filter(move |&s| s % every == 0 || s == last)
}

fn stats_csv(
    solver: &str,
    cfg: &RunConfig,
    names: &[String],
    t: &[f64],
    value: impl Fn(usize, usize) -> (f64, f64),
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tsm-core {} {solver}", model_name(cfg.kind()));
    let _ = writeln!(out, "# columns: t [s], then <quantity>_mean and <quantity>_std for each quantity");
    let _ = writeln!(out, "# quantities: {}", names.join(" "));
    let mut header = vec!["t".to_string()];
    for n in names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    let _ = writeln!(out, "{}", header.join(","));
    for s in written_steps(cfg, t.len()) {
        let _ = write!(out, "{}", t[s]);
        for q in 0..names.len() {
            let (m, sd) = value(s, q);
            let _ = write!(out, ",{m},{sd}");
        }
        out.push('\n');
    }
    out
}

fn compare_csv(cfg: &RunConfig, c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tsm-core {} compare", model_name(cfg.kind()));
    let _ = writeln!(
        out,
        "# columns: t [s], then per quantity <q>_dmean, <q>_se_mean, <q>_dstd, <q>_se_std (d = TSM - MC)"
    );
    let _ = writeln!(out, "# a step agrees when |d| <= {SE_MULTIPLIER}*se + floor");
    for q in &c.quantities {
        let _ = writeln!(
            out,
            "# {}: mean agrees at {:.4} of steps, std at {:.4}, floor {}",
            q.name,
            q.mean_pass_fraction(|_| true),
            q.std_pass_fraction(|_| true),
            q.floor
        );
    }
    let mut header = vec!["t".to_string()];
    for q in &c.quantities {
        for suffix in ["dmean", "se_mean", "dstd", "se_std"] {
            header.push(format!("{}_{suffix}", q.name));
        }
    }
    let _ = writeln!(out, "{}", header.join(","));
    for s in written_steps(cfg, c.t.len()) {
        let _ = write!(out, "{}", c.t[s]);
        for q in &c.quantities {
            let _ = write!(out, ",{},{},{},{}", q.d_mean[s], q.se_mean[s], q.d_std[s], q.se_std[s]);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub model: ModelKind,
    pub fd: Vec<FdReport>,
    pub frozen: FrozenReport,
    /// Every parameter has zero spread.
    pub degenerate: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.fd.iter().all(FdReport::passed) && self.frozen.passed()
    }

    /// Names of the failing checks.
    pub fn failures(&self) -> Vec<String> {
        let mut f: Vec<String> = self
            .fd
            .iter()
            .filter(|r| !r.passed())
            .map(|r| format!("fd_tangent_check[{}] max_rel_err {:e}", r.source, r.max_rel_err()))
            .collect();
        for c in self.frozen.checks.iter().filter(|c| !c.passed()) {
            f.push(format!("frozen_state_sampling_check[{} @ step {}]", c.name, c.step));
        }
        f
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {}", model_name(self.model));
        if self.degenerate {
            let _ = writeln!(s, "degenerate: zero fluctuations");
        }
        for r in &self.fd {
            let worst = r.worst().map_or(String::from("-"), |q| q.name.clone());
            let _ = writeln!(
                s,
                "fd_tangent_check {}: h {:e}, max_rel_err {:e} (worst {worst}), excluded steps {}, {}",
                r.source,
                r.h,
                r.max_rel_err(),
                r.excluded_steps.len(),
                if r.passed() { "PASS" } else { "FAIL" }
            );
        }
        let worst = self
            .frozen
            .worst()
            .map_or(String::from("-"), |c| format!("{} @ step {}: {:e}", c.name, c.step, c.rel_var_err()));
        let _ = writeln!(
            s,
            "frozen_state_sampling_check: {} samples, {} checks, worst var rel err {worst}, {}",
            self.frozen.n_samples,
            self.frozen.checks.len(),
            if self.frozen.passed() { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

fn verify_model<M: ExtendedModel>(model: &M, cfg: &RunConfig) -> Result<VerifyReport, TsmError> {
    let grid = cfg.grid;
    let strains: Vec<VoigtVector> = grid.strains(&cfg.load).map_err(TsmError::Simulation)?;
    let traj = integrate_extended(model, &strains, grid).map_err(TsmError::Simulation)?;
    let h_rel = cfg.verify.fd_step;
    let mut fd = Vec::new();
    let dir_seed = derived_seed(cfg.seed, DIRECTION_PURPOSE);
    for j in 0..model.n_elastic_sources() {
        let dir = random_direction(dir_seed.wrapping_add(j as u64));
        let h = h_rel * cfg.params.mean_stiffness(j).norm();
        let r = fd_tangent_check_on(model, &traj, Source::Elastic(j), &dir, h).map_err(TsmError::Simulation)?;
        fd.push(r);
    }
    for k in 0..model.n_scalar_sources() {
        let mean = cfg.params.scalars.last().map_or(1.0, |(_, s)| s.mean);
        let dir = random_direction(dir_seed);
        let r =
            fd_tangent_check_on(model, &traj, Source::Scalar(k), &dir, h_rel * mean).map_err(TsmError::Simulation)?;
        fd.push(r);
    }
    let moments = moment_set(cfg)?;
    let sampler = Sampler::new(&cfg.params, &cfg.correlation).map_err(TsmError::PreProcessing)?;
    let steps = snapshot_steps(grid, cfg.verify.snapshots);
    let seed = derived_seed(cfg.seed, FROZEN_PURPOSE);
    let frozen = frozen_state_sampling_check(model, &traj, &steps, &sampler, &moments, cfg.verify.frozen_samples, seed)
        .map_err(|e| match e {
            FrozenError::Engine(e) => TsmError::PostProcessing(e),
            FrozenError::Sampling(e) => TsmError::PreProcessing(e),
        })?;
    Ok(VerifyReport { model: cfg.kind(), fd, frozen, degenerate: cfg.is_degenerate() })
}

fn verify_scaled<M: ExtendedModel>(model: M, cfg: &RunConfig) -> Result<VerifyReport, TsmError> {
    let factor = cfg.verify.fault_tangent_scale;
    if factor == 1.0 {
        verify_model(&model, cfg)
    } else {
        verify_model(&ScaledTangent { inner: model, factor }, cfg)
    }
}

/// Finite-difference check per fluctuation source and frozen-state sampling
/// check at evenly spaced snapshots.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, TsmError> {
    match cfg.kind() {
        ModelKind::Damage => verify_scaled(cfg.damage_model().expect("damage config"), cfg),
        ModelKind::Phase => verify_scaled(cfg.phase_model().expect("phase config"), cfg),
        ModelKind::Viscoplastic => verify_scaled(cfg.viscoplastic_model().expect("viscoplastic config"), cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small_damage(dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            r#"
model = "damage"
mc_n = 50
moment_samples = 20000
output_dir = "{}"
{extra}
[time]
t_end = 10.0
dt = 0.05
[load]
kind = "proportional"
direction = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
rate = 2e-3
[material]
lambda = {{ mean = 12e9, std = 1.8e9 }}
mu = {{ mean = 8e9, std = 1.2e9 }}
eta = 10e6
[verify]
frozen_samples = 20000
"#,
            dir.display()
        );
        parse_config(&text, None).unwrap()
    }

    #[test]
    fn run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_damage(dir.path(), "");
        let report = run(&cfg).unwrap();
        for f in [TSM_CSV, MC_CSV, COMPARE_CSV, TIMING_TXT, CONFIG_ECHO] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(report.timing.speed_up().unwrap() > 0.0);
        let tsm = fs::read_to_string(dir.path().join(TSM_CSV)).unwrap();
        let rows: Vec<&str> = tsm.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "t,d_mean,d_std,sxx_mean,sxx_std,syy_mean,syy_std,szz_mean,szz_std,syz_mean,syz_std,sxz_mean,sxz_std,sxy_mean,sxy_std");
        assert_eq!(rows.len(), 1 + cfg.grid.n_steps + 1);
        let timing = fs::read_to_string(dir.path().join(TIMING_TXT)).unwrap();
        for bucket in ["Mean evaluation", "Tangent evaluation", "internal variable", "of stress", "Speed-up"] {
            assert!(timing.contains(bucket), "{bucket}");
        }
    }

    #[test]
    fn tsm_only_skips_mc_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_damage(dir.path(), "solver = \"tsm\"\noutput_every = 10");
        run(&cfg).unwrap();
        assert!(dir.path().join(TSM_CSV).exists());
        assert!(!dir.path().join(MC_CSV).exists());
        assert!(!dir.path().join(COMPARE_CSV).exists());
        let tsm = fs::read_to_string(dir.path().join(TSM_CSV)).unwrap();
        assert_eq!(tsm.lines().filter(|l| !l.starts_with('#')).count(), 1 + 21);
    }

    #[test]
    fn verify_passes_and_catches_fault() {
        let dir = tempfile::tempdir().unwrap();
        let ok = verify(&small_damage(dir.path(), "")).unwrap();
        assert!(ok.passed(), "{}", ok.render());
        let mut cfg = small_damage(dir.path(), "");
        cfg.verify.fault_tangent_scale = 1.01;
        let bad = verify(&cfg).unwrap();
        assert!(!bad.passed());
        assert!(bad.failures()[0].starts_with("fd_tangent_check[E1]"));
    }
}
