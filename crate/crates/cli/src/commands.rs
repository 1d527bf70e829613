//! The six experiments behind the `ddim` subcommands.
//!
//! Each command writes its files into the output directory and returns the
//! list of written paths; a failed acceptance check still writes everything
//! first and then reports [`Failure::Contract`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ddim_core::suarez::random_history;
use ddim_core::{
    beta1_closed_form, beta_numbers, evolve_fn, im_verdict, real_roots, region_sweep, spectral_scan, squeezing_test,
    suarez_lambda, trace_refinement, HState, HistoryGrid, ImVerdict, RegionGrid, SpectralScan, SuarezChar, SuarezModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    BetaConfig, DimensionConfig, History, RegionConfig, RootsConfig, SimulateConfig, TraceCheckConfig,
};
use crate::svg::region_svg;
use crate::Failure;

/// Floats in CSV files: 17 significant digits.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_float).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    write_file(dir, name, &text)
}

fn steps_of(t: f64, h: f64) -> Result<usize, Failure> {
    let k = (t / h).round();
    if !(t >= 0.0) || (k * h - t).abs() > 1e-9 * (1.0 + t) {
        return Err(Failure::Usage(format!("time {t} is not a multiple of the step {h}")));
    }
    Ok(k as usize)
}

pub fn simulate(cfg: &SimulateConfig, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let sm = SuarezModel::new(cfg.alpha, cfg.tau)?;
    let grid = HistoryGrid::new(cfg.tau, cfg.m)?;
    let h = cfg.tau / cfg.m as f64;
    let traj = match cfg.history {
        History::Stationary => {
            let x = (1.0 - cfg.alpha).sqrt();
            evolve_fn(sm.model(), grid, |_| vec![x], 0.0, cfg.t_end, h)?
        }
        History::Constant => evolve_fn(sm.model(), grid, |_| vec![cfg.x0], 0.0, cfg.t_end, h)?,
        History::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            evolve_fn(sm.model(), grid, random_history(&mut rng, cfg.tau, cfg.radius), 0.0, cfg.t_end, h)?
        }
    };
    let mut csv = String::from("t,x\n");
    for (t, x) in traj.times().iter().zip(traj.heads()) {
        let _ = writeln!(csv, "{},{}", csv_float(*t), csv_float(x));
    }
    Ok(vec![write_file(out, "simulate.csv", &csv)?])
}

#[derive(Serialize)]
struct RootsReport {
    verdict: ImVerdict,
    scan: SpectralScan,
}

pub fn roots(cfg: &RootsConfig) -> Result<(ImVerdict, SpectralScan), Failure> {
    let verdict = im_verdict(cfg.alpha, cfg.tau)?;
    let cf = SuarezChar::new(cfg.alpha, cfg.tau)?;
    let nu = match (cfg.nu, verdict.nu) {
        (Some(nu), _) | (None, Some(nu)) => nu,
        // without a manifold, look at the middle of the gap below the negative real root
        (None, None) => -0.5 * real_roots(&cf)?.1,
    };
    let scan = spectral_scan(&cf, nu, cfg.lambda.unwrap_or_else(|| suarez_lambda(cfg.alpha)))?;
    Ok((verdict, scan))
}

pub fn roots_cmd(cfg: &RootsConfig, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let (verdict, scan) = roots(cfg)?;
    Ok(vec![write_json(out, "roots.json", &RootsReport { verdict, scan })?])
}

pub const REGION_HEADER: &str = "tau,alpha,verdict,lambda_sum_sign,nu,margin";

pub fn region_csv(grid: &RegionGrid) -> String {
    let mut csv = format!("{REGION_HEADER}\n");
    for c in &grid.cells {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            csv_float(c.tau),
            csv_float(c.alpha),
            c.verdict.as_str(),
            c.lambda_sum_sign,
            csv_opt(c.nu),
            csv_opt(c.margin)
        );
    }
    csv
}

pub fn region(cfg: &RegionConfig, out: &Path, stamp: Option<u64>) -> Result<Vec<PathBuf>, Failure> {
    let grid = region_sweep(
        (cfg.tau_range[0], cfg.tau_range[1]),
        (cfg.alpha_range[0], cfg.alpha_range[1]),
        cfg.resolution,
        cfg.resolution,
    )?;
    let files = vec![
        write_file(out, "region.csv", &region_csv(&grid))?,
        write_file(out, "region.svg", &region_svg(&grid, stamp))?,
    ];
    let bad = grid.containment_violations();
    if !bad.is_empty() {
        return Err(Failure::Contract(format!(
            "{} manifold cells with lambda1 + lambda2 >= 0, first at tau {}, alpha {}",
            bad.len(),
            bad[0].tau,
            bad[0].alpha
        )));
    }
    Ok(files)
}

#[derive(Serialize)]
struct DimensionSample {
    time: f64,
    omega_d: f64,
    /// Leading singular values.
    sigmas: Vec<f64>,
}

#[derive(Serialize)]
struct DimensionReport {
    alpha: f64,
    tau: f64,
    m: usize,
    t: f64,
    d: f64,
    samples: Vec<DimensionSample>,
    sup_omega: f64,
    verdict: bool,
    minimal_d: Option<f64>,
}

pub fn dimension(cfg: &DimensionConfig, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    if cfg.samples == 0 {
        return Err(Failure::Usage("samples must be positive".into()));
    }
    let sm = SuarezModel::new(cfg.alpha, cfg.tau)?;
    let grid = HistoryGrid::new(cfg.tau, cfg.m)?;
    let h = cfg.tau / cfg.m as f64;
    let first = steps_of(cfg.transient, h)?;
    let gap = steps_of(cfg.spacing, h)?.max(1);
    let last = first + gap * (cfg.samples - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let orbit = evolve_fn(sm.model(), grid, random_history(&mut rng, cfg.tau, 1.0), 0.0, last as f64 * h, h)?;
    let picks: Vec<usize> = (0..cfg.samples).map(|i| first + i * gap).collect();
    let sample: Vec<HState> = picks.iter().map(|&k| orbit.state_at_step(k)).collect();
    let t = cfg.t.unwrap_or(2.0 * cfg.tau);
    let rep = squeezing_test(sm.model(), &sample, t, cfg.d, h)?;
    let samples = picks
        .iter()
        .zip(rep.omegas.iter().zip(&rep.spectra))
        .map(|(&k, (o, s))| DimensionSample {
            time: orbit.time_at_step(k),
            omega_d: *o,
            sigmas: s.iter().take(6).copied().collect(),
        })
        .collect();
    let report = DimensionReport {
        alpha: cfg.alpha,
        tau: cfg.tau,
        m: cfg.m,
        t,
        d: cfg.d,
        samples,
        sup_omega: rep.sup_omega,
        verdict: rep.verdict,
        minimal_d: rep.minimal_d,
    };
    Ok(vec![write_json(out, "dimension.json", &report)?])
}

#[derive(Serialize)]
struct BetaOutput {
    alpha: f64,
    tau: f64,
    m: usize,
    restarts: usize,
    betas: Vec<f64>,
    sums: Vec<f64>,
    spread: Vec<f64>,
    warnings: Vec<String>,
    analytic: f64,
    deviation: f64,
    tolerance: f64,
}

pub fn beta(cfg: &BetaConfig, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let sm = SuarezModel::new(cfg.alpha, cfg.tau)?;
    let rep = beta_numbers(sm.model(), cfg.m, cfg.k_max, cfg.restarts, cfg.seed)?;
    let analytic = beta1_closed_form(cfg.alpha);
    let deviation = (rep.betas[0] - analytic).abs();
    let higher = rep.betas[1..].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let output = BetaOutput {
        alpha: cfg.alpha,
        tau: cfg.tau,
        m: cfg.m,
        restarts: cfg.restarts,
        betas: rep.betas,
        sums: rep.sums,
        spread: rep.spread,
        warnings: rep.warnings,
        analytic,
        deviation,
        tolerance: cfg.tolerance,
    };
    let files = vec![write_json(out, "beta.json", &output)?];
    if deviation > cfg.tolerance || higher > cfg.tolerance {
        return Err(Failure::Contract(format!(
            "beta_1 misses {analytic} by {deviation:.3e} or a higher beta exceeds {} (max |beta_k| = {higher:.3e})",
            cfg.tolerance
        )));
    }
    Ok(files)
}

#[derive(Serialize)]
struct TraceOutput {
    alpha: f64,
    tau: f64,
    k: usize,
    t_end: f64,
    max_deviation: f64,
    tolerance: f64,
    refinement: Vec<ddim_core::RefinementRow>,
}

pub fn trace_check(cfg: &TraceCheckConfig, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    if cfg.ms.is_empty() {
        return Err(Failure::Usage("ms must list at least one grid size".into()));
    }
    let sm = SuarezModel::new(cfg.alpha, cfg.tau)?;
    let t_end = cfg.t_end.unwrap_or(2.0 * cfg.tau);
    let rows = trace_refinement(
        sm.model(),
        |g| {
            let h = g.tau() / g.intervals() as f64;
            let pre = evolve_fn(sm.model(), g, |t| vec![0.3 + 0.5 * (3.0 * t).sin()], 0.0, cfg.transient, h)?;
            Ok(pre.state_at_step(pre.steps()))
        },
        cfg.k,
        t_end,
        &cfg.ms,
    )?;
    let max_deviation = rows.last().map(|r| r.deviation).unwrap_or(f64::NAN);
    let output = TraceOutput {
        alpha: cfg.alpha,
        tau: cfg.tau,
        k: cfg.k,
        t_end,
        max_deviation,
        tolerance: cfg.tolerance,
        refinement: rows,
    };
    let files = vec![write_json(out, "trace_check.json", &output)?];
    if !(max_deviation <= cfg.tolerance) {
        return Err(Failure::Contract(format!(
            "trace formula deviation {max_deviation:.3e} exceeds {}",
            cfg.tolerance
        )));
    }
    Ok(files)
}
