//! Subcommand implementations.
//!
//! Layout under the output directory:
//! - `run`: `seed_{s}/trace.csv`, `seed_{s}/snap_{step}.txt`, `summary.json`
//! - `anneal-compare`: the same per arm under `annealed/` and `pgd/`, plus
//!   `summary.json` and `reports.jsonl`
//! - `oracle`: `oracle/frames.csv`, `oracle/frame_{k}.txt`,
//!   `oracle/fixed_point.txt`, `oracle/summary.json`, `oracle/reports.jsonl`
//! - `fixed-point`: `oracle/fixed_point.txt`, `oracle/fixed_point.json`
//! - `diag`: `diag_reports.jsonl`

use std::path::Path;

use mfl_core::diagnostics::{
    auto_window, decreasing_to_plateau, energy_balance, fit_rate_auto, mean, median, paired_seed_comparison,
    sandwich_check_with, std_error, EntropyEnvelope, Report,
};
use mfl_core::dynamics::{run_with, TemperatureSchedule, Trace, TraceRow};
use mfl_core::entropy::grid_kl;
use mfl_core::functionals::Objective;
use mfl_core::oracle::{
    free_energy_grid, frames_to_csv, gibbs_fixed_point, solve_mfl, FixedPoint, Frame, PdeConfig,
};
use mfl_core::snapshot::{load_grid, write_grid, write_particles};
use mfl_core::GridDensity;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::output::{frame_file_name, read_frames, read_text, write_atomic, write_atomic_io, write_json, write_reports};
use crate::CliError;

/// Worst sandwich slack tolerated in reports.
pub const SANDWICH_TOLERANCE: f64 = 1e-9;
/// Largest relative energy-identity error tolerated on mid-trajectory frames.
pub const ENERGY_TOLERANCE: f64 = 0.02;
/// Minimum `r^2` of the exponential rate fit.
pub const RATE_MIN_R2: f64 = 0.99;
/// Cross-seed standard errors allowed above the running minimum.
pub const PLATEAU_FACTOR: f64 = 3.0;
/// Fraction of paired seeds the annealed arm must win.
pub const ANNEAL_WIN_FRACTION: f64 = 0.8;
/// Number of logarithmically spaced checkpoints in the annealing trend check.
pub const TREND_CHECKPOINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    AnnealCompare,
    Oracle,
    FixedPoint,
    Diag,
}

/// Diagnostic reports produced by a command.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub reports: Vec<Report>,
}

impl Outcome {
    pub fn failed(&self) -> Vec<&str> {
        self.reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect()
    }
}

/// Runs `cmd` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn execute(
    cmd: Command,
    cfg: &ExperimentConfig,
    out: &Path,
    threads: Option<usize>,
) -> Result<Outcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match cmd {
        Command::Run => cmd_run(cfg, out),
        Command::AnnealCompare => cmd_anneal_compare(cfg, out),
        Command::Oracle => cmd_oracle(cfg, out),
        Command::FixedPoint => cmd_fixed_point(cfg, out),
        Command::Diag => cmd_diag(cfg, out),
    })
}

fn seed_dir(seed: u64) -> String {
    format!("seed_{seed}")
}

fn check_unique_seeds(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut seen = cfg.seeds.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("invalid `seeds`: entries must be distinct".into()));
    }
    Ok(())
}

/// Runs every seed in parallel, writing traces and snapshots under `dir`.
fn run_seeds(
    cfg: &ExperimentConfig,
    obj: &dyn Objective,
    schedule: Option<TemperatureSchedule>,
    dir: &Path,
) -> Result<Vec<Trace>, CliError> {
    check_unique_seeds(cfg)?;
    let snapshots = cfg.run.as_ref().is_some_and(|r| r.snapshots);
    let configs = cfg
        .seeds
        .iter()
        .map(|&s| cfg.run_config(s, schedule))
        .collect::<Result<Vec<_>, _>>()?;
    configs
        .par_iter()
        .enumerate()
        .map(|(index, rc)| {
            let sdir = dir.join(seed_dir(rc.seed));
            let trace = run_with(rc, obj, |row, ens| {
                if snapshots {
                    let mut buf = Vec::new();
                    write_particles(&mut buf, ens)?;
                    write_atomic_io(&sdir.join(format!("snap_{}.txt", row.step)), &buf)?;
                }
                Ok(())
            })
            .map_err(|source| CliError::Seed {
                index,
                seed: rc.seed,
                source,
            })?;
            write_atomic(&sdir.join("trace.csv"), trace.to_csv().as_bytes())?;
            Ok(trace)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowSummary {
    pub step: u64,
    pub tau: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl From<&TraceRow> for RowSummary {
    fn from(r: &TraceRow) -> Self {
        Self {
            step: r.step,
            tau: r.tau,
            g: r.g,
            h: r.h,
            f: r.f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub index: usize,
    pub seed: u64,
    pub trace: String,
    pub rows: usize,
    pub initial: RowSummary,
    pub terminal: RowSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub median_initial_g: f64,
    pub median_g: f64,
    pub mean_g: f64,
    pub median_h: f64,
    pub mean_h: f64,
    pub median_f: f64,
    pub mean_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub seeds: Vec<SeedSummary>,
    pub aggregate: Aggregate,
}

/// Per-seed terminal values and aggregates, computed from trace rows only.
pub fn summarize(seeds: &[u64], traces: &[Vec<TraceRow>], prefix: &str) -> ExperimentSummary {
    let seeds: Vec<SeedSummary> = seeds
        .iter()
        .zip(traces)
        .enumerate()
        .map(|(index, (&seed, rows))| SeedSummary {
            index,
            seed,
            trace: format!("{prefix}{}/trace.csv", seed_dir(seed)),
            rows: rows.len(),
            initial: (&rows[0]).into(),
            terminal: rows.last().expect("traces are nonempty").into(),
        })
        .collect();
    let col = |f: fn(&RowSummary) -> f64| seeds.iter().map(|s| f(&s.terminal)).collect::<Vec<_>>();
    let (g, h, f) = (col(|r| r.g), col(|r| r.h), col(|r| r.f));
    let g0: Vec<f64> = seeds.iter().map(|s| s.initial.g).collect();
    ExperimentSummary {
        aggregate: Aggregate {
            median_initial_g: median(&g0),
            median_g: median(&g),
            mean_g: mean(&g),
            median_h: median(&h),
            mean_h: mean(&h),
            median_f: median(&f),
            mean_f: mean(&f),
        },
        seeds,
    }
}

fn rows_of(traces: &[Trace]) -> Vec<Vec<TraceRow>> {
    traces.iter().map(|t| t.rows.clone()).collect()
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let obj = cfg.build_objective()?;
    let traces = run_seeds(cfg, obj.as_ref(), None, out)?;
    let summary = summarize(&cfg.seeds, &rows_of(&traces), "");
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "run", "objective": obj.name(), "summary": summary, "reports": Value::Null }),
    )?;
    Ok(Outcome::default())
}

/// Paired comparison of final `G` between the annealed and PGD arms.
pub fn anneal_report(seeds: &[u64], annealed: &[Vec<TraceRow>], pgd: &[Vec<TraceRow>]) -> Result<Report, CliError> {
    let last_g = |rows: &[Vec<TraceRow>]| rows.iter().map(|r| r.last().expect("nonempty").g).collect::<Vec<_>>();
    let (a, b) = (last_g(annealed), last_g(pgd));
    let cmp = paired_seed_comparison(&a, &b)?;
    let needed = (ANNEAL_WIN_FRACTION * seeds.len() as f64).ceil() as usize;
    let pass = cmp.wins_a >= needed && cmp.median_a < cmp.median_b;
    Ok(Report::new(
        "paired_seed_comparison",
        json!({ "arm_a": "annealed", "arm_b": "pgd", "metric": "final G", "seeds": seeds, "wins_needed": needed }),
        json!({ "comparison": cmp, "final_g_annealed": a, "final_g_pgd": b }),
        pass,
    ))
}

pub fn cmd_anneal_compare(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let obj = cfg.build_objective()?;
    let annealed = rows_of(&run_seeds(cfg, obj.as_ref(), None, &out.join("annealed"))?);
    let pgd = rows_of(&run_seeds(
        cfg,
        obj.as_ref(),
        Some(TemperatureSchedule::constant(0.0)),
        &out.join("pgd"),
    )?);
    let report = anneal_report(&cfg.seeds, &annealed, &pgd)?;
    write_reports(&out.join("reports.jsonl"), std::slice::from_ref(&report))?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "anneal-compare",
            "objective": obj.name(),
            "annealed": summarize(&cfg.seeds, &annealed, "annealed/"),
            "pgd": summarize(&cfg.seeds, &pgd, "pgd/"),
            "comparison": report.values["comparison"],
            "reports": "reports.jsonl",
        }),
    )?;
    Ok(Outcome { reports: vec![report] })
}

fn constant_tau(schedule: &TemperatureSchedule) -> Option<f64> {
    match *schedule {
        TemperatureSchedule::Constant { tau } if tau > 0.0 => Some(tau),
        _ => None,
    }
}

fn fixed_point_for(cfg: &ExperimentConfig, obj: &dyn Objective, tau: f64) -> Result<FixedPoint, CliError> {
    let o = cfg.oracle_block()?;
    let start = GridDensity::uniform(*obj.domain(), o.n_g)?;
    Ok(gibbs_fixed_point(obj, tau, &start, &o.fixed_point.into())?)
}

/// Frame indices whose centered energy balance is assessed: the interior of
/// the automatic rate window.
pub fn mid_trajectory(frames: &[Frame], f_star: f64) -> Result<(usize, usize), CliError> {
    let series: Vec<(f64, f64)> = frames.iter().map(|fr| (fr.t, fr.f - f_star)).collect();
    let (a, b) = auto_window(&series)?;
    Ok((a.max(1), b.min(frames.len() - 1)))
}

/// Reports for a constant-temperature grid trajectory with known fixed point.
pub fn constant_tau_reports(
    obj: &dyn Objective,
    frames: &[Frame],
    tau: f64,
    fixed_point: &GridDensity,
) -> Result<Vec<Report>, CliError> {
    let f_star = free_energy_grid(obj, fixed_point, tau)?;
    let mut reports = Vec::new();

    let mut worst = (f64::INFINITY, f64::INFINITY);
    for fr in frames {
        let s = sandwich_check_with(&fr.grid, obj, tau, fixed_point, f_star)?;
        worst = (worst.0.min(s.slack_lower), worst.1.min(s.slack_upper));
    }
    reports.push(Report::new(
        "entropy_sandwich",
        json!({ "tau": tau, "frames": frames.len(), "tolerance": SANDWICH_TOLERANCE }),
        json!({ "worst_slack_lower": worst.0, "worst_slack_upper": worst.1 }),
        worst.0 >= -SANDWICH_TOLERANCE && worst.1 >= -SANDWICH_TOLERANCE,
    ));

    let series: Vec<(f64, f64)> = frames.iter().map(|fr| (fr.t, fr.f - f_star)).collect();
    let rho = obj.lsi_lower_bound(tau)?;
    let min_rate = rho.map(|r| 2.0 * tau * r);
    reports.push(match fit_rate_auto(&series) {
        Ok(fit) => Report::new(
            "exponential_rate",
            json!({ "tau": tau, "f_star": f_star, "lsi_lower_bound": rho, "min_r_squared": RATE_MIN_R2 }),
            json!({ "fit": fit, "min_rate": min_rate }),
            fit.r_squared >= RATE_MIN_R2 && fit.rate > 0.0 && min_rate.is_none_or(|m| fit.rate >= m),
        ),
        Err(e) => Report::new(
            "exponential_rate",
            json!({ "tau": tau, "f_star": f_star }),
            json!({ "error": e.to_string() }),
            false,
        ),
    });

    let balance = energy_balance(frames);
    reports.push(match mid_trajectory(frames, f_star) {
        Ok((a, b)) => {
            // balance[j] is centered on frame j + 1
            let mid: Vec<_> = balance
                .iter()
                .enumerate()
                .filter(|(j, _)| j + 1 >= a && j + 1 < b)
                .map(|(_, e)| *e)
                .collect();
            let worst = mid.iter().map(|e| e.rel_error).fold(0.0, f64::max);
            Report::new(
                "energy_identity",
                json!({ "tau": tau, "frames": [a, b], "tolerance": ENERGY_TOLERANCE }),
                json!({ "max_rel_error": worst, "points": mid.len() }),
                !mid.is_empty() && worst <= ENERGY_TOLERANCE,
            )
        }
        Err(e) => Report::new(
            "energy_identity",
            json!({ "tau": tau }),
            json!({ "error": e.to_string() }),
            false,
        ),
    });
    Ok(reports)
}

/// `G` at frames nearest to logarithmically spaced times must not increase.
pub fn annealing_trend_report(frames: &[Frame]) -> Report {
    let positive: Vec<&Frame> = frames.iter().filter(|f| f.t > 0.0).collect();
    let mut picks: Vec<usize> = Vec::new();
    if let (Some(first), Some(last)) = (positive.first(), positive.last()) {
        let (t1, t2) = (first.t, last.t);
        for k in 0..TREND_CHECKPOINTS {
            let target = t1 * (t2 / t1).powf(k as f64 / (TREND_CHECKPOINTS - 1) as f64);
            let idx = positive
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.t - target).abs().total_cmp(&(b.1.t - target).abs()))
                .map(|(i, _)| i)
                .expect("nonempty");
            if picks.last() != Some(&idx) {
                picks.push(idx);
            }
        }
    }
    let times: Vec<f64> = picks.iter().map(|&i| positive[i].t).collect();
    let g: Vec<f64> = picks.iter().map(|&i| positive[i].g).collect();
    let worst_increase = g.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Report::new(
        "annealing_trend",
        json!({ "checkpoints": TREND_CHECKPOINTS }),
        json!({ "t": times, "G": g, "worst_increase": worst_increase }),
        g.len() >= 2 && worst_increase <= 0.0,
    )
}

/// `-H <= c1 F + c2` at every frame on the torus.
pub fn envelope_report(obj: &dyn Objective, frames: &[Frame]) -> Result<Report, CliError> {
    let env = EntropyEnvelope::torus(obj.domain())?;
    let worst = frames.iter().map(|fr| env.slack(fr.h, fr.f)).fold(f64::INFINITY, f64::min);
    Ok(Report::new(
        "entropy_envelope",
        json!({ "c1": env.c1, "c2": env.c2 }),
        json!({ "worst_slack": worst }),
        worst >= 0.0,
    ))
}

fn oracle_reports(
    obj: &dyn Objective,
    frames: &[Frame],
    schedule: &TemperatureSchedule,
    fixed_point: Option<&GridDensity>,
) -> Result<Vec<Report>, CliError> {
    let mut reports = Vec::new();
    if let (Some(tau), Some(fp)) = (constant_tau(schedule), fixed_point) {
        reports.extend(constant_tau_reports(obj, frames, tau, fp)?);
    }
    if !schedule.is_constant() {
        reports.push(annealing_trend_report(frames));
    }
    reports.push(envelope_report(obj, frames)?);
    Ok(reports)
}

pub fn cmd_oracle(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let o = cfg.oracle_block()?;
    let obj = cfg.build_objective()?;
    let obj = obj.as_ref();
    let initial = cfg.initial_grid()?;
    let dt = match o.dt {
        Some(dt) => dt,
        None => PdeConfig::stable_dt(obj, &initial, o.schedule.eval_continuous(0.0))?,
    };
    let pde = PdeConfig {
        initial,
        dt,
        t_end: o.t_end,
        schedule: o.schedule,
        record_every: o.record_every,
    };
    let dir = out.join("oracle");
    let fp = match constant_tau(&o.schedule) {
        Some(tau) => {
            let fp = fixed_point_for(cfg, obj, tau)?;
            let mut buf = Vec::new();
            write_grid(&mut buf, &fp.density)?;
            write_atomic(&dir.join("fixed_point.txt"), &buf)?;
            Some(fp)
        }
        None => None,
    };
    let frames = solve_mfl(&pde, obj)?;
    write_atomic(&dir.join("frames.csv"), frames_to_csv(&frames).as_bytes())?;
    if o.dump_frames {
        for (k, fr) in frames.iter().enumerate() {
            let mut buf = Vec::new();
            write_grid(&mut buf, &fr.grid)?;
            write_atomic(&dir.join(frame_file_name(k)), &buf)?;
        }
    }
    let reports = oracle_reports(obj, &frames, &o.schedule, fp.as_ref().map(|f| &f.density))?;
    write_reports(&dir.join("reports.jsonl"), &reports)?;
    let last = frames.last().expect("at least one frame");
    let fixed = match (&fp, constant_tau(&o.schedule)) {
        (Some(fp), Some(tau)) => json!({
            "file": "fixed_point.txt",
            "iterations": fp.iterations,
            "residual": fp.residual,
            "f_star": free_energy_grid(obj, &fp.density, tau)?,
            "terminal_kl": grid_kl(&last.grid, &fp.density)?,
        }),
        _ => Value::Null,
    };
    write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "oracle",
            "objective": obj.name(),
            "dt": dt,
            "steps": pde.steps(),
            "frames": frames.len(),
            "terminal": { "t": last.t, "tau": last.tau, "G": last.g, "H": last.h, "F": last.f, "fisher": last.fisher },
            "fixed_point": fixed,
            "reports": "reports.jsonl",
        }),
    )?;
    Ok(Outcome { reports })
}

pub fn cmd_fixed_point(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let o = cfg.oracle_block()?;
    let tau = constant_tau(&o.schedule)
        .ok_or_else(|| CliError::Config("invalid `oracle.schedule`: fixed-point needs a constant tau > 0".into()))?;
    let obj = cfg.build_objective()?;
    let fp = fixed_point_for(cfg, obj.as_ref(), tau)?;
    let dir = out.join("oracle");
    let mut buf = Vec::new();
    write_grid(&mut buf, &fp.density)?;
    write_atomic(&dir.join("fixed_point.txt"), &buf)?;
    let uniform = GridDensity::uniform(*obj.domain(), o.n_g)?;
    write_json(
        &dir.join("fixed_point.json"),
        &json!({
            "command": "fixed-point",
            "objective": obj.name(),
            "tau": tau,
            "iterations": fp.iterations,
            "residual": fp.residual,
            "f_star": free_energy_grid(obj.as_ref(), &fp.density, tau)?,
            "kl_to_uniform": grid_kl(&fp.density, &uniform)?,
        }),
    )?;
    Ok(Outcome::default())
}

fn read_traces(cfg: &ExperimentConfig, dir: &Path) -> Result<Option<Vec<Vec<TraceRow>>>, CliError> {
    if !dir.join(seed_dir(cfg.seeds[0])).join("trace.csv").exists() {
        return Ok(None);
    }
    cfg.seeds
        .iter()
        .map(|&s| {
            let path = dir.join(seed_dir(s)).join("trace.csv");
            Ok(Trace::parse_csv(&read_text(&path)?)?)
        })
        .collect::<Result<Vec<_>, CliError>>()
        .map(Some)
}

/// Seed-averaged `F` must decrease to a plateau within `PLATEAU_FACTOR` SEs.
pub fn plateau_report(traces: &[Vec<TraceRow>]) -> Result<Report, CliError> {
    let n = traces[0].len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(CliError::Config("traces have different lengths".into()));
    }
    let (mut means, mut ses) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let col: Vec<f64> = traces.iter().map(|t| t[k].f).collect();
        means.push(mean(&col));
        ses.push(std_error(&col));
    }
    let check = decreasing_to_plateau(&means, &ses, PLATEAU_FACTOR)?;
    let steps: Vec<u64> = traces[0].iter().map(|r| r.step).collect();
    Ok(Report::new(
        "decreasing_to_plateau",
        json!({ "seeds": traces.len(), "factor": PLATEAU_FACTOR, "metric": "F" }),
        json!({
            "check": check,
            "worst_step": steps[check.worst_index],
            "mean_F": means,
            "se_F": ses,
        }),
        check.pass && means.iter().all(|m| m.is_finite()),
    ))
}

fn summary_consistency_report(
    cfg: &ExperimentConfig,
    summary_path: &Path,
    key: &str,
    traces: &[Vec<TraceRow>],
    prefix: &str,
) -> Result<Option<Report>, CliError> {
    if !summary_path.exists() {
        return Ok(None);
    }
    let stored: Value = serde_json::from_str(&read_text(summary_path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", summary_path.display())))?;
    let recomputed = serde_json::to_value(summarize(&cfg.seeds, traces, prefix)).expect("serializes");
    let pass = stored.get(key) == Some(&recomputed);
    Ok(Some(Report::new(
        "summary_consistency",
        json!({ "summary": summary_path.display().to_string(), "key": key }),
        json!({ "matches": pass }),
        pass,
    )))
}

pub fn cmd_diag(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut reports = Vec::new();
    if let Some(traces) = read_traces(cfg, out)? {
        if let Some(r) = summary_consistency_report(cfg, &out.join("summary.json"), "summary", &traces, "")? {
            reports.push(r);
        }
        if traces.len() >= 2 && traces.iter().all(|t| t.iter().all(|r| r.f.is_finite())) {
            reports.push(plateau_report(&traces)?);
        }
    }
    if let (Some(a), Some(b)) = (read_traces(cfg, &out.join("annealed"))?, read_traces(cfg, &out.join("pgd"))?) {
        reports.push(anneal_report(&cfg.seeds, &a, &b)?);
        for (arm, traces) in [("annealed", &a), ("pgd", &b)] {
            let prefix = format!("{arm}/");
            if let Some(r) = summary_consistency_report(cfg, &out.join("summary.json"), arm, traces, &prefix)? {
                reports.push(r);
            }
        }
    }
    let odir = out.join("oracle");
    if odir.join("frames.csv").exists() {
        let o = cfg.oracle_block()?;
        let obj = cfg.build_objective()?;
        let frames = read_frames(&odir)?;
        let fp_path = odir.join("fixed_point.txt");
        let fp = if fp_path.exists() { Some(load_grid(&fp_path)?) } else { None };
        reports.extend(oracle_reports(obj.as_ref(), &frames, &o.schedule, fp.as_ref())?);
    }
    if reports.is_empty() {
        return Err(CliError::Config(format!(
            "no run, anneal-compare or oracle outputs found under {}",
            out.display()
        )));
    }
    write_reports(&out.join("diag_reports.jsonl"), &reports)?;
    Ok(Outcome { reports })
}
