//! Execution of a validated experiment and serialization of its results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use log::info;
use octoport_core::convergence::{boundary_null_rectangles, convergence_sweep, AmplitudeSchedule, SweepOptions};
use octoport_core::eightport::{DetectorConfig, GStatistics, Network, NetworkCutoffs, Path};
use octoport_core::phasespace::{conjugate_state, density, lemma2_rhs, rectangle_probability};
use octoport_core::region::tiling;
use octoport_core::{Cutoff, Interval, IntervalSet, Rectangle};
use serde_json::{json, Value};

use crate::config::{serialize_config, ExperimentConfig, ExperimentKind};
use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";
pub const LEMMA1_TOLERANCE: f64 = 1e-6;
pub const LEMMA2_TOLERANCE: f64 = 1e-4;

/// Outcome of a run that produced results.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// The run completed but a check or convergence criterion failed.
    CheckFailed(String),
    /// Nothing could be computed within the resource limits.
    Infeasible(String),
}

impl Status {
    pub fn exit_code(&self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::CheckFailed(_) => 3,
            Status::Infeasible(_) => 4,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::CheckFailed(_) => "check_failed",
            Status::Infeasible(_) => "infeasible",
        }
    }

    fn message(&self) -> Option<&str> {
        match self {
            Status::Ok => None,
            Status::CheckFailed(m) | Status::Infeasible(m) => Some(m),
        }
    }
}

/// Deterministic products of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub results: Value,
    pub error_budgets: Value,
    pub status: Status,
}

impl RunOutput {
    /// CSV text: the canonical configuration as `#` comment lines, then the
    /// header and one line per row.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        for line in serialize_config(&self.config).lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn summary(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "kind": self.config.kind.name(),
            "config": serialize_config(&self.config),
            "results": self.results,
            "error_budgets": self.error_budgets,
            "status": self.status.label(),
            "message": self.status.message(),
        })
    }
}

fn bounds(r: &Rectangle) -> [f64; 4] {
    [r.q.lo, r.q.hi, r.p.lo, r.p.hi]
}

fn grid_rectangles(cfg: &ExperimentConfig, step: Option<f64>) -> Vec<Rectangle> {
    let g = cfg.grid.as_ref().expect("grid present for this kind");
    let [qmin, qmax, pmin, pmax] = g.window;
    tiling(&Rectangle::from_bounds(qmin, qmax, pmin, pmax), (g.shape[0], g.shape[1]), step)
}

fn detector_config(cfg: &ExperimentConfig) -> Result<DetectorConfig, CliError> {
    let d = cfg.detector.as_ref().expect("detector present for this kind");
    let l = cfg.limits.as_ref().expect("limits present for this kind");
    let cutoffs = match d.cutoffs {
        None => None,
        Some(c) => Some(NetworkCutoffs { modes: [Cutoff::new(c[0])?, Cutoff::new(c[1])?, Cutoff::new(c[2])?, Cutoff::new(c[3])?] }),
    };
    let dc = DetectorConfig {
        t: cfg.t.clone(),
        s: cfg.s.clone(),
        z: d.z,
        phi: d.phi,
        cutoffs,
        rectangles: grid_rectangles(cfg, Some(1.0 / d.z.norm())),
        max_branches: l.max_branches,
        deficit_budget: l.deficit_budget,
        max_amplitudes: l.max_amplitudes,
    };
    dc.validate()?;
    Ok(dc)
}

fn stats_results(g: &GStatistics) -> Value {
    let (mq, mp) = g.joint.means();
    let covered: f64 = g.rectangle_probs.iter().map(|&(_, p)| p).sum();
    json!({
        "path": g.path.to_string(),
        "cutoffs": g.cutoffs.dims(),
        "lattice_step": g.joint.step(),
        "total_mass": g.joint.total(),
        "grid_mass": covered,
        "mean_q": mq,
        "mean_p": mp,
        "support_points": g.joint.weights().len(),
    })
}

fn g_statistics(cfg: ExperimentConfig) -> Result<RunOutput, CliError> {
    let dc = detector_config(&cfg)?;
    let path = cfg.detector.as_ref().map_or(Path::Direct, |d| d.path);
    let g = Network::from_config(&dc)?.run(path, &dc.rectangles)?;
    let rows = g
        .rectangle_probs
        .iter()
        .enumerate()
        .map(|(k, (r, p))| {
            let b = bounds(r);
            vec![k as f64, b[0], b[1], b[2], b[3], *p]
        })
        .collect();
    let budget = dc.deficit_budget;
    Ok(RunOutput {
        header: vec!["rect_id", "qmin", "qmax", "pmin", "pmax", "probability"],
        rows,
        results: stats_results(&g),
        error_budgets: json!({ "leak": g.leak, "discarded_weight": g.discarded_weight, "deficit_budget": budget }),
        status: Status::Ok,
        config: cfg,
    })
}

fn lemma1_check(cfg: ExperimentConfig) -> Result<RunOutput, CliError> {
    let dc = detector_config(&cfg)?;
    let net = Network::from_config(&dc)?;
    let direct = net.run(Path::Direct, &dc.rectangles)?;
    let fact = net.run(Path::Factorized, &dc.rectangles)?;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(dc.rectangles.len());
    for (k, ((r, a), (_, b))) in direct.rectangle_probs.iter().zip(&fact.rectangle_probs).enumerate() {
        let diff = (a - b).abs();
        worst = worst.max(diff);
        let e = bounds(r);
        rows.push(vec![k as f64, e[0], e[1], e[2], e[3], *a, *b, diff]);
    }
    let status = if worst <= LEMMA1_TOLERANCE {
        Status::Ok
    } else {
        Status::CheckFailed(format!("max |direct - factorized| {worst:.3e} exceeds {LEMMA1_TOLERANCE:e}"))
    };
    Ok(RunOutput {
        header: vec!["rect_id", "qmin", "qmax", "pmin", "pmax", "p_direct", "p_factorized", "diff"],
        rows,
        results: json!({
            "max_diff": worst,
            "tolerance": LEMMA1_TOLERANCE,
            "direct": stats_results(&direct),
            "factorized": stats_results(&fact),
        }),
        error_budgets: json!({
            "leak_direct": direct.leak,
            "leak_factorized": fact.leak,
            "discarded_weight": direct.discarded_weight,
            "deficit_budget": dc.deficit_budget,
        }),
        status,
        config: cfg,
    })
}

fn lemma2_check(cfg: ExperimentConfig) -> Result<RunOutput, CliError> {
    let l = cfg.lemma2.as_ref().expect("lemma2 present for this kind");
    let (t, s) = (cfg.t.to_density()?, cfg.s.to_density()?);
    let x = IntervalSet::from(Interval::new(l.x[0], l.x[1]));
    let y = IntervalSet::from(Interval::new(l.y[0], l.y[1]));
    let rhs = lemma2_rhs(&t, &s, &x, &y)?;
    let rect = Rectangle::from_bounds(l.x[0], l.x[1], l.y[0], l.y[1]);
    let limit = rectangle_probability(&t, &conjugate_state(&s), &rect)?;
    let diff = (rhs - limit).abs();
    let status = if diff <= LEMMA2_TOLERANCE {
        Status::Ok
    } else {
        Status::CheckFailed(format!("|rhs - limit| {diff:.3e} exceeds {LEMMA2_TOLERANCE:e}"))
    };
    Ok(RunOutput {
        header: vec!["xmin", "xmax", "ymin", "ymax", "rhs", "limit", "diff"],
        rows: vec![vec![l.x[0], l.x[1], l.y[0], l.y[1], rhs, limit, diff]],
        results: json!({ "rhs": rhs, "limit": limit, "diff": diff, "tolerance": LEMMA2_TOLERANCE }),
        error_budgets: json!({ "deficit_t": t.deficit(), "deficit_s": s.deficit() }),
        status,
        config: cfg,
    })
}

fn sweep(cfg: ExperimentConfig) -> Result<RunOutput, CliError> {
    let sc = cfg.schedule.as_ref().expect("schedule present for this kind");
    let l = cfg.limits.as_ref().expect("limits present for this kind");
    let g = cfg.grid.as_ref().expect("grid present for this kind");
    let schedule = AmplitudeSchedule::new(sc.radii.clone(), sc.phi)?;
    let [qmin, qmax, pmin, pmax] = g.window;
    let rects = boundary_null_rectangles(
        schedule.common_step(),
        &Rectangle::from_bounds(qmin, qmax, pmin, pmax),
        (g.shape[0], g.shape[1]),
    )?;
    let (t, s) = (cfg.t.to_density()?, cfg.s.to_density()?);
    let opts = SweepOptions { path: sc.path, max_amplitudes: l.max_amplitudes, threshold: sc.threshold };
    let report = convergence_sweep(&t, &s, &schedule, &rects, &opts)?;
    let rows = report
        .rows
        .iter()
        .map(|row| {
            let b = bounds(&row.rect);
            vec![row.r, row.rect_id as f64, b[0], b[1], b[2], b[3], row.p_finite, row.p_limit, row.gap]
        })
        .collect();
    let status = if report.sup_gaps.is_empty() {
        Status::Infeasible(format!("all {} radii exceeded the resource limits", report.skipped.len()))
    } else if !report.converged {
        Status::CheckFailed(format!(
            "not converged: sup-gaps {:?}, threshold {}, monotone {}",
            report.sup_gaps.iter().map(|g| g.1).collect::<Vec<_>>(),
            report.threshold,
            report.monotone
        ))
    } else {
        Status::Ok
    };
    let pairs = |v: &[(f64, f64)]| v.iter().map(|&(r, x)| json!({ "r": r, "value": x })).collect::<Vec<_>>();
    Ok(RunOutput {
        header: vec!["r", "rect_id", "qmin", "qmax", "pmin", "pmax", "p_finite", "p_limit", "gap"],
        rows,
        results: json!({
            "lattice_step": schedule.common_step(),
            "sup_gaps": pairs(&report.sup_gaps),
            "skipped": report.skipped.iter().map(|(r, m)| json!({ "r": r, "reason": m })).collect::<Vec<_>>(),
            "monotone": report.monotone,
            "threshold": report.threshold,
            "converged": report.converged,
        }),
        error_budgets: json!({ "leaks": pairs(&report.leaks), "max_amplitudes": l.max_amplitudes }),
        status,
        config: cfg,
    })
}

fn husimi_map(cfg: ExperimentConfig) -> Result<RunOutput, CliError> {
    use rayon::prelude::*;
    let h = cfg.husimi.as_ref().expect("husimi present for this kind");
    let (t, s) = (cfg.t.to_density()?, cfg.s.to_density()?);
    let axis = |r: [f64; 2], n: usize| -> Vec<f64> { (0..n).map(|k| r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64).collect() };
    let (qs, ps) = (axis(h.q, h.points[0]), axis(h.p, h.points[1]));
    let rows: Vec<Vec<f64>> = qs
        .par_iter()
        .flat_map_iter(|&q| ps.iter().map(move |&p| (q, p)).collect::<Vec<_>>())
        .map(|(q, p)| vec![q, p, density(&t, &s, q, p)])
        .collect();
    let peak = rows.iter().fold(&rows[0], |best, r| if r[2] > best[2] { r } else { best });
    let (dq, dp) = (qs[1] - qs[0], ps[1] - ps[0]);
    // trapezoid rule over the map
    let mut mass = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let (a, b) = (i / ps.len(), i % ps.len());
        let wq = if a == 0 || a == qs.len() - 1 { 0.5 } else { 1.0 };
        let wp = if b == 0 || b == ps.len() - 1 { 0.5 } else { 1.0 };
        mass += wq * wp * row[2];
    }
    mass *= dq * dp;
    let min = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    Ok(RunOutput {
        header: vec!["q", "p", "density"],
        results: json!({ "peak_q": peak[0], "peak_p": peak[1], "peak_density": peak[2], "grid_mass": mass, "min_density": min }),
        error_budgets: json!({ "deficit_t": t.deficit(), "deficit_s": s.deficit(), "mass_outside_grid": 1.0 - mass }),
        rows,
        status: Status::Ok,
        config: cfg,
    })
}

/// Runs the experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let cfg = cfg.clone();
    info!("running {} with T = {}, S = {}", cfg.kind, cfg.t, cfg.s);
    match cfg.kind {
        ExperimentKind::GStatistics => g_statistics(cfg),
        ExperimentKind::Lemma1Check => lemma1_check(cfg),
        ExperimentKind::Lemma2Check => lemma2_check(cfg),
        ExperimentKind::ConvergenceSweep => sweep(cfg),
        ExperimentKind::HusimiMap => husimi_map(cfg),
    }
}

/// Writes the CSV table and JSON summary into `dir`; returns their paths.
pub fn write_outputs(out: &RunOutput, dir: &FsPath) -> Result<(PathBuf, PathBuf), CliError> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(&out.config.output.csv);
    let summary = dir.join(&out.config.output.summary);
    fs::write(&csv, out.csv())?;
    let mut text = serde_json::to_string_pretty(&out.summary()).expect("summary is plain JSON");
    text.push('\n');
    fs::write(&summary, text)?;
    Ok((csv, summary))
}

/// Runs, writes the results and `timing.json`, and returns the status.
pub fn execute(cfg: &ExperimentConfig, dir: &FsPath) -> Result<Status, CliError> {
    let start = Instant::now();
    let out = run_experiment(cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let (csv, summary) = write_outputs(&out, dir)?;
    let timing = json!({
        "kind": cfg.kind.name(),
        "wall_seconds": elapsed,
        "threads": rayon::current_num_threads(),
    });
    fs::write(dir.join("timing.json"), format!("{timing:#}\n"))?;
    info!("wrote {} and {} in {elapsed:.2} s", csv.display(), summary.display());
    Ok(out.status)
}
