//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use octoport_core::convergence::{boundary_null_rectangles, convergence_sweep, AmplitudeSchedule, SweepOptions};
use octoport_core::eightport::{default_grid, JointOutcomeDistribution, Network, Path};
use octoport_core::fock::{coherent_state, required_dim};
use octoport_core::homodyne::{
    homodyne_probability, scaled_difference_distribution, skellam_pmf, HomodyneObservable, Realization,
};
use octoport_core::linalg::{c, C64};
use octoport_core::multimode::{apply_two_mode, prepare_mode4, BeamSplitter, MultimodeState};
use octoport_core::phasespace::{conjugate_state, density, displaced, lemma2_rhs, rectangle_probability};
use octoport_core::{Cutoff, DensityOperator, Interval, IntervalSet, Rectangle, Result};
use statrs::distribution::{ContinuousCDF, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn cut(d: usize) -> Cutoff {
    Cutoff::new(d).unwrap()
}

fn vacuum() -> DensityOperator {
    DensityOperator::vacuum(cut(2))
}

fn one_photon() -> DensityOperator {
    DensityOperator::fock(1, cut(3)).unwrap()
}

fn coherent_one() -> DensityOperator {
    DensityOperator::coherent(c(1.0, 0.0), Cutoff::for_amplitude(1.0)).unwrap()
}

fn named_states() -> Vec<(&'static str, DensityOperator)> {
    vec![("vacuum", vacuum()), ("|1>", one_photon()), ("coherent(1)", coherent_one())]
}

/// Mass of `N(0, sd^2)` on `[a, b)`.
fn normal_mass(sd: f64, a: f64, b: f64) -> f64 {
    let n = Normal::new(0.0, sd).unwrap();
    n.cdf(b) - n.cdf(a)
}

fn criterion_1() -> Result<Outcome> {
    let amps = [c(0.0, 0.0), c(0.8, 0.0), c(1.0, 0.5)];
    let d = cut(40);
    let bs = BeamSplitter::new(1, 2, d, d)?;
    let mut worst: f64 = 0.0;
    for &a in &amps {
        for &b in &amps {
            let (va, vb) = (coherent_state(a, d)?, coherent_state(b, d)?);
            let out = apply_two_mode(&bs, &MultimodeState::product(&[1, 2], &[&va, &vb])?, 1, 2)?;
            let (ea, eb) = (coherent_state((a - b) / SQRT_2, d)?, coherent_state((a + b) / SQRT_2, d)?);
            let expect = MultimodeState::product(&[1, 2], &[&ea, &eb])?;
            let diff: f64 = out
                .amplitudes()
                .unwrap()
                .iter()
                .zip(expect.amplitudes().unwrap())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff);
        }
    }
    outcome(worst <= 1e-6, format!("max residual {worst:.3e} (tol 1e-6)"))
}

fn criterion_2() -> Result<Outcome> {
    let d = cut(40);
    let mut worst: f64 = 0.0;
    for z in [1.0, 2.0] {
        for phi in [0.0, FRAC_PI_2] {
            let z = c(z, 0.0);
            let prepared = prepare_mode4(z, phi, d, d)?;
            let target = MultimodeState::product(
                &[3, 4],
                &[&coherent_state(z, d)?, &coherent_state(z * C64::from_polar(1.0, phi), d)?],
            )?;
            let fid = prepared.fidelity_with(target.amplitudes().unwrap())?;
            worst = worst.max(1.0 - fid);
        }
    }
    outcome(worst <= 1e-6, format!("min fidelity 1 - {worst:.3e} (tol 1e-6)"))
}

fn criterion_3(stats: &mut Vec<(String, JointOutcomeDistribution, f64)>) -> Result<Outcome> {
    let z = c(2.0, 0.0);
    let grid = default_grid(z);
    let mut worst: f64 = 0.0;
    let signals = named_states();
    let generators = [("vacuum", vacuum()), ("|1>", one_photon())];
    for (tn, t) in &signals {
        for (sn, s) in &generators {
            let net = Network::new(t, s, z, FRAC_PI_2)?;
            let direct = net.run(Path::Direct, &grid)?;
            let fact = net.run(Path::Factorized, &grid)?;
            for ((_, a), (_, b)) in direct.rectangle_probs.iter().zip(&fact.rectangle_probs) {
                worst = worst.max((a - b).abs());
            }
            stats.push((format!("direct T={tn} S={sn}"), direct.joint, direct.leak));
            stats.push((format!("factorized T={tn} S={sn}"), fact.joint, fact.leak));
        }
    }
    outcome(worst <= 1e-6, format!("max |direct - factorized| {worst:.3e} over 6 pairs x 64 rectangles (tol 1e-6)"))
}

fn criterion_4() -> Result<Outcome> {
    let x = IntervalSet::from(Interval::new(-1.0, 1.0));
    let z = Rectangle::square(1.0);
    let mut worst: f64 = 0.0;
    for (_, t) in named_states() {
        for (_, s) in named_states() {
            let rhs = lemma2_rhs(&t, &s, &x, &x)?;
            let lhs = rectangle_probability(&t, &conjugate_state(&s), &z)?;
            worst = worst.max((rhs - lhs).abs());
        }
    }
    outcome(worst <= 1e-4, format!("max |lemma2_rhs - E^(CSC^-1)| {worst:.3e} over 3x3 pairs (tol 1e-4)"))
}

fn criterion_5() -> Result<Outcome> {
    let schedule = AmplitudeSchedule::default_schedule(false);
    let rects = boundary_null_rectangles(schedule.common_step(), &Rectangle::square(4.0), (8, 8))?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t) in [("vacuum", vacuum()), ("coherent(1)", coherent_one())] {
        let report = convergence_sweep(&t, &vacuum(), &schedule, &rects, &SweepOptions::default())?;
        let gaps: Vec<f64> = report.sup_gaps.iter().map(|&(_, g)| g).collect();
        let ok = report.skipped.is_empty()
            && gaps.len() == 3
            && gaps.windows(2).all(|w| w[1] <= w[0])
            && gaps[2] <= 0.05;
        pass &= ok;
        parts.push(format!("T={name} sup-gaps {:?}", gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>()));
    }
    outcome(pass, format!("{} (non-increasing, <= 0.05 at r=3)", parts.join("; ")))
}

fn criterion_6() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let (q, p) = (-2.0 + i as f64, -2.0 + j as f64);
            let exact = (-(q * q + p * p) / 2.0).exp() / (2.0 * PI);
            worst = worst.max((density(&vacuum(), &vacuum(), q, p) - exact).abs());
        }
    }
    let t = coherent_one();
    let h = 0.05;
    let mut best = (f64::MIN, 0.0, 0.0);
    for i in 0..=80 {
        for j in 0..=80 {
            let (q, p) = (-1.0 + i as f64 * h, -2.0 + j as f64 * h);
            let v = density(&t, &vacuum(), q, p);
            if v > best.0 {
                best = (v, q, p);
            }
        }
    }
    let peak_ok = (best.1 - SQRT_2).abs() <= h && best.2.abs() <= h;
    outcome(
        worst <= 1e-8 && peak_ok,
        format!("max closed-form error {worst:.3e} at 25 points; coherent(1) peak at ({:.2}, {:.2}), grid {h}", best.1, best.2),
    )
}

fn criterion_7(stats: &[(String, JointOutcomeDistribution, f64)]) -> Result<Outcome> {
    let mut pass = true;
    let mut worst_add: f64 = 0.0;
    let mut min_mass: f64 = 1.0;
    let mut max_leak: f64 = 0.0;
    let mut inspected = 0;
    for (_, joint, leak) in stats {
        let tiles = default_grid(c(1.0 / joint.step(), 0.0));
        // the grid plus the four strips around it partition the plane
        let (lo, hi) = (tiles[0].q.lo, tiles[tiles.len() - 1].q.hi);
        let mut parts = tiles.clone();
        parts.push(Rectangle::new(Interval::new(f64::NEG_INFINITY, lo), Interval::real_line()));
        parts.push(Rectangle::new(Interval::new(hi, f64::INFINITY), Interval::real_line()));
        parts.push(Rectangle::new(Interval::new(lo, hi), Interval::new(f64::NEG_INFINITY, lo)));
        parts.push(Rectangle::new(Interval::new(lo, hi), Interval::new(hi, f64::INFINITY)));
        let probs: Vec<f64> = parts.iter().map(|r| joint.probability(r)).collect();
        pass &= probs.iter().all(|p| (0.0..=1.0).contains(p));
        let total = joint.total();
        worst_add = worst_add.max((probs.iter().sum::<f64>() - total).abs());
        min_mass = min_mass.min(total);
        max_leak = max_leak.max(*leak);
        inspected += 1;
    }
    // homodyne tables
    for (_, t) in named_states() {
        let obs = HomodyneObservable::for_signal(c(2.0, 0.0), 20, Realization::CountingAfterU)?;
        let dist = obs.distribution(&t)?;
        let halves = [Interval::new(f64::NEG_INFINITY, 0.1), Interval::new(0.1, f64::INFINITY)];
        let probs: Vec<f64> = halves.iter().map(|iv| dist.probability(&IntervalSet::from(*iv))).collect();
        pass &= probs.iter().all(|p| (0.0..=1.0).contains(p));
        worst_add = worst_add.max((probs.iter().sum::<f64>() - dist.total()).abs());
        min_mass = min_mass.min(dist.total());
        max_leak = max_leak.max(dist.leak());
        inspected += 1;
    }
    pass &= worst_add <= 1e-10 && min_mass >= 1.0 - 1e-4;
    outcome(
        pass,
        format!(
            "{inspected} tables: additivity error {worst_add:.3e} (tol 1e-10), min mass {min_mass:.12} (>= 1 - 1e-4), max reported leak {max_leak:.3e}"
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let x = IntervalSet::from(Interval::new(-0.5, 0.5));
    let p = homodyne_probability(&vacuum(), c(3.0, 0.0), &x, Realization::CountingAfterU)?;
    // ∫ pi^{-1/2} e^{-x^2} = mass of N(0, 1/2)
    let limit = normal_mass(std::f64::consts::FRAC_1_SQRT_2, -0.5, 0.5);
    let gap = (p - limit).abs();
    outcome(gap <= 0.02, format!("P(r=3) = {p:.6}, limit {limit:.6}, gap {gap:.4} (tol 0.02)"))
}

fn criterion_9() -> Result<Outcome> {
    // (a) vs (b)
    let mut real_gap: f64 = 0.0;
    let intervals = [Interval::new(-0.5, 0.5), Interval::new(0.1, 1.3), Interval::new(f64::NEG_INFINITY, -0.2)];
    for (_, t) in named_states() {
        for z in [c(1.0, 0.0), c(1.5, 1.0)] {
            let support = octoport_core::homodyne::effective_support(&t);
            let a = HomodyneObservable::for_signal(z, support, Realization::EigenDecomposition)?;
            let b = HomodyneObservable::for_signal(z, support, Realization::CountingAfterU)?;
            for iv in intervals {
                let x = IntervalSet::from(iv);
                real_gap = real_gap.max((a.probability(&t, &x)? - b.probability(&t, &x)?).abs());
            }
        }
    }
    // Skellam: |0> ⊗ |alpha> through the beam splitter, difference of counts
    let alpha = c(1.2, -0.4);
    let d = cut(required_dim(alpha.norm()));
    let bs = BeamSplitter::new(1, 2, d, d)?;
    let input = MultimodeState::product(&[1, 2], &[&coherent_state(c(0.0, 0.0), d)?, &coherent_state(alpha, d)?])?;
    let dist = scaled_difference_distribution(&apply_two_mode(&bs, &input, 1, 2)?, 1.0)?;
    let mu = alpha.norm_sqr() / 2.0;
    let skellam_gap = (-12..=12).map(|k| (dist.weight(k) - skellam_pmf(k, mu, mu)).abs()).fold(0.0, f64::max);
    // displacement covariance
    let t = one_photon();
    let s = DensityOperator::coherent(c(0.3, 0.2), Cutoff::for_amplitude(0.4))?;
    let (q0, p0) = (0.5, -0.5);
    let z = Rectangle::from_bounds(-0.3, 1.1, -1.2, 0.4);
    let lhs = rectangle_probability(&displaced(&t, q0, p0, cut(40))?, &s, &z)?;
    let rhs = rectangle_probability(&t, &s, &z.shifted(-q0, -p0))?;
    let cov_gap = (lhs - rhs).abs();
    outcome(
        real_gap <= 1e-8 && skellam_gap <= 1e-8 && cov_gap <= 1e-6,
        format!(
            "realizations {real_gap:.3e} (tol 1e-8); Skellam {skellam_gap:.3e} (tol 1e-8); covariance {cov_gap:.3e} (tol 1e-6)"
        ),
    )
}

fn report(id: usize, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let result = run();
    let elapsed = start.elapsed();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = limit.map_or(true, |l| elapsed <= l);
    let budget = limit.map_or(String::new(), |l| format!(", budget {:.0} s", l.as_secs_f64()));
    let ok = pass && in_time;
    println!(
        "criterion {id} [{}] {name}: {detail}; {:.2} s{budget}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() -> ExitCode {
    let mut stats = Vec::new();
    let results = [
        report(1, "beam-splitter coherent law", Some(Duration::from_secs(5)), criterion_1),
        report(2, "mode-4 preparation", None, criterion_2),
        report(3, "direct and factorized paths agree", Some(Duration::from_secs(300)), || criterion_3(&mut stats)),
        report(4, "position/momentum form equals E^(CSC^-1)", Some(Duration::from_secs(120)), criterion_4),
        report(5, "convergence to E^(CSC^-1)", Some(Duration::from_secs(600)), criterion_5),
        report(6, "Husimi closed form and peak", None, criterion_6),
        report(7, "statistics hygiene", None, || criterion_7(&stats)),
        report(8, "homodyne marginal limit", None, criterion_8),
        report(9, "oracle equivalences", None, criterion_9),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
