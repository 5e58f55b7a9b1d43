//! Rectangle-level weak convergence of `G^{r,S,phi}` to `E^{CSC^-1}` as
//! the reference amplitude `r` grows.

use log::{info, warn};

use crate::eightport::{Network, Path, DEFAULT_MAX_AMPLITUDES};
use crate::error::{Error, Result};
use crate::fock::DensityOperator;
use crate::linalg::c;
use crate::phasespace::{conjugate_state, PhaseSpaceMeasure};
use crate::region::{tiling, Rectangle};

/// Gap allowed at the last radius (a calibration, not a derived rate).
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Strictly increasing reference amplitudes `r_1 < ... < r_m` with a
/// common phase.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSchedule {
    radii: Vec<f64>,
    phi: f64,
}

impl AmplitudeSchedule {
    pub fn new(radii: Vec<f64>, phi: f64) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Config("amplitude schedule is empty".into()));
        }
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::Config(format!("radii must be positive and finite: {radii:?}")));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("radii must be strictly increasing: {radii:?}")));
        }
        Ok(AmplitudeSchedule { radii, phi })
    }

    /// `{1, 2, 3}` at `phi = pi/2`, with `4` added when `large_memory`.
    pub fn default_schedule(large_memory: bool) -> Self {
        let mut radii = vec![1.0, 2.0, 3.0];
        if large_memory {
            radii.push(4.0);
        }
        AmplitudeSchedule { radii, phi: std::f64::consts::FRAC_PI_2 }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// A lattice step whose half-offset points avoid every `{k/r}`: `1/lcm`
    /// for integer radii, `1/r_max` otherwise (checked by
    /// [`avoids_lattice`] in the sweep).
    pub fn common_step(&self) -> f64 {
        if self.radii.iter().all(|r| r.fract() == 0.0 && *r <= 1e6) {
            let l = self.radii.iter().fold(1u64, |acc, &r| lcm(acc, r as u64));
            1.0 / l as f64
        } else {
            1.0 / self.radii.last().copied().unwrap_or(1.0)
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Disjoint half-open tiling of `window` with every edge at a half-lattice
/// offset `(k + 1/2) * lattice_step`.
pub fn boundary_null_rectangles(lattice_step: f64, window: &Rectangle, grid_shape: (usize, usize)) -> Result<Vec<Rectangle>> {
    if !(lattice_step > 0.0) || !lattice_step.is_finite() {
        return Err(Error::Config(format!("lattice step must be positive, got {lattice_step}")));
    }
    if grid_shape.0 == 0 || grid_shape.1 == 0 {
        return Err(Error::Config("grid shape must be positive".into()));
    }
    if !window.q.lo.is_finite() || !window.q.hi.is_finite() || !window.p.lo.is_finite() || !window.p.hi.is_finite() {
        return Err(Error::Config("window must be finite".into()));
    }
    Ok(tiling(window, grid_shape, Some(lattice_step)))
}

/// True when no finite edge of any rectangle lies on `{k * step}`.
pub fn avoids_lattice(rects: &[Rectangle], step: f64) -> bool {
    rects.iter().all(|r| {
        [r.q.lo, r.q.hi, r.p.lo, r.p.hi].iter().filter(|e| e.is_finite()).all(|&e| {
            let k = e / step;
            (k - k.round()).abs() > 1e-9
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub r: f64,
    pub rect_id: usize,
    pub rect: Rectangle,
    pub p_finite: f64,
    pub p_limit: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `(r, max gap over rectangles)` for each radius that ran.
    pub sup_gaps: Vec<(f64, f64)>,
    /// Radii that could not run, with the reason.
    pub skipped: Vec<(f64, String)>,
    /// Truncation leak of each radius that ran.
    pub leaks: Vec<(f64, f64)>,
    /// Sup-gap never increases along the schedule.
    pub monotone: bool,
    pub threshold: f64,
    /// Every gap at the last radius is within `threshold` and the schedule
    /// is monotone.
    pub converged: bool,
}

/// Options of [`convergence_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub path: Path,
    pub max_amplitudes: usize,
    pub threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { path: Path::Direct, max_amplitudes: DEFAULT_MAX_AMPLITUDES, threshold: DEFAULT_THRESHOLD }
    }
}

/// Limit probabilities `Tr[T E^{CSC^-1}(Z)]`.
pub fn limit_probabilities(t: &DensityOperator, s: &DensityOperator, rects: &[Rectangle]) -> Result<Vec<f64>> {
    PhaseSpaceMeasure::new(conjugate_state(s)).rectangle_probabilities(t, rects)
}

/// Compares `Tr[T G^{r,S,phi}(Z)]` against `Tr[T E^{CSC^-1}(Z)]` for every
/// radius in the schedule and rectangle in `rects`.
pub fn convergence_sweep(
    t: &DensityOperator,
    s: &DensityOperator,
    schedule: &AmplitudeSchedule,
    rects: &[Rectangle],
    options: &SweepOptions,
) -> Result<ConvergenceReport> {
    for &r in schedule.radii() {
        if !avoids_lattice(rects, 1.0 / r) {
            warn!("rectangle edges meet the outcome lattice of r = {r}");
        }
    }
    let limit = limit_probabilities(t, s, rects)?;
    let mut tables = Vec::new();
    let mut rows = Vec::new();
    let mut sup_gaps = Vec::new();
    let mut skipped = Vec::new();
    let mut leaks = Vec::new();
    for &r in schedule.radii() {
        let stats = Network::new(t, s, c(r, 0.0), schedule.phi())
            .map(|n| n.with_max_amplitudes(options.max_amplitudes))
            .and_then(|n| n.run(options.path, rects));
        let stats = match stats {
            Ok(g) => g,
            Err(Error::Infeasible(msg)) => {
                warn!("skipping r = {r}: {msg}");
                skipped.push((r, msg));
                continue;
            }
            Err(e) => return Err(e),
        };
        let finite: Vec<f64> = stats.rectangle_probs.iter().map(|&(_, p)| p).collect();
        let mut sup: f64 = 0.0;
        for (k, rect) in rects.iter().enumerate() {
            let gap = (finite[k] - limit[k]).abs();
            sup = sup.max(gap);
            rows.push(ConvergenceRow { r, rect_id: k, rect: *rect, p_finite: finite[k], p_limit: limit[k], gap });
        }
        info!("r = {r}: sup-gap {sup:.6}");
        sup_gaps.push((r, sup));
        leaks.push((r, stats.leak));
        tables.push(finite);
    }
    let monotone = sup_gaps.windows(2).all(|w| w[1].1 <= w[0].1);
    let converged = match tables.last() {
        Some(last) => monotone && last.iter().zip(&limit).all(|(a, b)| (a - b).abs() <= options.threshold),
        None => false,
    };
    Ok(ConvergenceReport { rows, sup_gaps, skipped, leaks, monotone, threshold: options.threshold, converged })
}

/// Outcome of [`weak_convergence_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeakConvergence {
    pub converged: bool,
    pub sup_gaps: Vec<f64>,
}

/// True iff every rectangle's gap at the last table is within `threshold`
/// and the sup-gap does not increase over the last two tables.
pub fn weak_convergence_check(tables: &[Vec<f64>], limit: &[f64], threshold: f64) -> Result<WeakConvergence> {
    if tables.is_empty() {
        return Err(Error::Shape("no tables to compare".into()));
    }
    if let Some(bad) = tables.iter().position(|t| t.len() != limit.len()) {
        return Err(Error::Shape(format!(
            "table {bad} has {} rectangles, limit has {}",
            tables[bad].len(),
            limit.len()
        )));
    }
    let sup_gaps: Vec<f64> = tables
        .iter()
        .map(|t| t.iter().zip(limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let last = sup_gaps.len() - 1;
    let settled = sup_gaps[last] <= threshold;
    let non_increasing = last == 0 || sup_gaps[last] <= sup_gaps[last - 1];
    Ok(WeakConvergence { converged: settled && non_increasing, sup_gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Cutoff;
    use crate::homodyne::{homodyne_probability, quadrature_probability, Realization};
    use crate::phasespace::rectangle_probability;
    use crate::region::{Interval, IntervalSet};
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::f64::consts::SQRT_2;

    fn vac() -> DensityOperator {
        DensityOperator::vacuum(Cutoff::new(2).unwrap())
    }

    #[test]
    fn schedule_validation_and_step() {
        assert!(AmplitudeSchedule::new(vec![1.0, 1.0], 0.0).is_err());
        assert!(AmplitudeSchedule::new(vec![], 0.0).is_err());
        assert!(AmplitudeSchedule::new(vec![-1.0], 0.0).is_err());
        let s = AmplitudeSchedule::default_schedule(false);
        assert_eq!(s.radii(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.common_step(), 1.0 / 6.0);
        assert_eq!(AmplitudeSchedule::default_schedule(true).common_step(), 1.0 / 12.0);
    }

    #[test]
    fn tiling_is_disjoint_and_avoids_the_lattice() {
        let rects = boundary_null_rectangles(0.5, &Rectangle::square(4.0), (8, 8)).unwrap();
        assert_eq!(rects.len(), 64);
        let area: f64 = rects.iter().map(|r| r.area()).sum();
        assert!((area - 64.0).abs() < 1e-12);
        for (a, ra) in rects.iter().enumerate() {
            for rb in &rects[a + 1..] {
                assert!(ra.intersection(rb).is_empty());
            }
            // closed under the pairwise intersections used in tests
            assert_eq!(ra.intersection(ra), *ra);
        }
        assert!(avoids_lattice(&rects, 0.5));
        let common = boundary_null_rectangles(1.0 / 6.0, &Rectangle::square(4.0), (8, 8)).unwrap();
        for r in [1.0, 2.0, 3.0] {
            assert!(avoids_lattice(&common, 1.0 / r));
        }
        assert!(!avoids_lattice(&[Rectangle::square(1.0)], 0.5));
        assert!(boundary_null_rectangles(0.0, &Rectangle::square(1.0), (2, 2)).is_err());
    }

    #[test]
    fn constant_sequence_equal_to_limit() {
        let limit = vec![0.1, 0.2, 0.7];
        let res = weak_convergence_check(&[limit.clone(), limit.clone()], &limit, DEFAULT_THRESHOLD).unwrap();
        assert!(res.converged);
        assert!(res.sup_gaps.iter().all(|&g| g == 0.0));
        assert!(weak_convergence_check(&[vec![0.1]], &limit, 0.05).is_err());
    }

    #[test]
    fn shrinking_gaussians_approach_a_point_mass() {
        // N(0, 1/r) in each coordinate on a square around the origin
        let square = 0.5;
        let tables: Vec<Vec<f64>> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&r: &f64| {
                let n = Normal::new(0.0, (1.0 / r).sqrt()).unwrap();
                vec![(n.cdf(square) - n.cdf(-square)).powi(2)]
            })
            .collect();
        let res = weak_convergence_check(&tables, &[1.0], DEFAULT_THRESHOLD).unwrap();
        assert!(res.converged);
        assert!(res.sup_gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(res.sup_gaps[3] < 1e-6);
    }

    #[test]
    fn homodyne_marginal_sequence_converges() {
        let t = vac();
        let mut tables = Vec::new();
        let mut limit = Vec::new();
        for r in [1.0, 2.0, 3.0] {
            let x = IntervalSet::from(Interval::new(-0.5, 0.5).lattice_avoiding(1.0 / (SQRT_2 * r)));
            tables.push(vec![homodyne_probability(&t, c(r, 0.0), &x, Realization::CountingAfterU).unwrap()]);
            limit.push(quadrature_probability(&t, 0.0, &x).unwrap());
        }
        // the interval follows each lattice, so compare differences with zero
        let diffs: Vec<Vec<f64>> = tables.iter().zip(&limit).map(|(t, l)| vec![t[0] - l]).collect();
        let res = weak_convergence_check(&diffs, &[0.0], DEFAULT_THRESHOLD).unwrap();
        assert!(res.converged, "{:?}", res.sup_gaps);
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let schedule = AmplitudeSchedule::new(vec![1.0, 2.0], std::f64::consts::FRAC_PI_2).unwrap();
        let mut rects = boundary_null_rectangles(schedule.common_step(), &Rectangle::square(2.0), (2, 2)).unwrap();
        rects.push(Rectangle::plane());
        let report = convergence_sweep(&vac(), &vac(), &schedule, &rects, &SweepOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 2 * rects.len());
        for row in &report.rows {
            assert_eq!(row.gap, (row.p_finite - row.p_limit).abs());
        }
        for &(r, sup) in &report.sup_gaps {
            let max = report.rows.iter().filter(|row| row.r == r).map(|row| row.gap).fold(0.0, f64::max);
            assert_eq!(sup, max);
        }
        // whole plane: only truncation leaks differ
        for row in report.rows.iter().filter(|row| row.rect_id == rects.len() - 1) {
            assert!(row.gap <= 2e-4, "{row:?}");
        }
    }

    #[test]
    fn coherent_limit_is_the_husimi_integral() {
        let t = DensityOperator::coherent(c(1.0, 0.0), Cutoff::for_amplitude(1.0)).unwrap();
        let rects = [Rectangle::from_bounds(0.25, 2.25, -1.0, 1.0), Rectangle::from_bounds(-1.0, 0.25, 0.0, 3.0)];
        let lim = limit_probabilities(&t, &vac(), &rects).unwrap();
        for (rect, l) in rects.iter().zip(lim) {
            assert!((l - rectangle_probability(&t, &vac(), rect).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_radius_is_skipped() {
        let schedule = AmplitudeSchedule::new(vec![1.0, 2.0], 0.0).unwrap();
        let opts = SweepOptions { max_amplitudes: 200_000, ..SweepOptions::default() };
        let rects = [Rectangle::from_bounds(-0.75, 0.75, -0.75, 0.75)];
        let report = convergence_sweep(&vac(), &vac(), &schedule, &rects, &opts).unwrap();
        assert_eq!(report.sup_gaps.len(), 1);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, 2.0);
    }
}
