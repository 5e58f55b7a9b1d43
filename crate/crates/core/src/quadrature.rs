//! Composite Gauss–Legendre quadrature with adaptive cell halving.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::region::{Interval, Rectangle};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        if n == 1 {
            return GaussLegendre { nodes: vec![0.0], weights: vec![2.0] };
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                // P_n(x) and P_{n-1}(x) by the three-term recurrence
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureControls {
    /// Largest cell side before any adaptive refinement.
    pub cell: f64,
    /// Points per axis in each cell.
    pub order: usize,
    pub rel_tol: f64,
    /// Floor below which a cell's refinement change is ignored.
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureControls {
    fn default() -> Self {
        QuadratureControls { cell: 0.25, order: 8, rel_tol: 1e-6, abs_tol: 1e-13, max_depth: 8 }
    }
}

fn split(iv: &Interval, cell: f64) -> Vec<(f64, f64)> {
    assert!(iv.lo.is_finite() && iv.hi.is_finite(), "cannot split an infinite interval");
    if iv.is_empty() {
        return Vec::new();
    }
    let pieces = ((iv.length() / cell).ceil() as usize).max(1);
    let h = iv.length() / pieces as f64;
    (0..pieces)
        .map(|k| {
            let a = iv.lo + k as f64 * h;
            let b = if k + 1 == pieces { iv.hi } else { a + h };
            (a, b)
        })
        .collect()
}

/// Integrates a vector-valued integrand over a finite interval.
///
/// `f(x, w, acc)` must add `w * value(x)` into `acc`.
pub fn integrate_1d_vec<F>(f: F, len: usize, iv: Interval, controls: &QuadratureControls) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, &mut [f64]),
{
    let rule = GaussLegendre::new(controls.order);
    let mut total = vec![0.0; len];
    let eval = |a: f64, b: f64| {
        let mut acc = vec![0.0; len];
        for (x, w) in rule.mapped(a, b) {
            f(x, w, &mut acc);
        }
        acc
    };
    for (a, b) in split(&iv, controls.cell) {
        let mut stack = vec![(a, b, eval(a, b), 0u32)];
        while let Some((a, b, coarse, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let left = eval(a, m);
            let right = eval(m, b);
            let mut change: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for k in 0..len {
                let fine = left[k] + right[k];
                change = change.max((fine - coarse[k]).abs());
                scale = scale.max(fine.abs());
            }
            if change <= (controls.rel_tol * scale).max(controls.abs_tol) {
                for k in 0..len {
                    total[k] += left[k] + right[k];
                }
            } else if depth >= controls.max_depth {
                return Err(Error::Accuracy(format!(
                    "1D quadrature on [{a}, {b}) stalled: change {change:.3e} at depth {depth}"
                )));
            } else {
                stack.push((a, m, left, depth + 1));
                stack.push((m, b, right, depth + 1));
            }
        }
    }
    Ok(total)
}

/// Outcome of a 2D integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral2d {
    pub value: f64,
    /// Sum of the accepted cells' refinement changes.
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Tensor Gauss–Legendre over a finite rectangle; each initial cell is
/// halved in both directions until its value stabilises. Cells run in
/// parallel and are summed pairwise in a fixed order.
pub fn integrate_2d<F>(f: &F, rect: &Rectangle, controls: &QuadratureControls) -> Result<Integral2d>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if rect.is_empty() {
        return Ok(Integral2d { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let rule = GaussLegendre::new(controls.order);
    let qs = split(&rect.q, controls.cell);
    let ps = split(&rect.p, controls.cell);
    let cells: Vec<(f64, f64, f64, f64)> =
        qs.iter().flat_map(|&(qa, qb)| ps.iter().map(move |&(pa, pb)| (qa, qb, pa, pb))).collect();

    let results: Vec<Result<(f64, f64, usize)>> =
        cells.par_iter().map(|&(qa, qb, pa, pb)| adapt_cell(f, &rule, controls, qa, qb, pa, pb)).collect();

    let mut values = Vec::with_capacity(results.len());
    let mut errors = Vec::with_capacity(results.len());
    let mut evaluations = 0;
    for r in results {
        let (v, e, n) = r?;
        values.push(v);
        errors.push(e);
        evaluations += n;
    }
    Ok(Integral2d { value: pairwise_sum(&values), error_estimate: pairwise_sum(&errors), evaluations })
}

fn cell_rule<F: Fn(f64, f64) -> f64>(f: &F, rule: &GaussLegendre, qa: f64, qb: f64, pa: f64, pb: f64) -> f64 {
    let mut s = 0.0;
    for (q, wq) in rule.mapped(qa, qb) {
        let mut row = 0.0;
        for (p, wp) in rule.mapped(pa, pb) {
            row += wp * f(q, p);
        }
        s += wq * row;
    }
    s
}

fn adapt_cell<F: Fn(f64, f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    controls: &QuadratureControls,
    qa: f64,
    qb: f64,
    pa: f64,
    pb: f64,
) -> Result<(f64, f64, usize)> {
    let per_cell = rule.order() * rule.order();
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evaluations = per_cell;
    let mut stack = vec![(qa, qb, pa, pb, cell_rule(f, rule, qa, qb, pa, pb), 0u32)];
    while let Some((qa, qb, pa, pb, coarse, depth)) = stack.pop() {
        let qm = 0.5 * (qa + qb);
        let pm = 0.5 * (pa + pb);
        let kids = [
            (qa, qm, pa, pm),
            (qa, qm, pm, pb),
            (qm, qb, pa, pm),
            (qm, qb, pm, pb),
        ];
        let kid_vals: Vec<f64> = kids.iter().map(|&(a, b, c, d)| cell_rule(f, rule, a, b, c, d)).collect();
        evaluations += 4 * per_cell;
        let fine: f64 = kid_vals.iter().sum();
        let change = (fine - coarse).abs();
        if change <= (controls.rel_tol * fine.abs()).max(controls.abs_tol) {
            value += fine;
            err += change;
        } else if depth >= controls.max_depth {
            return Err(Error::Accuracy(format!(
                "2D quadrature stalled on cell [{qa}, {qb}) x [{pa}, {pb}): change {change:.3e}"
            )));
        } else {
            for (k, &(a, b, c, d)) in kids.iter().enumerate() {
                stack.push((a, b, c, d, kid_vals[k], depth + 1));
            }
        }
    }
    Ok((value, err, evaluations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for order in [1, 2, 5, 8, 16] {
            let gl = GaussLegendre::new(order);
            assert!((gl.weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * order - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let approx = gl.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((approx - exact).abs() < 1e-13, "order {order}");
            let even = 2 * (order - 1);
            let approx = gl.integrate(-1.0, 1.0, |x| x.powi(even as i32));
            assert!((approx - 2.0 / (even as f64 + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian_mass_in_1d() {
        let c = QuadratureControls::default();
        let v = integrate_1d_vec(
            |x, w, acc| acc[0] += w * (-x * x).exp(),
            1,
            Interval::new(-10.0, 10.0),
            &c,
        )
        .unwrap();
        assert!((v[0] - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mass_in_2d() {
        let c = QuadratureControls::default();
        let f = |q: f64, p: f64| (-(q * q + p * p) / 2.0).exp() / (2.0 * std::f64::consts::PI);
        let r = integrate_2d(&f, &Rectangle::square(9.0), &c).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stalls_are_reported() {
        let c = QuadratureControls { max_depth: 1, ..Default::default() };
        let f = |q: f64, _p: f64| if q < 0.03 { 0.0 } else { 1.0 };
        let r = integrate_2d(&f, &Rectangle::square(1.0), &c);
        assert!(matches!(r, Err(Error::Accuracy(_))), "{r:?}");
    }
}
