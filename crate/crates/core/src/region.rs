//! Half-open intervals and rectangles used as outcome sets.

use std::fmt;

/// `[lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}) is reversed");
        Interval { lo, hi }
    }

    pub fn real_line() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        Interval { lo: self.lo * factor, hi: self.hi * factor }
    }

    pub fn shifted(&self, by: f64) -> Self {
        Interval { lo: self.lo + by, hi: self.hi + by }
    }

    /// Mirror image `-X`, reported half-open again.
    pub fn negated(&self) -> Self {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn clipped(&self, bound: f64) -> Self {
        Interval { lo: self.lo.max(-bound), hi: self.hi.min(bound) }
    }

    pub fn intersection(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi).max(lo);
        Interval { lo, hi }
    }

    /// Finite endpoints.
    pub fn endpoints(&self) -> impl Iterator<Item = f64> {
        [self.lo, self.hi].into_iter().filter(|x| x.is_finite())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Moves `x` to the nearest-below midpoint between lattice points
/// `k * step`, i.e. `(floor(x/step) + 1/2) * step`. Infinite values pass
/// through.
pub fn half_lattice(x: f64, step: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    ((x / step).floor() + 0.5) * step
}

impl Interval {
    /// Both finite endpoints moved off the lattice `k * step`.
    pub fn lattice_avoiding(&self, step: f64) -> Interval {
        Interval { lo: half_lattice(self.lo, step), hi: half_lattice(self.hi, step) }
    }
}

/// Finite union of half-open intervals, kept sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn new(parts: impl IntoIterator<Item = Interval>) -> Self {
        let mut parts: Vec<Interval> = parts.into_iter().filter(|i| !i.is_empty()).collect();
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for iv in parts {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        IntervalSet { parts: merged }
    }

    pub fn real_line() -> Self {
        IntervalSet { parts: vec![Interval::real_line()] }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn contains(&self, x: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        IntervalSet { parts: self.parts.iter().map(|p| p.scaled(factor)).collect() }
    }

    pub fn endpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.parts.iter().flat_map(|p| p.endpoints())
    }
}

impl From<Interval> for IntervalSet {
    fn from(iv: Interval) -> Self {
        IntervalSet::new([iv])
    }
}

/// `X × Y` with `X` on the q axis and `Y` on the p axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub q: Interval,
    pub p: Interval,
}

impl Rectangle {
    pub fn new(q: Interval, p: Interval) -> Self {
        Rectangle { q, p }
    }

    pub fn from_bounds(qmin: f64, qmax: f64, pmin: f64, pmax: f64) -> Self {
        Rectangle { q: Interval::new(qmin, qmax), p: Interval::new(pmin, pmax) }
    }

    pub fn plane() -> Self {
        Rectangle { q: Interval::real_line(), p: Interval::real_line() }
    }

    pub fn square(half: f64) -> Self {
        Rectangle::from_bounds(-half, half, -half, half)
    }

    pub fn contains(&self, q: f64, p: f64) -> bool {
        self.q.contains(q) && self.p.contains(p)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Rectangle { q: self.q.scaled(factor), p: self.p.scaled(factor) }
    }

    pub fn shifted(&self, dq: f64, dp: f64) -> Self {
        Rectangle { q: self.q.shifted(dq), p: self.p.shifted(dp) }
    }

    pub fn negated(&self) -> Self {
        Rectangle { q: self.q.negated(), p: self.p.negated() }
    }

    pub fn clipped(&self, bound: f64) -> Self {
        Rectangle { q: self.q.clipped(bound), p: self.p.clipped(bound) }
    }

    pub fn intersection(&self, other: &Rectangle) -> Rectangle {
        Rectangle { q: self.q.intersection(&other.q), p: self.p.intersection(&other.p) }
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty() || self.p.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.q.length() * self.p.length()
    }
}

/// `shape.0 × shape.1` tiling of `window` (finite), row-major with q
/// outermost. With `step`, every edge is moved to the half-lattice point
/// [`half_lattice`] at or below it, so the union is the window shifted by
/// at most `step`.
pub fn tiling(window: &Rectangle, shape: (usize, usize), step: Option<f64>) -> Vec<Rectangle> {
    let edges = |iv: &Interval, n: usize| -> Vec<f64> {
        (0..=n)
            .map(|k| {
                let e = iv.lo + (iv.hi - iv.lo) * k as f64 / n as f64;
                step.map_or(e, |s| half_lattice(e, s))
            })
            .collect()
    };
    let (qe, pe) = (edges(&window.q, shape.0), edges(&window.p, shape.1));
    let mut out = Vec::with_capacity(shape.0 * shape.1);
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            out.push(Rectangle::from_bounds(qe[i], qe[i + 1], pe[j], pe[j + 1]));
        }
    }
    out
}

impl fmt::Display for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x {}", self.q, self.p)
    }
}
