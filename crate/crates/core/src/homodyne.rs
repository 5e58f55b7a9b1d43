//! Balanced homodyne detection: the observable `E^z` measured by a single
//! 50-50 beam splitter with a coherent auxiliary input `|z>` and a scaled
//! photon-number difference, and the rotated-quadrature measure it
//! approaches as `|z|` grows.
//!
//! `E^z(X) = V* P^{|z|^-1 A}(X) V` with `V psi = psi ⊗ |z>` and
//! `A = (a ⊗ a† + a† ⊗ a)/sqrt 2`. Two realisations are provided:
//!
//! * [`Realization::EigenDecomposition`] diagonalises `A` sector by sector
//!   (it conserves the total photon number) and bins its eigenvalues.
//! * [`Realization::CountingAfterU`] uses `U† N⁻ U / sqrt 2 = A`, where `U`
//!   is the beam splitter with the signal as primary mode and
//!   `N⁻ = N_aux - N_sig`; the outcome `k/(sqrt2 |z|)` is read off the
//!   photon counts after `U`.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{self, hermite_functions_into, required_dim, Cutoff, DensityOperator};
use crate::linalg::{self, CMatrix, C64};
use crate::multimode::{BeamSplitter, MultimodeState, TwoModeGate};
use crate::quadrature::{integrate_1d_vec, QuadratureControls};
use crate::region::{Interval, IntervalSet};

/// Eigenvalues closer than this are merged into one outcome.
pub const EIGENVALUE_BIN_TOLERANCE: f64 = 1e-10;

/// An outcome within this distance of an interval endpoint is a boundary atom.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Realization {
    EigenDecomposition,
    #[default]
    CountingAfterU,
}

/// One outcome value of `|z|^-1 A` with its compressed effect on the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeAtom {
    pub value: f64,
    pub effect: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneObservable {
    z: C64,
    signal: Cutoff,
    aux: Cutoff,
    realization: Realization,
    atoms: Vec<OutcomeAtom>,
    aux_deficit: f64,
}

impl HomodyneObservable {
    pub fn new(z: C64, signal: Cutoff, aux: Cutoff, realization: Realization) -> Result<Self> {
        if !(z.norm() > 0.0) || !z.norm().is_finite() {
            return Err(Error::Config(format!("local oscillator amplitude must be nonzero, got {z}")));
        }
        let reference = fock::coherent_state(z, aux)?;
        let zc = reference.coeffs();
        let atoms = match realization {
            Realization::CountingAfterU => counting_atoms(z, signal, aux, zc.as_slice())?,
            Realization::EigenDecomposition => eigen_atoms(z, signal, aux, zc.as_slice()),
        };
        Ok(HomodyneObservable { z, signal, aux, realization, atoms, aux_deficit: reference.norm_deficit() })
    }

    /// Cutoffs wide enough that every total-photon sector the signal and
    /// reference populate is represented exactly: a sector `N` is exact when
    /// `N` is below both cutoffs.
    pub fn for_signal(z: C64, signal_support: usize, realization: Realization) -> Result<Self> {
        let d = Cutoff::new((required_dim(z.norm()) + signal_support).max(2))?;
        Self::new(z, d, d, realization)
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn signal_cutoff(&self) -> Cutoff {
        self.signal
    }

    pub fn aux_cutoff(&self) -> Cutoff {
        self.aux
    }

    pub fn realization(&self) -> Realization {
        self.realization
    }

    pub fn atoms(&self) -> &[OutcomeAtom] {
        &self.atoms
    }

    pub fn aux_deficit(&self) -> f64 {
        self.aux_deficit
    }

    /// Spacing of the outcome lattice `k / (sqrt2 |z|)`.
    pub fn lattice_step(&self) -> f64 {
        1.0 / (SQRT_2 * self.z.norm())
    }

    /// `E^z(X)` on the signal mode.
    pub fn effect(&self, x: &IntervalSet) -> CMatrix {
        let d = self.signal.dim();
        let mut m = CMatrix::zeros(d, d);
        for atom in self.atoms.iter().filter(|a| x.contains(a.value)) {
            m += &atom.effect;
        }
        m
    }

    /// Outcomes lying on an endpoint of `x`.
    pub fn boundary_atoms(&self, x: &IntervalSet) -> Vec<f64> {
        let ends: Vec<f64> = x.endpoints().collect();
        self.atoms
            .iter()
            .map(|a| a.value)
            .filter(|v| ends.iter().any(|e| (e - v).abs() <= BOUNDARY_TOLERANCE))
            .collect()
    }

    fn check_state(&self, t: &DensityOperator) -> Result<DensityOperator> {
        if t.dim() == self.signal.dim() {
            Ok(t.clone())
        } else {
            t.resized(self.signal)
        }
    }

    /// `Tr[T E^z(X)]`.
    pub fn probability(&self, t: &DensityOperator, x: &IntervalSet) -> Result<f64> {
        let boundary = self.boundary_atoms(x);
        if !boundary.is_empty() {
            warn!("interval endpoints coincide with homodyne outcomes {boundary:?}");
        }
        let t = self.check_state(t)?;
        Ok((t.matrix() * self.effect(x)).trace().re)
    }

    pub fn distribution(&self, t: &DensityOperator) -> Result<OutcomeDistribution> {
        let t = self.check_state(t)?;
        let step = self.lattice_step();
        let mut weights = BTreeMap::new();
        let mut off_lattice = 0.0;
        for atom in &self.atoms {
            let p = (t.matrix() * &atom.effect).trace().re;
            let k = (atom.value / step).round();
            if (atom.value - k * step).abs() > 1e-8 {
                off_lattice += p.abs();
            }
            *weights.entry(k as i64).or_insert(0.0) += p;
        }
        Ok(OutcomeDistribution { lattice_step: step, weights, leak: t.deficit() + self.aux_deficit, off_lattice })
    }
}

fn counting_atoms(z: C64, signal: Cutoff, aux: Cutoff, zc: &[C64]) -> Result<Vec<OutcomeAtom>> {
    let (ds, da) = (signal.dim(), aux.dim());
    let u = BeamSplitter::new(1, 3, signal, aux)?;
    // column n: U (|n> ⊗ |z>) in the (signal, aux) layout
    let mut columns = Vec::with_capacity(ds);
    let mut input = vec![C64::default(); ds * da];
    let mut out = vec![C64::default(); ds * da];
    for n in 0..ds {
        input.iter_mut().for_each(|x| *x = C64::default());
        input[n * da..(n + 1) * da].copy_from_slice(zc);
        u.apply_local(&input, &mut out);
        columns.push(out.clone());
    }
    let step = 1.0 / (SQRT_2 * z.norm());
    let mut atoms = Vec::new();
    for k in -(ds as i64 - 1)..=(da as i64 - 1) {
        let rows: Vec<usize> = (0..ds)
            .filter_map(|j| {
                let na = j as i64 + k;
                (0..da as i64).contains(&na).then(|| j * da + na as usize)
            })
            .collect();
        let r = CMatrix::from_fn(rows.len(), ds, |i, n| columns[n][rows[i]]);
        let effect = r.adjoint() * r;
        atoms.push(OutcomeAtom { value: k as f64 * step, effect });
    }
    Ok(atoms)
}

fn eigen_atoms(z: C64, signal: Cutoff, aux: Cutoff, zc: &[C64]) -> Vec<OutcomeAtom> {
    let (ds, da) = (signal.dim(), aux.dim());
    let modulus = z.norm();
    let mut spectrum: Vec<(f64, Vec<C64>)> = Vec::new();
    for total in 0..(ds + da - 1) {
        let lo = total.saturating_sub(da - 1);
        let hi = total.min(ds - 1);
        let size = hi - lo + 1;
        // A on |j, total - j>, j = signal photons
        let mut a = DMatrix::<f64>::zeros(size, size);
        for (k, j) in (lo..=hi).enumerate() {
            let na = total - j;
            if k + 1 < size {
                // a_sig† a_aux |j, na> = sqrt((j+1) na) |j+1, na-1>
                a[(k + 1, k)] = ((j + 1) as f64 * na as f64).sqrt() / SQRT_2;
                a[(k, k + 1)] = a[(k + 1, k)];
            }
        }
        let (vals, vecs) = linalg::symmetric_eigen(&a);
        for (e, &lambda) in vals.iter().enumerate() {
            // <m, z | v> for signal level m
            let mut w = vec![C64::default(); ds];
            for (k, j) in (lo..=hi).enumerate() {
                w[j] = zc[total - j].conj() * vecs[(k, e)];
            }
            // complete sectors have the integer spectrum k / sqrt2
            let k = (lambda * SQRT_2).round();
            let value = if (lambda * SQRT_2 - k).abs() < 1e-8 { k / (SQRT_2 * modulus) } else { lambda / modulus };
            spectrum.push((value, w));
        }
    }
    spectrum.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<OutcomeAtom> = Vec::new();
    for (value, w) in spectrum {
        let col = linalg::CVector::from_vec(w);
        let proj = &col * col.adjoint();
        match atoms.last_mut() {
            Some(last) if (value - last.value).abs() <= EIGENVALUE_BIN_TOLERANCE => last.effect += proj,
            _ => atoms.push(OutcomeAtom { value, effect: proj }),
        }
    }
    atoms
}

/// Probability table on the lattice `k * lattice_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    lattice_step: f64,
    weights: BTreeMap<i64, f64>,
    /// Truncation deficit of the states that produced the table.
    leak: f64,
    /// Weight of outcomes that were snapped onto the lattice.
    off_lattice: f64,
}

impl OutcomeDistribution {
    pub fn new(lattice_step: f64, weights: BTreeMap<i64, f64>, leak: f64) -> Self {
        OutcomeDistribution { lattice_step, weights, leak, off_lattice: 0.0 }
    }

    pub fn lattice_step(&self) -> f64 {
        self.lattice_step
    }

    pub fn weights(&self) -> &BTreeMap<i64, f64> {
        &self.weights
    }

    pub fn weight(&self, k: i64) -> f64 {
        self.weights.get(&k).copied().unwrap_or(0.0)
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn off_lattice(&self) -> f64 {
        self.off_lattice
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn probability(&self, x: &IntervalSet) -> f64 {
        self.weights.iter().filter(|(&k, _)| x.contains(k as f64 * self.lattice_step)).map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().map(|(&k, p)| k as f64 * self.lattice_step * p).sum::<f64>() / self.total()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.weights.iter().map(|(&k, p)| (k as f64 * self.lattice_step - m).powi(2) * p).sum::<f64>() / self.total()
    }
}

/// Distribution of `(n_second - n_first) / scale` for a two-mode state,
/// with modes taken in the state's own order.
pub fn scaled_difference_distribution(state: &MultimodeState, scale: f64) -> Result<OutcomeDistribution> {
    let dims = state.system().dims();
    if dims.len() != 2 {
        return Err(Error::Shape(format!("number difference needs two modes, got {}", dims.len())));
    }
    if !(scale > 0.0) {
        return Err(Error::Config(format!("scale must be positive, got {scale}")));
    }
    let dist = crate::multimode::joint_number_distribution(state);
    let mut weights = BTreeMap::new();
    for (flat, &p) in dist.probabilities().iter().enumerate() {
        let (n1, n2) = (flat / dims[1], flat % dims[1]);
        *weights.entry(n2 as i64 - n1 as i64).or_insert(0.0) += p;
    }
    Ok(OutcomeDistribution::new(1.0 / scale, weights, state.deficit()))
}

/// `Tr[T E^z(X)]` with default cutoffs for `T` and `|z|`.
pub fn homodyne_probability(t: &DensityOperator, z: C64, x: &IntervalSet, realization: Realization) -> Result<f64> {
    let obs = HomodyneObservable::for_signal(z, effective_support(t), realization)?;
    obs.probability(t, x)
}

/// Index of the highest level carrying weight above `1e-16`, plus one.
pub fn effective_support(t: &DensityOperator) -> usize {
    let m = t.matrix();
    (0..t.dim()).rev().find(|&n| m[(n, n)].re > 1e-16).map_or(1, |n| n + 1)
}

/// Gram matrix `G_mn = ∫_X h_m(x) h_n(x) dx` of the first `dim` Hermite
/// functions: the position projector `P^Q(X)` in the Fock basis.
pub fn position_projector(dim: usize, x: &IntervalSet, controls: &QuadratureControls) -> Result<DMatrix<f64>> {
    let bound = fock::hermite_support(dim);
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for part in x.parts() {
        let iv: Interval = part.clipped(bound);
        if iv.is_empty() {
            continue;
        }
        let flat = integrate_1d_vec(
            |x, w, acc| {
                let mut h = vec![0.0; dim];
                hermite_functions_into(x, &mut h);
                for m in 0..dim {
                    let hm = w * h[m];
                    if hm == 0.0 {
                        continue;
                    }
                    for n in m..dim {
                        acc[m * dim + n] += hm * h[n];
                    }
                }
            },
            dim * dim,
            iv,
            controls,
        )?;
        for m in 0..dim {
            for n in m..dim {
                g[(m, n)] += flat[m * dim + n];
                if n != m {
                    g[(n, m)] += flat[m * dim + n];
                }
            }
        }
    }
    Ok(g)
}

/// The Fourier–Plancherel operator in the Fock basis, `F h_n = (-i)^n h_n`,
/// with exact entries.
pub fn fourier_diagonal(dim: usize) -> Vec<C64> {
    const CYCLE: [C64; 4] = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    (0..dim).map(|n| CYCLE[n % 4]).collect()
}

/// Rotation taking the rotated quadrature `Q_theta = e^{i theta N} Q e^{-i theta N}`
/// to `Q`: coefficients pick up `e^{-i theta n}`. At `theta = pi/2` this is
/// the Fourier–Plancherel diagonal `(-i)^n`.
pub fn quadrature_rotation(theta: f64, dim: usize) -> Vec<C64> {
    if theta == std::f64::consts::FRAC_PI_2 {
        return fourier_diagonal(dim);
    }
    (0..dim).map(|n| C64::from_polar(1.0, -theta * n as f64)).collect()
}

/// `Tr[T P^{Q_theta}(X)]`.
pub fn quadrature_probability(t: &DensityOperator, theta: f64, x: &IntervalSet) -> Result<f64> {
    quadrature_probability_with(t, theta, x, &QuadratureControls::default())
}

pub fn quadrature_probability_with(
    t: &DensityOperator,
    theta: f64,
    x: &IntervalSet,
    controls: &QuadratureControls,
) -> Result<f64> {
    let d = t.dim();
    let r = quadrature_rotation(theta, d);
    let g = position_projector(d, x, controls)?;
    let rho = t.matrix();
    let mut total = C64::default();
    for m in 0..d {
        for n in 0..d {
            // (R rho R†)_{mn} G_{nm}
            total += r[m] * rho[(m, n)] * r[n].conj() * g[(n, m)];
        }
    }
    Ok(total.re)
}

/// Skellam law: difference of independent Poisson(mu1) and Poisson(mu2)
/// counts, by direct summation over the pair distribution.
pub fn skellam_pmf(k: i64, mu1: f64, mu2: f64) -> f64 {
    let ln_poisson = |n: u64, mu: f64| -> f64 {
        if mu == 0.0 {
            return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        n as f64 * mu.ln() - mu - (2..=n).map(|j| (j as f64).ln()).sum::<f64>()
    };
    let start = if k < 0 { (-k) as u64 } else { 0 };
    let mut sum = 0.0;
    for n2 in start..start + 400 {
        let n1 = (n2 as i64 + k) as u64;
        sum += (ln_poisson(n1, mu1) + ln_poisson(n2, mu2)).exp();
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::fock::{coherent_state, StateVector};
    use crate::multimode::apply_two_mode;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cut(d: usize) -> Cutoff {
        Cutoff::new(d).unwrap()
    }

    fn gaussian_mass(mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(mean, var.sqrt()).unwrap();
        n.cdf(hi) - n.cdf(lo)
    }

    #[test]
    fn whole_line_is_normalised() {
        let t = DensityOperator::fock(1, cut(6)).unwrap();
        let p = homodyne_probability(&t, c(2.0, 0.0), &IntervalSet::real_line(), Realization::CountingAfterU).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vacuum_at_r3_matches_skellam_oracle() {
        // On X = [-0.5, 0.5) the r = 3 observable sees the atoms k = -2..=2
        // of Skellam(4.5, 4.5) at spacing 1/(3 sqrt2).
        let t = DensityOperator::vacuum(cut(4));
        let x = IntervalSet::from(Interval::new(-0.5, 0.5));
        let p = homodyne_probability(&t, c(3.0, 0.0), &x, Realization::CountingAfterU).unwrap();
        let oracle: f64 = (-2..=2).map(|k| skellam_pmf(k, 4.5, 4.5)).sum();
        assert!((p - oracle).abs() < 1e-9, "{p} vs {oracle}");
    }

    #[test]
    fn vacuum_near_quadrature_limit_on_lattice_avoiding_interval() {
        let t = DensityOperator::vacuum(cut(4));
        let z = c(3.0, 0.0);
        let step = 1.0 / (SQRT_2 * 3.0);
        let iv = Interval::new(-0.5, 0.5).lattice_avoiding(step);
        let x = IntervalSet::from(iv);
        let p = homodyne_probability(&t, z, &x, Realization::CountingAfterU).unwrap();
        let limit = gaussian_mass(0.0, 0.5, iv.lo, iv.hi);
        assert!((p - limit).abs() <= 0.02, "{p} vs {limit}");
        assert!((gaussian_mass(0.0, 0.5, -0.5, 0.5) - 0.5205).abs() < 1e-4);
    }

    #[test]
    fn realizations_agree() {
        let t = DensityOperator::fock(1, cut(4)).unwrap();
        let x = IntervalSet::from(Interval::new(0.0, 1.0));
        let z = c(2.0, 0.0);
        let a = HomodyneObservable::for_signal(z, 2, Realization::EigenDecomposition).unwrap();
        let b = HomodyneObservable::for_signal(z, 2, Realization::CountingAfterU).unwrap();
        let (pa, pb) = (a.probability(&t, &x).unwrap(), b.probability(&t, &x).unwrap());
        assert!((pa - pb).abs() <= 1e-8, "{pa} vs {pb}");
        // the two agree wherever the total-photon sectors are complete
        let (ea, eb) = (a.effect(&x), b.effect(&x));
        for m in 0..10 {
            for n in 0..10 {
                assert!((ea[(m, n)] - eb[(m, n)]).norm() < 1e-8, "{m} {n} {} {}", ea[(m, n)], eb[(m, n)]);
            }
        }
    }

    #[test]
    fn effects_are_positive_contractions_and_additive() {
        let obs = HomodyneObservable::for_signal(c(1.5, 0.5), 4, Realization::CountingAfterU).unwrap();
        let x = IntervalSet::from(Interval::new(-0.7, 0.3));
        let (vals, _) = linalg::hermitian_eigen(&obs.effect(&x));
        assert!(vals[0] <= 1.0 + 1e-10 && *vals.last().unwrap() >= -1e-10);
        let t = DensityOperator::coherent(c(0.3, -0.2), cut(8)).unwrap();
        let whole = obs.probability(&t, &IntervalSet::from(Interval::new(-1.0, 1.0))).unwrap();
        let left = obs.probability(&t, &IntervalSet::from(Interval::new(-1.0, 0.1))).unwrap();
        let right = obs.probability(&t, &IntervalSet::from(Interval::new(0.1, 1.0))).unwrap();
        assert!((whole - left - right).abs() <= 1e-10);
    }

    #[test]
    fn skellam_law_after_beam_splitter() {
        let z = c(2.0, 0.0);
        let k = cut(40);
        let vac = StateVector::basis(0, k).unwrap();
        let coh = coherent_state(z, k).unwrap();
        let state = MultimodeState::product(&[1, 3], &[&vac, &coh]).unwrap();
        let out = apply_two_mode(&BeamSplitter::new(1, 3, k, k).unwrap(), &state, 1, 3).unwrap();
        let dist = scaled_difference_distribution(&out, z.norm()).unwrap();
        assert!((dist.weight(0) - skellam_pmf(0, 2.0, 2.0)).abs() <= 1e-8);
        assert!((dist.weight(3) - skellam_pmf(3, 2.0, 2.0)).abs() <= 1e-8);
        assert!(dist.total() >= 1.0 - 1e-8);
    }

    #[test]
    fn skellam_oracle_against_bessel_value() {
        // P(0) = e^{-4} I_0(4), I_0(4) = 11.301921952136330
        assert!((skellam_pmf(0, 2.0, 2.0) - (-4.0f64).exp() * 11.301921952136330).abs() < 1e-14);
    }

    #[test]
    fn vacuum_difference_is_point_mass() {
        let vac = StateVector::basis(0, cut(3)).unwrap();
        let s = MultimodeState::product(&[1, 2], &[&vac, &vac]).unwrap();
        let d = scaled_difference_distribution(&s, 1.0).unwrap();
        assert_eq!(d.weight(0), 1.0);
    }

    #[test]
    fn quadrature_of_vacuum() {
        let t = DensityOperator::vacuum(cut(5));
        let all = quadrature_probability(&t, 0.0, &IntervalSet::real_line()).unwrap();
        assert!((all - 1.0).abs() < 1e-10);
        let half = quadrature_probability(&t, 0.0, &IntervalSet::from(Interval::new(0.0, f64::INFINITY))).unwrap();
        assert!((half - 0.5).abs() < 1e-8);
    }

    #[test]
    fn quadrature_of_coherent_state() {
        let t = DensityOperator::coherent(c(1.0, 0.0), cut(40)).unwrap();
        let m = SQRT_2;
        let p = quadrature_probability(&t, 0.0, &IntervalSet::from(Interval::new(m - 1.0, m + 1.0))).unwrap();
        assert!((p - gaussian_mass(m, 0.5, m - 1.0, m + 1.0)).abs() <= 1e-6);
        // theta = pi/2 measures P, whose mean is sqrt2 Im(alpha) = 0
        let p = quadrature_probability(&t, FRAC_PI_2, &IntervalSet::from(Interval::new(-1.0, 1.0))).unwrap();
        assert!((p - gaussian_mass(0.0, 0.5, -1.0, 1.0)).abs() <= 1e-6);
        let t = DensityOperator::coherent(c(0.0, 1.0), cut(40)).unwrap();
        let p = quadrature_probability(&t, FRAC_PI_2, &IntervalSet::from(Interval::new(m - 1.0, m + 1.0))).unwrap();
        assert!((p - gaussian_mass(m, 0.5, m - 1.0, m + 1.0)).abs() <= 1e-6);
    }

    #[test]
    fn fourier_diagonal_squares_to_parity() {
        let f = fourier_diagonal(12);
        for (n, z) in f.iter().enumerate() {
            let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(z * z, c(parity, 0.0));
            let generic = C64::from_polar(1.0, -FRAC_PI_2 * n as f64);
            assert!((generic - z).norm() < 1e-14);
        }
        assert_eq!(quadrature_rotation(FRAC_PI_2, 12), f);
        let _ = PI;
    }

    #[test]
    fn convergence_trend_for_vacuum() {
        let t = DensityOperator::vacuum(cut(4));
        let gaps: Vec<f64> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&r| {
                let x = IntervalSet::from(Interval::new(-0.5, 0.5).lattice_avoiding(1.0 / (SQRT_2 * r)));
                let limit = quadrature_probability(&t, 0.0, &x).unwrap();
                (homodyne_probability(&t, c(r, 0.0), &x, Realization::CountingAfterU).unwrap() - limit).abs()
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn boundary_atoms_are_flagged() {
        let obs = HomodyneObservable::for_signal(c(2.0, 0.0), 2, Realization::CountingAfterU).unwrap();
        let step = obs.lattice_step();
        let on = IntervalSet::from(Interval::new(-step, 2.0 * step));
        assert_eq!(obs.boundary_atoms(&on).len(), 2);
        let off = IntervalSet::from(Interval::new(-1.5 * step, 2.5 * step));
        assert!(obs.boundary_atoms(&off).is_empty());
    }
}
