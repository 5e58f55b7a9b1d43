//! The eight-port homodyne detector.
//!
//! Modes 1 and 2 carry the signal `T` and the parameter state `S`, mode 3
//! starts in the vacuum and mode 4 in the reference `|sqrt2 z>`. The network
//! is `(U_13 ⊗ U_24) e^{i phi N_4} (B_12 ⊗ B_43)` and the recorded outcome is
//! `((n_3 - n_1)/|z|, (n_4 - n_2)/|z|)`, which lives on the lattice
//! `(k/|z|, l/|z|)`.
//!
//! Two independent evaluations are provided: [`run_direct`] pushes the
//! four-mode vector through every gate and histograms the counts, while
//! [`run_factorized`] forms `B_12 (T ⊗ S) B_12*` and contracts it with
//! `E_1^z(X/sqrt2) ⊗ E_2^{e^{i phi} z}(Y/sqrt2)`.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, required_dim, Cutoff, DensityOperator, StateVector, DEFAULT_DEFICIT_BUDGET};
use crate::homodyne::{effective_support, HomodyneObservable, Realization};
use crate::linalg::{CMatrix, CVector, C64};
use crate::multimode::{apply_single_mode, apply_two_mode, BeamSplitter, MultimodeState};
use crate::region::{tiling, IntervalSet, Rectangle};

pub const DEFAULT_MAX_BRANCHES: usize = 32;

/// Four-mode vectors above this many amplitudes are refused unless the
/// limit is raised explicitly.
pub const DEFAULT_MAX_AMPLITUDES: usize = 12_000_000;

/// Minimum cutoff for the signal modes 1 and 2.
pub const MIN_SIGNAL_DIM: usize = 20;

/// Named input states.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Vacuum,
    Fock(usize),
    Coherent(C64),
    Thermal(f64),
    Explicit(CMatrix),
}

impl StateSpec {
    /// The state at a cutoff that holds it to within `1e-12` (coherent
    /// states use the amplitude rule).
    pub fn to_density(&self) -> Result<DensityOperator> {
        match self {
            StateSpec::Vacuum => Ok(DensityOperator::vacuum(Cutoff::new(2)?)),
            StateSpec::Fock(n) => DensityOperator::fock(*n, Cutoff::new(n + 2)?),
            StateSpec::Coherent(alpha) => DensityOperator::coherent(*alpha, Cutoff::for_amplitude(alpha.norm())),
            StateSpec::Thermal(nbar) => {
                if !(*nbar >= 0.0) || !nbar.is_finite() {
                    return Err(Error::Config(format!("thermal mean photon number {nbar} must be >= 0")));
                }
                let ratio = nbar / (1.0 + nbar);
                let dim = if ratio == 0.0 { 2 } else { (1e-12f64.ln() / ratio.ln()).ceil() as usize + 1 };
                DensityOperator::thermal(*nbar, Cutoff::new(dim.max(2))?)
            }
            StateSpec::Explicit(m) => DensityOperator::new(m.clone()),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Vacuum => write!(f, "vacuum"),
            StateSpec::Fock(n) => write!(f, "fock({n})"),
            StateSpec::Coherent(a) => write!(f, "coherent({}{:+}i)", a.re, a.im),
            StateSpec::Thermal(n) => write!(f, "thermal({n})"),
            StateSpec::Explicit(m) => write!(f, "explicit({}x{})", m.nrows(), m.ncols()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Path {
    #[default]
    Direct,
    Factorized,
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Path::Direct => "direct",
            Path::Factorized => "factorized",
        })
    }
}

/// Cutoffs of modes 1 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkCutoffs {
    pub modes: [Cutoff; 4],
}

impl NetworkCutoffs {
    /// Signal modes get `max(20, rule(|z|) + s_T + s_S)` so that every
    /// photon-number sector reached by `U_13` and `U_24` is exact; the
    /// reference modes get the rule for `sqrt2 |z|`, and at least the signal
    /// cutoff.
    pub fn for_inputs(z: C64, t: &DensityOperator, s: &DensityOperator) -> Result<Self> {
        let signal = (required_dim(z.norm()) + effective_support(t) + effective_support(s)).max(MIN_SIGNAL_DIM);
        let reference = required_dim(SQRT_2 * z.norm()).max(signal);
        let (cs, cr) = (Cutoff::new(signal)?, Cutoff::new(reference)?);
        Ok(NetworkCutoffs { modes: [cs, cs, cr, cr] })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.modes.map(|c| c.dim())
    }

    pub fn total_amplitudes(&self) -> usize {
        self.dims().iter().product()
    }
}

/// Full description of one detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub t: StateSpec,
    pub s: StateSpec,
    pub z: C64,
    pub phi: f64,
    /// `None` applies [`NetworkCutoffs::for_inputs`].
    pub cutoffs: Option<NetworkCutoffs>,
    pub rectangles: Vec<Rectangle>,
    pub max_branches: usize,
    pub deficit_budget: f64,
    pub max_amplitudes: usize,
}

impl DetectorConfig {
    pub fn new(t: StateSpec, s: StateSpec, z: C64, phi: f64) -> Result<Self> {
        let cfg = DetectorConfig {
            t,
            s,
            z,
            phi,
            cutoffs: None,
            rectangles: default_grid(z),
            max_branches: DEFAULT_MAX_BRANCHES,
            deficit_budget: DEFAULT_DEFICIT_BUDGET,
            max_amplitudes: DEFAULT_MAX_AMPLITUDES,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.z.norm();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Config(format!("z must be nonzero and finite, got {}", self.z)));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&self.phi) {
            return Err(Error::Config(format!("phi = {} outside [0, 2 pi)", self.phi)));
        }
        if self.max_branches == 0 {
            return Err(Error::Config("max_branches must be positive".into()));
        }
        if !(self.deficit_budget > 0.0 && self.deficit_budget < 1.0) {
            return Err(Error::Config(format!("deficit budget {} outside (0, 1)", self.deficit_budget)));
        }
        Ok(())
    }
}

/// The 8×8 tiling of `[-4, 4)²` with edges moved half a lattice step off
/// `{k/|z|}`.
pub fn default_grid(z: C64) -> Vec<Rectangle> {
    tiling(&Rectangle::square(4.0), (8, 8), Some(1.0 / z.norm()))
}

/// Probability table on the lattice `(k * step, l * step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcomeDistribution {
    step: f64,
    weights: BTreeMap<(i64, i64), f64>,
}

impl JointOutcomeDistribution {
    pub fn new(step: f64, weights: BTreeMap<(i64, i64), f64>) -> Self {
        JointOutcomeDistribution { step, weights }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &BTreeMap<(i64, i64), f64> {
        &self.weights
    }

    pub fn weight(&self, k: i64, l: i64) -> f64 {
        self.weights.get(&(k, l)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn probability(&self, rect: &Rectangle) -> f64 {
        self.weights
            .iter()
            .filter(|(&(k, l), _)| rect.contains(k as f64 * self.step, l as f64 * self.step))
            .map(|(_, w)| w)
            .sum()
    }

    /// Lattice points carrying weight above `1e-15` that lie on an edge of
    /// `rect`.
    pub fn boundary_points(&self, rect: &Rectangle) -> usize {
        let on = |x: f64, ends: [f64; 2]| ends.iter().any(|e| (e - x).abs() <= 1e-12 * (1.0 + x.abs()));
        self.weights
            .iter()
            .filter(|(_, &w)| w > 1e-15)
            .filter(|(&(k, l), _)| {
                let (q, p) = (k as f64 * self.step, l as f64 * self.step);
                (on(q, [rect.q.lo, rect.q.hi]) && rect.p.contains(p))
                    || (on(p, [rect.p.lo, rect.p.hi]) && rect.q.contains(q))
            })
            .count()
    }

    /// Means of the two outcome coordinates.
    pub fn means(&self) -> (f64, f64) {
        let total = self.total();
        let (mut q, mut p) = (0.0, 0.0);
        for (&(k, l), &w) in &self.weights {
            q += w * k as f64 * self.step;
            p += w * l as f64 * self.step;
        }
        (q / total, p / total)
    }
}

/// Outcome statistics of `G^{z,S,phi}` for one signal state.
#[derive(Debug, Clone, PartialEq)]
pub struct GStatistics {
    pub path: Path,
    pub joint: JointOutcomeDistribution,
    pub rectangle_probs: Vec<(Rectangle, f64)>,
    /// Truncation deficits of the inputs and references.
    pub leak: f64,
    /// Spectral weight of `T` and `S` left out of the branch decomposition.
    pub discarded_weight: f64,
    pub cutoffs: NetworkCutoffs,
}

impl GStatistics {
    pub fn probability(&self, rect: &Rectangle) -> Option<f64> {
        self.rectangle_probs.iter().find(|(r, _)| r == rect).map(|&(_, p)| p)
    }
}

/// Everything a run needs after the state specs have been materialised.
#[derive(Debug, Clone)]
pub struct Network {
    t: DensityOperator,
    s: DensityOperator,
    z: C64,
    phi: f64,
    cutoffs: NetworkCutoffs,
    max_branches: usize,
    deficit_budget: f64,
    max_amplitudes: usize,
}

struct BranchPair {
    weight: f64,
    t: CVector,
    s: CVector,
}

impl Network {
    pub fn new(t: &DensityOperator, s: &DensityOperator, z: C64, phi: f64) -> Result<Self> {
        let cutoffs = NetworkCutoffs::for_inputs(z, t, s)?;
        Self::with_cutoffs(t, s, z, phi, cutoffs)
    }

    pub fn with_cutoffs(t: &DensityOperator, s: &DensityOperator, z: C64, phi: f64, cutoffs: NetworkCutoffs) -> Result<Self> {
        if !(z.norm() > 0.0) {
            return Err(Error::Config("z must be nonzero".into()));
        }
        let [c1, c2, _, _] = cutoffs.modes;
        Ok(Network {
            t: t.resized(c1)?,
            s: s.resized(c2)?,
            z,
            phi,
            cutoffs,
            max_branches: DEFAULT_MAX_BRANCHES,
            deficit_budget: DEFAULT_DEFICIT_BUDGET,
            max_amplitudes: DEFAULT_MAX_AMPLITUDES,
        })
    }

    pub fn from_config(cfg: &DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        let (t, s) = (cfg.t.to_density()?, cfg.s.to_density()?);
        let cutoffs = match cfg.cutoffs {
            Some(c) => c,
            None => NetworkCutoffs::for_inputs(cfg.z, &t, &s)?,
        };
        let mut net = Self::with_cutoffs(&t, &s, cfg.z, cfg.phi, cutoffs)?;
        net.max_branches = cfg.max_branches;
        net.deficit_budget = cfg.deficit_budget;
        net.max_amplitudes = cfg.max_amplitudes;
        Ok(net)
    }

    pub fn with_max_amplitudes(mut self, max: usize) -> Self {
        self.max_amplitudes = max;
        self
    }

    pub fn cutoffs(&self) -> NetworkCutoffs {
        self.cutoffs
    }

    pub fn step(&self) -> f64 {
        1.0 / self.z.norm()
    }

    fn branch_pairs(&self) -> Result<(Vec<BranchPair>, f64)> {
        let bt = self.t.branches(self.max_branches);
        let bs = self.s.branches(self.max_branches);
        let discarded = bt.discarded + bs.discarded;
        if discarded > self.deficit_budget {
            return Err(Error::Infeasible(format!(
                "mixed input needs more than {} spectral branches (discarded weight {discarded:.3e} > {:.1e})",
                self.max_branches, self.deficit_budget
            )));
        }
        let mut pairs = Vec::new();
        for a in &bt.branches {
            for b in &bs.branches {
                pairs.push(BranchPair { weight: a.weight * b.weight, t: a.vector.clone(), s: b.vector.clone() });
            }
        }
        Ok((pairs, discarded))
    }

    fn input_leak(&self) -> f64 {
        self.t.deficit() + self.s.deficit()
    }

    /// Joint histogram of `(n_3 - n_1, n_4 - n_2)` for the whole network.
    pub fn direct_joint(&self) -> Result<(JointOutcomeDistribution, f64, f64)> {
        let total = self.cutoffs.total_amplitudes();
        if total > self.max_amplitudes {
            return Err(Error::Infeasible(format!(
                "four-mode vector with dims {:?} has {total} amplitudes, limit {}",
                self.cutoffs.dims(),
                self.max_amplitudes
            )));
        }
        let [c1, c2, c3, c4] = self.cutoffs.modes;
        let (pairs, discarded) = self.branch_pairs()?;
        let b12 = BeamSplitter::new(1, 2, c1, c2)?;
        let b43 = BeamSplitter::new(4, 3, c4, c3)?;
        let u13 = BeamSplitter::new(1, 3, c1, c3)?;
        let u24 = BeamSplitter::new(2, 4, c2, c4)?;
        let phase = fock::phase_shifter(self.phi, c4);
        let vac = StateVector::basis(0, c3)?;
        let reference = fock::coherent_state_with_budget(self.z * SQRT_2, c4, self.deficit_budget)?;
        let [d1, d2, d3, d4] = self.cutoffs.dims();
        let (wq, wp) = (d1 + d3 - 1, d2 + d4 - 1);
        let mut hist = vec![0.0; wq * wp];
        for pair in &pairs {
            let t = StateVector::new(pair.t.clone(), 0.0)?;
            let s = StateVector::new(pair.s.clone(), 0.0)?;
            let mut state = MultimodeState::product(&[1, 2, 3, 4], &[&t, &s, &vac, &reference])?;
            state = apply_two_mode(&b12, &state, 1, 2)?;
            state = apply_two_mode(&b43, &state, 4, 3)?;
            state = apply_single_mode(&phase, &state, 4)?;
            state = apply_two_mode(&u13, &state, 1, 3)?;
            state = apply_two_mode(&u24, &state, 2, 4)?;
            let amps = state.into_amplitudes().expect("pure input stays pure");
            let block = d2 * d3 * d4;
            // per-n1 histograms, summed in n1 order
            let partial: Vec<Vec<f64>> = (0..d1)
                .into_par_iter()
                .map(|n1| {
                    let mut h = vec![0.0; wq * wp];
                    let slab = &amps[n1 * block..(n1 + 1) * block];
                    for n2 in 0..d2 {
                        for n3 in 0..d3 {
                            let base = (n2 * d3 + n3) * d4;
                            let k = n3 + d1 - 1 - n1;
                            for n4 in 0..d4 {
                                let w = slab[base + n4].norm_sqr();
                                h[k * wp + (n4 + d2 - 1 - n2)] += w;
                            }
                        }
                    }
                    h
                })
                .collect();
            for h in partial {
                for (acc, x) in hist.iter_mut().zip(h) {
                    *acc += pair.weight * x;
                }
            }
        }
        let mut weights = BTreeMap::new();
        for k in 0..wq {
            for l in 0..wp {
                let w = hist[k * wp + l];
                if w != 0.0 {
                    weights.insert((k as i64 - (d1 as i64 - 1), l as i64 - (d2 as i64 - 1)), w);
                }
            }
        }
        let leak = self.input_leak() + reference.norm_deficit();
        Ok((JointOutcomeDistribution::new(self.step(), weights), leak, discarded))
    }

    fn observables(&self) -> Result<(HomodyneObservable, HomodyneObservable)> {
        let [c1, c2, c3, c4] = self.cutoffs.modes;
        let e1 = HomodyneObservable::new(self.z, c1, c3, Realization::CountingAfterU)?;
        let z2 = self.z * C64::from_polar(1.0, self.phi);
        let e2 = HomodyneObservable::new(z2, c2, c4, Realization::CountingAfterU)?;
        Ok((e1, e2))
    }

    /// `B_12 (psi_T ⊗ psi_S)` as a `d1 × d2` matrix, one per branch pair.
    fn mixed_branches(&self, pairs: &[BranchPair]) -> Result<Vec<(f64, CMatrix)>> {
        let [c1, c2, _, _] = self.cutoffs.modes;
        let b12 = BeamSplitter::new(1, 2, c1, c2)?;
        pairs
            .iter()
            .map(|pair| {
                let t = StateVector::new(pair.t.clone(), 0.0)?;
                let s = StateVector::new(pair.s.clone(), 0.0)?;
                let state = apply_two_mode(&b12, &MultimodeState::product(&[1, 2], &[&t, &s])?, 1, 2)?;
                let v = state.into_amplitudes().expect("pure");
                Ok((pair.weight, CMatrix::from_row_slice(c1.dim(), c2.dim(), &v)))
            })
            .collect()
    }

    /// `Tr[B_12 (T ⊗ S) B_12* E_1(X) ⊗ E_2(Y)]` for effects given on the
    /// signal modes.
    fn contract(psis: &[(f64, CMatrix)], e1: &CMatrix, e2: &CMatrix) -> f64 {
        psis.iter()
            .map(|(w, psi)| {
                // sum_{bd} (Psi† E1 Psi)_{bd} (E2)_{bd}
                let j = psi.adjoint() * e1 * psi;
                w * j.iter().zip(e2.iter()).map(|(a, b)| (a * b).re).sum::<f64>()
            })
            .sum()
    }

    /// Joint lattice table through the factorized form, atom by atom.
    pub fn factorized_joint(&self) -> Result<(JointOutcomeDistribution, f64, f64)> {
        let (pairs, discarded) = self.branch_pairs()?;
        let psis = self.mixed_branches(&pairs)?;
        let (e1, e2) = self.observables()?;
        let index = |obs: &HomodyneObservable, v: f64| (v / obs.lattice_step()).round() as i64;
        let rows: Vec<(i64, Vec<CMatrix>)> = e1
            .atoms()
            .par_iter()
            .map(|a| (index(&e1, a.value), psis.iter().map(|(_, psi)| psi.adjoint() * &a.effect * psi).collect()))
            .collect();
        let mut weights = BTreeMap::new();
        for (k, js) in &rows {
            for b in e2.atoms() {
                let l = index(&e2, b.value);
                let w: f64 = js
                    .iter()
                    .zip(&psis)
                    .map(|(j, (wt, _))| wt * j.iter().zip(b.effect.iter()).map(|(x, y)| (x * y).re).sum::<f64>())
                    .sum();
                if w != 0.0 {
                    *weights.entry((*k, l)).or_insert(0.0) += w;
                }
            }
        }
        let leak = self.input_leak() + e1.aux_deficit() + e2.aux_deficit();
        Ok((JointOutcomeDistribution::new(self.step(), weights), leak, discarded))
    }

    /// Rectangle probabilities through `E_1^z(X/sqrt2) ⊗ E_2^{e^{i phi} z}(Y/sqrt2)`.
    pub fn factorized_rectangles(&self, rects: &[Rectangle]) -> Result<Vec<f64>> {
        let (pairs, _) = self.branch_pairs()?;
        let psis = self.mixed_branches(&pairs)?;
        let (e1, e2) = self.observables()?;
        rects
            .par_iter()
            .map(|r| {
                let x = IntervalSet::from(r.q.scaled(1.0 / SQRT_2));
                let y = IntervalSet::from(r.p.scaled(1.0 / SQRT_2));
                for (obs, set) in [(&e1, &x), (&e2, &y)] {
                    let b = obs.boundary_atoms(set);
                    if !b.is_empty() {
                        warn!("rectangle {r} has outcome atoms on its boundary: {b:?}");
                    }
                }
                Ok(Self::contract(&psis, &e1.effect(&x), &e2.effect(&y)))
            })
            .collect()
    }

    pub fn run(&self, path: Path, rects: &[Rectangle]) -> Result<GStatistics> {
        let (joint, leak, discarded) = match path {
            Path::Direct => self.direct_joint()?,
            Path::Factorized => self.factorized_joint()?,
        };
        let probs = match path {
            Path::Direct => rects
                .iter()
                .map(|r| {
                    let b = joint.boundary_points(r);
                    if b > 0 {
                        warn!("rectangle {r} has {b} weighted outcomes on its boundary");
                    }
                    joint.probability(r)
                })
                .collect(),
            Path::Factorized => self.factorized_rectangles(rects)?,
        };
        debug!("{path} run: total mass {:.12}, leak {leak:.3e}", joint.total());
        Ok(GStatistics {
            path,
            joint,
            rectangle_probs: rects.iter().copied().zip(probs).collect(),
            leak,
            discarded_weight: discarded,
            cutoffs: self.cutoffs,
        })
    }
}

/// Four-mode simulation of the network.
pub fn run_direct(config: &DetectorConfig) -> Result<GStatistics> {
    Network::from_config(config)?.run(Path::Direct, &config.rectangles)
}

/// Evaluation through `B_12 (T ⊗ S) B_12*` and two homodyne observables.
pub fn run_factorized(config: &DetectorConfig) -> Result<GStatistics> {
    Network::from_config(config)?.run(Path::Factorized, &config.rectangles)
}

/// `Tr[T G^{z,S,phi}(Z)]` for a single rectangle.
pub fn g_rectangle(t: &DensityOperator, s: &DensityOperator, z: C64, phi: f64, rect: &Rectangle, path: Path) -> Result<f64> {
    let net = Network::new(t, s, z, phi)?;
    match path {
        Path::Direct => Ok(net.run(Path::Direct, &[*rect])?.rectangle_probs[0].1),
        Path::Factorized => Ok(net.factorized_rectangles(&[*rect])?[0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::region::Interval;
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::f64::consts::FRAC_PI_2;

    fn net(t: StateSpec, s: StateSpec, z: f64, phi: f64) -> Network {
        Network::new(&t.to_density().unwrap(), &s.to_density().unwrap(), c(z, 0.0), phi).unwrap()
    }

    #[test]
    fn cutoff_rule_covers_the_signal_sectors() {
        let t = DensityOperator::fock(1, Cutoff::new(3).unwrap()).unwrap();
        let s = DensityOperator::vacuum(Cutoff::new(2).unwrap());
        let c = NetworkCutoffs::for_inputs(c(2.0, 0.0), &t, &s).unwrap();
        assert_eq!(c.dims(), [29, 29, 35, 35]);
    }

    #[test]
    fn vacuum_means_vanish_and_mass_is_complete() {
        let n = net(StateSpec::Vacuum, StateSpec::Vacuum, 2.0, FRAC_PI_2);
        let (joint, leak, _) = n.direct_joint().unwrap();
        let (q, p) = joint.means();
        assert!(q.abs() < 1e-8 && p.abs() < 1e-8, "{q} {p}");
        assert!(joint.total() >= 1.0 - 1e-6);
        assert!(leak < 1e-8);
    }

    #[test]
    fn lemma1_paths_agree_on_grid() {
        let n = net(StateSpec::Fock(1), StateSpec::Vacuum, 2.0, FRAC_PI_2);
        let grid = default_grid(c(2.0, 0.0));
        let d = n.run(Path::Direct, &grid).unwrap();
        let f = n.run(Path::Factorized, &grid).unwrap();
        for ((r, a), (_, b)) in d.rectangle_probs.iter().zip(&f.rectangle_probs) {
            assert!((a - b).abs() <= 1e-6, "{r}: {a} vs {b}");
        }
        for (key, w) in d.joint.weights() {
            let (k, l) = *key;
            assert!((w - f.joint.weight(k, l)).abs() < 1e-8);
        }
    }

    #[test]
    fn factorized_whole_plane_is_one() {
        let n = net(StateSpec::Coherent(c(0.5, 0.5)), StateSpec::Fock(1), 2.0, 1.0);
        let p = n.factorized_rectangles(&[Rectangle::plane()]).unwrap()[0];
        assert!((p - 1.0).abs() < 1e-8, "{p}");
    }

    #[test]
    fn partition_additivity() {
        let n = net(StateSpec::Coherent(c(1.0, 0.0)), StateSpec::Vacuum, 2.0, FRAC_PI_2);
        let inner = Rectangle::from_bounds(-0.75, 1.25, -1.25, 0.75);
        let rest = [
            Rectangle::new(Interval::new(f64::NEG_INFINITY, -0.75), Interval::real_line()),
            Rectangle::new(Interval::new(1.25, f64::INFINITY), Interval::real_line()),
            Rectangle::new(Interval::new(-0.75, 1.25), Interval::new(f64::NEG_INFINITY, -1.25)),
            Rectangle::new(Interval::new(-0.75, 1.25), Interval::new(0.75, f64::INFINITY)),
        ];
        for path in [Path::Direct, Path::Factorized] {
            let mut rects = vec![inner];
            rects.extend(rest);
            let g = n.run(path, &rects).unwrap();
            let sum: f64 = g.rectangle_probs.iter().map(|(_, p)| p).sum();
            assert!((sum - g.joint.total()).abs() < 1e-10, "{path}: {sum}");
            assert!(g.rectangle_probs.iter().all(|(_, p)| (-1e-12..=1.0 + 1e-12).contains(p)));
        }
    }

    #[test]
    fn measurement_is_linear_in_the_signal() {
        let cut = Cutoff::new(12).unwrap();
        let a = DensityOperator::coherent(c(0.6, -0.2), cut).unwrap();
        let b = DensityOperator::fock(2, cut).unwrap();
        let s = DensityOperator::vacuum(Cutoff::new(2).unwrap());
        let z = c(1.5, 0.0);
        let rect = Rectangle::from_bounds(-1.0 / 3.0, 1.0, -1.0 / 3.0, 2.0 / 3.0);
        let cutoffs = NetworkCutoffs::for_inputs(z, &a, &s).unwrap();
        let prob = |t: &DensityOperator| {
            Network::with_cutoffs(t, &s, z, 0.7, cutoffs).unwrap().factorized_rectangles(&[rect]).unwrap()[0]
        };
        let w = 0.3;
        let mixed = prob(&a.mix(&b, w).unwrap());
        let separate = w * prob(&a) + (1.0 - w) * prob(&b);
        assert!((mixed - separate).abs() < 1e-10, "{mixed} vs {separate}");
    }

    #[test]
    fn outcomes_live_on_the_lattice() {
        let n = net(StateSpec::Fock(1), StateSpec::Fock(1), 1.0, 0.3);
        let (joint, _, _) = n.direct_joint().unwrap();
        assert_eq!(joint.step(), 1.0);
        // every weight sits at an integer pair by construction; the table has
        // no entry outside the count-difference range
        let [d1, d2, d3, d4] = n.cutoffs().dims();
        for &(k, l) in joint.weights().keys() {
            assert!(k > -(d1 as i64) && k < d3 as i64 && l > -(d2 as i64) && l < d4 as i64);
        }
    }

    #[test]
    fn vacuum_square_near_husimi_mass_at_r3() {
        // [-1, 1)² moved off the 1/3 lattice; limit is the N(0,1)² mass
        let n = net(StateSpec::Vacuum, StateSpec::Vacuum, 3.0, FRAC_PI_2);
        let iv = Interval::new(-1.0, 1.0).lattice_avoiding(1.0 / 3.0);
        let rect = Rectangle::new(iv, iv);
        let p = n.factorized_rectangles(&[rect]).unwrap()[0];
        let std = Normal::new(0.0, 1.0).unwrap();
        let limit = (std.cdf(iv.hi) - std.cdf(iv.lo)).powi(2);
        assert!((p - limit).abs() <= 0.05, "{p} vs {limit}");
    }

    #[test]
    fn refuses_oversized_networks() {
        let n = net(StateSpec::Vacuum, StateSpec::Vacuum, 2.0, 0.0).with_max_amplitudes(1000);
        assert!(matches!(n.direct_joint(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn refuses_too_many_branches() {
        let cfg = DetectorConfig {
            max_branches: 2,
            ..DetectorConfig::new(StateSpec::Thermal(1.0), StateSpec::Vacuum, c(1.0, 0.0), 0.0).unwrap()
        };
        assert!(matches!(run_factorized(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn default_grid_avoids_lattice() {
        let grid = default_grid(c(2.0, 0.0));
        assert_eq!(grid.len(), 64);
        for r in &grid {
            for e in [r.q.lo, r.q.hi, r.p.lo, r.p.hi] {
                let k = e * 2.0;
                assert!((k - k.round()).abs() > 0.4);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::new(StateSpec::Vacuum, StateSpec::Vacuum, c(0.0, 0.0), 0.0).is_err());
        assert!(DetectorConfig::new(StateSpec::Vacuum, StateSpec::Vacuum, c(1.0, 0.0), 7.0).is_err());
        assert!(StateSpec::Thermal(-1.0).to_density().is_err());
        let th = StateSpec::Thermal(0.5).to_density().unwrap();
        assert!(th.deficit() < 1e-11);
    }
}
