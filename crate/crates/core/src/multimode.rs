//! Tensor products of up to four truncated modes: 50-50 beam splitters,
//! single- and two-mode gate application, photon-counting statistics and
//! partial traces.
//!
//! States are stored row-major in the order of their [`ModeSystem`], so the
//! last listed mode varies fastest.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, coherent_coefficients, Cutoff, DensityOperator, FockOperator, StateVector};
use crate::linalg::{self, c, CMatrix, C64};

/// Mode label, 1 to 4.
pub type ModeId = u8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSystem {
    modes: Vec<ModeId>,
    cutoffs: Vec<Cutoff>,
}

impl ModeSystem {
    pub fn new(modes: Vec<ModeId>, cutoffs: Vec<Cutoff>) -> Result<Self> {
        if modes.is_empty() || modes.len() > 4 {
            return Err(Error::Config(format!("{} modes requested, expected 1 to 4", modes.len())));
        }
        if modes.len() != cutoffs.len() {
            return Err(Error::Shape(format!("{} modes but {} cutoffs", modes.len(), cutoffs.len())));
        }
        for (k, m) in modes.iter().enumerate() {
            if !(1..=4).contains(m) {
                return Err(Error::Config(format!("mode id {m} outside 1..=4")));
            }
            if modes[..k].contains(m) {
                return Err(Error::Config(format!("mode {m} listed twice")));
            }
        }
        Ok(ModeSystem { modes, cutoffs })
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn cutoffs(&self) -> &[Cutoff] {
        &self.cutoffs
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cutoffs.iter().map(|c| c.dim()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.cutoffs.iter().map(|c| c.dim()).product()
    }

    pub fn position(&self, mode: ModeId) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .ok_or_else(|| Error::Shape(format!("mode {mode} not in system {:?}", self.modes)))
    }

    pub fn cutoff(&self, mode: ModeId) -> Result<Cutoff> {
        Ok(self.cutoffs[self.position(mode)?])
    }

    pub fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        strides
    }

    /// Flat offsets of all basis states whose digits at `excluded` are zero.
    fn base_offsets(&self, excluded: &[usize]) -> Vec<usize> {
        let dims = self.dims();
        let strides = self.strides();
        let mut bases = vec![0usize];
        for (k, &d) in dims.iter().enumerate() {
            if excluded.contains(&k) {
                continue;
            }
            let stride = strides[k];
            bases = bases.iter().flat_map(|&b| (0..d).map(move |n| b + n * stride)).collect();
        }
        bases
    }

    /// Occupation numbers of a flat index.
    pub fn digits(&self, mut flat: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = flat % dims[k];
            flat /= dims[k];
        }
        out
    }
}

/// Operator acting on an ordered pair of modes, given as the local
/// primary-major layout `index = n_primary * dim_secondary + n_secondary`.
pub trait TwoModeGate: Sync {
    fn dims(&self) -> (usize, usize);
    fn apply_local(&self, input: &[C64], out: &mut [C64]);
}

impl TwoModeGate for FockOperator {
    fn dims(&self) -> (usize, usize) {
        let d = self.dims();
        assert_eq!(d.len(), 2, "two-mode gate needs a two-mode operator");
        (d[0].dim(), d[1].dim())
    }

    fn apply_local(&self, input: &[C64], out: &mut [C64]) {
        let m = self.matrix();
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..input.len()).map(|k| m[(r, k)] * input[k]).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Sector {
    /// Local indices `n_p * d_s + n_s` with `n_p + n_s` fixed, `n_p` ascending.
    members: Vec<usize>,
    block: DMatrix<f64>,
}

/// 50-50 beam splitter fixed by the coherent-state law
/// `|a> ⊗ |b> -> |(a - b)/sqrt 2> ⊗ |(a + b)/sqrt 2>` (primary slot first).
///
/// It is `exp(theta (a_p† a_s - a_p a_s†))` with `theta = -pi/4`, stored as
/// real orthogonal blocks, one per total photon number. Sectors with
/// `n_p + n_s < min(dim_p, dim_s)` are untouched by the truncation and hence
/// exact.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSplitter {
    primary: ModeId,
    secondary: ModeId,
    dims: (Cutoff, Cutoff),
    sectors: Vec<Sector>,
}

/// Probe pair used to check the coherent law at construction.
const PROBE: (C64, C64) = (C64::new(0.9, -0.3), C64::new(-0.4, 0.7));
const PROBE_TOLERANCE: f64 = 1e-6;

impl BeamSplitter {
    pub fn new(primary: ModeId, secondary: ModeId, primary_cutoff: Cutoff, secondary_cutoff: Cutoff) -> Result<Self> {
        Self::with_angle(primary, secondary, primary_cutoff, secondary_cutoff, -FRAC_PI_4)
    }

    fn with_angle(primary: ModeId, secondary: ModeId, cp: Cutoff, cs: Cutoff, theta: f64) -> Result<Self> {
        if primary == secondary {
            return Err(Error::Config(format!("beam splitter needs two distinct modes, got {primary} twice")));
        }
        let (dp, ds) = (cp.dim(), cs.dim());
        let mut sectors = Vec::with_capacity(dp + ds - 1);
        for total in 0..(dp + ds - 1) {
            let lo = total.saturating_sub(ds - 1);
            let hi = total.min(dp - 1);
            let size = hi - lo + 1;
            let members: Vec<usize> = (lo..=hi).map(|np| np * ds + (total - np)).collect();
            let mut gen = CMatrix::zeros(size, size);
            for (k, np) in (lo..=hi).enumerate() {
                let ns = total - np;
                // a_p† a_s |np, ns> = sqrt((np+1) ns) |np+1, ns-1>
                if k + 1 < size {
                    gen[(k + 1, k)] = c(theta * ((np + 1) as f64 * ns as f64).sqrt(), 0.0);
                }
                // -a_p a_s† |np, ns> = -sqrt(np (ns+1)) |np-1, ns+1>
                if k > 0 {
                    gen[(k - 1, k)] = c(-theta * (np as f64 * (ns + 1) as f64).sqrt(), 0.0);
                }
            }
            let u = linalg::expm_skew_hermitian(&gen);
            let block = DMatrix::from_fn(size, size, |r, s| u[(r, s)].re);
            sectors.push(Sector { members, block });
        }
        let bs = BeamSplitter { primary, secondary, dims: (cp, cs), sectors };
        let residual = bs.probe_residual();
        if residual > PROBE_TOLERANCE {
            return Err(Error::Convention(residual));
        }
        Ok(bs)
    }

    pub fn primary(&self) -> ModeId {
        self.primary
    }

    pub fn secondary(&self) -> ModeId {
        self.secondary
    }

    pub fn cutoffs(&self) -> (Cutoff, Cutoff) {
        self.dims
    }

    /// Total photon numbers below this value are represented exactly.
    pub fn exact_sector_bound(&self) -> usize {
        self.dims.0.dim().min(self.dims.1.dim())
    }

    /// Residual of the coherent law on the exact sectors for the probe pair.
    pub fn probe_residual(&self) -> f64 {
        let (dp, ds) = (self.dims.0.dim(), self.dims.1.dim());
        let bound = self.exact_sector_bound();
        let (a, b) = PROBE;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let product = |x: C64, y: C64| {
            let cx = coherent_coefficients(x, dp);
            let cy = coherent_coefficients(y, ds);
            let mut v = vec![C64::default(); dp * ds];
            for np in 0..dp {
                for ns in 0..ds {
                    if np + ns < bound {
                        v[np * ds + ns] = cx[np] * cy[ns];
                    }
                }
            }
            v
        };
        let input = product(a, b);
        let expect = product((a - b) * s, (a + b) * s);
        let mut out = vec![C64::default(); dp * ds];
        self.apply_local(&input, &mut out);
        out.iter().zip(&expect).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> BeamSplitter {
        BeamSplitter {
            primary: self.primary,
            secondary: self.secondary,
            dims: self.dims,
            sectors: self
                .sectors
                .iter()
                .map(|s| Sector { members: s.members.clone(), block: s.block.transpose() })
                .collect(),
        }
    }

    /// Dense two-mode matrix in the primary-major layout.
    pub fn to_operator(&self) -> FockOperator {
        let n = self.dims.0.dim() * self.dims.1.dim();
        let mut m = CMatrix::zeros(n, n);
        for s in &self.sectors {
            for (r, &gr) in s.members.iter().enumerate() {
                for (k, &gk) in s.members.iter().enumerate() {
                    m[(gr, gk)] = c(s.block[(r, k)], 0.0);
                }
            }
        }
        FockOperator::new(m, vec![self.dims.0, self.dims.1], false).expect("dims are consistent")
    }
}

impl TwoModeGate for BeamSplitter {
    fn dims(&self) -> (usize, usize) {
        (self.dims.0.dim(), self.dims.1.dim())
    }

    fn apply_local(&self, input: &[C64], out: &mut [C64]) {
        for s in &self.sectors {
            for (r, &gr) in s.members.iter().enumerate() {
                let mut acc = C64::default();
                for (k, &gk) in s.members.iter().enumerate() {
                    acc += input[gk] * s.block[(r, k)];
                }
                out[gr] = acc;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Pure(Vec<C64>),
    Mixed(CMatrix),
}

/// Joint state of several modes; carries the accumulated truncation deficit
/// of the single-mode states it was prepared from.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeState {
    system: ModeSystem,
    data: StateData,
    deficit: f64,
}

impl MultimodeState {
    pub fn pure(system: ModeSystem, amplitudes: Vec<C64>, deficit: f64) -> Result<Self> {
        if amplitudes.len() != system.total_dim() {
            return Err(Error::Shape(format!(
                "{} amplitudes for total dimension {}",
                amplitudes.len(),
                system.total_dim()
            )));
        }
        let norm = linalg::vector_norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("multimode vector norm {norm}")));
        }
        Ok(MultimodeState { system, data: StateData::Pure(amplitudes), deficit })
    }

    pub fn mixed(system: ModeSystem, matrix: CMatrix, deficit: f64) -> Result<Self> {
        let n = system.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Shape(format!("{}x{} density for total dimension {n}", matrix.nrows(), matrix.ncols())));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("multimode density trace {}", tr.re)));
        }
        if linalg::hermitian_deviation(&matrix) > 1e-10 {
            return Err(Error::InvalidState("multimode density not Hermitian".into()));
        }
        Ok(MultimodeState { system, data: StateData::Mixed(matrix), deficit })
    }

    /// Tensor product of single-mode vectors in the listed mode order.
    pub fn product(modes: &[ModeId], factors: &[&StateVector]) -> Result<Self> {
        let cutoffs = factors.iter().map(|f| f.cutoff()).collect();
        let system = ModeSystem::new(modes.to_vec(), cutoffs)?;
        let mut amps = vec![c(1.0, 0.0)];
        for f in factors {
            amps = amps.iter().flat_map(|&a| f.coeffs().iter().map(move |&b| a * b)).collect();
        }
        let deficit = factors.iter().map(|f| f.norm_deficit()).sum();
        Ok(MultimodeState { system, data: StateData::Pure(amps), deficit })
    }

    pub fn product_mixed(modes: &[ModeId], factors: &[&DensityOperator]) -> Result<Self> {
        let cutoffs = factors.iter().map(|f| f.cutoff()).collect();
        let system = ModeSystem::new(modes.to_vec(), cutoffs)?;
        let mut m = CMatrix::identity(1, 1);
        for f in factors {
            m = m.kronecker(f.matrix());
        }
        let deficit = factors.iter().map(|f| f.deficit()).sum();
        Ok(MultimodeState { system, data: StateData::Mixed(m), deficit })
    }

    pub fn system(&self) -> &ModeSystem {
        &self.system
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Mixed(_) => None,
        }
    }

    pub fn into_amplitudes(self) -> Option<Vec<C64>> {
        match self.data {
            StateData::Pure(v) => Some(v),
            StateData::Mixed(_) => None,
        }
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    /// Norm squared (pure) or trace (mixed).
    pub fn total_weight(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.iter().map(|z| z.norm_sqr()).sum(),
            StateData::Mixed(m) => m.trace().re,
        }
    }

    pub fn to_density_matrix(&self) -> CMatrix {
        match &self.data {
            StateData::Pure(v) => {
                let col = linalg::CVector::from_column_slice(v);
                &col * col.adjoint()
            }
            StateData::Mixed(m) => m.clone(),
        }
    }

    /// Fidelity with a pure state over the same system.
    pub fn fidelity_with(&self, other: &[C64]) -> Result<f64> {
        if other.len() != self.system.total_dim() {
            return Err(Error::Shape("fidelity between different spaces".into()));
        }
        Ok(match &self.data {
            StateData::Pure(v) => linalg::inner(v, other).norm_sqr(),
            StateData::Mixed(m) => {
                let col = linalg::CVector::from_column_slice(other);
                (col.adjoint() * m * &col)[(0, 0)].re
            }
        })
    }

    /// The same state expressed with the modes in `order`.
    pub fn reordered(&self, order: &[ModeId]) -> Result<Self> {
        let mut perm = Vec::with_capacity(order.len());
        for &m in order {
            perm.push(self.system.position(m)?);
        }
        if perm.len() != self.system.modes.len() {
            return Err(Error::Shape(format!("reordering {:?} does not list every mode", order)));
        }
        let cutoffs: Vec<Cutoff> = perm.iter().map(|&k| self.system.cutoffs[k]).collect();
        let target = ModeSystem::new(order.to_vec(), cutoffs)?;
        let old_strides = self.system.strides();
        let n = target.total_dim();
        let map: Vec<usize> = (0..n)
            .map(|flat| {
                let digits = target.digits(flat);
                digits.iter().zip(&perm).map(|(&d, &k)| d * old_strides[k]).sum()
            })
            .collect();
        let data = match &self.data {
            StateData::Pure(v) => StateData::Pure(map.iter().map(|&o| v[o]).collect()),
            StateData::Mixed(m) => StateData::Mixed(CMatrix::from_fn(n, n, |r, s| m[(map[r], map[s])])),
        };
        Ok(MultimodeState { system: target, data, deficit: self.deficit })
    }
}

fn apply_gate_to_vector<G: TwoModeGate + ?Sized>(
    gate: &G,
    v: &[C64],
    bases: &[usize],
    strides: (usize, usize),
    dims: (usize, usize),
) -> Vec<C64> {
    let (dp, ds) = dims;
    let (sp, ss) = strides;
    let block = dp * ds;
    let chunk = (4096 / block).max(1);
    // local outputs per base, computed in parallel and scattered in order
    let locals: Vec<Vec<C64>> = bases
        .par_chunks(chunk)
        .map(|bs| {
            let mut local_in = vec![C64::default(); block];
            let mut res = vec![C64::default(); bs.len() * block];
            for (j, &b) in bs.iter().enumerate() {
                for np in 0..dp {
                    for ns in 0..ds {
                        local_in[np * ds + ns] = v[b + np * sp + ns * ss];
                    }
                }
                gate.apply_local(&local_in, &mut res[j * block..(j + 1) * block]);
            }
            res
        })
        .collect();
    let mut out = vec![C64::default(); v.len()];
    for (bs, res) in bases.chunks(chunk).zip(&locals) {
        for (j, &b) in bs.iter().enumerate() {
            let local = &res[j * block..(j + 1) * block];
            for np in 0..dp {
                for ns in 0..ds {
                    out[b + np * sp + ns * ss] = local[np * ds + ns];
                }
            }
        }
    }
    out
}

/// Applies `gate` with its primary slot on mode `primary` and its secondary
/// slot on `secondary`; identity on every other mode.
pub fn apply_two_mode<G: TwoModeGate + ?Sized>(
    gate: &G,
    state: &MultimodeState,
    primary: ModeId,
    secondary: ModeId,
) -> Result<MultimodeState> {
    let sys = &state.system;
    let (ip, is) = (sys.position(primary)?, sys.position(secondary)?);
    if ip == is {
        return Err(Error::Shape("two-mode gate applied to a single mode".into()));
    }
    let dims = sys.dims();
    if gate.dims() != (dims[ip], dims[is]) {
        return Err(Error::Shape(format!(
            "gate dims {:?} but modes ({primary}, {secondary}) have dims ({}, {})",
            gate.dims(),
            dims[ip],
            dims[is]
        )));
    }
    let strides = sys.strides();
    let bases = sys.base_offsets(&[ip, is]);
    let st = (strides[ip], strides[is]);
    let data = match &state.data {
        StateData::Pure(v) => StateData::Pure(apply_gate_to_vector(gate, v, &bases, st, gate.dims())),
        StateData::Mixed(m) => {
            let n = m.nrows();
            let left = apply_columns(m, |col| apply_gate_to_vector(gate, col, &bases, st, gate.dims()));
            let right = apply_columns(&left.adjoint(), |col| apply_gate_to_vector(gate, col, &bases, st, gate.dims()));
            debug_assert_eq!(right.nrows(), n);
            StateData::Mixed(right.adjoint())
        }
    };
    Ok(MultimodeState { system: sys.clone(), data, deficit: state.deficit })
}

fn apply_columns(m: &CMatrix, f: impl Fn(&[C64]) -> Vec<C64>) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, m.ncols());
    for k in 0..m.ncols() {
        let col: Vec<C64> = m.column(k).iter().copied().collect();
        let res = f(&col);
        for r in 0..n {
            out[(r, k)] = res[r];
        }
    }
    out
}

/// Applies a single-mode operator on `mode`.
pub fn apply_single_mode(op: &FockOperator, state: &MultimodeState, mode: ModeId) -> Result<MultimodeState> {
    let sys = &state.system;
    let k = sys.position(mode)?;
    let d = sys.dims()[k];
    if op.dims().len() != 1 || op.dim() != d {
        return Err(Error::Shape(format!("single-mode operator of dim {} on mode {mode} of dim {d}", op.dim())));
    }
    let stride = sys.strides()[k];
    let bases = sys.base_offsets(&[k]);
    let m = op.matrix();
    let apply = |v: &[C64]| {
        let mut out = vec![C64::default(); v.len()];
        let mut local = vec![C64::default(); d];
        for &b in &bases {
            for (n, slot) in local.iter_mut().enumerate() {
                *slot = v[b + n * stride];
            }
            for r in 0..d {
                out[b + r * stride] = (0..d).map(|s| m[(r, s)] * local[s]).sum();
            }
        }
        out
    };
    let data = match &state.data {
        StateData::Pure(v) => StateData::Pure(apply(v)),
        StateData::Mixed(rho) => {
            let left = apply_columns(rho, &apply);
            StateData::Mixed(apply_columns(&left.adjoint(), &apply).adjoint())
        }
    };
    Ok(MultimodeState { system: sys.clone(), data, deficit: state.deficit })
}

/// `(I_3 ⊗ e^{i phi N_4}) B_43 (|0> ⊗ |sqrt2 z>)` over modes (3, 4), which
/// should reproduce `|z> ⊗ |e^{i phi} z>`.
pub fn prepare_mode4(z: C64, phi: f64, cutoff3: Cutoff, cutoff4: Cutoff) -> Result<MultimodeState> {
    let vac = StateVector::basis(0, cutoff3)?;
    let reference = fock::coherent_state(z * std::f64::consts::SQRT_2, cutoff4)?;
    let input = MultimodeState::product(&[3, 4], &[&vac, &reference])?;
    let b43 = BeamSplitter::new(4, 3, cutoff4, cutoff3)?;
    let mixed = apply_two_mode(&b43, &input, 4, 3)?;
    apply_single_mode(&fock::phase_shifter(phi, cutoff4), &mixed, 4)
}

/// Photon-counting probabilities over the joint number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberDistribution {
    system: ModeSystem,
    probs: Vec<f64>,
}

impl NumberDistribution {
    pub fn system(&self) -> &ModeSystem {
        &self.system
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, occupation: &[usize]) -> f64 {
        let strides = self.system.strides();
        let dims = self.system.dims();
        if occupation.len() != dims.len() || occupation.iter().zip(&dims).any(|(n, d)| n >= d) {
            return 0.0;
        }
        self.probs[occupation.iter().zip(&strides).map(|(n, s)| n * s).sum::<usize>()]
    }

    pub fn total(&self) -> f64 {
        linalg::pairwise_sum(&self.probs)
    }

    pub fn marginal(&self, mode: ModeId) -> Result<Vec<f64>> {
        let k = self.system.position(mode)?;
        let mut out = vec![0.0; self.system.dims()[k]];
        for (flat, p) in self.probs.iter().enumerate() {
            out[self.system.digits(flat)[k]] += p;
        }
        Ok(out)
    }

    /// Iterator over (occupations, probability).
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(flat, &p)| (self.system.digits(flat), p))
    }
}

pub fn joint_number_distribution(state: &MultimodeState) -> NumberDistribution {
    let probs = match &state.data {
        StateData::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
        StateData::Mixed(m) => (0..m.nrows()).map(|k| m[(k, k)].re).collect(),
    };
    NumberDistribution { system: state.system.clone(), probs }
}

/// Reduced state on `keep` (in the order given).
pub fn partial_trace(state: &MultimodeState, keep: &[ModeId]) -> Result<MultimodeState> {
    let sys = &state.system;
    if keep.is_empty() {
        return Err(Error::Shape("partial trace must keep at least one mode".into()));
    }
    let keep_pos: Vec<usize> = keep.iter().map(|&m| sys.position(m)).collect::<Result<_>>()?;
    let traced: Vec<ModeId> = sys.modes.iter().copied().filter(|m| !keep.contains(m)).collect();
    let mut order = keep.to_vec();
    order.extend(&traced);
    let arranged = state.reordered(&order)?;
    let kept_dim: usize = keep_pos.iter().map(|&k| sys.dims()[k]).product();
    let env_dim = sys.total_dim() / kept_dim;
    let cutoffs = keep_pos.iter().map(|&k| sys.cutoffs[k]).collect();
    let reduced_sys = ModeSystem::new(keep.to_vec(), cutoffs)?;
    let rho = match &arranged.data {
        StateData::Pure(v) => {
            let psi = CMatrix::from_row_slice(kept_dim, env_dim, v);
            &psi * psi.adjoint()
        }
        StateData::Mixed(m) => CMatrix::from_fn(kept_dim, kept_dim, |r, s| {
            (0..env_dim).map(|e| m[(r * env_dim + e, s * env_dim + e)]).sum()
        }),
    };
    Ok(MultimodeState { system: reduced_sys, data: StateData::Mixed(rho), deficit: state.deficit })
}

/// Reduced single-mode density operator.
pub fn reduced_density(state: &MultimodeState, mode: ModeId) -> Result<DensityOperator> {
    let reduced = partial_trace(state, &[mode])?;
    let rho = reduced.to_density_matrix();
    let rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
    DensityOperator::with_deficit(rho, state.deficit)
}
