//! Single-mode truncated Fock space: ladder and quadrature operators,
//! coherent and mixed states, displacements, Hermite functions.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, hermitian_deviation, CMatrix, CVector, C64};

/// Largest truncation deficit a prepared state may carry by default.
pub const DEFAULT_DEFICIT_BUDGET: f64 = 1e-4;

/// Number of Fock levels `|0>..|dim-1>` kept for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cutoff(usize);

impl Cutoff {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("cutoff must keep at least 2 levels, got {dim}")));
        }
        Ok(Cutoff(dim))
    }

    pub fn dim(self) -> usize {
        self.0
    }

    /// `ceil(|a|^2 + 6|a| + 10)`: enough levels for a coherent amplitude of
    /// modulus `|a|` to lose less than ~1e-10 of its norm when `|a| <= 4`.
    pub fn for_amplitude(modulus: f64) -> Self {
        Cutoff(required_dim(modulus))
    }

    pub fn max(self, other: Cutoff) -> Cutoff {
        Cutoff(self.0.max(other.0))
    }
}

pub fn required_dim(modulus: f64) -> usize {
    let m = modulus.abs();
    ((m * m + 6.0 * m + 10.0).ceil() as usize).max(2)
}

/// Dense operator on a (possibly multi-mode) truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: CMatrix,
    dims: Vec<Cutoff>,
    hermitian: bool,
}

impl FockOperator {
    pub fn new(matrix: CMatrix, dims: Vec<Cutoff>, hermitian: bool) -> Result<Self> {
        let total: usize = dims.iter().map(|d| d.dim()).product();
        if matrix.nrows() != total || matrix.ncols() != total {
            return Err(Error::Shape(format!(
                "{}x{} matrix for mode dims {:?}",
                matrix.nrows(),
                matrix.ncols(),
                dims.iter().map(|d| d.dim()).collect::<Vec<_>>()
            )));
        }
        if hermitian {
            let dev = hermitian_deviation(&matrix);
            if dev > 1e-12 {
                return Err(Error::InvalidState(format!("operator flagged Hermitian deviates by {dev:.3e}")));
            }
        }
        Ok(FockOperator { matrix, dims, hermitian })
    }

    fn single(matrix: CMatrix, cutoff: Cutoff, hermitian: bool) -> Self {
        FockOperator { matrix, dims: vec![cutoff], hermitian }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[Cutoff] {
        &self.dims
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator { matrix: self.matrix.adjoint(), dims: self.dims.clone(), hermitian: self.hermitian }
    }

    pub fn apply(&self, v: &StateVector) -> CVector {
        &self.matrix * &v.coeffs
    }

    /// Kronecker product, `self` on the leading modes.
    pub fn tensor(&self, other: &FockOperator) -> FockOperator {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        FockOperator {
            matrix: self.matrix.kronecker(&other.matrix),
            dims,
            hermitian: self.hermitian && other.hermitian,
        }
    }
}

/// Annihilation operator: `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(cutoff: Cutoff) -> FockOperator {
    let d = cutoff.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    FockOperator::single(m, cutoff, false)
}

pub fn creation(cutoff: Cutoff) -> FockOperator {
    annihilation(cutoff).adjoint()
}

pub fn number(cutoff: Cutoff) -> FockOperator {
    let d = cutoff.dim();
    let m = CMatrix::from_diagonal(&DVector::from_fn(d, |n, _| c(n as f64, 0.0)));
    FockOperator::single(m, cutoff, true)
}

/// `Q = (a† + a)/sqrt 2`, `P = i(a† - a)/sqrt 2`.
pub fn quadratures(cutoff: Cutoff) -> (FockOperator, FockOperator) {
    let a = annihilation(cutoff).into_matrix();
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&ad + &a) * c(s, 0.0);
    let p = (&ad - &a) * c(0.0, s);
    (FockOperator::single(q, cutoff, true), FockOperator::single(p, cutoff, true))
}

/// Diagonal `exp(i phi N)`.
pub fn phase_shifter(phi: f64, cutoff: Cutoff) -> FockOperator {
    let d = cutoff.dim();
    let m = CMatrix::from_diagonal(&DVector::from_fn(d, |n, _| C64::from_polar(1.0, phi * n as f64)));
    FockOperator::single(m, cutoff, false)
}

/// `exp(alpha a† - conj(alpha) a)` on the truncated space. The truncated
/// generator is still skew-Hermitian, so the result is exactly unitary.
pub fn displacement(alpha: C64, cutoff: Cutoff) -> FockOperator {
    if required_dim(alpha.norm()) > cutoff.dim() {
        warn!("displacement |alpha| = {:.3} exceeds the cutoff rule for dim {}", alpha.norm(), cutoff.dim());
    }
    let a = annihilation(cutoff).into_matrix();
    let generator = a.adjoint() * alpha - a * alpha.conj();
    FockOperator::single(linalg::expm_skew_hermitian(&generator), cutoff, false)
}

/// Phase-space translation `W(q,p) = D((q + ip)/sqrt 2)`.
pub fn weyl(q: f64, p: f64, cutoff: Cutoff) -> FockOperator {
    displacement(weyl_amplitude(q, p), cutoff)
}

pub fn weyl_amplitude(q: f64, p: f64) -> C64 {
    c(q, p) * std::f64::consts::FRAC_1_SQRT_2
}

/// Exact (untruncated) matrix elements `<m|D(alpha)|n>` for `m < rows`,
/// `n < cols`.
///
/// Uses `<n+k|D|n> = sqrt(n!/(n+k)!) alpha^k e^{-x/2} L_n^{(k)}(x)` with
/// `x = |alpha|^2`, run along each diagonal as the three-term recurrence of
/// the normalised Laguerre functions (all bounded by one). The naive
/// column recursion through `D a† = (a† - conj(alpha)) D` loses about eight
/// digits at `|alpha| ~ 4`.
pub fn displacement_elements(alpha: C64, rows: usize, cols: usize) -> CMatrix {
    let mut d = CMatrix::zeros(rows, cols);
    let x = alpha.norm_sqr();
    let r = alpha.norm();
    let phase = if r > 0.0 { alpha / r } else { c(1.0, 0.0) };
    let neg_conj_phase = -phase.conj();
    let span = rows.max(cols);
    let mut f = Vec::with_capacity(span);
    for k in 0..span {
        // diagonal k: pairs (n + k, n) below and (n, n + k) above
        let len_below = if k < rows { (rows - k).min(cols) } else { 0 };
        let len_above = if k < cols { (cols - k).min(rows) } else { 0 };
        let len = len_below.max(len_above);
        if len == 0 {
            continue;
        }
        f.clear();
        let f0 = if x > 0.0 {
            (0.5 * k as f64 * x.ln() - 0.5 * x - 0.5 * ln_factorial(k)).exp()
        } else if k == 0 {
            1.0
        } else {
            0.0
        };
        f.push(f0);
        if len > 1 {
            f.push((1.0 + k as f64 - x) * f0 / ((k + 1) as f64).sqrt());
        }
        for n in 1..len.saturating_sub(1) {
            let (nf, kf) = (n as f64, k as f64);
            let next = ((2.0 * nf + 1.0 + kf - x) * f[n] - (nf * (nf + kf)).sqrt() * f[n - 1])
                / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
            f.push(next);
        }
        let below = phase.powu(k as u32);
        let above = neg_conj_phase.powu(k as u32);
        for (n, &fv) in f.iter().enumerate() {
            if n < len_below {
                d[(n + k, n)] = below * fv;
            }
            if k > 0 && n < len_above {
                d[(n, n + k)] = above * fv;
            }
        }
    }
    d
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Unit vector in a truncated single-mode space, plus the norm lost to the
/// truncation before it was renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coeffs: CVector,
    norm_deficit: f64,
}

impl StateVector {
    pub fn new(coeffs: CVector, norm_deficit: f64) -> Result<Self> {
        let norm = coeffs.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("state vector norm {norm} is not 1")));
        }
        if !(0.0..1.0).contains(&norm_deficit) {
            return Err(Error::InvalidState(format!("norm deficit {norm_deficit} outside [0, 1)")));
        }
        Ok(StateVector { coeffs, norm_deficit })
    }

    /// Normalises `raw`, recording `1 - |raw|^2` as the deficit.
    pub fn from_unnormalized(raw: CVector) -> Result<Self> {
        let n2 = raw.norm_squared();
        if n2 <= 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let deficit = (1.0 - n2).max(0.0);
        Ok(StateVector { coeffs: raw / c(n2.sqrt(), 0.0), norm_deficit: deficit })
    }

    pub fn basis(n: usize, cutoff: Cutoff) -> Result<Self> {
        if n >= cutoff.dim() {
            return Err(Error::Config(format!("level {n} outside cutoff {}", cutoff.dim())));
        }
        let mut v = CVector::zeros(cutoff.dim());
        v[n] = c(1.0, 0.0);
        Ok(StateVector { coeffs: v, norm_deficit: 0.0 })
    }

    pub fn coeffs(&self) -> &CVector {
        &self.coeffs
    }

    pub fn norm_deficit(&self) -> f64 {
        self.norm_deficit
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn cutoff(&self) -> Cutoff {
        Cutoff(self.coeffs.len())
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.coeffs.dotc(&other.coeffs)
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: &self.coeffs * self.coeffs.adjoint(),
            cutoff: self.cutoff(),
            deficit: self.norm_deficit,
        }
    }

    /// Zero-padded or cut to another cutoff; cutting must not drop weight
    /// above `1e-12`.
    pub fn resized(&self, cutoff: Cutoff) -> Result<Self> {
        let d = cutoff.dim();
        let dropped: f64 = self.coeffs.iter().skip(d).map(|z| z.norm_sqr()).sum();
        if dropped > 1e-12 {
            return Err(Error::Truncation {
                deficit: dropped,
                budget: 1e-12,
                context: format!("shrinking state to {d} levels"),
            });
        }
        let coeffs = CVector::from_fn(d, |n, _| if n < self.dim() { self.coeffs[n] } else { C64::default() });
        Ok(StateVector { coeffs, norm_deficit: self.norm_deficit })
    }
}

/// Truncated, renormalised coherent state with the default deficit budget.
pub fn coherent_state(alpha: C64, cutoff: Cutoff) -> Result<StateVector> {
    coherent_state_with_budget(alpha, cutoff, DEFAULT_DEFICIT_BUDGET)
}

pub fn coherent_state_with_budget(alpha: C64, cutoff: Cutoff, budget: f64) -> Result<StateVector> {
    if required_dim(alpha.norm()) > cutoff.dim() {
        warn!(
            "coherent state |alpha| = {:.3} below the cutoff rule ({} < {})",
            alpha.norm(),
            cutoff.dim(),
            required_dim(alpha.norm())
        );
    }
    let raw = coherent_coefficients(alpha, cutoff.dim());
    let kept = raw.norm_squared();
    let deficit = (1.0 - kept).max(0.0);
    if deficit > budget {
        return Err(Error::Truncation {
            deficit,
            budget,
            context: format!("coherent state alpha = {alpha} at {} levels", cutoff.dim()),
        });
    }
    StateVector::from_unnormalized(raw)
}

/// Raw series `exp(-|a|^2/2) a^n / sqrt(n!)`, not renormalised.
pub fn coherent_coefficients(alpha: C64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut coeff = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            coeff = coeff * alpha / (n as f64).sqrt();
        }
        v[n] = coeff;
    }
    v
}

/// A weighted pure component of a density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PureBranch {
    pub weight: f64,
    pub vector: CVector,
}

/// Spectral decomposition of a density operator into its dominant pure parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Branches {
    pub branches: Vec<PureBranch>,
    /// Eigenvalue weight that was dropped before renormalising.
    pub discarded: f64,
}

/// Positive trace-one matrix on a single truncated mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    cutoff: Cutoff,
    deficit: f64,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_deficit(matrix, 0.0)
    }

    pub fn with_deficit(matrix: CMatrix, deficit: f64) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d {
            return Err(Error::Shape(format!("density matrix is {}x{}", d, matrix.ncols())));
        }
        let cutoff = Cutoff::new(d)?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("density matrix has non-finite entries".into()));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > 1e-12 {
            return Err(Error::InvalidState(format!("density matrix not Hermitian (deviation {dev:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("density matrix trace {:.12} is not 1", tr.re)));
        }
        let (vals, _) = linalg::hermitian_eigen(&matrix);
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::InvalidState(format!("density matrix has negative eigenvalue {min:.3e}")));
        }
        Ok(DensityOperator { matrix, cutoff, deficit })
    }

    pub fn vacuum(cutoff: Cutoff) -> Self {
        StateVector::basis(0, cutoff).expect("level 0 always fits").to_density()
    }

    pub fn fock(n: usize, cutoff: Cutoff) -> Result<Self> {
        Ok(StateVector::basis(n, cutoff)?.to_density())
    }

    pub fn coherent(alpha: C64, cutoff: Cutoff) -> Result<Self> {
        Ok(coherent_state(alpha, cutoff)?.to_density())
    }

    /// Thermal state with mean photon number `nbar`, truncated and
    /// renormalised.
    pub fn thermal(nbar: f64, cutoff: Cutoff) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::Config(format!("thermal mean photon number {nbar} must be >= 0")));
        }
        let d = cutoff.dim();
        let ratio = nbar / (1.0 + nbar);
        let weights: Vec<f64> = (0..d).map(|n| ratio.powi(n as i32) / (1.0 + nbar)).collect();
        let kept: f64 = weights.iter().sum();
        let deficit = (1.0 - kept).max(0.0);
        if deficit > DEFAULT_DEFICIT_BUDGET {
            return Err(Error::Truncation {
                deficit,
                budget: DEFAULT_DEFICIT_BUDGET,
                context: format!("thermal state nbar = {nbar} at {d} levels"),
            });
        }
        let m = CMatrix::from_diagonal(&DVector::from_fn(d, |n, _| c(weights[n] / kept, 0.0)));
        Ok(DensityOperator { matrix: m, cutoff, deficit })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.dim()
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn expectation(&self, op: &FockOperator) -> C64 {
        (&self.matrix * op.matrix()).trace()
    }

    /// Mean and standard deviation of `Q` and of `P`.
    pub fn quadrature_moments(&self) -> [(f64, f64); 2] {
        let (q, p) = quadratures(self.cutoff);
        [q, p].map(|op| {
            let mean = self.expectation(&op).re;
            let sq = (&self.matrix * op.matrix() * op.matrix()).trace().re;
            (mean, (sq - mean * mean).max(0.0).sqrt())
        })
    }

    /// Occupation of the top retained level, a proxy for truncation damage.
    pub fn top_level_weight(&self) -> f64 {
        let d = self.dim();
        self.matrix[(d - 1, d - 1)].re
    }

    /// Zero-padded to a larger cutoff, or cut to a smaller one if the
    /// dropped levels are empty to `1e-12`.
    pub fn resized(&self, cutoff: Cutoff) -> Result<Self> {
        let d = cutoff.dim();
        let old = self.dim();
        let dropped: f64 = (d..old).map(|n| self.matrix[(n, n)].re).sum();
        if dropped > 1e-12 {
            return Err(Error::Truncation {
                deficit: dropped,
                budget: 1e-12,
                context: format!("shrinking density operator to {d} levels"),
            });
        }
        let m = CMatrix::from_fn(d, d, |r, col| {
            if r < old && col < old {
                self.matrix[(r, col)]
            } else {
                C64::default()
            }
        });
        Ok(DensityOperator { matrix: m, cutoff, deficit: self.deficit })
    }

    /// Eigen-decomposition into at most `max_branches` pure states.
    ///
    /// Eigenvalues below `1e-14` are dropped silently; if more than
    /// `max_branches` remain the smallest are dropped as well and the
    /// discarded weight is reported. Weights are renormalised to sum to one.
    pub fn branches(&self, max_branches: usize) -> Branches {
        let (vals, vecs) = linalg::hermitian_eigen(&self.matrix);
        let mut branches = Vec::new();
        let mut discarded = 0.0;
        for (k, &w) in vals.iter().enumerate() {
            if w <= 1e-14 {
                discarded += w.max(0.0);
                continue;
            }
            if branches.len() == max_branches {
                discarded += w;
                continue;
            }
            let mut v: CVector = vecs.column(k).into_owned();
            // fix the global phase on the largest coefficient for reproducibility
            let (_, pivot) = v.iter().enumerate().fold((0.0, 0), |(best, bi), (i, z)| {
                if z.norm() > best + 1e-12 {
                    (z.norm(), i)
                } else {
                    (best, bi)
                }
            });
            let phase = v[pivot].conj() / v[pivot].norm();
            v *= phase;
            branches.push(PureBranch { weight: w, vector: v });
        }
        let kept: f64 = branches.iter().map(|b| b.weight).sum();
        for b in &mut branches {
            b.weight /= kept;
        }
        Branches { branches, discarded }
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &DensityOperator, w: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Shape("mixing density operators of different cutoffs".into()));
        }
        let m = &self.matrix * c(w, 0.0) + &other.matrix * c(1.0 - w, 0.0);
        Ok(DensityOperator { matrix: m, cutoff: self.cutoff, deficit: self.deficit.max(other.deficit) })
    }
}

/// L2-normalised Hermite functions `h_0(x)..h_{count-1}(x)`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut h = vec![0.0; count];
    hermite_functions_into(x, &mut h);
    h
}

pub fn hermite_functions_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = x * (2.0 / (nf + 1.0)).sqrt() * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

pub fn hermite_point(n: usize, x: f64) -> f64 {
    hermite_functions(x, n + 1)[n]
}

/// Beyond this |x| every Hermite function below `count` is negligible
/// (below ~1e-20).
pub fn hermite_support(count: usize) -> f64 {
    (2.0 * count as f64 + 1.0).sqrt() + 9.0
}
