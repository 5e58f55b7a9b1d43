//! Covariant phase-space observables
//! `E^S(Z) = (2 pi)^-1 ∫_Z W(q,p) S W(q,p)* dq dp`, the coordinate
//! conjugation `S -> C S C^-1`, and the two-mode position/momentum form of
//! `Tr[T E^{CSC^-1}(X × Y)]`.

use std::f64::consts::{PI, SQRT_2};

use log::warn;

use crate::error::{Error, Result};
use crate::fock::{displacement_elements, weyl_amplitude, Cutoff, DensityOperator};
use crate::homodyne::{effective_support, fourier_diagonal, position_projector};
use crate::linalg::{self, CMatrix, C64};
use crate::multimode::{apply_two_mode, BeamSplitter, MultimodeState};
use crate::quadrature::{integrate_2d, Integral2d, QuadratureControls};
use crate::region::{IntervalSet, Rectangle};

/// `C S C^-1`: entrywise complex conjugation in the Fock basis, which is the
/// coordinate conjugation because the Hermite functions are real.
pub fn conjugate_state(s: &DensityOperator) -> DensityOperator {
    let m = s.matrix().map(|z| z.conj());
    DensityOperator::with_deficit(m, s.deficit()).expect("conjugation preserves density operators")
}

/// `W(q0,p0) T W(q0,p0)*` with exact matrix elements, cut to `cutoff` and
/// renormalised; the cut weight is added to the deficit.
pub fn displaced(t: &DensityOperator, q0: f64, p0: f64, cutoff: Cutoff) -> Result<DensityOperator> {
    let m = displacement_elements(weyl_amplitude(q0, p0), cutoff.dim(), t.dim());
    let raw = &m * t.matrix() * m.adjoint();
    let tr = raw.trace().re;
    let mut out = raw / C64::new(tr, 0.0);
    // restore exact Hermiticity lost to rounding
    out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    DensityOperator::with_deficit(out, t.deficit() + (1.0 - tr).max(0.0))
}

/// Square roots of the spectral weights times the eigenvectors, as columns;
/// `rho = F F†`.
fn factor(rho: &DensityOperator) -> CMatrix {
    let (vals, vecs) = linalg::hermitian_eigen(rho.matrix());
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-15).collect();
    CMatrix::from_fn(rho.dim(), keep.len(), |r, j| vecs[(r, keep[j])] * vals[keep[j]].sqrt())
}

/// `(2 pi)^-1 Tr[T W(q,p) S W(q,p)*]` evaluated as `||Φ† D Ψ||²` with
/// `T = ΦΦ†`, `S = ΨΨ†`.
#[derive(Debug, Clone)]
pub struct DensityKernel {
    phi_adj: CMatrix,
    psi: CMatrix,
}

impl DensityKernel {
    pub fn new(t: &DensityOperator, s: &DensityOperator) -> Self {
        DensityKernel { phi_adj: factor(t).adjoint(), psi: factor(s) }
    }

    pub fn eval(&self, q: f64, p: f64) -> f64 {
        let d = displacement_elements(weyl_amplitude(q, p), self.phi_adj.ncols(), self.psi.nrows());
        let inner = &self.phi_adj * (d * &self.psi);
        inner.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * PI)
    }
}

/// Half-width of the square outside which `E^S` assigns `T` negligible
/// weight: `4 + spread(T) + spread(S)`, with
/// `spread = max over Q, P of (|mean| + 4 std)`.
pub fn window(t: &DensityOperator, s: &DensityOperator) -> f64 {
    let spread = |rho: &DensityOperator| {
        rho.quadrature_moments().iter().map(|(m, sd)| m.abs() + 4.0 * sd).fold(0.0, f64::max)
    };
    4.0 + spread(t) + spread(s)
}

/// `E^S` for a fixed generator `S`.
#[derive(Debug, Clone)]
pub struct PhaseSpaceMeasure {
    generator: DensityOperator,
    controls: QuadratureControls,
}

impl PhaseSpaceMeasure {
    pub fn new(generator: DensityOperator) -> Self {
        PhaseSpaceMeasure { generator, controls: QuadratureControls::default() }
    }

    pub fn with_controls(generator: DensityOperator, controls: QuadratureControls) -> Self {
        PhaseSpaceMeasure { generator, controls }
    }

    pub fn generator(&self) -> &DensityOperator {
        &self.generator
    }

    pub fn controls(&self) -> &QuadratureControls {
        &self.controls
    }

    pub fn window(&self, t: &DensityOperator) -> f64 {
        window(t, &self.generator)
    }

    pub fn density(&self, t: &DensityOperator, q: f64, p: f64) -> f64 {
        let w = self.window(t);
        if q.abs() > w || p.abs() > w {
            warn!(
                "density at ({q}, {p}) outside the window {w:.2}; input deficits {:.3e}",
                t.deficit() + self.generator.deficit()
            );
        }
        DensityKernel::new(t, &self.generator).eval(q, p)
    }

    /// `Tr[T E^S(Z)]` with infinite edges cut at the window.
    pub fn integrate(&self, t: &DensityOperator, z: &Rectangle) -> Result<Integral2d> {
        let kernel = DensityKernel::new(t, &self.generator);
        let rect = z.clipped(self.window(t));
        integrate_2d(&|q, p| kernel.eval(q, p), &rect, &self.controls)
    }

    pub fn rectangle_probability(&self, t: &DensityOperator, z: &Rectangle) -> Result<f64> {
        Ok(self.integrate(t, z)?.value)
    }

    /// Probabilities of several rectangles sharing one kernel.
    pub fn rectangle_probabilities(&self, t: &DensityOperator, zs: &[Rectangle]) -> Result<Vec<f64>> {
        let kernel = DensityKernel::new(t, &self.generator);
        let w = self.window(t);
        zs.iter()
            .map(|z| Ok(integrate_2d(&|q, p| kernel.eval(q, p), &z.clipped(w), &self.controls)?.value))
            .collect()
    }
}

/// `(2 pi)^-1 Tr[T W(q,p) S W(q,p)*]`.
pub fn density(t: &DensityOperator, s: &DensityOperator, q: f64, p: f64) -> f64 {
    PhaseSpaceMeasure::new(s.clone()).density(t, q, p)
}

/// `Tr[T E^S(Z)]`.
pub fn rectangle_probability(t: &DensityOperator, s: &DensityOperator, z: &Rectangle) -> Result<f64> {
    PhaseSpaceMeasure::new(s.clone()).rectangle_probability(t, z)
}

/// `Tr[B_12 (T ⊗ S) B_12* P^Q(X/sqrt2) ⊗ P^P(Y/sqrt2)]`, with the momentum
/// measure realised as `F* P^Q F` and `F h_n = (-i)^n h_n`.
pub fn lemma2_rhs(t: &DensityOperator, s: &DensityOperator, x: &IntervalSet, y: &IntervalSet) -> Result<f64> {
    lemma2_rhs_with(t, s, x, y, &QuadratureControls::default())
}

pub fn lemma2_rhs_with(
    t: &DensityOperator,
    s: &DensityOperator,
    x: &IntervalSet,
    y: &IntervalSet,
    controls: &QuadratureControls,
) -> Result<f64> {
    // every populated sector of B_12 is exact at this dimension
    let dim = (effective_support(t) + effective_support(s)).max(2);
    let c = Cutoff::new(dim)?;
    let (t, s) = (t.resized(c)?, s.resized(c)?);
    let input = MultimodeState::product_mixed(&[1, 2], &[&t, &s])?;
    let rho = apply_two_mode(&BeamSplitter::new(1, 2, c, c)?, &input, 1, 2)?.to_density_matrix();
    let f = fourier_diagonal(dim);
    let gx = position_projector(dim, &x.scaled(1.0 / SQRT_2), controls)?;
    let gy = position_projector(dim, &y.scaled(1.0 / SQRT_2), controls)?;
    // Tr[(I ⊗ F) rho (I ⊗ F)* (Gx ⊗ Gy)]
    let mut total = C64::default();
    for a in 0..dim {
        for b in 0..dim {
            let row = a * dim + b;
            for cc in 0..dim {
                let gxa = gx[(cc, a)];
                if gxa == 0.0 {
                    continue;
                }
                for d in 0..dim {
                    let col = cc * dim + d;
                    total += f[b] * rho[(row, col)] * f[d].conj() * (gxa * gy[(d, b)]);
                }
            }
        }
    }
    if total.im.abs() > 1e-8 {
        return Err(Error::Accuracy(format!("probability has imaginary part {:.3e}", total.im)));
    }
    Ok(total.re)
}
