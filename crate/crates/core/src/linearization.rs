//! Derivative of the balancing residual along `exp(sA) g`, `A` traceless
//! Hermitian.
//!
//! Directions are the noncompact half of `sl(n+1)`: moving `g` by a unitary
//! only conjugates the residual, so those directions carry no information.
//! The operator used by Newton is assembled column by column from central
//! differences of [`residual_t`]. The analytic quadratic form
//!
//! ```text
//! Q(A) = ∫_{gX} |(grad h_A)^⊥|^2 dV + t Σ_{gD} |grad h_A|^2
//! ```
//!
//! equals the pairing `Re Tr(dF_t(A) A)` and is kept as an independent check.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integration::{curve_nodes, PointScheme, QuadratureGrid, Scheme};
use crate::moment_map::residual_t;
use crate::projective::{
    basis_coordinates, from_basis_coordinates, fs_norm_sq, fundamental_vector_field, hamiltonian_unchecked,
    traceless_hermitian_basis, CVector, GroupElement, HermitianMatrix,
};

/// Smallest admissible finite-difference step.
pub const MIN_STEP: f64 = 1e-12;

/// The derivative of `F_t` at `g` in the orthonormal traceless Hermitian basis.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    /// Column `k` holds the coordinates of `dF_t(A_k)`.
    pub matrix: DMatrix<f64>,
    pub t: f64,
    /// `|L - L^T|_F / |L|_F`
    pub asymmetry: f64,
}

impl LinearOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn symmetrized(&self) -> DMatrix<f64> {
        (&self.matrix + self.matrix.transpose()) * 0.5
    }

    /// Eigenvalues of the symmetrized operator, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.symmetrized()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::NAN)
    }
}

fn check_direction(a: &HermitianMatrix, dim: usize) -> Result<()> {
    if a.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: a.dim() });
    }
    let trace = a.trace();
    if trace.abs() > 1e-12 * (1.0 + a.frobenius()) {
        return Err(Error::NotTraceless { trace });
    }
    Ok(())
}

/// `(F_t(exp(hA) g) - F_t(exp(-hA) g)) / 2h`.
pub fn directional_derivative(
    g: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    a: &HermitianMatrix,
    step: f64,
    grid: &QuadratureGrid,
) -> Result<HermitianMatrix> {
    check_direction(a, x.n() + 1)?;
    if !(step >= MIN_STEP) || !step.is_finite() {
        return Err(Error::Configuration(format!("finite-difference step {step} underflows")));
    }
    let plus = residual_t(&g.left_exp(a, step), x, d, t, grid)?;
    let minus = residual_t(&g.left_exp(a, -step), x, d, t, grid)?;
    Ok(plus.matrix.sub(&minus.matrix).scale(0.5 / step))
}

/// Finite-difference operator in the basis of [`traceless_hermitian_basis`].
pub fn assemble_operator(
    g: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    step: f64,
    grid: &QuadratureGrid,
) -> Result<LinearOperator> {
    let basis = traceless_hermitian_basis(x.n());
    let columns: Vec<Vec<f64>> = basis
        .par_iter()
        .map(|a| {
            let da = directional_derivative(g, x, d, t, a, step, grid)?;
            Ok(basis_coordinates(&basis, &da))
        })
        .collect::<Result<_>>()?;
    let dim = basis.len();
    let matrix = DMatrix::from_fn(dim, dim, |i, k| columns[k][i]);
    let norm = matrix.norm();
    let asymmetry = if norm > 0.0 { (&matrix - matrix.transpose()).norm() / norm } else { 0.0 };
    Ok(LinearOperator { matrix, t, asymmetry })
}

/// Value of the analytic form together with the nodes where the curve's
/// tangent line degenerates (their full gradient is counted as normal).
#[derive(Clone, Debug, Serialize)]
pub struct PerpForm {
    pub value: f64,
    pub degenerate_nodes: usize,
}

/// `∫_{gX} |(grad h_A)^⊥|^2 dV + t Σ_{gD} |grad h_A|^2`, `⊥` taken against the
/// tangent line of the curve. Points have no tangent space.
pub fn quadratic_form_perp(
    g: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    a: &HermitianMatrix,
    grid: &QuadratureGrid,
) -> Result<PerpForm> {
    check_direction(a, x.n() + 1)?;
    let grad_sq = |p: &PointScheme| -> Result<f64> {
        let mut acc = 0.0;
        for (q, m) in p.transformed(g).iter() {
            acc += m * fs_norm_sq(&fundamental_vector_field(a, q)?)?;
        }
        Ok(acc)
    };
    let mut degenerate_nodes = 0;
    let mut value = match x {
        Scheme::Points(p) => grad_sq(p)?,
        Scheme::Curve(c) => {
            let nodes = curve_nodes(&c.transformed(g), grid)?;
            let mut acc = 0.0;
            for node in &nodes {
                let z = &node.point;
                let zz = z.norm_squared();
                let h = hamiltonian_unchecked(a, z);
                let grad: CVector = a.matrix() * z - z * Complex64::new(h, 0.0);
                let w: CVector = &node.tangent - z * (z.dotc(&node.tangent) / zz);
                let ww = w.norm_squared();
                let gg = grad.norm_squared();
                let perp = if ww > 1e-28 * zz * node.tangent.norm_squared().max(1e-300) && ww > 0.0 {
                    (gg - w.dotc(&grad).norm_sqr() / ww).max(0.0)
                } else {
                    degenerate_nodes += 1;
                    gg
                };
                acc += node.weight * 2.0 * perp / zz;
            }
            acc
        }
    };
    if let Some(d) = d {
        if t > 0.0 {
            value += t * grad_sq(d)?;
        }
    }
    Ok(PerpForm { value, degenerate_nodes })
}

/// Per-direction comparison of the pairing against the analytic form.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyEntry {
    pub pairing: f64,
    pub perp: f64,
    pub relative_discrepancy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub entries: Vec<ConsistencyEntry>,
    pub max_discrepancy: f64,
}

/// A unit traceless Hermitian matrix with Gaussian basis coordinates.
pub fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let basis = traceless_hermitian_basis(n);
    let mut coords: Vec<f64> = (0..basis.len()).map(|_| StandardNormal.sample(rng)).collect();
    let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    coords.iter_mut().for_each(|c| *c /= norm);
    from_basis_coordinates(&basis, &coords)
}

/// Compares `Re Tr(dF_t(A) A)` with the perp form over random unit directions.
#[allow(clippy::too_many_arguments)]
pub fn consistency_check(
    g: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    grid: &QuadratureGrid,
    step: f64,
    directions: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<HermitianMatrix> = (0..directions).map(|_| random_direction(x.n(), &mut rng)).collect();
    let scale = crate::integration::volume(x, grid)? + t * d.map_or(0.0, |d| d.mass());
    let entries: Vec<ConsistencyEntry> = dirs
        .par_iter()
        .map(|a| {
            let pairing = directional_derivative(g, x, d, t, a, step, grid)?.inner(a);
            let perp = quadratic_form_perp(g, x, d, t, a, grid)?.value;
            let denom = perp.abs().max(1e-10 * scale);
            Ok(ConsistencyEntry { pairing, perp, relative_discrepancy: (pairing - perp).abs() / denom })
        })
        .collect::<Result<_>>()?;
    let max_discrepancy = entries.iter().map(|e| e.relative_discrepancy).fold(0.0, f64::max);
    Ok(ConsistencyReport { entries, max_discrepancy })
}
