//! Primitives on complex projective space with its Fubini-Study structure.
//!
//! Points are stored as homogeneous coordinate vectors and are never
//! normalized behind the caller's back: every quantity divides by `|z|^2`
//! internally, so all outputs are invariant under rescaling of the input.
//!
//! Conventions. The Kähler form is `i ∂∂̄ log|z|^2` with no `1/2π`. A real
//! tangent vector at `[z]` is represented by an ambient lift `v` with
//! `<v, z> = 0`; its Riemannian length is `2 |v|^2 / |z|^2` and the
//! symplectic pairing of two lifts is `2 Im(a* b) / |z|^2`. Elements of
//! `su(n+1)` are carried as Hermitian matrices `A = -i ξ`, so the
//! Hamiltonian of `ξ` is `z* A z / |z|^2` and its gradient has ambient lift
//! `(A - h) z`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ORTHOGONALITY_TOL: f64 = 1e-12;

/// A point of `P^n`, stored as a nonzero homogeneous coordinate vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjPoint {
    coords: CVector,
}

impl ProjPoint {
    pub fn new(coords: CVector) -> Result<Self> {
        let norm = coords.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidPoint);
        }
        Ok(ProjPoint { coords })
    }

    pub fn from_slice(coords: &[Complex64]) -> Result<Self> {
        ProjPoint::new(CVector::from_column_slice(coords))
    }

    /// Builds a point from real homogeneous coordinates.
    pub fn from_real(coords: &[f64]) -> Result<Self> {
        ProjPoint::new(CVector::from_iterator(coords.len(), coords.iter().map(|&x| Complex64::new(x, 0.0))))
    }

    /// The coordinate point `e_i` of `P^n`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut coords = CVector::zeros(n + 1);
        coords[i] = Complex64::new(1.0, 0.0);
        ProjPoint { coords }
    }

    pub fn coords(&self) -> &CVector {
        &self.coords
    }

    /// Projective dimension `n`.
    pub fn n(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.norm_squared()
    }

    /// Unit-norm representative.
    pub fn normalized(&self) -> CVector {
        self.coords.unscale(self.coords.norm())
    }

    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        ProjPoint::new(self.coords.map(|x| x * c))
    }

    /// True when the two coordinate vectors are proportional, measured by the
    /// chordal distance `sqrt(1 - |<z, w>|^2 / (|z|^2 |w|^2))`.
    pub fn equivalent(&self, other: &ProjPoint, tol: f64) -> bool {
        self.chordal_distance(other) <= tol
    }

    pub fn chordal_distance(&self, other: &ProjPoint) -> f64 {
        if self.coords.len() != other.coords.len() {
            return f64::INFINITY;
        }
        let a = self.normalized();
        let b = other.normalized();
        let perp = &b - &a * a.dotc(&b);
        perp.norm().min(1.0)
    }
}

/// A complex Hermitian matrix. Construction symmetrizes the input, so the
/// stored entries are exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
}

impl HermitianMatrix {
    /// Takes `(M + M*)/2`. Panics on a non-square input.
    pub fn new(m: CMatrix) -> Self {
        assert!(m.is_square(), "Hermitian matrix must be square");
        let entries = (&m + m.adjoint()).unscale(2.0);
        let mut h = HermitianMatrix { entries };
        for i in 0..h.entries.nrows() {
            h.entries[(i, i)].im = 0.0;
        }
        h
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix { entries: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix { entries: CMatrix::identity(dim, dim) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = CVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        HermitianMatrix { entries: CMatrix::from_diagonal(&d) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.norm()
    }

    /// Real inner product `Re Tr(A B)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.entries[(i, j)] * other.entries[(j, i)]).re;
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix { entries: self.entries.scale(s) }
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { entries: &self.entries + &other.entries }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { entries: &self.entries - &other.entries }
    }

    /// `self + s * other`
    pub fn add_scaled(&mut self, other: &HermitianMatrix, s: f64) {
        self.entries.zip_apply(&other.entries, |a, b| *a += b * s);
    }

    pub fn sub_identity(&self, lambda: f64) -> HermitianMatrix {
        let mut out = self.clone();
        for i in 0..out.dim() {
            out.entries[(i, i)].re -= lambda;
        }
        out
    }

    /// `k A k*`
    pub fn conjugate_by(&self, k: &CMatrix) -> HermitianMatrix {
        HermitianMatrix::new(k * &self.entries * k.adjoint())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `exp(s A)` through the spectral decomposition.
    pub fn exp_scaled(&self, s: f64) -> CMatrix {
        let eig = SymmetricEigen::new(self.entries.clone());
        let u = &eig.eigenvectors;
        let d = CVector::from_iterator(self.dim(), eig.eigenvalues.iter().map(|&l| Complex64::new((s * l).exp(), 0.0)));
        u * CMatrix::from_diagonal(&d) * u.adjoint()
    }

    /// `A^p` for positive semidefinite `A` (negative eigenvalues clamp to 0).
    pub fn psd_power(&self, p: f64) -> CMatrix {
        let eig = SymmetricEigen::new(self.entries.clone());
        let u = &eig.eigenvectors;
        let d = CVector::from_iterator(
            self.dim(),
            eig.eigenvalues.iter().map(|&l| Complex64::new(l.max(0.0).powf(p), 0.0)),
        );
        u * CMatrix::from_diagonal(&d) * u.adjoint()
    }
}

/// A real tangent vector at `base`, represented by its horizontal ambient lift.
#[derive(Clone, Debug)]
pub struct TangentVector {
    base: ProjPoint,
    ambient: CVector,
}

impl TangentVector {
    /// Checks `<ambient, base> = 0` to `1e-12 |ambient| |base|`.
    pub fn new(base: ProjPoint, ambient: CVector) -> Result<Self> {
        if ambient.len() != base.coords.len() {
            return Err(Error::DimensionMismatch { expected: base.coords.len(), found: ambient.len() });
        }
        let defect = orthogonality_defect(&base, &ambient);
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::InconsistentTangent { defect });
        }
        Ok(TangentVector { base, ambient })
    }

    /// Projects an arbitrary ambient vector onto the horizontal space at `base`.
    pub fn project(base: ProjPoint, v: &CVector) -> Self {
        let z = &base.coords;
        let c = z.dotc(v) / z.norm_squared();
        let ambient = v - z * c;
        TangentVector { base, ambient }
    }

    pub fn zero(base: ProjPoint) -> Self {
        let ambient = CVector::zeros(base.coords.len());
        TangentVector { base, ambient }
    }

    pub fn base(&self) -> &ProjPoint {
        &self.base
    }

    pub fn ambient(&self) -> &CVector {
        &self.ambient
    }

    pub fn scale(&self, c: Complex64) -> TangentVector {
        TangentVector { base: self.base.clone(), ambient: self.ambient.map(|x| x * c) }
    }

    /// The image under the complex structure `J` (multiplication by `i`).
    pub fn rotate(&self) -> TangentVector {
        self.scale(Complex64::new(0.0, 1.0))
    }
}

fn orthogonality_defect(base: &ProjPoint, ambient: &CVector) -> f64 {
    let scale = ambient.norm() * base.coords.norm();
    if scale == 0.0 {
        return 0.0;
    }
    let ip = base.coords.dotc(ambient).norm();
    // absolute floor for lifts that vanish up to rounding
    if ip <= 1e-14 * base.norm_sq() {
        return 0.0;
    }
    ip / scale
}

/// An invertible `(n+1) x (n+1)` complex matrix acting on homogeneous coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: CMatrix,
}

impl GroupElement {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        if matrix.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NumericalFailure("non-finite group element".into()));
        }
        let sv = matrix.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-300) || smin <= f64::EPSILON * 1e-2 * smax {
            return Err(Error::SingularGroupElement { det: matrix.determinant().norm() });
        }
        Ok(GroupElement { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        GroupElement { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn diagonal(diag: &[Complex64]) -> Result<Self> {
        GroupElement::new(CMatrix::from_diagonal(&CVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        GroupElement::diagonal(&d)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `self * other`
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement { matrix: &self.matrix * &other.matrix }
    }

    /// `exp(s A) * self` for Hermitian `A`.
    pub fn left_exp(&self, a: &HermitianMatrix, s: f64) -> GroupElement {
        GroupElement { matrix: a.exp_scaled(s) * &self.matrix }
    }

    pub fn inverse(&self) -> GroupElement {
        let inv = self.matrix.clone().try_inverse().expect("group element is invertible by construction");
        GroupElement { matrix: inv }
    }

    pub fn scale(&self, c: Complex64) -> GroupElement {
        GroupElement { matrix: self.matrix.map(|x| x * c) }
    }

    pub fn determinant(&self) -> Complex64 {
        self.matrix.determinant()
    }

    /// Ratio of extreme singular values.
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix.singular_values();
        sv.max() / sv.min()
    }
}

/// `P_{ij} = z_i conj(z_j) / |z|^2`.
pub fn rank_one_projector(z: &ProjPoint) -> HermitianMatrix {
    let c = &z.coords;
    let m = c * c.adjoint() / Complex64::new(c.norm_squared(), 0.0);
    HermitianMatrix::new(m)
}

/// `h_A(z) = z* A z / |z|^2`.
pub fn hamiltonian(a: &HermitianMatrix, z: &ProjPoint) -> Result<f64> {
    check_dim(a.dim(), z)?;
    Ok(hamiltonian_unchecked(a, z.coords()))
}

pub(crate) fn hamiltonian_unchecked(a: &HermitianMatrix, z: &CVector) -> f64 {
    let az = a.matrix() * z;
    z.dotc(&az).re / z.norm_squared()
}

/// Ambient lift `A z - h_A(z) z` of the holomorphic field generated by `A`.
/// As a real vector field this is the Fubini-Study gradient of `h_A`.
pub fn fundamental_vector_field(a: &HermitianMatrix, z: &ProjPoint) -> Result<TangentVector> {
    check_dim(a.dim(), z)?;
    let v = a.matrix() * z.coords();
    Ok(TangentVector::project(z.clone(), &v))
}

/// The field of the unitary flow `exp(i s A)`, i.e. `J` applied to the gradient.
pub fn unitary_vector_field(a: &HermitianMatrix, z: &ProjPoint) -> Result<TangentVector> {
    Ok(fundamental_vector_field(a, z)?.rotate())
}

/// Fubini-Study Riemannian inner product of two lifts at the same base.
pub fn fs_inner(a: &TangentVector, b: &TangentVector) -> f64 {
    2.0 * a.ambient.dotc(&b.ambient).re / a.base.norm_sq()
}

/// Fubini-Study symplectic pairing `omega(a, b) = g(J a, b)`.
pub fn fs_symplectic(a: &TangentVector, b: &TangentVector) -> f64 {
    2.0 * a.ambient.dotc(&b.ambient).im / a.base.norm_sq()
}

/// Fubini-Study squared length. With `v = fundamental_vector_field(A, z)`
/// this is `|grad h_A|^2 (z)`.
pub fn fs_norm_sq(v: &TangentVector) -> Result<f64> {
    let defect = orthogonality_defect(&v.base, &v.ambient);
    if defect > ORTHOGONALITY_TOL {
        return Err(Error::InconsistentTangent { defect });
    }
    Ok(2.0 * v.ambient.norm_squared() / v.base.norm_sq())
}

/// `[g z]`
pub fn act(g: &GroupElement, z: &ProjPoint) -> ProjPoint {
    let coords = g.matrix() * z.coords();
    ProjPoint { coords }
}

/// Orthonormal basis of traceless Hermitian `(n+1) x (n+1)` matrices under
/// `Re Tr(AB)`: off-diagonal real pairs, off-diagonal imaginary pairs, then
/// the diagonal Cartan elements.
pub fn traceless_hermitian_basis(n: usize) -> Vec<HermitianMatrix> {
    let dim = n + 1;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim - 1);
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, k)] = Complex64::new(r, 0.0);
            m[(k, j)] = Complex64::new(r, 0.0);
            out.push(HermitianMatrix { entries: m });
        }
    }
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, k)] = Complex64::new(0.0, -r);
            m[(k, j)] = Complex64::new(0.0, r);
            out.push(HermitianMatrix { entries: m });
        }
    }
    for l in 1..dim {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; dim];
        for d in diag.iter_mut().take(l) {
            *d = 1.0 / norm;
        }
        diag[l] = -(l as f64) / norm;
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    out
}

/// Coordinates of a Hermitian matrix in an orthonormal basis.
pub fn basis_coordinates(basis: &[HermitianMatrix], m: &HermitianMatrix) -> Vec<f64> {
    basis.iter().map(|b| b.inner(m)).collect()
}

/// Inverse of [`basis_coordinates`].
pub fn from_basis_coordinates(basis: &[HermitianMatrix], coords: &[f64]) -> HermitianMatrix {
    let dim = basis.first().map(|b| b.dim()).unwrap_or(0);
    let mut out = HermitianMatrix::zeros(dim);
    for (b, &c) in basis.iter().zip(coords) {
        out.add_scaled(b, c);
    }
    out
}

fn check_dim(dim: usize, z: &ProjPoint) -> Result<()> {
    if z.coords.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: z.coords.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn projector_of_coordinate_point() {
        let p = rank_one_projector(&ProjPoint::coordinate(2, 0));
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_eq!(p.matrix()[(i, j)], c(expect, 0.0));
            }
        }
    }

    #[test]
    fn projector_of_diagonal_point_is_half() {
        let p = rank_one_projector(&ProjPoint::from_real(&[1.0, 1.0]).unwrap());
        for x in p.matrix().iter() {
            assert!((x - c(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn projector_of_root_of_unity_point() {
        for n in 1..5 {
            let zeta = Complex64::from_polar(1.0, 2.0 * PI / (n as f64 + 2.0));
            let coords: Vec<Complex64> = (0..=n).map(|k| zeta.powu(k as u32)).collect();
            let p = rank_one_projector(&ProjPoint::from_slice(&coords).unwrap());
            for a in 0..=n {
                for b in 0..=n {
                    let expect = zeta.powi(a as i32 - b as i32) / (n as f64 + 1.0);
                    assert!((p.matrix()[(a, b)] - expect).norm() < 1e-14);
                }
            }
            assert!((p.trace() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_point_is_rejected() {
        assert!(matches!(ProjPoint::from_real(&[0.0, 0.0]), Err(Error::InvalidPoint)));
    }

    #[test]
    fn hamiltonian_examples() {
        let z = ProjPoint::from_slice(&[c(0.3, 1.0), c(-2.0, 0.5), c(0.1, 0.0)]).unwrap();
        assert!((hamiltonian(&HermitianMatrix::identity(3), &z).unwrap() - 1.0).abs() < 1e-15);
        let a = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        let h = hamiltonian(&a, &ProjPoint::from_real(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(h, 0.0);
        let h = hamiltonian(&a, &ProjPoint::from_real(&[1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(h, 1.0);
    }

    #[test]
    fn fundamental_field_examples() {
        let z = ProjPoint::from_slice(&[c(0.3, 1.0), c(-2.0, 0.5)]).unwrap();
        let v = fundamental_vector_field(&HermitianMatrix::identity(2), &z).unwrap();
        assert!(v.ambient().norm() < 1e-15);

        let a = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        let v = fundamental_vector_field(&a, &ProjPoint::from_real(&[1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(v.ambient().norm(), 0.0);

        let v = fundamental_vector_field(&a, &ProjPoint::from_real(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(v.ambient()[0], c(1.0, 0.0));
        assert_eq!(v.ambient()[1], c(-1.0, 0.0));
    }

    #[test]
    fn fs_norm_examples() {
        let base = ProjPoint::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(fs_norm_sq(&TangentVector::zero(base)).unwrap(), 0.0);

        // |grad h|^2 at [1:1] for diag(1,-1); frozen from the chart
        // computation h(w) = (1-|w|^2)/(1+|w|^2), metric 2/(1+|w|^2)^2 at w = 1.
        let a = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        let v = fundamental_vector_field(&a, &ProjPoint::from_real(&[1.0, 1.0]).unwrap()).unwrap();
        let nsq = fs_norm_sq(&v).unwrap();
        assert!((nsq - 2.0).abs() < 1e-14);
        let scaled = fs_norm_sq(&v.scale(c(3.0, 0.0))).unwrap();
        assert!((scaled - 9.0 * nsq).abs() < 1e-13);
    }

    #[test]
    fn non_orthogonal_tangent_is_rejected() {
        let base = ProjPoint::from_real(&[1.0, 0.0]).unwrap();
        let v = CVector::from_column_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(TangentVector::new(base, v), Err(Error::InconsistentTangent { .. })));
    }

    #[test]
    fn act_examples() {
        let z = ProjPoint::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(act(&GroupElement::identity(2), &z), z);
        let g = GroupElement::from_real_diagonal(&[2.0, 1.0]).unwrap();
        assert!(act(&g, &z).equivalent(&ProjPoint::from_real(&[2.0, 1.0]).unwrap(), 1e-15));
        let swap =
            GroupElement::new(CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]))
                .unwrap();
        let e0 = ProjPoint::coordinate(1, 0);
        assert!(act(&swap, &e0).equivalent(&ProjPoint::coordinate(1, 1), 0.0));
    }

    #[test]
    fn singular_group_element_is_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(GroupElement::new(m), Err(Error::SingularGroupElement { .. })));
    }

    #[test]
    fn basis_is_orthonormal_and_traceless() {
        for n in 1..6 {
            let basis = traceless_hermitian_basis(n);
            assert_eq!(basis.len(), (n + 1) * (n + 1) - 1);
            for (i, a) in basis.iter().enumerate() {
                assert!(a.trace().abs() < 1e-15);
                for (j, b) in basis.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((a.inner(b) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn basis_coordinates_round_trip() {
        let basis = traceless_hermitian_basis(2);
        let coords: Vec<f64> = (0..8).map(|k| (k as f64) * 0.37 - 1.1).collect();
        let m = from_basis_coordinates(&basis, &coords);
        let back = basis_coordinates(&basis, &m);
        for (x, y) in coords.iter().zip(&back) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn exp_of_diagonal() {
        let a = HermitianMatrix::from_real_diagonal(&[0.5, -0.5]);
        let e = a.exp_scaled(2.0);
        assert!((e[(0, 0)].re - 1f64.exp()).abs() < 1e-13);
        assert!((e[(1, 1)].re - (-1f64).exp()).abs() < 1e-13);
    }
}
