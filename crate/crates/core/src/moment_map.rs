//! Moment matrices `M(S)_{ij} = ∫_S z_i conj(z_j) / |z|^2 dV` and the
//! balancing residuals built from them.
//!
//! Residuals are stored as Hermitian matrices (the factor `i` that would put
//! them in `su(n+1)` is dropped). With `D` a point scheme and `t >= 0`,
//!
//! ```text
//! F_t(g) = M(gX) + t M(gD) - lambda_t Id,   lambda_t = (vol X + t mass D) / (n+1)
//! ```
//!
//! which is traceless for every input.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integration::{curve_nodes, CurveScheme, PointScheme, QuadratureGrid, Scheme, CHUNK};
use crate::projective::{CMatrix, GroupElement, HermitianMatrix};
use crate::schema::ComplexMatrixJson;

/// A moment matrix together with the mass it integrates (its trace).
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub matrix: HermitianMatrix,
    pub scheme_mass: f64,
}

/// A traceless Hermitian residual and its Frobenius norm.
#[derive(Clone, Debug)]
pub struct Residual {
    pub matrix: HermitianMatrix,
    pub frobenius: f64,
    /// The scalar `lambda_t` that was subtracted.
    pub lambda: f64,
    /// Volume of `gX` used for the normalization.
    pub volume: f64,
}

/// How the auxiliary point scheme enters `lambda_t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AuxMassConvention {
    /// `lambda_t = (vol X + t mass D)/(n+1)`, `D` with its own multiplicities.
    #[default]
    TraceFree,
    /// `D` is rescaled to total mass `vol X`, so `lambda_t = (1+t) vol X/(n+1)`.
    MatchVolume,
}

fn point_moment(d: &PointScheme) -> MomentMatrix {
    let dim = d.n() + 1;
    let mut m = CMatrix::zeros(dim, dim);
    for (p, w) in d.iter() {
        add_projector(&mut m, p.coords().as_slice(), w);
    }
    MomentMatrix { matrix: HermitianMatrix::new(m), scheme_mass: d.mass() }
}

#[inline]
fn add_projector(m: &mut CMatrix, z: &[Complex64], weight: f64) {
    let nz: f64 = z.iter().map(|x| x.norm_sqr()).sum();
    let s = weight / nz;
    let dim = z.len();
    for j in 0..dim {
        let zj = z[j].conj() * s;
        for i in 0..dim {
            m[(i, j)] += z[i] * zj;
        }
    }
}

fn curve_moment(c: &CurveScheme, grid: &QuadratureGrid) -> Result<MomentMatrix> {
    let dim = c.n() + 1;
    let nodes = curve_nodes(c, grid)?;
    let partials: Vec<(CMatrix, f64)> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut m = CMatrix::zeros(dim, dim);
            let mut mass = 0.0;
            for node in chunk {
                add_projector(&mut m, node.point.as_slice(), node.weight);
                mass += node.weight;
            }
            (m, mass)
        })
        .collect();
    let mut m = CMatrix::zeros(dim, dim);
    let mut mass = 0.0;
    for (pm, pmass) in &partials {
        m += pm;
        mass += pmass;
    }
    Ok(MomentMatrix { matrix: HermitianMatrix::new(m), scheme_mass: mass })
}

/// Moment matrix of a scheme: counting measure for points, Fubini-Study
/// area for curves.
pub fn moment_matrix(scheme: &Scheme, grid: &QuadratureGrid) -> Result<MomentMatrix> {
    match scheme {
        Scheme::Points(p) => Ok(point_moment(p)),
        Scheme::Curve(c) => curve_moment(c, grid),
    }
}

/// `(vol X + t mass D) / (n+1)`.
pub fn lambda_t(x: &Scheme, d: Option<&PointScheme>, t: f64, grid: &QuadratureGrid) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Configuration(format!("t must be nonnegative, got {t}")));
    }
    let vol = crate::integration::volume(x, grid)?;
    let mass = d.map_or(0.0, |d| d.mass());
    Ok((vol + t * mass) / (x.n() + 1) as f64)
}

/// `F_t(g) = M(gX) + t M(gD) - lambda_t Id`.
pub fn residual_t(
    g: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    grid: &QuadratureGrid,
) -> Result<Residual> {
    residual_t_with(g, x, d, t, grid, AuxMassConvention::TraceFree)
}

pub fn residual_t_with(
    g: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    grid: &QuadratureGrid,
    convention: AuxMassConvention,
) -> Result<Residual> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Configuration(format!("t must be finite and nonnegative, got {t}")));
    }
    let dim = x.n() + 1;
    if g.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
    }
    let mx = moment_matrix(&x.transformed(g), grid)?;
    let volume = mx.scheme_mass;
    let mut total = mx.matrix;
    let mut mass_term = 0.0;
    if let Some(d) = d {
        if d.n() + 1 != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: d.n() + 1 });
        }
        if t > 0.0 {
            let md = point_moment(&d.transformed(g));
            let weight = match convention {
                AuxMassConvention::TraceFree => t,
                AuxMassConvention::MatchVolume => t * volume / md.scheme_mass,
            };
            total.add_scaled(&md.matrix, weight);
            mass_term = weight * md.scheme_mass;
        }
    }
    let lambda = (volume + mass_term) / dim as f64;
    let matrix = total.sub_identity(lambda);
    let frobenius = matrix.frobenius();
    if !frobenius.is_finite() {
        return Err(Error::NumericalFailure("non-finite residual".into()));
    }
    Ok(Residual { matrix, frobenius, lambda, volume })
}

/// Outcome of [`balanced_check`].
#[derive(Clone, Debug, Serialize)]
pub struct BalanceReport {
    pub balanced: bool,
    pub residual: ComplexMatrixJson,
    pub frobenius: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub volume: f64,
    pub lambda: f64,
}

/// Balanced iff `|F_0(g)|_F < tol * vol X`.
pub fn balanced_check(g: &GroupElement, x: &Scheme, grid: &QuadratureGrid, tol: f64) -> Result<BalanceReport> {
    if !(tol > 0.0) {
        return Err(Error::Configuration("tolerance must be positive".into()));
    }
    let r = residual_t(g, x, None, 0.0, grid)?;
    Ok(report_from_residual(&r, tol))
}

pub(crate) fn report_from_residual(r: &Residual, tol: f64) -> BalanceReport {
    let ev = SymmetricEigen::new(r.matrix.matrix().clone()).eigenvalues;
    BalanceReport {
        balanced: r.frobenius < tol * r.volume,
        residual: ComplexMatrixJson::from(r.matrix.matrix()),
        frobenius: r.frobenius,
        min_eigenvalue: ev.min(),
        max_eigenvalue: ev.max(),
        volume: r.volume,
        lambda: r.lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::ProjPoint;
    use crate::stability::roots_of_unity_config;
    use std::f64::consts::PI;

    fn grid() -> QuadratureGrid {
        QuadratureGrid::new(48, 96).unwrap()
    }

    #[test]
    fn single_point_moment() {
        let s: Scheme = PointScheme::reduced(vec![ProjPoint::coordinate(2, 0)]).unwrap().into();
        let m = moment_matrix(&s, &grid()).unwrap();
        assert_eq!(m.matrix.matrix()[(0, 0)].re, 1.0);
        assert_eq!(m.matrix.frobenius(), 1.0);
        assert_eq!(m.scheme_mass, 1.0);
    }

    #[test]
    fn line_moment_is_pi_identity() {
        let m = moment_matrix(&CurveScheme::projective_line().into(), &grid()).unwrap();
        let expect = HermitianMatrix::identity(2).scale(PI);
        assert!(m.matrix.sub(&expect).frobenius() < 1e-10);
    }

    #[test]
    fn lambda_examples() {
        let e: Scheme = roots_of_unity_config(3).into();
        let e_pts = roots_of_unity_config(3);
        let g = grid();
        assert_eq!(lambda_t(&e, None, 0.0, &g).unwrap(), 5.0 / 4.0);
        assert_eq!(lambda_t(&e, Some(&e_pts), 1.0, &g).unwrap(), 2.0 * 5.0 / 4.0);

        // conic in P^2 with four auxiliary points at t = 0.5
        let conic: Scheme = CurveScheme::rational_normal(2).into();
        let d = roots_of_unity_config(2);
        let l = lambda_t(&conic, Some(&d), 0.5, &g).unwrap();
        assert!((l - (4.0 * PI + 2.0) / 3.0).abs() < 1e-10);
    }

    #[test]
    fn conic_is_balanced_at_identity() {
        let conic: Scheme = CurveScheme::rational_normal(2).into();
        let r = residual_t(&GroupElement::identity(3), &conic, None, 0.0, &grid()).unwrap();
        assert!(r.frobenius < 1e-10, "{}", r.frobenius);
        assert!((r.lambda - 4.0 * PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn balanced_check_examples() {
        let e: Scheme = roots_of_unity_config(3).into();
        assert!(balanced_check(&GroupElement::identity(4), &e, &grid(), 1e-10).unwrap().balanced);
        let skew = GroupElement::from_real_diagonal(&[2.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(!balanced_check(&skew, &e, &grid(), 1e-6).unwrap().balanced);
        let single: Scheme = PointScheme::reduced(vec![ProjPoint::coordinate(1, 0)]).unwrap().into();
        let rep = balanced_check(&GroupElement::identity(2), &single, &grid(), 1e-6).unwrap();
        assert!(!rep.balanced);
        assert!((rep.max_eigenvalue - 0.5).abs() < 1e-15);
    }

    #[test]
    fn match_volume_convention_is_trace_free() {
        let conic: Scheme = CurveScheme::rational_normal(2).into();
        let d = roots_of_unity_config(2);
        let g = GroupElement::from_real_diagonal(&[1.3, 0.9, 1.1]).unwrap();
        let r = residual_t_with(&g, &conic, Some(&d), 2.0, &grid(), AuxMassConvention::MatchVolume).unwrap();
        assert!(r.matrix.trace().abs() < 1e-12 * r.volume);
        assert!((r.lambda - 3.0 * r.volume / 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_t_is_rejected() {
        let e: Scheme = roots_of_unity_config(1).into();
        assert!(residual_t(&GroupElement::identity(2), &e, None, -1.0, &grid()).is_err());
    }
}
