//! Measures on embedded schemes: counting measure on finite point schemes
//! and the pulled-back Fubini-Study area form on rational parametrized curves.
//!
//! A curve is given by `n+1` binary forms of degree `d`; coefficient `i` of a
//! component multiplies `s^(d-i) t^i`. The parameter line is covered by two
//! unit-disk charts, `u = t/s` (chart 0) and `u = s/t` (chart 1), and each
//! disk carries a tensor rule: Gauss-Legendre in the radius times an
//! equispaced rule in the angle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projective::{CMatrix, CVector, GroupElement, HermitianMatrix, ProjPoint};

const RANK_TOL: f64 = 1e-10;
pub(crate) const CHUNK: usize = 256;

/// A finite point scheme with positive integer multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct PointScheme {
    points: Vec<ProjPoint>,
    multiplicities: Vec<u32>,
}

impl PointScheme {
    pub fn new(points: Vec<ProjPoint>, multiplicities: Vec<u32>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Configuration("point scheme must be nonempty".into()));
        }
        if points.len() != multiplicities.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: multiplicities.len() });
        }
        if multiplicities.contains(&0) {
            return Err(Error::Configuration("multiplicities must be positive".into()));
        }
        let dim = points[0].coords().len();
        if let Some(p) = points.iter().find(|p| p.coords().len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.coords().len() });
        }
        Ok(PointScheme { points, multiplicities })
    }

    /// Every point with multiplicity one.
    pub fn reduced(points: Vec<ProjPoint>) -> Result<Self> {
        let mult = vec![1; points.len()];
        PointScheme::new(points, mult)
    }

    pub fn points(&self) -> &[ProjPoint] {
        &self.points
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    /// Sum of multiplicities.
    pub fn mass(&self) -> f64 {
        self.multiplicities.iter().map(|&m| m as f64).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProjPoint, f64)> {
        self.points.iter().zip(self.multiplicities.iter().map(|&m| m as f64))
    }

    pub fn transformed(&self, g: &GroupElement) -> PointScheme {
        PointScheme {
            points: self.points.iter().map(|p| crate::projective::act(g, p)).collect(),
            multiplicities: self.multiplicities.clone(),
        }
    }
}

/// A rational curve `[s:t] -> [Z_0(s,t) : ... : Z_n(s,t)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveScheme {
    degree: usize,
    /// `(n+1) x (d+1)`, row `j` holds the coefficients of component `j`.
    coeffs: CMatrix,
}

impl CurveScheme {
    /// Validates that the image is not a point and that the components have
    /// no common zero on the parameter line.
    pub fn new(degree: usize, components: Vec<Vec<Complex64>>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Configuration("curve degree must be positive".into()));
        }
        if components.len() < 2 {
            return Err(Error::Configuration("a curve needs at least two components".into()));
        }
        if let Some(c) = components.iter().find(|c| c.len() != degree + 1) {
            return Err(Error::DimensionMismatch { expected: degree + 1, found: c.len() });
        }
        let rows = components.len();
        let coeffs = CMatrix::from_fn(rows, degree + 1, |j, i| components[j][i]);
        let curve = CurveScheme { degree, coeffs };
        curve.validate()?;
        Ok(curve)
    }

    /// The degree-`d` rational normal curve with components
    /// `sqrt(C(d,i)) s^(d-i) t^i`, balanced in `P^d`.
    pub fn rational_normal(d: usize) -> Self {
        let mut coeffs = CMatrix::zeros(d + 1, d + 1);
        for i in 0..=d {
            coeffs[(i, i)] = Complex64::new(binomial(d, i).sqrt(), 0.0);
        }
        CurveScheme { degree: d, coeffs }
    }

    /// The line `P^1` itself, components `s` and `t`.
    pub fn projective_line() -> Self {
        CurveScheme::rational_normal(1)
    }

    fn validate(&self) -> Result<()> {
        let sv = self.coeffs.clone().singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
        if rank < 2 {
            return Err(Error::DegenerateParametrization("image is a single point".into()));
        }
        // A common zero of all components is a common zero of any two generic
        // combinations, detected by the homogeneous resultant.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut singular_trials = 0;
        for _ in 0..2 {
            let p = self.random_combination(&mut rng);
            let q = self.random_combination(&mut rng);
            let syl = sylvester(&p, &q);
            let sv = syl.singular_values();
            if sv.min() <= RANK_TOL * sv.max() {
                singular_trials += 1;
            }
        }
        if singular_trials == 2 {
            return Err(Error::DegenerateParametrization("components share a common zero".into()));
        }
        Ok(())
    }

    fn random_combination(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let weights: Vec<Complex64> = (0..self.coeffs.nrows())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        (0..=self.degree).map(|i| (0..self.coeffs.nrows()).map(|j| weights[j] * self.coeffs[(j, i)]).sum()).collect()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    pub fn coefficients(&self) -> &CMatrix {
        &self.coeffs
    }

    /// Components as rows of coefficients.
    pub fn components(&self) -> Vec<Vec<Complex64>> {
        (0..self.coeffs.nrows()).map(|j| self.coeffs.row(j).iter().copied().collect()).collect()
    }

    /// The image curve `gC`; base-point-freeness is preserved by invertible `g`.
    pub fn transformed(&self, g: &GroupElement) -> CurveScheme {
        CurveScheme { degree: self.degree, coeffs: g.matrix() * &self.coeffs }
    }

    /// Swaps the roles of `s` and `t`. The image is unchanged.
    pub fn reversed(&self) -> CurveScheme {
        let d = self.degree;
        let coeffs = CMatrix::from_fn(self.coeffs.nrows(), d + 1, |j, i| self.coeffs[(j, d - i)]);
        CurveScheme { degree: d, coeffs }
    }

    /// `Z(u)` and `Z'(u)` in the given chart.
    pub fn evaluate(&self, chart: usize, u: Complex64) -> (CVector, CVector) {
        let rows = self.coeffs.nrows();
        let d = self.degree;
        let mut z = CVector::zeros(rows);
        let mut dz = CVector::zeros(rows);
        for j in 0..rows {
            // Horner on the chart polynomial sum_k a_k u^k
            let coef = |k: usize| {
                if chart == 0 {
                    self.coeffs[(j, k)]
                } else {
                    self.coeffs[(j, d - k)]
                }
            };
            let mut val = coef(d);
            let mut der = Complex64::new(0.0, 0.0);
            for k in (0..d).rev() {
                der = der * u + val;
                val = val * u + coef(k);
            }
            z[j] = val;
            dz[j] = der;
        }
        (z, dz)
    }
}

/// A scheme embedded in `P^n`: either dimension 0 or a rational curve.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    Points(PointScheme),
    Curve(CurveScheme),
}

impl Scheme {
    pub fn n(&self) -> usize {
        match self {
            Scheme::Points(p) => p.n(),
            Scheme::Curve(c) => c.n(),
        }
    }

    /// Complex dimension `m`.
    pub fn dimension(&self) -> usize {
        match self {
            Scheme::Points(_) => 0,
            Scheme::Curve(_) => 1,
        }
    }

    pub fn transformed(&self, g: &GroupElement) -> Scheme {
        match self {
            Scheme::Points(p) => Scheme::Points(p.transformed(g)),
            Scheme::Curve(c) => Scheme::Curve(c.transformed(g)),
        }
    }
}

impl From<PointScheme> for Scheme {
    fn from(p: PointScheme) -> Self {
        Scheme::Points(p)
    }
}

impl From<CurveScheme> for Scheme {
    fn from(c: CurveScheme) -> Self {
        Scheme::Curve(c)
    }
}

/// Quadrature orders as they appear in settings files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub radial_order: usize,
    pub angular_order: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { radial_order: 48, angular_order: 96 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadNode {
    pub u: Complex64,
    pub weight: f64,
}

/// Tensor-product rule on the two unit-disk charts of the parameter line.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    radial_order: usize,
    angular_order: usize,
    charts: [Vec<QuadNode>; 2],
}

impl QuadratureGrid {
    /// Gauss-Legendre in `r in [0,1]` times an equispaced angular rule.
    pub fn new(radial_order: usize, angular_order: usize) -> Result<Self> {
        if radial_order == 0 || angular_order == 0 {
            return Err(Error::Configuration("quadrature grid is empty".into()));
        }
        let (x, w) = gauss_legendre(radial_order);
        let radial: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| {
                let r = 0.5 * (xi + 1.0);
                (r, 0.5 * wi * r)
            })
            .collect();
        Ok(QuadratureGrid::tensor(&radial, angular_order))
    }

    /// Composite Gauss-Legendre in `log r` over `[e^-depth, 1]`, for curves
    /// whose mass concentrates near a chart origin.
    pub fn log_radial(panels: usize, nodes_per_panel: usize, depth: f64, angular_order: usize) -> Result<Self> {
        if panels == 0 || nodes_per_panel == 0 || angular_order == 0 || !(depth > 0.0) {
            return Err(Error::Configuration("quadrature grid is empty".into()));
        }
        let (x, w) = gauss_legendre(nodes_per_panel);
        let h = depth / panels as f64;
        let mut radial = Vec::with_capacity(panels * nodes_per_panel);
        for p in 0..panels {
            let a = -depth + p as f64 * h;
            for (&xi, &wi) in x.iter().zip(&w) {
                let s = a + 0.5 * h * (xi + 1.0);
                let r = s.exp();
                // dr * r = e^{2s} ds
                radial.push((r, 0.5 * h * wi * r * r));
            }
        }
        Ok(QuadratureGrid::tensor(&radial, angular_order))
    }

    pub fn from_settings(s: &QuadratureSettings) -> Result<Self> {
        QuadratureGrid::new(s.radial_order, s.angular_order)
    }

    fn tensor(radial: &[(f64, f64)], angular_order: usize) -> Self {
        let dtheta = 2.0 * PI / angular_order as f64;
        let mut nodes = Vec::with_capacity(radial.len() * angular_order);
        for &(r, wr) in radial {
            for k in 0..angular_order {
                let theta = (k as f64 + 0.5) * dtheta;
                nodes.push(QuadNode { u: Complex64::from_polar(r, theta), weight: wr * dtheta });
            }
        }
        QuadratureGrid { radial_order: radial.len(), angular_order, charts: [nodes.clone(), nodes] }
    }

    pub fn radial_order(&self) -> usize {
        self.radial_order
    }

    pub fn angular_order(&self) -> usize {
        self.angular_order
    }

    pub fn chart(&self, chart: usize) -> &[QuadNode] {
        &self.charts[chart]
    }

    pub fn len(&self) -> usize {
        self.charts[0].len() + self.charts[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid::from_settings(&QuadratureSettings::default()).expect("default grid is valid")
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sylvester(p: &[Complex64], q: &[Complex64]) -> CMatrix {
    let d = p.len() - 1;
    let size = 2 * d;
    let mut m = DMatrix::zeros(size, size);
    for r in 0..d {
        for (i, &c) in p.iter().enumerate() {
            m[(r, r + i)] = c;
        }
        for (i, &c) in q.iter().enumerate() {
            m[(d + r, r + i)] = c;
        }
    }
    m
}

/// Density `rho` of the pulled-back Fubini-Study form, `omega = rho dx ^ dy`:
/// `rho = 2 (|Z|^2 |Z'|^2 - |<Z', Z>|^2) / |Z|^4`.
pub fn fs_density(curve: &CurveScheme, chart: usize, u: Complex64) -> Result<f64> {
    if chart > 1 {
        return Err(Error::Configuration(format!("chart index {chart} out of range")));
    }
    let (z, dz) = curve.evaluate(chart, u);
    density_from_jet(&z, &dz)
}

fn density_from_jet(z: &CVector, dz: &CVector) -> Result<f64> {
    let zz = z.norm_squared();
    if !(zz > 0.0) {
        return Err(Error::DegenerateParametrization("parametrization vanishes at a node".into()));
    }
    let num = zz * dz.norm_squared() - dz.dotc(z).norm_sqr();
    Ok(2.0 * num.max(0.0) / (zz * zz))
}

/// A quadrature node mapped onto the curve.
#[derive(Clone, Debug)]
pub struct CurveNode {
    /// `Z(u)`, a homogeneous representative of the image point.
    pub point: CVector,
    /// `Z'(u)`, the parameter derivative of the representative.
    pub tangent: CVector,
    /// Quadrature weight times the Fubini-Study density.
    pub weight: f64,
}

/// Evaluates the curve on every node of both charts, in fixed order.
pub fn curve_nodes(curve: &CurveScheme, grid: &QuadratureGrid) -> Result<Vec<CurveNode>> {
    if grid.is_empty() {
        return Err(Error::Configuration("quadrature grid is empty".into()));
    }
    let tasks: Vec<(usize, QuadNode)> = (0..2).flat_map(|c| grid.chart(c).iter().map(move |q| (c, *q))).collect();
    tasks
        .par_iter()
        .map(|&(chart, q)| {
            let (point, tangent) = curve.evaluate(chart, q.u);
            let rho = density_from_jet(&point, &tangent)?;
            Ok(CurveNode { point, tangent, weight: q.weight * rho })
        })
        .collect()
}

/// Values that can be summed with real weights.
pub trait Integrand: Sized + Send {
    fn accumulate(&mut self, other: &Self, weight: f64);
}

impl Integrand for f64 {
    fn accumulate(&mut self, other: &Self, weight: f64) {
        *self += other * weight;
    }
}

impl Integrand for Complex64 {
    fn accumulate(&mut self, other: &Self, weight: f64) {
        *self += other * weight;
    }
}

impl Integrand for CMatrix {
    fn accumulate(&mut self, other: &Self, weight: f64) {
        self.zip_apply(other, |a, b| *a += b * weight);
    }
}

impl Integrand for HermitianMatrix {
    fn accumulate(&mut self, other: &Self, weight: f64) {
        self.add_scaled(other, weight);
    }
}

/// `sum_charts sum_nodes w * f([Z(u)]) * rho(u)`, summed in fixed node order.
pub fn integrate_curve<T, F>(curve: &CurveScheme, grid: &QuadratureGrid, zero: T, f: F) -> Result<T>
where
    T: Integrand,
    F: Fn(&ProjPoint) -> T,
{
    let nodes = curve_nodes(curve, grid)?;
    let mut acc = zero;
    for node in &nodes {
        let p = ProjPoint::new(node.point.clone())?;
        acc.accumulate(&f(&p), node.weight);
    }
    Ok(acc)
}

/// `sum_p mult(p) f(p)`
pub fn integrate_points<T, F>(scheme: &PointScheme, zero: T, f: F) -> T
where
    T: Integrand,
    F: Fn(&ProjPoint) -> T,
{
    let mut acc = zero;
    for (p, m) in scheme.iter() {
        acc.accumulate(&f(p), m);
    }
    acc
}

/// Total mass for points, Fubini-Study area for curves.
pub fn volume(scheme: &Scheme, grid: &QuadratureGrid) -> Result<f64> {
    match scheme {
        Scheme::Points(p) => Ok(p.mass()),
        Scheme::Curve(c) => {
            let nodes = curve_nodes(c, grid)?;
            Ok(fixed_order_sum(nodes.iter().map(|n| n.weight)))
        }
    }
}

/// Sum in fixed-size chunks, chunk totals added left to right.
pub(crate) fn fixed_order_sum<I: Iterator<Item = f64>>(it: I) -> f64 {
    let values: Vec<f64> = it.collect();
    values.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).sum()
}

/// `count` pseudo-random points of the image, deterministic in `seed`.
pub fn sample_curve_points(curve: &CurveScheme, count: usize, seed: u64) -> Result<Vec<ProjPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let chart = rng.random_range(0..2usize);
        let r = rng.random_range(0.0f64..1.0).sqrt();
        let theta = rng.random_range(0.0..2.0 * PI);
        let (z, _) = curve.evaluate(chart, Complex64::from_polar(r, theta));
        if let Ok(p) = ProjPoint::new(z) {
            out.push(p);
        }
    }
    Ok(out)
}
