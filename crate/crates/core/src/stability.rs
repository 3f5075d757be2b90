//! Stability of finite point configurations: general position, the
//! subspace-counting criterion, diagonal one-parameter subgroups with their
//! flat limits and Chow weights, and a numerical weight estimate for curves.
//!
//! Sign convention for weights: `w(D, λ) = -Σ mult(p) h_{diag λ}(lim p)`.
//! With this sign the root-of-unity configuration has `w > 0` for every
//! nontrivial `λ`, and for a two-level weight adapted to a subspace `V` of
//! linear dimension `k`,
//!
//! ```text
//! w = k N - (n+1) mass(V) = (n+1) (k N/(n+1) - mass(V)),
//! ```
//!
//! i.e. `n+1` times the slack of the counting criterion at `V`.

use std::f64::consts::PI;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integration::{CurveScheme, PointScheme, QuadratureGrid, Scheme};
use crate::moment_map::moment_matrix;
use crate::projective::{hamiltonian_unchecked, CMatrix, CVector, GroupElement, HermitianMatrix, ProjPoint};

/// Relative singular-value threshold for every span and independence test.
pub const RANK_TOL: f64 = 1e-10;
/// Criterion values within this distance of zero count as boundary cases.
pub const BOUNDARY_TOL: f64 = 1e-9;

const SUPPORT_TOL: f64 = 1e-12;

/// Weights of a diagonal one-parameter subgroup, summing to zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        let scale = weights.iter().fold(1.0f64, |m, w| m.max(w.abs()));
        if sum.abs() > 1e-12 * scale {
            return Err(Error::Configuration(format!("weights must sum to zero (sum {sum})")));
        }
        Ok(WeightVector(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }

    pub fn scaled(&self, c: f64) -> WeightVector {
        WeightVector(self.0.iter().map(|w| w * c).collect())
    }

    fn matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityStatus {
    Stable,
    Unstable,
    NotStableBoundary,
}

/// Evidence for a non-stable verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// Points of `D` spanning the offending subspace.
    Subset { indices: Vec<usize>, linear_dim: usize, mass: f64, bound: f64 },
    /// A weight vector in an orthonormal frame (columns of `frame`).
    Weights { weights: Vec<f64>, frame: crate::schema::ComplexMatrixJson, weight: f64, limit_fixes_scheme: bool },
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub witness: Option<Witness>,
    /// Smallest slack of the criterion; positive for stable configurations.
    pub margin: f64,
}

fn unit(p: &ProjPoint) -> CVector {
    p.normalized()
}

/// Numerical rank of a set of (normalized) vectors.
pub fn numerical_rank(vectors: &[CVector]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = CMatrix::from_columns(vectors);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Every subset of size `min(N, n+1)` is linearly independent.
pub fn general_position(points: &[ProjPoint]) -> bool {
    let Some(first) = points.first() else {
        return true;
    };
    let dim = first.n() + 1;
    let vecs: Vec<CVector> = points.iter().map(unit).collect();
    let k = points.len().min(dim);
    (0..vecs.len())
        .combinations(k)
        .all(|idx| numerical_rank(&idx.iter().map(|&i| vecs[i].clone()).collect::<Vec<_>>()) == k)
}

/// Greedily draws points, keeping a candidate iff the enlarged set is still
/// in general position, until `n+2` points are collected.
pub fn find_general_position_subset<F>(mut sampler: F, n: usize, budget: usize) -> Result<PointScheme>
where
    F: FnMut() -> ProjPoint,
{
    let mut chosen: Vec<ProjPoint> = Vec::with_capacity(n + 2);
    for _ in 0..budget {
        let candidate = sampler();
        if candidate.n() != n {
            return Err(Error::DimensionMismatch { expected: n + 1, found: candidate.n() + 1 });
        }
        chosen.push(candidate);
        if !general_position(&chosen) {
            chosen.pop();
        }
        if chosen.len() == n + 2 {
            return PointScheme::reduced(chosen);
        }
    }
    Err(Error::DegenerateSource { budget })
}

/// `v_b = [1 : ζ^b : ζ^{2b} : ... : ζ^{nb}]`, `ζ = e^{2πi/(n+2)}`, `b = 0..=n+1`.
pub fn roots_of_unity_config(n: usize) -> PointScheme {
    let m = n + 2;
    let points = (0..m)
        .map(|b| {
            let coords: Vec<Complex64> =
                (0..=n).map(|a| Complex64::from_polar(1.0, 2.0 * PI * ((a * b) % m) as f64 / m as f64)).collect();
            ProjPoint::from_slice(&coords).expect("roots of unity are nonzero")
        })
        .collect();
    PointScheme::reduced(points).expect("nonempty")
}

/// The counting criterion evaluated on the subspace spanned by `indices`:
/// returns `(linear_dim, mass, bound, slack)` with `bound = N k/(n+1)`.
pub fn criterion_slack(d: &PointScheme, indices: &[usize]) -> (usize, f64, f64, f64) {
    let vecs: Vec<CVector> = d.points().iter().map(unit).collect();
    let span: Vec<CVector> = indices.iter().map(|&i| vecs[i].clone()).collect();
    let k = numerical_rank(&span);
    let mut mass = 0.0;
    for (i, v) in vecs.iter().enumerate() {
        let mut aug = span.clone();
        aug.push(v.clone());
        if numerical_rank(&aug) == k {
            mass += d.multiplicities()[i] as f64;
        }
    }
    let bound = d.mass() * k as f64 / (d.n() + 1) as f64;
    (k, mass, bound, bound - mass)
}

/// Proper subspaces spanned by configuration points, one spanning index set each.
fn spanned_subspaces(d: &PointScheme) -> Vec<Vec<usize>> {
    let n = d.n();
    let vecs: Vec<CVector> = d.points().iter().map(unit).collect();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<(usize, Vec<usize>)> = Vec::new();
    for size in 1..=n.min(vecs.len()) {
        for idx in (0..vecs.len()).combinations(size) {
            let span: Vec<CVector> = idx.iter().map(|&i| vecs[i].clone()).collect();
            let k = numerical_rank(&span);
            if k != size || k > n {
                continue;
            }
            // members of the span identify it
            let members: Vec<usize> = (0..vecs.len())
                .filter(|&i| {
                    let mut aug = span.clone();
                    aug.push(vecs[i].clone());
                    numerical_rank(&aug) == k
                })
                .collect();
            if seen.iter().any(|(kk, m)| *kk == k && *m == members) {
                continue;
            }
            seen.push((k, members));
            out.push(idx);
        }
    }
    out
}

/// Subspace-counting criterion: stable iff `#(P ∩ D) < N (dim P + 1)/(n+1)`
/// for every proper subspace `P`, counted with multiplicity.
pub fn point_set_stable(d: &PointScheme) -> StabilityVerdict {
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for idx in spanned_subspaces(d) {
        let (k, mass, bound, slack) = criterion_slack(d, &idx);
        if slack < margin {
            margin = slack;
            witness = Some(Witness::Subset { indices: idx, linear_dim: k, mass, bound });
        }
    }
    let status = classify(margin);
    if status == StabilityStatus::Stable {
        witness = None;
    }
    StabilityVerdict { status, witness, margin }
}

fn classify(margin: f64) -> StabilityStatus {
    if margin > BOUNDARY_TOL {
        StabilityStatus::Stable
    } else if margin < -BOUNDARY_TOL {
        StabilityStatus::Unstable
    } else {
        StabilityStatus::NotStableBoundary
    }
}

/// `lim_{s→0} diag(s^{λ_i}) p`: the coordinates of minimal weight on the
/// support of `p` survive, all others are zeroed.
pub fn flat_limit_point(p: &ProjPoint, lambda: &WeightVector) -> ProjPoint {
    let z = p.coords();
    let scale = z.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let support: Vec<usize> = (0..z.len()).filter(|&i| z[i].norm() > SUPPORT_TOL * scale).collect();
    let wmin = support.iter().map(|&i| lambda.0[i]).fold(f64::INFINITY, f64::min);
    let mut out = CVector::zeros(z.len());
    for &i in &support {
        if (lambda.0[i] - wmin).abs() <= 1e-12 * (1.0 + wmin.abs()) {
            out[i] = z[i];
        }
    }
    ProjPoint::new(out).expect("support is nonempty")
}

/// `-Σ mult(p) h_{diag λ}(lim p)`.
pub fn chow_weight_points(d: &PointScheme, lambda: &WeightVector) -> Result<f64> {
    if lambda.len() != d.n() + 1 {
        return Err(Error::DimensionMismatch { expected: d.n() + 1, found: lambda.len() });
    }
    if lambda.is_trivial() {
        return Err(Error::Configuration("weight vector is trivial".into()));
    }
    let a = lambda.matrix();
    Ok(-d.iter().map(|(p, m)| m * hamiltonian_unchecked(&a, flat_limit_point(p, lambda).coords())).sum::<f64>())
}

/// Weight of the subgroup acting diagonally in the orthonormal frame whose
/// columns are `frame`, together with whether its limit fixes `D`.
pub fn chow_weight_in_frame(d: &PointScheme, lambda: &WeightVector, frame: &CMatrix) -> Result<(f64, bool)> {
    let adj = frame.adjoint();
    let pts: Vec<ProjPoint> = d.points().iter().map(|p| ProjPoint::new(&adj * p.coords())).collect::<Result<_>>()?;
    let local = PointScheme::new(pts, d.multiplicities().to_vec())?;
    let w = chow_weight_points(&local, lambda)?;
    let fixed = local.points().iter().all(|p| flat_limit_point(p, lambda).equivalent(p, 1e-9));
    Ok((w, fixed))
}

/// Orthonormal basis whose leading columns span the given vectors (in order).
fn adapted_frame(dim: usize, spanning: &[CVector]) -> CMatrix {
    let mut basis: Vec<CVector> = Vec::with_capacity(dim);
    let candidates = spanning.iter().cloned().chain((0..dim).map(|i| {
        let mut e = CVector::zeros(dim);
        e[i] = Complex64::new(1.0, 0.0);
        e
    }));
    for v in candidates {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
        }
        let nrm = w.norm();
        if nrm > 1e-8 * v.norm().max(1e-300) && nrm > 1e-12 {
            basis.push(w.unscale(nrm));
        }
        if basis.len() == dim {
            break;
        }
    }
    CMatrix::from_columns(&basis)
}

fn two_level(dim: usize, k: usize) -> Vec<f64> {
    let n1 = dim as f64;
    (0..dim).map(|i| if i < k { n1 - k as f64 } else { -(k as f64) }).collect()
}

/// Chow weights over (a) two- and three-level weights adapted to flags of
/// subspaces spanned by configuration points, and (b) `samples` random
/// integer weights in random unitary frames.
pub fn chow_stability_sampled(d: &PointScheme, samples: usize, seed: u64) -> Result<StabilityVerdict> {
    if samples == 0 {
        return Err(Error::Configuration("samples must be at least 1".into()));
    }
    let n = d.n();
    let dim = n + 1;
    let vecs: Vec<CVector> = d.points().iter().map(unit).collect();
    let subspaces = spanned_subspaces(d);

    let mut best: Option<(f64, Witness)> = None;
    let consider = |best: &mut Option<(f64, Witness)>,
                    w: f64,
                    weights: Vec<f64>,
                    frame: &CMatrix,
                    fixed: bool,
                    normalizer: f64| {
        let value = w / normalizer;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            *best = Some((
                value,
                Witness::Weights {
                    weights,
                    frame: crate::schema::ComplexMatrixJson::from(frame),
                    weight: w,
                    limit_fixes_scheme: fixed,
                },
            ));
        }
    };

    // (a) flags spanned by the configuration
    let spans: Vec<Vec<CVector>> = subspaces.iter().map(|idx| idx.iter().map(|&i| vecs[i].clone()).collect()).collect();
    for (a, span_a) in spans.iter().enumerate() {
        let k = numerical_rank(span_a);
        let frame = adapted_frame(dim, span_a);
        let lambda = WeightVector::new(two_level(dim, k))?;
        let (w, fixed) = chow_weight_in_frame(d, &lambda, &frame)?;
        consider(&mut best, w, lambda.0.clone(), &frame, fixed, dim as f64);

        for span_b in spans.iter().skip(a + 1) {
            let kb = numerical_rank(span_b);
            if kb <= k {
                continue;
            }
            let mut joined = span_a.clone();
            joined.extend(span_b.iter().cloned());
            if numerical_rank(&joined) != kb {
                continue;
            }
            let frame = adapted_frame(dim, &joined);
            let weights: Vec<f64> = two_level(dim, k).iter().zip(two_level(dim, kb)).map(|(x, y)| x + y).collect();
            let lambda = WeightVector::new(weights)?;
            let (w, fixed) = chow_weight_in_frame(d, &lambda, &frame)?;
            // sum of two rays: normalize so the value stays comparable to a slack
            consider(&mut best, w, lambda.0.clone(), &frame, fixed, 2.0 * dim as f64);
        }
    }
    // (b) random frames
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let frame = random_unitary(dim, &mut rng);
        let mut weights: Vec<f64> = (0..dim).map(|_| rng.random_range(-3i32..=3) as f64).collect();
        let sum: f64 = weights.iter().sum();
        weights[dim - 1] -= sum;
        if weights.iter().all(|&w| w == 0.0) {
            continue;
        }
        let lambda = WeightVector::new(weights)?;
        let (w, fixed) = chow_weight_in_frame(d, &lambda, &frame)?;
        // random directions only ever overrule a stable verdict
        if w < -BOUNDARY_TOL {
            consider(&mut best, w, lambda.0.clone(), &frame, fixed, dim as f64);
        }
    }

    let (margin, witness) = match best {
        Some((b, w)) => (b, Some(w)),
        None => (f64::INFINITY, None),
    };
    let status = classify(margin);
    Ok(StabilityVerdict { status, witness: if status == StabilityStatus::Stable { None } else { witness }, margin })
}

/// Haar-distributed unitary matrix from the QR factorization of a complex
/// Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution is Haar
    let phases = CVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        }),
    );
    q * CMatrix::from_diagonal(&phases)
}

/// Result of [`chow_weight_curve_estimate`].
#[derive(Clone, Debug, Serialize)]
pub struct CurveWeightEstimate {
    pub estimate: f64,
    /// `(s, W(s), volume of ρ(s)C)` for every evaluated `s`.
    pub samples: Vec<(f64, f64, f64)>,
    /// Ratio of successive differences of `W`, when defined.
    pub ratio: Option<f64>,
    pub converged: bool,
    pub flags: Vec<String>,
}

/// `W(s) = -∫_{ρ(s)C} h_{diag λ} dV` along decreasing `s`, extrapolated to
/// `s → 0` with Aitken's delta-squared step.
pub fn chow_weight_curve_estimate(
    curve: &CurveScheme,
    lambda: &WeightVector,
    s_values: &[f64],
    grid: &QuadratureGrid,
) -> Result<CurveWeightEstimate> {
    if lambda.len() != curve.n() + 1 {
        return Err(Error::DimensionMismatch { expected: curve.n() + 1, found: lambda.len() });
    }
    if lambda.is_trivial() {
        return Err(Error::Configuration("weight vector is trivial".into()));
    }
    if s_values.is_empty() || s_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Configuration("s values must be strictly decreasing".into()));
    }
    if s_values.iter().any(|&s| !(s > 0.0)) || *s_values.last().unwrap() < 1e-4 {
        return Err(Error::Configuration("s values must lie in [1e-4, inf)".into()));
    }
    let expected_volume = 2.0 * PI * curve.degree() as f64;
    let mut samples = Vec::with_capacity(s_values.len());
    let mut flags = Vec::new();
    for &s in s_values {
        let diag: Vec<f64> = lambda.weights().iter().map(|&l| s.powf(l)).collect();
        let rho = GroupElement::from_real_diagonal(&diag)?;
        let moved: Scheme = curve.transformed(&rho).into();
        let m = match moment_matrix(&moved, grid) {
            Ok(m) => m,
            Err(e) => {
                flags.push(format!("quadrature failed at s = {s}: {e}"));
                break;
            }
        };
        let w: f64 = -lambda.weights().iter().enumerate().map(|(i, l)| l * m.matrix.matrix()[(i, i)].re).sum::<f64>();
        let vol_err = (m.scheme_mass - expected_volume).abs() / expected_volume;
        if vol_err > 1e-6 {
            flags.push(format!("quadrature breakdown at s = {s} (volume error {vol_err:.2e})"));
            break;
        }
        samples.push((s, w, m.scheme_mass));
    }
    let Some(&(_, last, _)) = samples.last() else {
        return Ok(CurveWeightEstimate { estimate: f64::NAN, samples, ratio: None, converged: false, flags });
    };
    let scale = expected_volume * lambda.weights().iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let k = samples.len();
    let (estimate, ratio, converged) = if k >= 2 && (samples[k - 1].1 - samples[k - 2].1).abs() <= 1e-10 * scale {
        (last, None, true)
    } else if k >= 3 {
        let d1 = samples[k - 2].1 - samples[k - 3].1;
        let d2 = samples[k - 1].1 - samples[k - 2].1;
        let r = d2 / d1;
        if r.is_finite() && r.abs() < 0.95 {
            (last + d2 * r / (1.0 - r), Some(r), true)
        } else {
            flags.push(format!("ratio test failed (ratio {r:.3e})"));
            (last, Some(r), false)
        }
    } else {
        flags.push("too few samples to extrapolate".into());
        (last, None, false)
    };
    Ok(CurveWeightEstimate { estimate, samples, ratio, converged, flags })
}
