//! Exit criteria. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use balanced_embed::cli::{sample_aux, unstable_family};
use balanced_embed::integration::volume;
use balanced_embed::linearization::{assemble_operator, consistency_check};
use balanced_embed::projective::{CMatrix, CVector};
use balanced_embed::solver::{RunOutcome, SolveStatus};
use balanced_embed::stability::{random_unitary, StabilityStatus, WeightVector, Witness};
use balanced_embed::{
    chow_stability_sampled, chow_weight_points, continuity_run, moment_matrix, newton_solve_at_t, point_set_stable,
    residual_t, roots_of_unity_config, CurveScheme, GroupElement, PointScheme, ProjPoint, QuadratureGrid, Schedule,
    Scheme, SolverConfig,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_point(n: usize, rng: &mut ChaCha8Rng) -> ProjPoint {
    let c: Vec<Complex64> = (0..=n).map(|_| gaussian(rng)).collect();
    ProjPoint::from_slice(&c).unwrap()
}

fn random_group(dim: usize, spread: f64, rng: &mut ChaCha8Rng) -> GroupElement {
    let m = CMatrix::from_fn(dim, dim, |i, j| {
        let z = gaussian(rng) * spread;
        if i == j {
            z + 1.0
        } else {
            z
        }
    });
    GroupElement::new(m).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let grid = QuadratureGrid::default();
    let mut worst_entry = 0.0f64;
    let mut worst_res = 0.0f64;
    for n in 1..=5 {
        let e: Scheme = roots_of_unity_config(n).into();
        let m = moment_matrix(&e, &grid).unwrap();
        let c = (n + 2) as f64 / (n + 1) as f64;
        let expect = CMatrix::identity(n + 1, n + 1) * Complex64::new(c, 0.0);
        let err = (m.matrix.matrix() - expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst_entry = worst_entry.max(err);
        let r = residual_t(&GroupElement::identity(n + 1), &e, None, 0.0, &grid).unwrap();
        worst_res = worst_res.max(r.frobenius);
    }
    let elapsed = start.elapsed();
    outcome(
        worst_entry < 1e-12 && worst_res < 1e-12 && elapsed < Duration::from_secs(1),
        format!("max entry error {worst_entry:.2e}, max residual {worst_res:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let grid = QuadratureGrid::new(48, 96).unwrap();
    let mut pass = true;
    let mut worst = 0.0f64;
    for d in 1..=3 {
        let c: Scheme = CurveScheme::rational_normal(d).into();
        let r = residual_t(&GroupElement::identity(d + 1), &c, None, 0.0, &grid).unwrap();
        let m = moment_matrix(&c, &grid).unwrap();
        let tol = 1e-7 * r.volume;
        let target = 2.0 * PI * d as f64 / (d + 1) as f64;
        let diag_err = (0..=d).map(|i| (m.matrix.matrix()[(i, i)].re - target).abs()).fold(0.0, f64::max);
        pass &= r.frobenius < tol && diag_err < tol;
        worst = worst.max((r.frobenius / r.volume).max(diag_err / r.volume));
    }
    let elapsed = start.elapsed();
    outcome(pass && elapsed < Duration::from_secs(10), format!("worst relative error {worst:.2e}, {elapsed:.2?}"))
}

fn criterion_3() -> Outcome {
    let orders = [2usize, 4, 8, 16, 32];
    let mut min_ratio = f64::INFINITY;
    let mut pairs = 0;
    for d in 1..=5 {
        let c: Scheme = CurveScheme::rational_normal(d).into();
        let exact = 2.0 * PI * d as f64;
        let errors: Vec<f64> = orders
            .iter()
            .map(|&o| (volume(&c, &QuadratureGrid::new(o, 4 * o).unwrap()).unwrap() - exact).abs())
            .collect();
        for w in errors.windows(2) {
            // below this the error sits at the rounding floor
            if w[0] > 1e-12 * exact {
                pairs += 1;
                min_ratio = min_ratio.min(w[0] / w[1].max(f64::MIN_POSITIVE));
            }
        }
    }
    outcome(pairs > 0 && min_ratio >= 3.5, format!("{pairs} order pairs, minimum error ratio {min_ratio:.3e}"))
}

fn criterion_4() -> Outcome {
    let grid = QuadratureGrid::new(32, 64).unwrap();
    let e = roots_of_unity_config(2);
    let conic = CurveScheme::rational_normal(2);
    let d = sample_aux(&conic, 4).unwrap();
    let id = GroupElement::identity(3);
    let a = consistency_check(&id, &e.clone().into(), Some(&e), 1.0, &grid, 1e-5, 20, 101).unwrap();
    let b = consistency_check(&id, &conic.into(), Some(&d), 1.0, &grid, 1e-5, 20, 102).unwrap();
    let worst = a.max_discrepancy.max(b.max_discrepancy);
    outcome(worst < 1e-4, format!("points {:.2e}, conic {:.2e}", a.max_discrepancy, b.max_discrepancy))
}

fn criterion_5() -> Outcome {
    let grid = QuadratureGrid::new(32, 64).unwrap();
    let e: Scheme = roots_of_unity_config(2).into();
    let op = assemble_operator(&GroupElement::identity(3), &e, None, 0.0, 1e-5, &grid).unwrap();
    let sym_err = (&op.matrix - op.matrix.transpose()).amax() / op.matrix.amax();
    let eig = op.eigenvalues();
    let e_min = eig[0];

    // two antipodal points in P^1 are fixed by the diagonal torus
    let torus: Scheme =
        PointScheme::reduced(vec![ProjPoint::coordinate(1, 0), ProjPoint::coordinate(1, 1)]).unwrap().into();
    let op2 = assemble_operator(&GroupElement::identity(2), &torus, None, 0.0, 1e-5, &grid).unwrap();
    let kernel = op2.eigenvalues().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    outcome(
        sym_err < 1e-6 && e_min > 0.0 && kernel < 1e-8,
        format!("E: asymmetry {sym_err:.1e}, min eigenvalue {e_min:.4}; stabilized: |eigenvalue| {kernel:.1e}"),
    )
}

/// Independent weight of a witness: flat limit of every point in the frame.
fn witness_weight(d: &PointScheme, weights: &[f64], frame: &CMatrix) -> f64 {
    let mut total = 0.0;
    for (p, m) in d.iter() {
        let y: CVector = frame.adjoint() * p.coords();
        let scale = y.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let support: Vec<usize> = (0..y.len()).filter(|&i| y[i].norm() > 1e-10 * scale).collect();
        let wmin = support.iter().map(|&i| weights[i]).fold(f64::INFINITY, f64::min);
        let kept: Vec<usize> = support.into_iter().filter(|&i| (weights[i] - wmin).abs() < 1e-12).collect();
        let norm: f64 = kept.iter().map(|&i| y[i].norm_sqr()).sum();
        let h: f64 = kept.iter().map(|&i| weights[i] * y[i].norm_sqr()).sum::<f64>() / norm;
        total -= m * h;
    }
    total
}

/// Independent check of a subset witness: mass inside the span exceeds `N k/(n+1)`.
fn subset_violates(d: &PointScheme, indices: &[usize]) -> bool {
    let cols: Vec<CVector> = indices.iter().map(|&i| d.points()[i].normalized()).collect();
    let span = CMatrix::from_columns(&cols);
    let svd = span.svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let basis: Vec<CVector> =
        (0..cols.len()).filter(|&k| svd.singular_values[k] > 1e-10 * smax).map(|k| u.column(k).into_owned()).collect();
    let k = basis.len();
    let inside: f64 = d
        .iter()
        .filter(|(p, _)| {
            let z = p.normalized();
            let proj: f64 = basis.iter().map(|b| b.dotc(&z).norm_sqr()).sum();
            (1.0 - proj).abs() < 1e-10
        })
        .map(|(_, m)| m)
        .sum();
    let n = d.n();
    inside > d.mass() * k as f64 / (n + 1) as f64 + 1e-9
}

fn random_configuration(rng: &mut ChaCha8Rng) -> PointScheme {
    let n = rng.random_range(1..=2usize);
    let kind = rng.random_range(0..4u32);
    match kind {
        // generic points with random multiplicities
        0 | 1 => {
            let count = rng.random_range(n + 1..=n + 4);
            let pts = (0..count).map(|_| random_point(n, rng)).collect();
            let mult = (0..count).map(|_| rng.random_range(1..=3u32)).collect();
            PointScheme::new(pts, mult).unwrap()
        }
        // many points in a hyperplane (a point in P^1)
        2 => {
            let on = rng.random_range(2..=4usize);
            let off = rng.random_range(1..=3usize);
            let basis: Vec<CVector> = (0..n).map(|_| random_point(n, rng).normalized()).collect();
            let mut pts = Vec::new();
            for _ in 0..on {
                let mut v = CVector::zeros(n + 1);
                for b in &basis {
                    v += b * gaussian(rng);
                }
                pts.push(ProjPoint::new(v).unwrap());
            }
            for _ in 0..off {
                pts.push(random_point(n, rng));
            }
            PointScheme::reduced(pts).unwrap()
        }
        // engineered families moved by a random group element
        _ => {
            let g = random_group(n + 1, 0.4, rng);
            unstable_family(n).transformed(&g)
        }
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut compared, mut disagreements, mut unverified, mut unstable) = (0, 0, 0, 0);
    for trial in 0..500 {
        let d = random_configuration(&mut rng);
        let crit = point_set_stable(&d);
        let sampled = chow_stability_sampled(&d, 48, trial).unwrap();
        if crit.margin.abs() > 1e-9 {
            compared += 1;
            if crit.status != sampled.status {
                disagreements += 1;
            }
        }
        for verdict in [&crit, &sampled] {
            if verdict.status != StabilityStatus::Unstable {
                continue;
            }
            unstable += 1;
            let ok = match &verdict.witness {
                Some(Witness::Subset { indices, .. }) => subset_violates(&d, indices),
                Some(Witness::Weights { weights, frame, weight, .. }) => {
                    let frame = frame.to_matrix().unwrap();
                    let w = witness_weight(&d, weights, &frame);
                    w < -1e-9 && (w - weight).abs() < 1e-9 * (1.0 + w.abs())
                }
                None => false,
            };
            if !ok {
                unverified += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        disagreements == 0 && unverified == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{compared} compared, {disagreements} disagreements, {unstable} unstable witnesses ({unverified} unverified), {elapsed:.2?}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let grid = QuadratureGrid::new(16, 32).unwrap();
    let config = SolverConfig::with_tolerance(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agree = 0;
    let mut total = 0;
    let mut stable_done = 0;
    while stable_done < 100 {
        let n = rng.random_range(1..=2usize);
        let count = rng.random_range(n + 2..=n + 5);
        let pts: Vec<ProjPoint> = (0..count).map(|_| random_point(n, &mut rng)).collect();
        let d = PointScheme::reduced(pts).unwrap();
        if point_set_stable(&d).status != StabilityStatus::Stable {
            continue;
        }
        stable_done += 1;
        total += 1;
        let x: Scheme = d.into();
        let out = newton_solve_at_t(&GroupElement::identity(n + 1), &x, None, 0.0, &config, &grid).unwrap();
        if out.status == SolveStatus::Converged && out.residual.frobenius < 1e-9 {
            agree += 1;
        }
    }
    for k in 0..20 {
        let n = 1 + k % 2;
        let g = random_group(n + 1, 0.3, &mut rng);
        let d = if k % 4 < 2 {
            unstable_family(n).transformed(&g)
        } else {
            // one heavy point
            let count = n + 1;
            let pts: Vec<ProjPoint> = (0..count).map(|_| random_point(n, &mut rng)).collect();
            let mut mult = vec![1; count];
            mult[0] = count as u32;
            PointScheme::new(pts, mult).unwrap()
        };
        assert_eq!(point_set_stable(&d).status, StabilityStatus::Unstable);
        total += 1;
        let x: Scheme = d.into();
        let out = newton_solve_at_t(&GroupElement::identity(n + 1), &x, None, 0.0, &config, &grid).unwrap();
        if out.status != SolveStatus::Converged {
            agree += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    outcome(rate >= 0.99, format!("{agree}/{total} agree ({:.1}%)", 100.0 * rate))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let grid = QuadratureGrid::new(32, 64).unwrap();
    let conic = CurveScheme::rational_normal(2);
    let d = sample_aux(&conic, 8).unwrap();
    let schedule = Schedule { t_start: Some(50.0), t_end: 0.0, ..Schedule::default() };
    let trace = continuity_run(&conic.into(), &d, &SolverConfig::with_tolerance(1e-9), &schedule, &grid).unwrap();
    let elapsed = start.elapsed();
    let success = trace.outcome == RunOutcome::Success && trace.records.last().map(|r| r.t) == Some(0.0);
    let monotone = trace.records.windows(2).all(|w| w[1].t < w[0].t);
    let max_res = trace.records.iter().map(|r| r.residual).fold(0.0, f64::max);
    let (min_eig, at) = trace
        .records
        .iter()
        .map(|r| (r.min_eigenvalue, r.t))
        .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a });
    let eig_ok = min_eig >= 1e-6;
    outcome(
        success && monotone && max_res < 1e-8 && eig_ok && elapsed < Duration::from_secs(120),
        format!(
            "reached 0: {success}, monotone: {monotone}, max residual {max_res:.1e}, min eigenvalue {min_eig:.1e} at t = {at} (>= 1e-6: {eig_ok}), {} records, {elapsed:.2?}",
            trace.records.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let grid = QuadratureGrid::new(16, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut eq, mut gauge, mut trace) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..100 {
        let n = rng.random_range(1..=3usize);
        let x: Scheme = if trial % 4 == 0 {
            CurveScheme::rational_normal(n).transformed(&random_group(n + 1, 0.3, &mut rng)).into()
        } else {
            let count = rng.random_range(1..=6usize);
            PointScheme::new(
                (0..count).map(|_| random_point(n, &mut rng)).collect(),
                (0..count).map(|_| rng.random_range(1..=3u32)).collect(),
            )
            .unwrap()
            .into()
        };
        let aux = PointScheme::reduced((0..n + 2).map(|_| random_point(n, &mut rng)).collect()).unwrap();
        let t = rng.random_range(0.0..5.0);
        let g = random_group(n + 1, 0.5, &mut rng);
        let k = GroupElement::new(random_unitary(n + 1, &mut rng)).unwrap();
        let base = residual_t(&g, &x, Some(&aux), t, &grid).unwrap();

        let moved = residual_t(&k.compose(&g), &x, Some(&aux), t, &grid).unwrap();
        let expect = base.matrix.conjugate_by(k.matrix());
        eq = eq.max(moved.matrix.sub(&expect).frobenius());

        let c = Complex64::from_polar(rng.random_range(0.2..5.0), rng.random_range(0.0..2.0 * PI));
        let scaled = residual_t(&g.scale(c), &x, Some(&aux), t, &grid).unwrap();
        gauge = gauge.max(scaled.matrix.sub(&base.matrix).frobenius());

        trace = trace.max(base.matrix.trace().abs());
    }
    outcome(
        eq < 1e-9 && gauge < 1e-9 && trace < 1e-9,
        format!("unitary {eq:.1e}, scalar {gauge:.1e}, trace {trace:.1e}"),
    )
}

/// Two-level and nested three-level weights on coordinate subspaces.
fn coordinate_family(n: usize) -> Vec<Vec<f64>> {
    let dim = n + 1;
    let level = |set: u32| -> Vec<f64> {
        let k = set.count_ones() as f64;
        (0..dim).map(|i| if set & (1 << i) != 0 { dim as f64 - k } else { -k }).collect()
    };
    let full = (1u32 << dim) - 1;
    let proper: Vec<u32> = (1..full).collect();
    let mut out: Vec<Vec<f64>> = proper.iter().map(|&s| level(s)).collect();
    for &a in &proper {
        for &b in &proper {
            if a != b && a & b == a {
                out.push(level(a).iter().zip(level(b)).map(|(x, y)| x + y).collect());
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let mut min_w = f64::INFINITY;
    let mut count = 0;
    for n in 1..=4 {
        let e = roots_of_unity_config(n);
        for w in coordinate_family(n) {
            let w = chow_weight_points(&e, &WeightVector::new(w).unwrap()).unwrap();
            min_w = min_w.min(w);
            count += 1;
        }
    }
    let fixture = PointScheme::new(vec![ProjPoint::coordinate(1, 0), ProjPoint::coordinate(1, 1)], vec![2, 1]).unwrap();
    let w = chow_weight_points(&fixture, &WeightVector::new(vec![1.0, -1.0]).unwrap()).unwrap();
    outcome(min_w > 0.0 && w == -1.0, format!("{count} weights on E, minimum {min_w:.4}; fixture weight {w}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("root-of-unity configurations are balanced", criterion_1),
        ("rational normal curves are balanced", criterion_2),
        ("curve quadrature converges", criterion_3),
        ("linearization matches the perpendicular form", criterion_4),
        ("operator positivity and kernel detection", criterion_5),
        ("counting criterion agrees with sampled weights", criterion_6),
        ("stable points balance, unstable points do not", criterion_7),
        ("continuity path on the conic", criterion_8),
        ("equivariance and trace-freeness", criterion_9),
        ("Chow weight sign calibration", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!("criterion {:>2} {tag}  {name}: {}", i + 1, result.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
