//! Balances a random configuration of five points in P^2 and a skewed
//! twisted cubic with Newton's method.

use balanced_embed::projective::CMatrix;
use balanced_embed::{
    gauge_normalize, newton_solve_at_t, CurveScheme, GroupElement, PointScheme, ProjPoint, QuadratureGrid, Scheme,
    SolverConfig,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> balanced_embed::Result<()> {
    let grid = QuadratureGrid::new(32, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));

    let pts = (0..5)
        .map(|_| ProjPoint::from_slice(&[random_c(), random_c(), random_c()]))
        .collect::<balanced_embed::Result<Vec<_>>>()?;
    let x: Scheme = PointScheme::reduced(pts)?.into();
    report("five points", &x, &grid)?;

    let skew = GroupElement::new(CMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            Complex64::new(1.0 + 0.3 * i as f64, 0.0)
        } else {
            0.2 * random_c()
        }
    }))?;
    let cubic: Scheme = CurveScheme::rational_normal(3).transformed(&skew).into();
    report("skewed cubic", &cubic, &grid)
}

fn report(name: &str, x: &Scheme, grid: &QuadratureGrid) -> balanced_embed::Result<()> {
    let out = newton_solve_at_t(&GroupElement::identity(x.n() + 1), x, None, 0.0, &SolverConfig::default(), grid)?;
    println!("{name}: {} after {} iterations", out.status, out.iterations);
    for (k, r) in out.history.iter().enumerate() {
        println!("  {k:>2}  {r:.3e}");
    }
    println!("  normalized g:\n{:.6}", gauge_normalize(&out.g).matrix());
    Ok(())
}
