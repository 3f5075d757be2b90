//! Moment matrices of the root-of-unity configurations `E_n`.

use balanced_embed::{moment_matrix, residual_t, roots_of_unity_config, GroupElement, QuadratureGrid, Scheme};

fn main() -> balanced_embed::Result<()> {
    let grid = QuadratureGrid::default();
    println!("{:>2}  {:>10}  {:>12}  {:>12}", "n", "diag", "max error", "residual");
    for n in 1..=6 {
        let e: Scheme = roots_of_unity_config(n).into();
        let m = moment_matrix(&e, &grid)?;
        let expect = (n + 2) as f64 / (n + 1) as f64;
        let err = m
            .matrix
            .sub(&balanced_embed::HermitianMatrix::identity(n + 1).scale(expect))
            .matrix()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let r = residual_t(&GroupElement::identity(n + 1), &e, None, 0.0, &grid)?;
        println!("{n:>2}  {expect:>10.6}  {err:>12.2e}  {:>12.2e}", r.frobenius);
    }
    Ok(())
}
