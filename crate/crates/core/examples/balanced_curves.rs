//! Rational normal curves with `√C(d,i)` coefficients are balanced at the
//! identity. Prints volume and residual as the radial order grows.

use std::f64::consts::PI;

use balanced_embed::integration::volume;
use balanced_embed::{residual_t, CurveScheme, GroupElement, QuadratureGrid, Scheme};

fn main() -> balanced_embed::Result<()> {
    for d in 1..=4 {
        let curve: Scheme = CurveScheme::rational_normal(d).into();
        println!("degree {d} (area 2πd = {:.12})", 2.0 * PI * d as f64);
        for order in [4, 8, 16, 32, 48] {
            let grid = QuadratureGrid::new(order, 2 * order)?;
            let vol = volume(&curve, &grid)?;
            let r = residual_t(&GroupElement::identity(d + 1), &curve, None, 0.0, &grid)?;
            println!("  radial {order:>2}: volume {vol:.12}  |F_0| / vol = {:.2e}", r.frobenius / vol);
        }
    }
    Ok(())
}
