//! Compares `Re Tr(dF_t(A) A)` with the perpendicular gradient form on
//! random directions.

use balanced_embed::cli::sample_aux;
use balanced_embed::linearization::consistency_check;
use balanced_embed::{roots_of_unity_config, CurveScheme, GroupElement, QuadratureGrid, Scheme};

fn main() -> balanced_embed::Result<()> {
    let grid = QuadratureGrid::new(32, 64)?;
    let e = roots_of_unity_config(2);
    let cases = [
        ("E_2 with D = E_2", Scheme::from(e.clone()), e),
        (
            "conic with 4 points",
            CurveScheme::rational_normal(2).into(),
            sample_aux(&CurveScheme::rational_normal(2), 3)?,
        ),
    ];
    for (name, x, d) in cases {
        let g = GroupElement::identity(3);
        let report = consistency_check(&g, &x, Some(&d), 1.0, &grid, 1e-5, 20, 11)?;
        println!("{name}: max relative discrepancy {:.2e}", report.max_discrepancy);
        for entry in report.entries.iter().take(3) {
            println!("  {entry:?}");
        }
    }
    Ok(())
}
