//! Chow weights of point configurations and an extrapolated weight for a
//! curve.

use balanced_embed::stability::{chow_weight_curve_estimate, WeightVector};
use balanced_embed::{chow_weight_points, roots_of_unity_config, CurveScheme, QuadratureGrid};

fn main() -> balanced_embed::Result<()> {
    let e = roots_of_unity_config(2);
    for w in [[2.0, -1.0, -1.0], [1.0, 1.0, -2.0], [1.0, 0.0, -1.0]] {
        let lambda = WeightVector::new(w.to_vec())?;
        println!("E_2, λ = {w:?}: {:+.6}", chow_weight_points(&e, &lambda)?);
    }
    let fixture = balanced_embed::cli::unstable_family(1);
    let lambda = WeightVector::new(vec![1.0, -1.0])?;
    println!("[1:0] x 2, [0:1], λ = (1,-1): {:+}", chow_weight_points(&fixture, &lambda)?);

    let conic = CurveScheme::rational_normal(2);
    let lambda = WeightVector::new(vec![2.0, -1.0, -1.0])?;
    let grid = QuadratureGrid::log_radial(40, 8, 30.0, 64)?;
    let est = chow_weight_curve_estimate(&conic, &lambda, &[1.0, 0.5, 0.25, 0.125, 0.0625], &grid)?;
    for (s, w, vol) in &est.samples {
        println!("  s = {s:<7} W = {w:+.9}  volume {vol:.9}");
    }
    println!("conic, λ = (2,-1,-1): estimate {:+.6} (converged: {})", est.estimate, est.converged);
    Ok(())
}
