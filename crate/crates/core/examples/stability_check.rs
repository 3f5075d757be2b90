//! Stability of a few point configurations by the counting criterion and by
//! sampled one-parameter subgroups.

use balanced_embed::cli::unstable_family;
use balanced_embed::{chow_stability_sampled, point_set_stable, roots_of_unity_config, PointScheme, ProjPoint};

fn main() -> balanced_embed::Result<()> {
    let p = |c: &[f64]| ProjPoint::from_real(c);
    let cases = [
        ("E_2", roots_of_unity_config(2)),
        ("3 on a line + 1", unstable_family(2)),
        ("[1:0] x 2, [0:1]", unstable_family(1)),
        ("[1:0], [0:1]", PointScheme::reduced(vec![p(&[1., 0.])?, p(&[0., 1.])?])?),
        (
            "5 general points",
            PointScheme::reduced(vec![
                p(&[1., 0., 0.])?,
                p(&[0., 1., 0.])?,
                p(&[0., 0., 1.])?,
                p(&[1., 1., 1.])?,
                p(&[1., 2., 3.])?,
            ])?,
        ),
    ];
    for (name, d) in cases {
        let crit = point_set_stable(&d);
        let sampled = chow_stability_sampled(&d, 200, 1)?;
        println!("{name:<18} criterion {:?} (margin {:+.4})  sampled {:?}", crit.status, crit.margin, sampled.status);
        if let Some(w) = crit.witness {
            println!("{:<18} witness {w:?}", "");
        }
    }
    Ok(())
}
