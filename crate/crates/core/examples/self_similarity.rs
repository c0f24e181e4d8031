//! Scale invariance of the flow from a homogeneous datum and a point force:
//! `û(ξ, 4t) = 4 û(2ξ, t)`.

use pmflow::forces::ForceSpec;
use pmflow::grid::{norm3, GridSpec};
use pmflow::norms::NormBand;
use pmflow::operators::TimeGrid;
use pmflow::solver::{homogeneous_datum, solve_cauchy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let tg = TimeGrid::desk();
    let u0 = homogeneous_datum(&grid, 0.02, [0.0, 1.0, 0.0]);
    let sol = solve_cauchy(&u0, &ForceSpec::dirac([0.5, 0.0, 0.0]), &grid, &tg, 1e-11)?;
    let table = grid.mode_table();
    let band = NormBand::default_for(&grid);
    for t in [1.0, 2f64.sqrt(), 2.0] {
        let (early, late) = (sol.field.at_time(t)?, sol.field.at_time(4.0 * t)?);
        let (mut num, mut den) = (0.0, 0.0);
        for p in 0..grid.mode_count() {
            let r = norm3(table.xi_of(p));
            if r < band.xi_min || 2.0 * r > band.xi_max {
                continue;
            }
            let k = table.k_of(p);
            let q = table.index_of([2 * k[0], 2 * k[1], 2 * k[2]]).expect("inside the cube");
            let (a, b) = (late.mode(p), early.mode(q));
            for c in 0..3 {
                num += (a[c] - b[c] * 4.0).norm_sqr();
                den += a[c].norm_sqr();
            }
        }
        println!("t = {t:.4}: relative defect {:.3e}", (num / den).sqrt());
    }
    Ok(())
}
