//! Stationary solution for a point force compared with the Landau field of the
//! same strength on the annulus 0.5 <= |x| <= 2.

use pmflow::forces::ForceSpec;
use pmflow::grid::{to_physical, GridSpec};
use pmflow::landau::{periodic_offset, stokeslet, RotatedLandau};
use pmflow::norms::Region;
use pmflow::solver::solve_stationary;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta = [2.0, 0.0, 0.0];
    let landau = RotatedLandau::new(beta)?;
    for n in [32, 64] {
        let grid = GridSpec::new(n, 16.0, 2.0 / 3.0)?;
        let sol = solve_stationary(&ForceSpec::dirac(beta), &grid, 1e-11)?;
        let (w, g) = (to_physical(&sol.field), to_physical(&sol.lift));
        let (mut raw, mut corrected, mut norm) = (0.0, 0.0, 0.0);
        for i in Region::origin_annulus(0.5, 2.0)?.points(&grid)? {
            let x = periodic_offset(w.position(i), [0.0; 3], grid.box_length());
            let (u, _) = landau.eval(x)?;
            // the linear part on the torus differs from the free-space Stokeslet
            let st = stokeslet(x, beta);
            for k in 0..3 {
                let r = u[k] + g.value(i)[k] - st[k];
                raw += (w.value(i)[k] - u[k]).powi(2);
                corrected += (w.value(i)[k] - r).powi(2);
                norm += r * r;
            }
        }
        println!(
            "n = {n:3}: relative L2 error {:.2}% against Landau, {:.2}% with the periodic correction",
            100.0 * (raw / norm).sqrt(),
            100.0 * (corrected / norm).sqrt()
        );
    }
    Ok(())
}
