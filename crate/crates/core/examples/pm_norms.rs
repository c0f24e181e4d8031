//! Pseudomeasure norms of a homogeneous datum and the interpolation gap.

use pmflow::grid::GridSpec;
use pmflow::norms::{interpolation_gap, lq_norm, pm_norm, NormBand, Region};
use pmflow::grid::to_physical;
use pmflow::solver::{homogeneous_datum, random_band_limited};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let band = NormBand::default_for(&grid);
    let u = homogeneous_datum(&grid, 0.1, [0.0, 1.0, 0.0]);
    // |xi|^{-2} profile: flat in PM^2, growing or decaying in the others
    for a in [1.0, 1.5, 2.0, 2.5] {
        println!("|u|_PM{a} = {:.4e}", pm_norm(&u, a, &band)?);
    }

    let w = random_band_limited(&grid, &band, 1.0, 7);
    println!("\n|w|_L2 = {:.4e}", lq_norm(&to_physical(&w), 2.0, &Region::WholeBox)?);
    for (b, q) in [(0.0, 2.0), (1.0, 2.5), (2.5, 4.0)] {
        let gap = interpolation_gap(&w, b, q, &band, &Region::WholeBox)?;
        println!("b = {b}, q = {q}: |w|_Lq / (|w|_PM2^theta |w|_PMb^(1-theta)) = {:.4} (theta {:.3})", gap.ratio, gap.theta);
    }
    Ok(())
}
