//! Cauchy problem with a point force at the origin; writes the decade snapshots
//! to `cauchy_dirac.pmns` in the current directory.

use std::path::Path;

use pmflow::cli::decade_nodes;
use pmflow::forces::ForceSpec;
use pmflow::grid::GridSpec;
use pmflow::norms::{pm_norm, NormBand};
use pmflow::operators::TimeGrid;
use pmflow::pmns::FieldFile;
use pmflow::solver::{homogeneous_datum, solve_cauchy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let times = TimeGrid::desk();
    let u0 = homogeneous_datum(&grid, 0.02, [0.0, 1.0, 0.0]);
    let sol = solve_cauchy(&u0, &ForceSpec::dirac([0.5, 0.0, 0.0]), &grid, &times, 1e-10)?;
    let c = &sol.certificate;
    println!(
        "eta {:.3}, |y| {:.3e}, contraction {:.3} (predicted {:.3}), {} iterations",
        c.eta,
        c.y_norm,
        c.observed_ratio,
        c.predicted_ratio,
        c.iteration_residuals.len()
    );

    let band = NormBand::default_for(&grid);
    let keep = decade_nodes(sol.field.times());
    for &i in &keep {
        let t = sol.field.times()[i];
        println!("t = {t:8.4}  |u|_PM2 = {:.4e}", pm_norm(sol.field.snapshot(i), 2.0, &band)?);
    }
    let file = FieldFile::new(
        grid,
        keep.iter().map(|&i| sol.field.times()[i]).collect(),
        keep.iter().map(|&i| sol.field.snapshot(i).clone()).collect(),
    )?;
    file.save(Path::new("cauchy_dirac.pmns"))?;
    println!("wrote cauchy_dirac.pmns");
    Ok(())
}
