//! Growth rates of the solution driven by a point force, fitted against
//! `t^{(3-q)/(2q)}` and `t^{(2-b)/2}`. Solves on 64³ and 32³ for the
//! extrapolation, so expect about a minute in release mode.

use pmflow::asymptotics::{run_farfield_rates, BoundType, FarfieldOptions, RateMeasure};
use pmflow::forces::ForceSpec;
use pmflow::grid::{FourierVectorField, GridSpec};
use pmflow::norms::Region;
use pmflow::operators::TimeGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::desk();
    let u0 = FourierVectorField::zeros(grid);
    let measures = [RateMeasure::Lq { q: 2.0, region: Region::WholeBox }, RateMeasure::Pm { b: 0.0 }];
    let opts = FarfieldOptions {
        bound_type: BoundType::Equality,
        lq_window: Some([0.5, 16.0]),
        pm_window: Some([0.1, 3.4]),
        extrapolate: true,
        ..Default::default()
    };
    let reports = run_farfield_rates(&u0, &ForceSpec::dirac([0.5, 0.0, 0.0]), &grid, &TimeGrid::desk(), &measures, &opts)?;
    for r in &reports {
        println!("{}", r.summary());
    }
    Ok(())
}
