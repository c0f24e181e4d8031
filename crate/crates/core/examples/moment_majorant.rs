//! The moment bound for an integrable force against its Dirac limit.

use pmflow::forces::{moment_majorant, ForceSpec};
use pmflow::grid::GridSpec;
use pmflow::norms::NormBand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let band = NormBand::default_for(&grid);
    let g = ForceSpec::IntegrableMoment {
        width: 0.6,
        masses: vec![[0.3, 0.0, 0.0], [0.0, -0.1, 0.2]],
        centers: vec![[0.5, 0.0, 0.0], [-0.3, 0.4, 0.0]],
    };
    for b in [1.1, 1.5, 1.9] {
        let m = moment_majorant(&g, b, &band, &grid)?;
        println!(
            "b = {b}: lhs {:.4e} <= C(b) {:.4} x moment {:.4e} = {:.4e}  {}",
            m.lhs,
            m.constant,
            m.moment,
            m.rhs,
            if m.holds { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
