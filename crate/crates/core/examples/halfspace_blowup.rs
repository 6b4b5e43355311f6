//! Obstacle solve with the half-space datum and its blow-up at the origin.
//!
//!     cargo run --release --example halfspace_blowup

use freebound::blowup::{analyze_blowup, BlowupThresholds, RescaleSchedule};
use freebound::grid::{HalfDiskGrid, Point};
use freebound::operator::{EllipticOperator, EllipticityBounds};
use freebound::solver::{solve_obstacle, SolverConfig};

fn main() -> freebound::Result<()> {
    let grid = HalfDiskGrid::with_cells(64)?;
    let datum = |p: Point| 0.5 * p[1] * p[1];
    for op in [
        EllipticOperator::linear_trace(2),
        EllipticOperator::pucci_minus(EllipticityBounds::new(1.0, 2.0)?, 2),
    ] {
        let sol = solve_obstacle(&op, &datum, &grid, &SolverConfig::default())?;
        println!(
            "{}: converged {} in {} Newton steps, max error {:.2e}",
            op.kind().name(),
            sol.report.converged,
            sol.report.newton_iterations,
            sol.u.max_error(datum)
        );
        let schedule = RescaleSchedule::new(vec![0.5, 0.25, 0.125], grid.h())?;
        let r = analyze_blowup(&sol.u, &op, 0.0, &schedule, &BlowupThresholds::default())?;
        for f in &r.fits {
            println!("  r = {:<6} a = {:>10.3e}  b = {:.6}  residual {:.1e}", f.radius, f.a, f.b, f.residual);
        }
        println!(
            "  {:?}, M = {:.2e}, spread {:.2e}",
            r.classification.alternative, r.classification.m_estimate, r.uniqueness.spread
        );
    }
    Ok(())
}
