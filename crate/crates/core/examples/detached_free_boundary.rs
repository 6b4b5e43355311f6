//! Free boundary extraction for a datum whose contact set is a band.
//!
//!     cargo run --release --example detached_free_boundary

use freebound::geometry::{complement_measure, extract_gamma, extract_gamma_refined, hausdorff};
use freebound::grid::{HalfDiskGrid, Point};
use freebound::operator::EllipticOperator;
use freebound::solver::{solve_obstacle, SolverConfig};

fn main() -> freebound::Result<()> {
    let op = EllipticOperator::linear_trace(2);
    let datum = |p: Point| (p[1] - 0.25).max(0.0).powi(2) / 2.0;
    for n in [32, 64, 128] {
        let grid = HalfDiskGrid::with_cells(n)?;
        let sol = solve_obstacle(&op, &datum, &grid, &SolverConfig::default())?;
        let end = (1.0f64 - 0.0625).sqrt();
        let line: Vec<Point> = (0..=2000).map(|i| [-end + 2.0 * end * i as f64 / 2000.0, 0.25]).collect();
        let mid: Vec<Point> = extract_gamma(&sol.active_set).vertices().collect();
        let fine: Vec<Point> = extract_gamma_refined(&sol.u, &sol.active_set).vertices().collect();
        let c = complement_measure(&sol.active_set, 0.5);
        println!(
            "h = 1/{n:<4} hausdorff midpoint {:.4}  refined {:.4}  |B+_0.5 \\ Omega| = {:.4}",
            hausdorff(&mid, &line),
            hausdorff(&fine, &line),
            c.measure
        );
    }
    Ok(())
}
