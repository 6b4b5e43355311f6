//! Dyadic polynomial fits, BMO profile and the C^{1,1} sup on an obstacle
//! solution, across two refinements.
//!
//!     cargo run --release --example regularity_profiles

use freebound::grid::{HalfDiskGrid, Point};
use freebound::operator::EllipticOperator;
use freebound::regularity::{bmo_from_dyadic, c11_sup, dyadic_profile, RegularityOptions};
use freebound::solver::{solve_obstacle, SolverConfig};

fn main() -> freebound::Result<()> {
    let op = EllipticOperator::linear_trace(2);
    let datum = |p: Point| (p[1] - 0.25).max(0.0).powi(2) / 2.0 + 0.05 * p[0] * p[0] * p[1].max(0.0);
    for n in [64, 128] {
        let grid = HalfDiskGrid::with_cells(n)?;
        let sol = solve_obstacle(&op, &datum, &grid, &SolverConfig::default())?;
        let dy = dyadic_profile(&sol.u, [0.0, 0.0], &op, 1.0, &RegularityOptions::default())?;
        let bmo = bmo_from_dyadic(&sol.u, &dy);
        println!("h = 1/{n}: c11 sup on B+_0.5 = {:.4}", c11_sup(&sol.u, 0.5)?);
        println!("  k  rho^k     misfit/rho^2k  increment  bmo");
        for (l, b) in dy.levels.iter().zip(&bmo.levels) {
            let inc = l.increment.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("  {:<2} {:<9} {:<14.4e} {:<10} {:.4}", l.k, l.radius, l.scaled_misfit, inc, b.value);
        }
    }
    Ok(())
}
