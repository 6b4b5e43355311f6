//! Free boundary meeting the flat boundary at the origin: the modulus table
//! and the cone test. The datum is an exact solution whose contact set is
//! the disk of radius 1.1 centered at (0, 1.1).
//!
//!     cargo run --release --example tangential_contact

use freebound::datum::Expression;
use freebound::geometry::{cone_clearance, extract_gamma_refined, modulus_table};
use freebound::grid::HalfDiskGrid;
use freebound::operator::EllipticOperator;
use freebound::solver::{solve_obstacle, SolverConfig};

const DATUM: &str = "(min(sqrt(x1^2 + (x2 - 1.1)^2), 1.1)^2 - 1.21) / 4 \
                     - 0.605 * ln(min(sqrt(x1^2 + (x2 - 1.1)^2), 1.1) / 1.1)";

fn main() -> freebound::Result<()> {
    let datum = Expression::parse(DATUM)?;
    let g = datum.as_fn();
    for n in [64, 128] {
        let grid = HalfDiskGrid::with_cells(n)?;
        let sol = solve_obstacle(&EllipticOperator::linear_trace(2), &g, &grid, &SolverConfig::default())?;
        let gamma = extract_gamma_refined(&sol.u, &sol.active_set);
        let table = modulus_table(&gamma, &[0.4, 0.2, 0.1, 0.05]);
        let cone = cone_clearance(&gamma, 0.5, 0.1)?;
        println!("h = 1/{n}: error vs exact {:.2e}, cone clear {}", sol.u.max_error(&g), cone.clear);
        for e in &table.entries {
            if e.empty {
                println!("  omega({:<4}) = -      (no vertex)", e.r);
            } else {
                println!("  omega({:<4}) = {:.4}", e.r, e.omega);
            }
        }
    }
    Ok(())
}
