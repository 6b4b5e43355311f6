//! No-sign solve whose blow-up at the origin has a mixed term.
//!
//!     cargo run --release --example tilted_case_ii

use freebound::blowup::{analyze_blowup, BlowupThresholds, RescaleSchedule};
use freebound::geometry::{extract_gamma_i, gamma_i_clearance};
use freebound::grid::{HalfDiskGrid, Point};
use freebound::operator::EllipticOperator;
use freebound::solver::{solve_nosign, SolverConfig};

fn main() -> freebound::Result<()> {
    let grid = HalfDiskGrid::with_cells(64)?;
    let op = EllipticOperator::linear_trace(2);
    let datum = |p: Point| p[0] * p[1] + 0.5 * p[1] * p[1];
    let cfg = SolverConfig::default();
    let sol = solve_nosign(&op, &datum, &grid, &cfg)?;
    println!(
        "converged {}, |Omega| = {} nodes, error {:.2e}",
        sol.report.converged,
        sol.active_set.len(),
        sol.u.max_error(datum)
    );

    let r = analyze_blowup(&sol.u, &op, 0.0, &RescaleSchedule::dyadic(grid.h()), &BlowupThresholds::default())?;
    println!("M profile:");
    for s in &r.m_profile.shells {
        println!("  shell {:<8} sup |d1 u|/x2 = {:.6}", s.radius, s.value);
    }
    let c = &r.classification;
    let a = c.representative.map_or(f64::NAN, |f| f.a);
    println!("{:?}: a = {a:.6}, M = {:.6}", c.alternative, c.m_estimate);

    let gamma_i = extract_gamma_i(&sol.u, cfg.tol_u(grid.h()));
    println!("Gamma_i clearance from the origin: {}", gamma_i_clearance(&gamma_i));
    Ok(())
}
