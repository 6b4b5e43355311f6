//! Pucci extremal operators and the structural hypothesis checks.
//!
//!     cargo run --example pucci_structure

use freebound::operator::{check_structure, pucci_minus, pucci_plus, EllipticOperator, EllipticityBounds, SymMatrix};

fn main() -> freebound::Result<()> {
    let b = EllipticityBounds::new(1.0, 2.0)?;
    let m = SymMatrix::from_2x2(1.0, 0.5, -2.0);
    println!("M = {:?}, eigenvalues {:?}", m.rows(), m.eigenvalues());
    println!("P+(M) = {:.6}  P-(M) = {:.6}", pucci_plus(&m, b), pucci_minus(&m, b));

    let ops = [
        EllipticOperator::linear_trace(2),
        EllipticOperator::pucci_plus(b, 2),
        EllipticOperator::pucci_minus(b, 2),
        EllipticOperator::bellman_min(b, vec![SymMatrix::identity(2), SymMatrix::diag(&[2.0, 1.0])])?,
        EllipticOperator::custom_table(b, SymMatrix::diag(&[1.0, -1.0])),
    ];
    for op in &ops {
        let r = check_structure(op, 512, 7)?;
        println!(
            "{:<13} F(M) = {:>9.5}  concavity {:?}  failed {:?}",
            op.kind().name(),
            op.evaluate(&m, &[0.0, 0.0])?,
            r.concavity,
            r.failed_hypotheses()
        );
        if let Some(w) = &r.h2.witness {
            println!("    witness: {}", w.detail);
        }
    }
    Ok(())
}
