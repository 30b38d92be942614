//! Finite-difference check of every differentiable primitive.
//!
//!     cargo run --example gradcheck

use senet::gradcheck::{run_suite, TOLERANCE};

fn main() -> senet::Result<()> {
    let results = run_suite(0)?;
    for r in &results {
        println!("{:<28} {:>4} elements  max rel err {:.2e}", r.name, r.elements, r.max_rel_error);
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {failed} above {TOLERANCE:e}", results.len());
    Ok(())
}
