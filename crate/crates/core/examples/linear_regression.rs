//! Distributed least squares in ten dimensions, with the per-iteration
//! diagnostics written as CSV to stdout.
//!
//! ```text
//! cargo run --example linear_regression > regression.csv
//! ```

use ppsd::engine::{backward_error_triplets, run, Algorithm};
use ppsd::experiments::{default_config, g1_graph, regression_5};

fn main() -> ppsd::Result<()> {
    let g = g1_graph();
    let inst = regression_5(3)?;
    let cfg = default_config(&inst, Algorithm::Ppsd, 3);
    let rec = run(&g, &inst, &cfg)?;
    eprintln!("{:?} after {} iterations, residual {:.2e}", rec.stop, rec.iterations(), rec.final_residual());

    // Errors weighted by the backward absolute probability vector.
    if let Some(triplets) = backward_error_triplets(&rec, &inst) {
        let (c, gap, est) = triplets[triplets.len() / 2];
        eprintln!("halfway: consensus {c:.2e}, optimality gap {gap:.2e}, tracker error {:.2e}", est.unwrap_or(f64::NAN));
    }
    print!("{}", rec.to_csv());
    Ok(())
}
