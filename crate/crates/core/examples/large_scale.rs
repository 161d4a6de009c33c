//! A hundred agents on a sparse random digraph, with recording switched off.
//!
//! ```text
//! cargo run --release --example large_scale -- 100 0.05
//! ```

use std::time::Instant;

use ppsd::analysis::fit_linear_rate;
use ppsd::engine::{run, Algorithm, RecordOptions};
use ppsd::experiments::{default_config, large_scale};

fn main() -> ppsd::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(100, |s| s.parse().expect("agent count"));
    let p: f64 = args.next().map_or(0.05, |s| s.parse().expect("edge probability"));

    let (g, inst) = large_scale(n, p, 1, 1)?;
    println!("{} agents, {} edges, max degree {}", g.n(), g.edge_count(), g.max_degree());

    let mut cfg = default_config(&inst, Algorithm::Ppsd, 1);
    cfg.k_max = 200_000;
    cfg.record = RecordOptions { states: false, weights: false };
    let t = Instant::now();
    let rec = run(&g, &inst, &cfg)?;
    let fit = fit_linear_rate(&rec.residuals())?;
    println!(
        "{:?} after {} iterations in {:.2?}: residual {:.3e}, lambda {:.6}",
        rec.stop,
        rec.iterations(),
        t.elapsed(),
        rec.final_residual(),
        fit.lambda
    );
    Ok(())
}
