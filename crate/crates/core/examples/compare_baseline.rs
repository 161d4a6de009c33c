//! The split-tracker method against plain push-pull on the same instance:
//! both land on the same optimum.

use ppsd::engine::{run, Algorithm, RecordOptions};
use ppsd::experiments::{default_config, g1_graph, regression_5};

fn main() -> ppsd::Result<()> {
    let g = g1_graph();
    let inst = regression_5(1)?;
    let mut results = Vec::new();
    for alg in [Algorithm::Ppsd, Algorithm::Pushpull] {
        let mut cfg = default_config(&inst, alg, 1);
        cfg.record = RecordOptions { states: false, weights: false };
        let rec = run(&g, &inst, &cfg)?;
        println!("{alg:?}: {:?} after {} iterations, residual {:.2e}", rec.stop, rec.iterations(), rec.final_residual());
        results.push(rec);
    }
    let gap = results[0]
        .final_state
        .agents
        .iter()
        .zip(&results[1].final_state.agents)
        .flat_map(|(a, b)| a.x.iter().zip(&b.x).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    println!("largest coordinate gap between the two limits: {gap:.2e}");
    Ok(())
}
