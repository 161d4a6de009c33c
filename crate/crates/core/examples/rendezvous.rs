//! Five agents agree on the point closest to all of their private positions.

use ppsd::analysis::fit_linear_rate;
use ppsd::engine::{run, Algorithm};
use ppsd::experiments::{default_config, g1_graph, rendezvous_5};

fn main() -> ppsd::Result<()> {
    let g = g1_graph();
    let inst = rendezvous_5(7)?;
    let cfg = default_config(&inst, Algorithm::Ppsd, 7);
    let rec = run(&g, &inst, &cfg)?;

    // The local gradient at the origin is minus the private position.
    let positions: Vec<f64> = inst.objectives.iter().map(|f| -f.gradient(&[0.0])[0]).collect();
    println!("private positions: {positions:.3?}");
    println!("optimum:           {:.6}", inst.x_star[0]);
    for (i, a) in rec.final_state.agents.iter().enumerate() {
        println!("agent {} ends at    {:.6}", i + 1, a.x[0]);
    }
    let fit = fit_linear_rate(&rec.residuals())?;
    println!(
        "{:?} after {} iterations; residual {:.2e}, rate {:.4} (fit residual {:.1e})",
        rec.stop,
        rec.iterations(),
        rec.final_residual(),
        fit.lambda,
        fit.fit_residual
    );
    Ok(())
}
