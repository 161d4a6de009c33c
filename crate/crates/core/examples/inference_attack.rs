//! When every neighbor of agent 1 is corrupted, summing what flows in and out
//! of it recovers its gradient at the optimum. With even one honest neighbor
//! the attack has nothing to work with.

use std::collections::BTreeSet;

use ppsd::engine::{run, Algorithm};
use ppsd::experiments::{default_config, g1_graph, regression_5};
use ppsd::privacy::{attack_report, inference_attack, record_view};

fn main() -> ppsd::Result<()> {
    let g = g1_graph();
    let inst = regression_5(11)?;
    let rec = run(&g, &inst, &default_config(&inst, Algorithm::Ppsd, 3))?;

    let rep = attack_report(&g, &inst, &rec, 1)?;
    println!("neighbors {:?} corrupted", g.neighbors(1)?);
    println!("recovered {:.6?}", &rep.estimate[..3]);
    println!("truth     {:.6?}", &rep.truth[..3]);
    println!("error {:.2e} at run residual {:.2e} (bound {:.2e})", rep.error, rep.residual, rep.error_bound);

    let partial = BTreeSet::from([4, 5]);
    let log = record_view(&g, &rec, &partial, rec.iterations() - 1)?;
    match inference_attack(&g, &log, 1) {
        Ok(_) => println!("unexpected: attack succeeded with {partial:?}"),
        Err(e) => println!("with only {partial:?}: {e}"),
    }
    Ok(())
}
