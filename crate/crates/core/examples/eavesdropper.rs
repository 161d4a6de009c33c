//! An outside listener that hears every channel except the one between
//! agents 1 and 2 sees identical traffic for the true and shifted gradients.

use ppsd::engine::{run, Algorithm};
use ppsd::experiments::{default_config, g1_graph, rendezvous_5};
use ppsd::privacy::{eavesdropper_view, privacy_sweep, Observer, DEFAULT_TOLERANCE};

fn main() -> ppsd::Result<()> {
    let g = g1_graph();
    let inst = rendezvous_5(11)?;
    let kappa = 300;
    let mut cfg = default_config(&inst, Algorithm::Ppsd, 3);
    cfg.epsilon = 0.0;
    cfg.k_max = kappa + 1;
    let rec = run(&g, &inst, &cfg)?;

    let log = eavesdropper_view(&g, &rec, Some((1, 2)), kappa)?;
    println!("listener records {} values per iteration", log.sets[1].entries.values().map(Vec::len).sum::<usize>());

    let sweep = privacy_sweep(&g, &inst, &rec, &Observer::Eavesdropper, 1, 2, &[1.0, 1e3, 1e6], kappa, DEFAULT_TOLERANCE, 4)?;
    for r in &sweep.reports {
        println!("delta {:>10.3e}: max deviation {:.2e}  {:?}", r.delta[0], r.max_deviation, r.verdict);
    }
    println!("{}/{} pass", sweep.passes, sweep.total);
    Ok(())
}
