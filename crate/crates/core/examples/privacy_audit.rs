//! Agents 4 and 5 collude against agent 1. A shadow execution with agent 1's
//! gradient shifted by `δ` (and agent 2's by `-δ`) produces exactly the same
//! view for the coalition, for any size of `δ`.

use std::collections::BTreeSet;

use ppsd::engine::{run, Algorithm};
use ppsd::experiments::{default_config, g1_graph, rendezvous_5};
use ppsd::privacy::{privacy_sweep, verify_indistinguishable, split_delta, Observer, ShadowSpec, DEFAULT_TOLERANCE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ppsd::Result<()> {
    let g = g1_graph();
    let inst = rendezvous_5(11)?;
    let kappa = 500;
    let mut cfg = default_config(&inst, Algorithm::Ppsd, 3);
    cfg.epsilon = 0.0;
    cfg.k_max = kappa + 1;
    let rec = run(&g, &inst, &cfg)?;
    let coalition = Observer::Coalition(BTreeSet::from([4, 5]));

    // Agent 2 receives from agent 1, agent 3 sends to it.
    for m in [2, 3] {
        let sweep = privacy_sweep(&g, &inst, &rec, &coalition, 1, m, &[1.0, 1e2, 1e4, 1e6], kappa, DEFAULT_TOLERANCE, 9)?;
        for r in &sweep.reports {
            println!(
                "accomplice {m} ({:?}): delta {:>12.4e}  max deviation {:.2e}  {:?}",
                r.case, r.delta[0], r.max_deviation, r.verdict
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let delta = vec![1234.5];
    let da = split_delta(&rec, 1, 2, &delta, &mut rng)?;
    let mut broken = ShadowSpec::new(&g, 1, 2, delta, da)?;
    broken.omit_correction = true;
    let r = verify_indistinguishable(&g, &inst, &rec, &coalition, &broken, kappa, DEFAULT_TOLERANCE)?;
    println!("shadow without the link correction: max deviation {:.2e}  {:?}", r.max_deviation, r.verdict);
    Ok(())
}
