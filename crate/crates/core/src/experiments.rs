//! Ready-made networks and problem instances used by the examples, the CLI
//! defaults and the test suites.

use crate::engine::{default_gamma, Algorithm, RunConfig};
use crate::error::Result;
use crate::objective::{ProblemInstance, ProblemSpec};
use crate::topology::Digraph;

/// Five-agent unbalanced digraph. Agent 1 sends to {2, 4, 5} and hears from
/// {3, 5}; agents 4 and 5 are the usual corrupted pair.
pub fn g1_graph() -> Digraph {
    // (receiver, sender)
    Digraph::from_edge_list(
        5,
        &[(2, 1), (4, 1), (5, 1), (3, 2), (1, 3), (4, 3), (5, 4), (1, 5), (2, 4), (3, 5)],
    )
    .expect("static edge list is valid")
}

/// Rendezvous on five scalar positions drawn uniformly from `[-10, 10]`.
pub fn rendezvous_5(seed: u64) -> Result<ProblemInstance> {
    ProblemSpec::RandomRendezvous { n: 5, d: 1, scale: 10.0, seed: Some(seed) }.build()
}

/// Five agents, `d = 10`, ten noisy measurements each.
pub fn regression_5(seed: u64) -> Result<ProblemInstance> {
    ProblemSpec::RandomLinearRegression { n: 5, d: 10, rows: 10, noise_std: 0.2, seed: Some(seed) }.build()
}

/// Default run settings: step `1/(2nL)`, tolerance `1e-8`, 5000 iterations.
pub fn default_config(instance: &ProblemInstance, algorithm: Algorithm, seed: u64) -> RunConfig {
    RunConfig::new(algorithm, default_gamma(instance), seed)
}

/// Random strongly connected digraph on `n` agents with edge probability
/// `p`, together with a rendezvous instance in `d` dimensions.
pub fn large_scale(n: usize, p: f64, d: usize, seed: u64) -> Result<(Digraph, ProblemInstance)> {
    let g = Digraph::random_strongly_connected(n, p, seed)?;
    let inst = ProblemSpec::RandomRendezvous { n, d, scale: 10.0, seed: Some(seed) }.build()?;
    Ok((g, inst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g1_neighborhoods() {
        let g = g1_graph();
        assert!(g.is_strongly_connected());
        assert_eq!(g.out_neighbors(1).unwrap(), &[2, 4, 5]);
        assert_eq!(g.in_neighbors(1).unwrap(), &[3, 5]);
    }
}
