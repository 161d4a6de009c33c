//! Builds a random strongly connected digraph, draws both weight regimes and
//! checks the column-stochastic structure of the augmented mixing matrix.

use ppsd::schedule::{assemble_augmented, default_eta, init_weights_k0, validate, weights_k};
use ppsd::Digraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ppsd::Result<()> {
    let g = Digraph::random_strongly_connected(8, 0.3, 5)?;
    print!("{}", g.to_edge_list_text());
    for i in 1..=g.n() {
        println!("agent {i}: in {:?} out {:?}", g.in_neighbors(i)?, g.out_neighbors(i)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eta = default_eta(&g);
    let w0 = init_weights_k0(&g, 2, 10.0, &mut rng)?;
    let w1 = weights_k(&g, 2, 1, eta, 0.05, &mut rng)?;
    for (label, w) in [("k=0", &w0), ("k=1", &w1)] {
        let problems = validate(w);
        let worst = assemble_augmented(w)?
            .iter()
            .flat_map(|m| m.column_iter().map(|c| (c.sum() - 1.0).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        println!("{label}: {} problems, column sums within {worst:.1e}", problems.len());
    }
    println!("eta = {eta:.4}");
    Ok(())
}
