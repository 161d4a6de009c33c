//! Bound constants for small networks, and a certified step size on a
//! synthetic model small enough to be tractable.

use ppsd::analysis::{step_size_advisor, theoretical_constants, UModel, DEFAULT_CAP};
use ppsd::Error;

fn main() -> ppsd::Result<()> {
    for (n, eta) in [(2, 0.25), (3, 0.2), (5, 0.1)] {
        let c = theoretical_constants(n, eta, 1.0, 1.0, DEFAULT_CAP)?;
        println!(
            "n={n} eta={eta}: N_R {:?} (estimate {:.3e}), N_P {:?} (estimate {:.3e})",
            c.n_r, c.n_r_estimate, c.n_p, c.n_p_estimate
        );
        if let Err(Error::Intractable(why)) = UModel::from_constants(&c) {
            println!("  no certificate: {why}");
        }
    }

    let model = UModel { n: 2, eta: 0.5, l: 1.0, q1: 1.0, q2: 1.0, q3: 1.0, r_r: 0.5, r_p: 0.5, n_bar: 2 };
    for gamma in [0.0, 1e-4, 1e-2, 1e-1] {
        println!("rho(U({gamma:e})) = {:.9}", model.spectral_radius(gamma)?);
    }
    println!("slope at zero: {:.6}", model.unit_eigenvalue_slope());
    let advice = step_size_advisor(&model, 1e-8, 1.0)?;
    println!("largest certified step {:?} with rho {:?}", advice.gamma, advice.rho);
    Ok(())
}
