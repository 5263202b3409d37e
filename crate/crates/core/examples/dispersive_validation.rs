//! How well the dispersive Hamiltonian reproduces the full detuned Jaynes-Cummings
//! evolution over one pass, as the detuning grows.

use ctecs::fock::truncation_rule;
use ctecs::hamiltonians::validate_dispersive_approx;

fn main() -> ctecs::Result<()> {
    for alpha in [0.5, 1.0] {
        println!("alpha = {alpha}");
        for ratio in [4.0, 8.0, 16.0, 32.0] {
            let v = validate_dispersive_approx(1.0, ratio, alpha, truncation_rule(alpha))?;
            println!(
                "  Delta/g = {ratio:>4}: fidelity {:.9}, lambda t = {:.4}",
                v.fidelity,
                v.lam * v.time
            );
        }
    }
    Ok(())
}
