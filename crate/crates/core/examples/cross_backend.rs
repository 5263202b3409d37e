//! The same protocol evolved as truncated Fock vectors under the effective Hamiltonians,
//! checked stage by stage against the exact coherent-state pipeline.

use ctecs::protocol::{self, Backend, ProtocolConfig};
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    for alpha in [0.5, 1.0, 2.0] {
        let n = ctecs::fock::truncation_rule(alpha);
        let config = ProtocolConfig::new(Complex64::new(alpha, 0.0)).with_backend(Backend::Fock);
        let record = protocol::run(&config)?;
        println!("alpha = {alpha}, n_trunc = {n}");
        for cp in &record.checkpoints {
            println!(
                "  {:<24} |1 - F| = {:.2e}",
                cp.name,
                (1.0 - cp.backend_agreement.unwrap_or(f64::NAN)).abs()
            );
        }
    }
    // alpha = 3 needs 37 levels per mode, which exceeds the default amplitude budget
    let err =
        protocol::run(&ProtocolConfig::new(Complex64::new(3.0, 0.0)).with_backend(Backend::Fock))
            .unwrap_err();
    println!("alpha = 3: {err} (exit code {})", err.exit_code());
    Ok(())
}
