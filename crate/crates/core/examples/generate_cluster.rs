//! Run the generation protocol for every atomic outcome and show which cluster-type
//! state each one heralds.

use ctecs::coherent::AtomPair;
use ctecs::protocol::{self, AtomMeasurement, ProtocolConfig};
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    let alpha = Complex64::new(1.0, 0.0);
    for outcome in AtomPair::ALL {
        let config = ProtocolConfig::new(alpha).with_measurement(AtomMeasurement::Forced(outcome));
        let record = protocol::run(&config)?;
        let label = record.classification.as_ref().expect("four modes");
        println!(
            "outcome {outcome}  p = {:.3}  -> {} (fidelity {:.15})",
            record.outcome_probability, label.label, label.fidelity
        );
    }

    let record = protocol::run(&ProtocolConfig::new(alpha))?;
    println!("\ncheckpoints of the gg run:");
    for cp in &record.checkpoints {
        println!(
            "  {:<24} {:>3} branches, target fidelity {:.15}",
            cp.name,
            cp.state.branches.len(),
            cp.target_fidelity
        );
    }
    for t in &record.timings {
        println!(
            "  stage {:<12} {:<20} {:.4} (units of 1/g)",
            t.stage, t.symbolic, t.seconds
        );
    }
    Ok(())
}
