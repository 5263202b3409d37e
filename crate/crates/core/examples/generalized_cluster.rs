//! p cavities per atom: the 2p-mode states heralded by each outcome, with the
//! closed-form norm of the gg state.

use ctecs::coherent::AtomPair;
use ctecs::protocol::{self, ProtocolConfig};
use ctecs::states::{generalized_cluster, generalized_cluster_raw, generalized_norm_closed_form};
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    let alpha = Complex64::new(0.6, 0.0);
    for p in 1..=4 {
        let raw = generalized_cluster_raw(p, alpha, AtomPair::GG)?;
        let record = protocol::run(&ProtocolConfig::new(alpha).with_p(p))?;
        let target = generalized_cluster(p, alpha, AtomPair::GG)?;
        println!(
            "p = {p}: {} modes, {} branches, norm^2 {:.12} (closed form {:.12}), protocol fidelity {:.15}",
            2 * p,
            raw.branches().len(),
            raw.norm_sqr(),
            generalized_norm_closed_form(p, alpha),
            record.final_exact.fidelity(&target)?
        );
    }
    Ok(())
}
