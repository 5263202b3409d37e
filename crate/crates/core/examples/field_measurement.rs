//! Two-outcome field measurement {|alpha><alpha|, 1 - |alpha><alpha|} on one mode of a
//! quasi-Bell state, directly and via displace, leak and photon check.

use ctecs::measurement::{
    displace_and_leak, measure_mode, BranchChoice, CoherentPovm, PhotonCount, PovmBranch,
};
use ctecs::states::{quasi_bell, QuasiBellLabel};
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    let alpha = Complex64::new(1.0, 0.0);
    let state = quasi_bell(QuasiBellLabel::Phi(true), alpha)?;
    let povm = CoherentPovm::new(alpha);

    let direct = measure_mode(&state, 0, &povm, BranchChoice::Forced(PovmBranch::P))?;
    let leak = displace_and_leak(&state, 0, alpha, BranchChoice::Forced(PhotonCount::Zero))?;
    println!(
        "P(alpha) direct {:.15}, via leak {:.15}",
        direct.p_probability, leak.zero_probability
    );
    println!(
        "collapsed states agree: fidelity {:.15}",
        direct.state.fidelity(&leak.state)?
    );

    let again = measure_mode(&direct.state, 0, &povm, BranchChoice::Forced(PovmBranch::P))?;
    println!(
        "repeat measurement gives P with probability {:.15}",
        again.probability
    );

    for seed in 0..5 {
        let m = measure_mode(&state, 1, &povm, BranchChoice::Sampled { seed })?;
        println!(
            "seed {seed}: branch {:?} (probability {:.4})",
            m.branch, m.probability
        );
    }
    println!(
        "completeness |P + Q - 1| = {:.1e}",
        povm.completeness_deviation(ctecs::fock::truncation_rule(1.0))?
    );
    Ok(())
}
