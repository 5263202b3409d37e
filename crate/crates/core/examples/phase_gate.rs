//! Cavity-assisted phase gate: the effective propagator at t = pi/chi against the truth
//! table, and a time-ordered integration of the driven Tavis-Cummings Hamiltonian.

use ctecs::coherent::CPG_TRUTH_TABLE;
use ctecs::hamiltonians::{self, CpgParams};
use ctecs::linalg::CMatrix;
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    let truth = CMatrix::from_fn(4, 4, |r, c| Complex64::new(CPG_TRUTH_TABLE[r][c], 0.0));
    for k in 1..=3 {
        let p = CpgParams::self_consistent(1.0, k)?;
        let u = hamiltonians::cpg_propagator(&p)?;
        println!(
            "k = {k}: chi = {}, Omega = {}, t_f = {:.4}, deviation from table {:.1e}",
            p.chi,
            p.omega_drive,
            p.gate_time(),
            hamiltonians::deviation_up_to_phase(u.entries(), &truth)
        );
    }

    let p = CpgParams::self_consistent(1.0, 1)?;
    let u = hamiltonians::cpg_propagator(&p)?;
    println!("\npropagator (basis gg, ge, eg, ee):");
    for r in 0..4 {
        let row: Vec<String> = (0..4)
            .map(|c| {
                format!(
                    "{:+.3}{:+.3}i",
                    u.entries()[(r, c)].re,
                    u.entries()[(r, c)].im
                )
            })
            .collect();
        println!("  {}", row.join("  "));
    }

    let fidelity = hamiltonians::validate_driven_gate(&p, 12, 4000)?;
    println!("\ndriven Tavis-Cummings (RK4, 12 cavity levels): worst atom fidelity {fidelity:.12}");
    for w in p.warnings() {
        println!("warning: {w}");
    }
    Ok(())
}
