//! Timing budget of the protocol for g = g' = 2 pi x 25 kHz against cavity and atom
//! lifetimes, under both readings of the dispersive detuning.

use ctecs::diagnostics::{self, DetuningMode, FeasibilityInput};

fn main() -> ctecs::Result<()> {
    let cmp = diagnostics::published_comparison()?;
    let p = cmp.published;
    println!(
        "published: T = {} ms, T_r/T = {}, T_at/T = {}",
        p.total_time * 1e3,
        p.ratio_r,
        p.ratio_at
    );
    for r in &cmp.readings {
        let rep = &r.report;
        println!(
            "{:<15} lambda = {:.1} rad/s, chi = {:.1} rad/s, T = {:.4} ms, T_r/T = {:.1}, T_at/T = {:.1}",
            r.name,
            rep.lam,
            rep.chi,
            rep.total_time * 1e3,
            rep.ratio_r,
            rep.ratio_at
        );
    }
    println!("{}", cmp.note);

    // a fixed gate detuning instead of the self-consistent one
    let g = 2.0 * std::f64::consts::PI * 25e3;
    let fixed = diagnostics::feasibility(&FeasibilityInput {
        g,
        g_prime: g,
        delta_big: 8.0 * g,
        detuning: DetuningMode::Fixed(4.0 * g),
        k: 1,
        passes_per_atom: 2,
        t_r: 0.13,
        t_at: 0.03,
    })?;
    println!(
        "\ndelta = 4 g': chi = {:.1} rad/s, T = {:.4} ms",
        fixed.chi,
        fixed.total_time * 1e3
    );
    for w in &fixed.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
