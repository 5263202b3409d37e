//! |<alpha|-alpha>| = exp(-2|alpha|^2): exact from the coherent algebra, and from
//! truncated Fock vectors sized by the truncation rule.

use ctecs::coherent::coherent_overlap;
use ctecs::fock;
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    println!(
        "{:>6} {:>6} {:>24} {:>24} {:>10}",
        "alpha", "n", "exact", "fock", "abs err"
    );
    for k in 1..=12 {
        let alpha = 0.25 * k as f64;
        let a = Complex64::new(alpha, 0.0);
        let exact = coherent_overlap(a, -a).norm();
        let n = fock::truncation_rule(alpha);
        let truncated = fock::coherent_fock(a, n)?
            .inner(&fock::coherent_fock(-a, n)?)?
            .norm();
        println!(
            "{alpha:>6} {n:>6} {exact:>24.16e} {truncated:>24.16e} {:>10.1e}",
            (exact - truncated).abs()
        );
    }
    Ok(())
}
