//! The sixteen cluster-type coherent-state basis elements: Gram matrix against alpha,
//! and the parity flips that map one element onto another.

use ctecs::states::{self, bitflip_route, CtecsLabel};
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    let labels = CtecsLabel::all();
    for alpha in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let a = Complex64::new(alpha, 0.0);
        let elems = labels
            .iter()
            .map(|&l| states::ctecs_basis_element(l, a))
            .collect::<ctecs::Result<Vec<_>>>()?;
        let mut worst = 0.0f64;
        for (i, x) in elems.iter().enumerate() {
            for y in &elems[i + 1..] {
                worst = worst.max(x.overlap(y)?.norm());
            }
        }
        println!("alpha = {alpha:<5} max |<B_i|B_j>| = {worst:.3e}");
    }

    println!("\nparity-flip routes from CLUSTER+ (0-based modes):");
    for &to in &labels[1..] {
        println!(
            "  {:<9} via {:?}",
            to.to_string(),
            bitflip_route(CtecsLabel::CLUSTER_PLUS, to)?
        );
    }
    Ok(())
}
