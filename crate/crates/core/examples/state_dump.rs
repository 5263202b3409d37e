//! Lossless JSON dumps of coherent superpositions, as read by `ctecs measure`.

use ctecs::coherent::CoherentSuperposition;
use ctecs::states::{ctecs_basis_element, CtecsLabel};
use num_complex::Complex64;

fn main() -> ctecs::Result<()> {
    let state = ctecs_basis_element("L+".parse::<CtecsLabel>()?, Complex64::new(0.3, 1.1))?;
    let text = state.to_json()?;
    println!("{text}");
    let back = CoherentSuperposition::from_json(&text)?;
    println!("round trip |<psi|psi'>| = {}", back.overlap(&state)?.norm());
    Ok(())
}
