//! Lossless JSON serialization of coherent superpositions.
//!
//! Complex numbers are written as `[re, im]` and floats round-trip bit-exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AtomPair, Branch, CoherentSuperposition};
use crate::error::{Error, Result};

pub const DUMP_FORMAT: &str = "ctecs-state/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDump {
    pub coeff: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomPair>,
    pub modes: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub format: String,
    pub mode_count: usize,
    pub atoms_present: bool,
    pub branches: Vec<BranchDump>,
}

impl StateDump {
    pub fn from_state(state: &CoherentSuperposition) -> Self {
        Self {
            format: DUMP_FORMAT.to_string(),
            mode_count: state.mode_count(),
            atoms_present: state.atoms_present(),
            branches: state
                .branches()
                .iter()
                .map(|b| BranchDump {
                    coeff: b.coeff,
                    atoms: b.atoms,
                    modes: b.modes.clone(),
                })
                .collect(),
        }
    }

    pub fn into_state(self) -> Result<CoherentSuperposition> {
        if self.format != DUMP_FORMAT {
            return Err(Error::Dump(format!(
                "unsupported format {:?}, expected {DUMP_FORMAT:?}",
                self.format
            )));
        }
        let branches = self
            .branches
            .into_iter()
            .map(|b| Branch::new(b.coeff, b.atoms, b.modes))
            .collect();
        CoherentSuperposition::new(self.mode_count, self.atoms_present, branches)
            .map_err(|e| Error::Dump(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Dump(e.to_string()))
    }
}

impl CoherentSuperposition {
    pub fn to_json(&self) -> Result<String> {
        StateDump::from_state(self).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        StateDump::from_json(text)?.into_state()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use proptest::prelude::*;

    #[test]
    fn rejects_foreign_format() {
        let text = r#"{"format":"other/2","mode_count":1,"atoms_present":false,"branches":[]}"#;
        assert!(matches!(
            CoherentSuperposition::from_json(text),
            Err(Error::Dump(_))
        ));
    }

    #[test]
    fn atoms_label_is_a_string() {
        let s = CoherentSuperposition::with_atoms(AtomPair::EG, &[ONE]).unwrap();
        let text = s.to_json().unwrap();
        assert!(text.contains("\"eg\""));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            terms in proptest::collection::vec((any::<f64>(), any::<f64>(), -5.0f64..5.0, -5.0f64..5.0), 1..6),
            atoms in 0usize..4,
        ) {
            let terms: Vec<_> = terms
                .into_iter()
                .filter(|t| t.0.is_finite() && t.1.is_finite() && t.0.abs() < 1e300 && t.1.abs() < 1e300)
                .collect();
            prop_assume!(!terms.is_empty());
            let branches = terms
                .iter()
                .enumerate()
                .map(|(k, &(re, im, a, b))| {
                    Branch::new(
                        Complex64::new(re, im),
                        Some(AtomPair::from_index((atoms + k) % 4)),
                        vec![Complex64::new(a, b), Complex64::new(b, a + k as f64)],
                    )
                })
                .collect();
            let s = CoherentSuperposition::new(2, true, branches).unwrap();
            let back = CoherentSuperposition::from_json(&s.to_json().unwrap()).unwrap();
            prop_assert_eq!(s.branches().len(), back.branches().len());
            for (x, y) in s.branches().iter().zip(back.branches()) {
                prop_assert_eq!(x.coeff.re.to_bits(), y.coeff.re.to_bits());
                prop_assert_eq!(x.coeff.im.to_bits(), y.coeff.im.to_bits());
                prop_assert_eq!(x.atoms, y.atoms);
                for (m, n) in x.modes.iter().zip(&y.modes) {
                    prop_assert_eq!(m.re.to_bits(), n.re.to_bits());
                    prop_assert_eq!(m.im.to_bits(), n.im.to_bits());
                }
            }
        }
    }
}
