//! Named state families: the four-qubit cluster basis, quasi-Bell states, the
//! cluster-type coherent-state basis and its 2p-mode generalization.
//!
//! Qubit encoding on modes: 0 ↦ |α⟩, 1 ↦ |−α⟩.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::coherent::{AtomPair, CoherentSuperposition, CPG_TRUTH_TABLE};
use crate::error::{Error, Result};
use crate::fock::{Factor, FockVector, SpaceLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Cluster,
    C,
    L,
    U,
    S,
    T,
    E,
    R,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Cluster,
        Family::C,
        Family::L,
        Family::U,
        Family::S,
        Family::T,
        Family::E,
        Family::R,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cluster => "CLUSTER",
            Family::C => "C",
            Family::L => "L",
            Family::U => "U",
            Family::S => "S",
            Family::T => "T",
            Family::E => "E",
            Family::R => "R",
        }
    }
}

/// Sign factor of a basis term: fixed ±1, optionally multiplied by the label's sign.
#[derive(Clone, Copy)]
struct Term {
    bits: u8,
    fixed: i8,
    follows_label: bool,
}

const fn t(bits: u8, fixed: i8, follows_label: bool) -> Term {
    Term {
        bits,
        fixed,
        follows_label,
    }
}

fn terms(family: Family) -> [Term; 4] {
    match family {
        Family::Cluster => [
            t(0b0000, 1, true),
            t(0b0011, 1, false),
            t(0b1100, 1, false),
            t(0b1111, -1, true),
        ],
        Family::C => [
            t(0b0000, 1, false),
            t(0b0011, 1, true),
            t(0b1100, -1, true),
            t(0b1111, 1, false),
        ],
        Family::L => [
            t(0b0001, 1, true),
            t(0b0010, -1, true),
            t(0b1101, 1, false),
            t(0b1110, 1, false),
        ],
        Family::U => [
            t(0b0001, 1, false),
            t(0b0010, 1, false),
            t(0b1101, 1, true),
            t(0b1110, -1, true),
        ],
        Family::S => [
            t(0b0100, 1, true),
            t(0b0111, 1, false),
            t(0b1000, -1, true),
            t(0b1011, 1, false),
        ],
        Family::T => [
            t(0b0100, 1, false),
            t(0b0111, 1, true),
            t(0b1000, 1, false),
            t(0b1011, -1, true),
        ],
        Family::E => [
            t(0b0101, 1, true),
            t(0b0110, 1, false),
            t(0b1001, 1, false),
            t(0b1010, -1, true),
        ],
        Family::R => [
            t(0b0101, 1, false),
            t(0b0110, 1, true),
            t(0b1001, -1, true),
            t(0b1010, 1, false),
        ],
    }
}

/// One of the 16 cluster-basis labels, e.g. CLUSTER+ or R−.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CtecsLabel {
    pub family: Family,
    pub plus: bool,
}

impl CtecsLabel {
    pub const fn new(family: Family, plus: bool) -> Self {
        Self { family, plus }
    }

    pub const CLUSTER_PLUS: CtecsLabel = CtecsLabel::new(Family::Cluster, true);
    pub const CLUSTER_MINUS: CtecsLabel = CtecsLabel::new(Family::Cluster, false);
    pub const C_PLUS: CtecsLabel = CtecsLabel::new(Family::C, true);
    pub const C_MINUS: CtecsLabel = CtecsLabel::new(Family::C, false);

    /// All 16 labels: CLUSTER+, CLUSTER−, C+, C−, …, R+, R−.
    pub fn all() -> Vec<CtecsLabel> {
        Family::ALL
            .iter()
            .flat_map(|&f| [CtecsLabel::new(f, true), CtecsLabel::new(f, false)])
            .collect()
    }

    /// (4-bit pattern, ±1/2 coefficient) for the four terms; bit 3 is qubit 1.
    pub fn expansion(self) -> [(u8, f64); 4] {
        let s = if self.plus { 1.0 } else { -1.0 };
        terms(self.family).map(|t| {
            let c = 0.5 * t.fixed as f64 * if t.follows_label { s } else { 1.0 };
            (t.bits, c)
        })
    }
}

impl fmt::Display for CtecsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            self.family.name(),
            if self.plus { '+' } else { '-' }
        )
    }
}

fn split_sign(s: &str) -> Result<(String, bool)> {
    let u = s.trim().to_ascii_uppercase();
    let plus = match u.chars().last() {
        Some('+') => true,
        Some('-') | Some('−') => false,
        _ => return Err(Error::UnknownLabel(s.to_string())),
    };
    let mut head = u;
    head.pop();
    Ok((head, plus))
}

impl FromStr for CtecsLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, plus) = split_sign(s)?;
        Family::ALL
            .iter()
            .find(|f| f.name() == head)
            .map(|&f| CtecsLabel::new(f, plus))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl Serialize for CtecsLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuasiBellLabel {
    Phi(bool),
    Psi(bool),
}

impl QuasiBellLabel {
    pub const ALL: [QuasiBellLabel; 4] = [
        QuasiBellLabel::Phi(true),
        QuasiBellLabel::Phi(false),
        QuasiBellLabel::Psi(true),
        QuasiBellLabel::Psi(false),
    ];
}

impl fmt::Display for QuasiBellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, plus) = match self {
            QuasiBellLabel::Phi(p) => ("PHI", p),
            QuasiBellLabel::Psi(p) => ("PSI", p),
        };
        write!(f, "{name}{}", if *plus { '+' } else { '-' })
    }
}

impl FromStr for QuasiBellLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, plus) = split_sign(s)?;
        match head.as_str() {
            "PHI" => Ok(QuasiBellLabel::Phi(plus)),
            "PSI" => Ok(QuasiBellLabel::Psi(plus)),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

impl Serialize for QuasiBellLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Exact four-qubit basis vector.
pub fn qubit_basis_element(l: CtecsLabel) -> FockVector {
    let layout = SpaceLayout::new(vec![Factor::Qubit; 4]);
    let mut amps = vec![real(0.0); 16];
    for (bits, c) in l.expansion() {
        amps[bits as usize] = real(c);
    }
    FockVector::new(layout, amps).expect("16 amplitudes for four qubits")
}

fn encode(bits: u8, width: usize, alpha: Complex64) -> Vec<Complex64> {
    (0..width)
        .map(|k| {
            if bits >> (width - 1 - k) & 1 == 0 {
                alpha
            } else {
                -alpha
            }
        })
        .collect()
}

/// |α,α⟩ ± |−α,−α⟩ or |α,−α⟩ ± |−α,α⟩, unnormalized.
pub fn quasi_bell_raw(l: QuasiBellLabel, alpha: Complex64) -> Result<CoherentSuperposition> {
    let (first, second, plus) = match l {
        QuasiBellLabel::Phi(p) => (0b00, 0b11, p),
        QuasiBellLabel::Psi(p) => (0b01, 0b10, p),
    };
    let s = if plus { 1.0 } else { -1.0 };
    CoherentSuperposition::from_terms(
        2,
        vec![
            (real(1.0), encode(first, 2, alpha)),
            (real(s), encode(second, 2, alpha)),
        ],
    )
}

/// Normalized N±(|α,α⟩ ± |−α,−α⟩) or N±(|α,−α⟩ ± |−α,α⟩).
pub fn quasi_bell(l: QuasiBellLabel, alpha: Complex64) -> Result<CoherentSuperposition> {
    quasi_bell_raw(l, alpha)?.normalize()
}

/// N± = [2(1 ± e^{−4|α|²})]^{−1/2}.
pub fn quasi_bell_constant(plus: bool, alpha: Complex64) -> f64 {
    let x = (-4.0 * alpha.norm_sqr()).exp();
    let s = if plus { 1.0 } else { -1.0 };
    1.0 / (2.0 * (1.0 + s * x)).sqrt()
}

/// Four-branch element with its nominal ½ coefficients, before normalization.
pub fn ctecs_basis_element_raw(l: CtecsLabel, alpha: Complex64) -> Result<CoherentSuperposition> {
    CoherentSuperposition::from_terms(
        4,
        l.expansion()
            .iter()
            .map(|&(bits, c)| (real(c), encode(bits, 4, alpha))),
    )
}

/// Cluster-type coherent-state basis element, normalized via its Gram matrix.
pub fn ctecs_basis_element(l: CtecsLabel, alpha: Complex64) -> Result<CoherentSuperposition> {
    ctecs_basis_element_raw(l, alpha)?.normalize()
}

/// Input-branch phases (gg, ge, eg, ee) after p dispersive passes per atom:
/// (1, (−i)^p, (−i)^p, (−1)^p).
fn pass_phases(p: u32) -> [Complex64; 4] {
    let mi = Complex64::new(0.0, -1.0).powu(p);
    [real(1.0), mi, mi, mi * mi]
}

/// Unnormalized field state attached to atomic outcome `outcome` after p passes per
/// atom and the phase gate: Σ_in 2T[o][in] c_in |F_in⟩ with F_gg = (β..β, β..β),
/// F_ge = (β..β, −β..−β), etc., and β = iα.
pub fn generalized_cluster_raw(
    p: u32,
    alpha: Complex64,
    outcome: AtomPair,
) -> Result<CoherentSuperposition> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    let beta = Complex64::new(0.0, 1.0) * alpha;
    let width = p as usize;
    let phases = pass_phases(p);
    let row = CPG_TRUTH_TABLE[outcome.index()];
    let terms = AtomPair::ALL.iter().map(|&input| {
        let side = |level: crate::coherent::Level| {
            let b = if level == crate::coherent::Level::G {
                beta
            } else {
                -beta
            };
            vec![b; width]
        };
        let mut modes = side(input.0);
        modes.extend(side(input.1));
        (
            real(2.0 * row[input.index()]) * phases[input.index()],
            modes,
        )
    });
    CoherentSuperposition::from_terms(2 * width, terms)
}

/// Normalized 2p-mode cluster-type state for the given atomic outcome.
pub fn generalized_cluster(
    p: u32,
    alpha: Complex64,
    outcome: AtomPair,
) -> Result<CoherentSuperposition> {
    generalized_cluster_raw(p, alpha, outcome)?.normalize()
}

/// N_p⁺ = 2{2 + [1 − (−1)^p] e^{−4p|α|²}}: squared norm of the raw gg-outcome state.
pub fn generalized_norm_closed_form(p: u32, alpha: Complex64) -> f64 {
    let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    2.0 * (2.0 + (1.0 - sign) * (-4.0 * p as f64 * alpha.norm_sqr()).exp())
}

/// Modes (0-based) whose parity flip maps `from` onto `to` up to a global phase.
pub fn bitflip_route(from: CtecsLabel, to: CtecsLabel) -> Result<Vec<usize>> {
    let src = from.expansion();
    let dst = to.expansion();
    for mask in 0u8..16 {
        let ov: f64 = src
            .iter()
            .map(|&(bits, c)| {
                let flipped = bits ^ mask;
                dst.iter()
                    .filter(|(b, _)| *b == flipped)
                    .map(|(_, d)| c * d)
                    .sum::<f64>()
            })
            .sum();
        if (ov.abs() - 1.0).abs() < 1e-12 {
            return Ok((0..4).filter(|k| mask >> (3 - k) & 1 == 1).collect());
        }
    }
    Err(Error::NoRoute {
        from: from.to_string(),
        to: to.to_string(),
    })
}
