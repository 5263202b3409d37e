//! Exact backend: finite superpositions of multimode coherent states.
//!
//! A state is a list of [`Branch`]es. Each branch carries a complex
//! coefficient, an optional two-atom label and one coherent amplitude per
//! field mode. Inner products never touch a Fock basis; they use
//!
//! ```text
//! ⟨μ|ν⟩ = exp(−|μ|²/2 − |ν|²/2 + μ*ν)
//! ```
//!
//! mode by mode, which is exact to machine precision for any amplitude.

mod dump;
mod reduce;

pub use dump::{BranchDump, StateDump, DUMP_FORMAT};
pub use reduce::{GramMatrix, ReducedState};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Factor, FockVector, SpaceLayout};
use crate::linalg::{ONE, ZERO};

/// Branches whose amplitudes agree to this modulus (and whose atom labels match) are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;
/// Branches with smaller |coeff| are dropped during canonicalization.
pub const DROP_TOLERANCE: f64 = 1e-14;
/// norm² below this is treated as the null vector.
pub const DEGENERACY_THRESHOLD: f64 = 1e-20;

/// Computational-basis matrix of the controlled phase gate, rows = output, columns = input,
/// basis order (gg, ge, eg, ee).
pub const CPG_TRUTH_TABLE: [[f64; 4]; 4] = [
    [0.5, -0.5, -0.5, -0.5],
    [-0.5, 0.5, -0.5, -0.5],
    [-0.5, -0.5, 0.5, -0.5],
    [-0.5, -0.5, -0.5, 0.5],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    G,
    E,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Level::G
        } else {
            Level::E
        }
    }
}

/// Joint label of the two atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomPair(pub Level, pub Level);

impl AtomPair {
    pub const GG: AtomPair = AtomPair(Level::G, Level::G);
    pub const GE: AtomPair = AtomPair(Level::G, Level::E);
    pub const EG: AtomPair = AtomPair(Level::E, Level::G);
    pub const EE: AtomPair = AtomPair(Level::E, Level::E);
    pub const ALL: [AtomPair; 4] = [Self::GG, Self::GE, Self::EG, Self::EE];

    pub fn index(self) -> usize {
        2 * self.0.index() + self.1.index()
    }

    pub fn from_index(i: usize) -> Self {
        AtomPair(Level::from_index(i / 2), Level::from_index(i % 2))
    }

    pub fn get(self, atom: usize) -> Level {
        if atom == 0 {
            self.0
        } else {
            self.1
        }
    }

    pub fn with(self, atom: usize, level: Level) -> Self {
        if atom == 0 {
            AtomPair(level, self.1)
        } else {
            AtomPair(self.0, level)
        }
    }
}

impl fmt::Display for AtomPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |l: Level| if l == Level::G { 'g' } else { 'e' };
        write!(f, "{}{}", c(self.0), c(self.1))
    }
}

impl FromStr for AtomPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gg" => Ok(Self::GG),
            "ge" => Ok(Self::GE),
            "eg" => Ok(Self::EG),
            "ee" => Ok(Self::EE),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

impl Serialize for AtomPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AtomPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub coeff: Complex64,
    pub atoms: Option<AtomPair>,
    pub modes: Vec<Complex64>,
}

impl Branch {
    pub fn new(coeff: Complex64, atoms: Option<AtomPair>, modes: Vec<Complex64>) -> Self {
        Self {
            coeff,
            atoms,
            modes,
        }
    }

    fn same_label(&self, other: &Branch) -> bool {
        self.atoms == other.atoms
            && self
                .modes
                .iter()
                .zip(&other.modes)
                .all(|(a, b)| (a - b).norm() < MERGE_TOLERANCE)
    }
}

/// ⟨μ|ν⟩ for single-mode coherent states.
pub fn coherent_overlap(mu: Complex64, nu: Complex64) -> Complex64 {
    (-0.5 * mu.norm_sqr() - 0.5 * nu.norm_sqr() + mu.conj() * nu).exp()
}

/// Product of single-mode overlaps, accumulated in the exponent.
fn modes_overlap(mu: &[Complex64], nu: &[Complex64]) -> Complex64 {
    let exponent: Complex64 = mu
        .iter()
        .zip(nu)
        .map(|(a, b)| -0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b)
        .sum();
    exponent.exp()
}

fn branch_overlap(a: &Branch, b: &Branch) -> Complex64 {
    if a.atoms != b.atoms {
        return ZERO;
    }
    modes_overlap(&a.modes, &b.modes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentSuperposition {
    branches: Vec<Branch>,
    mode_count: usize,
    atoms_present: bool,
}

impl CoherentSuperposition {
    pub fn new(mode_count: usize, atoms_present: bool, branches: Vec<Branch>) -> Result<Self> {
        if mode_count == 0 {
            return Err(Error::ShapeMismatch(
                "a state needs at least one mode".into(),
            ));
        }
        for b in &branches {
            if b.modes.len() != mode_count {
                return Err(Error::ShapeMismatch(format!(
                    "branch has {} modes, state declares {mode_count}",
                    b.modes.len()
                )));
            }
            if b.atoms.is_some() != atoms_present {
                return Err(Error::ShapeMismatch(
                    "branch atom label inconsistent with atoms_present".into(),
                ));
            }
        }
        Ok(Self {
            branches,
            mode_count,
            atoms_present,
        }
        .canonicalize())
    }

    /// Single multimode coherent state without atoms.
    pub fn coherent(amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(
            amplitudes.len(),
            false,
            vec![Branch::new(ONE, None, amplitudes.to_vec())],
        )
    }

    /// |atoms⟩ ⊗ |amplitudes⟩.
    pub fn with_atoms(atoms: AtomPair, amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(
            amplitudes.len(),
            true,
            vec![Branch::new(ONE, Some(atoms), amplitudes.to_vec())],
        )
    }

    /// Mode-only superposition from (coeff, amplitudes) terms.
    pub fn from_terms<I>(mode_count: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Complex64, Vec<Complex64>)>,
    {
        let branches = terms
            .into_iter()
            .map(|(c, m)| Branch::new(c, None, m))
            .collect();
        Self::new(mode_count, false, branches)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn atoms_present(&self) -> bool {
        self.atoms_present
    }

    /// Largest |μ| over all branches and modes.
    pub fn max_amplitude(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| b.modes.iter())
            .map(|m| m.norm())
            .fold(0.0, f64::max)
    }

    fn canonicalize(mut self) -> Self {
        let mut merged: Vec<Branch> = Vec::with_capacity(self.branches.len());
        for b in self.branches.drain(..) {
            match merged.iter_mut().find(|m| m.same_label(&b)) {
                Some(m) => m.coeff += b.coeff,
                None => merged.push(b),
            }
        }
        merged.retain(|b| b.coeff.norm() >= DROP_TOLERANCE);
        self.branches = merged;
        self
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.mode_count != other.mode_count || self.atoms_present != other.atoms_present {
            return Err(Error::ShapeMismatch(format!(
                "({} modes, atoms {}) vs ({} modes, atoms {})",
                self.mode_count, self.atoms_present, other.mode_count, other.atoms_present
            )));
        }
        Ok(())
    }

    /// ⟨self|other⟩ by the closed-form Gram expansion.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        self.check_shape(other)?;
        let mut acc = ZERO;
        for a in &self.branches {
            for b in &other.branches {
                acc += a.coeff.conj() * b.coeff * branch_overlap(a, b);
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for (i, a) in self.branches.iter().enumerate() {
            acc += a.coeff.norm_sqr();
            for b in &self.branches[i + 1..] {
                acc += 2.0 * (a.coeff.conj() * b.coeff * branch_overlap(a, b)).re;
            }
        }
        acc
    }

    /// |⟨a|b⟩|² / (‖a‖²‖b‖²); global phase ignored.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ov = self.overlap(other)?;
        Ok(ov.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    /// Pairwise overlaps ⟨branch_i|branch_j⟩ (coefficients excluded).
    pub fn gram(&self) -> GramMatrix {
        GramMatrix::from_fn(self.branches.len(), |i, j| {
            branch_overlap(&self.branches[i], &self.branches[j])
        })
    }

    /// Multiplicative constant that normalizes the state (1/‖ψ‖).
    pub fn normalization_constant(&self) -> Result<f64> {
        let n = self.norm_sqr();
        if n < DEGENERACY_THRESHOLD {
            return Err(Error::NearNull {
                what: format!(
                    "{}-branch superposition over {} modes",
                    self.branches.len(),
                    self.mode_count
                ),
                norm_sq: n,
            });
        }
        Ok(1.0 / n.sqrt())
    }

    pub fn normalize(&self) -> Result<Self> {
        let k = self.normalization_constant()?;
        Ok(self.scaled(Complex64::new(k, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.branches.iter_mut().for_each(|b| b.coeff *= c);
        out.canonicalize()
    }

    /// Vector sum.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.branches.extend(other.branches.iter().cloned());
        Ok(out.canonicalize())
    }

    /// Product state: the modes of `other` are appended after the modes of `self`.
    /// At most one side may carry atoms.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.atoms_present && other.atoms_present {
            return Err(Error::ShapeMismatch("both factors carry atoms".into()));
        }
        let mut branches = Vec::with_capacity(self.branches.len() * other.branches.len());
        for a in &self.branches {
            for b in &other.branches {
                let mut modes = a.modes.clone();
                modes.extend_from_slice(&b.modes);
                branches.push(Branch::new(a.coeff * b.coeff, a.atoms.or(b.atoms), modes));
            }
        }
        Self::new(
            self.mode_count + other.mode_count,
            self.atoms_present || other.atoms_present,
            branches,
        )
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count {
            return Err(Error::InvalidIndex {
                index: mode,
                len: self.mode_count,
            });
        }
        Ok(())
    }

    fn map_branches(&self, f: impl Fn(&Branch) -> Vec<Branch>) -> Self {
        let branches = self.branches.iter().flat_map(f).collect();
        Self {
            branches,
            mode_count: self.mode_count,
            atoms_present: self.atoms_present,
        }
        .canonicalize()
    }

    /// Parity P(π) = exp(iπn̂) on one mode: μ → −μ.
    pub fn apply_parity(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.map_branches(|b| {
            let mut b = b.clone();
            b.modes[mode] = -b.modes[mode];
            vec![b]
        }))
    }

    /// Dispersive interaction of one atom with one mode for phase λt:
    /// |g⟩|μ⟩ → |g⟩|μe^{iλt}⟩, |e⟩|μ⟩ → e^{−iλt}|e⟩|μe^{−iλt}⟩.
    pub fn dispersive_pass(&self, atom: usize, mode: usize, phase: f64) -> Result<Self> {
        if !self.atoms_present {
            return Err(Error::AtomsAbsent);
        }
        if atom > 1 {
            return Err(Error::InvalidIndex {
                index: atom,
                len: 2,
            });
        }
        self.check_mode(mode)?;
        let rot_g = Complex64::from_polar(1.0, phase);
        let rot_e = Complex64::from_polar(1.0, -phase);
        Ok(self.map_branches(|b| {
            let mut b = b.clone();
            // atoms_present guarantees a label
            match b.atoms.map(|p| p.get(atom)) {
                Some(Level::G) => b.modes[mode] *= rot_g,
                _ => {
                    b.modes[mode] *= rot_e;
                    b.coeff *= rot_e;
                }
            }
            vec![b]
        }))
    }

    /// Single-atom unitary, `u[out][in]` in the (g, e) basis.
    pub fn apply_atom_unitary(&self, atom: usize, u: &[[Complex64; 2]; 2]) -> Result<Self> {
        if !self.atoms_present {
            return Err(Error::AtomsAbsent);
        }
        if atom > 1 {
            return Err(Error::InvalidIndex {
                index: atom,
                len: 2,
            });
        }
        Ok(self.map_branches(|b| {
            let pair = b.atoms.unwrap_or(AtomPair::GG);
            let input = pair.get(atom).index();
            (0..2)
                .map(|out| {
                    let mut nb = b.clone();
                    nb.coeff *= u[out][input];
                    nb.atoms = Some(pair.with(atom, Level::from_index(out)));
                    nb
                })
                .collect()
        }))
    }

    /// Two-atom unitary, `u[out][in]` in the (gg, ge, eg, ee) basis.
    pub fn apply_two_atom_unitary(&self, u: &[[Complex64; 4]; 4]) -> Result<Self> {
        if !self.atoms_present {
            return Err(Error::AtomsAbsent);
        }
        Ok(self.map_branches(|b| {
            let input = b.atoms.unwrap_or(AtomPair::GG).index();
            (0..4)
                .map(|out| {
                    let mut nb = b.clone();
                    nb.coeff *= u[out][input];
                    nb.atoms = Some(AtomPair::from_index(out));
                    nb
                })
                .collect()
        }))
    }

    /// Controlled phase gate via its computational-basis truth table.
    pub fn apply_cpg(&self) -> Result<Self> {
        let mut u = [[ZERO; 4]; 4];
        for (r, row) in CPG_TRUTH_TABLE.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                u[r][c] = Complex64::new(v, 0.0);
            }
        }
        self.apply_two_atom_unitary(&u)
    }

    /// Unnormalized field state of one atomic sector, atoms removed.
    pub fn atom_sector(&self, outcome: AtomPair) -> Result<Self> {
        if !self.atoms_present {
            return Err(Error::AtomsAbsent);
        }
        let branches = self
            .branches
            .iter()
            .filter(|b| b.atoms == Some(outcome))
            .map(|b| Branch::new(b.coeff, None, b.modes.clone()))
            .collect();
        Ok(Self {
            branches,
            mode_count: self.mode_count,
            atoms_present: false,
        })
    }

    /// Post-select the atoms on `outcome`; returns the normalized field state and the
    /// Born probability of the outcome (relative to ‖self‖²).
    pub fn project_atoms(&self, outcome: AtomPair) -> Result<(Self, f64)> {
        let sector = self.atom_sector(outcome)?;
        let probability = sector.norm_sqr() / self.norm_sqr();
        if sector.norm_sqr() < DEGENERACY_THRESHOLD {
            return Err(Error::OutcomeImpossible {
                outcome: outcome.to_string(),
                probability,
            });
        }
        Ok((sector.normalize()?, probability))
    }

    /// D(β) on one mode: D(β)|μ⟩ = e^{(βμ* − β*μ)/2}|μ + β⟩.
    pub fn displace_mode(&self, mode: usize, beta: Complex64) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.map_branches(|b| {
            let mut b = b.clone();
            let mu = b.modes[mode];
            b.coeff *= (0.5 * (beta * mu.conj() - beta.conj() * mu)).exp();
            b.modes[mode] = mu + beta;
            vec![b]
        }))
    }

    /// |α⟩⟨α| applied to one mode (unnormalized).
    pub fn project_mode_onto(&self, mode: usize, alpha: Complex64) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.map_branches(|b| {
            let mut b = b.clone();
            b.coeff *= coherent_overlap(alpha, b.modes[mode]);
            b.modes[mode] = alpha;
            vec![b]
        }))
    }

    /// Reduced state on the kept modes, expressed over the distinct coherent labels that
    /// appear on those modes.
    pub fn reduce(&self, keep: &[usize]) -> Result<ReducedState> {
        if self.atoms_present {
            return Err(Error::AtomsPresent);
        }
        if keep.is_empty() {
            return Err(Error::ShapeMismatch(
                "reduce must keep at least one mode".into(),
            ));
        }
        for &k in keep {
            self.check_mode(k)?;
        }
        ReducedState::build(self, keep)
    }

    /// Layout this state maps onto under the truncation rule.
    pub fn default_layout(&self) -> SpaceLayout {
        let n = fock::truncation_rule(self.max_amplitude());
        SpaceLayout::atoms_and_modes(if self.atoms_present { 2 } else { 0 }, self.mode_count, n)
    }

    /// Amplitude-faithful embedding into a truncated Fock layout of shape
    /// `[Qubit, Qubit,] Mode.. ` (atoms first when present).
    pub fn to_fock(&self, layout: &SpaceLayout) -> Result<FockVector> {
        let atoms = if self.atoms_present { 2 } else { 0 };
        let factors = layout.factors();
        if factors.len() != atoms + self.mode_count
            || factors[..atoms].iter().any(|f| *f != Factor::Qubit)
            || factors[atoms..].contains(&Factor::Qubit)
        {
            return Err(Error::ShapeMismatch(format!(
                "layout {:?} does not fit {atoms} atoms and {} modes",
                factors, self.mode_count
            )));
        }
        let mut out = FockVector::zeros(layout.clone());
        for b in &self.branches {
            let mut pieces = Vec::with_capacity(factors.len());
            if let Some(pair) = b.atoms {
                pieces.push(FockVector::qubit(pair.0.index())?);
                pieces.push(FockVector::qubit(pair.1.index())?);
            }
            for (m, f) in b.modes.iter().zip(&factors[atoms..]) {
                pieces.push(fock::coherent_fock(*m, f.dim())?);
            }
            out.add_scaled(b.coeff, &FockVector::product(&pieces)?)?;
        }
        Ok(out)
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump::from_state(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn single(a: Complex64) -> CoherentSuperposition {
        CoherentSuperposition::coherent(&[a]).unwrap()
    }

    #[test]
    fn self_overlap_is_one() {
        let s = single(Complex64::new(1.3, -0.2));
        assert!((s.overlap(&s).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn overlap_at_alpha_three() {
        let ov = single(c(3.0)).overlap(&single(c(-3.0))).unwrap();
        assert!((ov.re - (-18.0f64).exp()).abs() < 1e-22);
        assert!((ov.norm() - 1.523e-8).abs() < 1e-11);
    }

    #[test]
    fn quasi_bell_cross_overlap_matches_four_term_expansion() {
        // unnormalized Φ± sums: the Gram expansion over the four branch pairs must agree
        // with a direct sum, and the cross terms cancel for any α
        let a = Complex64::new(0.6, 0.8);
        let plus =
            CoherentSuperposition::from_terms(2, vec![(ONE, vec![a, a]), (ONE, vec![-a, -a])])
                .unwrap();
        let minus =
            CoherentSuperposition::from_terms(2, vec![(ONE, vec![a, a]), (-ONE, vec![-a, -a])])
                .unwrap();
        let ov = plus.overlap(&minus).unwrap();
        // brute-force expansion over the 4 branch pairs
        let pairs = [(a, a, 1.0), (a, -a, -1.0), (-a, a, 1.0), (-a, -a, -1.0)];
        let brute: Complex64 = pairs
            .iter()
            .map(|&(x, y, s)| s * coherent_overlap(x, y) * coherent_overlap(x, y))
            .sum();
        assert!((ov - brute).norm() < 1e-15);
        assert!(ov.norm() < 1e-15);
        // same at α = 1
        let one = c(1.0);
        let p1 = CoherentSuperposition::from_terms(
            2,
            vec![(ONE, vec![one, one]), (ONE, vec![-one, -one])],
        )
        .unwrap();
        let m1 = CoherentSuperposition::from_terms(
            2,
            vec![(ONE, vec![one, one]), (-ONE, vec![-one, -one])],
        )
        .unwrap();
        assert!(p1.overlap(&m1).unwrap().norm() < 1e-15);
    }

    #[test]
    fn canonicalize_merges_identical_branches() {
        let a = c(0.7);
        let s = CoherentSuperposition::from_terms(1, vec![(ONE, vec![a]), (ONE, vec![a])]).unwrap();
        assert_eq!(s.branches().len(), 1);
        let n = s.normalize().unwrap();
        assert!((n.branches()[0].coeff - ONE).norm() < 1e-15);
    }

    #[test]
    fn normalize_reproduces_quasi_bell_constant() {
        let s = CoherentSuperposition::from_terms(
            2,
            vec![(ONE, vec![c(1.0), c(1.0)]), (ONE, vec![c(-1.0), c(-1.0)])],
        )
        .unwrap();
        let k = s.normalization_constant().unwrap();
        let closed = 1.0 / (2.0 * (1.0 + (-4.0f64).exp())).sqrt();
        assert!((k - closed).abs() < 1e-12);
        let n = s.normalize().unwrap();
        assert!((n.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_state_is_rejected() {
        let s =
            CoherentSuperposition::from_terms(1, vec![(ONE, vec![c(0.0)]), (-ONE, vec![c(1e-13)])])
                .unwrap();
        assert!(matches!(s.normalize(), Err(Error::NearNull { .. })));
    }

    #[test]
    fn parity_flips_and_is_involution() {
        let s = single(c(1.2));
        let f = s.apply_parity(0).unwrap();
        assert_eq!(f.branches()[0].modes[0], c(-1.2));
        let back = f.apply_parity(0).unwrap();
        assert!((back.overlap(&s).unwrap() - ONE).norm() < 1e-15);
        assert!(s.apply_parity(1).is_err());
    }

    #[test]
    fn dispersive_pass_phase_rules() {
        let alpha = c(1.0);
        let g = CoherentSuperposition::with_atoms(AtomPair::GG, &[alpha]).unwrap();
        let out = g
            .dispersive_pass(0, 0, std::f64::consts::FRAC_PI_2)
            .unwrap();
        assert!((out.branches()[0].modes[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((out.branches()[0].coeff - ONE).norm() < 1e-15);

        let e = CoherentSuperposition::with_atoms(AtomPair::EG, &[alpha]).unwrap();
        let out = e
            .dispersive_pass(0, 0, std::f64::consts::FRAC_PI_2)
            .unwrap();
        assert!((out.branches()[0].modes[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((out.branches()[0].coeff - Complex64::new(0.0, -1.0)).norm() < 1e-15);

        let full = e.dispersive_pass(0, 0, 2.0 * std::f64::consts::PI).unwrap();
        assert!((full.branches()[0].modes[0] - alpha).norm() < 1e-14);
        assert!((full.branches()[0].coeff - ONE).norm() < 1e-14);

        let bare = single(alpha);
        assert!(matches!(
            bare.dispersive_pass(0, 0, 1.0),
            Err(Error::AtomsAbsent)
        ));
    }

    #[test]
    fn cpg_on_gg_label() {
        let s = CoherentSuperposition::with_atoms(AtomPair::GG, &[c(0.0)]).unwrap();
        let out = s.apply_cpg().unwrap();
        assert_eq!(out.branches().len(), 4);
        for b in out.branches() {
            let expected = if b.atoms == Some(AtomPair::GG) {
                0.5
            } else {
                -0.5
            };
            assert!((b.coeff - c(expected)).norm() < 1e-15);
        }
    }

    #[test]
    fn cpg_hadamard_signs() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // |±⟩ = (|g⟩ ± |e⟩)/√2 on each atom; single vacuum mode as a spectator
        let had = |s1: f64, s2: f64| {
            let terms: Vec<Branch> = AtomPair::ALL
                .iter()
                .map(|p| {
                    let a = if p.0 == Level::G { 1.0 } else { s1 };
                    let b = if p.1 == Level::G { 1.0 } else { s2 };
                    Branch::new(c(a * b * h * h), Some(*p), vec![c(0.0)])
                })
                .collect();
            CoherentSuperposition::new(1, true, terms).unwrap()
        };
        for &(s1, s2, sign) in &[
            (1.0, 1.0, -1.0),
            (1.0, -1.0, 1.0),
            (-1.0, 1.0, 1.0),
            (-1.0, -1.0, 1.0),
        ] {
            let input = had(s1, s2);
            let out = input.apply_cpg().unwrap();
            let ov = input.overlap(&out).unwrap();
            assert!((ov - c(sign)).norm() < 1e-14, "{s1} {s2}: {ov}");
        }
    }

    #[test]
    fn project_atoms_on_product() {
        let s = CoherentSuperposition::with_atoms(AtomPair::GE, &[c(0.4), c(-0.1)]).unwrap();
        let (field, p) = s.project_atoms(AtomPair::GE).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(!field.atoms_present());
        assert!(matches!(
            s.project_atoms(AtomPair::GG),
            Err(Error::OutcomeImpossible { .. })
        ));
    }

    #[test]
    fn displacement_composition_law() {
        let mu = Complex64::new(0.3, 0.2);
        let beta = Complex64::new(-0.5, 0.9);
        let s = single(mu);
        let d = s.displace_mode(0, beta).unwrap();
        let back = d.displace_mode(0, -beta).unwrap();
        assert!((back.overlap(&s).unwrap() - ONE).norm() < 1e-14);
        // against the truncated-Fock displacement operator
        let n = 30;
        let fock_in = s
            .to_fock(&SpaceLayout::single(Factor::Mode { n_trunc: n }))
            .unwrap();
        let fock_out = fock::displacement_op(beta, n)
            .unwrap()
            .apply(&fock_in)
            .unwrap();
        let exact = d
            .to_fock(&SpaceLayout::single(Factor::Mode { n_trunc: n }))
            .unwrap();
        assert!((fock_out.inner(&exact).unwrap() - ONE).norm() < 1e-9);
    }

    #[test]
    fn to_fock_rejects_small_truncation() {
        let s = single(c(2.0));
        let err = s
            .to_fock(&SpaceLayout::single(Factor::Mode { n_trunc: 10 }))
            .unwrap_err();
        assert!(matches!(err, Error::Truncation { required: 26, .. }));
    }

    #[test]
    fn to_fock_product_with_atoms() {
        let a = Complex64::new(0.5, 0.5);
        let s = CoherentSuperposition::with_atoms(AtomPair::EG, &[a]).unwrap();
        let layout = s.default_layout();
        let v = s.to_fock(&layout).unwrap();
        let direct = FockVector::product(&[
            FockVector::qubit(1).unwrap(),
            FockVector::qubit(0).unwrap(),
            fock::coherent_fock(a, layout.factors()[2].dim()).unwrap(),
        ])
        .unwrap();
        assert!((v.inner(&direct).unwrap() - ONE).norm() < 1e-14);
    }

    fn arb_state() -> impl Strategy<Value = CoherentSuperposition> {
        proptest::collection::vec(
            (
                -1.0f64..1.0,
                -1.0f64..1.0,
                -1.5f64..1.5,
                -1.5f64..1.5,
                -1.5f64..1.5,
                -1.5f64..1.5,
            ),
            1..5,
        )
        .prop_filter_map("null", |terms| {
            let s = CoherentSuperposition::from_terms(
                2,
                terms.into_iter().map(|(cr, ci, a, b, x, y)| {
                    (
                        Complex64::new(cr, ci),
                        vec![Complex64::new(a, b), Complex64::new(x, y)],
                    )
                }),
            )
            .ok()?;
            s.normalize().ok()
        })
    }

    proptest! {
        #[test]
        fn gram_is_positive_semidefinite(s in arb_state()) {
            prop_assert!(s.gram().min_eigenvalue() >= -1e-12);
        }

        #[test]
        fn maps_preserve_norm(s in arb_state(), phase in -3.0f64..3.0) {
            prop_assert!((s.apply_parity(1).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
            let with_atoms = CoherentSuperposition::new(
                2,
                true,
                s.branches().iter().map(|b| Branch::new(b.coeff, Some(AtomPair::GE), b.modes.clone())).collect(),
            ).unwrap();
            let d = with_atoms.dispersive_pass(1, 0, phase).unwrap();
            prop_assert!((d.norm_sqr() - 1.0).abs() < 1e-12);
            let g = with_atoms.apply_cpg().unwrap();
            prop_assert!((g.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn backends_agree_on_overlaps(a in arb_state(), b in arb_state()) {
            let layout = SpaceLayout::atoms_and_modes(0, 2, fock::truncation_rule(2.2));
            let fa = a.to_fock(&layout).unwrap();
            let fb = b.to_fock(&layout).unwrap();
            let exact = a.overlap(&b).unwrap();
            let numeric = fa.inner(&fb).unwrap();
            prop_assert!((exact - numeric).norm() < 1e-8);
        }
    }
}
