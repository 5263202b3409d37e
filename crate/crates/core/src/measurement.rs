//! Two-outcome field measurement {P_α = |α⟩⟨α|, Q_α = 1 − P_α} on one mode, and its
//! realization by displacing with D(−α), leaking the cavity and checking for photons.
//!
//! The Q branch is realized as (1 − P_α)ψ renormalized. Zero-photon detection after the
//! leak is treated as ideal.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coherent::{CoherentSuperposition, DEGENERACY_THRESHOLD};
use crate::error::{Error, Result};
use crate::fock::{self, Factor, FockVector, OperatorMatrix, SpaceLayout};
use crate::linalg::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PovmBranch {
    P,
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PhotonCount {
    Zero,
    Nonzero,
}

/// How the branch is chosen: forced, or drawn with the Born probabilities from a seeded
/// ChaCha8 stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchChoice<T> {
    Forced(T),
    Sampled { seed: u64 },
}

/// Uniform draw in [0, 1) from a seed; the first value of the ChaCha8 stream.
pub fn seeded_uniform(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).gen::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoherentPovm {
    pub alpha: Complex64,
}

impl CoherentPovm {
    pub fn new(alpha: Complex64) -> Self {
        Self { alpha }
    }

    /// (P, Q) on a single truncated mode.
    pub fn fock_operators(&self, n_trunc: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
        let v = fock::coherent_fock(self.alpha, n_trunc)?;
        let a = v.amplitudes();
        let layout = SpaceLayout::single(Factor::Mode { n_trunc });
        let p = CMatrix::from_fn(n_trunc, n_trunc, |r, c| a[r] * a[c].conj());
        let q = CMatrix::identity(n_trunc, n_trunc) - &p;
        Ok((
            OperatorMatrix::new(layout.clone(), p)?,
            OperatorMatrix::new(layout, q)?,
        ))
    }

    /// max |P†P + Q†Q − 1| entrywise.
    pub fn completeness_deviation(&self, n_trunc: usize) -> Result<f64> {
        let (p, q) = self.fock_operators(n_trunc)?;
        let sum = p.adjoint().matmul(&p)?.plus(&q.adjoint().matmul(&q)?)?;
        let id = CMatrix::identity(n_trunc, n_trunc);
        Ok((sum.entries() - id)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }
}

/// Result of a P/Q measurement on one mode.
#[derive(Clone, Debug)]
pub struct FieldMeasurement<S> {
    pub state: S,
    pub branch: PovmBranch,
    pub probability: f64,
    pub p_probability: f64,
    pub q_probability: f64,
}

fn choose(p_prob: f64, choice: BranchChoice<PovmBranch>) -> PovmBranch {
    match choice {
        BranchChoice::Forced(b) => b,
        BranchChoice::Sampled { seed } => {
            if seeded_uniform(seed) < p_prob {
                PovmBranch::P
            } else {
                PovmBranch::Q
            }
        }
    }
}

fn finish<S>(
    p_state: S,
    q_state: S,
    p_prob: f64,
    q_prob: f64,
    choice: BranchChoice<PovmBranch>,
    normalize: impl Fn(S) -> Result<S>,
) -> Result<FieldMeasurement<S>> {
    if (p_prob + q_prob - 1.0).abs() > 1e-10 {
        return Err(Error::Invariant(format!(
            "branch probabilities sum to {} (P {p_prob}, Q {q_prob})",
            p_prob + q_prob
        )));
    }
    let branch = choose(p_prob, choice);
    let (state, probability) = match branch {
        PovmBranch::P => (p_state, p_prob),
        PovmBranch::Q => (q_state, q_prob),
    };
    if probability < DEGENERACY_THRESHOLD {
        return Err(Error::OutcomeImpossible {
            outcome: format!("{branch:?}"),
            probability,
        });
    }
    Ok(FieldMeasurement {
        state: normalize(state)?,
        branch,
        probability,
        p_probability: p_prob,
        q_probability: q_prob,
    })
}

/// Measure one mode of a mode-only superposition.
pub fn measure_mode(
    state: &CoherentSuperposition,
    mode: usize,
    povm: &CoherentPovm,
    choice: BranchChoice<PovmBranch>,
) -> Result<FieldMeasurement<CoherentSuperposition>> {
    let total = state.norm_sqr();
    let p_state = state.project_mode_onto(mode, povm.alpha)?;
    let q_state = state.plus(&p_state.scaled(Complex64::new(-1.0, 0.0)))?;
    let p_prob = p_state.norm_sqr() / total;
    let q_prob = q_state.norm_sqr() / total;
    finish(p_state, q_state, p_prob, q_prob, choice, |s| s.normalize())
}

/// The same measurement on a truncated-Fock state; `factor` is the mode's position
/// in the layout.
pub fn measure_mode_fock(
    state: &FockVector,
    factor: usize,
    povm: &CoherentPovm,
    choice: BranchChoice<PovmBranch>,
) -> Result<FieldMeasurement<FockVector>> {
    let n_trunc = match state.layout().factors().get(factor) {
        Some(Factor::Mode { n_trunc }) => *n_trunc,
        Some(Factor::Qubit) => {
            return Err(Error::ShapeMismatch(format!("factor {factor} is a qubit")))
        }
        None => {
            return Err(Error::InvalidIndex {
                index: factor,
                len: state.layout().len(),
            })
        }
    };
    let (p, q) = povm.fock_operators(n_trunc)?;
    let total = state.norm_sqr();
    let p_state = fock::apply_local(state, &p, &[factor])?;
    let q_state = fock::apply_local(state, &q, &[factor])?;
    let p_prob = p_state.norm_sqr() / total;
    let q_prob = q_state.norm_sqr() / total;
    finish(p_state, q_state, p_prob, q_prob, choice, |s| s.normalized())
}

/// Result of the displace, leak, detect, restore sequence.
#[derive(Clone, Debug)]
pub struct LeakMeasurement {
    pub state: CoherentSuperposition,
    pub photons: PhotonCount,
    pub probability: f64,
    pub zero_probability: f64,
}

/// D(−α), then an ideal photon check on the leaked mode, then D(α). The zero-photon
/// branch realizes P_α: D(α)|0⟩⟨0|D(−α) = |α⟩⟨α|.
pub fn displace_and_leak(
    state: &CoherentSuperposition,
    mode: usize,
    alpha: Complex64,
    choice: BranchChoice<PhotonCount>,
) -> Result<LeakMeasurement> {
    let total = state.norm_sqr();
    let shifted = state.displace_mode(mode, -alpha)?;
    let vacuum = Complex64::new(0.0, 0.0);
    let zero = shifted.project_mode_onto(mode, vacuum)?;
    let rest = shifted.plus(&zero.scaled(Complex64::new(-1.0, 0.0)))?;
    let zero_probability = zero.norm_sqr() / total;
    let rest_probability = rest.norm_sqr() / total;
    let forced = match choice {
        BranchChoice::Forced(PhotonCount::Zero) => BranchChoice::Forced(PovmBranch::P),
        BranchChoice::Forced(PhotonCount::Nonzero) => BranchChoice::Forced(PovmBranch::Q),
        BranchChoice::Sampled { seed } => BranchChoice::Sampled { seed },
    };
    let m = finish(
        zero,
        rest,
        zero_probability,
        rest_probability,
        forced,
        |s| s.displace_mode(mode, alpha)?.normalize(),
    )?;
    Ok(LeakMeasurement {
        state: m.state,
        photons: if m.branch == PovmBranch::P {
            PhotonCount::Zero
        } else {
            PhotonCount::Nonzero
        },
        probability: m.probability,
        zero_probability,
    })
}
