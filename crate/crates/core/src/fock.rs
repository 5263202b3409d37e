//! Truncated Fock-space numerics.
//!
//! States live on an ordered tensor product of two-level atoms and truncated
//! bosonic modes. The first factor is the most significant index, so a layout
//! `(atom 1, atom 2, mode 1, ..)` stores `|a1 a2 n1 ..>` at
//! `a1 * stride0 + a2 * stride1 + n1 * stride2 + ..`.
//!
//! Operators on the full space are only materialized for small layouts.
//! Propagation of large states goes through [`apply_local`], which acts with a
//! one- or two-factor matrix on the state tensor directly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};

/// One tensor factor of a [`SpaceLayout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Factor {
    /// Two-level atom, basis order `(g, e)`.
    Qubit,
    /// Bosonic mode keeping number states `0..n_trunc`.
    Mode { n_trunc: usize },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match *self {
            Factor::Qubit => 2,
            Factor::Mode { n_trunc } => n_trunc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpaceLayout {
    factors: Vec<Factor>,
}

impl SpaceLayout {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }

    pub fn single(factor: Factor) -> Self {
        Self::new(vec![factor])
    }

    /// `atoms` qubits followed by `modes` modes of equal truncation.
    pub fn atoms_and_modes(atoms: usize, modes: usize, n_trunc: usize) -> Self {
        let mut factors = vec![Factor::Qubit; atoms];
        factors.extend(std::iter::repeat_n(Factor::Mode { n_trunc }, modes));
        Self::new(factors)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        strides
    }

    pub fn sub_layout(&self, positions: &[usize]) -> Result<Self> {
        let factors = positions
            .iter()
            .map(|&p| {
                self.factors.get(p).copied().ok_or(Error::InvalidIndex {
                    index: p,
                    len: self.factors.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(factors))
    }

    pub fn concat(&self, other: &SpaceLayout) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Self::new(factors)
    }
}

/// Largest state vector (in amplitudes) a Fock run may allocate by default.
pub const DEFAULT_MEMORY_BUDGET: usize = 4_194_304;

/// n_trunc = ceil(|α|² + 6|α| + 10). The discarded Poisson weight is below 1e-12 up to
/// |α| ≈ 2.8 and below 4e-11 up to |α| = 6.
pub fn truncation_rule(amplitude: f64) -> usize {
    let a = amplitude.abs();
    (a * a + 6.0 * a + 10.0).ceil() as usize
}

pub fn check_truncation(amplitude: f64, n_trunc: usize) -> Result<()> {
    let required = truncation_rule(amplitude);
    if n_trunc < required {
        return Err(Error::Truncation {
            amplitude: amplitude.abs(),
            given: n_trunc,
            required,
        });
    }
    Ok(())
}

/// Layout of `qubits` qubits followed by `modes` modes, each truncated by the rule for
/// `amplitude`, provided it fits in `budget` amplitudes.
pub fn budgeted_layout(
    qubits: usize,
    modes: usize,
    amplitude: f64,
    budget: usize,
) -> Result<SpaceLayout> {
    let n = truncation_rule(amplitude);
    let amplitudes =
        (1usize << qubits).saturating_mul(n.checked_pow(modes as u32).unwrap_or(usize::MAX));
    if amplitudes > budget {
        return Err(Error::MemoryBudget {
            amplitudes,
            required_n_trunc: n,
            budget,
        });
    }
    Ok(SpaceLayout::atoms_and_modes(qubits, modes, n))
}

#[derive(Clone, Debug)]
pub struct FockVector {
    layout: SpaceLayout,
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn new(layout: SpaceLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for a layout of dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let dim = layout.dim();
        Self {
            layout,
            amplitudes: vec![ZERO; dim],
        }
    }

    pub fn basis(layout: SpaceLayout, index: usize) -> Result<Self> {
        let dim = layout.dim();
        if index >= dim {
            return Err(Error::InvalidIndex { index, len: dim });
        }
        let mut v = Self::zeros(layout);
        v.amplitudes[index] = ONE;
        Ok(v)
    }

    /// Atom basis vector: level 0 = g, 1 = e.
    pub fn qubit(level: usize) -> Result<Self> {
        Self::basis(SpaceLayout::single(Factor::Qubit), level)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn kron(&self, other: &FockVector) -> FockVector {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for &a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|&b| a * b));
        }
        FockVector {
            layout: self.layout.concat(&other.layout),
            amplitudes,
        }
    }

    pub fn product(factors: &[FockVector]) -> Result<FockVector> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::ShapeMismatch("empty tensor product".into()))?;
        Ok(rest.iter().fold(first.clone(), |acc, f| acc.kron(f)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if n < 1e-20 {
            return Err(Error::NearNull {
                what: "fock vector".into(),
                norm_sq: n,
            });
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::ShapeMismatch("inner product across layouts".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨a|b⟩|² / (‖a‖² ‖b‖²).
    pub fn fidelity(&self, other: &FockVector) -> Result<f64> {
        let ov = self.inner(other)?;
        Ok(ov.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    pub fn add_scaled(&mut self, coeff: Complex64, other: &FockVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::ShapeMismatch("sum across layouts".into()));
        }
        for (a, b) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *a += coeff * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, coeff: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= coeff);
    }

    /// Slice with the leading factors fixed to `prefix`; the remaining factors form the result.
    pub fn fix_leading(&self, prefix: &[usize]) -> Result<FockVector> {
        let dims = self.layout.dims();
        if prefix.len() > dims.len() {
            return Err(Error::ShapeMismatch("prefix longer than layout".into()));
        }
        let strides = self.layout.strides();
        let mut offset = 0;
        for (k, &i) in prefix.iter().enumerate() {
            if i >= dims[k] {
                return Err(Error::InvalidIndex {
                    index: i,
                    len: dims[k],
                });
            }
            offset += i * strides[k];
        }
        let rest = SpaceLayout::new(self.layout.factors()[prefix.len()..].to_vec());
        let len = rest.dim();
        FockVector::new(rest, self.amplitudes[offset..offset + len].to_vec())
    }
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    entries: CMatrix,
}

impl OperatorMatrix {
    pub fn new(layout: SpaceLayout, entries: CMatrix) -> Result<Self> {
        let d = layout.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for a layout of dimension {d}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { layout, entries })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let d = layout.dim();
        Self {
            layout,
            entries: CMatrix::identity(d, d),
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kron(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            layout: self.layout.concat(&other.layout),
            entries: linalg::kron(&self.entries, &other.entries),
        }
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            layout: self.layout.clone(),
            entries: self.entries.adjoint(),
        }
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.layout != other.layout {
            return Err(Error::ShapeMismatch(
                "operator product across layouts".into(),
            ));
        }
        Ok(OperatorMatrix {
            layout: self.layout.clone(),
            entries: &self.entries * &other.entries,
        })
    }

    pub fn scaled(&self, c: Complex64) -> OperatorMatrix {
        OperatorMatrix {
            layout: self.layout.clone(),
            entries: &self.entries * c,
        }
    }

    pub fn plus(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.layout != other.layout {
            return Err(Error::ShapeMismatch("operator sum across layouts".into()));
        }
        Ok(OperatorMatrix {
            layout: self.layout.clone(),
            entries: &self.entries + &other.entries,
        })
    }

    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.entries)
    }

    pub fn unitarity_deviation(&self) -> f64 {
        linalg::unitarity_deviation(&self.entries)
    }

    /// Eigenvalues, ascending; only meaningful for Hermitian operators.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.entries)
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if self.layout != v.layout {
            return Err(Error::ShapeMismatch(
                "operator and state layouts differ".into(),
            ));
        }
        let all: Vec<usize> = (0..self.layout.len()).collect();
        apply_local(v, self, &all)
    }

    /// ⟨ψ|O|ψ⟩.
    pub fn expectation(&self, v: &FockVector) -> Result<Complex64> {
        v.inner(&self.apply(v)?)
    }

    /// exp(-i H t); fails on non-Hermitian input.
    pub fn propagator(&self, t: f64) -> Result<OperatorMatrix> {
        let deviation = self.hermitian_deviation();
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(OperatorMatrix {
            layout: self.layout.clone(),
            entries: linalg::hermitian_propagator(&self.entries, t),
        })
    }
}

fn mode_op(n_trunc: usize, f: impl Fn(usize, usize) -> Complex64) -> OperatorMatrix {
    OperatorMatrix {
        layout: SpaceLayout::single(Factor::Mode { n_trunc }),
        entries: DMatrix::from_fn(n_trunc, n_trunc, f),
    }
}

fn qubit_op(entries: [[f64; 2]; 2]) -> OperatorMatrix {
    OperatorMatrix {
        layout: SpaceLayout::single(Factor::Qubit),
        entries: DMatrix::from_fn(2, 2, |r, c| Complex64::new(entries[r][c], 0.0)),
    }
}

pub fn annihilation(n_trunc: usize) -> OperatorMatrix {
    mode_op(n_trunc, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

pub fn creation(n_trunc: usize) -> OperatorMatrix {
    annihilation(n_trunc).adjoint()
}

pub fn number(n_trunc: usize) -> OperatorMatrix {
    mode_op(n_trunc, |r, c| {
        if r == c {
            Complex64::new(r as f64, 0.0)
        } else {
            ZERO
        }
    })
}

/// σ₊ = |e⟩⟨g|.
pub fn sigma_plus() -> OperatorMatrix {
    qubit_op([[0.0, 0.0], [1.0, 0.0]])
}

/// σ₋ = |g⟩⟨e|.
pub fn sigma_minus() -> OperatorMatrix {
    qubit_op([[0.0, 1.0], [0.0, 0.0]])
}

/// σ_z = σ₊σ₋ − σ₋σ₊ = |e⟩⟨e| − |g⟩⟨g|.
pub fn sigma_z() -> OperatorMatrix {
    qubit_op([[-1.0, 0.0], [0.0, 1.0]])
}

pub fn sigma_x() -> OperatorMatrix {
    qubit_op([[0.0, 1.0], [1.0, 0.0]])
}

/// Truncated coherent state, renormalized.
pub fn coherent_fock(alpha: Complex64, n_trunc: usize) -> Result<FockVector> {
    coherent_fock_with_tail(alpha, n_trunc).map(|(v, _)| v)
}

/// Truncated coherent state plus the probability weight discarded by the truncation
/// (the renormalization correction).
pub fn coherent_fock_with_tail(alpha: Complex64, n_trunc: usize) -> Result<(FockVector, f64)> {
    check_truncation(alpha.norm(), n_trunc)?;
    let mut amplitudes = Vec::with_capacity(n_trunc);
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..n_trunc {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amplitudes.push(c);
    }
    let kept: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let v =
        FockVector::new(SpaceLayout::single(Factor::Mode { n_trunc }), amplitudes)?.normalized()?;
    Ok((v, (1.0 - kept).max(0.0)))
}

/// D(α) = exp(α a† − α* a) in the truncated space.
pub fn displacement_op(alpha: Complex64, n_trunc: usize) -> Result<OperatorMatrix> {
    check_truncation(alpha.norm(), n_trunc)?;
    // α a† − α* a = −i H with H = i(α a† − α* a) Hermitian
    let a = annihilation(n_trunc);
    let ad = creation(n_trunc);
    let generator = ad.scaled(alpha).plus(&a.scaled(-alpha.conj()))?;
    let h = generator.scaled(linalg::I);
    h.propagator(1.0)
}

/// P(π) = exp(iπ n̂).
pub fn parity_op(n_trunc: usize) -> OperatorMatrix {
    mode_op(n_trunc, |r, c| {
        if r != c {
            ZERO
        } else if r % 2 == 0 {
            ONE
        } else {
            -ONE
        }
    })
}

/// Lift a single-factor operator to the full layout (identity elsewhere).
pub fn embed(op: &OperatorMatrix, position: usize, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    let target = layout.sub_layout(&[position])?;
    if op.layout != target {
        return Err(Error::ShapeMismatch(format!(
            "operator of dimension {} cannot act on factor {position} of dimension {}",
            op.dim(),
            target.dim()
        )));
    }
    let mut acc: Option<OperatorMatrix> = None;
    for (k, f) in layout.factors().iter().enumerate() {
        let piece = if k == position {
            op.clone()
        } else {
            OperatorMatrix::identity(SpaceLayout::single(*f))
        };
        acc = Some(match acc {
            None => piece,
            Some(prev) => prev.kron(&piece),
        });
    }
    acc.ok_or_else(|| Error::ShapeMismatch("empty layout".into()))
}

struct LocalIndex {
    /// Offset of each local basis state (row-major over the chosen factors).
    local: Vec<usize>,
    /// Offset of each configuration of the remaining factors.
    outer: Vec<usize>,
}

fn local_index(layout: &SpaceLayout, factors: &[usize]) -> Result<LocalIndex> {
    let dims = layout.dims();
    let strides = layout.strides();
    let mut seen = vec![false; dims.len()];
    for &f in factors {
        if f >= dims.len() {
            return Err(Error::InvalidIndex {
                index: f,
                len: dims.len(),
            });
        }
        if seen[f] {
            return Err(Error::ShapeMismatch(format!("factor {f} listed twice")));
        }
        seen[f] = true;
    }
    let enumerate = |which: &[usize]| -> Vec<usize> {
        let mut offsets = vec![0usize];
        for &f in which {
            let mut next = Vec::with_capacity(offsets.len() * dims[f]);
            for &o in &offsets {
                for i in 0..dims[f] {
                    next.push(o + i * strides[f]);
                }
            }
            offsets = next;
        }
        offsets
    };
    let others: Vec<usize> = (0..dims.len()).filter(|k| !seen[*k]).collect();
    Ok(LocalIndex {
        local: enumerate(factors),
        outer: enumerate(&others),
    })
}

/// Apply `op` (whose layout is the sub-layout of `factors`, in that order) to the
/// state without materializing the full-space operator.
pub fn apply_local(
    state: &FockVector,
    op: &OperatorMatrix,
    factors: &[usize],
) -> Result<FockVector> {
    let sub = state.layout.sub_layout(factors)?;
    if op.layout != sub {
        return Err(Error::ShapeMismatch(format!(
            "local operator layout {:?} does not match factors {factors:?}",
            op.layout.factors()
        )));
    }
    let idx = local_index(&state.layout, factors)?;
    let mut out = state.clone();
    let m = &op.entries;
    if linalg::is_diagonal(m) {
        let diag: Vec<Complex64> = (0..m.nrows()).map(|i| m[(i, i)]).collect();
        for &base in &idx.outer {
            for (l, &off) in idx.local.iter().enumerate() {
                out.amplitudes[base + off] *= diag[l];
            }
        }
        return Ok(out);
    }
    let d = idx.local.len();
    let mut gathered = vec![ZERO; d];
    for &base in &idx.outer {
        for (l, &off) in idx.local.iter().enumerate() {
            gathered[l] = state.amplitudes[base + off];
        }
        for (r, &off) in idx.local.iter().enumerate() {
            let mut acc = ZERO;
            for (c, g) in gathered.iter().enumerate() {
                acc += m[(r, c)] * g;
            }
            out.amplitudes[base + off] = acc;
        }
    }
    Ok(out)
}

/// exp(-i H t)|ψ⟩ with H on the full layout of the state.
pub fn evolve(state: &FockVector, h: &OperatorMatrix, t: f64) -> Result<FockVector> {
    let all: Vec<usize> = (0..state.layout.len()).collect();
    evolve_on(state, h, &all, t)
}

/// exp(-i H t)|ψ⟩ with H acting on the listed factors only.
pub fn evolve_on(
    state: &FockVector,
    h: &OperatorMatrix,
    factors: &[usize],
    t: f64,
) -> Result<FockVector> {
    let u = h.propagator(t)?;
    apply_local(state, &u, factors)
}

/// Reduced density matrix on a subset of factors.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.entries)
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// ⟨φ|ρ|φ⟩ for a pure state on the same factors.
    pub fn fidelity_with_pure(&self, phi: &FockVector) -> Result<f64> {
        if phi.layout != self.layout {
            return Err(Error::ShapeMismatch(
                "pure state layout differs from density matrix".into(),
            ));
        }
        let v = nalgebra::DVector::from_column_slice(phi.amplitudes());
        let val = (v.adjoint() * &self.entries * &v)[(0, 0)];
        Ok(val.re / phi.norm_sqr())
    }
}

/// Trace out every factor not listed in `keep`. Kept factors appear in ascending order.
pub fn partial_trace(state: &FockVector, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::ShapeMismatch(
            "partial trace must keep at least one factor".into(),
        ));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let layout = state.layout.sub_layout(&keep)?;
    let idx = local_index(&state.layout, &keep)?;
    let d = idx.local.len();
    let mut rho = CMatrix::zeros(d, d);
    let psi = &state.amplitudes;
    for &base in &idx.outer {
        for (a, &oa) in idx.local.iter().enumerate() {
            let pa = psi[base + oa];
            if pa == ZERO {
                continue;
            }
            for (b, &ob) in idx.local.iter().enumerate() {
                rho[(a, b)] += pa * psi[base + ob].conj();
            }
        }
    }
    Ok(DensityMatrix {
        layout,
        entries: rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn truncation_rule_values() {
        assert_eq!(truncation_rule(0.0), 10);
        assert_eq!(truncation_rule(1.0), 17);
        assert_eq!(truncation_rule(2.0), 26);
        assert_eq!(truncation_rule(3.0), 37);
    }

    #[test]
    fn truncation_violation_names_required_size() {
        let err = coherent_fock(c(3.0), 20).unwrap_err();
        match err {
            Error::Truncation {
                required, given, ..
            } => {
                assert_eq!(required, 37);
                assert_eq!(given, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(c(3.0), 20).contains("37"));
    }

    fn err_string(a: Complex64, n: usize) -> String {
        coherent_fock(a, n).unwrap_err().to_string()
    }

    #[test]
    fn memory_budget_names_required_truncation() {
        let err = budgeted_layout(2, 4, 3.0, DEFAULT_MEMORY_BUDGET).unwrap_err();
        match &err {
            Error::MemoryBudget {
                amplitudes,
                required_n_trunc,
                ..
            } => {
                assert_eq!(*amplitudes, 4 * 37usize.pow(4));
                assert_eq!(*required_n_trunc, 37);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("n_trunc = 37"));
        let ok = budgeted_layout(2, 4, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        assert_eq!(ok.dim(), 4 * 26usize.pow(4));
    }

    #[test]
    fn tail_is_below_bound_under_rule() {
        for &a in &[0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 2.8] {
            let (_, tail) = coherent_fock_with_tail(c(a), truncation_rule(a)).unwrap();
            assert!(tail <= 1e-12, "alpha {a}: tail {tail:e}");
        }
        // the rule loosens past |α| ≈ 2.85: the Poisson tail at |α| = 3 is 2.4e-12
        for &a in &[3.0, 4.0, 6.0] {
            let (_, tail) = coherent_fock_with_tail(c(a), truncation_rule(a)).unwrap();
            assert!(tail <= 5e-11, "alpha {a}: tail {tail:e}");
        }
    }

    #[test]
    fn vacuum_is_first_basis_vector() {
        let v = coherent_fock(c(0.0), 10).unwrap();
        assert_eq!(v.amplitudes()[0], ONE);
        assert!(v.amplitudes()[1..].iter().all(|a| *a == ZERO));
    }

    #[test]
    fn overlap_of_opposite_coherent_states() {
        let a = coherent_fock(c(1.0), 20).unwrap();
        let b = coherent_fock(c(-1.0), 20).unwrap();
        let ov = a.inner(&b).unwrap();
        // series oracle: Σ e^{-1} (-1)^n / n!
        let series: f64 = (0..40)
            .map(|n| (-1.0f64).powi(n) / (1..=n).map(|k| k as f64).product::<f64>())
            .sum::<f64>()
            * (-1.0f64).exp();
        assert!((ov.re - (-2.0f64).exp()).abs() < 1e-10);
        assert!((series - (-2.0f64).exp()).abs() < 1e-14);
        assert!(ov.im.abs() < 1e-15);
    }

    #[test]
    fn overlap_at_alpha_three() {
        let n = truncation_rule(3.0);
        let a = coherent_fock(c(3.0), n).unwrap();
        let b = coherent_fock(c(-3.0), n).unwrap();
        let ov = a.inner(&b).unwrap().norm();
        assert!((ov - (-18.0f64).exp()).abs() < 1e-10);
        assert!((ov - 1.523e-8).abs() < 1e-11);
    }

    #[test]
    fn displacement_identity_and_inverse() {
        let d0 = displacement_op(c(0.0), 12).unwrap();
        assert!(d0
            .matmul(&OperatorMatrix::identity(d0.layout().clone()))
            .is_ok());
        for i in 0..12 {
            for j in 0..12 {
                let target = if i == j { ONE } else { ZERO };
                assert!((d0.entries()[(i, j)] - target).norm() < 1e-13);
            }
        }
        let alpha = Complex64::new(0.7, -0.4);
        let n = 24;
        let prod = displacement_op(alpha, n)
            .unwrap()
            .matmul(&displacement_op(-alpha, n).unwrap())
            .unwrap();
        for i in 0..n / 2 {
            for j in 0..n / 2 {
                let target = if i == j { ONE } else { ZERO };
                assert!((prod.entries()[(i, j)] - target).norm() < 1e-10);
            }
        }
        assert!(displacement_op(alpha, n).unwrap().unitarity_deviation() < 1e-10);
    }

    #[test]
    fn displaced_vacuum_is_coherent() {
        let n = 30;
        let vac = FockVector::basis(SpaceLayout::single(Factor::Mode { n_trunc: n }), 0).unwrap();
        let d = displacement_op(c(1.0), n).unwrap();
        let out = d.apply(&vac).unwrap();
        let target = coherent_fock(c(1.0), n).unwrap();
        assert!(out.fidelity(&target).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn parity_flips_coherent_amplitude() {
        let n = truncation_rule(1.3);
        let p = parity_op(n);
        let vac = coherent_fock(c(0.0), n).unwrap();
        assert!(p.apply(&vac).unwrap().fidelity(&vac).unwrap() > 1.0 - 1e-15);
        let alpha = Complex64::new(1.0, 0.8);
        let flipped = p.apply(&coherent_fock(alpha, n).unwrap()).unwrap();
        let target = coherent_fock(-alpha, n).unwrap();
        assert!((flipped.inner(&target).unwrap() - ONE).norm() < 1e-12);
        let sq = p.matmul(&p).unwrap();
        assert!(sq.unitarity_deviation() < 1e-15);
        assert!((sq.entries() - CMatrix::identity(n, n)).norm() < 1e-15);
    }

    #[test]
    fn embed_identity_and_commuting_atoms() {
        let layout = SpaceLayout::new(vec![
            Factor::Qubit,
            Factor::Qubit,
            Factor::Mode { n_trunc: 3 },
        ]);
        let id = embed(
            &OperatorMatrix::identity(SpaceLayout::single(Factor::Qubit)),
            1,
            &layout,
        )
        .unwrap();
        assert!((id.entries() - CMatrix::identity(12, 12)).norm() == 0.0);
        let z1 = embed(&sigma_z(), 0, &layout).unwrap();
        let z2 = embed(&sigma_z(), 1, &layout).unwrap();
        let comm = z1.matmul(&z2).unwrap().entries() - z2.matmul(&z1).unwrap().entries();
        assert!(comm.norm() == 0.0);
        assert!(embed(&sigma_z(), 2, &layout).is_err());
    }

    #[test]
    fn embedded_number_operator_mean() {
        let n = truncation_rule(1.0);
        let alpha = Complex64::new(0.6, 0.8);
        let layout = SpaceLayout::new(vec![
            Factor::Qubit,
            Factor::Qubit,
            Factor::Mode { n_trunc: n },
            Factor::Mode { n_trunc: n },
        ]);
        let state = FockVector::product(&[
            FockVector::qubit(0).unwrap(),
            FockVector::qubit(0).unwrap(),
            coherent_fock(alpha, n).unwrap(),
            coherent_fock(c(0.0), n).unwrap(),
        ])
        .unwrap();
        let num = embed(&number(n), 2, &layout).unwrap();
        let mean = num.expectation(&state).unwrap();
        assert!((mean.re - alpha.norm_sqr()).abs() < 1e-10);
        // local application agrees with the materialized operator
        let local = apply_local(&state, &number(n), &[2]).unwrap();
        let full = num.apply(&state).unwrap();
        assert!(local
            .amplitudes()
            .iter()
            .zip(full.amplitudes())
            .all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn evolve_zero_time_and_group_property() {
        let n = 14;
        let layout = SpaceLayout::new(vec![Factor::Qubit, Factor::Mode { n_trunc: n }]);
        let h = embed(&sigma_x(), 0, &layout)
            .unwrap()
            .matmul(&embed(&number(n), 1, &layout).unwrap())
            .unwrap()
            .plus(&embed(&annihilation(n).plus(&creation(n)).unwrap(), 1, &layout).unwrap())
            .unwrap();
        let psi = FockVector::product(&[
            FockVector::qubit(0).unwrap(),
            coherent_fock(c(0.5), n).unwrap(),
        ])
        .unwrap();
        let same = evolve(&psi, &h, 0.0).unwrap();
        assert!(same
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .all(|(a, b)| (a - b).norm() < 1e-14));
        let once = evolve(&psi, &h, 0.8).unwrap();
        let twice = evolve(&evolve(&psi, &h, 0.4).unwrap(), &h, 0.4).unwrap();
        assert!(once
            .amplitudes()
            .iter()
            .zip(twice.amplitudes())
            .all(|(a, b)| (a - b).norm() < 1e-10));
        assert!((once.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let a = annihilation(5);
        let psi = coherent_fock(c(0.0), 10).unwrap();
        let v = FockVector::new(a.layout().clone(), psi.amplitudes()[..5].to_vec()).unwrap();
        assert!(matches!(
            evolve(&v, &a, 1.0),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let n = 17;
        let psi = FockVector::product(&[
            FockVector::qubit(0).unwrap(),
            coherent_fock(c(1.0), n).unwrap(),
        ])
        .unwrap();
        let rho = partial_trace(&psi, &[0]).unwrap();
        assert!((rho.entries()[(0, 0)] - ONE).norm() < 1e-12);
        assert!(rho.entries()[(1, 1)].norm() < 1e-12);
        assert!((rho.trace() - ONE).norm() < 1e-12);
        assert!(partial_trace(&psi, &[]).is_err());
        assert!(partial_trace(&psi, &[4]).is_err());
    }

    #[test]
    fn fix_leading_extracts_sector() {
        let n = 4;
        let psi = FockVector::product(&[
            FockVector::qubit(1).unwrap(),
            FockVector::qubit(0).unwrap(),
            coherent_fock(c(0.3), 12).unwrap(),
        ])
        .unwrap();
        let sector = psi.fix_leading(&[1, 0]).unwrap();
        assert!((sector.norm_sqr() - 1.0).abs() < 1e-14);
        assert!(psi.fix_leading(&[0, 0]).unwrap().norm_sqr() < 1e-30);
        let _ = n;
    }

    proptest! {
        #[test]
        fn random_hamiltonian_propagators_are_unitary(seed in proptest::collection::vec(-1.0f64..1.0, 32)) {
            let m = CMatrix::from_fn(4, 4, |r, c| Complex64::new(seed[r * 4 + c], seed[16 + c * 4 + r]));
            let h = OperatorMatrix::new(
                SpaceLayout::new(vec![Factor::Qubit, Factor::Qubit]),
                (&m + m.adjoint()) * Complex64::new(0.5, 0.0),
            ).unwrap();
            prop_assert!(h.hermitian_deviation() <= 1e-12);
            let u = h.propagator(1.7).unwrap();
            prop_assert!(u.unitarity_deviation() <= 1e-10);
        }

        #[test]
        fn evolution_preserves_norm(t in -5.0f64..5.0, re in -1.5f64..1.5, im in -1.5f64..1.5) {
            let n = truncation_rule(2.2);
            let h = number(n).matmul(&number(n)).unwrap()
                .plus(&annihilation(n).plus(&creation(n)).unwrap()).unwrap();
            let psi = coherent_fock(Complex64::new(re, im), n).unwrap();
            let out = evolve(&psi, &h, t).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-10);
        }
    }
}
