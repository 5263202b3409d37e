//! Reduced states over non-orthogonal coherent labels.

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::{modes_overlap, CoherentSuperposition, MERGE_TOLERANCE};
use crate::error::Result;
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, CMatrix, ZERO};

/// Above this condition number the Gram matrix is treated as rank deficient.
const CHOLESKY_CONDITION_LIMIT: f64 = 1e12;
/// Gram eigenvalues below this are dropped on the rank-deficient path.
const GRAM_EIGEN_CUTOFF: f64 = 1e-13;

/// Hermitian matrix of pairwise overlaps.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    entries: CMatrix,
}

impl GramMatrix {
    pub(crate) fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        Self {
            entries: CMatrix::from_fn(n, n, f),
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// λ_max / λ_min, infinite when λ_min ≤ 0.
    pub fn condition_number(&self) -> f64 {
        let e = self.eigenvalues();
        match (e.first(), e.last()) {
            (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

/// ρ = Σ_ab M_ab |ν_a⟩⟨ν_b| on the kept modes, with `labels[a]` = ν_a.
#[derive(Clone, Debug)]
pub struct ReducedState {
    keep: Vec<usize>,
    labels: Vec<Vec<Complex64>>,
    coefficients: CMatrix,
    gram: GramMatrix,
}

impl ReducedState {
    pub(super) fn build(state: &CoherentSuperposition, keep: &[usize]) -> Result<Self> {
        let mode_count = state.mode_count();
        let traced: Vec<usize> = (0..mode_count).filter(|m| !keep.contains(m)).collect();
        let kept_of = |modes: &[Complex64]| keep.iter().map(|&k| modes[k]).collect::<Vec<_>>();
        let traced_of = |modes: &[Complex64]| traced.iter().map(|&k| modes[k]).collect::<Vec<_>>();

        let mut labels: Vec<Vec<Complex64>> = Vec::new();
        let mut label_of = Vec::with_capacity(state.branches().len());
        for b in state.branches() {
            let k = kept_of(&b.modes);
            let pos = labels.iter().position(|l| {
                l.iter()
                    .zip(&k)
                    .all(|(x, y)| (x - y).norm() < MERGE_TOLERANCE)
            });
            label_of.push(match pos {
                Some(p) => p,
                None => {
                    labels.push(k);
                    labels.len() - 1
                }
            });
        }

        let n = labels.len();
        let mut coefficients = CMatrix::from_element(n, n, ZERO);
        let branches = state.branches();
        for (i, bi) in branches.iter().enumerate() {
            let ti = traced_of(&bi.modes);
            for (j, bj) in branches.iter().enumerate() {
                let tj = traced_of(&bj.modes);
                coefficients[(label_of[i], label_of[j])] +=
                    bi.coeff * bj.coeff.conj() * modes_overlap(&tj, &ti);
            }
        }
        let gram = GramMatrix::from_fn(n, |a, b| modes_overlap(&labels[a], &labels[b]));
        Ok(Self {
            keep: keep.to_vec(),
            labels,
            coefficients,
            gram,
        })
    }

    pub fn kept_modes(&self) -> &[usize] {
        &self.keep
    }

    pub fn labels(&self) -> &[Vec<Complex64>] {
        &self.labels
    }

    pub fn coefficients(&self) -> &CMatrix {
        &self.coefficients
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// tr ρ = tr(M G).
    pub fn trace(&self) -> f64 {
        (&self.coefficients * self.gram.entries()).trace().re
    }

    /// Nonzero spectrum of ρ, descending. Length is the rank of the label set.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let g = self.gram.entries();
        let k = if self.gram.condition_number() < CHOLESKY_CONDITION_LIMIT {
            // ρ ~ M G = (M L) L†, which shares its spectrum with L† M L
            match Cholesky::new(g.clone()) {
                Some(ch) => {
                    let l = ch.l();
                    l.adjoint() * &self.coefficients * l
                }
                None => self.projected(),
            }
        } else {
            self.projected()
        };
        let mut e = hermitian_eigenvalues(&k);
        e.reverse();
        e
    }

    /// G = V Λ V†; on the retained eigenvectors ρ ~ Λ^{1/2} V† M V Λ^{1/2}.
    fn projected(&self) -> CMatrix {
        let (values, vectors) = hermitian_eigen(self.gram.entries());
        let kept: Vec<usize> = (0..values.len())
            .filter(|&i| values[i] > GRAM_EIGEN_CUTOFF)
            .collect();
        let w = CMatrix::from_fn(vectors.nrows(), kept.len(), |r, c| {
            vectors[(r, kept[c])] * values[kept[c]].sqrt()
        });
        w.adjoint() * &self.coefficients * w
    }

    pub fn purity(&self) -> f64 {
        self.eigenvalues().iter().map(|e| e * e).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, SpaceLayout};
    use crate::linalg::ONE;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let s = CoherentSuperposition::coherent(&[c(0.5), Complex64::new(0.0, 1.0)]).unwrap();
        let r = s.reduce(&[1]).unwrap();
        let e = r.eigenvalues();
        assert_eq!(e.len(), 1);
        assert!((e[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quasi_bell_mode_spectrum_matches_closed_form() {
        for &alpha in &[0.3, 1.0, 2.0] {
            let s = CoherentSuperposition::from_terms(
                2,
                vec![
                    (ONE, vec![c(alpha), c(alpha)]),
                    (ONE, vec![c(-alpha), c(-alpha)]),
                ],
            )
            .unwrap()
            .normalize()
            .unwrap();
            let r = s.reduce(&[0]).unwrap();
            assert!((r.trace() - 1.0).abs() < 1e-12);
            let e = r.eigenvalues();
            // weights of the even/odd cat components
            let norm = 1.0 + (-4.0 * alpha * alpha).exp();
            let w = [
                (1.0 + (-2.0 * alpha * alpha).exp()).powi(2) / (2.0 * norm),
                (1.0 - (-2.0 * alpha * alpha).exp()).powi(2) / (2.0 * norm),
            ];
            assert!((e[0] - w[0]).abs() < 1e-12, "alpha {alpha}: {e:?} vs {w:?}");
            assert!((e[1] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn agrees_with_fock_partial_trace() {
        let a = Complex64::new(0.8, -0.3);
        let s = CoherentSuperposition::from_terms(
            3,
            vec![
                (c(0.7), vec![a, -a, a]),
                (Complex64::new(0.1, 0.4), vec![-a, a, a]),
                (c(-0.2), vec![a, a, -a]),
            ],
        )
        .unwrap()
        .normalize()
        .unwrap();
        let n = fock::truncation_rule(a.norm());
        let v = s.to_fock(&SpaceLayout::atoms_and_modes(0, 3, n)).unwrap();
        for keep in [vec![0], vec![2], vec![0, 1]] {
            let exact = s.reduce(&keep).unwrap().eigenvalues();
            let numeric = fock::partial_trace(&v, &keep).unwrap().eigenvalues();
            let mut numeric: Vec<f64> = numeric.into_iter().rev().collect();
            numeric.truncate(exact.len());
            for (x, y) in exact.iter().zip(&numeric) {
                assert!(
                    (x - y).abs() < 1e-9,
                    "keep {keep:?}: {exact:?} vs {numeric:?}"
                );
            }
        }
    }

    #[test]
    fn rank_deficient_labels_take_projected_path() {
        // two labels that differ by 1e-9: Gram is numerically singular
        let eps = 1e-9;
        let s = CoherentSuperposition::from_terms(
            2,
            vec![
                (ONE, vec![c(1.0), c(1.0)]),
                (ONE, vec![c(1.0 + eps), c(-1.0)]),
            ],
        )
        .unwrap()
        .normalize()
        .unwrap();
        let r = s.reduce(&[0]).unwrap();
        assert!(r.gram().condition_number() > CHOLESKY_CONDITION_LIMIT);
        let e = r.eigenvalues();
        assert_eq!(e.len(), 1);
        assert!((e[0] - 1.0).abs() < 1e-6);
    }
}
