//! Hamiltonian builders for the dispersive passes and the cavity-assisted phase gate.
//!
//! Two-atom collective operators are half-normalized: Σ± = (σ₊¹ + σ₊²)/2 and
//! Σx = Σ₊ + Σ₋ = (σx¹ + σx²)/2, so Σx has eigenvalues {1, 0, 0, −1}. With this
//! normalization exp(−i(ΩΣx + χΣx²/2)π/χ) at Ω = (2k+½)χ equals the gate's
//! truth table exactly. The plain Pauli sum instead yields −σx⊗σx.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, Factor, FockVector, OperatorMatrix, SpaceLayout};
use crate::linalg::CMatrix;

/// Threshold for every "much larger than" regime flag.
pub const RATIO_MIN: f64 = 5.0;

/// A regime assumption that the chosen parameters only marginally satisfy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeWarning {
    pub condition: String,
    pub value: f64,
    pub required: f64,
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {:.4} (want >= {})",
            self.condition, self.value, self.required
        )
    }
}

fn ratio_warning(condition: &str, value: f64) -> Option<RegimeWarning> {
    (value < RATIO_MIN).then(|| RegimeWarning {
        condition: condition.to_string(),
        value,
        required: RATIO_MIN,
    })
}

fn check_finite(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    if !v.is_finite() || v < 0.0 || (!allow_zero && v == 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and positive, got {v}"
        )));
    }
    Ok(())
}

/// Coupling g and detuning Δ of the dispersive atom-cavity interaction; λ = g²/Δ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersiveParams {
    pub g: f64,
    pub delta_big: f64,
    pub lam: f64,
}

impl DispersiveParams {
    pub fn new(g: f64, delta_big: f64) -> Result<Self> {
        check_finite("g", g, true)?;
        check_finite("delta_big", delta_big, false)?;
        Ok(Self {
            g,
            delta_big,
            lam: g * g / delta_big,
        })
    }

    /// Parameters with a prescribed λ (g is set to √(λΔ)).
    pub fn from_lambda(lam: f64, delta_big: f64) -> Result<Self> {
        check_finite("lambda", lam, true)?;
        Self::new((lam * delta_big).sqrt(), delta_big)
    }

    /// Duration of one pass, λt = π/2.
    pub fn pass_time(&self) -> f64 {
        PI / (2.0 * self.lam)
    }

    pub fn warnings(&self) -> Vec<RegimeWarning> {
        if self.g == 0.0 {
            return Vec::new();
        }
        ratio_warning("delta_big/g", self.delta_big / self.g)
            .into_iter()
            .collect()
    }
}

/// Parameters of the driven two-atom phase gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpgParams {
    pub g_prime: f64,
    pub delta_small: f64,
    pub omega_drive: f64,
    pub k: u32,
    pub chi: f64,
}

impl CpgParams {
    /// δ·t_f = 2π together with t_f = π/χ and χ = g′²/2δ: δ = g′, χ = g′/2.
    pub fn self_consistent(g_prime: f64, k: u32) -> Result<Self> {
        Self::with_detuning(g_prime, g_prime, k)
    }

    /// Free detuning: χ = g′²/2δ, Ω = (2k+½)χ.
    pub fn with_detuning(g_prime: f64, delta_small: f64, k: u32) -> Result<Self> {
        check_finite("g_prime", g_prime, false)?;
        check_finite("delta_small", delta_small, false)?;
        if k == 0 {
            return Err(Error::InvalidParameter(
                "k must be a positive integer".into(),
            ));
        }
        let chi = g_prime * g_prime / (2.0 * delta_small);
        Ok(Self {
            g_prime,
            delta_small,
            omega_drive: (2.0 * k as f64 + 0.5) * chi,
            k,
            chi,
        })
    }

    /// Fully explicit parameters; Ω must equal (2k+½)χ to relative precision 1e-9.
    pub fn new(g_prime: f64, delta_small: f64, omega_drive: f64, k: u32) -> Result<Self> {
        let p = Self::with_detuning(g_prime, delta_small, k)?;
        check_finite("omega_drive", omega_drive, false)?;
        if ((omega_drive - p.omega_drive) / p.omega_drive).abs() > 1e-9 {
            return Err(Error::InconsistentTiming(format!(
                "omega_drive = {omega_drive} but (2k+1/2)chi = {} for k = {k}, chi = {}",
                p.omega_drive, p.chi
            )));
        }
        Ok(Self { omega_drive, ..p })
    }

    /// t_f = π/χ.
    pub fn gate_time(&self) -> f64 {
        PI / self.chi
    }

    pub fn warnings(&self) -> Vec<RegimeWarning> {
        let mut w: Vec<RegimeWarning> = [
            ratio_warning("omega_drive/g_prime", self.omega_drive / self.g_prime),
            ratio_warning(
                "omega_drive/delta_small",
                self.omega_drive / self.delta_small,
            ),
        ]
        .into_iter()
        .flatten()
        .collect();
        let cycles = self.delta_small * self.gate_time() / (2.0 * PI);
        if (cycles - cycles.round()).abs() > 1e-9 || cycles.round() == 0.0 {
            w.push(RegimeWarning {
                condition: "delta_small*t_f/(2pi) (integer needed)".into(),
                value: cycles,
                required: cycles.round().max(1.0),
            });
        }
        w
    }
}

fn two_atoms() -> SpaceLayout {
    SpaceLayout::new(vec![Factor::Qubit, Factor::Qubit])
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Σ₊ = (σ₊¹ + σ₊²)/2 on the two-atom space.
pub fn collective_sigma_plus() -> OperatorMatrix {
    let l = two_atoms();
    let s = fock::embed(&fock::sigma_plus(), 0, &l)
        .and_then(|a| a.plus(&fock::embed(&fock::sigma_plus(), 1, &l)?))
        .expect("fixed two-qubit layout");
    s.scaled(real(0.5))
}

/// Σx = Σ₊ + Σ₋.
pub fn collective_sigma_x() -> OperatorMatrix {
    let p = collective_sigma_plus();
    p.plus(&p.adjoint()).expect("same layout")
}

/// Σz = σz¹ + σz².
pub fn collective_sigma_z() -> OperatorMatrix {
    let l = two_atoms();
    fock::embed(&fock::sigma_z(), 0, &l)
        .and_then(|a| a.plus(&fock::embed(&fock::sigma_z(), 1, &l)?))
        .expect("fixed two-qubit layout")
}

/// λ(a†a σz + σ₊σ₋) on atom ⊗ mode.
pub fn dispersive_h(p: &DispersiveParams, n_trunc: usize) -> Result<OperatorMatrix> {
    let sz_n = fock::sigma_z().kron(&fock::number(n_trunc));
    let excited = fock::sigma_plus()
        .matmul(&fock::sigma_minus())?
        .kron(&OperatorMatrix::identity(SpaceLayout::single(
            Factor::Mode { n_trunc },
        )));
    Ok(sz_n.plus(&excited)?.scaled(real(p.lam)))
}

/// ΩΣx + (χ/2)Σx² on the two atoms.
pub fn effective_cpg_h(p: &CpgParams) -> Result<OperatorMatrix> {
    CpgParams::new(p.g_prime, p.delta_small, p.omega_drive, p.k)?;
    let sx = collective_sigma_x();
    let sx2 = sx.matmul(&sx)?;
    sx.scaled(real(p.omega_drive))
        .plus(&sx2.scaled(real(0.5 * p.chi)))
}

/// Propagator of the effective gate Hamiltonian over t_f = π/χ.
pub fn cpg_propagator(p: &CpgParams) -> Result<OperatorMatrix> {
    effective_cpg_h(p)?.propagator(p.gate_time())
}

/// Largest entrywise deviation of `u` from `target` after removing the phase of the
/// first nonzero entry of `u`.
pub fn deviation_up_to_phase(u: &CMatrix, target: &CMatrix) -> f64 {
    let pivot = u.iter().zip(target.iter()).find(|(a, _)| a.norm() > 1e-8);
    let phase = match pivot {
        Some((a, b)) if b.norm() > 0.0 => (b / a) / (b / a).norm(),
        _ => real(1.0),
    };
    u.iter()
        .zip(target.iter())
        .map(|(a, b)| (a * phase - b).norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    /// Full rotating-wave Hamiltonian with atomic transition frequency ω (= drive
    /// frequency); the cavity sits at ω₀ = ω − δ.
    Lab { atom_frequency: f64 },
    /// Strong-driving interaction picture, (g′/2)(a e^{iδt} + a† e^{−iδt})Σx.
    Interaction,
}

/// H(t) = H₀ + e^{−iνt}X + e^{iνt}X† on atoms ⊗ mode.
#[derive(Clone, Debug)]
pub struct DrivenTcHamiltonian {
    layout: SpaceLayout,
    stat: CMatrix,
    x: CMatrix,
    x_dag: CMatrix,
    nu: f64,
}

/// Driven Tavis–Cummings Hamiltonian for the gate, in the requested frame.
pub fn driven_tc_h(p: &CpgParams, n_trunc: usize, frame: Frame) -> Result<DrivenTcHamiltonian> {
    let layout = SpaceLayout::new(vec![Factor::Qubit, Factor::Qubit, Factor::Mode { n_trunc }]);
    let mode_id = OperatorMatrix::identity(SpaceLayout::single(Factor::Mode { n_trunc }));
    let atom_id = OperatorMatrix::identity(two_atoms());
    let a = atom_id.kron(&fock::annihilation(n_trunc));
    let (stat, x, nu) = match frame {
        Frame::Interaction => {
            let x = collective_sigma_x()
                .kron(&fock::creation(n_trunc))
                .scaled(real(0.5 * p.g_prime));
            (
                OperatorMatrix::identity(layout.clone()).scaled(real(0.0)),
                x,
                p.delta_small,
            )
        }
        Frame::Lab { atom_frequency } => {
            check_finite("atom_frequency", atom_frequency, false)?;
            let cavity = atom_frequency - p.delta_small;
            let sp = collective_sigma_plus().kron(&mode_id);
            let sz = collective_sigma_z().kron(&mode_id);
            let n = atom_id.kron(&fock::number(n_trunc));
            let exchange = a.matmul(&sp)?;
            let stat = n
                .scaled(real(cavity))
                .plus(&sz.scaled(real(0.5 * atom_frequency)))?
                .plus(&exchange.plus(&exchange.adjoint())?.scaled(real(p.g_prime)))?;
            (stat, sp.scaled(real(p.omega_drive)), atom_frequency)
        }
    };
    Ok(DrivenTcHamiltonian {
        layout,
        stat: stat.entries().clone(),
        x_dag: x.entries().adjoint(),
        x: x.entries().clone(),
        nu,
    })
}

impl DrivenTcHamiltonian {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        let c = Complex64::from_polar(1.0, -self.nu * t);
        let m = &self.stat + &self.x * c + &self.x_dag * c.conj();
        OperatorMatrix::new(self.layout.clone(), m).expect("layout fixed at construction")
    }

    fn derivative(
        &self,
        t: f64,
        psi: &nalgebra::DVector<Complex64>,
    ) -> nalgebra::DVector<Complex64> {
        let c = Complex64::from_polar(1.0, -self.nu * t);
        let h_psi = &self.stat * psi + (&self.x * psi) * c + (&self.x_dag * psi) * c.conj();
        h_psi * Complex64::new(0.0, -1.0)
    }

    /// Time-ordered evolution from t0 to t1 by classical fourth-order Runge–Kutta.
    pub fn integrate(
        &self,
        psi: &FockVector,
        t0: f64,
        t1: f64,
        steps: usize,
    ) -> Result<FockVector> {
        if psi.layout() != &self.layout {
            return Err(Error::ShapeMismatch(
                "state layout differs from the Hamiltonian's".into(),
            ));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }
        let h = (t1 - t0) / steps as f64;
        let mut y = nalgebra::DVector::from_column_slice(psi.amplitudes());
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            let k1 = self.derivative(t, &y);
            let k2 = self.derivative(t + h / 2.0, &(&y + &k1 * real(h / 2.0)));
            let k3 = self.derivative(t + h / 2.0, &(&y + &k2 * real(h / 2.0)));
            let k4 = self.derivative(t + h, &(&y + &k3 * real(h)));
            y += (k1 + k2 * real(2.0) + k3 * real(2.0) + k4) * real(h / 6.0);
        }
        FockVector::new(self.layout.clone(), y.iter().copied().collect())
    }
}

/// Integrate the interaction-frame drive over one gate time from each |ab, 0⟩ and return
/// the smallest fidelity of the atom reduced state with e^{−i(χ/2)Σx² t_f}|ab⟩. The ΩΣx
/// term is the frame rotation itself, so only the Σx² phase is compared.
pub fn validate_driven_gate(p: &CpgParams, n_trunc: usize, steps: usize) -> Result<f64> {
    let h = driven_tc_h(p, n_trunc, Frame::Interaction)?;
    let tf = p.gate_time();
    let sx = collective_sigma_x();
    let phase = sx.matmul(&sx)?.propagator(0.5 * p.chi * tf)?;
    let mut worst = f64::INFINITY;
    for ab in 0..4 {
        let psi = FockVector::basis(h.layout().clone(), ab * n_trunc)?;
        let out = h.integrate(&psi, 0.0, tf, steps)?;
        let target = phase.apply(&FockVector::basis(two_atoms(), ab)?)?;
        let rho = fock::partial_trace(&out, &[0, 1])?;
        worst = worst.min(rho.fidelity_with_pure(&target)?);
    }
    Ok(worst)
}

/// Outcome of comparing the full detuned Jaynes–Cummings evolution with the
/// dispersive Hamiltonian over one pass.
#[derive(Clone, Debug, Serialize)]
pub struct DispersiveValidation {
    pub g: f64,
    pub delta_big: f64,
    pub ratio: f64,
    pub lam: f64,
    pub time: f64,
    pub alpha: f64,
    pub n_trunc: usize,
    pub fidelity: f64,
    pub warnings: Vec<RegimeWarning>,
}

/// Evolve (|g⟩+|e⟩)/√2 ⊗ |α⟩ for λt = π/2 under Δσ₊σ₋ + g(aσ₊ + a†σ₋), remove the free
/// e^{−iΔσ₊σ₋t}, and compare with the dispersive evolution.
pub fn validate_dispersive_approx(
    g: f64,
    delta_big: f64,
    alpha: f64,
    n_trunc: usize,
) -> Result<DispersiveValidation> {
    let p = DispersiveParams::new(g, delta_big)?;
    if g > 0.0 && delta_big / g < 2.0 {
        return Err(Error::InvalidParameter(format!(
            "delta_big/g = {} is below 2; the dispersive expansion does not apply",
            delta_big / g
        )));
    }
    let time = if p.lam > 0.0 { p.pass_time() } else { 0.0 };
    let mode = Factor::Mode { n_trunc };
    let layout = SpaceLayout::new(vec![Factor::Qubit, mode]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let atom = FockVector::new(SpaceLayout::single(Factor::Qubit), vec![real(h), real(h)])?;
    let psi = atom.kron(&fock::coherent_fock(real(alpha), n_trunc)?);

    let excited = fock::embed(
        &fock::sigma_plus().matmul(&fock::sigma_minus())?,
        0,
        &layout,
    )?;
    let a = fock::embed(&fock::annihilation(n_trunc), 1, &layout)?;
    let sp = fock::embed(&fock::sigma_plus(), 0, &layout)?;
    let exchange = a.matmul(&sp)?;
    let full = excited
        .scaled(real(delta_big))
        .plus(&exchange.plus(&exchange.adjoint())?.scaled(real(g)))?;
    let exact = fock::evolve(&psi, &full, time)?;
    let exact = fock::evolve(&exact, &excited, -delta_big * time)?;
    let approx = fock::evolve(&psi, &dispersive_h(&p, n_trunc)?, time)?;
    Ok(DispersiveValidation {
        g,
        delta_big,
        ratio: if g > 0.0 {
            delta_big / g
        } else {
            f64::INFINITY
        },
        lam: p.lam,
        time,
        alpha,
        n_trunc,
        fidelity: exact.fidelity(&approx)?,
        warnings: p.warnings(),
    })
}
