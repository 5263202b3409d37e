//! The generation pipeline: Ramsey pulses, p dispersive passes per atom, the
//! cavity-assisted phase gate, then measurement of both atoms.
//!
//! Atom 1 crosses modes 0..p and atom 2 crosses modes p..2p. Transit between cavities
//! takes no time. Each stage is checked against its closed form; in the Fock backend
//! the exact backend runs in lockstep and every checkpoint records the agreement.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::coherent::{AtomPair, CoherentSuperposition, Level, StateDump, CPG_TRUTH_TABLE};
use crate::error::{Error, Result};
use crate::fock::{self, FockVector, OperatorMatrix, SpaceLayout};
use crate::hamiltonians::{self, CpgParams, DispersiveParams, RegimeWarning};
use crate::linalg::CMatrix;
use crate::measurement::seeded_uniform;
use crate::states::{ctecs_basis_element, CtecsLabel};

/// π/2 pulse: |g⟩ → (|g⟩ + |e⟩)/√2, |e⟩ → (−|g⟩ + |e⟩)/√2; entries `[out][in]`.
pub fn ramsey_matrix() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[h, -h], [h, h]]
}

/// Ramsey pulse on a single atom's (g, e) amplitudes.
pub fn ramsey(atom: [Complex64; 2]) -> [Complex64; 2] {
    let m = ramsey_matrix();
    [
        m[0][0] * atom[0] + m[0][1] * atom[1],
        m[1][0] * atom[0] + m[1][1] * atom[1],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Analytic,
    Fock,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomMeasurement {
    Forced(AtomPair),
    Sampled { seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolConfig {
    pub alpha: Complex64,
    pub p: u32,
    pub backend: Backend,
    pub dispersive: DispersiveParams,
    pub cpg: CpgParams,
    pub measurement: AtomMeasurement,
    /// ±1 per mode multiplying α in the initial fields.
    pub initial_signs: Vec<i8>,
    pub memory_budget: usize,
}

impl ProtocolConfig {
    /// Default preparation |gg⟩|α, …, α⟩ with p = 2, forced gg outcome, analytic backend,
    /// Δ = 8g and a self-consistent gate with k = 1 (all couplings in units of g).
    pub fn new(alpha: Complex64) -> Self {
        Self {
            alpha,
            p: 2,
            backend: Backend::Analytic,
            dispersive: DispersiveParams::new(1.0, 8.0).expect("valid defaults"),
            cpg: CpgParams::self_consistent(1.0, 1).expect("valid defaults"),
            measurement: AtomMeasurement::Forced(AtomPair::GG),
            initial_signs: vec![1; 4],
            memory_budget: fock::DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_p(mut self, p: u32) -> Self {
        self.p = p;
        self.initial_signs = vec![1; 2 * p as usize];
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_measurement(mut self, m: AtomMeasurement) -> Self {
        self.measurement = m;
        self
    }

    pub fn with_signs(mut self, signs: &[i8]) -> Self {
        self.initial_signs = signs.to_vec();
        self
    }

    pub fn mode_count(&self) -> usize {
        2 * self.p as usize
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if self.initial_signs.len() != self.mode_count() {
            return Err(Error::InvalidParameter(format!(
                "{} initial signs for {} modes",
                self.initial_signs.len(),
                self.mode_count()
            )));
        }
        if self.initial_signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidParameter(
                "initial signs must be +1 or -1".into(),
            ));
        }
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if self.dispersive.lam <= 0.0 {
            return Err(Error::InvalidParameter(
                "dispersive coupling must be nonzero".into(),
            ));
        }
        CpgParams::new(
            self.cpg.g_prime,
            self.cpg.delta_small,
            self.cpg.omega_drive,
            self.cpg.k,
        )?;
        Ok(())
    }

    fn initial_amplitudes(&self) -> Vec<Complex64> {
        self.initial_signs
            .iter()
            .map(|&s| self.alpha * s as f64)
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub symbolic: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Checkpoint {
    pub name: String,
    /// Fidelity against the closed-form state for this stage.
    pub target_fidelity: f64,
    /// Fock backend only: fidelity between the Fock state and the exact state.
    pub backend_agreement: Option<f64>,
    pub state: StateDump,
    #[serde(skip)]
    pub exact: CoherentSuperposition,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub label: CtecsLabel,
    pub fidelity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolRecord {
    pub config: ProtocolConfig,
    pub checkpoints: Vec<Checkpoint>,
    pub timings: Vec<StageTiming>,
    pub total_time: f64,
    pub outcome_probabilities: [f64; 4],
    pub outcome: AtomPair,
    pub outcome_probability: f64,
    pub final_state: StateDump,
    /// For four-mode runs: the cluster-basis element (at β = iα) closest to the final state.
    pub classification: Option<Classification>,
    pub warnings: Vec<RegimeWarning>,
    #[serde(skip)]
    pub final_exact: CoherentSuperposition,
    #[serde(skip)]
    pub final_fock: Option<FockVector>,
}

impl ProtocolRecord {
    pub fn checkpoint(&self, name: &str) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const CHECKPOINTS: [&str; 6] = [
    "initial",
    "post_ramsey",
    "post_dispersive_atom1",
    "post_dispersive_atom2",
    "post_cpg",
    "post_measurement",
];

/// Cluster-basis label with maximal |overlap|² against `state`; ties go to the first label.
pub fn classify(state: &CoherentSuperposition, alpha: Complex64) -> Result<Classification> {
    if state.mode_count() != 4 || state.atoms_present() {
        return Err(Error::ShapeMismatch(
            "classification needs a four-mode field state".into(),
        ));
    }
    let mut best: Option<Classification> = None;
    for l in CtecsLabel::all() {
        let f = state.fidelity(&ctecs_basis_element(l, alpha)?)?;
        if best.as_ref().is_none_or(|b| f > b.fidelity) {
            best = Some(Classification {
                label: l,
                fidelity: f,
            });
        }
    }
    best.ok_or_else(|| Error::Invariant("empty label set".into()))
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

// Closed-form stage targets, built directly from branch lists.

/// Product of per-atom two-term factors with per-atom mode blocks.
fn product_target(
    atom1: &[(Level, Complex64, Vec<Complex64>)],
    atom2: &[(Level, Complex64, Vec<Complex64>)],
) -> Result<CoherentSuperposition> {
    let mut branches = Vec::new();
    for (l1, c1, m1) in atom1 {
        for (l2, c2, m2) in atom2 {
            let mut modes = m1.clone();
            modes.extend_from_slice(m2);
            branches.push(crate::coherent::Branch::new(
                c1 * c2,
                Some(AtomPair(*l1, *l2)),
                modes,
            ));
        }
    }
    let n = branches[0].modes.len();
    CoherentSuperposition::new(n, true, branches)
}

/// Per-atom state after `passes` passes: (|g⟩|β…⟩ + (−i)^passes |e⟩|−β…⟩)/√2 with
/// β_m = i s_m α, or the Ramsey state with untouched fields when passes = 0.
fn atom_block(amps: &[Complex64], passed: bool, p: u32) -> Vec<(Level, Complex64, Vec<Complex64>)> {
    let h = real(FRAC_1_SQRT_2);
    if !passed {
        return vec![(Level::G, h, amps.to_vec()), (Level::E, h, amps.to_vec())];
    }
    let i = Complex64::new(0.0, 1.0);
    let g: Vec<Complex64> = amps.iter().map(|a| i * a).collect();
    let e: Vec<Complex64> = g.iter().map(|b| -b).collect();
    vec![(Level::G, h, g), (Level::E, h * (-i).powu(p), e)]
}

fn post_cpg_target(amps: &[Complex64], p: u32) -> Result<CoherentSuperposition> {
    let w = p as usize;
    let a1 = atom_block(&amps[..w], true, p);
    let a2 = atom_block(&amps[w..], true, p);
    let mut branches = Vec::new();
    for out in AtomPair::ALL {
        for (l1, c1, m1) in &a1 {
            for (l2, c2, m2) in &a2 {
                let input = AtomPair(*l1, *l2).index();
                let t = CPG_TRUTH_TABLE[out.index()][input];
                let mut modes = m1.clone();
                modes.extend_from_slice(m2);
                branches.push(crate::coherent::Branch::new(c1 * c2 * t, Some(out), modes));
            }
        }
    }
    CoherentSuperposition::new(2 * w, true, branches)
}

struct Stage {
    exact: CoherentSuperposition,
    fock: Option<FockVector>,
}

fn checkpoint(name: &str, stage: &Stage, target: &CoherentSuperposition) -> Result<Checkpoint> {
    let target_fidelity = stage.exact.fidelity(target)?;
    let backend_agreement = match &stage.fock {
        Some(v) => Some(v.fidelity(&stage.exact.to_fock(v.layout())?)?),
        None => None,
    };
    Ok(Checkpoint {
        name: name.to_string(),
        target_fidelity,
        backend_agreement,
        state: stage.exact.to_dump(),
        exact: stage.exact.clone(),
    })
}

fn two_atom_matrix(u: &CMatrix) -> [[Complex64; 4]; 4] {
    let mut m = [[real(0.0); 4]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = u[(r, c)];
        }
    }
    m
}

fn pick_outcome(probabilities: &[f64; 4], m: AtomMeasurement) -> AtomPair {
    match m {
        AtomMeasurement::Forced(o) => o,
        AtomMeasurement::Sampled { seed } => {
            let u = seeded_uniform(seed);
            let mut acc = 0.0;
            for o in AtomPair::ALL {
                acc += probabilities[o.index()];
                if u < acc {
                    return o;
                }
            }
            // u within round-off of 1: take the last outcome with nonzero weight
            *AtomPair::ALL
                .iter()
                .rev()
                .find(|o| probabilities[o.index()] > 0.0)
                .unwrap_or(&AtomPair::EE)
        }
    }
}

/// Target field state for outcome `o`: the raw row of the gate applied to the
/// (possibly sign-modified) per-atom states, normalized.
fn final_target(amps: &[Complex64], p: u32, o: AtomPair) -> Result<CoherentSuperposition> {
    post_cpg_target(amps, p)?.atom_sector(o)?.normalize()
}

/// Run the full pipeline.
pub fn run(config: &ProtocolConfig) -> Result<ProtocolRecord> {
    config.validate()?;
    let p = config.p;
    let w = p as usize;
    let modes = config.mode_count();
    let amps = config.initial_amplitudes();

    let layout = match config.backend {
        Backend::Analytic => None,
        Backend::Fock => Some(fock::budgeted_layout(
            2,
            modes,
            config.alpha.norm(),
            config.memory_budget,
        )?),
    };
    let n_trunc = layout.as_ref().map(|l| l.dims()[2]);

    let mut checkpoints = Vec::new();

    // initial
    let exact = CoherentSuperposition::with_atoms(AtomPair::GG, &amps)?;
    let fock_state = match &layout {
        Some(l) => Some(exact.to_fock(l)?),
        None => None,
    };
    let mut stage = Stage {
        exact,
        fock: fock_state,
    };
    checkpoints.push(checkpoint(
        "initial",
        &stage,
        &CoherentSuperposition::with_atoms(AtomPair::GG, &amps)?,
    )?);

    // Ramsey on both atoms
    let r = ramsey_matrix();
    let r_op = OperatorMatrix::new(
        SpaceLayout::single(fock::Factor::Qubit),
        CMatrix::from_fn(2, 2, |i, j| r[i][j]),
    )?;
    stage.exact = stage
        .exact
        .apply_atom_unitary(0, &r)?
        .apply_atom_unitary(1, &r)?;
    if let Some(v) = &stage.fock {
        let v = fock::apply_local(v, &r_op, &[0])?;
        stage.fock = Some(fock::apply_local(&v, &r_op, &[1])?);
    }
    let target = product_target(
        &atom_block(&amps[..w], false, p),
        &atom_block(&amps[w..], false, p),
    )?;
    checkpoints.push(checkpoint("post_ramsey", &stage, &target)?);

    // dispersive passes
    let phase = config.dispersive.lam * config.dispersive.pass_time();
    let h_disp = match n_trunc {
        Some(n) => Some(hamiltonians::dispersive_h(&config.dispersive, n)?),
        None => None,
    };
    for atom in 0..2 {
        for k in 0..w {
            let mode = atom * w + k;
            stage.exact = stage.exact.dispersive_pass(atom, mode, phase)?;
            if let (Some(v), Some(h)) = (&stage.fock, &h_disp) {
                stage.fock = Some(fock::evolve_on(
                    v,
                    h,
                    &[atom, 2 + mode],
                    config.dispersive.pass_time(),
                )?);
            }
        }
        let target = if atom == 0 {
            product_target(
                &atom_block(&amps[..w], true, p),
                &atom_block(&amps[w..], false, p),
            )?
        } else {
            product_target(
                &atom_block(&amps[..w], true, p),
                &atom_block(&amps[w..], true, p),
            )?
        };
        let name = if atom == 0 {
            "post_dispersive_atom1"
        } else {
            "post_dispersive_atom2"
        };
        checkpoints.push(checkpoint(name, &stage, &target)?);
    }

    // phase gate from the effective Hamiltonian over t_f = π/χ
    let u = hamiltonians::cpg_propagator(&config.cpg)?;
    stage.exact = stage
        .exact
        .apply_two_atom_unitary(&two_atom_matrix(u.entries()))?;
    if let Some(v) = &stage.fock {
        stage.fock = Some(fock::apply_local(v, &u, &[0, 1])?);
    }
    checkpoints.push(checkpoint("post_cpg", &stage, &post_cpg_target(&amps, p)?)?);

    // atomic measurement
    let total = stage.exact.norm_sqr();
    let mut probabilities = [0.0; 4];
    for o in AtomPair::ALL {
        probabilities[o.index()] = stage.exact.atom_sector(o)?.norm_sqr() / total;
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::Invariant(format!(
            "outcome probabilities sum to {sum}"
        )));
    }
    let outcome = pick_outcome(&probabilities, config.measurement);
    let (field, outcome_probability) = stage.exact.project_atoms(outcome)?;
    let field_fock = match &stage.fock {
        Some(v) => Some(
            v.fix_leading(&[outcome.0.index(), outcome.1.index()])?
                .normalized()?,
        ),
        None => None,
    };
    let final_stage = Stage {
        exact: field.clone(),
        fock: field_fock.clone(),
    };
    checkpoints.push(checkpoint(
        "post_measurement",
        &final_stage,
        &final_target(&amps, p, outcome)?,
    )?);

    let beta = Complex64::new(0.0, 1.0) * config.alpha;
    let classification = if modes == 4 {
        Some(classify(&field, beta)?)
    } else {
        None
    };

    let pass_time = config.dispersive.pass_time();
    let gate_time = config.cpg.gate_time();
    let timings = vec![
        StageTiming {
            stage: "ramsey".into(),
            symbolic: "0".into(),
            seconds: 0.0,
        },
        StageTiming {
            stage: "dispersive".into(),
            symbolic: format!("{p} x pi/(2 lambda)"),
            seconds: p as f64 * pass_time,
        },
        StageTiming {
            stage: "cpg".into(),
            symbolic: "pi/chi".into(),
            seconds: gate_time,
        },
    ];
    let mut warnings = config.dispersive.warnings();
    warnings.extend(config.cpg.warnings());

    Ok(ProtocolRecord {
        config: config.clone(),
        checkpoints,
        total_time: p as f64 * pass_time + gate_time,
        timings,
        outcome_probabilities: probabilities,
        outcome,
        outcome_probability,
        final_state: field.to_dump(),
        classification,
        warnings,
        final_exact: field,
        final_fock: field_fock,
    })
}

/// Run with an alternative sign pattern on the initial fields.
pub fn run_variant(config: &ProtocolConfig, signs: &[i8]) -> Result<ProtocolRecord> {
    run(&config.clone().with_signs(signs))
}
