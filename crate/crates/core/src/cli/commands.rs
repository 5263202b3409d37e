use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{GateDetuning, Settings, UnitSystem};
use super::{
    config_hash, ArtifactHeader, BranchArg, Command, Report, Scheme, SweepQuantity, VERSION,
};
use crate::coherent::{
    coherent_overlap, CoherentSuperposition, StateDump, CPG_TRUTH_TABLE, DUMP_FORMAT,
};
use crate::diagnostics::{
    self, entanglement_spectrum, reduced_state_eigenvalues, von_neumann_entropy, DetuningMode,
    FeasibilityInput, FeasibilityReport, PublishedComparison,
};
use crate::error::{Error, Result};
use crate::fock;
use crate::hamiltonians::{self, CpgParams};
use crate::linalg::CMatrix;
use crate::measurement::{self, BranchChoice, CoherentPovm, PhotonCount, PovmBranch};
use crate::protocol::{self, Backend, ProtocolConfig, ProtocolRecord, CHECKPOINTS};
use crate::states::{self, CtecsLabel, QuasiBellLabel};

pub(super) fn dispatch(command: &Command, settings: Settings) -> Result<Report> {
    match command {
        Command::Generate { alpha, p, outcome } => {
            generate(command, settings, *alpha, *p, outcome.as_deref())
        }
        Command::Basis { label, alpha } => basis(command, settings, label, *alpha),
        Command::Sweep {
            quantity,
            alphas,
            label,
            mode,
        } => sweep(
            command,
            settings,
            *quantity,
            alphas,
            label.as_deref(),
            *mode,
        ),
        Command::Measure {
            state,
            mode,
            alpha,
            scheme,
            branch,
        } => measure(command, settings, state, *mode, *alpha, *scheme, *branch),
        Command::Feasibility => feasibility(command, settings),
        Command::Selftest => selftest(command, settings),
    }
}

fn header(command: &Command, settings: &Settings, extra: &[u8]) -> Result<ArtifactHeader> {
    Ok(ArtifactHeader {
        tool: "ctecs",
        version: VERSION,
        command: command.name(),
        config_hash: config_hash(settings, command, extra)?,
        seed: settings.seed,
    })
}

/// Shortest round-trip decimal, switching to exponent form for very small or large values.
fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn cnum(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{} {sign} {}i", num(z.re), num(z.im.abs()))
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn time_unit(settings: &Settings) -> &'static str {
    match settings.units {
        UnitSystem::Natural => "1/g",
        UnitSystem::Si => "s",
    }
}

fn generate(
    command: &Command,
    mut settings: Settings,
    alpha: Option<f64>,
    p: Option<u32>,
    outcome: Option<&str>,
) -> Result<Report> {
    if let Some(a) = alpha {
        settings.alpha = [a, 0.0];
    }
    if let Some(p) = p {
        if settings.signs.len() != 2 * p as usize {
            settings.signs = vec![1; 2 * p as usize];
        }
        settings.p = p;
    }
    if let Some(o) = outcome {
        settings.outcome = super::config::parse_outcome(o)?;
    }
    let config = settings.protocol()?;
    let record = protocol::run(&config)?;
    let mut report = Report::new(header(command, &settings, &[])?);
    report.json("record", &record)?;

    let rows: Vec<Vec<String>> = record
        .checkpoints
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                num(c.target_fidelity),
                opt_num(c.backend_agreement),
            ]
        })
        .collect();
    report.csv(
        "checkpoints",
        "ctecs-checkpoints/1",
        &["checkpoint", "target_fidelity", "backend_agreement"],
        &["target_fidelity: overlap with the closed-form state of the stage; backend_agreement: fock vs exact".into()],
        &rows,
    )?;
    report.text("summary", &summary(&record, &settings));
    Ok(report)
}

fn summary(record: &ProtocolRecord, settings: &Settings) -> String {
    let c = &record.config;
    let mut s = String::new();
    let _ = writeln!(s, "alpha: {}", cnum(c.alpha));
    let _ = writeln!(s, "passes per atom: {}", c.p);
    let _ = writeln!(s, "backend: {}", backend_name(c.backend));
    let _ = writeln!(
        s,
        "outcome: {} (probability {})",
        record.outcome,
        num(record.outcome_probability)
    );
    let probs: Vec<String> = record
        .outcome_probabilities
        .iter()
        .zip(["gg", "ge", "eg", "ee"])
        .map(|(p, l)| format!("{l}={}", num(*p)))
        .collect();
    let _ = writeln!(s, "outcome probabilities: {}", probs.join(" "));
    match &record.classification {
        Some(cl) => {
            let _ = writeln!(
                s,
                "final label: {} (fidelity {:.12})",
                cl.label, cl.fidelity
            );
        }
        None => {
            let _ = writeln!(s, "final label: n/a ({} modes)", c.mode_count());
        }
    }
    let _ = writeln!(s, "checkpoints:");
    for cp in &record.checkpoints {
        let agreement = cp
            .backend_agreement
            .map(|a| format!("  fock agreement {a:.12}"))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "  {:<24} target fidelity {:.12}{agreement}",
            cp.name, cp.target_fidelity
        );
    }
    let _ = writeln!(
        s,
        "protocol time: {} {}",
        num(record.total_time),
        time_unit(settings)
    );
    if record.warnings.is_empty() {
        let _ = writeln!(s, "regime warnings: none");
    } else {
        let _ = writeln!(s, "regime warnings:");
        for w in &record.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    s
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Analytic => "analytic",
        Backend::Fock => "fock",
    }
}

#[derive(Serialize)]
struct BasisBody {
    label: String,
    kind: &'static str,
    alpha: f64,
    raw_norm_sqr: f64,
    normalization_constant: f64,
    closed_form_normalization: f64,
    state: StateDump,
    gram_labels: Vec<String>,
    gram: Vec<Vec<Complex64>>,
    max_offdiagonal: f64,
}

fn basis(command: &Command, settings: Settings, label: &str, alpha: f64) -> Result<Report> {
    let a = Complex64::new(alpha, 0.0);
    let (kind, raw, labels, elements, closed) = if let Ok(l) = label.parse::<CtecsLabel>() {
        let labels = CtecsLabel::all();
        let elements = labels
            .iter()
            .map(|&m| states::ctecs_basis_element(m, a))
            .collect::<Result<Vec<_>>>();
        let raw = states::ctecs_basis_element_raw(l, a)?;
        (
            "cluster",
            raw,
            labels.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
            (elements, labels.iter().position(|&m| m == l).unwrap_or(0)),
            // the nominal 1/2 coefficients already normalize every element
            1.0,
        )
    } else if let Ok(l) = label.parse::<QuasiBellLabel>() {
        let elements = QuasiBellLabel::ALL
            .iter()
            .map(|&m| states::quasi_bell(m, a))
            .collect::<Result<Vec<_>>>();
        let plus = matches!(l, QuasiBellLabel::Phi(true) | QuasiBellLabel::Psi(true));
        (
            "quasi_bell",
            states::quasi_bell_raw(l, a)?,
            QuasiBellLabel::ALL.iter().map(|m| m.to_string()).collect(),
            (
                elements,
                QuasiBellLabel::ALL
                    .iter()
                    .position(|&m| m == l)
                    .unwrap_or(0),
            ),
            states::quasi_bell_constant(plus, a),
        )
    } else {
        return Err(Error::UnknownLabel(label.to_string()));
    };
    let normalization_constant = raw.normalization_constant()?;
    let state = raw.normalize()?;
    let (elements, index) = elements;
    let elements = elements?;
    let n = elements.len();
    let gram = CMatrix::from_fn(n, n, |i, j| {
        elements[i].overlap(&elements[j]).expect("same shape")
    });
    let mut max_off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_off = max_off.max(gram[(i, j)].norm());
            }
        }
    }
    let body = BasisBody {
        label: labels[index].clone(),
        kind,
        alpha,
        raw_norm_sqr: raw.norm_sqr(),
        normalization_constant,
        closed_form_normalization: closed,
        state: state.to_dump(),
        gram_labels: labels.clone(),
        gram: (0..n)
            .map(|i| (0..n).map(|j| gram[(i, j)]).collect())
            .collect(),
        max_offdiagonal: max_off,
    };
    let mut report = Report::new(header(command, &settings, &[])?);
    report.json("basis", &body)?;
    let rows: Vec<Vec<String>> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let g = gram[(i, j)];
            vec![
                labels[i].clone(),
                labels[j].clone(),
                num(g.re),
                num(g.im),
                num(g.norm()),
            ]
        })
        .collect();
    report.csv(
        "gram",
        "ctecs-gram/1",
        &["row", "col", "re", "im", "abs"],
        &[format!(
            "pairwise overlaps of the normalized {kind} basis at alpha = {alpha}"
        )],
        &rows,
    )?;
    let mut s = String::new();
    let _ = writeln!(s, "label: {} ({kind} basis)", body.label);
    let _ = writeln!(s, "alpha: {}", num(alpha));
    let _ = writeln!(s, "branches: {}", state.branches().len());
    let _ = writeln!(s, "raw norm^2: {}", num(body.raw_norm_sqr));
    let _ = writeln!(
        s,
        "normalization constant: {} (closed form {})",
        num(normalization_constant),
        num(closed)
    );
    let _ = writeln!(
        s,
        "gram: {n}x{n}, max off-diagonal |entry| = {}",
        num(max_off)
    );
    report.text("basis", &s);
    Ok(report)
}

const DEFAULT_GRID: [f64; 11] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0];

fn sweep(
    command: &Command,
    settings: Settings,
    quantity: Option<SweepQuantity>,
    alphas: &[f64],
    label: Option<&str>,
    mode: Option<usize>,
) -> Result<Report> {
    use clap::ValueEnum;
    let quantity = match (quantity, settings.sweep.quantity.as_deref()) {
        (Some(q), _) => q,
        (None, Some(s)) => SweepQuantity::from_str(s, true).map_err(|_| {
            Error::Config(format!(
                "sweep.quantity {s:?}: expected fidelity, entropy, overlap or outcome-prob"
            ))
        })?,
        (None, None) => {
            return Err(Error::Config(
                "sweep needs a quantity (--quantity or sweep.quantity)".into(),
            ))
        }
    };
    let grid: Vec<f64> = if !alphas.is_empty() {
        alphas.to_vec()
    } else {
        settings
            .sweep
            .alphas
            .clone()
            .unwrap_or_else(|| DEFAULT_GRID.to_vec())
    };
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if grid.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config("sweep grid values must be finite".into()));
    }
    let label: CtecsLabel = label
        .or(settings.sweep.label.as_deref())
        .unwrap_or("CLUSTER+")
        .parse()?;
    let mode = mode.or(settings.sweep.mode).unwrap_or(0);
    if mode >= 4 {
        return Err(Error::InvalidIndex {
            index: mode,
            len: 4,
        });
    }

    let (columns, note): (&[&str], String) = match quantity {
        SweepQuantity::Overlap => (
            &["alpha", "overlap", "closed_form", "abs_error"],
            "overlap = |<alpha|-alpha>| from the coherent algebra; closed_form = exp(-2 alpha^2)".into(),
        ),
        SweepQuantity::Entropy => (
            &["alpha", "entropy_bits", "closed_form_bits", "lambda_max", "lambda_min"],
            format!("von Neumann entropy of mode {mode} of {label}; closed form from the two-state mixture"),
        ),
        SweepQuantity::Fidelity => (
            &["alpha", "outcome", "outcome_probability", "final_fidelity", "min_checkpoint_fidelity", "min_backend_agreement"],
            format!(
                "protocol runs, {} backend; min_backend_agreement is empty for the analytic backend",
                backend_name(settings.backend)
            ),
        ),
        SweepQuantity::OutcomeProb => (
            &["alpha", "p_gg", "p_ge", "p_eg", "p_ee"],
            "atomic outcome probabilities after the phase gate".into(),
        ),
    };

    let rows = grid
        .par_iter()
        .map(|&alpha| sweep_row(quantity, alpha, &settings, label, mode))
        .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new(header(command, &settings, &[])?);
    let stem = format!("sweep_{}", quantity_name(quantity));
    let json_rows: Vec<serde_json::Map<String, serde_json::Value>> = rows
        .iter()
        .map(|r| {
            columns
                .iter()
                .zip(r)
                .map(|(c, v)| {
                    let value = v
                        .parse::<f64>()
                        .ok()
                        .and_then(serde_json::Number::from_f64)
                        .map(serde_json::Value::Number)
                        .unwrap_or_else(|| {
                            if v.is_empty() {
                                serde_json::Value::Null
                            } else {
                                serde_json::Value::String(v.clone())
                            }
                        });
                    (c.to_string(), value)
                })
                .collect()
        })
        .collect();
    #[derive(Serialize)]
    struct SweepBody<'a> {
        quantity: &'a str,
        note: &'a str,
        columns: &'a [&'a str],
        rows: Vec<serde_json::Map<String, serde_json::Value>>,
    }
    report.json(
        &stem,
        &SweepBody {
            quantity: quantity_name(quantity),
            note: &note,
            columns,
            rows: json_rows,
        },
    )?;
    report.csv(
        &stem,
        "ctecs-sweep/1",
        columns,
        &[format!("columns: {}", columns.join(", ")), note.clone()],
        &rows,
    )?;
    let mut s = String::new();
    let _ = writeln!(s, "{note}");
    let _ = writeln!(
        s,
        "{}",
        columns
            .iter()
            .map(|c| format!("{c:>24}"))
            .collect::<String>()
    );
    for r in &rows {
        let _ = writeln!(
            s,
            "{}",
            r.iter().map(|c| format!("{c:>24}")).collect::<String>()
        );
    }
    report.text(&stem, &s);
    Ok(report)
}

fn quantity_name(q: SweepQuantity) -> &'static str {
    match q {
        SweepQuantity::Fidelity => "fidelity",
        SweepQuantity::Entropy => "entropy",
        SweepQuantity::Overlap => "overlap",
        SweepQuantity::OutcomeProb => "outcome-prob",
    }
}

fn sweep_row(
    q: SweepQuantity,
    alpha: f64,
    settings: &Settings,
    label: CtecsLabel,
    mode: usize,
) -> Result<Vec<String>> {
    let a = Complex64::new(alpha, 0.0);
    Ok(match q {
        SweepQuantity::Overlap => {
            let ov = coherent_overlap(a, -a).norm();
            let closed = (-2.0 * alpha * alpha).exp();
            vec![num(alpha), num(ov), num(closed), num((ov - closed).abs())]
        }
        SweepQuantity::Entropy => {
            let s = states::ctecs_basis_element(label, a)?;
            let spectrum = entanglement_spectrum(&s, &[mode])?;
            let closed = reduced_state_eigenvalues(a);
            vec![
                num(alpha),
                num(von_neumann_entropy(&spectrum)),
                num(von_neumann_entropy(&closed)),
                num(spectrum[0]),
                num(spectrum.get(1).copied().unwrap_or(0.0)),
            ]
        }
        SweepQuantity::Fidelity | SweepQuantity::OutcomeProb => {
            let mut s = settings.clone();
            s.alpha = [alpha, 0.0];
            let record = protocol::run(&s.protocol()?)?;
            if q == SweepQuantity::OutcomeProb {
                std::iter::once(num(alpha))
                    .chain(record.outcome_probabilities.iter().map(|p| num(*p)))
                    .collect()
            } else {
                let final_fid = record
                    .checkpoint("post_measurement")
                    .map(|c| c.target_fidelity)
                    .unwrap_or(f64::NAN);
                let min_fid = record
                    .checkpoints
                    .iter()
                    .map(|c| c.target_fidelity)
                    .fold(f64::INFINITY, f64::min);
                let agreement = record
                    .checkpoints
                    .iter()
                    .filter_map(|c| c.backend_agreement)
                    .reduce(f64::min);
                vec![
                    num(alpha),
                    record.outcome.to_string(),
                    num(record.outcome_probability),
                    num(final_fid),
                    num(min_fid),
                    opt_num(agreement),
                ]
            }
        }
    })
}

/// A bare dump, or an artifact carrying one under "final_state" or "state".
fn load_dump(text: &str) -> Result<StateDump> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Dump(e.to_string()))?;
    let dump = if value.get("format").and_then(|f| f.as_str()) == Some(DUMP_FORMAT) {
        value
    } else if let Some(v) = value.get("final_state").or_else(|| value.get("state")) {
        v.clone()
    } else {
        return Err(Error::Dump(
            "no state dump found (expected a dump, or a \"state\"/\"final_state\" field)".into(),
        ));
    };
    serde_json::from_value(dump).map_err(|e| Error::Dump(e.to_string()))
}

#[derive(Serialize)]
struct BranchProbability {
    branch: &'static str,
    probability: f64,
}

#[derive(Serialize)]
struct MeasureBody {
    scheme: Scheme,
    mode: usize,
    alpha: Complex64,
    sampled: bool,
    branch: &'static str,
    probability: f64,
    branch_probabilities: Vec<BranchProbability>,
    state: StateDump,
}

fn measure(
    command: &Command,
    settings: Settings,
    path: &Path,
    mode: usize,
    alpha: Option<f64>,
    scheme: Scheme,
    branch: Option<BranchArg>,
) -> Result<Report> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let state: CoherentSuperposition = load_dump(&text)?.into_state()?;
    let a = alpha
        .map(|x| Complex64::new(x, 0.0))
        .unwrap_or_else(|| settings.alpha());
    let seed = settings.seed;
    let body = match scheme {
        Scheme::Povm => {
            let choice = match branch {
                None => BranchChoice::Sampled { seed },
                Some(BranchArg::P) => BranchChoice::Forced(PovmBranch::P),
                Some(BranchArg::Q) => BranchChoice::Forced(PovmBranch::Q),
                Some(b) => {
                    return Err(Error::Config(format!(
                        "branch {b:?} belongs to the leak scheme; use p or q"
                    )))
                }
            };
            let m = measurement::measure_mode(&state, mode, &CoherentPovm::new(a), choice)?;
            MeasureBody {
                scheme,
                mode,
                alpha: a,
                sampled: branch.is_none(),
                branch: match m.branch {
                    PovmBranch::P => "p",
                    PovmBranch::Q => "q",
                },
                probability: m.probability,
                branch_probabilities: vec![
                    BranchProbability {
                        branch: "p",
                        probability: m.p_probability,
                    },
                    BranchProbability {
                        branch: "q",
                        probability: m.q_probability,
                    },
                ],
                state: m.state.to_dump(),
            }
        }
        Scheme::Leak => {
            let choice = match branch {
                None => BranchChoice::Sampled { seed },
                Some(BranchArg::Zero) => BranchChoice::Forced(PhotonCount::Zero),
                Some(BranchArg::Nonzero) => BranchChoice::Forced(PhotonCount::Nonzero),
                Some(b) => {
                    return Err(Error::Config(format!(
                        "branch {b:?} belongs to the povm scheme; use zero or nonzero"
                    )))
                }
            };
            let m = measurement::displace_and_leak(&state, mode, a, choice)?;
            MeasureBody {
                scheme,
                mode,
                alpha: a,
                sampled: branch.is_none(),
                branch: match m.photons {
                    PhotonCount::Zero => "zero",
                    PhotonCount::Nonzero => "nonzero",
                },
                probability: m.probability,
                branch_probabilities: vec![
                    BranchProbability {
                        branch: "zero",
                        probability: m.zero_probability,
                    },
                    BranchProbability {
                        branch: "nonzero",
                        probability: 1.0 - m.zero_probability,
                    },
                ],
                state: m.state.to_dump(),
            }
        }
    };
    let mut report = Report::new(header(command, &settings, text.as_bytes())?);
    report.json("measurement", &body)?;
    let rows: Vec<Vec<String>> = body
        .branch_probabilities
        .iter()
        .map(|b| {
            vec![
                b.branch.to_string(),
                num(b.probability),
                (b.branch == body.branch).to_string(),
            ]
        })
        .collect();
    report.csv(
        "measurement",
        "ctecs-measurement/1",
        &["branch", "probability", "selected"],
        &[format!("{:?} measurement of mode {mode}", scheme).to_lowercase()],
        &rows,
    )?;
    let mut s = String::new();
    let _ = writeln!(s, "scheme: {}", format!("{scheme:?}").to_lowercase());
    let _ = writeln!(s, "mode: {mode}");
    let _ = writeln!(s, "alpha: {}", cnum(a));
    for b in &body.branch_probabilities {
        let _ = writeln!(s, "P({}) = {}", b.branch, num(b.probability));
    }
    let how = if body.sampled {
        format!("sampled with seed {seed}")
    } else {
        "forced".into()
    };
    let _ = writeln!(s, "branch: {} ({how})", body.branch);
    let _ = writeln!(
        s,
        "post-measurement branches: {}",
        body.state.branches.len()
    );
    report.text("measurement", &s);
    Ok(report)
}

#[derive(Serialize)]
struct FeasibilityBody {
    source: &'static str,
    report: FeasibilityReport,
    published_comparison: PublishedComparison,
}

fn feasibility_input(settings: &Settings) -> Result<(&'static str, FeasibilityInput)> {
    match &settings.feasibility {
        Some(f) => Ok((
            "config",
            FeasibilityInput {
                g: settings.g,
                g_prime: settings.g_prime,
                delta_big: settings.delta_big,
                detuning: match settings.detuning {
                    GateDetuning::SelfConsistent => DetuningMode::SelfConsistent,
                    GateDetuning::Fixed(d) => DetuningMode::Fixed(d),
                },
                k: settings.k,
                passes_per_atom: f.passes_per_atom.unwrap_or(settings.p),
                t_r: f.t_r,
                t_at: f.t_at,
            },
        )),
        None => Ok((
            "published parameters (Delta = 8 g)",
            diagnostics::published_comparison()?.readings[0]
                .report
                .input
                .clone(),
        )),
    }
}

fn feasibility(command: &Command, settings: Settings) -> Result<Report> {
    let (source, input) = feasibility_input(&settings)?;
    let report_data = diagnostics::feasibility(&input)?;
    let comparison = diagnostics::published_comparison()?;
    let unit = if settings.feasibility.is_some() {
        time_unit(&settings)
    } else {
        "s"
    };

    let mut report = Report::new(header(command, &settings, &[])?);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut push = |src: &str, r: &FeasibilityReport, residuals: Option<[f64; 3]>| {
        let published = diagnostics::PUBLISHED_TIMING;
        let items = [
            ("lambda", r.lam, None, None),
            ("chi", r.chi, None, None),
            ("dispersive_stage", r.stage_times[0].seconds, None, None),
            ("cpg_stage", r.stage_times[1].seconds, None, None),
            (
                "total_time",
                r.total_time,
                Some(published.total_time),
                residuals.map(|x| x[0]),
            ),
            (
                "ratio_r",
                r.ratio_r,
                Some(published.ratio_r),
                residuals.map(|x| x[1]),
            ),
            (
                "ratio_at",
                r.ratio_at,
                Some(published.ratio_at),
                residuals.map(|x| x[2]),
            ),
        ];
        for (name, value, target, residual) in items {
            rows.push(vec![
                src.to_string(),
                name.to_string(),
                num(value),
                opt_num(target),
                opt_num(residual),
            ]);
        }
    };
    push(source, &report_data, None);
    for r in &comparison.readings {
        push(&r.name, &r.report, Some(r.relative_residuals));
    }
    report.csv(
        "feasibility",
        "ctecs-feasibility/1",
        &[
            "source",
            "quantity",
            "value",
            "published",
            "relative_residual",
        ],
        &["frequencies in rad/s and times in s, except config rows in natural units".into()],
        &rows,
    )?;

    let mut s = String::new();
    let _ = writeln!(s, "timing budget ({source})");
    write_report(&mut s, &report_data, unit);
    let _ = writeln!(s);
    let p = comparison.published;
    let _ = writeln!(
        s,
        "published targets: T = {} ms, T_r/T = {}, T_at/T = {} (not independently reproduced)",
        p.total_time * 1e3,
        p.ratio_r,
        p.ratio_at
    );
    for r in &comparison.readings {
        let _ = writeln!(
            s,
            "  reading {:<15} T = {:.4} ms, T_r/T = {:.1}, T_at/T = {:.1}; residuals {:+.3} {:+.3} {:+.3}",
            r.name,
            r.report.total_time * 1e3,
            r.report.ratio_r,
            r.report.ratio_at,
            r.relative_residuals[0],
            r.relative_residuals[1],
            r.relative_residuals[2]
        );
    }
    let _ = writeln!(s, "note: {}", comparison.note);
    report.text("feasibility", &s);
    report.json(
        "feasibility",
        &FeasibilityBody {
            source,
            report: report_data,
            published_comparison: comparison,
        },
    )?;
    Ok(report)
}

fn write_report(s: &mut String, r: &FeasibilityReport, unit: &str) {
    let _ = writeln!(s, "  lambda = g^2/Delta = {}", num(r.lam));
    let _ = writeln!(
        s,
        "  chi = {}, delta = {}, Omega = {}",
        num(r.chi),
        num(r.delta_small),
        num(r.omega_drive)
    );
    for st in &r.stage_times {
        let _ = writeln!(
            s,
            "  {:<10} {:<22} {} {unit}",
            st.stage,
            st.formula,
            num(st.seconds)
        );
    }
    let _ = writeln!(s, "  total T = {} {unit}", num(r.total_time));
    let _ = writeln!(s, "  T_r/T = {:.2}, T_at/T = {:.2}", r.ratio_r, r.ratio_at);
    for n in &r.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    for w in &r.warnings {
        let _ = writeln!(s, "  warning: {w}");
    }
}

/// One line of the self-test.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub relation: &'static str,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            relation: "<=",
            tolerance,
            pass: value <= tolerance,
        }
    }

    fn above(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            relation: ">",
            tolerance: bound,
            pass: value > bound,
        }
    }
}

#[derive(Serialize)]
struct SelftestBody {
    checks: Vec<Check>,
    dispersive_validation: Vec<hamiltonians::DispersiveValidation>,
    passed: bool,
}

/// Cross-backend oracles: Fock against the coherent algebra, the driven gate against its
/// effective propagator, and the full Jaynes–Cummings evolution against the dispersive one.
fn selftest(command: &Command, settings: Settings) -> Result<Report> {
    let mut checks = Vec::new();

    let a = Complex64::new(3.0, 0.0);
    let n = fock::truncation_rule(3.0);
    let exact = (-18.0f64).exp();
    let fock_ov = fock::coherent_fock(a, n)?
        .inner(&fock::coherent_fock(-a, n)?)?
        .norm();
    checks.push(Check::at_most(
        "overlap_decay_fock_abs_error",
        (fock_ov - exact).abs(),
        1e-10,
    ));
    let algebra_ov = coherent_overlap(a, -a).norm();
    checks.push(Check::at_most(
        "overlap_decay_algebra_rel_error",
        (algebra_ov - exact).abs() / exact,
        1e-12,
    ));

    let gate = CpgParams::self_consistent(1.0, 1)?;
    let truth = CMatrix::from_fn(4, 4, |r, c| Complex64::new(CPG_TRUTH_TABLE[r][c], 0.0));
    let u = hamiltonians::cpg_propagator(&gate)?;
    checks.push(Check::at_most(
        "cpg_truth_table_deviation",
        hamiltonians::deviation_up_to_phase(u.entries(), &truth),
        1e-10,
    ));
    let driven = hamiltonians::validate_driven_gate(&gate, 12, 4000)?;
    checks.push(Check::at_most("driven_gate_infidelity", 1.0 - driven, 1e-6));

    let record =
        protocol::run(&ProtocolConfig::new(Complex64::new(1.0, 0.0)).with_backend(Backend::Fock))?;
    let disagreement = record
        .checkpoints
        .iter()
        .filter_map(|c| c.backend_agreement)
        .map(|f| (1.0 - f).abs())
        .fold(0.0, f64::max);
    let covered = CHECKPOINTS.iter().all(|n| {
        record
            .checkpoint(n)
            .and_then(|c| c.backend_agreement)
            .is_some()
    });
    checks.push(Check::at_most(
        "protocol_fock_vs_exact_infidelity",
        if covered { disagreement } else { f64::INFINITY },
        1e-6,
    ));
    let target = record
        .checkpoints
        .iter()
        .map(|c| (1.0 - c.target_fidelity).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most(
        "protocol_fock_target_infidelity",
        target,
        1e-6,
    ));

    let povm = CoherentPovm::new(Complex64::new(1.0, 0.0));
    checks.push(Check::at_most(
        "povm_completeness",
        povm.completeness_deviation(fock::truncation_rule(1.0))?,
        1e-10,
    ));

    let validation = [4.0, 8.0, 16.0]
        .iter()
        .map(|&r| hamiltonians::validate_dispersive_approx(1.0, r, 1.0, fock::truncation_rule(1.0)))
        .collect::<Result<Vec<_>>>()?;
    let step = validation
        .windows(2)
        .map(|w| w[1].fidelity - w[0].fidelity)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::above("dispersive_fidelity_min_increment", step, 0.0));

    let passed = checks.iter().all(|c| c.pass);
    let mut report = Report::new(header(command, &settings, &[])?);
    report.exit_code = if passed {
        0
    } else {
        Error::Invariant(String::new()).exit_code()
    };
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                num(c.value),
                c.relation.to_string(),
                num(c.tolerance),
                if c.pass { "PASS" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    report.csv(
        "selftest",
        "ctecs-selftest/1",
        &["check", "value", "relation", "tolerance", "result"],
        &[],
        &rows,
    )?;
    let mut s = String::new();
    for c in &checks {
        let _ = writeln!(
            s,
            "{} {:<36} {:>12} {} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            format!("{:.3e}", c.value),
            c.relation,
            num(c.tolerance)
        );
    }
    let _ = writeln!(
        s,
        "dispersive approximation, alpha = 1, one pass (reported):"
    );
    for v in &validation {
        let _ = writeln!(s, "  Delta/g = {:>4}  fidelity {:.9}", v.ratio, v.fidelity);
    }
    let _ = writeln!(
        s,
        "{}",
        if passed {
            "all checks passed"
        } else {
            "some checks FAILED"
        }
    );
    report.text("selftest", &s);
    report.json(
        "selftest",
        &SelftestBody {
            checks,
            dispersive_validation: validation,
            passed,
        },
    )?;
    Ok(report)
}
