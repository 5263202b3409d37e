//! TOML run configuration. Every dimensionful quantity is a string "<value> <unit>";
//! bare numbers are rejected so a 2π convention can never be guessed.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent::AtomPair;
use crate::error::{Error, Result};
use crate::fock::DEFAULT_MEMORY_BUDGET;
use crate::hamiltonians::{CpgParams, DispersiveParams};
use crate::protocol::{AtomMeasurement, Backend, ProtocolConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    /// Frequencies in units of a reference coupling, times in its inverse.
    Natural,
    /// rad/s and seconds.
    Si,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub system: UnitSystem,
}

const FREQUENCY_UNITS: [(&str, f64); 9] = [
    ("rad_per_s", 1.0),
    ("krad_per_s", 1e3),
    ("Mrad_per_s", 1e6),
    ("Hz_linear", 2.0 * PI),
    ("kHz_linear", 2.0 * PI * 1e3),
    ("MHz_linear", 2.0 * PI * 1e6),
    ("Hz_angular", 1.0),
    ("kHz_angular", 1e3),
    ("MHz_angular", 1e6),
];

const TIME_UNITS: [(&str, f64); 3] = [("s", 1.0), ("ms", 1e-3), ("us", 1e-6)];

fn split_quantity(field: &str, text: &str) -> Result<(f64, String)> {
    let mut parts = text.split_whitespace();
    let (Some(v), Some(u), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Config(format!(
            "{field}: expected \"<value> <unit>\", got {text:?}"
        )));
    };
    let value: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("{field}: {v:?} is not a number")))?;
    if !value.is_finite() {
        return Err(Error::Config(format!("{field}: value must be finite")));
    }
    Ok((value, u.to_string()))
}

/// Angular frequency. Units are matched case-sensitively: "mHz" is not "MHz".
pub fn parse_frequency(field: &str, text: &str) -> Result<Quantity> {
    let (value, unit) = split_quantity(field, text)?;
    if unit == "natural" {
        return Ok(Quantity {
            value,
            system: UnitSystem::Natural,
        });
    }
    FREQUENCY_UNITS
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| Quantity {
            value: value * f,
            system: UnitSystem::Si,
        })
        .ok_or_else(|| {
            let known: Vec<_> = FREQUENCY_UNITS.iter().map(|(u, _)| *u).collect();
            Error::Config(format!(
                "{field}: unknown frequency unit {unit:?} (expected one of {}, natural)",
                known.join(", ")
            ))
        })
}

pub fn parse_time(field: &str, text: &str) -> Result<Quantity> {
    let (value, unit) = split_quantity(field, text)?;
    if unit == "natural" {
        return Ok(Quantity {
            value,
            system: UnitSystem::Natural,
        });
    }
    TIME_UNITS
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| Quantity {
            value: value * f,
            system: UnitSystem::Si,
        })
        .ok_or_else(|| {
            Error::Config(format!(
                "{field}: unknown time unit {unit:?} (expected s, ms, us, natural)"
            ))
        })
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub state: RawState,
    #[serde(default)]
    pub backend: RawBackend,
    #[serde(default)]
    pub dispersive: RawDispersive,
    #[serde(default)]
    pub gate: RawGate,
    #[serde(default)]
    pub measurement: RawMeasurement,
    pub feasibility: Option<RawFeasibility>,
    #[serde(default)]
    pub sweep: RawSweep,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawState {
    pub alpha: Option<f64>,
    pub alpha_im: Option<f64>,
    pub p: Option<u32>,
    pub signs: Option<Vec<i8>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBackend {
    pub kind: Option<String>,
    pub memory_budget: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDispersive {
    pub g: Option<String>,
    pub delta_big: Option<String>,
    pub delta_over_g: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGate {
    pub g_prime: Option<String>,
    /// "self_consistent" or a frequency.
    pub detuning: Option<String>,
    pub drive: Option<String>,
    pub k: Option<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMeasurement {
    /// "gg", "ge", "eg", "ee" or "sampled".
    pub outcome: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFeasibility {
    pub t_r: String,
    pub t_at: String,
    pub passes_per_atom: Option<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub quantity: Option<String>,
    pub alphas: Option<Vec<f64>>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub steps: Option<usize>,
    pub label: Option<String>,
    pub mode: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Forced(AtomPair),
    Sampled,
}

/// Gate detuning after unit resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDetuning {
    SelfConsistent,
    Fixed(f64),
}

/// Fully resolved settings; their canonical JSON is what the config hash covers.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub units: UnitSystem,
    pub alpha: [f64; 2],
    pub p: u32,
    pub signs: Vec<i8>,
    pub backend: Backend,
    pub memory_budget: usize,
    pub g: f64,
    pub delta_big: f64,
    pub g_prime: f64,
    pub detuning: GateDetuning,
    pub drive: Option<f64>,
    pub k: u32,
    pub outcome: Outcome,
    pub seed: u64,
    pub feasibility: Option<FeasibilitySettings>,
    pub sweep: RawSweepSettings,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilitySettings {
    pub t_r: f64,
    pub t_at: f64,
    pub passes_per_atom: Option<u32>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RawSweepSettings {
    pub quantity: Option<String>,
    pub alphas: Option<Vec<f64>>,
    pub label: Option<String>,
    pub mode: Option<usize>,
}

fn join_system(field: &str, current: &mut Option<UnitSystem>, q: Quantity) -> Result<f64> {
    match current {
        Some(s) if *s != q.system => Err(Error::Config(format!(
            "{field}: mixes natural and physical units; use one system throughout"
        ))),
        _ => {
            *current = Some(q.system);
            Ok(q.value)
        }
    }
}

pub fn parse_outcome(text: &str) -> Result<Outcome> {
    if text.eq_ignore_ascii_case("sampled") {
        return Ok(Outcome::Sampled);
    }
    text.parse::<AtomPair>().map(Outcome::Forced).map_err(|_| {
        Error::Config(format!(
            "outcome {text:?}: expected gg, ge, eg, ee or sampled"
        ))
    })
}

pub fn parse_backend(text: &str) -> Result<Backend> {
    match text.to_ascii_lowercase().as_str() {
        "analytic" => Ok(Backend::Analytic),
        "fock" => Ok(Backend::Fock),
        _ => Err(Error::Config(format!(
            "backend {text:?}: expected analytic or fock"
        ))),
    }
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self) -> Result<Settings> {
        let mut system = None;
        let g = match &self.dispersive.g {
            Some(s) => join_system(
                "dispersive.g",
                &mut system,
                parse_frequency("dispersive.g", s)?,
            )?,
            None => join_system(
                "dispersive.g",
                &mut system,
                Quantity {
                    value: 1.0,
                    system: UnitSystem::Natural,
                },
            )?,
        };
        let delta_big = match (&self.dispersive.delta_big, self.dispersive.delta_over_g) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dispersive: give delta_big or delta_over_g, not both".into(),
                ))
            }
            (Some(s), None) => join_system(
                "dispersive.delta_big",
                &mut system,
                parse_frequency("dispersive.delta_big", s)?,
            )?,
            (None, Some(r)) => r * g,
            (None, None) => 8.0 * g,
        };
        let g_prime = match &self.gate.g_prime {
            Some(s) => join_system(
                "gate.g_prime",
                &mut system,
                parse_frequency("gate.g_prime", s)?,
            )?,
            None => g,
        };
        let detuning = match self.gate.detuning.as_deref() {
            None | Some("self_consistent") => GateDetuning::SelfConsistent,
            Some(s) => GateDetuning::Fixed(join_system(
                "gate.detuning",
                &mut system,
                parse_frequency("gate.detuning", s)?,
            )?),
        };
        let drive = match &self.gate.drive {
            Some(s) => Some(join_system(
                "gate.drive",
                &mut system,
                parse_frequency("gate.drive", s)?,
            )?),
            None => None,
        };
        let feasibility = match &self.feasibility {
            Some(f) => Some(FeasibilitySettings {
                t_r: join_system(
                    "feasibility.t_r",
                    &mut system,
                    parse_time("feasibility.t_r", &f.t_r)?,
                )?,
                t_at: join_system(
                    "feasibility.t_at",
                    &mut system,
                    parse_time("feasibility.t_at", &f.t_at)?,
                )?,
                passes_per_atom: f.passes_per_atom,
            }),
            None => None,
        };
        let p = self.state.p.unwrap_or(2);
        let signs = self
            .state
            .signs
            .clone()
            .unwrap_or_else(|| vec![1; 2 * p as usize]);
        let alpha = [
            self.state.alpha.unwrap_or(1.0),
            self.state.alpha_im.unwrap_or(0.0),
        ];
        let backend = parse_backend(self.backend.kind.as_deref().unwrap_or("analytic"))?;
        let outcome = parse_outcome(self.measurement.outcome.as_deref().unwrap_or("gg"))?;
        let alphas = match (
            &self.sweep.alphas,
            self.sweep.alpha_min,
            self.sweep.alpha_max,
            self.sweep.steps,
        ) {
            (Some(_), Some(_), _, _) | (Some(_), _, Some(_), _) => {
                return Err(Error::Config(
                    "sweep: give alphas or alpha_min/alpha_max/steps, not both".into(),
                ))
            }
            (Some(a), None, None, _) => Some(a.clone()),
            (None, Some(lo), Some(hi), Some(n)) => Some(linear_grid(lo, hi, n)?),
            (None, None, None, None) => None,
            _ => {
                return Err(Error::Config(
                    "sweep: alpha_min, alpha_max and steps go together".into(),
                ))
            }
        };
        Ok(Settings {
            units: system.unwrap_or(UnitSystem::Natural),
            alpha,
            p,
            signs,
            backend,
            memory_budget: self.backend.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET),
            g,
            delta_big,
            g_prime,
            detuning,
            drive,
            k: self.gate.k.unwrap_or(1),
            outcome,
            seed: self.measurement.seed.unwrap_or(0),
            feasibility,
            sweep: RawSweepSettings {
                quantity: self.sweep.quantity.clone(),
                alphas,
                label: self.sweep.label.clone(),
                mode: self.sweep.mode,
            },
        })
    }
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    match steps {
        0 => Err(Error::Config("grid needs at least one point".into())),
        1 => Ok(vec![lo]),
        n => Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

impl Settings {
    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.alpha[0], self.alpha[1])
    }

    pub fn cpg(&self) -> Result<CpgParams> {
        let base = match self.detuning {
            GateDetuning::SelfConsistent => CpgParams::self_consistent(self.g_prime, self.k)?,
            GateDetuning::Fixed(d) => CpgParams::with_detuning(self.g_prime, d, self.k)?,
        };
        match self.drive {
            Some(omega) => CpgParams::new(self.g_prime, base.delta_small, omega, self.k),
            None => Ok(base),
        }
    }

    pub fn dispersive(&self) -> Result<DispersiveParams> {
        DispersiveParams::new(self.g, self.delta_big)
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let measurement = match self.outcome {
            Outcome::Forced(o) => AtomMeasurement::Forced(o),
            Outcome::Sampled => AtomMeasurement::Sampled { seed: self.seed },
        };
        let mut config = ProtocolConfig::new(self.alpha())
            .with_p(self.p)
            .with_backend(self.backend)
            .with_measurement(measurement)
            .with_signs(&self.signs);
        config.dispersive = self.dispersive()?;
        config.cpg = self.cpg()?;
        config.memory_budget = self.memory_budget;
        Ok(config)
    }
}
