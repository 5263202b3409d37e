//! The `ctecs` command line: config-driven protocol runs, basis tables, sweeps,
//! measurement on dumped states, the timing budget and the cross-backend self-test.
//!
//! Every artifact starts with the tool version, a SHA-256 of the resolved settings and
//! the seed, and contains nothing run-dependent beyond that, so identical inputs give
//! byte-identical files.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use config::{RawConfig, Settings};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "ctecs",
    version,
    about = "Cluster-type entangled coherent states: generation, bases, diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration; quantities need explicit units such as "25 kHz_linear".
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for sampled measurement outcomes (overrides measurement.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,

    /// Write artifacts and a run manifest into this directory instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub emit: Vec<Emit>,
}

#[derive(Clone, Debug, Serialize, Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Run the generation protocol and write its record.
    Generate {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<u32>,
        /// gg, ge, eg, ee or sampled.
        #[arg(long)]
        outcome: Option<String>,
    },
    /// Build one basis element and the Gram matrix of its basis.
    Basis {
        /// CLUSTER+, C-, ..., R- or PHI+, PHI-, PSI+, PSI-.
        #[arg(long)]
        label: String,
        #[arg(long)]
        alpha: f64,
    },
    /// Tabulate a quantity over a grid of coherent amplitudes.
    Sweep {
        #[arg(long, value_enum)]
        quantity: Option<SweepQuantity>,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Basis element for the entropy sweep.
        #[arg(long)]
        label: Option<String>,
        /// Mode kept by the entropy sweep.
        #[arg(long)]
        mode: Option<usize>,
    },
    /// Measure one mode of a dumped state.
    Measure {
        /// State dump, or any artifact holding one under "state" or "final_state".
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        mode: usize,
        /// Reference amplitude of the projector; defaults to state.alpha.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value = "povm")]
        scheme: Scheme,
        /// p or q for the POVM, zero or nonzero for the leak; sampled when omitted.
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
    },
    /// Protocol timing budget against the cavity and atom lifetimes.
    Feasibility,
    /// Cross-backend oracle suite.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Basis { .. } => "basis",
            Command::Sweep { .. } => "sweep",
            Command::Measure { .. } => "measure",
            Command::Feasibility => "feasibility",
            Command::Selftest => "selftest",
        }
    }

    fn default_emit(&self) -> Emit {
        match self {
            Command::Sweep { .. } => Emit::Csv,
            _ => Emit::Text,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Analytic,
    Fock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
    Text,
}

impl Emit {
    fn extension(self) -> &'static str {
        match self {
            Emit::Csv => "csv",
            Emit::Json => "json",
            Emit::Text => "txt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepQuantity {
    Fidelity,
    Entropy,
    Overlap,
    OutcomeProb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Povm,
    Leak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    P,
    Q,
    Zero,
    Nonzero,
}

/// Identity stamped on every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct ArtifactHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactHeader {
    fn comment_lines(&self) -> String {
        format!(
            "# {} {}\n# command: {}\n# config_hash: {}\n# seed: {}\n",
            self.tool, self.version, self.command, self.config_hash, self.seed
        )
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    artifact: &'a ArtifactHeader,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Clone, Debug)]
pub struct Artifact {
    pub stem: String,
    pub emit: Emit,
    pub content: String,
}

impl Artifact {
    pub fn file_name(&self) -> String {
        format!("{}.{}", self.stem, self.emit.extension())
    }
}

/// What a command produced, in every format, plus its exit status.
#[derive(Clone, Debug)]
pub struct Report {
    pub header: ArtifactHeader,
    pub artifacts: Vec<Artifact>,
    pub exit_code: i32,
}

impl Report {
    fn new(header: ArtifactHeader) -> Self {
        Self {
            header,
            artifacts: Vec::new(),
            exit_code: 0,
        }
    }

    fn json<T: Serialize>(&mut self, stem: &str, body: &T) -> Result<()> {
        let mut content = serde_json::to_string_pretty(&Envelope {
            artifact: &self.header,
            body,
        })?;
        content.push('\n');
        self.artifacts.push(Artifact {
            stem: stem.into(),
            emit: Emit::Json,
            content,
        });
        Ok(())
    }

    fn text(&mut self, stem: &str, body: &str) {
        let content = format!("{}{}", self.header.comment_lines(), body);
        self.artifacts.push(Artifact {
            stem: stem.into(),
            emit: Emit::Text,
            content,
        });
    }

    /// CSV with the header comments, a format tag and a column description first.
    fn csv(
        &mut self,
        stem: &str,
        format: &str,
        columns: &[&str],
        notes: &[String],
        rows: &[Vec<String>],
    ) -> Result<()> {
        let mut content = self.header.comment_lines();
        content.push_str(&format!("# format: {format}\n"));
        for n in notes {
            content.push_str(&format!("# {n}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns)
            .map_err(crate::diagnostics::csv_err)?;
        for r in rows {
            w.write_record(r).map_err(crate::diagnostics::csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Invariant(e.to_string()))?;
        content.push_str(&String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))?);
        self.artifacts.push(Artifact {
            stem: stem.into(),
            emit: Emit::Csv,
            content,
        });
        Ok(())
    }

    pub fn artifact(&self, emit: Emit) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.emit == emit)
    }
}

/// Everything about the invocation, written next to the artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Option<PathBuf>,
    pub config_hash: String,
    pub seed: u64,
    pub output_directory: PathBuf,
    pub backend: crate::protocol::Backend,
    pub emit: Vec<Emit>,
    pub files: Vec<String>,
}

/// Resolve settings from the config file and global flags.
pub fn settings(cli: &Cli) -> Result<Settings> {
    let raw = match &cli.config {
        Some(path) => RawConfig::from_path(path)?,
        None => RawConfig::default(),
    };
    let mut s = raw.resolve()?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(b) = cli.backend {
        s.backend = match b {
            BackendArg::Analytic => crate::protocol::Backend::Analytic,
            BackendArg::Fock => crate::protocol::Backend::Fock,
        };
    }
    Ok(s)
}

/// SHA-256 over the canonical JSON of the resolved settings, the subcommand with its
/// arguments, and any extra input bytes.
pub fn config_hash(settings: &Settings, command: &Command, extra: &[u8]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(settings)?);
    h.update(b"\n");
    h.update(serde_json::to_vec(command)?);
    h.update(b"\n");
    h.update(extra);
    Ok(format!("{:x}", h.finalize()))
}

/// Run the parsed command and build every artifact; nothing is written.
pub fn execute(cli: &Cli) -> Result<Report> {
    let settings = settings(cli)?;
    commands::dispatch(&cli.command, settings)
}

fn deliver(cli: &Cli, report: &Report, settings_backend: crate::protocol::Backend) -> Result<()> {
    let requested: Vec<Emit> = if !cli.emit.is_empty() {
        cli.emit.clone()
    } else if cli.out.is_some() {
        vec![Emit::Json, Emit::Csv, Emit::Text]
    } else {
        vec![cli.command.default_emit()]
    };
    let chosen: Vec<&Artifact> = requested
        .iter()
        .filter_map(|&e| report.artifact(e))
        .collect();
    match &cli.out {
        None => {
            for a in chosen {
                print!("{}", a.content);
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut files = Vec::new();
            for a in &chosen {
                std::fs::write(dir.join(a.file_name()), &a.content)?;
                files.push(a.file_name());
            }
            let manifest = RunManifest {
                tool: report.header.tool,
                version: report.header.version,
                command: report.header.command,
                config: cli.config.clone(),
                config_hash: report.header.config_hash.clone(),
                seed: report.header.seed,
                output_directory: dir.clone(),
                backend: settings_backend,
                emit: requested,
                files: files.clone(),
            };
            let mut text = serde_json::to_string_pretty(&manifest)?;
            text.push('\n');
            std::fs::write(dir.join("manifest.json"), text)?;
            match report.artifact(Emit::Text) {
                Some(t) => print!("{}", t.content),
                None => {
                    for f in files {
                        println!("{}", dir.join(f).display());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Parse arguments, run, print; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = settings(&cli).and_then(|s| {
        let backend = s.backend;
        let report = commands::dispatch(&cli.command, s)?;
        deliver(&cli, &report, backend)?;
        Ok(report.exit_code)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
