//! The `evoalg` command line.
//!
//! Every subcommand takes the same flags; `--kernel` consumes all following
//! words up to the next flag, so `--kernel builtin renewal geometric 0.5`
//! works unquoted. Positional operands of `product` and `square` therefore
//! go before `--kernel`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use evoalg_core::markov::{
    evolve_distribution, nstep_oracle, to_structure_map, validate_kernel, Distribution, MarkovMap, TransitionKernel,
    Violation,
};
use evoalg_core::{
    certify_hilbert_schmidt, certify_rowsum, certify_schur, product, square_basis, Element, ExplicitWeights,
    TruncationPolicy, UnitWeights,
};

use crate::format::{parse_distribution, parse_element, parse_kernel, write_element, write_table_tsv, ParseError};
use crate::kernel::{Kernel, DEFAULT_MAX_POPULATION};
use crate::parallel::simulate_parallel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TAIL: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Schur,
    Hs,
    Rowsum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Tsv,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the first `cutoff` rows of a kernel.
    Validate,
    /// Certify that the evolution operator is bounded.
    Certify,
    /// Law of X_n from the law of X_0, through the algebra.
    Evolve,
    /// n-step transition probabilities from a single state.
    Nstep,
    /// Monte Carlo frequencies of X_n.
    Simulate,
    /// `evolve` against `simulate`, state by state.
    Compare,
    /// The product v · w in the evolution algebra of the kernel.
    Product {
        /// File in element format, or `basis:<i>`.
        v: String,
        /// File in element format, or `basis:<i>`.
        w: String,
    },
    /// e_i · e_i.
    Square { i: usize },
}

#[derive(Debug, Parser)]
#[command(name = "evoalg", version, about = "Hilbert evolution algebras of countable Markov chains")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Kernel file, or `builtin <family> <parameters...>`.
    #[arg(long, global = true, num_args = 1.., value_name = "PATH|builtin ...")]
    kernel: Option<Vec<String>>,
    #[arg(long, global = true, default_value_t = 64)]
    cutoff: usize,
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long = "max-tail", global = true, default_value_t = 1e-6)]
    max_tail: f64,
    #[arg(long, global = true, value_enum, default_value_t = Method::Schur)]
    method: Method,
    /// Schur weights α in element format; the tail line sets the weight of
    /// every unlisted index.
    #[arg(long, global = true)]
    alpha: Option<PathBuf>,
    #[arg(long, global = true)]
    beta: Option<PathBuf>,
    /// Distribution file or `basis:<i>`.
    #[arg(long, global = true)]
    init: Option<String>,
    #[arg(long, global = true, default_value_t = 1)]
    steps: usize,
    #[arg(long, global = true, default_value_t = 10_000)]
    paths: u64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    output: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelSource {
    Builtin(Vec<String>),
    Path(PathBuf),
}

/// A vector operand: a file or a basis vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorSource {
    Basis(usize),
    Path(PathBuf),
}

impl VectorSource {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s.strip_prefix("basis:") {
            Some(i) => {
                i.parse().map(VectorSource::Basis).map_err(|_| CliError::Usage(format!("`{s}` is not `basis:<index>`")))
            }
            None => Ok(VectorSource::Path(PathBuf::from(s))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub kernel: Option<KernelSource>,
    pub policy: TruncationPolicy,
    pub method: Method,
    pub alpha: Option<PathBuf>,
    pub beta: Option<PathBuf>,
    pub init: Option<VectorSource>,
    pub steps: usize,
    pub paths: u64,
    pub seed: u64,
    pub output: OutputFormat,
}

impl RunConfig {
    /// Parses a full argument list, program name first.
    pub fn from_args<I, T>(args: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let a = Args::try_parse_from(args)?;
        let policy = TruncationPolicy::new(a.cutoff, a.tol, a.max_tail).map_err(|e| CliError::Usage(e.to_string()))?;
        let kernel = match a.kernel {
            None => None,
            Some(words) if words.first().is_some_and(|w| w == "builtin") => {
                Some(KernelSource::Builtin(words[1..].to_vec()))
            }
            Some(words) if words.len() == 1 => Some(KernelSource::Path(PathBuf::from(&words[0]))),
            Some(words) => {
                return Err(CliError::Usage(format!(
                    "`--kernel {}` is neither a path nor `builtin ...`",
                    words.join(" ")
                )))
            }
        };
        let init = a.init.as_deref().map(VectorSource::parse).transpose()?;
        if matches!(a.command, Command::Simulate | Command::Compare) && a.paths == 0 {
            return Err(CliError::Usage("--paths must be at least 1".into()));
        }
        Ok(RunConfig {
            command: a.command,
            kernel,
            policy,
            method: a.method,
            alpha: a.alpha,
            beta: a.beta,
            init,
            steps: a.steps,
            paths: a.paths,
            seed: a.seed,
            output: a.output,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{0}")]
    Core(#[from] evoalg_core::Error),
}

fn core_status(e: &evoalg_core::Error) -> i32 {
    use evoalg_core::Error::*;
    match e {
        TailTooLarge { .. } => EXIT_TAIL,
        NotMarkov { .. } | InvalidParameter(_) | InvalidWeights { .. } => EXIT_VALIDATION,
        DuplicateIndex(_) => EXIT_PARSE,
        _ => EXIT_OTHER,
    }
}

impl CliError {
    pub fn status(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => EXIT_OK,
            CliError::Clap(_) | CliError::Usage(_) | CliError::Io { .. } => EXIT_PARSE,
            CliError::Parse { source: ParseError::Invalid(e), .. } => match core_status(e) {
                EXIT_OTHER => EXIT_PARSE,
                s => s,
            },
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Core(e) => core_status(e),
        }
    }
}

/// Exit status and the text for stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn failed(e: &CliError) -> Self {
        let status = e.status();
        match e {
            CliError::Clap(c) if status == EXIT_OK => Outcome { status, stdout: c.to_string(), stderr: String::new() },
            CliError::Clap(c) => Outcome { status, stdout: String::new(), stderr: c.to_string() },
            _ => Outcome { status, stdout: String::new(), stderr: format!("error: {e}\n") },
        }
    }
}

/// Parses and runs; what the binary does.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::from_args(args) {
        Ok(config) => run(&config),
        Err(e) => Outcome::failed(&e),
    }
}

pub fn run(config: &RunConfig) -> Outcome {
    match execute(config) {
        Ok((status, stdout)) => Outcome { status, stdout, stderr: String::new() },
        Err(e) => Outcome::failed(&e),
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn parsed<T>(path: &Path, r: Result<T, ParseError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Parse { path: path.display().to_string(), source })
}

fn load_kernel(config: &RunConfig) -> Result<Kernel, CliError> {
    match &config.kernel {
        None => Err(CliError::Usage("this command needs --kernel".into())),
        Some(KernelSource::Builtin(words)) => {
            let words: Vec<&str> = words.iter().map(String::as_str).collect();
            crate::format::parse_builtin(&words, DEFAULT_MAX_POPULATION)
                .map_err(|source| CliError::Parse { path: "--kernel".into(), source })
        }
        Some(KernelSource::Path(p)) => parsed(p, parse_kernel(&read(p)?, DEFAULT_MAX_POPULATION)),
    }
}

fn load_vector(source: &VectorSource) -> Result<Element, CliError> {
    match source {
        VectorSource::Basis(i) => Ok(Element::basis(*i)),
        VectorSource::Path(p) => parsed(p, parse_element(&read(p)?)),
    }
}

fn load_init(config: &RunConfig) -> Result<Distribution, CliError> {
    match config.init.as_ref().unwrap_or(&VectorSource::Basis(0)) {
        VectorSource::Basis(i) => Ok(Distribution::point_mass(*i)),
        VectorSource::Path(p) => parsed(p, parse_distribution(&read(p)?, config.policy.abs_tol())),
    }
}

fn describe_violation(v: &Violation) -> (usize, String) {
    match *v {
        Violation::EntryOutOfRange { state, target, p } => (state, format!("p({state},{target}) = {p} outside [0, 1]")),
        Violation::UnsortedOrDuplicate { state, target } => {
            (state, format!("target {target} repeated or out of order"))
        }
        Violation::RowMass { state, mass } => (state, format!("row mass {mass} differs from 1")),
        Violation::RowSum { state, sum } => (state, format!("row sums to {sum}")),
    }
}

fn execute(config: &RunConfig) -> Result<(i32, String), CliError> {
    let policy = &config.policy;
    let kernel = load_kernel(config)?;
    let tsv = config.output == OutputFormat::Tsv;
    let mut out = String::new();
    match &config.command {
        Command::Validate => {
            let report = validate_kernel(&kernel, policy.cutoff(), policy);
            if tsv {
                for v in &report.violations {
                    let (state, what) = describe_violation(v);
                    writeln!(out, "{state}\t{what}").unwrap();
                }
                writeln!(out, "#checked {}", report.states_checked).unwrap();
            } else if report.is_valid() {
                writeln!(out, "VALID {}: {} states checked", kernel.description(), report.states_checked).unwrap();
            } else {
                writeln!(out, "INVALID {}: {} violation(s)", kernel.description(), report.violations.len()).unwrap();
                for v in &report.violations {
                    writeln!(out, "  state {}: {}", describe_violation(v).0, describe_violation(v).1).unwrap();
                }
            }
            let status = if report.is_valid() { EXIT_OK } else { EXIT_VALIDATION };
            return Ok((status, out));
        }
        Command::Certify => {
            let map = to_structure_map(&kernel, policy)?;
            let cert = match config.method {
                Method::Hs => certify_hilbert_schmidt(&map, policy),
                Method::Rowsum => certify_rowsum(&map, policy)?,
                Method::Schur => {
                    let weights = |p: &Option<PathBuf>| -> Result<Option<ExplicitWeights>, CliError> {
                        p.as_ref()
                            .map(|p| {
                                load_vector(&VectorSource::Path(p.clone())).map(|e| ExplicitWeights::from_element(&e))
                            })
                            .transpose()
                    };
                    match (weights(&config.alpha)?, weights(&config.beta)?) {
                        (None, None) => certify_schur(&map, &UnitWeights, &UnitWeights, policy)?,
                        (Some(a), None) => certify_schur(&map, &a, &UnitWeights, policy)?,
                        (None, Some(b)) => certify_schur(&map, &UnitWeights, &b, policy)?,
                        (Some(a), Some(b)) => certify_schur(&map, &a, &b, policy)?,
                    }
                }
            };
            writeln!(out, "{cert}").unwrap();
        }
        Command::Evolve => {
            let map = to_structure_map(&kernel, policy)?;
            let d = evolve_distribution(&map, &load_init(config)?, config.steps, policy)?;
            write_law(
                &mut out,
                tsv,
                &format!("law of X_{} under {}", config.steps, kernel.description()),
                d.underlying().iter(),
                d.mass_deficit(),
            );
        }
        Command::Nstep => {
            let from = match config.init.as_ref().unwrap_or(&VectorSource::Basis(0)) {
                VectorSource::Basis(i) => *i,
                VectorSource::Path(_) => return Err(CliError::Usage("nstep needs --init basis:<i>".into())),
            };
            let t = nstep_oracle(&kernel, from, config.steps, policy)?;
            let title = format!("p^({})({from}, k) under {}", config.steps, kernel.description());
            write_law(&mut out, tsv, &title, t.probabilities.iter().map(|(&k, &p)| (k, p)), t.deficit);
        }
        Command::Simulate => {
            let s = simulate_parallel(&kernel, &load_init(config)?, config.steps, config.paths, config.seed, policy)?;
            if tsv {
                for (&k, &c) in &s.counts {
                    writeln!(out, "{k}\t{}", c as f64 / s.paths as f64).unwrap();
                }
                writeln!(out, "#escaped {}\n#paths {}", s.escaped, s.paths).unwrap();
            } else {
                writeln!(
                    out,
                    "# {} paths of X_{} under {}, seed {}",
                    s.paths,
                    config.steps,
                    kernel.description(),
                    config.seed
                )
                .unwrap();
                writeln!(out, "{:>8} {:>10} {:>14}", "state", "count", "frequency").unwrap();
                for (&k, &c) in &s.counts {
                    writeln!(out, "{k:>8} {c:>10} {:>14.8}", c as f64 / s.paths as f64).unwrap();
                }
                writeln!(out, "escaped {}", s.escaped).unwrap();
            }
        }
        Command::Compare => {
            let init = load_init(config)?;
            let map = to_structure_map(&kernel, policy)?;
            let exact = evolve_distribution(&map, &init, config.steps, policy)?;
            let sim = simulate_parallel(&kernel, &init, config.steps, config.paths, config.seed, policy)?;
            write_comparison(&mut out, tsv, &exact, &sim, config);
        }
        Command::Product { v, w } => {
            let map = to_structure_map(&kernel, policy)?;
            let (v, w) = (load_vector(&VectorSource::parse(v)?)?, load_vector(&VectorSource::parse(w)?)?);
            write_vector(&mut out, tsv, &product(&map, &v, &w, policy)?);
        }
        Command::Square { i } => {
            let map: MarkovMap<_> = to_structure_map(&kernel, policy)?;
            write_vector(&mut out, tsv, &square_basis(&map, *i, policy)?);
        }
    }
    Ok((EXIT_OK, out))
}

fn write_law(out: &mut String, tsv: bool, title: &str, rows: impl Iterator<Item = (usize, f64)>, deficit: f64) {
    if tsv {
        out.push_str(&write_table_tsv(rows, deficit));
        return;
    }
    writeln!(out, "# {title}").unwrap();
    writeln!(out, "{:>8} {:>24}", "state", "probability").unwrap();
    for (k, p) in rows {
        writeln!(out, "{k:>8} {p:>24}").unwrap();
    }
    writeln!(out, "deficit {deficit}").unwrap();
}

fn write_vector(out: &mut String, tsv: bool, e: &Element) {
    if tsv {
        for (i, x) in e.iter() {
            writeln!(out, "{i}\t{x}").unwrap();
        }
        writeln!(out, "#tail {}", e.tail_bound()).unwrap();
    } else {
        out.push_str(&write_element(e));
    }
}

fn write_comparison(
    out: &mut String,
    tsv: bool,
    exact: &Distribution,
    sim: &evoalg_core::markov::SimulationOutcome,
    config: &RunConfig,
) {
    let paths = sim.paths as f64;
    let mut states: Vec<usize> = exact.underlying().iter().map(|(k, _)| k).collect();
    states.extend(sim.counts.keys().copied());
    states.sort_unstable();
    states.dedup();
    if tsv {
        writeln!(out, "state\texact\tfrequency\tdelta\ttolerance").unwrap();
    } else {
        writeln!(out, "# X_{} from {} paths, seed {}", config.steps, sim.paths, config.seed).unwrap();
        writeln!(out, "{:>8} {:>14} {:>14} {:>14} {:>14}", "state", "exact", "frequency", "delta", "tolerance")
            .unwrap();
    }
    let mut outside = 0;
    for k in &states {
        let q = exact.probability(*k);
        let f = sim.frequency(*k);
        let tol = 4.0 * (q * (1.0 - q) / paths).sqrt();
        let delta = f - q;
        if delta.abs() > tol {
            outside += 1;
        }
        if tsv {
            writeln!(out, "{k}\t{q}\t{f}\t{delta}\t{tol}").unwrap();
        } else {
            let mark = if delta.abs() > tol { " *" } else { "" };
            writeln!(out, "{k:>8} {q:>14.8} {f:>14.8} {delta:>14.2e} {tol:>14.2e}{mark}").unwrap();
        }
    }
    if tsv {
        writeln!(out, "#deficit {}\n#escaped {}\n#outside {outside}", exact.mass_deficit(), sim.escaped).unwrap();
    } else {
        writeln!(out, "deficit {}, escaped paths {}", exact.mass_deficit(), sim.escaped).unwrap();
        writeln!(out, "{} of {} states within 4 sigma", states.len() - outside, states.len()).unwrap();
    }
}
