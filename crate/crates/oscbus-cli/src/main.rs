//! Command line front end for the oscillator-bus gate compiler.
//!
//! Three subcommands cover the library's entry points: `gate` compiles one
//! of the stock gates and writes a quality report, `grover` runs the search
//! demo, and `verify` runs the randomized dual-route check of the
//! closed-form propagator.
//!
//! Exit codes: 0 when every requested check passes, 1 when a report or
//! verification run fails, 2 for usage errors (bad flags, bad config file,
//! inputs the library rejects), 3 when the `OSCBUS_MAX_DIM` resource guard
//! stops a computation.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use oscbus::analysis::{default_inputs, gate_report, OscInput, ReportOptions};
use oscbus::compiler::{compile, ideal_register_unitary, GateSpec};
use oscbus::error::Error;
use oscbus::grover::{
    run_grover, ExecutionMode, GroverRequest, GroverRun, InversionStyle, IterationCount,
};
use oscbus::hilbert::Axis;
use oscbus::integrator::DEFAULT_MAX_DIM;
use oscbus::model::{all_tuples, AxisFrame, InternalOperator, Program, ProgramStep};
use oscbus::propagator::trajectory_export;
use oscbus::verification::{run_verification, VerifyConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

/// Environment override for the largest composite dimension we will build.
const MAX_DIM_ENV: &str = "OSCBUS_MAX_DIM";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Library failures are either resource guards (the dimension cap and
    /// the cutoff-convergence cap) or a rejection of the supplied inputs.
    fn from_lib(err: Error) -> Self {
        let code = match &err {
            Error::DimensionCap { .. } | Error::CutoffNotConverged { .. } => EXIT_RESOURCE,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "oscbus",
    version,
    about = "Compile multi-qubit gates into oscillator-bus pulse programs and simulate them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a stock gate, simulate it, and write a quality report.
    #[command(subcommand)]
    Gate(GateCommand),
    /// Run the search demo on the bus or against exact register arithmetic.
    Grover(GroverArgs),
    /// Randomized dual-route checks of the closed-form propagator.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Clone)]
enum GateCommand {
    /// Product gate exp(-i l1 l2 A B), A = (z1+1)/2 and B = x2.
    Rectangle(RectangleArgs),
    /// Trigonometric gate exp(-i mu A cos(theta C)), A = x2 and C = (z1+1)/2.
    Parallelogram(ParallelogramArgs),
    /// Doubly controlled flip on three qubits.
    Toffoli(ToffoliArgs),
    /// Multiply controlled flip: the last qubit flips when every control is set.
    Cnnot(CnnotArgs),
    /// Diagonal phase exp(-i mu z...z) over a contiguous register.
    ProductPhase(ProductPhaseArgs),
}

/// Flags shared by every gate subcommand.
#[derive(Args, Clone)]
struct CommonGateArgs {
    /// Oscillator input for the report: fock:<k> or thermal:<nbar>.
    /// Omitted: sweep fock:0, fock:1, fock:3, and thermal:1.
    #[arg(long, value_parser = parse_osc)]
    osc: Option<OscInput>,
    /// Fock cutoff: "auto" converges it by doubling, a number pins it.
    #[arg(long, value_parser = parse_cutoff)]
    cutoff: Option<CutoffArg>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write phase-space trajectories as CSV (eigen_tuple, step, x, p).
    #[arg(long)]
    traj: Option<PathBuf>,
    /// JSON file with the same keys as the flags plus an optional "sweep"
    /// array of per-run overrides; explicit flags win over the file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RectangleArgs {
    /// Impulse weight on the first leg.
    #[arg(long)]
    l1: Option<f64>,
    /// Impulse weight on the second leg.
    #[arg(long)]
    l2: Option<f64>,
    #[command(flatten)]
    common: CommonGateArgs,
}

#[derive(Args, Clone)]
struct ParallelogramArgs {
    /// Overall phase scale.
    #[arg(long)]
    mu: Option<f64>,
    /// Angle multiplying the depth operator inside the cosine.
    #[arg(long)]
    theta: Option<f64>,
    #[command(flatten)]
    common: CommonGateArgs,
}

#[derive(Args, Clone)]
struct ToffoliArgs {
    /// Number of full oscillator periods spent per leg.
    #[arg(long = "K")]
    k: Option<u32>,
    /// Oscillator frequency; legs scale as 2 pi K / omega.
    #[arg(long)]
    omega: Option<f64>,
    #[command(flatten)]
    common: CommonGateArgs,
}

#[derive(Args, Clone)]
struct CnnotArgs {
    /// Number of control qubits (at least one).
    #[arg(long)]
    controls: Option<usize>,
    #[command(flatten)]
    common: CommonGateArgs,
}

#[derive(Args, Clone)]
struct ProductPhaseArgs {
    /// Phase per joint parity.
    #[arg(long)]
    mu: Option<f64>,
    /// Number of qubits carrying the z product.
    #[arg(long)]
    qubits: Option<usize>,
    #[command(flatten)]
    common: CommonGateArgs,
}

#[derive(Args, Clone)]
struct GroverArgs {
    /// Register width in qubits.
    #[arg(long)]
    qubits: Option<usize>,
    /// Marked basis state, most significant qubit first.
    #[arg(long)]
    target: Option<usize>,
    /// "auto" rounds to the peak of the success curve; a number pins it.
    #[arg(long, value_parser = parse_iterations)]
    iterations: Option<IterationCount>,
    /// Oscillator input for bus mode: fock:<k> or thermal:<nbar>.
    #[arg(long, value_parser = parse_osc)]
    osc: Option<OscInput>,
    /// Fock cutoff for bus mode: "auto" or a number.
    #[arg(long, value_parser = parse_cutoff)]
    cutoff: Option<CutoffArg>,
    /// Pulse simulation on the bus, or exact register arithmetic.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// How the inversion projector phase is realized in bus mode.
    #[arg(long, value_enum)]
    style: Option<StyleArg>,
    /// Skip the gate-quality report for the combined round (bus mode).
    #[arg(long)]
    skip_report: bool,
    /// Write per-round marked-state probabilities as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with the same keys as the flags plus an optional "sweep"
    /// array of per-run overrides; explicit flags win over the file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    /// Base seed for the case generator.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of random dual-route cases.
    #[arg(long, default_value_t = 200)]
    cases: usize,
    /// Largest accepted deviation between the two routes.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Bus,
    Ideal,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StyleArg {
    /// Chain operators built directly along the x axis.
    Axis,
    /// z-axis chain conjugated by explicit local rotations.
    Locals,
}

/// A resolved --cutoff value; None means "auto".
#[derive(Debug, Clone, Copy)]
struct CutoffArg(Option<usize>);

fn parse_osc(raw: &str) -> Result<OscInput, String> {
    let err = || format!("expected fock:<k> or thermal:<nbar>, got {raw:?}");
    let (kind, value) = raw.split_once(':').ok_or_else(err)?;
    match kind {
        "fock" => value
            .parse::<usize>()
            .map(OscInput::Fock)
            .map_err(|_| err()),
        "thermal" => value
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite() && *n >= 0.0)
            .map(OscInput::Thermal)
            .ok_or_else(err),
        _ => Err(err()),
    }
}

fn parse_cutoff(raw: &str) -> Result<CutoffArg, String> {
    if raw == "auto" {
        return Ok(CutoffArg(None));
    }
    raw.parse::<usize>()
        .ok()
        .filter(|&c| c > 0)
        .map(|c| CutoffArg(Some(c)))
        .ok_or_else(|| format!("expected \"auto\" or a positive integer, got {raw:?}"))
}

fn parse_iterations(raw: &str) -> Result<IterationCount, String> {
    if raw == "auto" {
        return Ok(IterationCount::Auto);
    }
    raw.parse::<usize>()
        .map(IterationCount::Fixed)
        .map_err(|_| format!("expected \"auto\" or a non-negative integer, got {raw:?}"))
}

fn max_dim_from_env() -> Result<usize, CliError> {
    match std::env::var(MAX_DIM_ENV) {
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| {
                CliError::usage(format!(
                    "{MAX_DIM_ENV} must be a positive integer, got {raw:?}"
                ))
            }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MAX_DIM),
        Err(std::env::VarError::NotUnicode(_)) => Err(CliError::usage(format!(
            "{MAX_DIM_ENV} is not valid unicode"
        ))),
    }
}

/// Config-file counterpart of the flags. One schema serves every
/// subcommand; keys outside it are rejected, keys a subcommand does not
/// consume are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    l1: Option<f64>,
    l2: Option<f64>,
    mu: Option<f64>,
    theta: Option<f64>,
    #[serde(rename = "K")]
    k: Option<u32>,
    omega: Option<f64>,
    controls: Option<usize>,
    qubits: Option<usize>,
    target: Option<usize>,
    iterations: Option<AutoOrCount>,
    osc: Option<String>,
    cutoff: Option<AutoOrCount>,
    mode: Option<String>,
    style: Option<String>,
    sweep: Option<Vec<FileConfig>>,
}

/// "auto" or a count, for keys that take either in the file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AutoOrCount {
    Count(usize),
    Word(String),
}

impl AutoOrCount {
    fn to_cutoff(&self) -> Result<CutoffArg, CliError> {
        match self {
            AutoOrCount::Count(c) if *c > 0 => Ok(CutoffArg(Some(*c))),
            AutoOrCount::Word(w) if w == "auto" => Ok(CutoffArg(None)),
            _ => Err(CliError::usage(format!(
                "config cutoff must be \"auto\" or a positive integer, got {self:?}"
            ))),
        }
    }

    fn to_iterations(&self) -> Result<IterationCount, CliError> {
        match self {
            AutoOrCount::Count(c) => Ok(IterationCount::Fixed(*c)),
            AutoOrCount::Word(w) if w == "auto" => Ok(IterationCount::Auto),
            AutoOrCount::Word(w) => Err(CliError::usage(format!(
                "config iterations must be \"auto\" or a count, got {w:?}"
            ))),
        }
    }
}

/// A config file split into its base keys and the sweep entries. With no
/// file (or no sweep) there is exactly one run.
struct ConfigLayers {
    base: FileConfig,
    entries: Vec<FileConfig>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigLayers, CliError> {
    let Some(path) = path else {
        return Ok(ConfigLayers {
            base: FileConfig::default(),
            entries: vec![FileConfig::default()],
        });
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut base: FileConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?;
    let entries = match base.sweep.take() {
        None => vec![FileConfig::default()],
        Some(list) if list.is_empty() => {
            return Err(CliError::usage("config sweep must not be empty"));
        }
        Some(list) => {
            if list.iter().any(|e| e.sweep.is_some()) {
                return Err(CliError::usage("config sweep entries cannot nest"));
            }
            list
        }
    };
    Ok(ConfigLayers { base, entries })
}

/// Flag, then sweep entry, then config base; the first set value wins.
fn layered<T: Clone>(flag: &Option<T>, entry: &Option<T>, base: &Option<T>) -> Option<T> {
    flag.clone()
        .or_else(|| entry.clone())
        .or_else(|| base.clone())
}

fn resolve_osc(
    flag: &Option<OscInput>,
    entry: &FileConfig,
    base: &FileConfig,
) -> Result<Option<OscInput>, CliError> {
    if let Some(osc) = flag {
        return Ok(Some(*osc));
    }
    match entry.osc.as_ref().or(base.osc.as_ref()) {
        Some(raw) => parse_osc(raw).map(Some).map_err(CliError::usage),
        None => Ok(None),
    }
}

fn resolve_cutoff(
    flag: &Option<CutoffArg>,
    entry: &FileConfig,
    base: &FileConfig,
) -> Result<CutoffArg, CliError> {
    if let Some(cutoff) = flag {
        return Ok(*cutoff);
    }
    match entry.cutoff.as_ref().or(base.cutoff.as_ref()) {
        Some(raw) => raw.to_cutoff(),
        None => Ok(CutoffArg(None)),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Gate(gate) => run_gate(gate),
        Command::Grover(args) => run_grover_cmd(args),
        Command::Verify(args) => run_verify(args),
    }
}

impl GateCommand {
    fn common(&self) -> &CommonGateArgs {
        match self {
            GateCommand::Rectangle(a) => &a.common,
            GateCommand::Parallelogram(a) => &a.common,
            GateCommand::Toffoli(a) => &a.common,
            GateCommand::Cnnot(a) => &a.common,
            GateCommand::ProductPhase(a) => &a.common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GateCommand::Rectangle(_) => "rectangle",
            GateCommand::Parallelogram(_) => "parallelogram",
            GateCommand::Toffoli(_) => "toffoli",
            GateCommand::Cnnot(_) => "cnnot",
            GateCommand::ProductPhase(_) => "product-phase",
        }
    }

    /// Demo operator choices for the two generic gates: qubit 0 carries the
    /// control-like factor (z1+1)/2 with eigenvalues 0 and 1, qubit 1 the
    /// flip x2, so both gates entangle unless a weight is zero.
    fn resolve_spec(&self, entry: &FileConfig, base: &FileConfig) -> Result<GateSpec, CliError> {
        match self {
            GateCommand::Rectangle(args) => {
                let l1 = layered(&args.l1, &entry.l1, &base.l1).unwrap_or(FRAC_PI_2);
                let l2 = layered(&args.l2, &entry.l2, &base.l2).unwrap_or(1.0);
                let a = InternalOperator::new(0.5, [(0, Axis::Z, 0.5)]);
                let b = InternalOperator::pauli(Axis::X, 1);
                let frame = AxisFrame::new(vec![Axis::Z, Axis::X]);
                Ok(GateSpec::rectangle(l1, l2, a, b, frame))
            }
            GateCommand::Parallelogram(args) => {
                let mu = layered(&args.mu, &entry.mu, &base.mu).unwrap_or(0.7);
                let theta = layered(&args.theta, &entry.theta, &base.theta).unwrap_or(FRAC_PI_3);
                let a = InternalOperator::pauli(Axis::X, 1);
                let c = InternalOperator::new(0.5, [(0, Axis::Z, 0.5)]);
                let frame = AxisFrame::new(vec![Axis::Z, Axis::X]);
                Ok(GateSpec::parallelogram(mu, theta, a, c, frame))
            }
            GateCommand::Toffoli(args) => {
                let k = layered(&args.k, &entry.k, &base.k).unwrap_or(1);
                let omega = layered(&args.omega, &entry.omega, &base.omega).unwrap_or(1.0);
                Ok(GateSpec::toffoli(k, omega))
            }
            GateCommand::Cnnot(args) => {
                let controls =
                    layered(&args.controls, &entry.controls, &base.controls).unwrap_or(2);
                Ok(GateSpec::cnnot(controls))
            }
            GateCommand::ProductPhase(args) => {
                let mu = layered(&args.mu, &entry.mu, &base.mu).unwrap_or(0.3);
                let count = layered(&args.qubits, &entry.qubits, &base.qubits).unwrap_or(4);
                if count == 0 {
                    return Err(CliError::usage("--qubits must be at least 1"));
                }
                Ok(GateSpec::product_phase(
                    mu,
                    (0..count).collect::<BTreeSet<_>>(),
                ))
            }
        }
    }
}

fn run_gate(gate: GateCommand) -> Result<bool, CliError> {
    let max_dim = max_dim_from_env()?;
    let common = gate.common().clone();
    let layers = load_config(common.config.as_deref())?;
    if common.traj.is_some() && layers.entries.len() > 1 {
        return Err(CliError::usage("--traj is for a single run, not a sweep"));
    }

    let mut reports = Vec::with_capacity(layers.entries.len());
    for entry in &layers.entries {
        let spec = gate.resolve_spec(entry, &layers.base)?;
        let prog = compile(&spec).map_err(CliError::from_lib)?;
        let ideal = ideal_register_unitary(&spec).map_err(CliError::from_lib)?;
        let opts = ReportOptions {
            inputs: resolve_osc(&common.osc, entry, &layers.base)?
                .map_or_else(default_inputs, |osc| vec![osc]),
            max_dim,
            cutoff: resolve_cutoff(&common.cutoff, entry, &layers.base)?.0,
            ..ReportOptions::default()
        };
        let report = gate_report(&prog, &ideal, &opts).map_err(CliError::from_lib)?;
        if let Some(path) = &common.traj {
            write_text(path, &trajectory_csv(&prog)?)?;
        }
        let min_fidelity = report
            .fidelities
            .values()
            .fold(f64::INFINITY, |acc, &f| acc.min(f));
        eprintln!(
            "gate {}: cutoff {}, min fidelity {:.9}, {}",
            gate.name(),
            report.cutoff_used,
            min_fidelity,
            verdict(report.pass),
        );
        reports.push(report);
    }

    let passed = reports.iter().all(|r| r.pass);
    emit_reports(&reports, common.out.as_deref())?;
    Ok(passed)
}

fn run_grover_cmd(args: GroverArgs) -> Result<bool, CliError> {
    let max_dim = max_dim_from_env()?;
    let layers = load_config(args.config.as_deref())?;
    if args.csv.is_some() && layers.entries.len() > 1 {
        return Err(CliError::usage("--csv is for a single run, not a sweep"));
    }

    let mut runs = Vec::with_capacity(layers.entries.len());
    for entry in &layers.entries {
        let base = &layers.base;
        let n_qubits = layered(&args.qubits, &entry.qubits, &base.qubits)
            .ok_or_else(|| CliError::usage("--qubits is required"))?;
        let x0 = layered(&args.target, &entry.target, &base.target)
            .ok_or_else(|| CliError::usage("--target is required"))?;

        let mut req = GroverRequest::new(n_qubits, x0);
        if let Some(iterations) = resolve_iterations(&args.iterations, entry, base)? {
            req.iterations = iterations;
        }
        if let Some(osc) = resolve_osc(&args.osc, entry, base)? {
            req.osc_input = osc;
        }
        req.cutoff = resolve_cutoff(&args.cutoff, entry, base)?.0;
        req.mode = resolve_mode(&args.mode, entry, base)?;
        req.inversion_style = resolve_style(&args.style, entry, base)?;
        req.max_dim = max_dim;
        req.with_report = req.mode == ExecutionMode::Bus && !args.skip_report;

        let run = run_grover(&req).map_err(CliError::from_lib)?;
        if let Some(path) = &args.csv {
            write_text(path, &iteration_csv(&run))?;
        }
        eprintln!(
            "grover: {} qubits, target {}, {} rounds, success probability {:.6}",
            run.n_qubits, run.x0, run.iterations, run.success_probability,
        );
        runs.push(run);
    }

    let passed = runs
        .iter()
        .all(|r| r.report.as_ref().is_none_or(|rep| rep.pass));
    emit_reports(&runs, args.out.as_deref())?;
    Ok(passed)
}

fn run_verify(args: VerifyArgs) -> Result<bool, CliError> {
    let config = VerifyConfig {
        seed: args.seed,
        cases: args.cases,
        tolerance: args.tolerance,
        max_dim: max_dim_from_env()?,
    };
    let report = run_verification(&config).map_err(CliError::from_lib)?;
    eprintln!(
        "verify: {} cases at seed {}, worst deviation {:.3e}, {}",
        report.cases,
        report.seed,
        report.worst_deviation,
        verdict(report.pass),
    );
    emit_json(&report, args.out.as_deref())?;
    Ok(report.pass)
}

fn resolve_iterations(
    flag: &Option<IterationCount>,
    entry: &FileConfig,
    base: &FileConfig,
) -> Result<Option<IterationCount>, CliError> {
    if let Some(iterations) = flag {
        return Ok(Some(*iterations));
    }
    match entry.iterations.as_ref().or(base.iterations.as_ref()) {
        Some(raw) => raw.to_iterations().map(Some),
        None => Ok(None),
    }
}

fn resolve_mode(
    flag: &Option<ModeArg>,
    entry: &FileConfig,
    base: &FileConfig,
) -> Result<ExecutionMode, CliError> {
    if let Some(mode) = flag {
        return Ok(match mode {
            ModeArg::Bus => ExecutionMode::Bus,
            ModeArg::Ideal => ExecutionMode::Ideal,
        });
    }
    match entry.mode.as_deref().or(base.mode.as_deref()) {
        None | Some("bus") => Ok(ExecutionMode::Bus),
        Some("ideal") => Ok(ExecutionMode::Ideal),
        Some(other) => Err(CliError::usage(format!(
            "config mode must be \"bus\" or \"ideal\", got {other:?}"
        ))),
    }
}

fn resolve_style(
    flag: &Option<StyleArg>,
    entry: &FileConfig,
    base: &FileConfig,
) -> Result<InversionStyle, CliError> {
    if let Some(style) = flag {
        return Ok(match style {
            StyleArg::Axis => InversionStyle::AxisChoice,
            StyleArg::Locals => InversionStyle::ExplicitLocals,
        });
    }
    match entry.style.as_deref().or(base.style.as_deref()) {
        None | Some("axis") => Ok(InversionStyle::AxisChoice),
        Some("locals") => Ok(InversionStyle::ExplicitLocals),
        Some(other) => Err(CliError::usage(format!(
            "config style must be \"axis\" or \"locals\", got {other:?}"
        ))),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

/// One CSV row per trajectory vertex, per internal eigenvalue tuple. The
/// step index runs across all pulse steps of the program so a tuple's rows
/// trace its full phase-space path in order.
fn trajectory_csv(prog: &Program) -> Result<String, CliError> {
    let mut csv = String::from("eigen_tuple,step,x,p\n");
    for tuple in all_tuples(prog.n_qubits) {
        let label: String = tuple
            .iter()
            .map(|&s| if s > 0 { '+' } else { '-' })
            .collect();
        let mut step = 0usize;
        for prog_step in &prog.steps {
            let ProgramStep::Pulse(seq) = prog_step else {
                continue;
            };
            for point in trajectory_export(seq, &tuple).map_err(CliError::from_lib)? {
                let _ = writeln!(csv, "{label},{step},{},{}", point.x, point.p);
                step += 1;
            }
        }
    }
    Ok(csv)
}

fn iteration_csv(run: &GroverRun) -> String {
    let mut csv = String::from("iteration,probability\n");
    let _ = writeln!(csv, "0,{}", run.initial_probability);
    for (i, p) in run.per_iteration.iter().enumerate() {
        let _ = writeln!(csv, "{},{p}", i + 1);
    }
    csv
}

/// A single run serializes as one object, a sweep as an array.
fn emit_reports<T: Serialize>(reports: &[T], out: Option<&Path>) -> Result<(), CliError> {
    if reports.len() == 1 {
        emit_json(&reports[0], out)
    } else {
        emit_json(&reports, out)
    }
}

fn emit_json<T: Serialize + ?Sized>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        code: EXIT_FAILURE,
        message: format!("cannot serialize report: {e}"),
    })?;
    text.push('\n');
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}
