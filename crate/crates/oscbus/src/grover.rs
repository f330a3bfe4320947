//! Grover search built from bus pulses: a marked-state sign flip, inversion
//! about the mean, and the full search loop through the simulator.
//!
//! Both gates are phase flips of a rank-one projector. The sign flip targets
//! the all-ones register state (conjugated by X flips to move the mark),
//! and the inversion targets the uniform superposition, which is the same
//! projector along the x axis. Each is realized as one projector-phase
//! chain; no per-qubit bus addressing is ever needed.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{gate_report, GateReport, OscInput, ReportOptions};
use crate::compiler::{compile_chain, depth_operator_along, projector_fourier_terms, ChainTerm};
use crate::error::{Error, Result};
use crate::hilbert::{kron, pauli_2x2, Axis, CompositeState, OscillatorSpec, ONE, ZERO};
use crate::integrator::{program_unitary, thermal_state, SimOptions, DEFAULT_MAX_DIM};
use crate::linalg;
use crate::model::{AxisFrame, IdealLocal, InternalOperator, Program, ProgramStep};

/// Version stamp for serialized search summaries.
pub const GROVER_SCHEMA_VERSION: u32 = 1;
/// Largest register for full bus simulation.
pub const MAX_BUS_QUBITS: usize = 4;
/// Largest register for the state-vector reference.
pub const MAX_IDEAL_QUBITS: usize = 20;

/// The marked basis state of a search instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleSpec {
    n_qubits: usize,
    x0: usize,
    bits: Vec<u8>,
}

impl OracleSpec {
    pub fn new(n_qubits: usize, x0: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 32 {
            return Err(Error::invalid(format!(
                "register size {n_qubits} outside 1..=32"
            )));
        }
        if x0 >= 1usize << n_qubits {
            return Err(Error::invalid(format!(
                "marked state {x0} needs more than {n_qubits} qubits"
            )));
        }
        // Qubit 0 is the most significant bit of the basis index.
        let bits = (0..n_qubits)
            .map(|l| ((x0 >> (n_qubits - 1 - l)) & 1) as u8)
            .collect();
        Ok(OracleSpec { n_qubits, x0, bits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    /// Binary form of the marked state, qubit by qubit.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }
}

/// Chain realizing exp(i pi P), with P projecting onto every qubit sitting
/// in the +1 eigenstate of `axis`. The collective depth operator counts
/// qubits outside that eigenstate, and the finite Fourier expansion turns
/// the count into the projector.
fn projector_phase_chain(n_qubits: usize, axis: Axis) -> Result<Program> {
    let terms: Vec<ChainTerm> = projector_fourier_terms(n_qubits)?
        .iter()
        .map(|t| ChainTerm {
            mu: -std::f64::consts::PI * t.weight,
            theta: t.angle,
        })
        .collect();
    let a = InternalOperator::identity();
    let c = depth_operator_along(axis, 0..n_qubits);
    compile_chain(&terms, &a, &c, &AxisFrame::uniform(axis, n_qubits))
}

/// Program that multiplies the amplitude of the marked state by -1 and
/// leaves every other amplitude unchanged, up to a global phase.
///
/// X flips map the mark onto the all-ones state, the collective chain flips
/// that state's sign, and the same flips restore the register.
pub fn compile_oracle(spec: &OracleSpec) -> Result<Program> {
    let n = spec.n_qubits();
    let chain = projector_phase_chain(n, Axis::Z)?;
    let flips: Vec<usize> = (0..n).filter(|&l| spec.bits()[l] == 0).collect();
    let mut steps = Vec::new();
    steps.extend(
        flips
            .iter()
            .map(|&q| ProgramStep::Local(IdealLocal::x_flip(q))),
    );
    steps.extend(chain.steps);
    steps.extend(
        flips
            .iter()
            .map(|&q| ProgramStep::Local(IdealLocal::x_flip(q))),
    );
    Ok(Program::new(n, steps))
}

/// How the all-x-axis projector phase is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InversionStyle {
    /// Build the chain operators along x directly.
    AxisChoice,
    /// Conjugate the z-axis chain by ideal local rotations that map
    /// sigma_x to sigma_z.
    ExplicitLocals,
}

/// Rotation with V sigma_x V^dag = sigma_z and V|0> = |+>.
fn basis_change_local(qubit: usize) -> IdealLocal {
    IdealLocal {
        axis: Axis::Y,
        angle: -std::f64::consts::FRAC_PI_2,
        qubit,
    }
}

/// Program for the inversion about the mean, up to a global phase: the
/// all-+x projector phase flip, equal to (2/N) M - I with M the all-ones
/// matrix.
pub fn compile_inversion(n_qubits: usize) -> Result<Program> {
    compile_inversion_with(n_qubits, InversionStyle::AxisChoice)
}

pub fn compile_inversion_with(n_qubits: usize, style: InversionStyle) -> Result<Program> {
    match style {
        InversionStyle::AxisChoice => projector_phase_chain(n_qubits, Axis::X),
        InversionStyle::ExplicitLocals => {
            let chain = projector_phase_chain(n_qubits, Axis::Z)?;
            let mut steps = Vec::new();
            for q in 0..n_qubits {
                steps.push(ProgramStep::Local(basis_change_local(q)));
            }
            steps.extend(chain.steps);
            for q in 0..n_qubits {
                let undo = IdealLocal {
                    angle: std::f64::consts::FRAC_PI_2,
                    ..basis_change_local(q)
                };
                steps.push(ProgramStep::Local(undo));
            }
            Ok(Program::new(n_qubits, steps))
        }
    }
}

/// diag(+1, ..., -1 at x0, ..., +1): the target gate of [`compile_oracle`].
pub fn oracle_matrix(spec: &OracleSpec) -> Array2<Complex64> {
    let dim = 1usize << spec.n_qubits();
    Array2::from_shape_fn((dim, dim), |(r, c)| {
        if r != c {
            ZERO
        } else if r == spec.x0() {
            -ONE
        } else {
            ONE
        }
    })
}

/// (2/N) M - I with M the all-ones matrix: the inversion about the mean.
pub fn inversion_matrix(n_qubits: usize) -> Array2<Complex64> {
    let dim = 1usize << n_qubits;
    let off = Complex64::new(2.0 / dim as f64, 0.0);
    Array2::from_shape_fn((dim, dim), |(r, c)| if r == c { off - ONE } else { off })
}

/// Checks of the all-ones matrix algebra behind the inversion gate.
#[derive(Debug, Clone, Serialize)]
pub struct MMatrixReport {
    pub n_qubits: usize,
    /// N = 2^n, the matrix dimension and the single nonzero eigenvalue.
    pub dimension: usize,
    /// max |(sM)^k - s^k N^{k-1} M| for k = 1..=4 at sN = i pi.
    pub power_errors: Vec<f64>,
    /// max |series exp(sM) - (I + (e^{sN}-1)/N M)| at sN = i pi.
    pub exponential_error: f64,
    /// max |M - tensor product of per-qubit (sigma_x + 1)|.
    pub tensor_error: f64,
    /// Spectrum deviation from {N, 0, ..., 0}.
    pub eigenvalue_error: f64,
    pub max_error: f64,
    pub pass: bool,
}

pub const M_MATRIX_TOLERANCE: f64 = 1e-10;

fn max_abs_entry(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn series_exponential(m: &Array2<Complex64>, cap: usize) -> Array2<Complex64> {
    let mut acc = Array2::<Complex64>::eye(m.nrows());
    let mut term = Array2::<Complex64>::eye(m.nrows());
    for j in 1..=cap {
        term = linalg::matmul(&term, m).mapv(|z| z / j as f64);
        acc += &term;
        if max_abs_entry(&term) < 1e-18 {
            break;
        }
    }
    acc
}

/// Verify the rank-one algebra of M on n qubits: its powers collapse to
/// multiples of M, its exponential closes in {I, M}, it factors as a tensor
/// product, and its only nonzero eigenvalue is N.
pub fn m_matrix_identities(n_qubits: usize) -> Result<MMatrixReport> {
    if n_qubits == 0 || n_qubits > 5 {
        return Err(Error::invalid(format!(
            "register size {n_qubits} outside 1..=5"
        )));
    }
    let dim = 1usize << n_qubits;
    let n = dim as f64;
    let m = Array2::<Complex64>::from_elem((dim, dim), ONE);

    let mut factored = ndarray::array![[ONE]];
    let single = pauli_2x2(Axis::X) + Array2::<Complex64>::eye(2);
    for _ in 0..n_qubits {
        factored = kron(&factored, &single);
    }
    let tensor_error = max_abs_entry(&(&m - &factored));

    let s = Complex64::new(0.0, std::f64::consts::PI / n);
    let sm = m.mapv(|z| z * s);
    let mut power_errors = Vec::with_capacity(4);
    let mut lhs = Array2::<Complex64>::eye(dim);
    for k in 1..=4i32 {
        lhs = linalg::matmul(&lhs, &sm);
        let scale = s.powi(k) * n.powi(k - 1);
        let rhs = m.mapv(|z| z * scale);
        power_errors.push(max_abs_entry(&(&lhs - &rhs)));
    }

    let series = series_exponential(&sm, 200);
    let gain = ((s * n).exp() - ONE) / n;
    let closed = Array2::<Complex64>::eye(dim) + m.mapv(|z| z * gain);
    let exponential_error = max_abs_entry(&(&series - &closed));

    let (eigs, _) = linalg::eigh(&m)?;
    let eigenvalue_error = eigs
        .iter()
        .map(|l| (l - n).abs().min(l.abs()))
        .fold(0.0, f64::max)
        .max(
            // Exactly one eigenvalue near N.
            (eigs.iter().filter(|l| (*l - n).abs() < 0.5).count() as f64 - 1.0).abs(),
        );

    let max_error = power_errors
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .max(exponential_error)
        .max(tensor_error)
        .max(eigenvalue_error);
    Ok(MMatrixReport {
        n_qubits,
        dimension: dim,
        power_errors,
        exponential_error,
        tensor_error,
        eigenvalue_error,
        max_error,
        pass: max_error <= M_MATRIX_TOLERANCE,
    })
}

/// How many oracle-inversion rounds to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IterationCount {
    /// floor(pi sqrt(N) / 4), the standard near-optimal count.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExecutionMode {
    /// Compile both gates to bus pulses and integrate the full system.
    Bus,
    /// Exact state-vector arithmetic on the register alone.
    Ideal,
}

pub fn auto_iterations(n_qubits: usize) -> usize {
    let n = (1u64 << n_qubits) as f64;
    (std::f64::consts::PI * n.sqrt() / 4.0).floor() as usize
}

/// sin^2((2j+1) asin(N^{-1/2})): the exact success probability after j
/// rounds from the uniform superposition.
pub fn ideal_success_probability(n_qubits: usize, iterations: usize) -> f64 {
    let n = (1u64 << n_qubits) as f64;
    let theta = (1.0 / n.sqrt()).asin();
    ((2 * iterations + 1) as f64 * theta).sin().powi(2)
}

/// Marked-state probability after each round, by direct state-vector
/// arithmetic: sign flip at x0, then reflection about the mean amplitude.
pub fn reference_probabilities(n_qubits: usize, x0: usize, iterations: usize) -> Result<Vec<f64>> {
    let spec = OracleSpec::new(n_qubits, x0)?;
    if n_qubits > MAX_IDEAL_QUBITS {
        return Err(Error::invalid(format!(
            "register size {n_qubits} above the state-vector limit {MAX_IDEAL_QUBITS}"
        )));
    }
    let dim = 1usize << n_qubits;
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut probs = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        v[spec.x0()] = -v[spec.x0()];
        let mean = v.iter().sum::<f64>() / dim as f64;
        for amp in v.iter_mut() {
            *amp = 2.0 * mean - *amp;
        }
        probs.push(v[spec.x0()] * v[spec.x0()]);
    }
    Ok(probs)
}

/// One search instance.
#[derive(Debug, Clone)]
pub struct GroverRequest {
    pub n_qubits: usize,
    pub x0: usize,
    pub iterations: IterationCount,
    pub osc_input: OscInput,
    pub mode: ExecutionMode,
    pub inversion_style: InversionStyle,
    /// Fock cutoff for bus mode; None estimates one from the pulse
    /// trajectories and the oscillator input.
    pub cutoff: Option<usize>,
    pub max_dim: usize,
    /// Attach a gate-quality report for the combined oracle+inversion step.
    pub with_report: bool,
}

impl GroverRequest {
    pub fn new(n_qubits: usize, x0: usize) -> Self {
        GroverRequest {
            n_qubits,
            x0,
            iterations: IterationCount::Auto,
            osc_input: OscInput::Fock(0),
            mode: ExecutionMode::Bus,
            inversion_style: InversionStyle::AxisChoice,
            cutoff: None,
            max_dim: DEFAULT_MAX_DIM,
            with_report: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroverRun {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub x0: usize,
    pub iterations: usize,
    pub mode: ExecutionMode,
    pub osc_input: String,
    /// Fock cutoff actually used; None in ideal mode.
    pub cutoff: Option<usize>,
    /// Marked-state probability right after state preparation.
    pub initial_probability: f64,
    /// Marked-state probability after each oracle-inversion round.
    pub per_iteration: Vec<f64>,
    pub success_probability: f64,
    pub report: Option<GateReport>,
}

struct BusExecution {
    state: CompositeState,
    initial_probability: f64,
    per_iteration: Vec<f64>,
    cutoff: usize,
}

fn initial_state(n_qubits: usize, osc: OscillatorSpec, input: &OscInput) -> Result<CompositeState> {
    match input {
        OscInput::Fock(k) => CompositeState::basis(n_qubits, osc, 0, *k),
        OscInput::Thermal(nbar) => thermal_state(n_qubits, osc, *nbar),
    }
}

fn execute_bus(req: &GroverRequest, spec: &OracleSpec, iterations: usize) -> Result<BusExecution> {
    let n = spec.n_qubits();
    if n > MAX_BUS_QUBITS {
        return Err(Error::invalid(format!(
            "bus mode supports at most {MAX_BUS_QUBITS} qubits; use ideal mode for {n}"
        )));
    }
    let oracle = compile_oracle(spec)?;
    let inversion = compile_inversion_with(n, req.inversion_style)?;
    let inputs = [req.osc_input];
    let cutoff = match req.cutoff {
        Some(c) => c,
        None => crate::analysis::initial_cutoff(&oracle, &inputs)?
            .max(crate::analysis::initial_cutoff(&inversion, &inputs)?),
    };
    let osc = OscillatorSpec::new(cutoff)?;
    let opts = SimOptions {
        max_dim: req.max_dim,
    };

    let prep = Program::new(
        n,
        (0..n)
            .map(|q| ProgramStep::Local(basis_change_local(q)))
            .collect(),
    );
    let u_prep = program_unitary(&prep, osc, opts)?;
    let u_oracle = program_unitary(&oracle, osc, opts)?;
    let u_inversion = program_unitary(&inversion, osc, opts)?;

    let mut state = initial_state(n, osc, &req.osc_input)?.apply(&u_prep)?;
    let initial_probability = state.register_probability(spec.x0());
    let mut per_iteration = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        state = state.apply(&u_oracle)?.apply(&u_inversion)?;
        per_iteration.push(state.register_probability(spec.x0()));
    }
    Ok(BusExecution {
        state,
        initial_probability,
        per_iteration,
        cutoff,
    })
}

fn combined_step_report(
    req: &GroverRequest,
    spec: &OracleSpec,
    cutoff: usize,
) -> Result<GateReport> {
    let n = spec.n_qubits();
    let oracle = compile_oracle(spec)?;
    let inversion = compile_inversion_with(n, req.inversion_style)?;
    let mut steps = oracle.steps;
    steps.extend(inversion.steps);
    let combined = Program::new(n, steps);
    let ideal = linalg::matmul(&inversion_matrix(n), &oracle_matrix(spec));
    let opts = ReportOptions {
        inputs: vec![req.osc_input],
        cutoff: Some(cutoff),
        max_dim: req.max_dim,
        ..Default::default()
    };
    gate_report(&combined, &ideal, &opts)
}

/// Run Grover search: prepare the uniform superposition with ideal local
/// rotations, then alternate the compiled sign flip and inversion.
pub fn run_grover(req: &GroverRequest) -> Result<GroverRun> {
    let spec = OracleSpec::new(req.n_qubits, req.x0)?;
    let iterations = match req.iterations {
        IterationCount::Auto => auto_iterations(req.n_qubits),
        IterationCount::Fixed(k) => k,
    };
    match req.mode {
        ExecutionMode::Ideal => {
            if req.n_qubits > MAX_IDEAL_QUBITS {
                return Err(Error::invalid(format!(
                    "register size {} above the state-vector limit {MAX_IDEAL_QUBITS}",
                    req.n_qubits
                )));
            }
            let per_iteration = reference_probabilities(req.n_qubits, req.x0, iterations)?;
            let initial = 1.0 / (1usize << req.n_qubits) as f64;
            let success = per_iteration.last().copied().unwrap_or(initial);
            Ok(GroverRun {
                schema_version: GROVER_SCHEMA_VERSION,
                n_qubits: req.n_qubits,
                x0: req.x0,
                iterations,
                mode: ExecutionMode::Ideal,
                osc_input: req.osc_input.label(),
                cutoff: None,
                initial_probability: initial,
                per_iteration,
                success_probability: success,
                report: None,
            })
        }
        ExecutionMode::Bus => {
            let exec = execute_bus(req, &spec, iterations)?;
            let report = if req.with_report {
                Some(combined_step_report(req, &spec, exec.cutoff)?)
            } else {
                None
            };
            let success = exec
                .per_iteration
                .last()
                .copied()
                .unwrap_or(exec.initial_probability);
            Ok(GroverRun {
                schema_version: GROVER_SCHEMA_VERSION,
                n_qubits: req.n_qubits,
                x0: req.x0,
                iterations,
                mode: ExecutionMode::Bus,
                osc_input: req.osc_input.label(),
                cutoff: Some(exec.cutoff),
                initial_probability: exec.initial_probability,
                per_iteration: exec.per_iteration,
                success_probability: success,
                report,
            })
        }
    }
}

/// Search for the all-ones state and report how many qubits end up excited.
///
/// With that mark the oracle needs no bit flips, so every bus pulse is a
/// collective drive with no per-qubit addressing.
#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub run: GroverRun,
    /// Probability of measuring exactly k excited qubits, k = 0..=n.
    pub count_distribution: Vec<f64>,
}

pub fn demo_all_ones(n_qubits: usize) -> Result<DemoReport> {
    if n_qubits == 0 || n_qubits > MAX_BUS_QUBITS {
        return Err(Error::invalid(format!(
            "demo register size {n_qubits} outside 1..={MAX_BUS_QUBITS}"
        )));
    }
    let x0 = (1usize << n_qubits) - 1;
    let req = GroverRequest::new(n_qubits, x0);
    let spec = OracleSpec::new(n_qubits, x0)?;
    let iterations = auto_iterations(n_qubits);
    let exec = execute_bus(&req, &spec, iterations)?;
    let mut count_distribution = vec![0.0; n_qubits + 1];
    for bits in 0..1usize << n_qubits {
        count_distribution[bits.count_ones() as usize] += exec.state.register_probability(bits);
    }
    let success = exec
        .per_iteration
        .last()
        .copied()
        .unwrap_or(exec.initial_probability);
    Ok(DemoReport {
        run: GroverRun {
            schema_version: GROVER_SCHEMA_VERSION,
            n_qubits,
            x0,
            iterations,
            mode: ExecutionMode::Bus,
            osc_input: req.osc_input.label(),
            cutoff: Some(exec.cutoff),
            initial_probability: exec.initial_probability,
            per_iteration: exec.per_iteration,
            success_probability: success,
            report: None,
        },
        count_distribution,
    })
}
