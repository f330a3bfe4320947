//! Gate quality metrics: effective qubit unitary, disentanglement residual,
//! process fidelity, leakage, and consolidated reports.
//!
//! A closed pulse program acts as (qubit gate) x (oscillator identity), so
//! sandwiching the full propagator between one oscillator state on both
//! sides recovers the qubit gate; any deviation of that sandwich from
//! unitarity measures residual qubit-oscillator entanglement. Reports sweep
//! several oscillator inputs to check that the extracted gate does not
//! depend on them.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{DenseOperator, OscillatorSpec, Space, ZERO};
use crate::integrator::{program_unitary, SimOptions, DEFAULT_MAX_DIM};
use crate::linalg;
use crate::model::{all_tuples, Program, ProgramStep};
use crate::propagator::{accumulate, closure_report};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FIDELITY_THRESHOLD: f64 = 1.0 - 1e-6;
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
pub const SPREAD_TOLERANCE: f64 = 1e-8;

/// Oscillator input for a report sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OscInput {
    Fock(usize),
    Thermal(f64),
}

impl OscInput {
    pub fn label(&self) -> String {
        match self {
            OscInput::Fock(k) => format!("fock:{k}"),
            OscInput::Thermal(nbar) => format!("thermal:{nbar}"),
        }
    }
}

/// The sweep used by default: ground state, two excited Fock states, and an
/// incoherent mixture.
pub fn default_inputs() -> Vec<OscInput> {
    vec![
        OscInput::Fock(0),
        OscInput::Fock(1),
        OscInput::Fock(3),
        OscInput::Thermal(1.0),
    ]
}

/// Qubit gate extracted from a composite unitary at one oscillator state.
#[derive(Debug, Clone)]
pub struct EffectiveUnitary {
    pub matrix: Array2<Complex64>,
    /// Max-norm deviation of the extracted matrix from unitarity.
    pub residual: f64,
}

fn composite_shape(u: &DenseOperator) -> Result<(usize, usize)> {
    match u.space() {
        Space::Composite { n_qubits, cutoff } => Ok((n_qubits, cutoff)),
        _ => Err(Error::DimensionMismatch {
            expected: 0,
            actual: u.dim(),
        }),
    }
}

fn unitarity_residual(g: &Array2<Complex64>) -> f64 {
    let prod = linalg::matmul(&linalg::adjoint(g), g);
    let eye = Array2::<Complex64>::eye(g.nrows());
    prod.iter()
        .zip(eye.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// G_eff[j,k] = <j, phi| U |k, phi> for a pure oscillator state phi, with
/// its unitarity defect as the entanglement residual.
pub fn effective_qubit_unitary(
    u: &DenseOperator,
    osc_state: &Array1<Complex64>,
) -> Result<EffectiveUnitary> {
    let (n_qubits, cutoff) = composite_shape(u)?;
    if osc_state.len() != cutoff {
        return Err(Error::DimensionMismatch {
            expected: cutoff,
            actual: osc_state.len(),
        });
    }
    let norm: f64 = osc_state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized {
            deviation: (norm - 1.0).abs(),
        });
    }
    let dim_q = 1usize << n_qubits;
    let m = u.matrix();
    let mut g = Array2::<Complex64>::from_elem((dim_q, dim_q), ZERO);
    for j in 0..dim_q {
        for k in 0..dim_q {
            let mut acc = ZERO;
            for (f, amp) in osc_state.iter().enumerate() {
                let row = j * cutoff + f;
                let mut inner = ZERO;
                for (fp, amp_in) in osc_state.iter().enumerate() {
                    inner += m[(row, k * cutoff + fp)] * amp_in;
                }
                acc += amp.conj() * inner;
            }
            g[(j, k)] = acc;
        }
    }
    let residual = unitarity_residual(&g);
    Ok(EffectiveUnitary {
        matrix: g,
        residual,
    })
}

/// Fast path of [`effective_qubit_unitary`] at a Fock basis state |m>.
fn fock_effective(u: &DenseOperator, fock: usize) -> Result<EffectiveUnitary> {
    let (n_qubits, cutoff) = composite_shape(u)?;
    if fock >= cutoff {
        return Err(Error::invalid(format!(
            "Fock input {fock} outside cutoff {cutoff}"
        )));
    }
    let dim_q = 1usize << n_qubits;
    let m = u.matrix();
    let g = Array2::from_shape_fn((dim_q, dim_q), |(j, k)| {
        m[(j * cutoff + fock, k * cutoff + fock)]
    });
    let residual = unitarity_residual(&g);
    Ok(EffectiveUnitary {
        matrix: g,
        residual,
    })
}

/// Global-phase-invariant overlap |Tr(G_ideal^dag G_eff)| / 2^n.
pub fn process_fidelity(g_eff: &Array2<Complex64>, g_ideal: &Array2<Complex64>) -> Result<f64> {
    if g_eff.dim() != g_ideal.dim() {
        return Err(Error::DimensionMismatch {
            expected: g_ideal.nrows(),
            actual: g_eff.nrows(),
        });
    }
    let mut trace = ZERO;
    for j in 0..g_eff.nrows() {
        for k in 0..g_eff.nrows() {
            trace += g_ideal[(k, j)].conj() * g_eff[(k, j)];
        }
    }
    Ok(trace.norm() / g_eff.nrows() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureSummary {
    pub worst_v: f64,
    pub worst_w: f64,
    pub worst_r: f64,
    pub is_closed: bool,
}

/// Consolidated gate quality report over a sweep of oscillator inputs.
#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub schema_version: u32,
    pub cutoff_used: usize,
    /// Process fidelity against the ideal gate, keyed by input label.
    pub fidelities: BTreeMap<String, f64>,
    /// Entanglement residual of the extracted gate, keyed by input label.
    pub residuals: BTreeMap<String, f64>,
    pub fidelity_spread: f64,
    pub worst_leakage: f64,
    pub closure: ClosureSummary,
    pub fidelity_threshold: f64,
    pub pass: bool,
}

/// Report configuration. `cutoff: None` converges the cutoff by doubling.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub inputs: Vec<OscInput>,
    pub fidelity_threshold: f64,
    pub max_dim: usize,
    pub cutoff: Option<usize>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            inputs: default_inputs(),
            fidelity_threshold: DEFAULT_FIDELITY_THRESHOLD,
            max_dim: DEFAULT_MAX_DIM,
            cutoff: None,
        }
    }
}

struct Evaluation {
    fidelities: BTreeMap<String, f64>,
    residuals: BTreeMap<String, f64>,
    leakage: f64,
}

/// First Fock level of the truncation guard band (top quarter of the space).
fn margin_start(cutoff: usize) -> usize {
    cutoff - cutoff / 4
}

/// Population of the top-quarter Fock levels in the column of U that starts
/// from register state `reg` and Fock level `fock`.
fn column_leakage(u: &DenseOperator, reg: usize, fock: usize) -> Result<f64> {
    let (n_qubits, cutoff) = composite_shape(u)?;
    let margin_start = margin_start(cutoff);
    let col = reg * cutoff + fock;
    let m = u.matrix();
    let mut pop = 0.0;
    for r in 0..1usize << n_qubits {
        for k in margin_start..cutoff {
            pop += m[(r * cutoff + k, col)].norm_sqr();
        }
    }
    Ok(pop)
}

fn worst_register_leakage(u: &DenseOperator, fock: usize) -> Result<f64> {
    let (n_qubits, _) = composite_shape(u)?;
    let mut worst = 0.0f64;
    for reg in 0..1usize << n_qubits {
        worst = worst.max(column_leakage(u, reg, fock)?);
    }
    Ok(worst)
}

fn thermal_weights(nbar: f64, levels: usize) -> Vec<f64> {
    let q = nbar / (nbar + 1.0);
    let raw: Vec<f64> = (0..levels).map(|k| q.powi(k as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn evaluate_at_cutoff(
    prog: &Program,
    ideal: &Array2<Complex64>,
    inputs: &[OscInput],
    cutoff: usize,
    max_dim: usize,
) -> Result<Evaluation> {
    let osc = OscillatorSpec::new(cutoff)?;
    let u = program_unitary(prog, osc, SimOptions { max_dim })?;
    let mut fidelities = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    let mut leakage = 0.0f64;
    for input in inputs {
        let trusted = margin_start(cutoff);
        let (fid, res, leak) = match input {
            OscInput::Fock(m) => {
                if *m >= trusted {
                    return Err(Error::invalid(format!(
                        "Fock input {m} sits in the truncation guard band at cutoff {cutoff}"
                    )));
                }
                let eff = fock_effective(&u, *m)?;
                let fid = process_fidelity(&eff.matrix, ideal)?;
                let leak = worst_register_leakage(&u, *m)?;
                (fid, eff.residual, leak)
            }
            OscInput::Thermal(nbar) => {
                if *nbar < 0.0 || nbar.is_nan() {
                    return Err(Error::invalid("mean occupation must be nonnegative"));
                }
                // Boltzmann average of per-Fock metrics: valid because a
                // closed gate is block-diagonal per Fock level, so the
                // mixture's behavior is the weighted sum of its components.
                // Components inside the guard band are excluded (the cutoff
                // is sized so their true weight is below 1e-10).
                let weights = thermal_weights(*nbar, trusted);
                let mut fid = 0.0;
                let mut res = 0.0;
                let mut leak = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    if *w < 1e-14 {
                        continue;
                    }
                    let eff = fock_effective(&u, k)?;
                    fid += w * process_fidelity(&eff.matrix, ideal)?;
                    res += w * eff.residual;
                    leak += w * worst_register_leakage(&u, k)?;
                }
                (fid, res, leak)
            }
        };
        fidelities.insert(input.label(), fid);
        residuals.insert(input.label(), res);
        leakage = leakage.max(leak);
    }
    Ok(Evaluation {
        fidelities,
        residuals,
        leakage,
    })
}

/// Smallest cutoff that keeps every requested thermal tail below 1e-10 and
/// every trajectory's displacement comfortably inside the truncated space.
pub(crate) fn initial_cutoff(prog: &Program, inputs: &[OscInput]) -> Result<usize> {
    let mut floor = 16usize;
    for input in inputs {
        // Every input must sit below the top-quarter guard band, so each
        // level requirement is padded by 4/3 in cutoff terms.
        match input {
            OscInput::Fock(m) => floor = floor.max((4 * (m + 4)).div_ceil(3)),
            OscInput::Thermal(nbar) => {
                if *nbar > 0.0 {
                    let q = nbar / (nbar + 1.0);
                    let need = (1e-10f64.ln() / q.ln()).ceil() as usize + 1;
                    floor = floor.max((4 * need).div_ceil(3) + 2);
                }
            }
        }
    }
    let mut max_disp = 0.0f64;
    for step in &prog.steps {
        if let ProgramStep::Pulse(seq) = step {
            for s in all_tuples(prog.n_qubits) {
                max_disp = max_disp.max(accumulate(seq, &s)?.max_displacement);
            }
        }
    }
    // Poisson mean d^2/2 from a displacement d; pad by ten standard
    // deviations so the starting guess is already near convergence.
    let mean = 0.5 * max_disp * max_disp;
    let displacement_need = (mean + 10.0 * mean.sqrt()).ceil() as usize + 8;
    Ok(floor.max(displacement_need))
}

fn closure_summary(prog: &Program) -> Result<ClosureSummary> {
    let (mut worst_v, mut worst_w, mut worst_r) = (0.0f64, 0.0f64, 0.0f64);
    let mut is_closed = true;
    for step in &prog.steps {
        if let ProgramStep::Pulse(seq) = step {
            let report = closure_report(seq)?;
            worst_v = worst_v.max(report.worst_v);
            worst_w = worst_w.max(report.worst_w);
            worst_r = worst_r.max(report.worst_r);
            is_closed &= report.is_closed;
        }
    }
    Ok(ClosureSummary {
        worst_v,
        worst_w,
        worst_r,
        is_closed,
    })
}

fn assemble(
    eval: Evaluation,
    cutoff: usize,
    closure: ClosureSummary,
    threshold: f64,
) -> GateReport {
    let spread = match (
        eval.fidelities.values().cloned().reduce(f64::max),
        eval.fidelities.values().cloned().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let pass = closure.is_closed
        && eval.leakage <= LEAKAGE_THRESHOLD
        && spread <= SPREAD_TOLERANCE
        && eval.fidelities.values().all(|f| *f >= threshold);
    GateReport {
        schema_version: REPORT_SCHEMA_VERSION,
        cutoff_used: cutoff,
        fidelities: eval.fidelities,
        residuals: eval.residuals,
        fidelity_spread: spread,
        worst_leakage: eval.leakage,
        closure,
        fidelity_threshold: threshold,
        pass,
    }
}

/// Evaluate a compiled program against its ideal register gate over a sweep
/// of oscillator inputs, converging the Fock cutoff unless one is pinned.
pub fn gate_report(
    prog: &Program,
    ideal: &Array2<Complex64>,
    opts: &ReportOptions,
) -> Result<GateReport> {
    if ideal.nrows() != 1usize << prog.n_qubits || ideal.nrows() != ideal.ncols() {
        return Err(Error::DimensionMismatch {
            expected: 1usize << prog.n_qubits,
            actual: ideal.nrows(),
        });
    }
    let closure = closure_summary(prog)?;
    if let Some(cutoff) = opts.cutoff {
        let eval = evaluate_at_cutoff(prog, ideal, &opts.inputs, cutoff, opts.max_dim)?;
        return Ok(assemble(eval, cutoff, closure, opts.fidelity_threshold));
    }

    let dim_q = 1usize << prog.n_qubits;
    let mut cutoff = initial_cutoff(prog, &opts.inputs)?;
    if dim_q * cutoff > opts.max_dim {
        return Err(Error::DimensionCap {
            dim: dim_q * cutoff,
            cap: opts.max_dim,
        });
    }
    let mut prev = evaluate_at_cutoff(prog, ideal, &opts.inputs, cutoff, opts.max_dim)?;
    let mut last_change = f64::INFINITY;
    loop {
        let next_cutoff = cutoff * 2;
        if dim_q * next_cutoff > opts.max_dim {
            return Err(Error::CutoffNotConverged {
                cap: opts.max_dim,
                last_change,
            });
        }
        let next = evaluate_at_cutoff(prog, ideal, &opts.inputs, next_cutoff, opts.max_dim)?;
        last_change = prev
            .fidelities
            .iter()
            .map(|(label, f)| (f - next.fidelities[label]).abs())
            .fold(0.0, f64::max);
        if last_change < CONVERGENCE_TOLERANCE && next.leakage <= LEAKAGE_THRESHOLD {
            return Ok(assemble(
                next,
                next_cutoff,
                closure,
                opts.fidelity_threshold,
            ));
        }
        cutoff = next_cutoff;
        prev = next;
    }
}
