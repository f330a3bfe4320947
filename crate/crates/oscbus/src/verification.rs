//! Randomized cross-validation of the two evaluation routes: the factored
//! closed form against brute-force matrix exponentials, plus a
//! finite-difference derivative check and a bundle of fixed identities.
//!
//! The two routes share nothing beyond the segment data model: one
//! integrates per-tuple scalar recursions, the other exponentiates dense
//! composite Hamiltonians. Agreement on randomized sequences is therefore
//! strong evidence against sign, ordering, and convention errors in either.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{Axis, DenseOperator, OscillatorSpec, Space};
use crate::integrator::{segment_hamiltonian, sequence_unitary, SimOptions, DEFAULT_MAX_DIM};
use crate::linalg;
use crate::model::{all_tuples, AxisFrame, InternalOperator, PulseSegment, PulseSequence};
use crate::propagator::{accumulate, closed_form_unitary};

pub const VERIFY_SCHEMA_VERSION: u32 = 1;
/// Largest |Z| permitted after rescaling, so a moderate cutoff suffices.
pub const DISPLACEMENT_CAP: f64 = 2.5;
/// Fock cutoff used for the randomized comparisons.
const CASE_CUTOFF: usize = 48;
/// Fock levels compared; populations from here rarely reach the cutoff.
const CASE_WINDOW: usize = 11;
const UNITARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: usize,
    pub tolerance: f64,
    pub max_dim: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            cases: 200,
            tolerance: 1e-6,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub index: usize,
    pub n_qubits: usize,
    pub segments: usize,
    pub cutoff: usize,
    pub fock_window: usize,
    pub max_displacement: f64,
    /// Max elementwise gap between the two routes inside the window.
    pub deviation: f64,
    /// Max-norm defect of U^dag U - I for the integrator route.
    pub unitarity_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeResult {
    pub index: usize,
    pub n_qubits: usize,
    /// Max elementwise gap between the finite-difference derivative of the
    /// closed form and -i H(t) U(t), inside the window.
    pub error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub cases: usize,
    pub tolerance: f64,
    pub worst_deviation: f64,
    pub worst_unitarity_defect: f64,
    pub failed_cases: usize,
    pub worst_derivative_error: f64,
    pub case_results: Vec<CaseResult>,
    pub derivative_results: Vec<DerivativeResult>,
    pub identity_checks: Vec<IdentityCheck>,
    pub pass: bool,
}

fn random_axis(rng: &mut ChaCha8Rng) -> Axis {
    match rng.gen_range(0..3u8) {
        0 => Axis::X,
        1 => Axis::Y,
        _ => Axis::Z,
    }
}

fn random_operator(rng: &mut ChaCha8Rng, frame: &AxisFrame, scale: f64) -> InternalOperator {
    let n = frame.n_qubits();
    let c0 = rng.gen_range(-0.5..0.5) * scale;
    let mut terms = Vec::with_capacity(n);
    for q in 0..n {
        if rng.gen_bool(0.7) {
            let axis = frame.axis(q).expect("qubit within frame");
            terms.push((q, axis, rng.gen_range(-0.5..0.5) * scale));
        }
    }
    InternalOperator::new(c0, terms)
}

/// One random segment: each coupling is active with probability 0.6, with
/// coefficient in [-2, 2]; at least one coupling is always active.
fn random_segment(
    rng: &mut ChaCha8Rng,
    frame: &AxisFrame,
    coupling_scale: f64,
    op_scale: f64,
    max_duration: f64,
) -> PulseSegment {
    let duration = rng.gen_range(0.2..max_duration);
    let mut seg = PulseSegment::idle(duration);
    let mut any = false;
    for slot in 0..4 {
        if !rng.gen_bool(0.6) {
            continue;
        }
        any = true;
        let coeff = rng.gen_range(-2.0..2.0) * coupling_scale;
        let op = random_operator(rng, frame, op_scale);
        seg = match slot {
            0 => seg.with_x(coeff, op),
            1 => seg.with_p(coeff, op),
            2 => seg.with_rotation(coeff, op),
            _ => seg.with_drift(coeff, op),
        };
    }
    if !any {
        let coeff = rng.gen_range(-2.0..2.0) * coupling_scale;
        seg = seg.with_x(coeff, random_operator(rng, frame, op_scale));
    }
    seg
}

fn random_frame(rng: &mut ChaCha8Rng, n_qubits: usize) -> AxisFrame {
    AxisFrame::new((0..n_qubits).map(|_| random_axis(rng)).collect())
}

/// Largest |Z| any eigen-tuple reaches along the sequence.
fn sequence_reach(seq: &PulseSequence) -> Result<f64> {
    let mut reach = 0.0f64;
    for s in all_tuples(seq.n_qubits()) {
        reach = reach.max(accumulate(seq, &s)?.max_displacement);
    }
    Ok(reach)
}

/// Uniformly rescale the displacement couplings so no tuple's trajectory
/// leaves |Z| <= cap. The path is linear in a joint (v, w) scale, so one
/// pass suffices; rotations and drifts are untouched.
fn cap_displacement(mut seq: PulseSequence, cap: f64) -> Result<(PulseSequence, f64)> {
    let reach = sequence_reach(&seq)?;
    if reach <= cap {
        return Ok((seq, reach));
    }
    let scale = cap / reach;
    for seg in seq.segments.iter_mut() {
        seg.v *= scale;
        seg.w *= scale;
    }
    Ok((seq, cap))
}

fn random_case_sequence(rng: &mut ChaCha8Rng) -> Result<(PulseSequence, f64)> {
    let n_qubits = rng.gen_range(2..=3usize);
    let frame = random_frame(rng, n_qubits);
    let n_segments = rng.gen_range(1..=6usize);
    let segments = (0..n_segments)
        .map(|_| random_segment(rng, &frame, 1.0, 1.0, 1.5))
        .collect();
    cap_displacement(PulseSequence::new(frame, segments), DISPLACEMENT_CAP)
}

fn unitarity_defect(u: &Array2<Complex64>) -> f64 {
    let prod = linalg::matmul(&linalg::adjoint(u), u);
    let eye = Array2::<Complex64>::eye(u.nrows());
    prod.iter()
        .zip(eye.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

fn evaluate_case(
    index: usize,
    seq: &PulseSequence,
    max_displacement: f64,
    tolerance: f64,
    max_dim: usize,
) -> Result<CaseResult> {
    let osc = OscillatorSpec::new(CASE_CUTOFF)?;
    let closed = closed_form_unitary(seq, osc)?;
    let brute = sequence_unitary(seq, osc, SimOptions { max_dim })?;
    let deviation = closed
        .unitary
        .max_abs_diff_within_fock(&brute, CASE_WINDOW)?;
    let defect = unitarity_defect(brute.matrix());
    Ok(CaseResult {
        index,
        n_qubits: seq.n_qubits(),
        segments: seq.segments.len(),
        cutoff: CASE_CUTOFF,
        fock_window: CASE_WINDOW,
        max_displacement,
        deviation,
        unitarity_defect: defect,
        pass: deviation <= tolerance && defect <= UNITARITY_TOLERANCE,
    })
}

/// Prefix of the sequence covering exactly the first `t` time units.
fn truncated_at(seq: &PulseSequence, t: f64) -> PulseSequence {
    let mut segments = Vec::new();
    let mut remaining = t;
    for seg in &seq.segments {
        if remaining >= seg.duration {
            segments.push(seg.clone());
            remaining -= seg.duration;
        } else {
            if remaining > 0.0 {
                let mut cut = seg.clone();
                cut.duration = remaining;
                segments.push(cut);
            }
            break;
        }
    }
    PulseSequence::new(seq.frame.clone(), segments)
}

fn segment_at(seq: &PulseSequence, t: f64) -> Option<&PulseSegment> {
    let mut start = 0.0;
    for seg in &seq.segments {
        if t > start && t < start + seg.duration {
            return Some(seg);
        }
        start += seg.duration;
    }
    None
}

fn closed_matrix(seq: &PulseSequence, t: f64, osc: OscillatorSpec) -> Result<Array2<Complex64>> {
    Ok(closed_form_unitary(&truncated_at(seq, t), osc)?
        .unitary
        .matrix()
        .clone())
}

fn windowed_max_diff(
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
    space: Space,
    window: usize,
) -> Result<f64> {
    let lhs = DenseOperator::new(a.clone(), space)?;
    let rhs = DenseOperator::new(b.clone(), space)?;
    lhs.max_abs_diff_within_fock(&rhs, window)
}

/// Check d/dt of the factored closed form against -i H(t) U(t) at one
/// mid-segment time, with a Richardson-extrapolated central difference.
fn evaluate_derivative_case(
    index: usize,
    rng: &mut ChaCha8Rng,
    tolerance: f64,
) -> Result<DerivativeResult> {
    let cutoff = 16usize;
    let window = 6usize;
    let n_qubits = rng.gen_range(2..=3usize);
    let frame = random_frame(rng, n_qubits);
    let n_segments = rng.gen_range(1..=2usize);
    let segments: Vec<PulseSegment> = (0..n_segments)
        .map(|_| random_segment(rng, &frame, 0.5, 0.5, 0.8))
        .collect();
    let (seq, _) = cap_displacement(PulseSequence::new(frame, segments), 1.0)?;

    // A point strictly inside a segment, away from its ends.
    let pick = rng.gen_range(0..seq.segments.len());
    let offset: f64 = seq.segments.iter().take(pick).map(|s| s.duration).sum();
    let t = offset + seq.segments[pick].duration * rng.gen_range(0.2..0.8);

    let osc = OscillatorSpec::new(cutoff)?;
    let space = Space::Composite { n_qubits, cutoff };
    let seg = segment_at(&seq, t).expect("t chosen mid-segment");
    let h = segment_hamiltonian(seg, &seq.frame, osc)?;
    let u_t = closed_matrix(&seq, t, osc)?;
    let target = linalg::matmul(&h, &u_t).mapv(|z| z * Complex64::new(0.0, -1.0));

    let h_step = 1e-4;
    let central = |dt: f64| -> Result<Array2<Complex64>> {
        let plus = closed_matrix(&seq, t + dt, osc)?;
        let minus = closed_matrix(&seq, t - dt, osc)?;
        Ok((&plus - &minus).mapv(|z| z / (2.0 * dt)))
    };
    let coarse = central(h_step)?;
    let fine = central(0.5 * h_step)?;
    // Richardson: cancels the quadratic truncation term of the central
    // difference.
    let derivative = (fine.mapv(|z| z * 4.0) - coarse).mapv(|z| z / 3.0);

    let error = windowed_max_diff(&derivative, &target, space, window)?;
    Ok(DerivativeResult {
        index,
        n_qubits,
        error,
        pass: error <= tolerance,
    })
}

fn check(name: &str, error: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        error,
        tolerance,
        pass: error <= tolerance,
    }
}

/// Fixed, deterministic sanity identities bundled into every verification
/// run.
fn identity_checks(max_dim: usize) -> Result<Vec<IdentityCheck>> {
    use crate::compiler::{compile_rectangle, ideal_register_unitary, register_unitary, GateSpec};
    use crate::hilbert::ZERO;

    let opts = SimOptions { max_dim };
    let mut checks = Vec::new();

    // Quiet sequence: both routes must give the exact identity.
    let frame = AxisFrame::uniform(Axis::Z, 2);
    let quiet = PulseSequence::new(frame.clone(), vec![PulseSegment::idle(1.0)]);
    let osc = OscillatorSpec::new(16)?;
    let closed = closed_form_unitary(&quiet, osc)?;
    let eye = DenseOperator::identity(closed.unitary.space());
    checks.push(check(
        "quiet sequence is the identity",
        closed.unitary.max_abs_diff_within_fock(&eye, 16)?,
        1e-12,
    ));

    // Full 2 pi number rotation: identity on integer spectrum.
    let turn = PulseSequence::new(
        AxisFrame::uniform(Axis::Z, 1),
        vec![PulseSegment::idle(std::f64::consts::TAU)
            .with_rotation(1.0, InternalOperator::new(1.0, []))],
    );
    let osc1 = OscillatorSpec::new(24)?;
    let turn_u = sequence_unitary(&turn, osc1, opts)?;
    let eye1 = DenseOperator::identity(turn_u.space());
    checks.push(check(
        "full number rotation returns",
        turn_u.max_abs_diff_within_fock(&eye1, 24)?,
        1e-9,
    ));

    // Coherent overlap of a single x impulse: <0|U|0> = exp(-l^2/4).
    let lam = 0.8f64;
    let impulse = PulseSequence::new(
        AxisFrame::uniform(Axis::Z, 1),
        vec![PulseSegment::idle(1.0).with_x(lam, InternalOperator::new(1.0, []))],
    );
    let osc_i = OscillatorSpec::new(32)?;
    let both = [
        closed_form_unitary(&impulse, osc_i)?.unitary,
        sequence_unitary(&impulse, osc_i, opts)?,
    ];
    let expected = (-lam * lam / 4.0).exp();
    let overlap_err = both
        .iter()
        .map(|u| (u.matrix()[(0, 0)].norm() - expected).abs())
        .fold(0.0, f64::max);
    checks.push(check("coherent vacuum overlap", overlap_err, 1e-9));

    // Compiled controlled flip: per-tuple phases against the dense
    // exponential oracle.
    let a = InternalOperator::new(0.5, [(0, Axis::Z, 0.5)]);
    let b = InternalOperator::pauli(Axis::X, 1);
    let cnot_frame = AxisFrame::new(vec![Axis::Z, Axis::X]);
    let prog = compile_rectangle(std::f64::consts::FRAC_PI_2, 1.0, &a, &b, &cnot_frame)?;
    let compiled = register_unitary(&prog)?;
    let ideal = ideal_register_unitary(&GateSpec::rectangle(
        std::f64::consts::FRAC_PI_2,
        1.0,
        a.clone(),
        b.clone(),
        cnot_frame.clone(),
    ))?;
    let gate_err = compiled
        .iter()
        .zip(ideal.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    checks.push(check("controlled flip phase table", gate_err, 1e-9));

    // The same program through both full-space routes.
    let rect_seq = match &prog.steps[0] {
        crate::model::ProgramStep::Pulse(seq) => seq.clone(),
        _ => unreachable!("rectangle compiles to one pulse sequence"),
    };
    let osc_r = OscillatorSpec::new(32)?;
    let closed_rect = closed_form_unitary(&rect_seq, osc_r)?;
    let brute_rect = sequence_unitary(&rect_seq, osc_r, opts)?;
    checks.push(check(
        "controlled flip dual route",
        closed_rect
            .unitary
            .max_abs_diff_within_fock(&brute_rect, 8)?,
        1e-8,
    ));

    // A closed gate must act identically on every low Fock level.
    let nf = 32;
    let m = closed_rect.unitary.matrix();
    let mut fock_spread = 0.0f64;
    for j in 0..4usize {
        for k in 0..4usize {
            let base = m[(j * nf, k * nf)];
            for f in 1..8usize {
                fock_spread = fock_spread.max((m[(j * nf + f, k * nf + f)] - base).norm());
            }
            let mut off = ZERO;
            off += m[(j * nf, k * nf + 3)];
            fock_spread = fock_spread.max(off.norm());
        }
    }
    checks.push(check(
        "closed gate ignores the oscillator",
        fock_spread,
        1e-8,
    ));

    Ok(checks)
}

/// Run the randomized dual-route comparison, the derivative check, and the
/// identity bundle. Deterministic for a given config.
pub fn run_verification(config: &VerifyConfig) -> Result<VerificationReport> {
    if config.cases == 0 {
        return Err(Error::invalid("verification needs at least one case"));
    }
    if config.tolerance <= 0.0 || config.tolerance.is_nan() {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Draw every case up front so results never depend on scheduling.
    let mut drawn = Vec::with_capacity(config.cases);
    for _ in 0..config.cases {
        drawn.push(random_case_sequence(&mut rng)?);
    }
    let case_results: Vec<CaseResult> = drawn
        .par_iter()
        .enumerate()
        .map(|(i, (seq, reach))| evaluate_case(i, seq, *reach, config.tolerance, config.max_dim))
        .collect::<Result<_>>()?;

    let n_derivative = 8usize.min(config.cases);
    let mut derivative_results = Vec::with_capacity(n_derivative);
    for i in 0..n_derivative {
        derivative_results.push(evaluate_derivative_case(i, &mut rng, config.tolerance)?);
    }

    let identity_results = identity_checks(config.max_dim)?;

    let worst_deviation = case_results.iter().map(|c| c.deviation).fold(0.0, f64::max);
    let worst_unitarity_defect = case_results
        .iter()
        .map(|c| c.unitarity_defect)
        .fold(0.0, f64::max);
    let failed_cases = case_results.iter().filter(|c| !c.pass).count();
    let worst_derivative_error = derivative_results
        .iter()
        .map(|d| d.error)
        .fold(0.0, f64::max);
    let pass = failed_cases == 0
        && derivative_results.iter().all(|d| d.pass)
        && identity_results.iter().all(|c| c.pass);
    Ok(VerificationReport {
        schema_version: VERIFY_SCHEMA_VERSION,
        seed: config.seed,
        cases: config.cases,
        tolerance: config.tolerance,
        worst_deviation,
        worst_unitarity_defect,
        failed_cases,
        worst_derivative_error,
        case_results,
        derivative_results,
        identity_checks: identity_results,
        pass,
    })
}
