//! Gate synthesis: high-level gate requests compiled to pulse programs.
//!
//! Every construction here reduces to closed displacement loops whose
//! enclosed area carries the gate phase. A rectangle of impulses l1, l2
//! yields exp(-i l1 l2 A B); sandwiching the x-displacement side between
//! +/- theta number-operator rotations turns the area into an
//! operator-valued cos(theta C) factor; sums of cosines assembled from a
//! finite Fourier expansion of the control projector produce Toffoli-class
//! gates. Chains share parallelogram sides so compiled multi-term programs
//! use strictly fewer segments than their naive concatenation.

use std::collections::BTreeSet;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{kron, matrix_exponential, Axis, DenseOperator, Space};
use crate::linalg;
use crate::model::{
    AxisFrame, IdealLocal, InternalOperator, Program, ProgramStep, PulseSegment, PulseSequence,
};
use crate::propagator::{accumulate, closure_report, frame_diagonal_unitary};

/// One cosine factor of a chained gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainTerm {
    pub mu: f64,
    pub theta: f64,
}

/// Weighted rotation angle in the finite Fourier expansion of the
/// all-controls-on projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    pub weight: f64,
    pub angle: f64,
}

/// A gate request: what to compile, and the axis frame it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub kind: GateKind,
    pub frame: AxisFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    /// exp(-i l1 l2 A B)
    Rectangle {
        l1: f64,
        l2: f64,
        a: InternalOperator,
        b: InternalOperator,
    },
    /// exp(-i mu A cos(theta C))
    Parallelogram {
        mu: f64,
        theta: f64,
        a: InternalOperator,
        c: InternalOperator,
    },
    /// prod_k exp(-i mu_k A cos(theta_k C))
    Chain {
        terms: Vec<ChainTerm>,
        a: InternalOperator,
        c: InternalOperator,
    },
    /// exp(-i pi (sigma_z1+1)(sigma_z2+1) sigma_x3 / 8)
    Toffoli { k: u32, omega: f64 },
    /// exp(-i (pi/2) P sigma_x_target), P = product of control projectors
    CnNot { n_controls: usize },
    /// exp(-i mu prod_l sigma_zl)
    ProductPhase { mu: f64, qubits: BTreeSet<usize> },
}

impl GateSpec {
    pub fn rectangle(
        l1: f64,
        l2: f64,
        a: InternalOperator,
        b: InternalOperator,
        frame: AxisFrame,
    ) -> Self {
        GateSpec {
            kind: GateKind::Rectangle { l1, l2, a, b },
            frame,
        }
    }

    pub fn parallelogram(
        mu: f64,
        theta: f64,
        a: InternalOperator,
        c: InternalOperator,
        frame: AxisFrame,
    ) -> Self {
        GateSpec {
            kind: GateKind::Parallelogram { mu, theta, a, c },
            frame,
        }
    }

    pub fn chain(
        terms: Vec<ChainTerm>,
        a: InternalOperator,
        c: InternalOperator,
        frame: AxisFrame,
    ) -> Self {
        GateSpec {
            kind: GateKind::Chain { terms, a, c },
            frame,
        }
    }

    pub fn toffoli(k: u32, omega: f64) -> Self {
        GateSpec {
            kind: GateKind::Toffoli { k, omega },
            frame: toffoli_frame(),
        }
    }

    pub fn cnnot(n_controls: usize) -> Self {
        GateSpec {
            kind: GateKind::CnNot { n_controls },
            frame: cnnot_frame(n_controls),
        }
    }

    pub fn product_phase(mu: f64, qubits: BTreeSet<usize>) -> Self {
        let n = qubits.iter().next_back().map_or(1, |&q| q + 1);
        GateSpec {
            kind: GateKind::ProductPhase { mu, qubits },
            frame: AxisFrame::uniform(Axis::Z, n),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.frame.n_qubits()
    }
}

fn toffoli_frame() -> AxisFrame {
    AxisFrame::new(vec![Axis::Z, Axis::Z, Axis::X])
}

fn cnnot_frame(n_controls: usize) -> AxisFrame {
    let mut axes = vec![Axis::Z; n_controls];
    axes.push(Axis::X);
    AxisFrame::new(axes)
}

fn require_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("gate parameters must be finite"));
    }
    Ok(())
}

/// Package segments as a single-sequence program, rejecting anything that
/// fails sequence validation or does not close.
fn finish(frame: AxisFrame, segments: Vec<PulseSegment>) -> Result<Program> {
    let seq = PulseSequence::new(frame, segments);
    if let Some(v) = seq.validate().first() {
        return Err(Error::invalid(format!("compiled sequence invalid: {v}")));
    }
    let report = closure_report(&seq)?;
    if !report.is_closed {
        return Err(Error::invalid(format!(
            "compiled sequence does not close (residuals v={:.2e} w={:.2e} r={:.2e})",
            report.worst_v, report.worst_w, report.worst_r
        )));
    }
    Ok(Program::from_sequence(seq))
}

/// Four unit-duration impulses tracing a rectangle: exp(-i l1 l2 A B).
pub fn compile_rectangle(
    l1: f64,
    l2: f64,
    a: &InternalOperator,
    b: &InternalOperator,
    frame: &AxisFrame,
) -> Result<Program> {
    require_finite(&[l1, l2])?;
    finish(frame.clone(), rectangle_segments(l1, l2, a, b))
}

fn rectangle_segments(
    l1: f64,
    l2: f64,
    a: &InternalOperator,
    b: &InternalOperator,
) -> Vec<PulseSegment> {
    vec![
        PulseSegment::idle(1.0).with_p(l2, b.clone()),
        PulseSegment::idle(1.0).with_x(l1, a.clone()),
        PulseSegment::idle(1.0).with_p(-l2, b.clone()),
        PulseSegment::idle(1.0).with_x(-l1, a.clone()),
    ]
}

/// Parallelogram with the x-displacement sides conjugated by +/- theta
/// number-operator rotations: exp(-i mu A B cos(theta C)), B defaulting to
/// the identity in [`compile_parallelogram`].
pub fn compile_parallelogram_with(
    mu: f64,
    theta: f64,
    a: &InternalOperator,
    c: &InternalOperator,
    b: &InternalOperator,
    frame: &AxisFrame,
) -> Result<Program> {
    require_finite(&[mu, theta])?;
    finish(
        frame.clone(),
        parallelogram_segments(mu, theta, a, c, b, Orientation::Standard),
    )
}

/// exp(-i mu A cos(theta C)).
pub fn compile_parallelogram(
    mu: f64,
    theta: f64,
    a: &InternalOperator,
    c: &InternalOperator,
    frame: &AxisFrame,
) -> Result<Program> {
    compile_parallelogram_with(mu, theta, a, c, &InternalOperator::identity(), frame)
}

/// Cyclic variants of the same closed loop. Shifting the starting segment
/// changes neither closure nor the enclosed area, but lines the shared side
/// up at chain junctions.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Orientation {
    /// w+, rot+, v+, rot-, w-, rot+, v-, rot-
    Standard,
    /// rot+, v+, rot-, w-, rot+, v-, rot-, w+   (ends on the shared side)
    SharedSideLast,
    /// w-, rot+, v-, rot-, w+, rot+, v+, rot-   (starts on the shared side)
    SharedSideFirst,
}

fn parallelogram_segments(
    mu: f64,
    theta: f64,
    a: &InternalOperator,
    c: &InternalOperator,
    b: &InternalOperator,
    orientation: Orientation,
) -> Vec<PulseSegment> {
    let w_plus = PulseSegment::idle(1.0).with_p(1.0, b.clone());
    let w_minus = PulseSegment::idle(1.0).with_p(-1.0, b.clone());
    let v_plus = PulseSegment::idle(1.0).with_x(mu, a.clone());
    let v_minus = PulseSegment::idle(1.0).with_x(-mu, a.clone());
    let rot = |angle: f64| PulseSegment::idle(1.0).with_rotation(angle, c.clone());

    let with_rotations: Vec<PulseSegment> = match orientation {
        Orientation::Standard => vec![
            w_plus,
            rot(theta),
            v_plus,
            rot(-theta),
            w_minus,
            rot(theta),
            v_minus,
            rot(-theta),
        ],
        Orientation::SharedSideLast => vec![
            rot(theta),
            v_plus,
            rot(-theta),
            w_minus,
            rot(theta),
            v_minus,
            rot(-theta),
            w_plus,
        ],
        Orientation::SharedSideFirst => vec![
            w_minus,
            rot(theta),
            v_minus,
            rot(-theta),
            w_plus,
            rot(theta),
            v_plus,
            rot(-theta),
        ],
    };
    // Zero-angle rotations are no-ops; dropping them keeps theta = 0 an
    // exact rectangle.
    with_rotations
        .into_iter()
        .filter(|seg| !(seg.v == 0.0 && seg.w == 0.0 && seg.g == 0.0 && seg.r == 0.0))
        .collect()
}

fn is_pure_p(seg: &PulseSegment) -> bool {
    seg.v == 0.0 && seg.r == 0.0 && seg.g == 0.0 && seg.w != 0.0
}

fn is_pure_rotation(seg: &PulseSegment) -> bool {
    seg.v == 0.0 && seg.w == 0.0 && seg.g == 0.0 && seg.r != 0.0
}

enum MergeAction {
    Keep,
    DropBoth,
    Replace(PulseSegment),
}

fn try_merge(prev: &PulseSegment, next: &PulseSegment) -> MergeAction {
    if is_pure_p(prev) && is_pure_p(next) && prev.b == next.b {
        // Opposite impulses along the same operator traverse the shared
        // side out and back: exactly removable.
        if prev.w * prev.duration + next.w * next.duration == 0.0 {
            return MergeAction::DropBoth;
        }
    }
    if is_pure_rotation(prev) && is_pure_rotation(next) && prev.c == next.c {
        let angle = prev.r * prev.duration + next.r * next.duration;
        if angle == 0.0 {
            return MergeAction::DropBoth;
        }
        return MergeAction::Replace(PulseSegment::idle(1.0).with_rotation(angle, prev.c.clone()));
    }
    MergeAction::Keep
}

/// Cancel shared sides and fuse adjacent rotations. Both rewrites leave the
/// per-tuple propagator record of the whole sequence unchanged.
fn merge_segments(mut segs: Vec<PulseSegment>) -> Vec<PulseSegment> {
    loop {
        let mut out: Vec<PulseSegment> = Vec::with_capacity(segs.len());
        let mut changed = false;
        for seg in segs {
            match out.last().map(|prev| try_merge(prev, &seg)) {
                Some(MergeAction::DropBoth) => {
                    out.pop();
                    changed = true;
                }
                Some(MergeAction::Replace(merged)) => {
                    out.pop();
                    out.push(merged);
                    changed = true;
                }
                _ => out.push(seg),
            }
        }
        if !changed {
            return out;
        }
        segs = out;
    }
}

/// Chain of parallelograms with alternating orientation so each one shares
/// a p-displacement side with its neighbor: prod_k exp(-i mu_k A cos(theta_k C))
/// in strictly fewer segments than the standalone concatenation.
pub fn compile_chain(
    terms: &[ChainTerm],
    a: &InternalOperator,
    c: &InternalOperator,
    frame: &AxisFrame,
) -> Result<Program> {
    if terms.is_empty() {
        return Err(Error::invalid("chain needs at least one term"));
    }
    require_finite(
        &terms
            .iter()
            .flat_map(|t| [t.mu, t.theta])
            .collect::<Vec<_>>(),
    )?;
    let identity = InternalOperator::identity();
    let mut segs = Vec::new();
    for (k, term) in terms.iter().enumerate() {
        let orientation = if k % 2 == 0 {
            Orientation::SharedSideLast
        } else {
            Orientation::SharedSideFirst
        };
        segs.extend(parallelogram_segments(
            term.mu,
            term.theta,
            a,
            c,
            &identity,
            orientation,
        ));
    }
    finish(frame.clone(), merge_segments(segs))
}

/// One continuously rotating loop: exp(-i pi (sigma_z1+1)(sigma_z2+1) sigma_x3 / 8).
///
/// The drive coefficient and rotation rate share the magnitude `omega`; the
/// loop closes after K full turns and the swept area is K-independent. The
/// drift term removes the area's tuple-independent offset. On the triggered
/// control subspace the target transformation is exp(-i pi sigma_x / 2) =
/// -i sigma_x: a subspace phase of -i relative to a bare flip, kept as part
/// of the gate definition.
pub fn compile_toffoli(k: u32, omega: f64) -> Result<Program> {
    if k == 0 {
        return Err(Error::invalid("loop count K must be a positive integer"));
    }
    require_finite(&[omega])?;
    if omega <= 0.0 {
        return Err(Error::invalid("drive rate omega must be positive"));
    }
    let kf = f64::from(k);
    let scale = 1.0 / (4.0 * kf.sqrt());
    let a = InternalOperator::new(scale, [(0, Axis::Z, scale), (1, Axis::Z, scale)]);
    let seg = PulseSegment::idle(2.0 * std::f64::consts::PI * kf / omega)
        .with_x(omega, a)
        .with_rotation(-omega, InternalOperator::pauli(Axis::X, 2))
        .with_drift(-omega / (32.0 * kf), InternalOperator::pauli(Axis::X, 2));
    finish(toffoli_frame(), vec![seg])
}

/// Weights and angles expanding the all-controls-on projector as a finite
/// cosine sum: prod_l (sigma_zl + 1)/2 = sum_k weight cos(angle_k (Jz - J)).
pub fn projector_fourier_terms(n_controls: usize) -> Result<Vec<FourierTerm>> {
    if n_controls == 0 {
        return Err(Error::invalid("need at least one control qubit"));
    }
    let base = n_controls + 1;
    Ok((1..=base)
        .map(|k| FourierTerm {
            weight: 1.0 / base as f64,
            angle: std::f64::consts::TAU * k as f64 / base as f64,
        })
        .collect())
}

/// Jz - J on the given control qubits: eigenvalue -m when m controls are in
/// |0>.
fn depth_operator(controls: impl Iterator<Item = usize> + Clone) -> InternalOperator {
    depth_operator_along(Axis::Z, controls)
}

/// Same counting operator along an arbitrary axis: eigenvalue -m when m of
/// the qubits sit in the axis' -1 eigenstate.
pub(crate) fn depth_operator_along(
    axis: Axis,
    qubits: impl Iterator<Item = usize> + Clone,
) -> InternalOperator {
    let count = qubits.clone().count() as f64;
    InternalOperator::new(-count / 2.0, qubits.map(|q| (q, axis, 0.5)))
}

/// Chain realizing exp(-i (pi/2) P sigma_x_target) with P the product of
/// control projectors: qubits 0..n_controls control, qubit n_controls is
/// the target.
pub fn compile_cnnot(n_controls: usize) -> Result<Program> {
    let fourier = projector_fourier_terms(n_controls)?;
    let terms: Vec<ChainTerm> = fourier
        .iter()
        .map(|t| ChainTerm {
            mu: std::f64::consts::FRAC_PI_2 * t.weight,
            theta: t.angle,
        })
        .collect();
    let a = InternalOperator::pauli(Axis::X, n_controls);
    let c = depth_operator(0..n_controls);
    compile_chain(&terms, &a, &c, &cnnot_frame(n_controls))
}

/// Single parallelogram for exp(-i mu prod_l sigma_zl): theta = pi and
/// C = sum (sigma_zl - 1)/2 turn the cosine into the parity product.
pub fn compile_product_phase(mu: f64, qubits: &BTreeSet<usize>) -> Result<Program> {
    if qubits.is_empty() {
        return Err(Error::invalid("product phase needs at least one qubit"));
    }
    require_finite(&[mu])?;
    let n = qubits.iter().next_back().map_or(1, |&q| q + 1);
    let c = depth_operator(qubits.iter().copied());
    compile_parallelogram(
        mu,
        std::f64::consts::PI,
        &InternalOperator::identity(),
        &c,
        &AxisFrame::uniform(Axis::Z, n),
    )
}

/// Compile any gate request.
pub fn compile(spec: &GateSpec) -> Result<Program> {
    match &spec.kind {
        GateKind::Rectangle { l1, l2, a, b } => compile_rectangle(*l1, *l2, a, b, &spec.frame),
        GateKind::Parallelogram { mu, theta, a, c } => {
            compile_parallelogram(*mu, *theta, a, c, &spec.frame)
        }
        GateKind::Chain { terms, a, c } => compile_chain(terms, a, c, &spec.frame),
        GateKind::Toffoli { k, omega } => compile_toffoli(*k, *omega),
        GateKind::CnNot { n_controls } => compile_cnnot(*n_controls),
        GateKind::ProductPhase { mu, qubits } => compile_product_phase(*mu, qubits),
    }
}

/// Exact register-space unitary of a compiled program whose pulse sequences
/// all close: each sequence contributes only its per-tuple phases, and
/// ideal local rotations act directly.
pub fn register_unitary(prog: &Program) -> Result<Array2<Complex64>> {
    let n = prog.n_qubits;
    let dim = 1usize << n;
    let mut total = Array2::<Complex64>::eye(dim);
    for step in &prog.steps {
        let u = match step {
            ProgramStep::Pulse(seq) => {
                let report = closure_report(seq)?;
                if !report.is_closed {
                    return Err(Error::invalid(
                        "sequence does not close; it has no register-only unitary",
                    ));
                }
                let frame = seq.frame.clone();
                let mut phases = Vec::new();
                for s in crate::model::all_tuples(n) {
                    let rec = accumulate(seq, &s)?;
                    phases.push(Complex64::from_polar(1.0, -rec.total_phase()));
                }
                frame_diagonal_unitary(&frame, |s| {
                    let mut idx = 0usize;
                    for &b in s {
                        idx = (idx << 1) | usize::from(b > 0);
                    }
                    phases[idx]
                })
            }
            ProgramStep::Local(local) => local_register_unitary(local, n)?,
        };
        total = linalg::matmul(&u, &total);
    }
    Ok(total)
}

fn local_register_unitary(local: &IdealLocal, n_qubits: usize) -> Result<Array2<Complex64>> {
    if local.qubit >= n_qubits {
        return Err(Error::QubitOutOfRange {
            index: local.qubit,
            n_qubits,
        });
    }
    let before = 1usize << local.qubit;
    let after = 1usize << (n_qubits - 1 - local.qubit);
    Ok(kron(
        &kron(&Array2::eye(before), &local.unitary_2x2()),
        &Array2::eye(after),
    ))
}

/// Directly exponentiated target unitary for a gate request, built from
/// dense Pauli algebra with no reference to pulse schedules.
pub fn ideal_register_unitary(spec: &GateSpec) -> Result<Array2<Complex64>> {
    let frame = &spec.frame;
    let n = frame.n_qubits();
    let space = Space::Qubits { n_qubits: n };
    let exp_of = |h: Array2<Complex64>| -> Result<Array2<Complex64>> {
        let op = DenseOperator::new(h, space)?;
        Ok(matrix_exponential(&op, 1.0)?.into_matrix())
    };
    match &spec.kind {
        GateKind::Rectangle { l1, l2, a, b } => {
            let scale = l1 * l2;
            let prod = linalg::matmul(&a.to_matrix(frame)?, &b.to_matrix(frame)?);
            exp_of(prod.mapv(|z| z * scale))
        }
        GateKind::Parallelogram { mu, theta, a, c } => {
            exp_of(parallelogram_generator(*mu, *theta, a, c, frame)?)
        }
        GateKind::Chain { terms, a, c } => {
            let dim = 1usize << n;
            let mut total = Array2::<Complex64>::eye(dim);
            for t in terms {
                let u = exp_of(parallelogram_generator(t.mu, t.theta, a, c, frame)?)?;
                total = linalg::matmul(&u, &total);
            }
            Ok(total)
        }
        GateKind::Toffoli { .. } => {
            let z1 = shifted_pauli(Axis::Z, 0, n, frame)?;
            let z2 = shifted_pauli(Axis::Z, 1, n, frame)?;
            let x3 = InternalOperator::pauli(Axis::X, 2).to_matrix(frame)?;
            let gen = linalg::matmul(&linalg::matmul(&z1, &z2), &x3);
            exp_of(gen.mapv(|z| z * std::f64::consts::PI / 8.0))
        }
        GateKind::CnNot { n_controls } => {
            let mut p = Array2::<Complex64>::eye(1usize << n);
            for q in 0..*n_controls {
                let proj = shifted_pauli(Axis::Z, q, n, frame)?.mapv(|z| z * 0.5);
                p = linalg::matmul(&p, &proj);
            }
            let x_t = InternalOperator::pauli(Axis::X, *n_controls).to_matrix(frame)?;
            let gen = linalg::matmul(&p, &x_t);
            exp_of(gen.mapv(|z| z * std::f64::consts::FRAC_PI_2))
        }
        GateKind::ProductPhase { mu, qubits } => {
            let scale = *mu;
            let mut prod = Array2::<Complex64>::eye(1usize << n);
            for &q in qubits {
                let z = InternalOperator::pauli(Axis::Z, q).to_matrix(frame)?;
                prod = linalg::matmul(&prod, &z);
            }
            exp_of(prod.mapv(|z| z * scale))
        }
    }
}

/// sigma_axis(q) + 1 as a dense matrix.
fn shifted_pauli(
    axis: Axis,
    qubit: usize,
    n: usize,
    frame: &AxisFrame,
) -> Result<Array2<Complex64>> {
    let pauli = InternalOperator::pauli(axis, qubit).to_matrix(frame)?;
    Ok(&pauli + &Array2::<Complex64>::eye(1usize << n))
}

/// mu A B cos(theta C) as a dense Hermitian generator.
fn parallelogram_generator(
    mu: f64,
    theta: f64,
    a: &InternalOperator,
    c: &InternalOperator,
    frame: &AxisFrame,
) -> Result<Array2<Complex64>> {
    let c_mat = c.to_matrix(frame)?;
    let (vals, vecs) = linalg::eigh(&c_mat)?;
    let cos_c = linalg::spectral_map(&vals, &vecs, |lam| Complex64::new((theta * lam).cos(), 0.0));
    let prod = linalg::matmul(&a.to_matrix(frame)?, &cos_c);
    Ok(prod.mapv(|z| z * mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli_2x2, ONE, ZERO};

    fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn control_projector() -> InternalOperator {
        InternalOperator::new(0.5, [(0, Axis::Z, 0.5)])
    }

    #[test]
    fn rectangle_compiles_to_cnot_blocks() {
        let frame = AxisFrame::new(vec![Axis::Z, Axis::X]);
        let prog = compile_rectangle(
            std::f64::consts::FRAC_PI_2,
            1.0,
            &control_projector(),
            &InternalOperator::pauli(Axis::X, 1),
            &frame,
        )
        .unwrap();
        let u = register_unitary(&prog).unwrap();
        // Control |0>: identity. Control |1>: -i sigma_x.
        let mut expect = Array2::<Complex64>::zeros((4, 4));
        expect[(0, 0)] = ONE;
        expect[(1, 1)] = ONE;
        let minus_i = Complex64::new(0.0, -1.0);
        expect[(2, 3)] = minus_i;
        expect[(3, 2)] = minus_i;
        assert!(max_diff(&u, &expect) < 1e-12);
        let ideal = ideal_register_unitary(&GateSpec::rectangle(
            std::f64::consts::FRAC_PI_2,
            1.0,
            control_projector(),
            InternalOperator::pauli(Axis::X, 1),
            frame,
        ))
        .unwrap();
        assert!(max_diff(&u, &ideal) < 1e-12);
    }

    #[test]
    fn rectangle_with_zero_impulse_is_identity() {
        let frame = AxisFrame::uniform(Axis::Z, 2);
        let prog = compile_rectangle(
            0.0,
            1.7,
            &InternalOperator::pauli(Axis::Z, 0),
            &InternalOperator::pauli(Axis::Z, 1),
            &frame,
        )
        .unwrap();
        let u = register_unitary(&prog).unwrap();
        assert!(max_diff(&u, &Array2::eye(4)) < 1e-13);
    }

    #[test]
    fn rectangle_squares_collective_spin() {
        // A = B = Jy gives the one-axis twisting gate exp(-i mu Jy^2).
        let frame = AxisFrame::uniform(Axis::Y, 2);
        let jy = InternalOperator::new(0.0, [(0, Axis::Y, 0.5), (1, Axis::Y, 0.5)]);
        let mu = 0.37;
        let prog = compile_rectangle(mu, 1.0, &jy, &jy, &frame).unwrap();
        let u = register_unitary(&prog).unwrap();

        let jy_mat = jy.to_matrix(&frame).unwrap();
        let h = linalg::matmul(&jy_mat, &jy_mat).mapv(|z| z * mu);
        let direct = matrix_exponential(
            &DenseOperator::new(h, Space::Qubits { n_qubits: 2 }).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(max_diff(&u, direct.matrix()) < 1e-10);
    }

    #[test]
    fn parallelogram_theta_zero_is_a_plain_rectangle() {
        let frame = AxisFrame::uniform(Axis::X, 1);
        let a = InternalOperator::pauli(Axis::X, 0);
        let prog =
            compile_parallelogram(0.6, 0.0, &a, &InternalOperator::identity(), &frame).unwrap();
        let seq = match &prog.steps[0] {
            ProgramStep::Pulse(seq) => seq,
            _ => panic!("expected pulse step"),
        };
        assert_eq!(seq.segments.len(), 4);
        let u = register_unitary(&prog).unwrap();
        let direct = matrix_exponential(
            &DenseOperator::new(
                pauli_2x2(Axis::X).mapv(|z| z * 0.6),
                Space::Qubits { n_qubits: 1 },
            )
            .unwrap(),
            1.0,
        )
        .unwrap();
        assert!(max_diff(&u, direct.matrix()) < 1e-12);
    }

    #[test]
    fn parallelogram_quarter_turn_on_odd_spectrum_is_identity() {
        // cos(+-pi/2) = 0 on every tuple when C has odd integer eigenvalues.
        let frame = AxisFrame::new(vec![Axis::X, Axis::Z]);
        let a = InternalOperator::pauli(Axis::X, 0);
        let c = InternalOperator::pauli(Axis::Z, 1);
        let prog = compile_parallelogram(1.3, std::f64::consts::FRAC_PI_2, &a, &c, &frame).unwrap();
        let u = register_unitary(&prog).unwrap();
        assert!(max_diff(&u, &Array2::eye(4)) < 1e-12);
    }

    #[test]
    fn parallelogram_matches_direct_exponential() {
        let frame = AxisFrame::new(vec![Axis::Z, Axis::Z, Axis::X]);
        let a = InternalOperator::pauli(Axis::X, 2);
        let c = depth_operator(0..2);
        let spec = GateSpec::parallelogram(0.7, 0.9, a.clone(), c.clone(), frame.clone());
        let prog = compile_parallelogram(0.7, 0.9, &a, &c, &frame).unwrap();
        let u = register_unitary(&prog).unwrap();
        let ideal = ideal_register_unitary(&spec).unwrap();
        assert!(max_diff(&u, &ideal) < 1e-8);
    }

    #[test]
    fn chain_single_term_matches_parallelogram_gate() {
        let frame = AxisFrame::new(vec![Axis::Z, Axis::X]);
        let a = InternalOperator::pauli(Axis::X, 1);
        let c = depth_operator(0..1);
        let terms = [ChainTerm {
            mu: 0.5,
            theta: 1.1,
        }];
        let chained = compile_chain(&terms, &a, &c, &frame).unwrap();
        let single = compile_parallelogram(0.5, 1.1, &a, &c, &frame).unwrap();
        let diff = max_diff(
            &register_unitary(&chained).unwrap(),
            &register_unitary(&single).unwrap(),
        );
        assert!(diff < 1e-12);
    }

    #[test]
    fn chain_inverse_pair_is_identity() {
        let frame = AxisFrame::new(vec![Axis::Z, Axis::X]);
        let a = InternalOperator::pauli(Axis::X, 1);
        let c = depth_operator(0..1);
        let terms = [
            ChainTerm {
                mu: 0.8,
                theta: 0.7,
            },
            ChainTerm {
                mu: -0.8,
                theta: 0.7,
            },
        ];
        let prog = compile_chain(&terms, &a, &c, &frame).unwrap();
        let u = register_unitary(&prog).unwrap();
        assert!(max_diff(&u, &Array2::eye(4)) < 1e-12);
    }

    #[test]
    fn chain_merging_preserves_gate_and_saves_segments() {
        let n_controls = 2;
        let fourier = projector_fourier_terms(n_controls).unwrap();
        let terms: Vec<ChainTerm> = fourier
            .iter()
            .map(|t| ChainTerm {
                mu: std::f64::consts::FRAC_PI_2 * t.weight,
                theta: t.angle,
            })
            .collect();
        let a = InternalOperator::pauli(Axis::X, n_controls);
        let c = depth_operator(0..n_controls);
        let frame = cnnot_frame(n_controls);

        let merged = compile_chain(&terms, &a, &c, &frame).unwrap();
        // Concatenation of standalone parallelograms, one program per term.
        let mut unmerged_u = Array2::<Complex64>::eye(1usize << frame.n_qubits());
        let mut unmerged_segments = 0usize;
        for t in &terms {
            let prog = compile_parallelogram(t.mu, t.theta, &a, &c, &frame).unwrap();
            if let ProgramStep::Pulse(seq) = &prog.steps[0] {
                unmerged_segments += seq.segments.len();
            }
            unmerged_u = linalg::matmul(&register_unitary(&prog).unwrap(), &unmerged_u);
        }
        let merged_segments = match &merged.steps[0] {
            ProgramStep::Pulse(seq) => seq.segments.len(),
            _ => panic!("expected pulse step"),
        };
        assert!(
            merged_segments < unmerged_segments,
            "merged {merged_segments} vs unmerged {unmerged_segments}"
        );
        let diff = max_diff(&register_unitary(&merged).unwrap(), &unmerged_u);
        assert!(diff < 1e-9, "merged gate deviates by {diff:.3e}");
    }

    #[test]
    fn toffoli_matches_its_exponential_form() {
        let prog = compile_toffoli(1, 1.0).unwrap();
        let u = register_unitary(&prog).unwrap();
        let ideal = ideal_register_unitary(&GateSpec::toffoli(1, 1.0)).unwrap();
        assert!(max_diff(&u, &ideal) < 1e-12);
    }

    #[test]
    fn toffoli_acts_only_on_triggered_controls() {
        let prog = compile_toffoli(1, 1.0).unwrap();
        let u = register_unitary(&prog).unwrap();
        // Basis order: |c1 c2 t>. Controls |11| live in rows/cols 6,7.
        for j in 0..6 {
            for k in 0..6 {
                let expect = if j == k { ONE } else { ZERO };
                assert!((u[(j, k)] - expect).norm() < 1e-12, "({j},{k})");
            }
        }
        let minus_i = Complex64::new(0.0, -1.0);
        assert!((u[(6, 7)] - minus_i).norm() < 1e-12);
        assert!((u[(7, 6)] - minus_i).norm() < 1e-12);
        assert!(u[(6, 6)].norm() < 1e-12 && u[(7, 7)].norm() < 1e-12);
    }

    #[test]
    fn toffoli_gate_is_independent_of_loop_count() {
        let u1 = register_unitary(&compile_toffoli(1, 1.0).unwrap()).unwrap();
        for k in [2, 3] {
            let uk = register_unitary(&compile_toffoli(k, 1.0).unwrap()).unwrap();
            assert!(max_diff(&u1, &uk) < 1e-9, "K={k}");
        }
        // Omega only rescales time.
        let u_fast = register_unitary(&compile_toffoli(1, 2.5).unwrap()).unwrap();
        assert!(max_diff(&u1, &u_fast) < 1e-9);
    }

    #[test]
    fn toffoli_rejects_zero_loop_count() {
        assert!(compile_toffoli(0, 1.0).is_err());
        assert!(compile_toffoli(1, 0.0).is_err());
    }

    #[test]
    fn fourier_terms_sum_to_projector_eigenvalues() {
        for n_c in 1..=5 {
            let terms = projector_fourier_terms(n_c).unwrap();
            assert_eq!(terms.len(), n_c + 1);
            // m controls in |0> -> depth eigenvalue -m; the sum must be the
            // indicator of m = 0.
            for m in 0..=n_c {
                let sum: f64 = terms
                    .iter()
                    .map(|t| t.weight * (t.angle * -(m as f64)).cos())
                    .sum();
                let expect = if m == 0 { 1.0 } else { 0.0 };
                assert!((sum - expect).abs() <= 1e-12, "n_c={n_c} m={m} sum={sum}");
            }
        }
    }

    #[test]
    fn single_control_cnnot_is_controlled_minus_i_x() {
        let prog = compile_cnnot(1).unwrap();
        let u = register_unitary(&prog).unwrap();
        let minus_i = Complex64::new(0.0, -1.0);
        let mut expect = Array2::<Complex64>::zeros((4, 4));
        expect[(0, 0)] = ONE;
        expect[(1, 1)] = ONE;
        expect[(2, 3)] = minus_i;
        expect[(3, 2)] = minus_i;
        assert!(max_diff(&u, &expect) < 1e-10);
    }

    #[test]
    fn two_control_cnnot_equals_toffoli() {
        let u_cn = register_unitary(&compile_cnnot(2).unwrap()).unwrap();
        let u_toff = register_unitary(&compile_toffoli(1, 1.0).unwrap()).unwrap();
        assert!(max_diff(&u_cn, &u_toff) < 1e-10);
        let ideal = ideal_register_unitary(&GateSpec::cnnot(2)).unwrap();
        assert!(max_diff(&u_cn, &ideal) < 1e-10);
    }

    #[test]
    fn cnnot_leaves_untriggered_basis_states_alone() {
        let n_c = 4;
        let u = register_unitary(&compile_cnnot(n_c).unwrap()).unwrap();
        // Control pattern 1101 (third control in |0>), target |1>:
        // index = |11011>.
        let idx = 0b11011;
        for row in 0..(1usize << (n_c + 1)) {
            let expect = if row == idx { ONE } else { ZERO };
            assert!((u[(row, idx)] - expect).norm() < 1e-9, "row {row}");
        }
    }

    #[test]
    fn product_phase_single_qubit_rotation() {
        let qubits: BTreeSet<usize> = [0].into();
        let prog = compile_product_phase(std::f64::consts::FRAC_PI_4, &qubits).unwrap();
        let u = register_unitary(&prog).unwrap();
        let direct = matrix_exponential(
            &DenseOperator::new(
                pauli_2x2(Axis::Z).mapv(|z| z * std::f64::consts::FRAC_PI_4),
                Space::Qubits { n_qubits: 1 },
            )
            .unwrap(),
            1.0,
        )
        .unwrap();
        assert!(max_diff(&u, direct.matrix()) < 1e-12);
    }

    #[test]
    fn product_phase_matches_four_qubit_parity_exponential() {
        let qubits: BTreeSet<usize> = [0, 1, 2, 3].into();
        let mu = 0.3;
        let prog = compile_product_phase(mu, &qubits).unwrap();
        let u = register_unitary(&prog).unwrap();
        let spec = GateSpec::product_phase(mu, qubits);
        let ideal = ideal_register_unitary(&spec).unwrap();
        assert!(max_diff(&u, &ideal) < 1e-8);
    }

    #[test]
    fn product_phase_zero_angle_is_identity() {
        let qubits: BTreeSet<usize> = [0, 1].into();
        let prog = compile_product_phase(0.0, &qubits).unwrap();
        let u = register_unitary(&prog).unwrap();
        assert!(max_diff(&u, &Array2::eye(4)) < 1e-13);
    }

    #[test]
    fn every_compiled_gate_closes() {
        let frame2 = AxisFrame::new(vec![Axis::Z, Axis::X]);
        let a2 = InternalOperator::pauli(Axis::X, 1);
        let c2 = depth_operator(0..1);
        let progs = vec![
            compile_rectangle(0.9, 1.2, &control_projector(), &a2, &frame2).unwrap(),
            compile_parallelogram(0.7, 0.4, &a2, &c2, &frame2).unwrap(),
            compile_chain(
                &[
                    ChainTerm {
                        mu: 0.3,
                        theta: 0.9,
                    },
                    ChainTerm {
                        mu: -0.2,
                        theta: 1.7,
                    },
                    ChainTerm {
                        mu: 0.5,
                        theta: 0.1,
                    },
                ],
                &a2,
                &c2,
                &frame2,
            )
            .unwrap(),
            compile_toffoli(2, 1.3).unwrap(),
            compile_cnnot(3).unwrap(),
            compile_product_phase(1.1, &[0, 1, 2].into()).unwrap(),
        ];
        for prog in &progs {
            for step in &prog.steps {
                if let ProgramStep::Pulse(seq) = step {
                    let report = closure_report(seq).unwrap();
                    assert!(
                        report.is_closed,
                        "open sequence: v={:.2e} w={:.2e} r={:.2e}",
                        report.worst_v, report.worst_w, report.worst_r
                    );
                }
            }
        }
    }

    #[test]
    fn gate_spec_dispatch_matches_free_functions() {
        let spec = GateSpec::toffoli(2, 1.0);
        let via_spec = compile(&spec).unwrap();
        let direct = compile_toffoli(2, 1.0).unwrap();
        assert_eq!(via_spec, direct);
        assert_eq!(spec.n_qubits(), 3);
    }
}
