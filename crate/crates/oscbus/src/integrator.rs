//! Brute-force propagation on the truncated composite space.
//!
//! Each segment Hamiltonian `v A x + w B p + r C n + g D` is assembled as a
//! dense matrix in the computational basis and exponentiated directly. No
//! eigen-tuple factorization is used anywhere in this module, so its output
//! is an independent check on the closed-form path.
//!
//! Truncation is the only approximation: matrix elements are exact for the
//! cutoff space, but a trajectory that climbs near the cutoff leaks. Callers
//! compare the two paths away from the truncation edge.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{
    build_oscillator_ops, kron, matrix_exponential, CompositeState, DenseOperator, OscillatorSpec,
    Space, ZERO,
};
use crate::model::{AxisFrame, Program, ProgramStep, PulseSegment, PulseSequence, SampledWaveform};
use crate::propagator::local_unitary;

pub const DEFAULT_MAX_DIM: usize = 8192;

/// Resource guard for dense propagation.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Largest composite dimension this simulation may allocate.
    pub max_dim: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

fn guarded_space(n_qubits: usize, osc: OscillatorSpec, opts: SimOptions) -> Result<Space> {
    let dim = osc.composite_dim(n_qubits);
    if dim > opts.max_dim {
        return Err(Error::DimensionCap {
            dim,
            cap: opts.max_dim,
        });
    }
    Ok(Space::Composite {
        n_qubits,
        cutoff: osc.cutoff(),
    })
}

fn add_term(
    h: &mut Array2<Complex64>,
    coeff: f64,
    internal: &crate::model::InternalOperator,
    frame: &AxisFrame,
    osc_part: &Array2<Complex64>,
) -> Result<()> {
    if coeff == 0.0 {
        return Ok(());
    }
    let reg = internal.to_matrix(frame)?;
    h.scaled_add(Complex64::new(coeff, 0.0), &kron(&reg, osc_part));
    Ok(())
}

/// Dense segment Hamiltonian in the computational basis.
pub(crate) fn segment_hamiltonian(
    seg: &PulseSegment,
    frame: &AxisFrame,
    osc: OscillatorSpec,
) -> Result<Array2<Complex64>> {
    let n = frame.n_qubits();
    let nf = osc.cutoff();
    let ops = build_oscillator_ops(osc);
    let dim = osc.composite_dim(n);
    let mut h = Array2::<Complex64>::from_elem((dim, dim), ZERO);
    add_term(&mut h, seg.v, &seg.a, frame, ops.x.matrix())?;
    add_term(&mut h, seg.w, &seg.b, frame, ops.p.matrix())?;
    add_term(&mut h, seg.r, &seg.c, frame, ops.n.matrix())?;
    add_term(&mut h, seg.g, &seg.d, frame, &Array2::eye(nf))?;
    Ok(h)
}

/// exp(-i H dt) for one segment.
pub fn segment_unitary(
    seg: &PulseSegment,
    frame: &AxisFrame,
    osc: OscillatorSpec,
    opts: SimOptions,
) -> Result<DenseOperator> {
    let space = guarded_space(frame.n_qubits(), osc, opts)?;
    let h = segment_hamiltonian(seg, frame, osc)?;
    let h_op = DenseOperator::new(h, space)?;
    matrix_exponential(&h_op, seg.duration)
}

/// Ordered product of segment exponentials (later segments on the left).
pub fn sequence_unitary(
    seq: &PulseSequence,
    osc: OscillatorSpec,
    opts: SimOptions,
) -> Result<DenseOperator> {
    if let Some(v) = seq.validate().first() {
        return Err(Error::invalid(format!("invalid sequence: {v}")));
    }
    let space = guarded_space(seq.n_qubits(), osc, opts)?;
    let mut total = DenseOperator::identity(space);
    for seg in &seq.segments {
        let u = segment_unitary(seg, &seq.frame, osc, opts)?;
        total = u.mul(&total)?;
    }
    Ok(total)
}

/// Full program unitary: pulse sequences and ideal local rotations composed
/// in program order.
pub fn program_unitary(
    prog: &Program,
    osc: OscillatorSpec,
    opts: SimOptions,
) -> Result<DenseOperator> {
    if let Some(v) = prog.validate().first() {
        return Err(Error::invalid(format!("invalid program: {v}")));
    }
    let space = guarded_space(prog.n_qubits, osc, opts)?;
    let mut total = DenseOperator::identity(space);
    for step in &prog.steps {
        let u = match step {
            ProgramStep::Pulse(seq) => sequence_unitary(seq, osc, opts)?,
            ProgramStep::Local(local) => local_unitary(local, prog.n_qubits, osc)?,
        };
        total = u.mul(&total)?;
    }
    Ok(total)
}

/// Propagate a pure or mixed composite state through a program.
pub fn evolve_program(
    prog: &Program,
    state: &CompositeState,
    opts: SimOptions,
) -> Result<CompositeState> {
    if state.n_qubits() != prog.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: prog.n_qubits,
            actual: state.n_qubits(),
        });
    }
    let u = program_unitary(prog, state.osc(), opts)?;
    state.apply(&u)
}

/// Register in |0...0> with the oscillator in a Boltzmann mixture of mean
/// occupation `nbar`. Fails if the cutoff leaves more than 1e-10 of the
/// distribution outside the truncated space.
pub fn thermal_state(n_qubits: usize, osc: OscillatorSpec, nbar: f64) -> Result<CompositeState> {
    if nbar < 0.0 || nbar.is_nan() {
        return Err(Error::invalid("mean occupation must be nonnegative"));
    }
    let nf = osc.cutoff();
    let q = nbar / (nbar + 1.0);
    let tail = q.powi(nf as i32);
    if tail > 1e-10 {
        return Err(Error::ThermalTail { cutoff: nf, tail });
    }
    let dim = osc.composite_dim(n_qubits);
    let mut rho = Array2::<Complex64>::from_elem((dim, dim), ZERO);
    // Renormalize over the kept levels so the state has unit trace exactly.
    let kept: f64 = (0..nf).map(|k| q.powi(k as i32)).sum();
    for k in 0..nf {
        rho[(k, k)] = Complex64::new(q.powi(k as i32) / kept, 0.0);
    }
    CompositeState::mixed(rho, n_qubits, osc)
}

/// Unitary of a sampled waveform, refined by doubling the piecewise-constant
/// subdivision until the product stops moving by more than `tol`.
pub fn waveform_unitary(
    wf: &SampledWaveform,
    frame: &AxisFrame,
    osc: OscillatorSpec,
    opts: SimOptions,
    tol: f64,
) -> Result<DenseOperator> {
    let build = |substeps: usize| -> Result<DenseOperator> {
        let seq = PulseSequence::new(frame.clone(), wf.subdivide(substeps)?);
        sequence_unitary(&seq, osc, opts)
    };
    let mut substeps = (2 * wf.v.len()).max(4);
    let mut prev = build(substeps)?;
    loop {
        substeps *= 2;
        if substeps > 1 << 18 {
            return Err(Error::invalid(
                "waveform subdivision did not converge; coefficients may be too rough",
            ));
        }
        let next = build(substeps)?;
        if next.max_abs_diff(&prev) < tol {
            return Ok(next);
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Axis;
    use crate::model::InternalOperator;
    use crate::propagator;

    fn opts() -> SimOptions {
        SimOptions::default()
    }

    #[test]
    fn idle_segment_gives_identity() {
        let frame = AxisFrame::uniform(Axis::Z, 1);
        let osc = OscillatorSpec::new(6).unwrap();
        let u = segment_unitary(&PulseSegment::idle(1.3), &frame, osc, opts()).unwrap();
        let id = DenseOperator::identity(u.space());
        assert!(u.max_abs_diff(&id) < 1e-13);
    }

    #[test]
    fn full_rotation_of_number_operator_is_identity() {
        let frame = AxisFrame::uniform(Axis::Z, 1);
        let osc = OscillatorSpec::new(10).unwrap();
        let seg = PulseSegment::idle(std::f64::consts::TAU)
            .with_rotation(1.0, InternalOperator::identity());
        let u = segment_unitary(&seg, &frame, osc, opts()).unwrap();
        let id = DenseOperator::identity(u.space());
        assert!(u.max_abs_diff(&id) < 1e-12);
    }

    #[test]
    fn x_impulse_vacuum_overlap_is_gaussian() {
        // exp(-i lambda x) displaces the ground state; the survival
        // amplitude is exp(-lambda^2 / 4).
        let frame = AxisFrame::uniform(Axis::Z, 1);
        let osc = OscillatorSpec::new(24).unwrap();
        let lam = 0.8;
        let seg = PulseSegment::idle(1.0).with_x(lam, InternalOperator::identity());
        let u = segment_unitary(&seg, &frame, osc, opts()).unwrap();
        let amp = u.matrix()[(0, 0)].norm();
        assert!((amp - (-lam * lam / 4.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dimension_guard_rejects_oversized_space() {
        let frame = AxisFrame::uniform(Axis::Z, 2);
        let osc = OscillatorSpec::new(64).unwrap();
        let err = segment_unitary(
            &PulseSegment::idle(1.0),
            &frame,
            osc,
            SimOptions { max_dim: 128 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionCap { dim: 256, cap: 128 }));
    }

    #[test]
    fn brute_force_matches_closed_form_on_mixed_sequence() {
        // All four couplings active with qubit-dependent operators.
        let frame = AxisFrame::uniform(Axis::Z, 2);
        let a = InternalOperator::new(0.5, [(0, Axis::Z, 0.5)]);
        let b = InternalOperator::new(0.0, [(1, Axis::Z, 1.0)]);
        let c = InternalOperator::new(1.0, [(0, Axis::Z, -0.3)]);
        let d = InternalOperator::new(0.2, [(1, Axis::Z, 0.4)]);
        let seq = PulseSequence::new(
            frame,
            vec![
                PulseSegment::idle(0.7)
                    .with_x(0.9, a.clone())
                    .with_rotation(0.8, c.clone()),
                PulseSegment::idle(0.4)
                    .with_p(-1.1, b.clone())
                    .with_drift(0.6, d),
                PulseSegment::idle(0.5)
                    .with_x(-0.3, a)
                    .with_p(0.2, b)
                    .with_rotation(-0.5, c),
            ],
        );
        let osc = OscillatorSpec::new(32).unwrap();
        let brute = sequence_unitary(&seq, osc, opts()).unwrap();
        let closed = propagator::closed_form_unitary(&seq, osc).unwrap();
        let diff = brute.max_abs_diff_within_fock(&closed.unitary, 8).unwrap();
        assert!(diff < 1e-9, "paths disagree by {diff:.3e}");
    }

    #[test]
    fn thermal_state_has_unit_trace_and_geometric_ratios() {
        let osc = OscillatorSpec::new(40).unwrap();
        let state = thermal_state(1, osc, 1.0).unwrap();
        let rho = match state.data() {
            crate::hilbert::StateData::Mixed(r) => r,
            _ => panic!("expected mixed state"),
        };
        let trace: Complex64 = (0..state.dim()).map(|j| rho[(j, j)]).sum();
        assert!((trace.re - 1.0).abs() < 1e-12);
        // nbar = 1 gives q = 1/2 between successive Fock weights.
        let ratio = rho[(1, 1)].re / rho[(0, 0)].re;
        assert!((ratio - 0.5).abs() < 1e-12);
        // Register sector beyond |0> is empty.
        assert_eq!(rho[(osc.cutoff(), osc.cutoff())], ZERO);
    }

    #[test]
    fn thermal_state_rejects_fat_tail() {
        let osc = OscillatorSpec::new(16).unwrap();
        let err = thermal_state(1, osc, 1.0).unwrap_err();
        assert!(matches!(err, Error::ThermalTail { cutoff: 16, .. }));
    }

    #[test]
    fn pure_and_mixed_evolution_agree() {
        let frame = AxisFrame::uniform(Axis::Z, 1);
        let osc = OscillatorSpec::new(12).unwrap();
        let seq = PulseSequence::new(
            frame,
            vec![PulseSegment::idle(0.9).with_x(0.7, InternalOperator::pauli(Axis::Z, 0))],
        );
        let prog = Program::from_sequence(seq);
        let pure = CompositeState::basis(1, osc, 1, 0).unwrap();
        let evolved_pure = evolve_program(&prog, &pure, opts()).unwrap();
        let psi = match evolved_pure.data() {
            crate::hilbert::StateData::Pure(v) => v.clone(),
            _ => panic!("expected pure state"),
        };

        let mut rho0 = Array2::<Complex64>::from_elem((pure.dim(), pure.dim()), ZERO);
        rho0[(osc.cutoff(), osc.cutoff())] = Complex64::new(1.0, 0.0);
        let mixed = CompositeState::mixed(rho0, 1, osc).unwrap();
        let evolved_mixed = evolve_program(&prog, &mixed, opts()).unwrap();
        let rho = match evolved_mixed.data() {
            crate::hilbert::StateData::Mixed(r) => r.clone(),
            _ => panic!("expected mixed state"),
        };
        let outer = Array2::from_shape_fn((psi.len(), psi.len()), |(j, k)| psi[j] * psi[k].conj());
        let worst = rho
            .iter()
            .zip(outer.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }

    #[test]
    fn waveform_unitary_matches_canonicalized_closed_form() {
        let frame = AxisFrame::uniform(Axis::Z, 1);
        let osc = OscillatorSpec::new(24).unwrap();
        let wf = SampledWaveform {
            duration: 1.0,
            v: vec![0.0, 0.6, 0.0],
            w: vec![0.3, 0.3, 0.3],
            r: vec![0.0, 0.0, 0.0],
            g: vec![0.0, 0.0, 0.0],
            a: InternalOperator::identity(),
            b: InternalOperator::identity(),
            c: InternalOperator::zero(),
            d: InternalOperator::zero(),
        };
        let brute = waveform_unitary(&wf, &frame, osc, opts(), 1e-9).unwrap();
        let segs = propagator::canonicalize_waveform(&wf, &frame, 1e-10).unwrap();
        let seq = PulseSequence::new(frame, segs);
        let closed = propagator::closed_form_unitary(&seq, osc).unwrap();
        let diff = brute.max_abs_diff_within_fock(&closed.unitary, 8).unwrap();
        assert!(diff < 1e-7, "waveform paths disagree by {diff:.3e}");
    }
}
