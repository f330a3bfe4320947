//! Randomized invariants: every compiled gate closes its loops, the
//! analytic phase always equals the sampled loop area, register matrices
//! match exponentials built from scratch, and programs survive a JSON
//! round trip.

use std::collections::BTreeSet;

use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

use oscbus::compiler::{
    compile, compile_cnnot, compile_product_phase, compile_toffoli, register_unitary, GateSpec,
};
use oscbus::grover::{compile_oracle, OracleSpec};
use oscbus::hilbert::Axis;
use oscbus::model::{all_tuples, AxisFrame, InternalOperator, Program, ProgramStep};
use oscbus::propagator::{accumulate, closure_report, enclosed_area};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A compilable gate drawn from every family the compiler knows.
#[derive(Debug, Clone)]
enum AnyGate {
    Rectangle { l1: f64, l2: f64 },
    Parallelogram { mu: f64, theta: f64 },
    ProductPhase { mu: f64, n_qubits: usize },
    ControlledFlip { n_controls: usize },
    PeriodFlip { k: u32, omega: f64 },
}

fn any_gate() -> impl Strategy<Value = AnyGate> {
    prop_oneof![
        (-1.5..1.5f64, -1.5..1.5f64).prop_map(|(l1, l2)| AnyGate::Rectangle { l1, l2 }),
        (-1.5..1.5f64, 0.1..3.0f64).prop_map(|(mu, theta)| AnyGate::Parallelogram { mu, theta }),
        (-2.0..2.0f64, 1..=4usize)
            .prop_map(|(mu, n_qubits)| AnyGate::ProductPhase { mu, n_qubits }),
        (1..=3usize).prop_map(|n_controls| AnyGate::ControlledFlip { n_controls }),
        (1..=3u32, 0.5..2.0f64).prop_map(|(k, omega)| AnyGate::PeriodFlip { k, omega }),
    ]
}

fn two_qubit_frame() -> AxisFrame {
    AxisFrame::new(vec![Axis::Z, Axis::X])
}

fn control_like() -> InternalOperator {
    InternalOperator::new(0.5, [(0, Axis::Z, 0.5)])
}

impl AnyGate {
    fn compile(&self) -> Program {
        match *self {
            AnyGate::Rectangle { l1, l2 } => compile(&GateSpec::rectangle(
                l1,
                l2,
                control_like(),
                InternalOperator::pauli(Axis::X, 1),
                two_qubit_frame(),
            )),
            AnyGate::Parallelogram { mu, theta } => compile(&GateSpec::parallelogram(
                mu,
                theta,
                InternalOperator::pauli(Axis::X, 1),
                control_like(),
                two_qubit_frame(),
            )),
            AnyGate::ProductPhase { mu, n_qubits } => {
                compile_product_phase(mu, &(0..n_qubits).collect::<BTreeSet<_>>())
            }
            AnyGate::ControlledFlip { n_controls } => compile_cnnot(n_controls),
            AnyGate::PeriodFlip { k, omega } => compile_toffoli(k, omega),
        }
        .expect("every drawn gate compiles")
    }
}

fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn every_compiled_gate_closes_and_validates(gate in any_gate()) {
        let prog = gate.compile();
        prop_assert!(prog.validate().is_empty());
        for step in &prog.steps {
            let ProgramStep::Pulse(seq) = step else { continue };
            let closure = closure_report(seq).unwrap();
            prop_assert!(closure.is_closed, "{gate:?}: residuals {closure:?}");
        }
    }

    #[test]
    fn programs_survive_a_json_round_trip(gate in any_gate()) {
        let prog = gate.compile();
        let restored = Program::from_json(&prog.to_json()).unwrap();
        prop_assert_eq!(restored, prog);
    }

    #[test]
    fn product_phase_register_matches_the_diagonal_exponential(
        mu in -2.0..2.0f64,
        n_qubits in 1..=4usize,
    ) {
        let prog = compile_product_phase(mu, &(0..n_qubits).collect()).unwrap();
        let register = register_unitary(&prog).unwrap();
        let dim = 1usize << n_qubits;
        let mut ideal = Array2::from_elem((dim, dim), ZERO);
        for basis in 0..dim {
            // Joint z parity: a set bit contributes +1, a clear bit -1.
            let zeros = n_qubits - basis.count_ones() as usize;
            let parity = if zeros.is_multiple_of(2) { 1.0 } else { -1.0 };
            ideal[(basis, basis)] = Complex64::from_polar(1.0, -mu * parity);
        }
        prop_assert!(max_abs_diff(&register, &ideal) <= 1e-9);
    }

    #[test]
    fn rectangle_register_matches_the_block_exponential(
        l1 in -1.5..1.5f64,
        l2 in -1.5..1.5f64,
    ) {
        let prog = AnyGate::Rectangle { l1, l2 }.compile();
        let register = register_unitary(&prog).unwrap();
        // exp(-i l1 l2 (z1+1)/2 x2) by hand: identity while qubit 0 is
        // down, a flip rotation by l1 l2 while it is up.
        let phi = l1 * l2;
        let mut ideal = Array2::from_elem((4, 4), ZERO);
        ideal[(0, 0)] = Complex64::new(1.0, 0.0);
        ideal[(1, 1)] = Complex64::new(1.0, 0.0);
        ideal[(2, 2)] = Complex64::new(phi.cos(), 0.0);
        ideal[(3, 3)] = Complex64::new(phi.cos(), 0.0);
        ideal[(2, 3)] = Complex64::new(0.0, -phi.sin());
        ideal[(3, 2)] = Complex64::new(0.0, -phi.sin());
        prop_assert!(max_abs_diff(&register, &ideal) <= 1e-9);
    }

    #[test]
    fn operator_matrices_are_diagonal_with_affine_eigenvalues(
        c0 in -1.0..1.0f64,
        w0 in -1.0..1.0f64,
        w1 in -1.0..1.0f64,
        w2 in -1.0..1.0f64,
    ) {
        // In a uniform z frame the operator matrix must be diagonal, with
        // the affine eigenvalue of each basis state's sign tuple on the
        // diagonal. Bit l of the basis index (most significant first)
        // carries the sign of qubit l.
        let op = InternalOperator::new(c0, [(0, Axis::Z, w0), (1, Axis::Z, w1), (2, Axis::Z, w2)]);
        let frame = AxisFrame::uniform(Axis::Z, 3);
        let matrix = op.to_matrix(&frame).unwrap();
        for (basis, tuple) in all_tuples(3).iter().enumerate() {
            let eigen = op.eigenvalue(tuple).unwrap();
            for row in 0..8 {
                let want = if row == basis {
                    Complex64::new(eigen, 0.0)
                } else {
                    ZERO
                };
                prop_assert!((matrix[(row, basis)] - want).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn oracle_register_is_a_pure_sign_flip(
        (n_qubits, x0) in (1..=3usize).prop_flat_map(|n| (Just(n), 0..1usize << n)),
    ) {
        let spec = OracleSpec::new(n_qubits, x0).unwrap();
        let register = register_unitary(&compile_oracle(&spec).unwrap()).unwrap();
        let dim = 1usize << n_qubits;
        let reference = register[(x0, x0)];
        prop_assert!((reference.norm() - 1.0).abs() <= 1e-9);
        for col in 0..dim {
            for row in 0..dim {
                if row != col {
                    prop_assert!(register[(row, col)].norm() <= 1e-9);
                    continue;
                }
                // Up to one global phase, the marked entry is -1 and
                // every other entry is +1.
                let want_ratio = if col == x0 { 1.0 } else { -1.0 };
                let ratio = register[(row, col)] / reference;
                prop_assert!(
                    (ratio - Complex64::new(want_ratio, 0.0)).norm() <= 1e-9,
                    "entry {col}: ratio {ratio}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Dense path sampling makes this one expensive per case.
    #[test]
    fn area_law_holds_for_random_trigonometric_gates(
        mu in -1.5..1.5f64,
        theta in 0.1..3.0f64,
    ) {
        let prog = AnyGate::Parallelogram { mu, theta }.compile();
        for step in &prog.steps {
            let ProgramStep::Pulse(seq) = step else { continue };
            for tuple in all_tuples(seq.frame.n_qubits()) {
                let record = accumulate(seq, &tuple).unwrap();
                let area = enclosed_area(seq, &tuple).unwrap();
                prop_assert!(
                    (record.s_final - area).abs() <= 1e-9,
                    "tuple {tuple:?}: analytic {} vs sampled {area}",
                    record.s_final
                );
            }
        }
    }
}
