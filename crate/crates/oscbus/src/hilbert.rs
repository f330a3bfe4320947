//! Truncated-oscillator and qubit operator construction.
//!
//! Conventions, fixed once and asserted in tests:
//!
//! * Oscillator quadratures: x = (a + a^dag)/sqrt(2), p = i(a^dag - a)/sqrt(2),
//!   dimensionless with [x, p] = i on Fock levels below cutoff - 2.
//! * Qubit basis: |0> and |1> are the sigma_z eigenstates with eigenvalues
//!   -1 and +1, so sigma_z = diag(-1, +1) in basis order (|0>, |1>).
//! * Composite index: qubits before oscillator, qubit 0 is the most
//!   significant bit, the oscillator level is the fastest-varying index:
//!   index = qubit_bits * cutoff + fock.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Truncated oscillator: Fock levels 0..cutoff-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    cutoff: usize,
}

impl OscillatorSpec {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidCutoff { cutoff });
        }
        Ok(OscillatorSpec { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn composite_dim(&self, n_qubits: usize) -> usize {
        (1usize << n_qubits) * self.cutoff
    }
}

/// Which tensor-factor space a matrix lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Qubits { n_qubits: usize },
    Oscillator { cutoff: usize },
    Composite { n_qubits: usize, cutoff: usize },
}

impl Space {
    pub fn dim(&self) -> usize {
        match *self {
            Space::Qubits { n_qubits } => 1 << n_qubits,
            Space::Oscillator { cutoff } => cutoff,
            Space::Composite { n_qubits, cutoff } => (1 << n_qubits) * cutoff,
        }
    }
}

/// Square complex matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: Array2<Complex64>,
    space: Space,
}

impl DenseOperator {
    pub fn new(matrix: Array2<Complex64>, space: Space) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.nrows() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                actual: matrix.nrows(),
            });
        }
        Ok(DenseOperator { matrix, space })
    }

    pub fn identity(space: Space) -> Self {
        DenseOperator {
            matrix: Array2::eye(space.dim()),
            space,
        }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator {
            matrix: linalg::adjoint(&self.matrix),
            space: self.space,
        }
    }

    /// Matrix product; both operands must act on the same space.
    pub fn mul(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(DenseOperator {
            matrix: linalg::matmul(&self.matrix, &other.matrix),
            space: self.space,
        })
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    /// Elementwise max deviation restricted to rows and columns whose Fock
    /// index is below `fock_limit`, away from the truncation edge. Both
    /// operators must live on the same composite space.
    pub fn max_abs_diff_within_fock(
        &self,
        other: &DenseOperator,
        fock_limit: usize,
    ) -> Result<f64> {
        let (n_qubits, cutoff) = match self.space {
            Space::Composite { n_qubits, cutoff } => (n_qubits, cutoff),
            _ => {
                return Err(Error::DimensionMismatch {
                    expected: 0,
                    actual: self.dim(),
                })
            }
        };
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let limit = fock_limit.min(cutoff);
        let mut worst = 0.0f64;
        for mj in 0..1usize << n_qubits {
            for fj in 0..limit {
                let j = mj * cutoff + fj;
                for mk in 0..1usize << n_qubits {
                    for fk in 0..limit {
                        let k = mk * cutoff + fk;
                        worst = worst.max((self.matrix[(j, k)] - other.matrix[(j, k)]).norm());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Max-norm deviation of U^dag U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = linalg::matmul(&linalg::adjoint(&self.matrix), &self.matrix);
        let eye = Array2::<Complex64>::eye(self.dim());
        linalg::max_abs_diff(&prod, &eye)
    }
}

/// Ladder and quadrature operators on the truncated Fock space.
pub struct OscillatorOps {
    pub a: DenseOperator,
    pub a_dag: DenseOperator,
    pub x: DenseOperator,
    pub p: DenseOperator,
    pub n: DenseOperator,
}

/// a|k> = sqrt(k)|k-1>; n diagonal 0..cutoff-1; x, p per the fixed convention.
pub fn build_oscillator_ops(spec: OscillatorSpec) -> OscillatorOps {
    let nf = spec.cutoff();
    let space = Space::Oscillator { cutoff: nf };
    let mut a = Array2::<Complex64>::zeros((nf, nf));
    for k in 1..nf {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    let a_dag = linalg::adjoint(&a);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    let x = (&a + &a_dag).mapv(|z| z * inv_sqrt2);
    let p = (&a_dag - &a).mapv(|z| z * I * inv_sqrt2);
    let mut n = Array2::<Complex64>::zeros((nf, nf));
    for k in 0..nf {
        n[(k, k)] = Complex64::new(k as f64, 0.0);
    }
    OscillatorOps {
        a: DenseOperator { matrix: a, space },
        a_dag: DenseOperator {
            matrix: a_dag,
            space,
        },
        x: DenseOperator { matrix: x, space },
        p: DenseOperator { matrix: p, space },
        n: DenseOperator { matrix: n, space },
    }
}

/// 2x2 Pauli matrix in the (|0>, |1>) basis.
pub fn pauli_2x2(axis: Axis) -> Array2<Complex64> {
    match axis {
        Axis::X => ndarray::array![[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => ndarray::array![[ZERO, I], [-I, ZERO]],
        Axis::Z => ndarray::array![[-ONE, ZERO], [ZERO, ONE]],
    }
}

/// Pauli operator on one qubit of an n-qubit register, identity elsewhere.
pub fn pauli_matrix(axis: Axis, qubit: usize, n_qubits: usize) -> Result<DenseOperator> {
    if qubit >= n_qubits {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            n_qubits,
        });
    }
    let mut m = pauli_2x2(axis);
    // Qubit 0 is the most significant factor.
    for _ in 0..qubit {
        m = kron(&Array2::eye(2), &m);
    }
    for _ in qubit + 1..n_qubits {
        m = kron(&m, &Array2::eye(2));
    }
    DenseOperator::new(m, Space::Qubits { n_qubits })
}

pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    ndarray::linalg::kron(a, b)
}

/// exp(-i H t) for Hermitian H, via eigendecomposition.
pub fn matrix_exponential(h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    let asym = hermiticity_defect(h.matrix());
    if asym > 1e-10 {
        return Err(Error::NotHermitian {
            max_asymmetry: asym,
        });
    }
    let (vals, vecs) = linalg::eigh(h.matrix())?;
    let u = linalg::spectral_map(&vals, &vecs, |lambda| (-I * (lambda * t)).exp());
    Ok(DenseOperator {
        matrix: u,
        space: h.space(),
    })
}

pub fn hermiticity_defect(m: &Array2<Complex64>) -> f64 {
    let adj = linalg::adjoint(m);
    linalg::max_abs_diff(m, &adj)
}

/// Tensor the operator up to the composite space with identity on the
/// complementary factor. Qubits-before-oscillator ordering.
pub fn embed(op: &DenseOperator, target: Space) -> Result<DenseOperator> {
    let (n_qubits, cutoff) = match target {
        Space::Composite { n_qubits, cutoff } => (n_qubits, cutoff),
        _ => return Err(Error::invalid("embed target must be a composite space")),
    };
    let matrix = match op.space() {
        Space::Qubits { n_qubits: nq } if nq == n_qubits => kron(op.matrix(), &Array2::eye(cutoff)),
        Space::Oscillator { cutoff: nf } if nf == cutoff => {
            kron(&Array2::eye(1 << n_qubits), op.matrix())
        }
        Space::Composite {
            n_qubits: nq,
            cutoff: nf,
        } if nq == n_qubits && nf == cutoff => op.matrix().clone(),
        _ => {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                actual: op.dim(),
            })
        }
    };
    DenseOperator::new(matrix, target)
}

/// Pure state or density matrix on the qubits (x) oscillator space.
#[derive(Debug, Clone)]
pub enum StateData {
    Pure(Array1<Complex64>),
    Mixed(Array2<Complex64>),
}

#[derive(Debug, Clone)]
pub struct CompositeState {
    data: StateData,
    n_qubits: usize,
    osc: OscillatorSpec,
}

impl CompositeState {
    pub fn pure(vector: Array1<Complex64>, n_qubits: usize, osc: OscillatorSpec) -> Result<Self> {
        let dim = osc.composite_dim(n_qubits);
        if vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: vector.len(),
            });
        }
        let norm = vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized {
                deviation: (norm - 1.0).abs(),
            });
        }
        Ok(CompositeState {
            data: StateData::Pure(vector),
            n_qubits,
            osc,
        })
    }

    pub fn mixed(rho: Array2<Complex64>, n_qubits: usize, osc: OscillatorSpec) -> Result<Self> {
        let dim = osc.composite_dim(n_qubits);
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: rho.nrows(),
            });
        }
        let herm = hermiticity_defect(&rho);
        if herm > 1e-12 {
            return Err(Error::NotHermitian {
                max_asymmetry: herm,
            });
        }
        let trace: Complex64 = (0..dim).map(|i| rho[(i, i)]).sum();
        if (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
            return Err(Error::NotNormalized {
                deviation: (trace - ONE).norm(),
            });
        }
        Ok(CompositeState {
            data: StateData::Mixed(rho),
            n_qubits,
            osc,
        })
    }

    /// |qubit_bits> (x) |fock>, with qubit_bits read as the register's
    /// computational index (qubit 0 = most significant bit).
    pub fn basis(
        n_qubits: usize,
        osc: OscillatorSpec,
        qubit_bits: usize,
        fock: usize,
    ) -> Result<Self> {
        if qubit_bits >= (1 << n_qubits) {
            return Err(Error::invalid(format!(
                "qubit basis index {qubit_bits} out of range for {n_qubits} qubits"
            )));
        }
        if fock >= osc.cutoff() {
            return Err(Error::invalid(format!(
                "Fock level {fock} out of range for cutoff {}",
                osc.cutoff()
            )));
        }
        let dim = osc.composite_dim(n_qubits);
        let mut v = Array1::<Complex64>::zeros(dim);
        v[qubit_bits * osc.cutoff() + fock] = ONE;
        Ok(CompositeState {
            data: StateData::Pure(v),
            n_qubits,
            osc,
        })
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn osc(&self) -> OscillatorSpec {
        self.osc
    }

    pub fn dim(&self) -> usize {
        self.osc.composite_dim(self.n_qubits)
    }

    /// Apply a unitary: psi -> U psi, or rho -> U rho U^dag.
    pub fn apply(&self, u: &DenseOperator) -> Result<CompositeState> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.dim(),
            });
        }
        let data = match &self.data {
            StateData::Pure(v) => StateData::Pure(u.matrix().dot(v)),
            StateData::Mixed(rho) => {
                let urho = linalg::matmul(u.matrix(), rho);
                StateData::Mixed(linalg::matmul(&urho, &linalg::adjoint(u.matrix())))
            }
        };
        Ok(CompositeState {
            data,
            n_qubits: self.n_qubits,
            osc: self.osc,
        })
    }

    /// Probability of finding the register at the given computational index,
    /// traced over the oscillator.
    pub fn register_probability(&self, qubit_bits: usize) -> f64 {
        let nf = self.osc.cutoff();
        let base = qubit_bits * nf;
        match &self.data {
            StateData::Pure(v) => (0..nf).map(|k| v[base + k].norm_sqr()).sum(),
            StateData::Mixed(rho) => (0..nf).map(|k| rho[(base + k, base + k)].re).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn commutator(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
        &linalg::matmul(a, b) - &linalg::matmul(b, a)
    }

    #[test]
    fn cutoff_below_two_is_rejected() {
        assert!(matches!(
            OscillatorSpec::new(1),
            Err(Error::InvalidCutoff { cutoff: 1 })
        ));
        assert!(OscillatorSpec::new(2).is_ok());
    }

    #[test]
    fn number_operator_diagonal() {
        let ops = build_oscillator_ops(OscillatorSpec::new(4).unwrap());
        assert_eq!(ops.n.matrix()[(2, 2)], Complex64::new(2.0, 0.0));
        assert_eq!(ops.n.matrix()[(1, 2)], ZERO);
    }

    #[test]
    fn x_matrix_element_between_vacuum_and_one() {
        let ops = build_oscillator_ops(OscillatorSpec::new(4).unwrap());
        let expect = 1.0 / 2f64.sqrt();
        assert!((ops.x.matrix()[(0, 1)] - Complex64::new(expect, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn canonical_commutator_away_from_truncation_edge() {
        let nf = 20;
        let ops = build_oscillator_ops(OscillatorSpec::new(nf).unwrap());
        let comm = commutator(ops.x.matrix(), ops.p.matrix());
        let mut worst = 0.0f64;
        for j in 0..nf - 2 {
            for k in 0..nf - 2 {
                let expect = if j == k { I } else { ZERO };
                worst = worst.max((comm[(j, k)] - expect).norm());
            }
        }
        assert!(worst < 1e-12, "commutator defect {worst:.3e}");
    }

    #[test]
    fn rotation_conjugation_mixes_quadratures() {
        let nf = 24;
        let ops = build_oscillator_ops(OscillatorSpec::new(nf).unwrap());
        for &theta in &[0.3, std::f64::consts::FRAC_PI_4, 1.0] {
            let plus = matrix_exponential(&ops.n, -theta).unwrap(); // exp(+i theta n)
            let minus = matrix_exponential(&ops.n, theta).unwrap();
            let conj = linalg::matmul(
                plus.matrix(),
                &linalg::matmul(ops.x.matrix(), minus.matrix()),
            );
            let expect =
                ops.x.matrix().mapv(|z| z * theta.cos()) + ops.p.matrix().mapv(|z| z * theta.sin());
            let mut worst = 0.0f64;
            for j in 0..nf - 2 {
                for k in 0..nf - 2 {
                    worst = worst.max((conj[(j, k)] - expect[(j, k)]).norm());
                }
            }
            assert!(worst < 1e-8, "theta={theta}: defect {worst:.3e}");
        }
    }

    #[test]
    fn pauli_z_sign_convention() {
        let z = pauli_matrix(Axis::Z, 0, 1).unwrap();
        // |1> (index 1) has eigenvalue +1, |0> has -1.
        assert_eq!(z.matrix()[(1, 1)], ONE);
        assert_eq!(z.matrix()[(0, 0)], -ONE);
    }

    #[test]
    fn pauli_x_flips() {
        let x = pauli_matrix(Axis::X, 0, 1).unwrap();
        let v = array![ONE, ZERO];
        let flipped = x.matrix().dot(&v);
        assert_eq!(flipped[0], ZERO);
        assert_eq!(flipped[1], ONE);
    }

    #[test]
    fn pauli_embedding_uses_msb_ordering() {
        // Z on qubit 1 of 2: |10> has qubit 1 in |0>, eigenvalue -1.
        let z1 = pauli_matrix(Axis::Z, 1, 2).unwrap();
        let idx = 0b10;
        assert_eq!(z1.matrix()[(idx, idx)], -ONE);
        let idx11 = 0b11;
        assert_eq!(z1.matrix()[(idx11, idx11)], ONE);
    }

    #[test]
    fn pauli_index_out_of_range() {
        assert!(pauli_matrix(Axis::X, 2, 2).is_err());
    }

    #[test]
    fn paulis_square_to_identity_and_distinct_qubits_commute() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let s = pauli_matrix(axis, 0, 2).unwrap();
            let sq = s.mul(&s).unwrap();
            assert!(sq.max_abs_diff(&DenseOperator::identity(s.space())) < 1e-15);
        }
        let x0 = pauli_matrix(Axis::X, 0, 2).unwrap();
        let y1 = pauli_matrix(Axis::Y, 1, 2).unwrap();
        let comm = commutator(x0.matrix(), y1.matrix());
        assert!(linalg::max_abs(&comm) < 1e-15);
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let h = DenseOperator::new(Array2::zeros((4, 4)), Space::Qubits { n_qubits: 2 }).unwrap();
        let u = matrix_exponential(&h, 3.7).unwrap();
        assert!(u.max_abs_diff(&DenseOperator::identity(h.space())) < 1e-14);
    }

    #[test]
    fn exponential_of_sigma_z_quarter_turn() {
        let z = pauli_matrix(Axis::Z, 0, 1).unwrap();
        let u = matrix_exponential(&z, std::f64::consts::FRAC_PI_2).unwrap();
        // diag over (|0>, |1>): e^{+i pi/2}, e^{-i pi/2}.
        let expect = array![[I, ZERO], [ZERO, -I]];
        assert!(linalg::max_abs_diff(u.matrix(), &expect) < 1e-14);
    }

    #[test]
    fn exponential_of_sigma_x_quarter_turn() {
        let x = pauli_matrix(Axis::X, 0, 1).unwrap();
        let u = matrix_exponential(&x, std::f64::consts::FRAC_PI_2).unwrap();
        let expect = pauli_2x2(Axis::X).mapv(|z| z * (-I));
        assert!(linalg::max_abs_diff(u.matrix(), &expect) < 1e-14);
    }

    #[test]
    fn exponential_rejects_non_hermitian() {
        let m = array![[ZERO, ONE], [ZERO, ZERO]];
        let op = DenseOperator::new(m, Space::Qubits { n_qubits: 1 }).unwrap();
        match matrix_exponential(&op, 1.0) {
            Err(Error::NotHermitian { max_asymmetry }) => {
                assert!((max_asymmetry - 1.0).abs() < 1e-15)
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn exponential_additivity() {
        let ops = build_oscillator_ops(OscillatorSpec::new(6).unwrap());
        let u1 = matrix_exponential(&ops.x, 0.4).unwrap();
        let u2 = matrix_exponential(&ops.x, 0.9).unwrap();
        let u12 = matrix_exponential(&ops.x, 1.3).unwrap();
        assert!(u1.mul(&u2).unwrap().max_abs_diff(&u12) < 1e-9);
    }

    #[test]
    fn embed_qubit_operator_with_two_level_oscillator() {
        let z = pauli_matrix(Axis::Z, 0, 1).unwrap();
        let target = Space::Composite {
            n_qubits: 1,
            cutoff: 2,
        };
        let full = embed(&z, target).unwrap();
        // index = qubit*2 + fock: diag(-1, -1, +1, +1).
        for (idx, expect) in [(0, -ONE), (1, -ONE), (2, ONE), (3, ONE)] {
            assert_eq!(full.matrix()[(idx, idx)], expect);
        }
    }

    #[test]
    fn embed_identity_is_identity() {
        let target = Space::Composite {
            n_qubits: 2,
            cutoff: 3,
        };
        let id_q = DenseOperator::identity(Space::Qubits { n_qubits: 2 });
        let full = embed(&id_q, target).unwrap();
        assert!(full.max_abs_diff(&DenseOperator::identity(target)) < 1e-15);
    }

    #[test]
    fn embed_rejects_wrong_factor_dimension() {
        let z = pauli_matrix(Axis::Z, 0, 1).unwrap();
        let target = Space::Composite {
            n_qubits: 2,
            cutoff: 4,
        };
        assert!(embed(&z, target).is_err());
    }

    #[test]
    fn basis_state_indexing() {
        let osc = OscillatorSpec::new(3).unwrap();
        let s = CompositeState::basis(2, osc, 0b10, 1).unwrap();
        match s.data() {
            StateData::Pure(v) => {
                assert_eq!(v[0b10 * 3 + 1], ONE);
                assert_eq!(v.iter().map(|z| z.norm_sqr()).sum::<f64>(), 1.0);
            }
            _ => panic!("expected pure state"),
        }
    }

    #[test]
    fn pure_state_norm_is_checked() {
        let osc = OscillatorSpec::new(2).unwrap();
        let v = Array1::from_elem(4, Complex64::new(0.9, 0.0));
        assert!(matches!(
            CompositeState::pure(v, 1, osc),
            Err(Error::NotNormalized { .. })
        ));
    }
}
