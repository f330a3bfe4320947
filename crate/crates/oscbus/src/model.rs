//! Pulse-schedule data model: commuting internal operators, segments,
//! sequences, and programs.
//!
//! A pulse sequence drives the bus Hamiltonian
//! `H = v A x + w B p + r C n + g D`, where A, B, C, D act on the qubits
//! only and commute because every qubit is assigned a single Pauli axis for
//! the whole sequence (the sequence's [`AxisFrame`]). The `g D` term couples
//! to no oscillator operator and contributes a pure internal phase.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{pauli_matrix, Axis};

pub const PROGRAM_SCHEMA_VERSION: u32 = 1;

/// Per-qubit Pauli-axis assignment, fixed for one pulse sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisFrame {
    axes: Vec<Axis>,
}

impl AxisFrame {
    pub fn new(axes: Vec<Axis>) -> Self {
        AxisFrame { axes }
    }

    pub fn uniform(axis: Axis, n_qubits: usize) -> Self {
        AxisFrame {
            axes: vec![axis; n_qubits],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, qubit: usize) -> Option<Axis> {
        self.axes.get(qubit).copied()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }
}

/// Affine combination of single-axis Pauli terms plus a constant:
/// `c0 + sum_l c_l * sigma_{axis_l, l}`, at most one term per qubit.
///
/// Because each qubit carries one axis, any two such operators over a shared
/// frame commute, and the operator's eigenvalue on a register eigen-tuple
/// `s in {-1,+1}^n` is the affine form `c0 + sum_l c_l s_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalOperator {
    c0: f64,
    terms: BTreeMap<usize, (Axis, f64)>,
}

impl InternalOperator {
    pub fn new(c0: f64, terms: impl IntoIterator<Item = (usize, Axis, f64)>) -> Self {
        InternalOperator {
            c0,
            terms: terms
                .into_iter()
                .map(|(q, axis, c)| (q, (axis, c)))
                .collect(),
        }
    }

    /// The zero operator.
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// A multiple of the identity.
    pub fn constant(c0: f64) -> Self {
        InternalOperator {
            c0,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity() -> Self {
        Self::constant(1.0)
    }

    /// A single Pauli operator.
    pub fn pauli(axis: Axis, qubit: usize) -> Self {
        Self::new(0.0, [(qubit, axis, 1.0)])
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, Axis, f64)> + '_ {
        self.terms.iter().map(|(&q, &(axis, c))| (q, axis, c))
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.terms.values().all(|&(_, c)| c == 0.0)
    }

    /// Eigenvalue on the register eigen-tuple `s` (entries +1 or -1, one per
    /// qubit, qubit 0 first).
    pub fn eigenvalue(&self, s: &[i8]) -> Result<f64> {
        let mut value = self.c0;
        for (q, _, c) in self.terms() {
            let sl = *s.get(q).ok_or(Error::QubitOutOfRange {
                index: q,
                n_qubits: s.len(),
            })?;
            debug_assert!(sl == 1 || sl == -1);
            value += c * f64::from(sl);
        }
        Ok(value)
    }

    /// Dense matrix on the n-qubit register. The frame must assign every
    /// referenced qubit the axis the term uses.
    pub fn to_matrix(&self, frame: &AxisFrame) -> Result<Array2<Complex64>> {
        let n = frame.n_qubits();
        let dim = 1usize << n;
        let mut m = Array2::<Complex64>::eye(dim).mapv(|z| z * self.c0);
        for (q, axis, c) in self.terms() {
            let frame_axis = frame.axis(q).ok_or(Error::QubitOutOfRange {
                index: q,
                n_qubits: n,
            })?;
            if axis != frame_axis {
                return Err(Error::FrameMismatch {
                    qubit: q,
                    op_axis: axis,
                    frame_axis,
                });
            }
            let pauli = pauli_matrix(axis, q, n)?;
            m = m + pauli.matrix().mapv(|z| z * c);
        }
        Ok(m)
    }

    /// Largest referenced qubit index, if any term is present.
    pub fn max_qubit(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }
}

/// One piecewise-constant slice of the bus Hamiltonian
/// `v A x + w B p + r C n + g D`, held for `duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub duration: f64,
    pub v: f64,
    pub w: f64,
    pub r: f64,
    pub g: f64,
    pub a: InternalOperator,
    pub b: InternalOperator,
    pub c: InternalOperator,
    pub d: InternalOperator,
}

impl PulseSegment {
    /// Segment with all couplings off.
    pub fn idle(duration: f64) -> Self {
        PulseSegment {
            duration,
            v: 0.0,
            w: 0.0,
            r: 0.0,
            g: 0.0,
            a: InternalOperator::zero(),
            b: InternalOperator::zero(),
            c: InternalOperator::zero(),
            d: InternalOperator::zero(),
        }
    }

    pub fn with_x(mut self, v: f64, a: InternalOperator) -> Self {
        self.v = v;
        self.a = a;
        self
    }

    pub fn with_p(mut self, w: f64, b: InternalOperator) -> Self {
        self.w = w;
        self.b = b;
        self
    }

    pub fn with_rotation(mut self, r: f64, c: InternalOperator) -> Self {
        self.r = r;
        self.c = c;
        self
    }

    pub fn with_drift(mut self, g: f64, d: InternalOperator) -> Self {
        self.g = g;
        self.d = d;
        self
    }

    fn operators(&self) -> [&InternalOperator; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// Operators with a live coupling, i.e. those that enter the Hamiltonian.
    fn active_operators(&self) -> impl Iterator<Item = &InternalOperator> {
        let coeffs = [self.v, self.w, self.r, self.g];
        self.operators()
            .into_iter()
            .zip(coeffs)
            .filter(|&(_, coeff)| coeff != 0.0)
            .map(|(op, _)| op)
    }
}

/// Ordered pulse segments sharing one axis frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub frame: AxisFrame,
    pub segments: Vec<PulseSegment>,
}

impl PulseSequence {
    pub fn new(frame: AxisFrame, segments: Vec<PulseSegment>) -> Self {
        PulseSequence { frame, segments }
    }

    pub fn n_qubits(&self) -> usize {
        self.frame.n_qubits()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Structural diagnostics; an empty list means the sequence is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        if self.segments.is_empty() {
            violations.push(Violation::Empty);
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration <= 0.0 || seg.duration.is_nan() {
                violations.push(Violation::NonPositiveDuration { segment: i });
            }
            for op in seg.active_operators() {
                for (q, axis, coeff) in op.terms() {
                    if coeff == 0.0 {
                        continue;
                    }
                    match self.frame.axis(q) {
                        None => violations.push(Violation::QubitOutOfRange {
                            segment: i,
                            qubit: q,
                        }),
                        Some(frame_axis) if frame_axis != axis => {
                            violations.push(Violation::FrameConflict {
                                segment: i,
                                qubit: q,
                                expected: frame_axis,
                                found: axis,
                            })
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        violations
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NonPositiveDuration {
        segment: usize,
    },
    QubitOutOfRange {
        segment: usize,
        qubit: usize,
    },
    FrameConflict {
        segment: usize,
        qubit: usize,
        expected: Axis,
        found: Axis,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty sequence"),
            Violation::NonPositiveDuration { segment } => {
                write!(f, "segment {segment}: non-positive duration")
            }
            Violation::QubitOutOfRange { segment, qubit } => {
                write!(f, "segment {segment}: qubit {qubit} outside the frame")
            }
            Violation::FrameConflict {
                segment,
                qubit,
                expected,
                found,
            } => write!(
                f,
                "segment {segment}: frame conflict on qubit {qubit} (frame {expected:?}, operator {found:?})"
            ),
        }
    }
}

/// Instantaneous single-qubit rotation exp(-i angle sigma_axis / 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealLocal {
    pub axis: Axis,
    pub angle: f64,
    pub qubit: usize,
}

impl IdealLocal {
    /// sigma_x flip up to a global phase: exp(-i pi sigma_x / 2) = -i sigma_x.
    pub fn x_flip(qubit: usize) -> Self {
        IdealLocal {
            axis: Axis::X,
            angle: std::f64::consts::PI,
            qubit,
        }
    }

    /// 2x2 unitary of the rotation.
    pub fn unitary_2x2(&self) -> Array2<Complex64> {
        let half = 0.5 * self.angle;
        let cos = Complex64::new(half.cos(), 0.0);
        let msin = Complex64::new(0.0, -half.sin());
        let pauli = crate::hilbert::pauli_2x2(self.axis);
        Array2::eye(2).mapv(|z: Complex64| z * cos) + pauli.mapv(|z| z * msin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProgramStep {
    Pulse(PulseSequence),
    Local(IdealLocal),
}

/// A full schedule: pulse sequences interleaved with ideal local rotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub steps: Vec<ProgramStep>,
}

impl Program {
    pub fn new(n_qubits: usize, steps: Vec<ProgramStep>) -> Self {
        Program {
            schema_version: PROGRAM_SCHEMA_VERSION,
            n_qubits,
            steps,
        }
    }

    pub fn from_sequence(seq: PulseSequence) -> Self {
        let n = seq.n_qubits();
        Self::new(n, vec![ProgramStep::Pulse(seq)])
    }

    /// All structural diagnostics across steps.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for step in &self.steps {
            match step {
                ProgramStep::Pulse(seq) => {
                    violations.extend(seq.validate());
                    if seq.n_qubits() != self.n_qubits {
                        violations.push(Violation::QubitOutOfRange {
                            segment: 0,
                            qubit: seq.n_qubits(),
                        });
                    }
                }
                ProgramStep::Local(local) => {
                    if local.qubit >= self.n_qubits {
                        violations.push(Violation::QubitOutOfRange {
                            segment: 0,
                            qubit: local.qubit,
                        });
                    }
                }
            }
        }
        violations
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("program JSON: {e}")))
    }
}

/// Uniformly sampled coefficient tables over one interval, linearly
/// interpolated between samples. Canonicalized to piecewise-constant
/// segments by midpoint evaluation on a refined grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledWaveform {
    pub duration: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub a: InternalOperator,
    pub b: InternalOperator,
    pub c: InternalOperator,
    pub d: InternalOperator,
}

impl SampledWaveform {
    pub fn validate(&self) -> Result<()> {
        let len = self.v.len();
        if len < 2 {
            return Err(Error::invalid("waveform needs at least 2 samples"));
        }
        if self.w.len() != len || self.r.len() != len || self.g.len() != len {
            return Err(Error::invalid("waveform sample tables differ in length"));
        }
        if self.duration <= 0.0 || self.duration.is_nan() {
            return Err(Error::invalid("waveform duration must be positive"));
        }
        Ok(())
    }

    fn interpolate(table: &[f64], u: f64) -> f64 {
        let m = table.len() - 1;
        let pos = u * m as f64;
        let idx = (pos.floor() as usize).min(m - 1);
        let frac = pos - idx as f64;
        table[idx] * (1.0 - frac) + table[idx + 1] * frac
    }

    /// Split into `substeps` constant segments, each taking the linearly
    /// interpolated coefficient values at its midpoint.
    pub fn subdivide(&self, substeps: usize) -> Result<Vec<PulseSegment>> {
        self.validate()?;
        if substeps == 0 {
            return Err(Error::invalid("substeps must be positive"));
        }
        let dt = self.duration / substeps as f64;
        Ok((0..substeps)
            .map(|k| {
                let u = (k as f64 + 0.5) / substeps as f64;
                PulseSegment {
                    duration: dt,
                    v: Self::interpolate(&self.v, u),
                    w: Self::interpolate(&self.w, u),
                    r: Self::interpolate(&self.r, u),
                    g: Self::interpolate(&self.g, u),
                    a: self.a.clone(),
                    b: self.b.clone(),
                    c: self.c.clone(),
                    d: self.d.clone(),
                }
            })
            .collect())
    }
}

/// Eigen-tuple for the register index `m`: entry `l` is +1 when bit `l`
/// (qubit 0 = most significant) of `m` is set, else -1.
pub fn tuple_from_index(m: usize, n_qubits: usize) -> Vec<i8> {
    (0..n_qubits)
        .map(|l| {
            if (m >> (n_qubits - 1 - l)) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// All 2^n eigen-tuples in register-index order.
pub fn all_tuples(n_qubits: usize) -> Vec<Vec<i8>> {
    (0..1usize << n_qubits)
        .map(|m| tuple_from_index(m, n_qubits))
        .collect()
}
