//! Quantum channel representations and the paper's channel models.
//!
//! [`KrausChannel`] is the general representation: an ordered list of
//! operator elements with the trace-preserving completeness contract.
//! [`PauliChannel`] is the probability-weighted Pauli form; relative to a
//! stabilizer code it reduces to a [`ReducedErrorTable`], the matrix of
//! coset probabilities `a[p][q]` that drives the whole analytical recovery
//! machinery.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{identity, kron, max_abs_diff, trace, C_ZERO};
use crate::pauli::{PauliError, PauliOperator, DEFAULT_MATRIX_CAP};
use crate::stabilizer::{CodeError, StabilizerCode};

/// Completeness tolerance for validated channels; absorbs the Kronecker
/// round-off accumulated by five-qubit tensor powers.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Tolerance on probability sums.
pub const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel needs at least one operator element")]
    Empty,
    #[error("operator {index} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("completeness violated: ||sum E^dag E - I|| = {residual:.3e}")]
    NotComplete { residual: f64 },
    #[error("channel fidelity needs a square channel, got {dim_out}x{dim_in}")]
    NonSquare { dim_out: usize, dim_in: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("parameter {name} = {value} out of range {range}")]
    ParamRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("trace-preserving condition has no real solution for theta={theta}, phi={phi}")]
    NoRealSolution { theta: f64, phi: f64 },
    #[error("weight of {op} is negative: {weight}")]
    NegativeWeight { op: String, weight: f64 },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("channel acts on {ch} qubits, code on {code}")]
    QubitMismatch { ch: usize, code: usize },
    #[error("tensor power of dimension {base} to exponent {exponent} exceeds the dense cap")]
    TensorCap { base: usize, exponent: usize },
    #[error("cannot parse channel text: {0}")]
    Parse(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// A completely positive trace preserving map in Kraus form.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    ops: Vec<DMatrix<Complex64>>,
}

impl KrausChannel {
    /// Builds a channel and verifies completeness within [`COMPLETENESS_TOL`].
    pub fn new(ops: Vec<DMatrix<Complex64>>) -> Result<Self, ChannelError> {
        let ch = Self::new_unchecked(ops)?;
        let residual = ch.completeness_residual();
        if residual > COMPLETENESS_TOL {
            return Err(ChannelError::NotComplete { residual });
        }
        Ok(ch)
    }

    /// Builds a channel without the completeness check. Shape consistency is
    /// still enforced. Intended for perturbation tests and intermediate
    /// constructions.
    pub fn new_unchecked(ops: Vec<DMatrix<Complex64>>) -> Result<Self, ChannelError> {
        if ops.is_empty() {
            return Err(ChannelError::Empty);
        }
        let (dim_out, dim_in) = ops[0].shape();
        for (index, op) in ops.iter().enumerate() {
            if op.shape() != (dim_out, dim_in) {
                return Err(ChannelError::ShapeMismatch {
                    index,
                    got: op.shape(),
                    expected: (dim_out, dim_in),
                });
            }
        }
        Ok(KrausChannel {
            dim_in,
            dim_out,
            ops,
        })
    }

    /// The identity channel on a `dim`-dimensional system.
    pub fn identity_channel(dim: usize) -> Self {
        KrausChannel {
            dim_in: dim,
            dim_out: dim,
            ops: vec![identity(dim)],
        }
    }

    /// A channel with a single operator element (e.g. an isometry).
    pub fn from_single_op(op: DMatrix<Complex64>) -> Result<Self, ChannelError> {
        Self::new(vec![op])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn ops(&self) -> &[DMatrix<Complex64>] {
        &self.ops
    }

    /// `|| sum_i E_i^dag E_i - I ||_max`.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = DMatrix::from_element(self.dim_in, self.dim_in, C_ZERO);
        for op in &self.ops {
            sum += op.adjoint() * op;
        }
        max_abs_diff(&sum, &identity(self.dim_in))
    }

    /// Applies the channel to a density matrix.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, ChannelError> {
        if rho.shape() != (self.dim_in, self.dim_in) {
            return Err(ChannelError::DimensionMismatch {
                left: rho.nrows(),
                right: self.dim_in,
            });
        }
        let mut out = DMatrix::from_element(self.dim_out, self.dim_out, C_ZERO);
        for op in &self.ops {
            out += op * rho * op.adjoint();
        }
        Ok(out)
    }

    /// Channel fidelity `sum_i |Tr E_i|^2 / d^2`, the entanglement fidelity
    /// with a maximally entangled input.
    pub fn fidelity(&self) -> Result<f64, ChannelError> {
        if self.dim_in != self.dim_out {
            return Err(ChannelError::NonSquare {
                dim_out: self.dim_out,
                dim_in: self.dim_in,
            });
        }
        let d2 = (self.dim_in * self.dim_in) as f64;
        Ok(self.ops.iter().map(|op| trace(op).norm_sqr() / d2).sum())
    }

    /// Composition `self . inner`: `inner` acts first.
    pub fn compose(&self, inner: &KrausChannel) -> Result<KrausChannel, ChannelError> {
        if self.dim_in != inner.dim_out {
            return Err(ChannelError::DimensionMismatch {
                left: self.dim_in,
                right: inner.dim_out,
            });
        }
        let mut ops = Vec::with_capacity(self.ops.len() * inner.ops.len());
        for outer in &self.ops {
            for e in &inner.ops {
                ops.push(outer * e);
            }
        }
        Ok(KrausChannel {
            dim_in: inner.dim_in,
            dim_out: self.dim_out,
            ops,
        })
    }

    /// Convex mixture: operator elements `{sqrt(1-gamma) E_j} + {sqrt(gamma) F_k}`,
    /// duplicates kept (multiset union).
    pub fn mix(&self, other: &KrausChannel, gamma: f64) -> Result<KrausChannel, ChannelError> {
        if self.dim_in != other.dim_in || self.dim_out != other.dim_out {
            return Err(ChannelError::DimensionMismatch {
                left: self.dim_in,
                right: other.dim_in,
            });
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(ChannelError::ParamRange {
                name: "gamma",
                value: gamma,
                range: "[0, 1]",
            });
        }
        let a = Complex64::new((1.0 - gamma).sqrt(), 0.0);
        let b = Complex64::new(gamma.sqrt(), 0.0);
        let mut ops = Vec::with_capacity(self.ops.len() + other.ops.len());
        ops.extend(self.ops.iter().map(|op| op * a));
        ops.extend(other.ops.iter().map(|op| op * b));
        Ok(KrausChannel {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            ops,
        })
    }

    /// Independent identical copies: `count`-fold Kronecker power with one
    /// operator element per index tuple, first factor's index most
    /// significant.
    pub fn tensor_power(&self, count: usize) -> Result<KrausChannel, ChannelError> {
        assert!(count >= 1, "tensor power needs a positive exponent");
        let bits_in = self.dim_in.next_power_of_two().trailing_zeros() as usize;
        if bits_in * count > DEFAULT_MATRIX_CAP
            || self.ops.len().pow(count as u32) > (1 << 20)
        {
            return Err(ChannelError::TensorCap {
                base: self.dim_in,
                exponent: count,
            });
        }
        let one = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let mut ops = vec![one];
        for _ in 0..count {
            let mut next = Vec::with_capacity(ops.len() * self.ops.len());
            for acc in &ops {
                for op in &self.ops {
                    next.push(kron(acc, op));
                }
            }
            ops = next;
        }
        Ok(KrausChannel {
            dim_in: self.dim_in.pow(count as u32),
            dim_out: self.dim_out.pow(count as u32),
            ops,
        })
    }

    /// Serializes operator elements in a plain text form for cross-checking:
    /// a header `dim_out dim_in num_ops`, then each operator as `dim_out`
    /// lines of row-major `re,im` pairs.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.dim_out, self.dim_in, self.ops.len());
        for op in &self.ops {
            for r in 0..self.dim_out {
                let row: Vec<String> = (0..self.dim_in)
                    .map(|c| format!("{:e},{:e}", op[(r, c)].re, op[(r, c)].im))
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    /// Parses the format written by [`Self::to_text`]. Operator order is
    /// preserved; the completeness check is re-run.
    pub fn from_text(text: &str) -> Result<Self, ChannelError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| ChannelError::Parse("missing header line".to_string()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| ChannelError::Parse(format!("bad header token {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        let [dim_out, dim_in, num_ops] = dims[..] else {
            return Err(ChannelError::Parse(
                "header must be `dim_out dim_in num_ops`".into(),
            ));
        };
        let mut ops = Vec::with_capacity(num_ops);
        for op_idx in 0..num_ops {
            let mut m = DMatrix::from_element(dim_out, dim_in, C_ZERO);
            for r in 0..dim_out {
                let line = lines.next().ok_or_else(|| {
                    ChannelError::Parse(format!("operator {op_idx} truncated at row {r}"))
                })?;
                let entries: Vec<&str> = line.split_whitespace().collect();
                if entries.len() != dim_in {
                    return Err(ChannelError::Parse(format!(
                        "operator {op_idx} row {r} has {} entries, expected {dim_in}",
                        entries.len()
                    )));
                }
                for (c, tok) in entries.iter().enumerate() {
                    let (re, im) = tok.split_once(',').ok_or_else(|| {
                        ChannelError::Parse(format!("entry {tok:?} is not `re,im`"))
                    })?;
                    let parse = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| ChannelError::Parse(format!("bad float {s:?}")))
                    };
                    m[(r, c)] = Complex64::new(parse(re)?, parse(im)?);
                }
            }
            ops.push(m);
        }
        Self::new(ops)
    }
}

/// Prepends the code's encoding isometry to a physical-space channel,
/// giving the logical-to-physical map with operator elements `E_l U_C`.
pub fn encoded_channel(
    code: &StabilizerCode,
    ch: &KrausChannel,
) -> Result<KrausChannel, ChannelError> {
    let encoding = KrausChannel::from_single_op(code.encoder().clone())?;
    ch.compose(&encoding)
}

/// The amplitude damping channel: decay of the excited state with
/// probability `p`.
pub fn amplitude_damping(p: f64) -> Result<KrausChannel, ChannelError> {
    check_unit_range("p", p)?;
    let e0 = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            C_ZERO,
            C_ZERO,
            Complex64::new((1.0 - p).sqrt(), 0.0),
        ],
    );
    let e1 = DMatrix::from_row_slice(
        2,
        2,
        &[C_ZERO, Complex64::new(p.sqrt(), 0.0), C_ZERO, C_ZERO],
    );
    KrausChannel::new(vec![e0, e1])
}

/// The pure-states-rotation channel. The scale of the identity-like element
/// and of the two rotation elements follows from the trace-preserving
/// condition: the off-diagonal contributions of the rotation pair cancel,
/// leaving two diagonal equations linear in the squared scales, solved in
/// closed form (positive roots).
pub fn pure_states_rotation(theta: f64, phi: f64) -> Result<KrausChannel, ChannelError> {
    let sin_theta = theta.sin();
    if !(theta > 0.0 && theta < std::f64::consts::PI) || sin_theta.abs() < 1e-12 {
        return Err(ChannelError::ParamRange {
            name: "theta",
            value: theta,
            range: "(0, pi)",
        });
    }
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let cm = ((theta - phi) / 2.0).cos();
    let sm = ((theta - phi) / 2.0).sin();

    let cos_tp = (theta - phi).cos();
    let alpha_sq = theta.cos() / cos_tp;
    let beta_sq =
        2.0 * (phi / 2.0).sin() * (theta - phi / 2.0).sin() / (cos_tp * sin_theta * sin_theta);
    if !alpha_sq.is_finite() || !beta_sq.is_finite() || alpha_sq < 0.0 || beta_sq < 0.0 {
        return Err(ChannelError::NoRealSolution { theta, phi });
    }
    let alpha = Complex64::new(alpha_sq.sqrt(), 0.0);
    let beta = Complex64::new(beta_sq.sqrt(), 0.0);

    let r = |v: f64| Complex64::new(v, 0.0);
    let e0 = DMatrix::from_row_slice(2, 2, &[r(cm / c), C_ZERO, C_ZERO, r(sm / s)]) * alpha;
    let e_plus = DMatrix::from_row_slice(2, 2, &[r(cm * s), r(cm * c), r(sm * s), r(sm * c)]) * beta;
    let e_minus =
        DMatrix::from_row_slice(2, 2, &[r(cm * s), r(-cm * c), r(-sm * s), r(sm * c)]) * beta;
    KrausChannel::new(vec![e0, e_plus, e_minus])
}

fn check_unit_range(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(ChannelError::ParamRange {
            name,
            value,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// A channel whose operator elements are probability-weighted Paulis.
///
/// Keys are stored with plain `+1` sign; the global phase of an error
/// operator never affects the channel action, so it is dropped at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n: usize,
    weights: BTreeMap<PauliOperator, f64>,
}

impl PauliChannel {
    pub fn new(
        n: usize,
        weights: impl IntoIterator<Item = (PauliOperator, f64)>,
    ) -> Result<Self, ChannelError> {
        let mut map: BTreeMap<PauliOperator, f64> = BTreeMap::new();
        for (op, w) in weights {
            if op.num_qubits() != n {
                return Err(ChannelError::QubitMismatch {
                    ch: op.num_qubits(),
                    code: n,
                });
            }
            if w < -PROBABILITY_TOL {
                return Err(ChannelError::NegativeWeight {
                    op: op.to_string(),
                    weight: w,
                });
            }
            if w <= 0.0 {
                continue;
            }
            *map.entry(op.with_plain_sign()).or_insert(0.0) += w;
        }
        let sum: f64 = map.values().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(ChannelError::WeightSum { sum });
        }
        Ok(PauliChannel { n, weights: map })
    }

    /// The noiseless Pauli channel.
    pub fn identity_channel(n: usize) -> Self {
        PauliChannel {
            n,
            weights: BTreeMap::from([(PauliOperator::identity(n), 1.0)]),
        }
    }

    /// A deterministic single-error channel (an extremal point of the
    /// channel simplex).
    pub fn point(op: PauliOperator) -> Self {
        let n = op.num_qubits();
        PauliChannel {
            n,
            weights: BTreeMap::from([(op.with_plain_sign(), 1.0)]),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &BTreeMap<PauliOperator, f64> {
        &self.weights
    }

    /// Channel fidelity from the weighted trace formula: only the identity
    /// operator has non-zero trace, so `F = a_identity`.
    pub fn fidelity(&self) -> f64 {
        self.weights
            .get(&PauliOperator::identity(self.n))
            .copied()
            .unwrap_or(0.0)
    }

    /// Entrywise convex combination of the weight maps; equivalent to Kraus
    /// mixing for Pauli channels.
    pub fn mix(&self, other: &PauliChannel, gamma: f64) -> Result<PauliChannel, ChannelError> {
        if self.n != other.n {
            return Err(ChannelError::QubitMismatch {
                ch: other.n,
                code: self.n,
            });
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(ChannelError::ParamRange {
                name: "gamma",
                value: gamma,
                range: "[0, 1]",
            });
        }
        let mut map: BTreeMap<PauliOperator, f64> = BTreeMap::new();
        for (op, w) in &self.weights {
            *map.entry(op.clone()).or_insert(0.0) += (1.0 - gamma) * w;
        }
        for (op, w) in &other.weights {
            *map.entry(op.clone()).or_insert(0.0) += gamma * w;
        }
        Ok(PauliChannel {
            n: self.n,
            weights: map,
        })
    }

    /// Tensor product of two Pauli channels (independent noise on the two
    /// registers).
    pub fn tensor(&self, other: &PauliChannel) -> PauliChannel {
        let mut map = BTreeMap::new();
        for (a, wa) in &self.weights {
            for (b, wb) in &other.weights {
                map.insert(a.tensor(b), wa * wb);
            }
        }
        PauliChannel {
            n: self.n + other.n,
            weights: map,
        }
    }

    /// Independent identical copies on `count` registers.
    pub fn tensor_power(&self, count: usize) -> PauliChannel {
        assert!(count >= 1, "tensor power needs a positive exponent");
        let mut out = self.clone();
        for _ in 1..count {
            out = out.tensor(self);
        }
        out
    }

    /// The Kraus form `{sqrt(a_i) g_i}` in deterministic key order.
    pub fn to_kraus(&self) -> Result<KrausChannel, ChannelError> {
        let mut ops = Vec::with_capacity(self.weights.len());
        for (op, w) in &self.weights {
            ops.push(op.to_matrix()? * Complex64::new(w.sqrt(), 0.0));
        }
        KrausChannel::new(ops)
    }

    /// Sums the probability of every Pauli over its coset, producing the
    /// `a[p][q]` table relative to `code`.
    pub fn reduce(&self, code: &StabilizerCode) -> Result<ReducedErrorTable, ChannelError> {
        if self.n != code.num_qubits() {
            return Err(ChannelError::QubitMismatch {
                ch: self.n,
                code: code.num_qubits(),
            });
        }
        let mut a =
            DMatrix::from_element(code.num_logical_classes(), code.num_syndromes(), 0.0f64);
        for (op, w) in &self.weights {
            let idx = code.decompose(op)?;
            a[(idx.p, idx.q)] += w;
        }
        Ok(ReducedErrorTable {
            n: code.num_qubits(),
            k: code.num_logical_qubits(),
            a,
        })
    }
}

/// The phase damping channel as a Pauli channel: identity with probability
/// `1 - p/2`, Z with probability `p/2`.
pub fn phase_damping(p: f64) -> Result<PauliChannel, ChannelError> {
    check_unit_range("p", p)?;
    PauliChannel::new(
        1,
        [
            (PauliOperator::identity(1), 1.0 - p / 2.0),
            ("Z".parse::<PauliOperator>().expect("valid"), p / 2.0),
        ],
    )
}

/// The depolarizing channel as a Pauli channel: identity with probability
/// `1 - 3p/4`, each of X, Y, Z with probability `p/4`.
pub fn depolarizing(p: f64) -> Result<PauliChannel, ChannelError> {
    check_unit_range("p", p)?;
    PauliChannel::new(
        1,
        [
            (PauliOperator::identity(1), 1.0 - 3.0 * p / 4.0),
            ("X".parse::<PauliOperator>().expect("valid"), p / 4.0),
            ("Y".parse::<PauliOperator>().expect("valid"), p / 4.0),
            ("Z".parse::<PauliOperator>().expect("valid"), p / 4.0),
        ],
    )
}

/// The `a[p][q]` matrix of coset probabilities of a Pauli channel relative
/// to a code: rows indexed by logical class, columns by syndrome.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedErrorTable {
    n: usize,
    k: usize,
    a: DMatrix<f64>,
}

impl ReducedErrorTable {
    /// Wraps an explicit table; used for synthetic experiments. Entries must
    /// be non-negative and sum to one.
    pub fn from_matrix(n: usize, k: usize, a: DMatrix<f64>) -> Result<Self, ChannelError> {
        if a.nrows() != 1 << (2 * k) || a.ncols() != 1 << (n - k) {
            return Err(ChannelError::DimensionMismatch {
                left: a.nrows() * a.ncols(),
                right: (1 << (2 * k)) * (1 << (n - k)),
            });
        }
        if let Some(bad) = a.iter().find(|&&w| w < -PROBABILITY_TOL) {
            return Err(ChannelError::NegativeWeight {
                op: "table entry".to_string(),
                weight: *bad,
            });
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(ChannelError::WeightSum { sum });
        }
        Ok(ReducedErrorTable { n, k, a })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_logical_qubits(&self) -> usize {
        self.k
    }

    pub fn num_logical_classes(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_syndromes(&self) -> usize {
        self.a.ncols()
    }

    pub fn entry(&self, p: usize, q: usize) -> f64 {
        self.a[(p, q)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn total_mass(&self) -> f64 {
        self.a.iter().sum()
    }

    /// Probability that a syndrome measurement returns `q`.
    pub fn syndrome_probability(&self, q: usize) -> f64 {
        self.a.column(q).iter().sum()
    }

    /// Shape compatibility check used by the mixing and plan machinery.
    pub fn same_shape(&self, other: &ReducedErrorTable) -> bool {
        self.n == other.n && self.k == other.k
    }

    pub(crate) fn from_parts(n: usize, k: usize, a: DMatrix<f64>) -> Self {
        ReducedErrorTable { n, k, a }
    }
}

/// Declarative channel description used by config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelSpec {
    PhaseDamping {
        p: f64,
    },
    Depolarizing {
        p: f64,
    },
    AmplitudeDamping {
        p: f64,
    },
    PureStatesRotation {
        theta: f64,
        phi: f64,
    },
    /// An explicit n-qubit Pauli channel: parallel lists of Pauli strings
    /// and probabilities.
    PauliTable {
        paulis: Vec<String>,
        weights: Vec<f64>,
    },
}

/// A constructed channel, keeping the Pauli structure when there is one.
#[derive(Debug, Clone)]
pub enum BuiltChannel {
    Pauli(PauliChannel),
    General(KrausChannel),
}

impl BuiltChannel {
    pub fn is_pauli(&self) -> bool {
        matches!(self, BuiltChannel::Pauli(_))
    }

    pub fn as_pauli(&self) -> Option<&PauliChannel> {
        match self {
            BuiltChannel::Pauli(ch) => Some(ch),
            BuiltChannel::General(_) => None,
        }
    }

    pub fn to_kraus(&self) -> Result<KrausChannel, ChannelError> {
        match self {
            BuiltChannel::Pauli(ch) => ch.to_kraus(),
            BuiltChannel::General(ch) => Ok(ch.clone()),
        }
    }
}

impl ChannelSpec {
    /// Builds the channel on `n_qubits` physical qubits. Single-qubit models
    /// are applied independently to every qubit; a `pauli_table` must match
    /// the qubit count directly.
    pub fn build(&self, n_qubits: usize) -> Result<BuiltChannel, ChannelError> {
        match self {
            ChannelSpec::PhaseDamping { p } => Ok(BuiltChannel::Pauli(
                phase_damping(*p)?.tensor_power(n_qubits),
            )),
            ChannelSpec::Depolarizing { p } => Ok(BuiltChannel::Pauli(
                depolarizing(*p)?.tensor_power(n_qubits),
            )),
            ChannelSpec::AmplitudeDamping { p } => Ok(BuiltChannel::General(
                amplitude_damping(*p)?.tensor_power(n_qubits)?,
            )),
            ChannelSpec::PureStatesRotation { theta, phi } => Ok(BuiltChannel::General(
                pure_states_rotation(*theta, *phi)?.tensor_power(n_qubits)?,
            )),
            ChannelSpec::PauliTable { paulis, weights } => {
                if paulis.len() != weights.len() {
                    return Err(ChannelError::Parse(format!(
                        "pauli_table has {} operators but {} weights",
                        paulis.len(),
                        weights.len()
                    )));
                }
                let mut entries = Vec::with_capacity(paulis.len());
                for (s, &w) in paulis.iter().zip(weights) {
                    entries.push((s.parse::<PauliOperator>()?, w));
                }
                Ok(BuiltChannel::Pauli(PauliChannel::new(n_qubits, entries)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C_ONE;
    use crate::pauli::enumerate_paulis;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn random_density(dim: usize, seed: u64) -> DMatrix<Complex64> {
        // Deterministic pseudo-random Hermitian PSD matrix with unit trace.
        let mut state = seed;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let g = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(next(), next()));
        let h = &g * g.adjoint();
        let t = trace(&h).re;
        h / Complex64::new(t, 0.0)
    }

    #[test]
    fn fidelity_basics() {
        assert_eq!(KrausChannel::identity_channel(2).fidelity().unwrap(), 1.0);
        assert_eq!(KrausChannel::identity_channel(8).fidelity().unwrap(), 1.0);
        let z_channel = KrausChannel::new(vec![p("Z").to_matrix().unwrap()]).unwrap();
        assert_eq!(z_channel.fidelity().unwrap(), 0.0);
        for pr in [0.0, 0.3, 0.7] {
            let f = depolarizing(pr)
                .unwrap()
                .to_kraus()
                .unwrap()
                .fidelity()
                .unwrap();
            assert!((f - (1.0 - 3.0 * pr / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_fidelity_matches_kraus_route() {
        for ch in [
            phase_damping(0.3).unwrap().tensor_power(3),
            depolarizing(0.42).unwrap().tensor_power(2),
        ] {
            let direct = ch.fidelity();
            let dense = ch.to_kraus().unwrap().fidelity().unwrap();
            assert!((direct - dense).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_with_identity_preserves_ops() {
        let e = amplitude_damping(0.3).unwrap();
        let composed = KrausChannel::identity_channel(2).compose(&e).unwrap();
        assert_eq!(composed.ops().len(), e.ops().len());
        for (a, b) in composed.ops().iter().zip(e.ops()) {
            assert_eq!(max_abs_diff(a, b), 0.0);
        }
    }

    #[test]
    fn unitary_conjugation_has_unit_fidelity() {
        let y = p("Y").to_matrix().unwrap();
        let u = KrausChannel::from_single_op(y.clone()).unwrap();
        let u_dag = KrausChannel::from_single_op(y.adjoint()).unwrap();
        assert!((u_dag.compose(&u).unwrap().fidelity().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let first = amplitude_damping(0.4).unwrap();
        let second = pure_states_rotation(5.0 * std::f64::consts::PI / 12.0, 0.3).unwrap();
        let composed = second.compose(&first).unwrap();
        let rho = random_density(2, 7);
        let direct = second.apply(&first.apply(&rho).unwrap()).unwrap();
        let via_composed = composed.apply(&rho).unwrap();
        assert!(max_abs_diff(&direct, &via_composed) < 1e-14);
    }

    #[test]
    fn mix_endpoints_and_linearity() {
        let e0 = amplitude_damping(0.3).unwrap();
        let e1 = phase_damping(0.5).unwrap().to_kraus().unwrap();
        let at0 = e0.mix(&e1, 0.0).unwrap();
        assert_eq!(at0.ops().len(), e0.ops().len() + e1.ops().len());
        let rho = random_density(2, 13);
        for gamma in [0.0, 0.25, 0.8, 1.0] {
            let mixed = e0.mix(&e1, gamma).unwrap();
            let expected = e0.apply(&rho).unwrap() * Complex64::new(1.0 - gamma, 0.0)
                + e1.apply(&rho).unwrap() * Complex64::new(gamma, 0.0);
            assert!(max_abs_diff(&mixed.apply(&rho).unwrap(), &expected) < 1e-12);
        }
        assert!(e0.mix(&e1, 1.5).is_err());
    }

    #[test]
    fn tensor_power_shapes_and_completeness() {
        let single = amplitude_damping(0.3).unwrap();
        let five = single.tensor_power(5).unwrap();
        assert_eq!(five.dim_in(), 32);
        assert_eq!(five.ops().len(), 32);
        assert!(five.completeness_residual() < COMPLETENESS_TOL);
        let id5 = KrausChannel::identity_channel(2).tensor_power(5).unwrap();
        assert_eq!(max_abs_diff(&id5.ops()[0], &identity(32)), 0.0);
        let one = single.tensor_power(1).unwrap();
        assert_eq!(one.ops().len(), 2);
        assert_eq!(max_abs_diff(&one.ops()[0], &single.ops()[0]), 0.0);
    }

    #[test]
    fn pauli_tensor_power_multiplies_weights() {
        let ch = phase_damping(0.3).unwrap().tensor_power(3);
        assert_eq!(ch.num_qubits(), 3);
        assert_eq!(ch.weights().len(), 8);
        let w_zzi = ch.weights()[&p("ZZI")];
        assert!((w_zzi - 0.15 * 0.15 * 0.85).abs() < 1e-15);
        let total: f64 = ch.weights().values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_damping_and_depolarizing_weights() {
        let ch = phase_damping(0.0).unwrap();
        assert_eq!(ch.weights()[&PauliOperator::identity(1)], 1.0);
        let ch = phase_damping(0.3).unwrap();
        assert!((ch.weights()[&PauliOperator::identity(1)] - 0.85).abs() < 1e-15);
        assert!((ch.weights()[&p("Z")] - 0.15).abs() < 1e-15);
        let ch = depolarizing(0.4).unwrap();
        assert!((ch.weights()[&PauliOperator::identity(1)] - 0.7).abs() < 1e-15);
        for letter in ["X", "Y", "Z"] {
            assert!((ch.weights()[&p(letter)] - 0.1).abs() < 1e-15);
        }
        assert!(phase_damping(1.5).is_err());
        assert!(depolarizing(-0.1).is_err());
    }

    #[test]
    fn amplitude_damping_limits() {
        let id_like = amplitude_damping(0.0).unwrap();
        assert_eq!(max_abs_diff(&id_like.ops()[0], &identity(2)), 0.0);
        // Full decay sends |1><1| to |0><0|.
        let full = amplitude_damping(1.0).unwrap();
        let mut rho = DMatrix::from_element(2, 2, C_ZERO);
        rho[(1, 1)] = C_ONE;
        let out = full.apply(&rho).unwrap();
        assert!((out[(0, 0)] - C_ONE).norm() < 1e-15);
        assert!(out[(1, 1)].norm() < 1e-15);
        assert!(amplitude_damping(0.3).unwrap().completeness_residual() < 1e-15);
    }

    #[test]
    fn pure_states_rotation_completeness() {
        let theta = 5.0 * std::f64::consts::PI / 12.0;
        // phi = 0 makes the first element proportional to the identity.
        let ch = pure_states_rotation(theta, 0.0).unwrap();
        let e0 = &ch.ops()[0];
        assert!((e0[(0, 0)] - e0[(1, 1)]).norm() < 1e-15);
        assert!(ch.completeness_residual() < 1e-12);

        let ch = pure_states_rotation(theta, 5.0 * std::f64::consts::PI / 36.0).unwrap();
        assert!(ch.completeness_residual() < 1e-12);

        for (t, f) in [(0.4, 0.1), (1.2, 0.65), (1.5, 0.2), (theta, 0.52)] {
            let ch = pure_states_rotation(t, f).unwrap();
            assert!(
                ch.completeness_residual() < 1e-12,
                "theta={t} phi={f} residual {}",
                ch.completeness_residual()
            );
        }

        assert!(pure_states_rotation(0.0, 0.1).is_err());
        assert!(pure_states_rotation(std::f64::consts::PI, 0.1).is_err());
        // theta - phi beyond pi/2 leaves no real solution for the scales.
        assert!(pure_states_rotation(theta, 3.0).is_err());
    }

    #[test]
    fn pauli_channel_validation() {
        let err = PauliChannel::new(1, [(p("X"), 0.5)]);
        assert!(matches!(err, Err(ChannelError::WeightSum { .. })));
        let err = PauliChannel::new(1, [(p("X"), -0.2), (p("I"), 1.2)]);
        assert!(matches!(err, Err(ChannelError::NegativeWeight { .. })));
        // Phases are dropped at the probability level.
        let ch = PauliChannel::new(1, [(p("-iY"), 0.5), (p("Y"), 0.5)]).unwrap();
        assert_eq!(ch.weights().len(), 1);
        assert!((ch.weights()[&p("Y")] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduce_identity_channel() {
        let code = StabilizerCode::divincenzo5();
        let table = PauliChannel::identity_channel(5).reduce(&code).unwrap();
        assert_eq!(table.entry(0, 0), 1.0);
        assert!((table.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(table.num_logical_classes(), 4);
        assert_eq!(table.num_syndromes(), 16);
    }

    #[test]
    fn reduce_bitflip_code_iid_x_noise() {
        // i.i.d. X flips with probability p, as a 1-qubit Pauli channel
        // tensored to three qubits.
        let pr = 0.1;
        let single =
            PauliChannel::new(1, [(PauliOperator::identity(1), 1.0 - pr), (p("X"), pr)]).unwrap();
        let table = single
            .tensor_power(3)
            .reduce(&StabilizerCode::bitflip3())
            .unwrap();
        let p3 = pr * pr * pr;
        let p2 = pr * pr * (1.0 - pr);
        let p1 = pr * (1.0 - pr) * (1.0 - pr);
        let p0 = (1.0 - pr) * (1.0 - pr) * (1.0 - pr);
        // Hand-derived coset layout: identity and XXX share syndrome 0;
        // each single flip shares its syndrome with the complementary
        // double flip.
        assert!((table.entry(0, 0) - p0).abs() < 1e-15);
        assert!((table.entry(1, 0) - p3).abs() < 1e-15);
        for q in 1..4 {
            assert!((table.entry(1, q) - p1).abs() < 1e-15);
            assert!((table.entry(0, q) - p2).abs() < 1e-15);
        }
        assert!((table.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn syndrome_probabilities_match_dense_projectors() {
        let code = StabilizerCode::divincenzo5();
        let ch = phase_damping(0.3).unwrap().tensor_power(5);
        let table = ch.reduce(&code).unwrap();
        // rho_C: maximally mixed code state.
        let p_c = code.projector();
        let rho = &p_c / Complex64::new(2.0, 0.0);
        let out = ch.to_kraus().unwrap().apply(&rho).unwrap();
        for q in 0..code.num_syndromes() {
            let w = code.syndrome_rep(q).unwrap().to_matrix().unwrap();
            let p_q = &w * &p_c * w.adjoint();
            let direct = trace(&(&p_q * &out)).re;
            assert!(
                (direct - table.syndrome_probability(q)).abs() < 1e-12,
                "syndrome {q}: dense {direct} vs table {}",
                table.syndrome_probability(q)
            );
        }
    }

    #[test]
    fn reduce_conserves_mass_for_every_single_qubit_model() {
        let code = StabilizerCode::divincenzo5();
        for ch in [phase_damping(0.37).unwrap(), depolarizing(0.52).unwrap()] {
            let table = ch.tensor_power(5).reduce(&code).unwrap();
            assert!((table.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kraus_text_round_trip() {
        let ch = pure_states_rotation(1.1, 0.4).unwrap();
        let text = ch.to_text();
        let back = KrausChannel::from_text(&text).unwrap();
        assert_eq!(back.ops().len(), ch.ops().len());
        for (a, b) in back.ops().iter().zip(ch.ops()) {
            assert!(max_abs_diff(a, b) < 1e-15);
        }
        assert!(KrausChannel::from_text("2 2\n").is_err());
    }

    #[test]
    fn completeness_check_rejects_bad_sets() {
        let half = p("I").to_matrix().unwrap() * Complex64::new(0.5, 0.0);
        assert!(matches!(
            KrausChannel::new(vec![half.clone()]),
            Err(ChannelError::NotComplete { .. })
        ));
        // The unchecked constructor allows it.
        assert!(KrausChannel::new_unchecked(vec![half]).is_ok());
    }

    #[test]
    fn channel_spec_builds() {
        let spec = ChannelSpec::PhaseDamping { p: 0.3 };
        let built = spec.build(5).unwrap();
        assert!(built.is_pauli());
        assert_eq!(built.to_kraus().unwrap().dim_in(), 32);

        let spec = ChannelSpec::AmplitudeDamping { p: 0.3 };
        let built = spec.build(5).unwrap();
        assert!(!built.is_pauli());

        let spec = ChannelSpec::PauliTable {
            paulis: vec!["IZZII".to_string()],
            weights: vec![1.0],
        };
        let built = spec.build(5).unwrap();
        assert!(built
            .as_pauli()
            .unwrap()
            .weights()
            .contains_key(&p("IZZII")));

        let toml_text = "type = \"pure_states_rotation\"\ntheta = 1.2\nphi = 0.3\n";
        let parsed: ChannelSpec = toml::from_str(toml_text).unwrap();
        assert_eq!(
            parsed,
            ChannelSpec::PureStatesRotation {
                theta: 1.2,
                phi: 0.3
            }
        );
    }

    #[test]
    fn mixing_is_affine_in_fidelity_after_recovery() {
        // F(R . mix(E0, E1, gamma)) must be exactly affine in gamma for a
        // fixed recovery channel R; here R is a fixed unitary channel.
        let e0 = phase_damping(0.3).unwrap().to_kraus().unwrap();
        let e1 = amplitude_damping(0.4).unwrap();
        let r = KrausChannel::from_single_op(p("Y").to_matrix().unwrap()).unwrap();
        let f0 = r.compose(&e0).unwrap().fidelity().unwrap();
        let f1 = r.compose(&e1).unwrap().fidelity().unwrap();
        for gamma in [0.1, 0.5, 0.77] {
            let mixed = e0.mix(&e1, gamma).unwrap();
            let f = r.compose(&mixed).unwrap().fidelity().unwrap();
            assert!((f - ((1.0 - gamma) * f0 + gamma * f1)).abs() < 1e-12);
        }
    }

    #[test]
    fn enumerated_pauli_reduction_covers_every_coset_once() {
        // Reducing the uniform channel over all 64 plain-signed Paulis on
        // the bitflip code must spread mass uniformly: each of the 16 cosets
        // holds exactly 4 stabilizer-equivalent errors.
        let all = enumerate_paulis(3, 3);
        let w = 1.0 / all.len() as f64;
        let ch = PauliChannel::new(3, all.into_iter().map(|g| (g, w))).unwrap();
        let table = ch.reduce(&StabilizerCode::bitflip3()).unwrap();
        for p_idx in 0..4 {
            for q in 0..4 {
                assert!((table.entry(p_idx, q) - 1.0 / 16.0).abs() < 1e-15);
            }
        }
    }
}
