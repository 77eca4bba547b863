//! Exact symbolic algebra of the n-qubit Pauli group in the symplectic
//! binary representation.
//!
//! An operator is stored as two bit vectors (X components, Z components)
//! plus a power of `i`. The base product for bits `(x, z)` is
//! `X^x Z^z` per qubit, X applied before Z, so the single-qubit `Y` is
//! `i * X * Z`. Phases are tracked exactly mod 4; products, commutation
//! tests and inverses never leave the symbolic representation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{i_pow, kron, C_ONE, C_ZERO};

/// Largest qubit count for which dense matrices are materialized by default.
pub const DEFAULT_MATRIX_CAP: usize = 12;

const WORD_BITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dense matrix for {n} qubits exceeds the cap of {cap}")]
    MatrixCapExceeded { n: usize, cap: usize },
    #[error("cannot parse Pauli string {0:?}: {1}")]
    Parse(String, String),
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }
}

/// An element of the n-qubit Pauli group, phases included.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    /// Exponent r in `self = i^r * prod_j X^{x_j} Z^{z_j}`, always in 0..4.
    phase: u8,
}

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

fn parity_of_and(a: &[u64], b: &[u64]) -> u8 {
    let mut acc = 0u32;
    for (x, y) in a.iter().zip(b.iter()) {
        acc ^= (x & y).count_ones();
    }
    (acc & 1) as u8
}

impl PauliOperator {
    /// The identity on `n` qubits.
    pub fn identity(n: usize) -> Self {
        PauliOperator {
            n,
            x: vec![0; words_for(n)],
            z: vec![0; words_for(n)],
            phase: 0,
        }
    }

    /// A single-qubit letter placed at `qubit` (0-based, leftmost letter first).
    pub fn single(n: usize, qubit: usize, letter: Letter) -> Self {
        assert!(qubit < n, "qubit index {qubit} out of range for n={n}");
        let mut op = Self::identity(n);
        op.set_letter(qubit, letter);
        op
    }

    /// Builds an operator from letters, with letter-string phase 0 (a plain
    /// `+1` sign in front of the letters).
    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut op = Self::identity(letters.len());
        for (j, &l) in letters.iter().enumerate() {
            op.set_letter(j, l);
        }
        op
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn word_bit(&self, qubit: usize) -> (usize, u64) {
        (qubit / WORD_BITS, 1u64 << (qubit % WORD_BITS))
    }

    pub fn x_bit(&self, qubit: usize) -> bool {
        let (w, m) = self.word_bit(qubit);
        self.x[w] & m != 0
    }

    pub fn z_bit(&self, qubit: usize) -> bool {
        let (w, m) = self.word_bit(qubit);
        self.z[w] & m != 0
    }

    /// The letter at `qubit`, ignoring the global phase.
    pub fn letter(&self, qubit: usize) -> Letter {
        Letter::from_bits(self.x_bit(qubit), self.z_bit(qubit))
    }

    /// Replaces the letter at `qubit`, keeping the letter-string phase fixed
    /// (so setting `Y` adjusts the internal X-Z phase bookkeeping).
    pub fn set_letter(&mut self, qubit: usize, letter: Letter) {
        let before = u8::from(self.x_bit(qubit) && self.z_bit(qubit));
        let (xb, zb) = letter.bits();
        let (w, m) = self.word_bit(qubit);
        if xb {
            self.x[w] |= m;
        } else {
            self.x[w] &= !m;
        }
        if zb {
            self.z[w] |= m;
        } else {
            self.z[w] &= !m;
        }
        let after = u8::from(xb && zb);
        self.phase = (self.phase + 4 + after - before) % 4;
    }

    /// Exponent r with `self = i^r * prod_j X^{x_j} Z^{z_j}`.
    pub fn xz_phase(&self) -> u8 {
        self.phase
    }

    /// Exponent s with `self = i^s * (tensor of letters I/X/Y/Z)`.
    pub fn letter_phase(&self) -> u8 {
        let y_count = parity_count_y(self);
        (self.phase + 4 - (y_count % 4)) % 4
    }

    /// True when the operator is `+1` times a plain letter string.
    pub fn has_plain_sign(&self) -> bool {
        self.letter_phase() == 0
    }

    /// Multiplies the operator by `i^k`.
    pub fn mul_phase(mut self, k: u8) -> Self {
        self.phase = (self.phase + k) % 4;
        self
    }

    /// Drops the global phase, leaving the `+1`-signed letter string.
    pub fn with_plain_sign(mut self) -> Self {
        let shift = self.letter_phase();
        self.phase = (self.phase + 4 - shift) % 4;
        self
    }

    /// Number of qubits on which the operator acts non-trivially.
    pub fn weight(&self) -> usize {
        let mut count = 0;
        for (xw, zw) in self.x.iter().zip(self.z.iter()) {
            count += (xw | zw).count_ones() as usize;
        }
        count
    }

    fn check_dims(&self, other: &Self) -> Result<(), PauliError> {
        if self.n != other.n {
            return Err(PauliError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Group product. The matrix of the result equals the product of the
    /// factors' matrices exactly: moving the right factor's X block through
    /// the left factor's Z block costs `(-1)^(z_a . x_b)`.
    pub fn mul(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_dims(other)?;
        let sign = parity_of_and(&self.z, &other.x);
        let x = self
            .x
            .iter()
            .zip(other.x.iter())
            .map(|(a, b)| a ^ b)
            .collect();
        let z = self
            .z
            .iter()
            .zip(other.z.iter())
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(PauliOperator {
            n: self.n,
            x,
            z,
            phase: (self.phase + other.phase + 2 * sign) % 4,
        })
    }

    /// The inverse element, equal to the adjoint since Paulis are unitary.
    pub fn inverse(&self) -> Self {
        // (i^r B)^-1 = i^{-r} B^{-1} and B^2 = (-1)^{|x & z|} I.
        let overlap = parity_of_and(&self.x, &self.z);
        PauliOperator {
            n: self.n,
            x: self.x.clone(),
            z: self.z.clone(),
            phase: (4 - self.phase + 2 * overlap) % 4,
        }
    }

    /// Tensor product: `self` acts on the first qubits, `other` on the rest.
    /// Phases multiply.
    pub fn tensor(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let mut letters = Vec::with_capacity(n);
        letters.extend(self.letters());
        letters.extend(other.letters());
        let mut op = PauliOperator::from_letters(&letters);
        op.phase = (op.phase + self.letter_phase() + other.letter_phase()) % 4;
        op
    }

    /// Symplectic form parity: 0 when the operators commute, 1 otherwise.
    pub fn symplectic(&self, other: &Self) -> Result<u8, PauliError> {
        self.check_dims(other)?;
        Ok(parity_of_and(&self.x, &other.z) ^ parity_of_and(&self.z, &other.x))
    }

    /// True iff `self * other == other * self`.
    pub fn commutes(&self, other: &Self) -> Result<bool, PauliError> {
        Ok(self.symplectic(other)? == 0)
    }

    /// True when the operators share X and Z bits, irrespective of phase.
    pub fn same_bits(&self, other: &Self) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    /// Dense matrix under the default qubit cap.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>, PauliError> {
        self.to_matrix_capped(DEFAULT_MATRIX_CAP)
    }

    /// Dense matrix: Kronecker product of the per-qubit factors times `i^phase`,
    /// with qubit 0 as the most significant tensor factor.
    pub fn to_matrix_capped(&self, cap: usize) -> Result<DMatrix<Complex64>, PauliError> {
        if self.n > cap {
            return Err(PauliError::MatrixCapExceeded { n: self.n, cap });
        }
        let mut m = DMatrix::from_element(1, 1, i_pow(self.phase));
        for qubit in 0..self.n {
            let f = xz_factor(self.x_bit(qubit), self.z_bit(qubit));
            m = kron(&m, &f);
        }
        Ok(m)
    }

    fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.n).map(|q| self.letter(q))
    }

    /// Applies the operator to a state vector of length `2^n` without
    /// materializing the matrix. Qubit 0 is the most significant index bit.
    pub fn apply_to_vector(
        &self,
        v: &nalgebra::DVector<Complex64>,
    ) -> Result<nalgebra::DVector<Complex64>, PauliError> {
        if self.n >= usize::BITS as usize {
            return Err(PauliError::MatrixCapExceeded {
                n: self.n,
                cap: usize::BITS as usize - 1,
            });
        }
        let dim = 1usize << self.n;
        if v.len() != dim {
            return Err(PauliError::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
        // Index-bit masks: qubit j sits at index bit n-1-j.
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        for qubit in 0..self.n {
            let bit = 1usize << (self.n - 1 - qubit);
            if self.x_bit(qubit) {
                x_mask |= bit;
            }
            if self.z_bit(qubit) {
                z_mask |= bit;
            }
        }
        let global = i_pow(self.phase);
        let mut out = nalgebra::DVector::from_element(dim, C_ZERO);
        for b in 0..dim {
            let amp = v[b];
            if amp == C_ZERO {
                continue;
            }
            // X^x Z^z |b> = (-1)^(z.b) |b xor x>
            let sign = if ((z_mask & b).count_ones() & 1) == 1 {
                -C_ONE
            } else {
                C_ONE
            };
            out[b ^ x_mask] += global * sign * amp;
        }
        Ok(out)
    }
}

fn parity_count_y(op: &PauliOperator) -> u8 {
    let mut count = 0u32;
    for (xw, zw) in op.x.iter().zip(op.z.iter()) {
        count += (xw & zw).count_ones();
    }
    (count % 4) as u8
}

/// Per-qubit matrix of `X^x Z^z` (phase excluded).
fn xz_factor(x: bool, z: bool) -> DMatrix<Complex64> {
    let e = |r: f64| Complex64::new(r, 0.0);
    match (x, z) {
        (false, false) => DMatrix::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, C_ONE]),
        (true, false) => DMatrix::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]),
        (false, true) => DMatrix::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, e(-1.0)]),
        // X then Z: XZ = [[0, -1], [1, 0]]
        (true, true) => DMatrix::from_row_slice(2, 2, &[C_ZERO, e(-1.0), C_ONE, C_ZERO]),
    }
}

impl Ord for PauliOperator {
    /// Lexicographic over letters (I < X < Y < Z, qubit 0 first), then phase.
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.letters().cmp(other.letters()))
            .then_with(|| self.phase.cmp(&other.phase))
    }
}

impl PartialOrd for PauliOperator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.letter_phase() {
            0 => {}
            1 => write!(f, "+i")?,
            2 => write!(f, "-")?,
            _ => write!(f, "-i")?,
        }
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliOperator {
    type Err = PauliError;

    /// Parses an optional leading phase token (`+`, `-`, `+i`, `-i`, `i`)
    /// followed by one letter per qubit, e.g. `-iZXXZI`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |msg: &str| PauliError::Parse(s.to_string(), msg.to_string());
        let trimmed = s.trim();
        let (token_phase, rest) = if let Some(r) = trimmed.strip_prefix("+i") {
            (1, r)
        } else if let Some(r) = trimmed.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = trimmed.strip_prefix('i') {
            (1, r)
        } else if let Some(r) = trimmed.strip_prefix('+') {
            (0, r)
        } else if let Some(r) = trimmed.strip_prefix('-') {
            (2, r)
        } else {
            (0, trimmed)
        };
        if rest.is_empty() {
            return Err(err("no Pauli letters"));
        }
        let mut letters = Vec::with_capacity(rest.len());
        for c in rest.chars() {
            letters.push(Letter::from_char(c).ok_or_else(|| err("letters must be I, X, Y or Z"))?);
        }
        Ok(PauliOperator::from_letters(&letters).mul_phase(token_phase))
    }
}

/// All `+1`-signed Paulis on `n` qubits with weight at most `max_weight`,
/// in lexicographic letter order (I < X < Y < Z), without duplicates.
pub fn enumerate_paulis(n: usize, max_weight: usize) -> Vec<PauliOperator> {
    let mut out = Vec::new();
    let mut letters = vec![Letter::I; n];
    enumerate_rec(&mut letters, 0, 0, max_weight, &mut out);
    out
}

fn enumerate_rec(
    letters: &mut Vec<Letter>,
    pos: usize,
    used: usize,
    max_weight: usize,
    out: &mut Vec<PauliOperator>,
) {
    if pos == letters.len() {
        out.push(PauliOperator::from_letters(letters));
        return;
    }
    for l in [Letter::I, Letter::X, Letter::Y, Letter::Z] {
        let w = used + usize::from(l != Letter::I);
        if w > max_weight {
            continue;
        }
        letters[pos] = l;
        enumerate_rec(letters, pos + 1, w, max_weight, out);
    }
    letters[pos] = Letter::I;
}

/// Same set as [`enumerate_paulis`] but ordered by weight first, then
/// lexicographically within each weight. This is the canonical search order
/// for destabilizer construction.
pub fn enumerate_paulis_weight_major(n: usize, max_weight: usize) -> Vec<PauliOperator> {
    let mut all = enumerate_paulis(n, max_weight);
    all.sort_by(|a, b| a.weight().cmp(&b.weight()).then_with(|| a.cmp(b)));
    all
}
