//! Stabilizer codes, syndrome computation, and the coset decomposition of
//! Pauli errors.
//!
//! An `[[n, k]]` code is described by `n - k` commuting independent
//! generators plus `k` pairs of logical operators. Construction derives a
//! destabilizer transversal (one anticommuting partner per generator),
//! canonical syndrome representatives `W_q`, canonical logical
//! representatives `A_p`, and the dense encoding isometry. Every Pauli then
//! factors uniquely as `i^r * A_p * W_q * s` with `s` a product of
//! generators; [`StabilizerCode::decompose`] recovers the four indices and
//! [`StabilizerCode::reconstruct`] inverts them exactly.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{max_abs, max_abs_diff, trace, C_ONE, C_ZERO};
use crate::pauli::{enumerate_paulis_weight_major, PauliError, PauliOperator};

/// Entrywise tolerance for matrix identities between exact-arithmetic
/// quantities (projectors, isometries, Pauli matrices).
pub const EXACT_MATRIX_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("generators {i} and {j} anticommute")]
    GeneratorsAnticommute { i: usize, j: usize },
    #[error("generators are dependent: rank {rank} < {expected}")]
    GeneratorsDependent { rank: usize, expected: usize },
    #[error("expected {expected} logical {kind} operators, got {got}")]
    LogicalCount {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("code must encode at least one logical qubit (n={n}, generators={m})")]
    NoLogicalSpace { n: usize, m: usize },
    #[error("operator {op} has {n} qubits, code has {expected}")]
    OperatorSize {
        op: String,
        n: usize,
        expected: usize,
    },
    #[error("logical operator {op} is not Hermitian (letter phase {phase})")]
    NonHermitianLogical { op: String, phase: u8 },
    #[error("{what} ({left} vs {right})")]
    LogicalCommutation {
        what: &'static str,
        left: String,
        right: String,
    },
    #[error("no destabilizer found for generator {index}")]
    NoDestabilizer { index: usize },
    #[error("syndrome index {q} out of range (code has {count} syndromes)")]
    SyndromeRange { q: usize, count: usize },
    #[error("logical index {p} out of range (code has {count} logical classes)")]
    LogicalRange { p: usize, count: usize },
    #[error("encoder validation failed: {0}")]
    EncoderInvalid(String),
    #[error("cannot parse code definition: {0}")]
    Parse(String),
    #[error("unknown built-in code {0:?}")]
    UnknownName(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Unique factorization of a Pauli relative to a code:
/// `op = i^r * A_p * W_q * prod_i g_i^{s_i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetIndex {
    /// Phase exponent r in 0..4.
    pub r: u8,
    /// Logical class index in `0..4^k`.
    pub p: usize,
    /// Syndrome index in `0..2^(n-k)`.
    pub q: usize,
    /// Generator exponents, bit i for generator i.
    pub s_mask: u64,
}

impl CosetIndex {
    pub fn s_bit(&self, i: usize) -> bool {
        self.s_mask >> i & 1 == 1
    }
}

/// A validated stabilizer code with its canonical coset representatives
/// and dense encoder.
#[derive(Debug, Clone)]
pub struct StabilizerCode {
    n: usize,
    k: usize,
    generators: Vec<PauliOperator>,
    logical_x: Vec<PauliOperator>,
    logical_z: Vec<PauliOperator>,
    destabilizers: Vec<PauliOperator>,
    /// `W_q` for every syndrome, index 0 is the identity.
    syndrome_reps: Vec<PauliOperator>,
    /// `A_p` for every logical class; bit 2j of p is the X_j exponent,
    /// bit 2j+1 the Z_j exponent.
    logical_reps: Vec<PauliOperator>,
    /// 2^n x 2^k isometry onto the code space.
    encoder: DMatrix<Complex64>,
}

impl StabilizerCode {
    /// Builds and validates a code from generators and logical operators.
    pub fn new(
        generators: Vec<PauliOperator>,
        logical_x: Vec<PauliOperator>,
        logical_z: Vec<PauliOperator>,
    ) -> Result<Self, CodeError> {
        let m = generators.len();
        assert!(m > 0, "need at least one generator");
        let n = generators[0].num_qubits();
        if n <= m {
            return Err(CodeError::NoLogicalSpace { n, m });
        }
        let k = n - m;
        if logical_x.len() != k {
            return Err(CodeError::LogicalCount {
                kind: "X",
                expected: k,
                got: logical_x.len(),
            });
        }
        if logical_z.len() != k {
            return Err(CodeError::LogicalCount {
                kind: "Z",
                expected: k,
                got: logical_z.len(),
            });
        }
        for op in generators.iter().chain(&logical_x).chain(&logical_z) {
            if op.num_qubits() != n {
                return Err(CodeError::OperatorSize {
                    op: op.to_string(),
                    n: op.num_qubits(),
                    expected: n,
                });
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for (j, b) in generators.iter().enumerate().skip(i + 1) {
                if !a.commutes(b)? {
                    return Err(CodeError::GeneratorsAnticommute { i, j });
                }
            }
        }
        let rank = symplectic_rank(&generators);
        if rank != m {
            return Err(CodeError::GeneratorsDependent { rank, expected: m });
        }
        validate_logicals(&generators, &logical_x, &logical_z)?;

        let destabilizers = find_destabilizers(n, &generators, &logical_x, &logical_z)?;
        let syndrome_reps = build_syndrome_reps(n, &destabilizers)?;
        let logical_reps = build_logical_reps(n, &logical_x, &logical_z)?;
        let encoder = build_encoder(n, k, &generators, &logical_x, &logical_z)?;

        Ok(StabilizerCode {
            n,
            k,
            generators,
            logical_x,
            logical_z,
            destabilizers,
            syndrome_reps,
            logical_reps,
            encoder,
        })
    }

    /// The five-qubit code in the generator form of DiVincenzo and Shor.
    pub fn divincenzo5() -> Self {
        Self::from_strings(
            &["ZXXZI", "IZXXZ", "ZIZXX", "XZIZX"],
            &["XXXXX"],
            &["ZZZZZ"],
        )
        .expect("built-in code is valid")
    }

    /// The five-qubit code of Laflamme, Miquel, Paz and Zurek.
    pub fn laflamme5() -> Self {
        Self::from_strings(
            &["XIXZX", "ZXZIX", "XYZYI", "XXIXZ"],
            &["XXYYX"],
            &["IXIZX"],
        )
        .expect("built-in code is valid")
    }

    /// The three-qubit repetition code protecting against bit flips.
    pub fn bitflip3() -> Self {
        Self::from_strings(&["ZZI", "IZZ"], &["XXX"], &["ZZZ"]).expect("built-in code is valid")
    }

    /// Looks up a built-in code by name: `divincenzo5`, `laflamme5`, `bitflip3`.
    pub fn from_named(name: &str) -> Result<Self, CodeError> {
        match name {
            "divincenzo5" => Ok(Self::divincenzo5()),
            "laflamme5" => Ok(Self::laflamme5()),
            "bitflip3" => Ok(Self::bitflip3()),
            other => Err(CodeError::UnknownName(other.to_string())),
        }
    }

    fn from_strings(
        generators: &[&str],
        logical_x: &[&str],
        logical_z: &[&str],
    ) -> Result<Self, CodeError> {
        let parse = |v: &[&str]| -> Result<Vec<PauliOperator>, PauliError> {
            v.iter().map(|s| s.parse()).collect()
        };
        Self::new(parse(generators)?, parse(logical_x)?, parse(logical_z)?)
    }

    /// Parses a plain-text code definition with `generators:`, `logical_x:`
    /// and `logical_z:` sections, one Pauli string per line. `#` starts a
    /// comment.
    pub fn from_definition_str(text: &str) -> Result<Self, CodeError> {
        let mut sections: [Vec<PauliOperator>; 3] = [vec![], vec![], vec![]];
        let mut current: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "generators:" => current = Some(0),
                "logical_x:" => current = Some(1),
                "logical_z:" => current = Some(2),
                op => match current {
                    Some(idx) => sections[idx].push(op.parse()?),
                    None => {
                        return Err(CodeError::Parse(format!(
                            "line {}: operator before any section header",
                            lineno + 1
                        )))
                    }
                },
            }
        }
        let [generators, logical_x, logical_z] = sections;
        if generators.is_empty() {
            return Err(CodeError::Parse("no generators section".to_string()));
        }
        Self::new(generators, logical_x, logical_z)
    }

    /// Resolves a built-in name, falling back to a definition file path.
    pub fn load(name_or_path: &str) -> Result<Self, CodeError> {
        match Self::from_named(name_or_path) {
            Err(CodeError::UnknownName(_)) if Path::new(name_or_path).exists() => {
                let text = std::fs::read_to_string(name_or_path)?;
                Self::from_definition_str(&text)
            }
            other => other,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_logical_qubits(&self) -> usize {
        self.k
    }

    /// `2^(n-k)`.
    pub fn num_syndromes(&self) -> usize {
        1 << (self.n - self.k)
    }

    /// `4^k`.
    pub fn num_logical_classes(&self) -> usize {
        1 << (2 * self.k)
    }

    pub fn generators(&self) -> &[PauliOperator] {
        &self.generators
    }

    pub fn logical_x(&self) -> &[PauliOperator] {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &[PauliOperator] {
        &self.logical_z
    }

    pub fn destabilizers(&self) -> &[PauliOperator] {
        &self.destabilizers
    }

    /// The canonical syndrome representative `W_q`.
    pub fn syndrome_rep(&self, q: usize) -> Result<&PauliOperator, CodeError> {
        self.syndrome_reps.get(q).ok_or(CodeError::SyndromeRange {
            q,
            count: self.num_syndromes(),
        })
    }

    /// The canonical logical representative `A_p`.
    pub fn logical_rep(&self, p: usize) -> Result<&PauliOperator, CodeError> {
        self.logical_reps.get(p).ok_or(CodeError::LogicalRange {
            p,
            count: self.num_logical_classes(),
        })
    }

    /// The `2^n x 2^k` encoding isometry.
    pub fn encoder(&self) -> &DMatrix<Complex64> {
        &self.encoder
    }

    /// The projector onto the code space, built from the generators
    /// (independently of the encoder).
    pub fn projector(&self) -> DMatrix<Complex64> {
        let dim = 1 << self.n;
        let mut p = DMatrix::identity(dim, dim);
        let half = Complex64::new(0.5, 0.0);
        for g in &self.generators {
            let gm = g.to_matrix().expect("n within cap");
            p = (&p + &gm * &p) * half;
        }
        p
    }

    /// Syndrome of `op`: bit i is set iff `op` anticommutes with generator i.
    pub fn syndrome(&self, op: &PauliOperator) -> Result<usize, CodeError> {
        if op.num_qubits() != self.n {
            return Err(CodeError::OperatorSize {
                op: op.to_string(),
                n: op.num_qubits(),
                expected: self.n,
            });
        }
        let mut q = 0usize;
        for (i, g) in self.generators.iter().enumerate() {
            q |= usize::from(op.symplectic(g)?) << i;
        }
        Ok(q)
    }

    /// Factors `op` as `i^r * A_p * W_q * prod g_i^{s_i}`; all indices are
    /// uniquely determined by `op`.
    pub fn decompose(&self, op: &PauliOperator) -> Result<CosetIndex, CodeError> {
        let q = self.syndrome(op)?;
        let m = op.mul(&self.syndrome_reps[q].inverse())?;
        let mut p = 0usize;
        for j in 0..self.k {
            let x_exp = m.symplectic(&self.logical_z[j])?;
            let z_exp = m.symplectic(&self.logical_x[j])?;
            p |= usize::from(x_exp) << (2 * j);
            p |= usize::from(z_exp) << (2 * j + 1);
        }
        let rem = self.logical_reps[p].inverse().mul(&m)?;
        let mut s_mask = 0u64;
        for (i, t) in self.destabilizers.iter().enumerate() {
            s_mask |= u64::from(rem.symplectic(t)?) << i;
        }
        let mut idx = CosetIndex { r: 0, p, q, s_mask };
        let rebuilt = self.reconstruct(&idx)?;
        debug_assert!(rebuilt.same_bits(op), "coset factorization lost bits");
        idx.r = (op.xz_phase() + 4 - rebuilt.xz_phase()) % 4;
        Ok(idx)
    }

    /// Rebuilds the Pauli operator described by a [`CosetIndex`].
    pub fn reconstruct(&self, idx: &CosetIndex) -> Result<PauliOperator, CodeError> {
        let mut op = self
            .logical_rep(idx.p)?
            .mul(self.syndrome_rep(idx.q)?)
            .map_err(CodeError::from)?;
        for (i, g) in self.generators.iter().enumerate() {
            if idx.s_bit(i) {
                op = op.mul(g)?;
            }
        }
        Ok(op.mul_phase(idx.r))
    }

    /// Checks the perfect-correctability condition
    /// `P E_i^dag E_j P = c_i delta_ij P` for a set of dense error operators.
    pub fn knill_laflamme_check(
        &self,
        kraus_ops: &[DMatrix<Complex64>],
        tol: f64,
    ) -> Result<KnillLaflammeReport, CodeError> {
        let dim = 1 << self.n;
        for (i, e) in kraus_ops.iter().enumerate() {
            if e.shape() != (dim, dim) {
                return Err(CodeError::EncoderInvalid(format!(
                    "error operator {i} has shape {:?}, expected {dim}x{dim}",
                    e.shape()
                )));
            }
        }
        let p = self.projector();
        let code_dim = Complex64::new((1 << self.k) as f64, 0.0);
        let mut scalars = vec![C_ZERO; kraus_ops.len()];
        let mut worst = 0.0f64;
        let mut worst_pair = (0, 0);
        for (i, ei) in kraus_ops.iter().enumerate() {
            let left = &p * ei.adjoint();
            for (j, ej) in kraus_ops.iter().enumerate() {
                let m = &left * ej * &p;
                let residual = if i == j {
                    let c = trace(&m) / code_dim;
                    scalars[i] = c;
                    max_abs(&(&m - &p * c))
                } else {
                    max_abs(&m)
                };
                if residual > worst {
                    worst = residual;
                    worst_pair = (i, j);
                }
            }
        }
        Ok(KnillLaflammeReport {
            satisfied: worst <= tol,
            worst_pair,
            worst_residual: worst,
            scalars,
        })
    }
}

/// Outcome of a Knill-Laflamme condition check, with the worst violator
/// as a witness.
#[derive(Debug, Clone)]
pub struct KnillLaflammeReport {
    pub satisfied: bool,
    pub worst_pair: (usize, usize),
    pub worst_residual: f64,
    /// Diagonal scalars `c_i = Tr(P E_i^dag E_i P) / 2^k`.
    pub scalars: Vec<Complex64>,
}

impl fmt::Display for KnillLaflammeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "KL {}: worst pair ({}, {}) residual {:.3e}",
            if self.satisfied { "holds" } else { "violated" },
            self.worst_pair.0,
            self.worst_pair.1,
            self.worst_residual
        )
    }
}

/// Rank of the operators' symplectic bit rows over GF(2).
fn symplectic_rank(ops: &[PauliOperator]) -> usize {
    let n = ops[0].num_qubits();
    let mut rows: Vec<Vec<bool>> = ops
        .iter()
        .map(|g| {
            (0..n)
                .map(|j| g.x_bit(j))
                .chain((0..n).map(|j| g.z_bit(j)))
                .collect()
        })
        .collect();
    let cols = 2 * n;
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col]) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[col] {
                for c in 0..cols {
                    row[c] ^= pivot_row[c];
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

fn validate_logicals(
    generators: &[PauliOperator],
    logical_x: &[PauliOperator],
    logical_z: &[PauliOperator],
) -> Result<(), CodeError> {
    for op in logical_x.iter().chain(logical_z) {
        if op.letter_phase() % 2 != 0 {
            return Err(CodeError::NonHermitianLogical {
                op: op.to_string(),
                phase: op.letter_phase(),
            });
        }
        for g in generators {
            if !op.commutes(g)? {
                return Err(CodeError::LogicalCommutation {
                    what: "logical operator anticommutes with a generator",
                    left: op.to_string(),
                    right: g.to_string(),
                });
            }
        }
    }
    let k = logical_x.len();
    for i in 0..k {
        for j in 0..k {
            let want_anti = i == j;
            if logical_x[i].commutes(&logical_z[j])? == want_anti {
                return Err(CodeError::LogicalCommutation {
                    what: "logical X/Z pairing broken",
                    left: logical_x[i].to_string(),
                    right: logical_z[j].to_string(),
                });
            }
            if i < j {
                if !logical_x[i].commutes(&logical_x[j])? {
                    return Err(CodeError::LogicalCommutation {
                        what: "logical X operators anticommute",
                        left: logical_x[i].to_string(),
                        right: logical_x[j].to_string(),
                    });
                }
                if !logical_z[i].commutes(&logical_z[j])? {
                    return Err(CodeError::LogicalCommutation {
                        what: "logical Z operators anticommute",
                        left: logical_z[i].to_string(),
                        right: logical_z[j].to_string(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Finds the canonical destabilizer for each generator: the first Pauli in
/// weight-then-lexicographic order that anticommutes with generator i and
/// commutes with every other generator and all logicals.
fn find_destabilizers(
    n: usize,
    generators: &[PauliOperator],
    logical_x: &[PauliOperator],
    logical_z: &[PauliOperator],
) -> Result<Vec<PauliOperator>, CodeError> {
    let candidates = enumerate_paulis_weight_major(n, n);
    let mut out = Vec::with_capacity(generators.len());
    'gens: for i in 0..generators.len() {
        for cand in &candidates {
            let mut ok = true;
            for (j, g) in generators.iter().enumerate() {
                if cand.symplectic(g)? != u8::from(i == j) {
                    ok = false;
                    break;
                }
            }
            if ok {
                for l in logical_x.iter().chain(logical_z) {
                    if cand.symplectic(l)? != 0 {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                out.push(cand.clone());
                continue 'gens;
            }
        }
        return Err(CodeError::NoDestabilizer { index: i });
    }
    Ok(out)
}

fn build_syndrome_reps(
    n: usize,
    destabilizers: &[PauliOperator],
) -> Result<Vec<PauliOperator>, CodeError> {
    let count = 1usize << destabilizers.len();
    let mut reps = Vec::with_capacity(count);
    for q in 0..count {
        let mut w = PauliOperator::identity(n);
        for (i, t) in destabilizers.iter().enumerate() {
            if q >> i & 1 == 1 {
                w = w.mul(t)?;
            }
        }
        reps.push(w);
    }
    Ok(reps)
}

fn build_logical_reps(
    n: usize,
    logical_x: &[PauliOperator],
    logical_z: &[PauliOperator],
) -> Result<Vec<PauliOperator>, CodeError> {
    let k = logical_x.len();
    let count = 1usize << (2 * k);
    let mut reps = Vec::with_capacity(count);
    for p in 0..count {
        let mut a = PauliOperator::identity(n);
        for j in 0..k {
            if p >> (2 * j) & 1 == 1 {
                a = a.mul(&logical_x[j])?;
            }
            if p >> (2 * j + 1) & 1 == 1 {
                a = a.mul(&logical_z[j])?;
            }
        }
        reps.push(a);
    }
    Ok(reps)
}

/// Deterministic encoder construction: project the first non-annihilated
/// computational basis state onto the code space and onto the +1 eigenspace
/// of every logical Z, then generate the remaining columns with logical X
/// products. Columns are exact logical computational basis states, so the
/// logical representatives act on them as literal Pauli matrices.
fn build_encoder(
    n: usize,
    k: usize,
    generators: &[PauliOperator],
    logical_x: &[PauliOperator],
    logical_z: &[PauliOperator],
) -> Result<DMatrix<Complex64>, CodeError> {
    let dim = 1usize << n;
    let half = Complex64::new(0.5, 0.0);
    let mut zero_state = None;
    for basis in 0..dim {
        let mut v = DVector::from_element(dim, C_ZERO);
        v[basis] = C_ONE;
        for op in generators.iter().chain(logical_z) {
            let gv = op.apply_to_vector(&v)?;
            v = (v + gv) * half;
        }
        let norm = v.norm();
        // Amplitudes of stabilizer projections are dyadic; anything above
        // this threshold is a genuine survivor.
        if norm > 1e-9 {
            zero_state = Some(v / Complex64::new(norm, 0.0));
            break;
        }
    }
    let zero_state = zero_state.ok_or_else(|| {
        CodeError::EncoderInvalid("all basis states annihilated by the projector".to_string())
    })?;

    let cols = 1usize << k;
    let mut encoder = DMatrix::from_element(dim, cols, C_ZERO);
    for c in 0..cols {
        let mut v = zero_state.clone();
        for (j, lx) in logical_x.iter().enumerate() {
            // Logical qubit 0 is the most significant bit of the column index.
            if c >> (k - 1 - j) & 1 == 1 {
                v = lx.apply_to_vector(&v)?;
            }
        }
        encoder.set_column(c, &v);
    }

    let gram = encoder.adjoint() * &encoder;
    let eye = DMatrix::identity(cols, cols);
    let residual = max_abs_diff(&gram, &eye);
    if residual > EXACT_MATRIX_TOL {
        return Err(CodeError::EncoderInvalid(format!(
            "columns not orthonormal, residual {residual:.3e}"
        )));
    }
    Ok(encoder)
}
