//! Numerically optimal recovery for arbitrary channels via semidefinite
//! optimization over the recovery's Choi matrix.
//!
//! For a fixed encoding and channel, the composite channel fidelity is
//! linear in the recovery's Choi matrix `X`: `F = Tr(X C)` with the
//! observable `C` built once from the channel and encoder. Maximizing over
//! all recoveries is then a semidefinite program,
//!
//! ```text
//!   maximize   Tr(X C)
//!   subject to X >= 0,  Tr_out X = I,
//! ```
//!
//! solved here with an alternating-projection ADMM splitting: the linear
//! objective folds into the proximal step on the trace-preserving affine
//! set, and the PSD cone is handled by spectral clipping. Choi matrices
//! use the output-major index convention: the flat index of `(a, i)` is
//! `a * dim_in + i` with `a` the output index.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{ChannelError, KrausChannel};
use crate::linalg::{
    frobenius_norm, hermitian_eigen, hermitian_part, identity, max_abs_diff, unvec_row_major,
    vec_row_major, C_ZERO,
};
use crate::stabilizer::{CodeError, StabilizerCode};

/// Eigenvalue floor tolerance for a valid Choi matrix.
pub const CHOI_PSD_TOL: f64 = 1e-8;
/// Partial-trace residual tolerance for a valid Choi matrix.
pub const CHOI_TP_TOL: f64 = 1e-8;
/// Eigenvalues below this are dropped when extracting Kraus operators.
pub const KRAUS_EIGENVALUE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("objective matrix is not Hermitian: residual {residual:.3e}")]
    NonHermitian { residual: f64 },
    #[error("matrix has shape {got:?}, expected {expected:?}")]
    Shape {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("channel must act on the code's physical space ({expected}), got {got}")]
    ChannelDim { got: usize, expected: usize },
    #[error("Choi matrix invalid: {0}")]
    InvalidChoi(String),
    #[error("solver did not converge at gamma = {gamma}: primal {primal:.3e}, dual {dual:.3e} after {iterations} iterations")]
    NotConverged {
        gamma: f64,
        iterations: usize,
        primal: f64,
        dual: f64,
    },
    #[error("warm start has dimension {got}, expected {expected}")]
    WarmStartDim { got: usize, expected: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// The Choi matrix of a channel from a `dim_in`- to a `dim_out`-dimensional
/// system, output index major.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    dim_out: usize,
    dim_in: usize,
    m: DMatrix<Complex64>,
}

impl ChoiMatrix {
    /// Wraps a matrix after checking Hermiticity, the eigenvalue floor and
    /// the partial-trace constraint.
    pub fn new(dim_out: usize, dim_in: usize, m: DMatrix<Complex64>) -> Result<Self, SdpError> {
        let choi = Self::new_unchecked(dim_out, dim_in, m)?;
        choi.validate(CHOI_PSD_TOL, CHOI_TP_TOL)?;
        Ok(choi)
    }

    /// Wraps a matrix checking only the shape.
    pub fn new_unchecked(
        dim_out: usize,
        dim_in: usize,
        m: DMatrix<Complex64>,
    ) -> Result<Self, SdpError> {
        let d = dim_out * dim_in;
        if m.shape() != (d, d) {
            return Err(SdpError::Shape {
                got: m.shape(),
                expected: (d, d),
            });
        }
        Ok(ChoiMatrix { dim_out, dim_in, m })
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    /// `Tr_out X`: traces out the output factor, leaving a `dim_in` square
    /// matrix. Equals the identity exactly for a trace-preserving map.
    pub fn partial_trace_out(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(self.dim_in, self.dim_in, C_ZERO);
        for a in 0..self.dim_out {
            let base = a * self.dim_in;
            for i in 0..self.dim_in {
                for j in 0..self.dim_in {
                    out[(i, j)] += self.m[(base + i, base + j)];
                }
            }
        }
        out
    }

    /// Checks the PSD eigenvalue floor and the partial-trace residual.
    pub fn validate(&self, psd_tol: f64, tp_tol: f64) -> Result<(), SdpError> {
        let herm_residual = max_abs_diff(&self.m, &self.m.adjoint());
        if herm_residual > 1e-9 {
            return Err(SdpError::InvalidChoi(format!(
                "not Hermitian, residual {herm_residual:.3e}"
            )));
        }
        let (vals, _) = hermitian_eigen(&self.m);
        let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -psd_tol {
            return Err(SdpError::InvalidChoi(format!(
                "eigenvalue {min_eig:.3e} below the floor"
            )));
        }
        let tp_residual = max_abs_diff(&self.partial_trace_out(), &identity(self.dim_in));
        if tp_residual > tp_tol {
            return Err(SdpError::InvalidChoi(format!(
                "partial trace off identity by {tp_residual:.3e}"
            )));
        }
        Ok(())
    }

    /// Hilbert-Schmidt distance to another Choi matrix.
    pub fn distance(&self, other: &ChoiMatrix) -> f64 {
        frobenius_norm(&(&self.m - &other.m))
    }
}

/// Builds the Choi matrix `sum_m vec(E_m) vec(E_m)^dag` of a channel,
/// with row-major (output-major) vectorization.
pub fn choi_from_kraus(ch: &KrausChannel) -> ChoiMatrix {
    let d = ch.dim_out() * ch.dim_in();
    let mut m = DMatrix::from_element(d, d, C_ZERO);
    for op in ch.ops() {
        let v = vec_row_major(op);
        m += &v * v.adjoint();
    }
    ChoiMatrix {
        dim_out: ch.dim_out(),
        dim_in: ch.dim_in(),
        m,
    }
}

/// Extracts a Kraus representation by spectral decomposition, dropping
/// eigenvalues below [`KRAUS_EIGENVALUE_CUTOFF`]. The result reproduces the
/// channel action up to the discarded mass; completeness is not re-checked.
pub fn kraus_from_choi(choi: &ChoiMatrix) -> Result<KrausChannel, SdpError> {
    let (vals, vecs) = hermitian_eigen(&choi.m);
    let mut ops = Vec::new();
    for (idx, &lambda) in vals.iter().enumerate() {
        if lambda < -CHOI_PSD_TOL {
            return Err(SdpError::InvalidChoi(format!(
                "eigenvalue {lambda:.3e} below the floor"
            )));
        }
        if lambda >= KRAUS_EIGENVALUE_CUTOFF {
            let col = vecs.column(idx).into_owned() * Complex64::new(lambda.sqrt(), 0.0);
            ops.push(unvec_row_major(&col, choi.dim_out, choi.dim_in));
        }
    }
    if ops.is_empty() {
        return Err(SdpError::InvalidChoi("no spectral mass above cutoff".into()));
    }
    Ok(KrausChannel::new_unchecked(ops)?)
}

/// The Hermitian PSD observable `C` with `F_ch(R . E . U_C) = Tr(X_R C)`
/// for every recovery `R` with Choi matrix `X_R`:
/// `C = (1/4^k) sum_l vec(U_C^dag E_l^dag) vec(U_C^dag E_l^dag)^dag`.
pub fn fidelity_observable(
    code: &StabilizerCode,
    ch: &KrausChannel,
) -> Result<DMatrix<Complex64>, SdpError> {
    let phys = 1usize << code.num_qubits();
    if ch.dim_in() != phys || ch.dim_out() != phys {
        return Err(SdpError::ChannelDim {
            got: ch.dim_in(),
            expected: phys,
        });
    }
    let logical = 1usize << code.num_logical_qubits();
    let d = logical * phys;
    let decoder = code.encoder().adjoint();
    let mut c = DMatrix::from_element(d, d, C_ZERO);
    for op in ch.ops() {
        let h = vec_row_major(&(&decoder * op.adjoint()));
        c += &h * h.adjoint();
    }
    let scale = 1.0 / ((logical * logical) as f64);
    Ok(hermitian_part(&(c * Complex64::new(scale, 0.0))))
}

/// Projects a Hermitian matrix onto the PSD cone by clipping negative
/// eigenvalues. Residually non-Hermitian input is symmetrized first.
pub fn project_psd(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (vals, vecs) = hermitian_eigen(m);
    let positive: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.0).collect();
    if positive.len() == vals.len() {
        return hermitian_part(m);
    }
    // Rebuild from the positive part only; near the optimum the matrix has
    // low numerical rank, which makes this much cheaper than a full
    // reconstruction.
    let sub = vecs.select_columns(&positive);
    let scaled = DMatrix::from_fn(sub.nrows(), positive.len(), |r, c| {
        sub[(r, c)] * Complex64::new(vals[positive[c]], 0.0)
    });
    scaled * sub.adjoint()
}

/// Orthogonal projection onto the affine set `{X : Tr_out X = I}`:
/// subtracts `(1/dim_out) I (x) (Tr_out X - I)`.
pub fn project_trace_preserving(
    m: &DMatrix<Complex64>,
    dim_out: usize,
    dim_in: usize,
) -> DMatrix<Complex64> {
    let mut defect = DMatrix::from_element(dim_in, dim_in, C_ZERO);
    for a in 0..dim_out {
        let base = a * dim_in;
        for i in 0..dim_in {
            for j in 0..dim_in {
                defect[(i, j)] += m[(base + i, base + j)];
            }
        }
    }
    for i in 0..dim_in {
        defect[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    defect *= Complex64::new(1.0 / dim_out as f64, 0.0);
    let mut out = m.clone();
    for a in 0..dim_out {
        let base = a * dim_in;
        for i in 0..dim_in {
            for j in 0..dim_in {
                out[(base + i, base + j)] -= defect[(i, j)];
            }
        }
    }
    out
}

/// Solver knobs. The defaults match the sizes this crate works with
/// (Choi matrices up to 64x64).
#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// ADMM penalty parameter.
    pub rho: f64,
    /// Residual tolerance on both the primal and dual residuals
    /// (Frobenius norms).
    pub tol: f64,
    pub max_iter: usize,
    /// Record diagnostics every this many iterations (0 = never).
    pub log_every: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            rho: 1.0,
            tol: 1e-8,
            max_iter: 50_000,
            log_every: 0,
        }
    }
}

/// One diagnostics row of the solver stream.
#[derive(Debug, Clone, Copy)]
pub struct IterationDiag {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Dual state of a finished solve, used to warm start the next one.
#[derive(Debug, Clone)]
pub struct SdpWarmStart {
    z: DMatrix<Complex64>,
    u: DMatrix<Complex64>,
}

/// Result of one semidefinite solve.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub choi: ChoiMatrix,
    pub fidelity: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Objectives of the accepted (best-so-far) iterates, non-decreasing.
    pub accepted_objectives: Vec<f64>,
    /// Sampled diagnostics when `log_every > 0`.
    pub diagnostics: Vec<IterationDiag>,
    warm: SdpWarmStart,
}

impl SdpSolution {
    /// State handed to the next solve along a continuation path.
    pub fn warm_start(&self) -> &SdpWarmStart {
        &self.warm
    }

    /// Diagnostics as CSV rows `iteration,objective,primal,dual`.
    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from("iteration,objective,primal_residual,dual_residual\n");
        for d in &self.diagnostics {
            out.push_str(&format!(
                "{},{},{},{}\n",
                d.iteration, d.objective, d.primal_residual, d.dual_residual
            ));
        }
        out
    }
}

/// Maximizes `Tr(X C)` over Choi matrices of trace-preserving completely
/// positive maps, via ADMM over the splitting `X in affine set`,
/// `Z in PSD cone`, `X = Z`:
///
/// ```text
///   X <- Proj_affine(Z - U + C / rho)
///   Z <- Proj_psd(X + U)
///   U <- U + X - Z
/// ```
///
/// The returned Choi matrix is the affine-feasible iterate `X`, whose PSD
/// defect is bounded by the primal residual. On hitting `max_iter` the
/// best-objective iterate is returned, flagged as non-converged.
pub fn solve_optimal_recovery(
    c: &DMatrix<Complex64>,
    dim_out: usize,
    dim_in: usize,
    opts: &SdpOptions,
    warm: Option<&SdpWarmStart>,
) -> Result<SdpSolution, SdpError> {
    let d = dim_out * dim_in;
    if c.shape() != (d, d) {
        return Err(SdpError::Shape {
            got: c.shape(),
            expected: (d, d),
        });
    }
    let herm_residual = max_abs_diff(c, &c.adjoint());
    if herm_residual > 1e-10 {
        return Err(SdpError::NonHermitian {
            residual: herm_residual,
        });
    }

    let c_over_rho = c * Complex64::new(1.0 / opts.rho, 0.0);
    let (mut z, mut u) = match warm {
        Some(w) => {
            if w.z.nrows() != d {
                return Err(SdpError::WarmStartDim {
                    got: w.z.nrows(),
                    expected: d,
                });
            }
            (w.z.clone(), w.u.clone())
        }
        None => (
            identity(d) * Complex64::new(1.0 / dim_out as f64, 0.0),
            DMatrix::from_element(d, d, C_ZERO),
        ),
    };

    let objective = |x: &DMatrix<Complex64>| -> f64 {
        // Tr(X C), real for Hermitian arguments.
        x.iter()
            .zip(c.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    };

    let mut best_objective = f64::NEG_INFINITY;
    let mut best_x: Option<DMatrix<Complex64>> = None;
    let mut accepted = Vec::new();
    let mut diagnostics = Vec::new();
    let mut x = DMatrix::from_element(d, d, C_ZERO);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    // Snapshot of the state feeding the final iterate. Re-solving with the
    // same objective from this snapshot reproduces the iterate bitwise,
    // which keeps warm-started continuation curves exactly flat wherever
    // the objective does not move.
    let mut warm_snapshot = (z.clone(), u.clone());

    for iter in 1..=opts.max_iter {
        iterations = iter;
        warm_snapshot = (z.clone(), u.clone());
        x = project_trace_preserving(&(&z - &u + &c_over_rho), dim_out, dim_in);
        let z_prev = z;
        z = project_psd(&(&x + &u));
        u += &x - &z;

        primal = frobenius_norm(&(&x - &z));
        dual = opts.rho * frobenius_norm(&(&z - z_prev));

        let obj = objective(&x);
        if obj > best_objective {
            best_objective = obj;
            accepted.push(obj);
            if !converged {
                best_x = Some(x.clone());
            }
        }
        if opts.log_every > 0 && iter % opts.log_every == 0 {
            diagnostics.push(IterationDiag {
                iteration: iter,
                objective: obj,
                primal_residual: primal,
                dual_residual: dual,
            });
        }
        if primal < opts.tol && dual < opts.tol {
            converged = true;
            break;
        }
    }

    let x_final = if converged {
        x
    } else {
        best_x.unwrap_or(x)
    };
    let fidelity = objective(&x_final);
    if opts.log_every > 0 {
        diagnostics.push(IterationDiag {
            iteration: iterations,
            objective: fidelity,
            primal_residual: primal,
            dual_residual: dual,
        });
    }
    Ok(SdpSolution {
        choi: ChoiMatrix {
            dim_out,
            dim_in,
            m: x_final,
        },
        fidelity,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        accepted_objectives: accepted,
        diagnostics,
        warm: SdpWarmStart {
            z: warm_snapshot.0,
            u: warm_snapshot.1,
        },
    })
}

/// One point of a mixing sweep.
#[derive(Debug)]
pub struct MixingSolve {
    pub gamma: f64,
    pub solution: SdpSolution,
}

/// Solves the optimal-recovery SDP along a mixing ray `mix(e0, ebar, g)`
/// for every grid point.
///
/// With `warm_start` the points run sequentially, each initialized from the
/// previous solution, which keeps the selected optimum on one continuous
/// branch (reproducible curves). Without it every point starts cold and the
/// grid is solved in parallel.
pub fn solve_mixing_sweep(
    code: &StabilizerCode,
    e0: &KrausChannel,
    ebar: &KrausChannel,
    grid: &[f64],
    opts: &SdpOptions,
    warm_start: bool,
) -> Result<Vec<MixingSolve>, SdpError> {
    let dim_out = 1usize << code.num_logical_qubits();
    let dim_in = 1usize << code.num_qubits();
    // The observable is affine in the mixing parameter, so the endpoint
    // observables suffice.
    let c0 = fidelity_observable(code, e0)?;
    let c1 = fidelity_observable(code, ebar)?;
    let c_at = |gamma: f64| -> DMatrix<Complex64> {
        &c0 * Complex64::new(1.0 - gamma, 0.0) + &c1 * Complex64::new(gamma, 0.0)
    };

    if warm_start {
        let mut out = Vec::with_capacity(grid.len());
        let mut warm: Option<SdpWarmStart> = None;
        for &gamma in grid {
            let solution = solve_optimal_recovery(&c_at(gamma), dim_out, dim_in, opts, warm.as_ref())?;
            warm = Some(solution.warm_start().clone());
            out.push(MixingSolve { gamma, solution });
        }
        Ok(out)
    } else {
        grid.par_iter()
            .map(|&gamma| {
                let solution = solve_optimal_recovery(&c_at(gamma), dim_out, dim_in, opts, None)?;
                Ok(MixingSolve { gamma, solution })
            })
            .collect()
    }
}

/// Forward-difference norms `||X*(g_{t+1}) - X*(g_t)|| / (g_{t+1} - g_t)`,
/// one value per grid point (the last repeats its predecessor).
pub fn derivative_norms(solves: &[MixingSolve]) -> Vec<(f64, f64)> {
    if solves.len() < 2 {
        return solves.iter().map(|s| (s.gamma, 0.0)).collect();
    }
    let mut out = Vec::with_capacity(solves.len());
    for w in solves.windows(2) {
        let h = w[1].gamma - w[0].gamma;
        let norm = w[1].solution.choi.distance(&w[0].solution.choi);
        out.push((w[0].gamma, norm / h));
    }
    let last = out.last().copied().expect("at least one window");
    out.push((solves[solves.len() - 1].gamma, last.1));
    out
}

/// Scales a derivative curve to its maximum. A curve that is zero
/// everywhere (constant channel family) stays zero.
pub fn normalize_curve(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let max = curve.iter().map(|&(_, v)| v).fold(0.0f64, f64::max);
    if max <= 0.0 {
        return curve.to_vec();
    }
    curve.iter().map(|&(g, v)| (g, v / max)).collect()
}

/// The normalized Choi-derivative diagnostic along a mixing ray: solves the
/// sweep with warm starts and differentiates. Fails on the first grid point
/// where the solver does not converge, reporting its `gamma`.
pub fn choi_derivative_curve(
    code: &StabilizerCode,
    e0: &KrausChannel,
    ebar: &KrausChannel,
    grid: &[f64],
    opts: &SdpOptions,
) -> Result<Vec<(f64, f64)>, SdpError> {
    let solves = solve_mixing_sweep(code, e0, ebar, grid, opts, true)?;
    for s in &solves {
        if !s.solution.converged {
            return Err(SdpError::NotConverged {
                gamma: s.gamma,
                iterations: s.solution.iterations,
                primal: s.solution.primal_residual,
                dual: s.solution.dual_residual,
            });
        }
    }
    Ok(normalize_curve(&derivative_norms(&solves)))
}
