//! Channel-adapted recoveries for Pauli channels and their robustness
//! under channel mixing.
//!
//! For a Pauli channel reduced to its coset table `a[p][q]`, the best
//! recovery of the syndrome-measurement family corrects, in each syndrome
//! subspace, the logical class with the largest probability; its fidelity
//! is the sum of the selected entries. Mixing the table with another one
//! moves every entry along an affine path, so the optimal fidelity is a
//! maximum of affine functions of the mixing parameter: piecewise linear,
//! convex, with breakpoints where a per-syndrome argmax flips. All boundary
//! quantities here (`gamma_0`, `gamma_delta`, switch points) are computed
//! exactly from those affine crossings; grids only sample output curves.

use thiserror::Error;

use crate::channel::{ChannelError, KrausChannel, ReducedErrorTable};
use crate::pauli::{enumerate_paulis, PauliOperator};
use crate::stabilizer::{CodeError, StabilizerCode};

/// Relative tolerance for declaring two table entries tied.
pub const TIE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("table shapes differ: [[{n0},{k0}]] vs [[{n1},{k1}]]")]
    ShapeMismatch {
        n0: usize,
        k0: usize,
        n1: usize,
        k1: usize,
    },
    #[error("plan has {got} entries, table has {expected} syndromes")]
    PlanLength { got: usize, expected: usize },
    #[error("plan entry {p} at syndrome {q} exceeds the {count} logical classes")]
    PlanEntry { p: usize, q: usize, count: usize },
    #[error("mixing parameter {0} outside [0, 1]")]
    GammaRange(f64),
    #[error(
        "plan is not optimal at gamma = 0: syndrome {q} prefers class {better} \
         over {chosen} by {deficit:.3e}"
    )]
    NotOptimalAtZero {
        q: usize,
        chosen: usize,
        better: usize,
        deficit: f64,
    },
    #[error(
        "syndrome {q} holds weight-<=1 errors from different logical classes ({first} and {second})"
    )]
    SyndromeCollision {
        q: usize,
        first: PauliOperator,
        second: PauliOperator,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Pauli(#[from] crate::pauli::PauliError),
}

/// A syndrome-measurement recovery: for each syndrome `q`, the logical
/// class `p_q` whose error is corrected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryPlan {
    choice: Vec<usize>,
}

impl RecoveryPlan {
    pub fn from_choices(choice: Vec<usize>) -> Self {
        RecoveryPlan { choice }
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    pub fn num_syndromes(&self) -> usize {
        self.choice.len()
    }

    fn check_against(&self, table: &ReducedErrorTable) -> Result<(), AdaptError> {
        if self.choice.len() != table.num_syndromes() {
            return Err(AdaptError::PlanLength {
                got: self.choice.len(),
                expected: table.num_syndromes(),
            });
        }
        for (q, &p) in self.choice.iter().enumerate() {
            if p >= table.num_logical_classes() {
                return Err(AdaptError::PlanEntry {
                    p,
                    q,
                    count: table.num_logical_classes(),
                });
            }
        }
        Ok(())
    }
}

/// The per-syndrome argmax plan together with its fidelity and the
/// syndromes where the maximum was not unique.
#[derive(Debug, Clone)]
pub struct OptimalPlan {
    pub plan: RecoveryPlan,
    pub fidelity: f64,
    /// Syndromes whose top entry is tied within [`TIE_REL_TOL`]; the plan
    /// picks the smallest class index there.
    pub tied_syndromes: Vec<usize>,
}

/// Selects, for every syndrome, the most probable logical class.
/// Ties break toward the smallest class index and are reported.
pub fn optimal_plan(table: &ReducedErrorTable) -> OptimalPlan {
    let mut choice = Vec::with_capacity(table.num_syndromes());
    let mut fidelity = 0.0;
    let mut tied = Vec::new();
    for q in 0..table.num_syndromes() {
        let mut best_p = 0;
        let mut best = table.entry(0, q);
        for p in 1..table.num_logical_classes() {
            if table.entry(p, q) > best {
                best = table.entry(p, q);
                best_p = p;
            }
        }
        let tie_count = (0..table.num_logical_classes())
            .filter(|&p| best - table.entry(p, q) <= TIE_REL_TOL * best.max(1e-300))
            .count();
        if tie_count > 1 {
            tied.push(q);
        }
        choice.push(best_p);
        fidelity += best;
    }
    OptimalPlan {
        plan: RecoveryPlan::from_choices(choice),
        fidelity,
        tied_syndromes: tied,
    }
}

/// The standard strategy: correct the identity and every single-qubit
/// error. Fails if two of those errors share a syndrome but not a logical
/// class; syndromes hit by no such error fall back to class 0.
pub fn standard_plan(code: &StabilizerCode) -> Result<RecoveryPlan, AdaptError> {
    standard_plan_for_errors(code, &enumerate_paulis(code.num_qubits(), 1))
}

/// The standard strategy restricted to an explicit error set.
pub fn standard_plan_for_errors(
    code: &StabilizerCode,
    errors: &[PauliOperator],
) -> Result<RecoveryPlan, AdaptError> {
    let mut assignment: Vec<Option<(usize, PauliOperator)>> = vec![None; code.num_syndromes()];
    for e in errors {
        let idx = code.decompose(e)?;
        match &assignment[idx.q] {
            None => assignment[idx.q] = Some((idx.p, e.clone())),
            Some((p_prev, first)) if *p_prev != idx.p => {
                return Err(AdaptError::SyndromeCollision {
                    q: idx.q,
                    first: first.clone(),
                    second: e.clone(),
                });
            }
            // Same coset: degenerate errors, the same correction works.
            Some(_) => {}
        }
    }
    Ok(RecoveryPlan::from_choices(
        assignment
            .into_iter()
            .map(|slot| slot.map_or(0, |(p, _)| p))
            .collect(),
    ))
}

/// Fidelity of a fixed plan on a table: the sum of the selected entries.
pub fn plan_fidelity(table: &ReducedErrorTable, plan: &RecoveryPlan) -> Result<f64, AdaptError> {
    plan.check_against(table)?;
    Ok(plan
        .choice
        .iter()
        .enumerate()
        .map(|(q, &p)| table.entry(p, q))
        .sum())
}

/// The Kraus form of a plan: one operator `U^dag W_q^dag A_{p_q}` per
/// syndrome, mapping the physical space back to the logical one.
pub fn recovery_kraus(
    code: &StabilizerCode,
    plan: &RecoveryPlan,
) -> Result<KrausChannel, AdaptError> {
    if plan.num_syndromes() != code.num_syndromes() {
        return Err(AdaptError::PlanLength {
            got: plan.num_syndromes(),
            expected: code.num_syndromes(),
        });
    }
    let decoder = code.encoder().adjoint();
    let mut ops = Vec::with_capacity(code.num_syndromes());
    for (q, &p) in plan.choice.iter().enumerate() {
        let w = code.syndrome_rep(q)?.to_matrix()?;
        let a = code.logical_rep(p)?.to_matrix()?;
        ops.push(&decoder * w.adjoint() * a);
    }
    Ok(KrausChannel::new(ops)?)
}

/// Entrywise convex combination of two tables over the same code shape.
pub fn mix_tables(
    t0: &ReducedErrorTable,
    tbar: &ReducedErrorTable,
    gamma: f64,
) -> Result<ReducedErrorTable, AdaptError> {
    if !t0.same_shape(tbar) {
        return Err(AdaptError::ShapeMismatch {
            n0: t0.num_qubits(),
            k0: t0.num_logical_qubits(),
            n1: tbar.num_qubits(),
            k1: tbar.num_logical_qubits(),
        });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(AdaptError::GammaRange(gamma));
    }
    let a = t0.matrix() * (1.0 - gamma) + tbar.matrix() * gamma;
    Ok(ReducedErrorTable::from_parts(
        t0.num_qubits(),
        t0.num_logical_qubits(),
        a,
    ))
}

fn ensure_optimal_at_zero(t0: &ReducedErrorTable, plan0: &RecoveryPlan) -> Result<(), AdaptError> {
    for (q, &chosen) in plan0.choice.iter().enumerate() {
        for p in 0..t0.num_logical_classes() {
            let deficit = t0.entry(p, q) - t0.entry(chosen, q);
            if deficit > TIE_REL_TOL {
                return Err(AdaptError::NotOptimalAtZero {
                    q,
                    chosen,
                    better: p,
                    deficit,
                });
            }
        }
    }
    Ok(())
}

/// The largest mixing parameter up to which `plan0` stays optimal: for
/// every syndrome and class, the affine inequality
/// `(1-g) a0[p*][q] + g a1[p*][q] >= (1-g) a0[p][q] + g a1[p][q]`
/// is solved for its flip point, and the smallest flip wins. Returns 1
/// when no inequality ever flips. `plan0` must be optimal at `gamma = 0`.
pub fn zero_robustness_boundary(
    t0: &ReducedErrorTable,
    tbar: &ReducedErrorTable,
    plan0: &RecoveryPlan,
) -> Result<f64, AdaptError> {
    if !t0.same_shape(tbar) {
        return Err(AdaptError::ShapeMismatch {
            n0: t0.num_qubits(),
            k0: t0.num_logical_qubits(),
            n1: tbar.num_qubits(),
            k1: tbar.num_logical_qubits(),
        });
    }
    plan0.check_against(t0)?;
    ensure_optimal_at_zero(t0, plan0)?;
    let mut gamma0 = 1.0f64;
    for (q, &star) in plan0.choice.iter().enumerate() {
        for p in 0..t0.num_logical_classes() {
            if p == star {
                continue;
            }
            let d0 = (t0.entry(star, q) - t0.entry(p, q)).max(0.0);
            let d1 = tbar.entry(star, q) - tbar.entry(p, q);
            if d1 < 0.0 {
                gamma0 = gamma0.min(d0 / (d0 - d1));
            }
        }
    }
    Ok(gamma0)
}

/// One sampled point of a robustness curve.
#[derive(Debug, Clone)]
pub struct RobustnessSample {
    pub gamma: f64,
    pub f_opt: f64,
    pub f_fixed: f64,
    pub delta_f: f64,
    /// True when the optimal plan differs from the previous sample's.
    pub plan_switched: bool,
}

/// Robustness of a fixed plan along a mixing ray.
#[derive(Debug, Clone)]
pub struct RobustnessReport {
    /// Boundary of the zero-robustness domain; 0 when the base plan is not
    /// optimal for the starting table.
    pub gamma_zero: f64,
    /// `(delta, gamma_delta)` pairs: the largest mixing parameter keeping
    /// the fidelity penalty beyond the base optimality gap at most delta.
    pub delta_boundaries: Vec<(f64, f64)>,
    pub samples: Vec<RobustnessSample>,
    /// Exact mixing parameters where the optimal plan changes.
    pub switch_points: Vec<f64>,
}

impl RobustnessReport {
    /// CSV with columns `gamma,f_opt,f_fixed,delta_f,plan_switch`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,f_opt,f_fixed,delta_f,plan_switch\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.gamma,
                s.f_opt,
                s.f_fixed,
                s.delta_f,
                u8::from(s.plan_switched)
            ));
        }
        out
    }
}

/// Samples `Delta F(gamma) = F_opt(gamma) - F_fixed(gamma)` over a grid and
/// locates the exact switch points and delta-robustness boundaries.
///
/// The delta boundary uses the definition with the optimality-gap offset:
/// the largest `gamma` such that `Delta F(g) - Delta F(0) <= delta` for all
/// `g` up to it. For a plan that is optimal at the start the offset
/// vanishes; otherwise it equals the plan's initial fidelity gap.
pub fn robustness_curve(
    t0: &ReducedErrorTable,
    tbar: &ReducedErrorTable,
    plan0: &RecoveryPlan,
    grid: &[f64],
    deltas: &[f64],
) -> Result<RobustnessReport, AdaptError> {
    if !t0.same_shape(tbar) {
        return Err(AdaptError::ShapeMismatch {
            n0: t0.num_qubits(),
            k0: t0.num_logical_qubits(),
            n1: tbar.num_qubits(),
            k1: tbar.num_logical_qubits(),
        });
    }
    plan0.check_against(t0)?;
    for &g in grid {
        if !(0.0..=1.0).contains(&g) {
            return Err(AdaptError::GammaRange(g));
        }
    }

    let offset = optimal_plan(t0).fidelity - plan_fidelity(t0, plan0)?;
    let gamma_zero = if offset <= TIE_REL_TOL {
        zero_robustness_boundary(t0, tbar, plan0).unwrap_or(0.0)
    } else {
        0.0
    };

    let mut samples: Vec<RobustnessSample> = Vec::with_capacity(grid.len());
    let mut prev_plan: Option<RecoveryPlan> = None;
    for &gamma in grid {
        let mixed = mix_tables(t0, tbar, gamma)?;
        let opt = optimal_plan(&mixed);
        let f_fixed = plan_fidelity(&mixed, plan0)?;
        let plan_switched = prev_plan.as_ref().map(|p| *p != opt.plan).unwrap_or(false);
        samples.push(RobustnessSample {
            gamma,
            f_opt: opt.fidelity,
            f_fixed,
            delta_f: opt.fidelity - f_fixed,
            plan_switched,
        });
        prev_plan = Some(opt.plan);
    }

    let switch_points = exact_switch_points(t0, tbar);
    let delta_boundaries = deltas
        .iter()
        .map(|&delta| {
            (
                delta,
                delta_boundary(t0, tbar, plan0, offset, delta, &switch_points),
            )
        })
        .collect();

    Ok(RobustnessReport {
        gamma_zero,
        delta_boundaries,
        samples,
        switch_points,
    })
}

/// All syndromes whose top table entry is attained by more than one
/// logical class (relative tolerance [`TIE_REL_TOL`]): witnesses that the
/// table sits on a boundary between recovery domains.
pub fn boundary_witnesses(table: &ReducedErrorTable) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for q in 0..table.num_syndromes() {
        let best = (0..table.num_logical_classes())
            .map(|p| table.entry(p, q))
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..table.num_logical_classes())
            .filter(|&p| best - table.entry(p, q) <= TIE_REL_TOL * best.max(1e-300))
            .collect();
        if tied.len() > 1 {
            out.push((q, tied));
        }
    }
    out
}

/// Exact mixing parameters in (0, 1) where some syndrome's argmax changes:
/// the breakpoints of the upper envelope of the per-class affine paths.
fn exact_switch_points(t0: &ReducedErrorTable, tbar: &ReducedErrorTable) -> Vec<f64> {
    let classes = t0.num_logical_classes();
    let mut points = Vec::new();
    for q in 0..t0.num_syndromes() {
        // Candidate crossings of every pair of affine paths.
        let mut candidates = vec![0.0f64, 1.0];
        for p1 in 0..classes {
            for p2 in (p1 + 1)..classes {
                let d0 = t0.entry(p1, q) - t0.entry(p2, q);
                let d1 = tbar.entry(p1, q) - tbar.entry(p2, q);
                // (1-g) d0 + g d1 = 0  =>  g = d0 / (d0 - d1)
                let denom = d0 - d1;
                if denom.abs() > 0.0 {
                    let g = d0 / denom;
                    if g > 0.0 && g < 1.0 {
                        candidates.push(g);
                    }
                }
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        // The argmax is constant on each open interval between candidates;
        // record the boundary when it changes.
        let argmax_at = |g: f64| -> usize {
            let mut best_p = 0;
            let mut best = f64::NEG_INFINITY;
            for p in 0..classes {
                let v = (1.0 - g) * t0.entry(p, q) + g * tbar.entry(p, q);
                if v > best {
                    best = v;
                    best_p = p;
                }
            }
            best_p
        };
        let mut prev: Option<usize> = None;
        for window in candidates.windows(2) {
            let mid = 0.5 * (window[0] + window[1]);
            let a = argmax_at(mid);
            if let Some(p) = prev {
                if p != a {
                    points.push(window[0]);
                }
            }
            prev = Some(a);
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    points
}

/// Exact delta-robustness boundary via a segment scan: between consecutive
/// switch points `Delta F` is affine, so the first crossing of
/// `offset + delta` is solved in closed form.
fn delta_boundary(
    t0: &ReducedErrorTable,
    tbar: &ReducedErrorTable,
    plan0: &RecoveryPlan,
    offset: f64,
    delta: f64,
    switch_points: &[f64],
) -> f64 {
    let delta_f_at = |g: f64| -> f64 {
        let mixed = mix_tables(t0, tbar, g).expect("gamma within range");
        optimal_plan(&mixed).fidelity - plan_fidelity(&mixed, plan0).expect("plan checked")
    };
    let threshold = offset + delta;
    let mut knots = vec![0.0];
    knots.extend(
        switch_points
            .iter()
            .copied()
            .filter(|g| *g > 0.0 && *g < 1.0),
    );
    knots.push(1.0);
    for w in knots.windows(2) {
        let (ga, gb) = (w[0], w[1]);
        let (fa, fb) = (delta_f_at(ga), delta_f_at(gb));
        if fa > threshold + 1e-15 {
            // Above the threshold already at the segment start; only happens
            // at 0 for degenerate thresholds.
            return ga;
        }
        if fb > threshold {
            let slope = (fb - fa) / (gb - ga);
            if slope <= 0.0 {
                continue;
            }
            return ga + (threshold - fa) / slope;
        }
    }
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{depolarizing, encoded_channel, phase_damping, PauliChannel};
    use crate::linalg::trace;
    use nalgebra::DMatrix;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn x_flip_table(pr: f64) -> ReducedErrorTable {
        PauliChannel::new(1, [(PauliOperator::identity(1), 1.0 - pr), (p("X"), pr)])
            .unwrap()
            .tensor_power(3)
            .reduce(&StabilizerCode::bitflip3())
            .unwrap()
    }

    /// Exhaustive search over every plan of the syndrome-measurement family.
    fn brute_force_best(table: &ReducedErrorTable) -> (Vec<usize>, f64) {
        let classes = table.num_logical_classes();
        let syndromes = table.num_syndromes();
        let total = classes.pow(syndromes as u32);
        let mut best = (vec![0; syndromes], f64::NEG_INFINITY);
        for code in 0..total {
            let mut plan = Vec::with_capacity(syndromes);
            let mut idx = code;
            for _ in 0..syndromes {
                plan.push(idx % classes);
                idx /= classes;
            }
            let f: f64 = plan
                .iter()
                .enumerate()
                .map(|(q, &pp)| table.entry(pp, q))
                .sum();
            if f > best.1 {
                best = (plan, f);
            }
        }
        best
    }

    #[test]
    fn optimal_plan_on_point_table() {
        let code = StabilizerCode::divincenzo5();
        let table = PauliChannel::identity_channel(5).reduce(&code).unwrap();
        let opt = optimal_plan(&table);
        assert_eq!(opt.plan.choices(), &[0; 16]);
        assert_eq!(opt.fidelity, 1.0);
        // Every empty column is a total tie.
        assert_eq!(opt.tied_syndromes.len(), 15);
    }

    #[test]
    fn optimal_plan_matches_brute_force_on_bitflip() {
        let table = x_flip_table(0.1);
        let opt = optimal_plan(&table);
        let (_, best_f) = brute_force_best(&table);
        assert_eq!(opt.fidelity, best_f);
        let expected = 0.9f64.powi(3) + 3.0 * 0.1 * 0.9 * 0.9;
        assert!((opt.fidelity - expected).abs() < 1e-15);
        assert!((opt.fidelity - 0.972).abs() < 1e-12);
    }

    #[test]
    fn standard_plan_on_five_qubit_codes() {
        for code in [StabilizerCode::divincenzo5(), StabilizerCode::laflamme5()] {
            let plan = standard_plan(&code).unwrap();
            // Every weight-<=1 error must be corrected by its own class.
            for e in enumerate_paulis(5, 1) {
                let idx = code.decompose(&e).unwrap();
                assert_eq!(plan.choices()[idx.q], idx.p, "error {e}");
            }
        }
    }

    #[test]
    fn standard_plan_collision_on_bitflip_full_error_set() {
        // Z errors on the repetition code share syndrome 0 with the identity
        // but carry logical content.
        let err = standard_plan(&StabilizerCode::bitflip3());
        assert!(matches!(err, Err(AdaptError::SyndromeCollision { .. })));
    }

    #[test]
    fn standard_plan_bitflip_under_x_errors() {
        let code = StabilizerCode::bitflip3();
        let errors = vec![PauliOperator::identity(3), p("XII"), p("IXI"), p("IIX")];
        let plan = standard_plan_for_errors(&code, &errors).unwrap();
        assert_eq!(plan.choices(), &[0, 1, 1, 1]);
        // It is the optimal plan for weak i.i.d. X noise.
        let table = x_flip_table(0.1);
        assert_eq!(optimal_plan(&table).plan, plan);
    }

    #[test]
    fn divincenzo_beats_laflamme_on_phase_damping() {
        let div = phase_damping(0.3)
            .unwrap()
            .tensor_power(5)
            .reduce(&StabilizerCode::divincenzo5())
            .unwrap();
        let laf = phase_damping(0.3)
            .unwrap()
            .tensor_power(5)
            .reduce(&StabilizerCode::laflamme5())
            .unwrap();
        assert!(optimal_plan(&div).fidelity > optimal_plan(&laf).fidelity);
    }

    #[test]
    fn plan_fidelity_against_dense_composition() {
        let code = StabilizerCode::divincenzo5();
        let ch = phase_damping(0.3).unwrap().tensor_power(5);
        let table = ch.reduce(&code).unwrap();
        let opt = optimal_plan(&table);
        let recovery = recovery_kraus(&code, &opt.plan).unwrap();
        let encoded = encoded_channel(&code, &ch.to_kraus().unwrap()).unwrap();
        let dense = recovery.compose(&encoded).unwrap().fidelity().unwrap();
        assert!(
            (dense - opt.fidelity).abs() < 1e-12,
            "dense {dense} vs analytic {}",
            opt.fidelity
        );
        // The standard plan too.
        let std_plan = standard_plan(&code).unwrap();
        let analytic = plan_fidelity(&table, &std_plan).unwrap();
        let dense = recovery_kraus(&code, &std_plan)
            .unwrap()
            .compose(&encoded)
            .unwrap()
            .fidelity()
            .unwrap();
        assert!((dense - analytic).abs() < 1e-12);
        // And the optimal strictly beats it for phase damping.
        assert!(opt.fidelity > analytic + 1e-3);
    }

    #[test]
    fn recovery_kraus_is_complete_and_orthogonal() {
        let code = StabilizerCode::divincenzo5();
        let plan = standard_plan(&code).unwrap();
        let recovery = recovery_kraus(&code, &plan).unwrap();
        assert_eq!(recovery.ops().len(), 16);
        assert!(recovery.completeness_residual() < 1e-12);
        for (i, a) in recovery.ops().iter().enumerate() {
            for b in recovery.ops().iter().skip(i + 1) {
                let overlap = trace(&(a * b.adjoint())).norm();
                assert!(overlap < 1e-12);
            }
        }
    }

    #[test]
    fn perfect_decoder_for_identity_channel() {
        let code = StabilizerCode::divincenzo5();
        let table = PauliChannel::identity_channel(5).reduce(&code).unwrap();
        let opt = optimal_plan(&table);
        let recovery = recovery_kraus(&code, &opt.plan).unwrap();
        let encoded = encoded_channel(&code, &KrausChannel::identity_channel(32)).unwrap();
        let f = recovery.compose(&encoded).unwrap().fidelity().unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mix_tables_endpoints_and_mass() {
        let t0 = x_flip_table(0.1);
        let t1 = x_flip_table(0.35);
        assert_eq!(mix_tables(&t0, &t1, 0.0).unwrap(), t0);
        assert_eq!(mix_tables(&t0, &t1, 1.0).unwrap(), t1);
        for gamma in [0.2, 0.5, 0.9] {
            let mixed = mix_tables(&t0, &t1, gamma).unwrap();
            assert!((mixed.total_mass() - 1.0).abs() < 1e-12);
        }
        assert!(mix_tables(&t0, &t1, -0.1).is_err());
    }

    /// Extremal mixing setup on a hand-built table: the alien error lands at
    /// (p_bar, q_bar) = (3, 2) where the incumbent class 1 holds 0.3 and the
    /// challenger class 3 holds 0.1.
    fn extremal_setup() -> (ReducedErrorTable, ReducedErrorTable, RecoveryPlan) {
        let mut a = DMatrix::from_element(4, 4, 0.0f64);
        a[(0, 0)] = 0.3;
        a[(1, 1)] = 0.2;
        a[(1, 2)] = 0.3;
        a[(3, 2)] = 0.1;
        a[(2, 3)] = 0.1;
        let t0 = ReducedErrorTable::from_matrix(3, 1, a).unwrap();
        let mut b = DMatrix::from_element(4, 4, 0.0f64);
        b[(3, 2)] = 1.0;
        let tbar = ReducedErrorTable::from_matrix(3, 1, b).unwrap();
        let plan0 = optimal_plan(&t0).plan;
        (t0, tbar, plan0)
    }

    #[test]
    fn gamma_zero_closed_form_extremal() {
        let (t0, tbar, plan0) = extremal_setup();
        let g0 = zero_robustness_boundary(&t0, &tbar, &plan0).unwrap();
        // (a* - abar) / (a* - abar + 1) with a* = 0.3, abar = 0.1.
        assert!((g0 - 0.2 / 1.2).abs() < 1e-15);

        // Grid-scan oracle: bisect the argmax switch of syndrome 2.
        let switch_of =
            |g: f64| optimal_plan(&mix_tables(&t0, &tbar, g).unwrap()).plan.choices()[2];
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        assert_eq!(switch_of(lo), 1);
        assert_eq!(switch_of(hi), 3);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if switch_of(mid) == 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - g0).abs() < 1e-12, "bisection {lo} vs exact {g0}");
    }

    #[test]
    fn gamma_zero_degenerate_cases() {
        let (t0, _, plan0) = extremal_setup();
        // Mixing toward the already-corrected class never flips.
        let mut b = DMatrix::from_element(4, 4, 0.0f64);
        b[(1, 2)] = 1.0;
        let toward_star = ReducedErrorTable::from_matrix(3, 1, b).unwrap();
        assert_eq!(
            zero_robustness_boundary(&t0, &toward_star, &plan0).unwrap(),
            1.0
        );
        // Mixing a table with itself never flips either.
        assert_eq!(zero_robustness_boundary(&t0, &t0, &plan0).unwrap(), 1.0);
        // A non-optimal base plan is a precondition violation.
        let bad = RecoveryPlan::from_choices(vec![3, 3, 3, 3]);
        assert!(matches!(
            zero_robustness_boundary(&t0, &t0, &bad),
            Err(AdaptError::NotOptimalAtZero { .. })
        ));
    }

    #[test]
    fn robustness_curve_extremal_mixing() {
        let (t0, tbar, plan0) = extremal_setup();
        let g0 = zero_robustness_boundary(&t0, &tbar, &plan0).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let deltas = [1e-3, 1e-2, 5e-2];
        let report = robustness_curve(&t0, &tbar, &plan0, &grid, &deltas).unwrap();

        assert!((report.gamma_zero - g0).abs() < 1e-15);
        // Flat at zero before the boundary.
        for s in report.samples.iter().filter(|s| s.gamma < g0 - 1e-12) {
            assert!(
                s.delta_f.abs() < 1e-12,
                "gamma {} has delta {}",
                s.gamma,
                s.delta_f
            );
        }
        // Affine beyond the boundary with slope a* - abar + 1.
        let slope_expected = 0.3 - 0.1 + 1.0;
        let after: Vec<&RobustnessSample> = report
            .samples
            .iter()
            .filter(|s| s.gamma > g0 + 1e-9)
            .collect();
        for w in after.windows(2) {
            let slope = (w[1].delta_f - w[0].delta_f) / (w[1].gamma - w[0].gamma);
            assert!((slope - slope_expected).abs() < 1e-9, "slope {slope}");
        }
        // Delta boundaries match the closed form gamma_0 + delta / slope.
        for &(delta, gd) in &report.delta_boundaries {
            let expected = g0 + delta / slope_expected;
            assert!(
                (gd - expected).abs() < 1e-9,
                "delta {delta}: {gd} vs {expected}"
            );
        }
        // Exactly one switch point, at gamma_0.
        assert_eq!(report.switch_points.len(), 1);
        assert!((report.switch_points[0] - g0).abs() < 1e-12);
        // Delta F never negative.
        assert!(report.samples.iter().all(|s| s.delta_f >= -1e-12));
    }

    #[test]
    fn non_optimal_plan_scales_linearly_in_delta() {
        let (t0, _, _) = extremal_setup();
        // Deliberately wrong correction in syndrome 1, and an alteration
        // aligned with the class the optimal plan corrects there: the gap
        // beyond the base offset then grows linearly from gamma = 0.
        let plan_bad = RecoveryPlan::from_choices(vec![0, 0, 1, 2]);
        let mut b = DMatrix::from_element(4, 4, 0.0f64);
        b[(1, 1)] = 1.0;
        let tbar = ReducedErrorTable::from_matrix(3, 1, b).unwrap();
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let deltas = [1e-5, 1e-4, 1e-3];
        let report = robustness_curve(&t0, &tbar, &plan_bad, &grid, &deltas).unwrap();
        assert_eq!(report.gamma_zero, 0.0);
        // Exact picture: offset 0.2, Delta F(g) = 0.2 + 0.8 g, so
        // gamma_delta = delta / 0.8 with no constant term.
        for &(d, g) in &report.delta_boundaries {
            assert!((g - d / 0.8).abs() < 1e-12, "delta {d}: got {g}");
        }
        let ratios: Vec<f64> = report
            .delta_boundaries
            .iter()
            .map(|&(d, g)| g / d)
            .collect();
        assert!((ratios[0] - ratios[1]).abs() < 1e-6 * ratios[0].abs());
        assert!((ratios[1] - ratios[2]).abs() < 1e-6 * ratios[1].abs());
        assert!(report.delta_boundaries[0].1 < 1e-3);
    }

    #[test]
    fn optimal_fidelity_is_convex_piecewise_linear() {
        let code = StabilizerCode::divincenzo5();
        let t0 = phase_damping(0.3)
            .unwrap()
            .tensor_power(5)
            .reduce(&code)
            .unwrap();
        let t1 = depolarizing(0.3)
            .unwrap()
            .tensor_power(5)
            .reduce(&code)
            .unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let fs: Vec<f64> = grid
            .iter()
            .map(|&g| optimal_plan(&mix_tables(&t0, &t1, g).unwrap()).fidelity)
            .collect();
        // Convexity of the sampled maximum of affine functions.
        for w in fs.windows(3) {
            assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-12);
        }
        // A fixed plan's fidelity is exactly affine along the mix.
        let plan = optimal_plan(&t0).plan;
        let f0 = plan_fidelity(&t0, &plan).unwrap();
        let f1 = plan_fidelity(&t1, &plan).unwrap();
        for &g in &grid {
            let f = plan_fidelity(&mix_tables(&t0, &t1, g).unwrap(), &plan).unwrap();
            assert!((f - ((1.0 - g) * f0 + g * f1)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_witness_detection() {
        // Generic phase damping table: no ties.
        let code = StabilizerCode::divincenzo5();
        let table = phase_damping(0.3)
            .unwrap()
            .tensor_power(5)
            .reduce(&code)
            .unwrap();
        assert!(boundary_witnesses(&table).is_empty());

        // Hand-built tie in column 2 between classes 1 and 3.
        let mut a = DMatrix::from_element(4, 4, 0.0f64);
        a[(0, 0)] = 0.4;
        a[(1, 2)] = 0.2;
        a[(3, 2)] = 0.2;
        a[(2, 1)] = 0.1;
        a[(0, 3)] = 0.1;
        let table = ReducedErrorTable::from_matrix(3, 1, a).unwrap();
        let witnesses = boundary_witnesses(&table);
        assert!(witnesses.contains(&(2, vec![1, 3])));

        // Fully uniform table: every syndrome is degenerate in all classes.
        let uniform =
            ReducedErrorTable::from_matrix(3, 1, DMatrix::from_element(4, 4, 1.0 / 16.0)).unwrap();
        let witnesses = boundary_witnesses(&uniform);
        assert_eq!(witnesses.len(), 4);
        assert!(witnesses.iter().all(|(_, ps)| ps.len() == 4));
    }

    #[test]
    fn report_csv_has_expected_columns() {
        let (t0, tbar, plan0) = extremal_setup();
        let report = robustness_curve(&t0, &tbar, &plan0, &[0.0, 0.5, 1.0], &[1e-3]).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "gamma,f_opt,f_fixed,delta_f,plan_switch"
        );
        assert_eq!(lines.count(), 3);
    }
}
