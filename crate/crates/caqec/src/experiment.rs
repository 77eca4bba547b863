//! Configuration-driven experiment runners: the fidelity-versus-noise
//! comparison of the recovery strategies, channel-mixing robustness sweeps
//! with the SDP recovery, and Pauli-channel robustness reports.
//!
//! Each runner computes a plain data struct; writing CSV and SVG files is a
//! separate step so tests can work on the numbers directly. The SVG plots
//! are generated from exactly the rows that go into the CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{
    boundary_witnesses, optimal_plan, plan_fidelity, robustness_curve, standard_plan, AdaptError,
    RecoveryPlan, RobustnessReport,
};
use crate::channel::{phase_damping, BuiltChannel, ChannelError, ChannelSpec, PauliChannel};
use crate::sdp::{
    derivative_norms, fidelity_observable, normalize_curve, solve_mixing_sweep, MixingSolve,
    SdpError, SdpOptions,
};
use crate::stabilizer::{CodeError, StabilizerCode};
use crate::plot::{line_chart, Series};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("preset {0:?} is unknown")]
    UnknownPreset(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which recovery the robustness report holds fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoverySpec {
    Optimal,
    Standard,
    /// An explicit per-syndrome class choice.
    Fixed { plan: Vec<usize> },
}

impl Default for RecoverySpec {
    fn default() -> Self {
        RecoverySpec::Optimal
    }
}

/// One experiment, as described by a TOML config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in code name or path to a code definition file.
    #[serde(default = "default_code")]
    pub code: String,
    pub channel_a: Option<ChannelSpec>,
    pub channel_b: Option<ChannelSpec>,
    /// Number of grid points over the mixing range.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub gamma_min: f64,
    #[serde(default = "default_one")]
    pub gamma_max: f64,
    /// Robustness thresholds evaluated by the Pauli report.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub recovery: RecoverySpec,
    /// SDP residual tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Solve grid points independently (parallel) instead of chaining
    /// warm starts.
    #[serde(default)]
    pub cold_start: bool,
    /// Refine the mixing grid around the strongest derivative peak.
    #[serde(default = "default_true")]
    pub refine: bool,
}

fn default_code() -> String {
    "divincenzo5".to_string()
}
fn default_grid() -> usize {
    201
}
fn default_one() -> f64 {
    1.0
}
fn default_deltas() -> Vec<f64> {
    vec![1e-3, 1e-2]
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    50_000
}
fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            code: default_code(),
            channel_a: None,
            channel_b: None,
            grid: default_grid(),
            gamma_min: 0.0,
            gamma_max: 1.0,
            deltas: default_deltas(),
            recovery: RecoverySpec::Optimal,
            tol: default_tol(),
            max_iter: default_max_iter(),
            cold_start: false,
            refine: default_true(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn solver_options(&self) -> SdpOptions {
        SdpOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SdpOptions::default()
        }
    }

    fn gamma_grid(&self) -> Result<Vec<f64>, ExperimentError> {
        if self.grid < 2 {
            return Err(ExperimentError::Config("grid needs at least 2 points".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma_min)
            || !(0.0..=1.0).contains(&self.gamma_max)
            || self.gamma_min >= self.gamma_max
        {
            return Err(ExperimentError::Config(format!(
                "invalid gamma range [{}, {}]",
                self.gamma_min, self.gamma_max
            )));
        }
        let n = self.grid;
        Ok((0..n)
            .map(|i| {
                self.gamma_min + (self.gamma_max - self.gamma_min) * i as f64 / (n - 1) as f64
            })
            .collect())
    }

    fn built_channels(&self, code: &StabilizerCode) -> Result<(BuiltChannel, BuiltChannel), ExperimentError> {
        let a = self
            .channel_a
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("channel_a missing".into()))?;
        let b = self
            .channel_b
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("channel_b missing".into()))?;
        Ok((a.build(code.num_qubits())?, b.build(code.num_qubits())?))
    }
}

/// Built-in experiment setups matching the studied channel pairs.
pub fn preset(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let theta = 5.0 * std::f64::consts::PI / 12.0;
    let phi = 5.0 * std::f64::consts::PI / 36.0;
    let rotation = ChannelSpec::PureStatesRotation { theta, phi };
    let base = ExperimentConfig::default();
    let cfg = match name {
        "fig2a" => ExperimentConfig {
            channel_a: Some(ChannelSpec::Depolarizing { p: 0.3 }),
            channel_b: Some(ChannelSpec::AmplitudeDamping { p: 0.3 }),
            ..base
        },
        "fig2b" => ExperimentConfig {
            channel_a: Some(ChannelSpec::Depolarizing { p: 0.3 }),
            channel_b: Some(rotation),
            ..base
        },
        "fig2c" => ExperimentConfig {
            channel_a: Some(ChannelSpec::PhaseDamping { p: 0.3 }),
            channel_b: Some(ChannelSpec::AmplitudeDamping { p: 0.3 }),
            ..base
        },
        "fig2d" => ExperimentConfig {
            channel_a: Some(ChannelSpec::PhaseDamping { p: 0.3 }),
            channel_b: Some(rotation),
            ..base
        },
        "fig4" => ExperimentConfig {
            channel_a: Some(ChannelSpec::AmplitudeDamping { p: 0.5 }),
            channel_b: Some(rotation),
            ..base
        },
        // Enlargement of the fig2c endpoint where the optimal and linear
        // terms split very close to the amplitude damping channel.
        "fig3-zoom" => ExperimentConfig {
            channel_a: Some(ChannelSpec::PhaseDamping { p: 0.3 }),
            channel_b: Some(ChannelSpec::AmplitudeDamping { p: 0.3 }),
            gamma_min: 0.995,
            gamma_max: 1.0,
            refine: false,
            ..base
        },
        "extremal" => extremal_preset(false)?,
        "extremal-nonoptimal" => extremal_preset(true)?,
        "pauli-pair" => ExperimentConfig {
            channel_a: Some(ChannelSpec::PhaseDamping { p: 0.3 }),
            channel_b: Some(ChannelSpec::Depolarizing { p: 0.3 }),
            ..base
        },
        other => return Err(ExperimentError::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "fig2a",
        "fig2b",
        "fig2c",
        "fig2d",
        "fig3-zoom",
        "fig4",
        "extremal",
        "extremal-nonoptimal",
        "pauli-pair",
    ]
}

/// Mixing toward a single deterministic coset error on the five-qubit code.
///
/// The plain variant aims at a class that is *not* corrected in its
/// syndrome, so the optimal plan flips at a positive breakpoint. The
/// non-optimal variant holds the standard plan fixed and aims at a class
/// the optimal plan corrects but the standard one does not, so the penalty
/// beyond the base gap grows linearly from the start.
fn extremal_preset(nonoptimal: bool) -> Result<ExperimentConfig, ExperimentError> {
    let code = StabilizerCode::divincenzo5();
    let table = phase_damping(0.3)?.tensor_power(5).reduce(&code)?;
    let opt = optimal_plan(&table);
    let (q_bar, p_bar, recovery) = if nonoptimal {
        let std = standard_plan(&code)?;
        let q = (0..code.num_syndromes())
            .find(|&q| std.choices()[q] != opt.plan.choices()[q])
            .ok_or_else(|| {
                ExperimentError::Config("standard plan equals optimal; no disagreement".into())
            })?;
        (
            q,
            opt.plan.choices()[q],
            RecoverySpec::Fixed {
                plan: std.choices().to_vec(),
            },
        )
    } else {
        let q = 1;
        (q, (opt.plan.choices()[q] + 1) % 4, RecoverySpec::Optimal)
    };
    let op = code
        .logical_rep(p_bar)?
        .mul(code.syndrome_rep(q_bar)?)
        .map_err(CodeError::from)?
        .with_plain_sign();
    Ok(ExperimentConfig {
        channel_a: Some(ChannelSpec::PhaseDamping { p: 0.3 }),
        channel_b: Some(ChannelSpec::PauliTable {
            paulis: vec![op.to_string()],
            weights: vec![1.0],
        }),
        recovery,
        ..ExperimentConfig::default()
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Fidelity-versus-noise comparison of the recovery strategies.

#[derive(Debug, Clone)]
pub struct StrategyComparisonRow {
    pub p: f64,
    pub divincenzo_optimal: f64,
    pub divincenzo_standard: f64,
    pub laflamme_optimal: f64,
    pub laflamme_standard: f64,
    pub no_correction: f64,
}

#[derive(Debug, Clone)]
pub struct StrategyComparison {
    pub rows: Vec<StrategyComparisonRow>,
    /// Log-log slope of `1 - F` over the fit window, per curve.
    pub slopes: Vec<(String, f64)>,
}

/// The noise window for the infidelity slope fits.
pub const SLOPE_FIT_RANGE: (f64, f64) = (1e-3, 1e-2);

/// Fidelity of the five recovery strategies against the phase damping
/// channel over a noise grid: both five-qubit codes with optimal and
/// standard recoveries, plus the bare unencoded qubit.
///
/// The grid is `uniform_points` over [0, 1] plus a log-spaced tail across
/// the slope-fit window.
pub fn run_strategy_comparison(uniform_points: usize) -> Result<StrategyComparison, ExperimentError> {
    let div = StabilizerCode::divincenzo5();
    let laf = StabilizerCode::laflamme5();
    let div_std = standard_plan(&div)?;
    let laf_std = standard_plan(&laf)?;

    let mut ps: Vec<f64> = (0..uniform_points)
        .map(|i| i as f64 / (uniform_points - 1) as f64)
        .collect();
    let tail = 25usize;
    let (lo, hi) = SLOPE_FIT_RANGE;
    for i in 0..tail {
        ps.push(lo * (hi / lo).powf(i as f64 / (tail - 1) as f64));
    }
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ps.dedup();

    let mut rows = Vec::with_capacity(ps.len());
    for &p in &ps {
        let single = phase_damping(p)?;
        let five = single.tensor_power(5);
        let t_div = five.reduce(&div)?;
        let t_laf = five.reduce(&laf)?;
        rows.push(StrategyComparisonRow {
            p,
            divincenzo_optimal: optimal_plan(&t_div).fidelity,
            divincenzo_standard: plan_fidelity(&t_div, &div_std)?,
            laflamme_optimal: optimal_plan(&t_laf).fidelity,
            laflamme_standard: plan_fidelity(&t_laf, &laf_std)?,
            no_correction: single.fidelity(),
        });
    }

    let fit = |extract: fn(&StrategyComparisonRow) -> f64| -> f64 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.p >= lo && r.p <= hi)
            .map(|r| (r.p, 1.0 - extract(r)))
            .filter(|&(_, inf)| inf > 0.0)
            .collect();
        loglog_slope(&pts)
    };
    let slopes = vec![
        ("divincenzo_optimal".to_string(), fit(|r| r.divincenzo_optimal)),
        ("divincenzo_standard".to_string(), fit(|r| r.divincenzo_standard)),
        ("laflamme_optimal".to_string(), fit(|r| r.laflamme_optimal)),
        ("laflamme_standard".to_string(), fit(|r| r.laflamme_standard)),
        ("no_correction".to_string(), fit(|r| r.no_correction)),
    ];
    Ok(StrategyComparison { rows, slopes })
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = x.log10();
        let ly = y.log10();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

impl StrategyComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "p,f_divincenzo_optimal,f_divincenzo_standard,f_laflamme_optimal,f_laflamme_standard,f_no_correction\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.p,
                r.divincenzo_optimal,
                r.divincenzo_standard,
                r.laflamme_optimal,
                r.laflamme_standard,
                r.no_correction
            );
        }
        out
    }

    pub fn slopes_csv(&self) -> String {
        let mut out = String::from("curve,slope\n");
        for (name, slope) in &self.slopes {
            let _ = writeln!(out, "{name},{slope}");
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let pick = |f: fn(&StrategyComparisonRow) -> f64| -> Vec<(f64, f64)> {
            self.rows.iter().map(|r| (r.p, f(r))).collect()
        };
        let series = vec![
            Series::new("divincenzo optimal", pick(|r| r.divincenzo_optimal)),
            Series::dashed("divincenzo standard", pick(|r| r.divincenzo_standard)),
            Series::new("laflamme optimal", pick(|r| r.laflamme_optimal)),
            Series::dashed("laflamme standard", pick(|r| r.laflamme_standard)),
            Series::dashed("no correction", pick(|r| r.no_correction)),
        ];
        line_chart(
            "Channel fidelity under phase damping",
            "noise parameter p",
            "channel fidelity",
            &series,
        )
    }

    /// Writes `strategies.csv`, `strategies_slopes.csv` and
    /// `strategies.svg`; returns the paths.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        Ok(vec![
            write_file(out_dir, "strategies.csv", &self.to_csv())?,
            write_file(out_dir, "strategies_slopes.csv", &self.slopes_csv())?,
            write_file(out_dir, "strategies.svg", &self.to_svg())?,
        ])
    }
}

// ---------------------------------------------------------------------------
// Channel-mixing sweep with the SDP recovery.

#[derive(Debug, Clone)]
pub struct MixingRow {
    pub gamma: f64,
    pub f_opt: f64,
    /// Fidelity of the recovery frozen at the first grid point.
    pub f_fixed_from_0: f64,
    /// Fidelity of the recovery frozen at the last grid point.
    pub f_fixed_from_1: f64,
    /// Choi-derivative norm, scaled to the curve maximum.
    pub derivative_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MixingSweep {
    pub rows: Vec<MixingRow>,
    pub any_failure: bool,
}

/// Runs the mixing experiment: for every grid point the SDP recovery is
/// re-optimized, the two endpoint recoveries are evaluated as fixed
/// references, and the Choi derivative flags plan changes. With `refine`
/// the grid is densified once around the strongest derivative peak.
pub fn run_mixing(config: &ExperimentConfig) -> Result<MixingSweep, ExperimentError> {
    let code = StabilizerCode::load(&config.code)?;
    let (a, b) = config.built_channels(&code)?;
    let e0 = a.to_kraus()?;
    let e1 = b.to_kraus()?;
    let opts = config.solver_options();
    let mut grid = config.gamma_grid()?;

    let mut solves = solve_mixing_sweep(&code, &e0, &e1, &grid, &opts, !config.cold_start)?;
    if config.refine {
        if let Some(extra) = refinement_points(&solves) {
            grid.extend(extra);
            grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
            grid.dedup();
            solves = solve_mixing_sweep(&code, &e0, &e1, &grid, &opts, !config.cold_start)?;
        }
    }

    // Fixed-recovery fidelities are linear in the observable, which is
    // affine in gamma: evaluate Tr(X_ref C_gamma) directly.
    let c0 = fidelity_observable(&code, &e0)?;
    let c1 = fidelity_observable(&code, &e1)?;
    let x_first = solves.first().expect("grid nonempty").solution.choi.matrix().clone();
    let x_last = solves.last().expect("grid nonempty").solution.choi.matrix().clone();
    let trace_against = |x: &nalgebra::DMatrix<Complex64>, gamma: f64| -> f64 {
        x.iter()
            .zip(c0.iter().zip(c1.iter()))
            .map(|(xe, (a0, a1))| {
                (xe.conj() * (a0 * Complex64::new(1.0 - gamma, 0.0) + a1 * Complex64::new(gamma, 0.0))).re
            })
            .sum()
    };

    let derivative = normalize_curve(&derivative_norms(&solves));
    let mut rows = Vec::with_capacity(solves.len());
    let mut any_failure = false;
    for (s, &(_, dnorm)) in solves.iter().zip(&derivative) {
        if !s.solution.converged {
            any_failure = true;
        }
        rows.push(MixingRow {
            gamma: s.gamma,
            f_opt: s.solution.fidelity,
            f_fixed_from_0: trace_against(&x_first, s.gamma),
            f_fixed_from_1: trace_against(&x_last, s.gamma),
            derivative_norm: dnorm,
            converged: s.solution.converged,
        });
    }
    Ok(MixingSweep { rows, any_failure })
}

/// Extra grid points bracketing the strongest derivative peak: two rounds
/// of midpoint insertion on the peak's neighborhood.
fn refinement_points(solves: &[MixingSolve]) -> Option<Vec<f64>> {
    if solves.len() < 3 {
        return None;
    }
    let raw = derivative_norms(solves);
    let (peak_idx, peak) = raw
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())?;
    if peak.1 <= 0.0 {
        return None;
    }
    let lo = solves[peak_idx.saturating_sub(1)].gamma;
    let hi = solves[(peak_idx + 2).min(solves.len() - 1)].gamma;
    // 16 uniform points strictly inside the bracket.
    let extra: Vec<f64> = (1..=16)
        .map(|i| lo + (hi - lo) * i as f64 / 17.0)
        .collect();
    Some(extra)
}

impl MixingSweep {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("gamma,f_opt,f_fixed_from_0,f_fixed_from_1,derivative_norm,status\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.gamma,
                r.f_opt,
                r.f_fixed_from_0,
                r.f_fixed_from_1,
                r.derivative_norm,
                if r.converged { "ok" } else { "maxiter" }
            );
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let series = vec![
            Series::new(
                "optimal recovery",
                self.rows.iter().map(|r| (r.gamma, r.f_opt)).collect(),
            ),
            Series::dashed(
                "fixed from gamma_min",
                self.rows.iter().map(|r| (r.gamma, r.f_fixed_from_0)).collect(),
            ),
            Series::dashed(
                "fixed from gamma_max",
                self.rows.iter().map(|r| (r.gamma, r.f_fixed_from_1)).collect(),
            ),
            Series::new(
                "Choi derivative (scaled)",
                self.rows
                    .iter()
                    .map(|r| (r.gamma, r.derivative_norm))
                    .collect(),
            ),
        ];
        line_chart(
            "Channel mixing robustness",
            "mixing parameter gamma",
            "channel fidelity / scaled derivative",
            &series,
        )
    }

    pub fn write(&self, out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>, ExperimentError> {
        Ok(vec![
            write_file(out_dir, &format!("{stem}.csv"), &self.to_csv())?,
            write_file(out_dir, &format!("{stem}.svg"), &self.to_svg())?,
        ])
    }
}

// ---------------------------------------------------------------------------
// Pauli-channel robustness report.

#[derive(Debug)]
pub struct PauliRobustness {
    pub report: RobustnessReport,
    pub witnesses_at_start: Vec<(usize, Vec<usize>)>,
}

/// Robustness of a recovery plan along a ray between two Pauli channels,
/// with exact breakpoint and boundary values.
pub fn run_pauli_robustness(config: &ExperimentConfig) -> Result<PauliRobustness, ExperimentError> {
    let code = StabilizerCode::load(&config.code)?;
    let (a, b) = config.built_channels(&code)?;
    let a = pauli_of(&a)?;
    let b = pauli_of(&b)?;
    let t0 = a.reduce(&code)?;
    let tbar = b.reduce(&code)?;
    let plan0 = match &config.recovery {
        RecoverySpec::Optimal => optimal_plan(&t0).plan,
        RecoverySpec::Standard => standard_plan(&code)?,
        RecoverySpec::Fixed { plan } => RecoveryPlan::from_choices(plan.clone()),
    };
    let grid = config.gamma_grid()?;
    let report = robustness_curve(&t0, &tbar, &plan0, &grid, &config.deltas)?;
    Ok(PauliRobustness {
        witnesses_at_start: boundary_witnesses(&t0),
        report,
    })
}

fn pauli_of(ch: &BuiltChannel) -> Result<&PauliChannel, ExperimentError> {
    ch.as_pauli().ok_or_else(|| {
        ExperimentError::Config("this experiment needs Pauli channels on both sides".into())
    })
}

impl PauliRobustness {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        let _ = writeln!(out, "gamma_zero,{}", self.report.gamma_zero);
        for (delta, gd) in &self.report.delta_boundaries {
            let _ = writeln!(out, "gamma_delta[{delta}],{gd}");
        }
        for (i, sp) in self.report.switch_points.iter().enumerate() {
            let _ = writeln!(out, "switch_point[{i}],{sp}");
        }
        for (q, ps) in &self.witnesses_at_start {
            let _ = writeln!(
                out,
                "tied_syndrome[{q}],{}",
                ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";")
            );
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let series = vec![
            Series::new(
                "optimal recovery",
                self.report.samples.iter().map(|s| (s.gamma, s.f_opt)).collect(),
            ),
            Series::dashed(
                "fixed recovery",
                self.report
                    .samples
                    .iter()
                    .map(|s| (s.gamma, s.f_fixed))
                    .collect(),
            ),
            Series::new(
                "Delta F",
                self.report
                    .samples
                    .iter()
                    .map(|s| (s.gamma, s.delta_f))
                    .collect(),
            ),
        ];
        line_chart(
            "Pauli channel robustness",
            "mixing parameter gamma",
            "channel fidelity / Delta F",
            &series,
        )
    }

    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        Ok(vec![
            write_file(out_dir, "pauli_robustness.csv", &self.report.to_csv())?,
            write_file(out_dir, "pauli_robustness_summary.csv", &self.summary_csv())?,
            write_file(out_dir, "pauli_robustness.svg", &self.to_svg())?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_comparison_endpoints_and_order() {
        let data = run_strategy_comparison(21).unwrap();
        let first = &data.rows[0];
        assert_eq!(first.p, 0.0);
        for f in [
            first.divincenzo_optimal,
            first.divincenzo_standard,
            first.laflamme_optimal,
            first.laflamme_standard,
            first.no_correction,
        ] {
            assert!((f - 1.0).abs() < 1e-12);
        }
        // Optimal never loses to standard or to no correction.
        for r in &data.rows {
            assert!(r.divincenzo_optimal >= r.divincenzo_standard - 1e-12);
            assert!(r.divincenzo_optimal >= r.no_correction - 1e-12);
            assert!(r.laflamme_optimal >= r.laflamme_standard - 1e-12);
        }
        let csv = data.to_csv();
        assert!(csv.starts_with("p,f_divincenzo_optimal"));
        assert!(data.to_svg().contains("polyline"));
    }

    #[test]
    fn slope_fit_recovers_power_laws() {
        let cubic: Vec<(f64, f64)> = (1..=20)
            .map(|i| {
                let x = 1e-3 * i as f64;
                (x, 2.5 * x.powi(3))
            })
            .collect();
        assert!((loglog_slope(&cubic) - 3.0).abs() < 1e-9);
        let data = run_strategy_comparison(51).unwrap();
        let slope_of = |name: &str| {
            data.slopes
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| *s)
                .unwrap()
        };
        assert!((slope_of("divincenzo_optimal") - 3.0).abs() < 0.1);
        assert!((slope_of("divincenzo_standard") - 2.0).abs() < 0.1);
        assert!((slope_of("laflamme_optimal") - 2.0).abs() < 0.1);
        assert!((slope_of("laflamme_standard") - 2.0).abs() < 0.1);
        assert!((slope_of("no_correction") - 1.0).abs() < 0.1);
    }

    #[test]
    fn presets_build() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            let code = StabilizerCode::load(&cfg.code).unwrap();
            cfg.built_channels(&code).unwrap();
        }
        assert!(matches!(
            preset("fig9"),
            Err(ExperimentError::UnknownPreset(_))
        ));
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let text = r#"
code = "bitflip3"
grid = 11

[channel_a]
type = "phase_damping"
p = 0.3

[channel_b]
type = "pauli_table"
paulis = ["XII"]
weights = [1.0]
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.code, "bitflip3");
        assert_eq!(cfg.grid, 11);
        assert_eq!(cfg.gamma_max, 1.0);
        assert_eq!(cfg.recovery, RecoverySpec::Optimal);
        assert!(ExperimentConfig::from_toml_str("grid = \"many\"").is_err());
        assert!(ExperimentConfig::from_toml_str("nonsense = 1").is_err());
    }

    #[test]
    fn pauli_robustness_on_extremal_preset_small_grid() {
        let mut cfg = preset("extremal").unwrap();
        cfg.grid = 21;
        let result = run_pauli_robustness(&cfg).unwrap();
        assert!(result.report.gamma_zero > 0.0);
        assert!(result.report.gamma_zero < 1.0);
        // Flat before the boundary.
        for s in result
            .report
            .samples
            .iter()
            .filter(|s| s.gamma < result.report.gamma_zero)
        {
            assert!(s.delta_f.abs() < 1e-12);
        }
        let summary = result.summary_csv();
        assert!(summary.contains("gamma_zero,"));
        assert!(summary.contains("gamma_delta[0.001],"));
    }

    #[test]
    fn pauli_robustness_rejects_non_pauli_input() {
        let mut cfg = preset("fig2c").unwrap();
        cfg.grid = 5;
        assert!(matches!(
            run_pauli_robustness(&cfg),
            Err(ExperimentError::Config(_))
        ));
    }

    #[test]
    fn mixing_sweep_on_bitflip_code() {
        // A cheap end-to-end run: tiny code, tiny grid.
        let cfg = ExperimentConfig {
            code: "bitflip3".to_string(),
            channel_a: Some(ChannelSpec::PauliTable {
                paulis: vec!["III".into(), "XII".into(), "IXI".into(), "IIX".into()],
                weights: vec![0.7, 0.1, 0.1, 0.1],
            }),
            channel_b: Some(ChannelSpec::AmplitudeDamping { p: 0.3 }),
            grid: 5,
            refine: false,
            ..ExperimentConfig::default()
        };
        let sweep = run_mixing(&cfg).unwrap();
        assert_eq!(sweep.rows.len(), 5);
        assert!(!sweep.any_failure);
        // Endpoint agreement between the optimal and frozen recoveries.
        let first = sweep.rows.first().unwrap();
        assert!((first.f_opt - first.f_fixed_from_0).abs() < 1e-7);
        let last = sweep.rows.last().unwrap();
        assert!((last.f_opt - last.f_fixed_from_1).abs() < 1e-7);
        // Optimal dominates both frozen recoveries everywhere.
        for r in &sweep.rows {
            assert!(r.f_opt >= r.f_fixed_from_0 - 1e-7);
            assert!(r.f_opt >= r.f_fixed_from_1 - 1e-7);
        }
        let csv = sweep.to_csv();
        assert!(csv.starts_with("gamma,f_opt,f_fixed_from_0,f_fixed_from_1,derivative_norm,status"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn fixed_recovery_terms_are_affine_in_gamma() {
        let cfg = ExperimentConfig {
            code: "bitflip3".to_string(),
            channel_a: Some(ChannelSpec::PauliTable {
                paulis: vec!["III".into(), "XII".into()],
                weights: vec![0.9, 0.1],
            }),
            channel_b: Some(ChannelSpec::AmplitudeDamping { p: 0.4 }),
            grid: 9,
            refine: false,
            ..ExperimentConfig::default()
        };
        let sweep = run_mixing(&cfg).unwrap();
        let f0 = sweep.rows.first().unwrap().f_fixed_from_0;
        let f1 = sweep.rows.last().unwrap().f_fixed_from_0;
        for r in &sweep.rows {
            let expected = f0 + (f1 - f0) * r.gamma;
            assert!(
                (r.f_fixed_from_0 - expected).abs() < 1e-9,
                "gamma {}: {} vs {}",
                r.gamma,
                r.f_fixed_from_0,
                expected
            );
        }
    }
}
