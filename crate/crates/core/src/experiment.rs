//! Monte-Carlo experiments over random user drops.
//!
//! Drop `i` of every sweep point uses seed `base_seed + i`, so different
//! schemes and different sweep values see paired user placements.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::LinkPolicy;
use crate::channel::{Layout, NetworkScenario, PhysicalParams};
use crate::error::{invalid, Error, Result};
use crate::network::{optimize, solve_at_full_power, ConvergenceTrace, Optimization, OptimizerConfig};

/// z-value of a two-sided 95% normal confidence interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Link selection with optimized AP powers.
    #[serde(rename = "conoma-opt")]
    ConomaOpt,
    /// Link selection with every AP at full power.
    #[serde(rename = "conoma-fixed")]
    ConomaFixed,
    /// Direct links only, optimized AP powers.
    #[serde(rename = "noma-opt")]
    NomaOpt,
    /// Direct links only, full power.
    #[serde(rename = "noma-fixed")]
    NomaFixed,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::ConomaOpt,
        Scheme::ConomaFixed,
        Scheme::NomaOpt,
        Scheme::NomaFixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ConomaOpt => "conoma-opt",
            Scheme::ConomaFixed => "conoma-fixed",
            Scheme::NomaOpt => "noma-opt",
            Scheme::NomaFixed => "noma-fixed",
        }
    }

    pub fn link_policy(self) -> LinkPolicy {
        match self {
            Scheme::ConomaOpt | Scheme::ConomaFixed => LinkPolicy::Cooperative,
            Scheme::NomaOpt | Scheme::NomaFixed => LinkPolicy::DirectOnly,
        }
    }

    pub fn optimizes_power(self) -> bool {
        matches!(self, Scheme::ConomaOpt | Scheme::NomaOpt)
    }

    /// Whether this scheme's sum-rate can never fall below `other`'s on the
    /// same drop when both end fully feasible.
    pub fn dominates(self, other: Scheme) -> bool {
        use Scheme::*;
        matches!(
            (self, other),
            (ConomaOpt, ConomaFixed) | (ConomaOpt, NomaFixed) | (ConomaFixed, NomaFixed) | (NomaOpt, NomaFixed)
        )
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Solve one scenario under `scheme`. Fixed-power schemes return an empty trace.
pub fn solve_scheme(
    scenario: &NetworkScenario,
    r_th: f64,
    scheme: Scheme,
    optimizer: &OptimizerConfig,
) -> Result<Optimization> {
    if scheme.optimizes_power() {
        let config = OptimizerConfig {
            link_policy: scheme.link_policy(),
            ..optimizer.clone()
        };
        optimize(scenario, r_th, &config)
    } else {
        let (state, report) = solve_at_full_power(scenario, r_th, scheme.link_policy())?;
        let trace = ConvergenceTrace {
            initial_sum_rate: report.sum_rate,
            initial_feasible_cells: report.n_feasible(),
            converged: true,
            ..Default::default()
        };
        Ok(Optimization { state, report, trace })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "r_th")]
    RTh,
    #[serde(rename = "alpha")]
    Alpha,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Geometry, physics and the value of whichever axis is not swept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioTemplate {
    pub layout: Layout,
    pub params: PhysicalParams,
    pub alpha: f64,
    /// QoS target for every user (bit/s).
    pub r_th: f64,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        Self {
            layout: Layout::default(),
            params: PhysicalParams::default(),
            alpha: 0.7,
            r_th: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub sweep: Sweep,
    pub drops: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub template: ScenarioTemplate,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.drops == 0 {
            return Err(invalid("drops", "need at least one drop"));
        }
        if self.sweep.values.is_empty() {
            return Err(invalid("sweep.values", "sweep is empty"));
        }
        if self.sweep.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("sweep.values", "must be strictly increasing"));
        }
        for &v in &self.sweep.values {
            let (alpha, r_th) = self.point(v);
            check_alpha(alpha)?;
            check_r_th(r_th)?;
        }
        self.template.layout.validate()?;
        self.template.params.validate()?;
        self.optimizer.validate()
    }

    /// `(alpha, r_th)` at sweep value `v`.
    pub fn point(&self, v: f64) -> (f64, f64) {
        match self.sweep.axis {
            SweepAxis::Alpha => (v, self.template.r_th),
            SweepAxis::RTh => (self.template.alpha, v),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_r_th(r_th: f64) -> Result<()> {
    if !(r_th.is_finite() && r_th >= 0.0) {
        return Err(invalid("r_th", format!("must be finite and >= 0, got {r_th}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub sweep_value: f64,
    pub seed: u64,
    pub sum_rate: f64,
    pub jain: f64,
    /// Share of cells relaying the weak user over RF.
    pub x1_fraction: f64,
    /// Share of cells missing a QoS target.
    pub infeasible_fraction: f64,
    pub ap_iterations: usize,
    pub rounds: usize,
    pub converged: bool,
    /// Network evaluations spent by the power search (0 at fixed power).
    pub network_evaluations: usize,
}

impl DropRecord {
    pub fn feasible(&self) -> bool {
        self.infeasible_fraction == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_sum_rate: f64,
    pub ci_sum_rate: f64,
    pub mean_jain: f64,
    pub ci_jain: f64,
    pub x1_fraction: f64,
    pub infeasible_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scheme: Scheme,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Raw per-drop records, grouped by sweep value in sweep order.
    pub drops: Vec<DropRecord>,
}

impl ExperimentResult {
    pub fn drops_at(&self, value: f64) -> impl Iterator<Item = &DropRecord> {
        self.drops.iter().filter(move |d| d.sweep_value == value)
    }
}

/// Sample mean and normal-approximation 95% half-width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z_95 * (var / n as f64).sqrt())
}

/// Build, solve and score one drop.
pub fn run_drop(
    template: &ScenarioTemplate,
    scheme: Scheme,
    alpha: f64,
    r_th: f64,
    seed: u64,
    optimizer: &OptimizerConfig,
) -> Result<(NetworkScenario, Optimization)> {
    let scenario = NetworkScenario::generate(&template.layout, &template.params, alpha, seed)?;
    let solved = solve_scheme(&scenario, r_th, scheme, optimizer)?;
    Ok((scenario, solved))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.sweep.values.len());
    let mut drops = Vec::with_capacity(config.sweep.values.len() * config.drops);
    for &value in &config.sweep.values {
        let (alpha, r_th) = config.point(value);
        let records = (0..config.drops)
            .into_par_iter()
            .map(|i| {
                let seed = config.base_seed.wrapping_add(i as u64);
                let (_, solved) = run_drop(&config.template, config.scheme, alpha, r_th, seed, &config.optimizer)?;
                let n = solved.state.n_cells() as f64;
                Ok(DropRecord {
                    sweep_value: value,
                    seed,
                    sum_rate: solved.report.sum_rate,
                    jain: solved.report.jain,
                    x1_fraction: solved.state.x.iter().filter(|x| **x == 1).count() as f64 / n,
                    infeasible_fraction: solved.report.feasible.iter().filter(|f| !**f).count() as f64 / n,
                    ap_iterations: solved.trace.records.len(),
                    rounds: solved.trace.rounds_completed,
                    converged: solved.trace.converged,
                    network_evaluations: solved.trace.golden_evaluations + solved.trace.acceptance_evaluations,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(aggregate(value, &records));
        drops.extend(records);
    }
    Ok(ExperimentResult {
        scheme: config.scheme,
        axis: config.sweep.axis,
        points,
        drops,
    })
}

fn aggregate(value: f64, records: &[DropRecord]) -> SweepPoint {
    let column = |f: fn(&DropRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let (mean_sum_rate, ci_sum_rate) = mean_ci(&column(|d| d.sum_rate));
    let (mean_jain, ci_jain) = mean_ci(&column(|d| d.jain));
    let (x1_fraction, _) = mean_ci(&column(|d| d.x1_fraction));
    let (infeasible_fraction, _) = mean_ci(&column(|d| d.infeasible_fraction));
    SweepPoint {
        value,
        mean_sum_rate,
        ci_sum_rate,
        mean_jain,
        ci_jain,
        x1_fraction,
        infeasible_fraction,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub baseline: Scheme,
    pub delta_sum_rate: f64,
    pub delta_jain: f64,
}

/// A paired drop on which a scheme expected to dominate fell behind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceViolation {
    pub sweep_value: f64,
    pub seed: u64,
    pub expected_better: Scheme,
    pub expected_worse: Scheme,
    pub better_sum_rate: f64,
    pub worse_sum_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub violations: Vec<DominanceViolation>,
}

/// Relative slack when checking per-drop dominance.
pub const DOMINANCE_RTOL: f64 = 1e-12;

/// Deltas of every result against the first, plus per-drop dominance checks
/// between every pair for which [`Scheme::dominates`] holds.
pub fn compare_schemes(results: &[ExperimentResult]) -> Result<Comparison> {
    let Some(baseline) = results.first() else {
        return Err(Error::Config("no experiment results to compare".into()));
    };
    let values: Vec<f64> = baseline.points.iter().map(|p| p.value).collect();
    for r in results {
        let other: Vec<f64> = r.points.iter().map(|p| p.value).collect();
        if r.axis != baseline.axis || other != values {
            return Err(Error::Config(format!(
                "{} was run on a different sweep than {}",
                r.scheme, baseline.scheme
            )));
        }
    }
    let mut comparison = Comparison::default();
    for r in results {
        for (p, b) in r.points.iter().zip(&baseline.points) {
            comparison.rows.push(ComparisonRow {
                sweep_value: p.value,
                scheme: r.scheme,
                baseline: baseline.scheme,
                delta_sum_rate: p.mean_sum_rate - b.mean_sum_rate,
                delta_jain: p.mean_jain - b.mean_jain,
            });
        }
    }
    for better in results {
        for worse in results {
            if !better.scheme.dominates(worse.scheme) {
                continue;
            }
            for (hi, lo) in better.drops.iter().zip(&worse.drops) {
                debug_assert_eq!((hi.sweep_value, hi.seed), (lo.sweep_value, lo.seed));
                let slack = DOMINANCE_RTOL * lo.sum_rate.abs();
                if hi.feasible() && lo.feasible() && hi.sum_rate < lo.sum_rate - slack {
                    comparison.violations.push(DominanceViolation {
                        sweep_value: hi.sweep_value,
                        seed: hi.seed,
                        expected_better: better.scheme,
                        expected_worse: worse.scheme,
                        better_sum_rate: hi.sum_rate,
                        worse_sum_rate: lo.sum_rate,
                    });
                }
            }
        }
    }
    Ok(comparison)
}

/// Which metric a per-figure CSV reports its confidence interval for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    SumRate,
    Jain,
}

/// One figure's CSV: `sweep_value,scheme,mean_sum_rate,mean_jain,ci,x1_fraction,infeasible_fraction`.
pub fn write_figure_csv<W: Write>(out: W, results: &[ExperimentResult], metric: Metric) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_value",
        "scheme",
        "mean_sum_rate",
        "mean_jain",
        "ci",
        "x1_fraction",
        "infeasible_fraction",
    ])?;
    for r in results {
        for p in &r.points {
            let ci = match metric {
                Metric::SumRate => p.ci_sum_rate,
                Metric::Jain => p.ci_jain,
            };
            w.write_record([
                p.value.to_string(),
                r.scheme.to_string(),
                p.mean_sum_rate.to_string(),
                p.mean_jain.to_string(),
                ci.to_string(),
                p.x1_fraction.to_string(),
                p.infeasible_fraction.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
