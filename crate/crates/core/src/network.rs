//! Sequential per-AP transmit power optimization.
//!
//! Starting from every AP at full power, APs are visited from the strongest
//! interferer to the weakest. Each visit runs a golden-section search on that
//! AP's power while all other powers stay fixed; every candidate is scored by
//! re-solving all cells in closed form. A candidate replaces the current power
//! only if the network objective does not drop, so the objective trace is
//! monotone even where the objective is not unimodal in one AP's power.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cell::{solve_all, CellSolution, LinkPolicy};
use crate::channel::NetworkScenario;
use crate::error::{invalid, Error, Result};
use crate::rates::{
    coefficients_with_relay, relay_rates, report_from_coefficients, CellChannel, CellCoefficients,
    PowerState, RateReport,
};

/// Bracket ratio of the golden-section search.
pub const THETA: f64 = 1.618;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Stop shrinking a golden-section bracket once it is this narrow (W).
    pub epsilon: f64,
    /// Upper limit on full passes over all APs.
    pub max_rounds: usize,
    pub theta: f64,
    pub track_history: bool,
    /// Restart each search from `P_max` instead of the AP's current power.
    pub reset_upper_bound: bool,
    pub link_policy: LinkPolicy,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_rounds: 3,
            theta: THETA,
            track_history: true,
            reset_upper_bound: false,
            link_policy: LinkPolicy::Cooperative,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        if self.theta != THETA {
            return Err(invalid("theta", format!("is fixed at {THETA}, got {}", self.theta)));
        }
        Ok(())
    }
}

/// Network objective ordered lexicographically: a configuration meeting more
/// cells' constraints always wins, and among fully feasible configurations
/// the sum-rate decides.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Score {
    pub feasible_cells: usize,
    pub sum_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub ap: usize,
    pub p_k: f64,
    pub sum_rate: f64,
    pub feasible_cells: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub initial_sum_rate: f64,
    pub initial_feasible_cells: usize,
    /// One record per AP update, after the accept/reject decision.
    pub records: Vec<TraceRecord>,
    pub rounds_completed: usize,
    /// True when a full pass moved no AP power by more than epsilon.
    pub converged: bool,
    pub golden_iterations: usize,
    pub golden_evaluations: usize,
    /// Evaluations of the final golden-section midpoint, one per AP update.
    pub acceptance_evaluations: usize,
}

impl ConvergenceTrace {
    pub fn sum_rates(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.initial_sum_rate).chain(self.records.iter().map(|r| r.sum_rate))
    }

    pub fn final_sum_rate(&self) -> f64 {
        self.records.last().map_or(self.initial_sum_rate, |r| r.sum_rate)
    }

    /// First AP iteration after which the sum-rate stays within `rtol` of its
    /// final value; 0 if the initial allocation already is.
    pub fn converged_iteration(&self, rtol: f64) -> usize {
        let last = self.final_sum_rate();
        let rates: Vec<f64> = self.sum_rates().collect();
        rates
            .iter()
            .rposition(|v| (last - v).abs() > rtol * last.abs())
            .map_or(0, |i| i + 1)
    }

    /// CSV with columns `iteration,ap,p_k,sum_rate`; iteration 0 is the
    /// full-power starting point and has empty `ap` and `p_k` fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "ap", "p_k", "sum_rate"])?;
        w.write_record(["0", "", "", &self.initial_sum_rate.to_string()])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.ap.to_string(),
                r.p_k.to_string(),
                r.sum_rate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Smallest AP power meeting both users' QoS on the direct link, capped at `p_max`.
pub fn p_min(ch: &CellChannel, r_th: f64, p_max: f64) -> f64 {
    let a = (2.0 * r_th / ch.b_v).exp2();
    if a <= 1.0 {
        return 0.0;
    }
    ((a * a - a) / ch.psi_s + (a - 1.0) / ch.psi_w).min(p_max)
}

/// Cells ordered by the interference their AP causes to other cells' users,
/// `p_k * sum over foreign users of h^2`, largest first; ties keep index order.
pub fn interference_rank(scenario: &NetworkScenario, p: &[f64]) -> Vec<usize> {
    let n = scenario.n_cells();
    let scores: Vec<f64> = (0..n)
        .map(|k| {
            let leak: f64 = (0..n)
                .filter(|u| *u != k)
                .map(|u| scenario.h_strong[u][k].powi(2) + scenario.h_weak[u][k].powi(2))
                .sum();
            p[k] * leak
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap_or(Ordering::Equal));
    order
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenSearch<T> {
    /// Midpoint of the final bracket.
    pub argmax: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best interior point evaluated during the search, if any.
    pub best: Option<(f64, T)>,
}

/// Golden-section maximization of `objective` on `[lo, hi]`.
///
/// Each iteration evaluates both interior points `a = (theta-1) lo + (2-theta) hi`
/// and `b = (2-theta) lo + (theta-1) hi`, then keeps `[lo, b]` if `f(a) > f(b)`,
/// `[a, hi]` if `f(a) < f(b)` and `[a, b]` on a tie. Returns the midpoint of the
/// final bracket, which is within `epsilon` of the maximizer for unimodal
/// objectives. For other objectives the midpoint carries no guarantee; the
/// best evaluated interior point is reported alongside for callers to compare.
pub fn golden_section<T, F>(mut objective: F, lo: f64, hi: f64, epsilon: f64) -> Result<GoldenSearch<T>>
where
    T: PartialOrd + Clone,
    F: FnMut(f64) -> T,
{
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::EmptyInterval { lo, hi });
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be > 0"));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    let mut best: Option<(f64, T)> = None;
    let mut keep_best = |x: f64, v: &T| {
        if best.as_ref().is_none_or(|(_, b)| v > b) {
            best = Some((x, v.clone()));
        }
    };
    while hi - lo > epsilon {
        let a = (THETA - 1.0) * lo + (2.0 - THETA) * hi;
        let b = (2.0 - THETA) * lo + (THETA - 1.0) * hi;
        let fa = objective(a);
        let fb = objective(b);
        iterations += 1;
        keep_best(a, &fa);
        keep_best(b, &fb);
        let (new_lo, new_hi) = match fa.partial_cmp(&fb) {
            Some(Ordering::Greater) => (lo, b),
            Some(Ordering::Less) => (a, hi),
            _ => (a, b),
        };
        if new_hi - new_lo >= hi - lo {
            // bracket stopped shrinking at floating-point resolution
            lo = new_lo;
            hi = new_hi;
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }
    Ok(GoldenSearch {
        argmax: 0.5 * (lo + hi),
        lo,
        hi,
        iterations,
        evaluations: 2 * iterations,
        best,
    })
}

/// Scores AP power vectors by solving every cell in closed form.
pub struct NetworkEvaluator<'a> {
    scenario: &'a NetworkScenario,
    r_rf: Vec<f64>,
    r_th: f64,
    policy: LinkPolicy,
    p_max: f64,
}

pub struct Evaluation {
    pub score: Score,
    pub coefficients: CellCoefficients,
    pub cells: Vec<CellSolution>,
}

impl<'a> NetworkEvaluator<'a> {
    pub fn new(scenario: &'a NetworkScenario, r_th: f64, policy: LinkPolicy) -> Result<Self> {
        scenario.validate()?;
        if !(r_th.is_finite() && r_th >= 0.0) {
            return Err(invalid("r_th", format!("must be finite and >= 0, got {r_th}")));
        }
        Ok(Self {
            scenario,
            r_rf: relay_rates(scenario)?,
            r_th,
            policy,
            p_max: scenario.params.p_max(),
        })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn coefficients(&self, p: &[f64]) -> Result<CellCoefficients> {
        coefficients_with_relay(self.scenario, p, self.r_rf.clone())
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<Evaluation> {
        let coefficients = self.coefficients(p)?;
        let cells = solve_all(&coefficients, p, self.r_th, self.policy);
        let mut score = Score {
            feasible_cells: 0,
            sum_rate: 0.0,
        };
        for c in &cells {
            score.sum_rate += c.cell_objective;
            score.feasible_cells += c.feasible as usize;
        }
        Ok(Evaluation {
            score,
            coefficients,
            cells,
        })
    }

    pub fn score(&self, p: &[f64]) -> Result<Score> {
        Ok(self.evaluate(p)?.score)
    }

    /// Power state and rate report for the cell solutions of `eval`.
    pub fn finish(&self, p: &[f64], eval: &Evaluation) -> (PowerState, RateReport) {
        let state = PowerState {
            p: p.to_vec(),
            p_s: eval.cells.iter().map(|c| c.p_s).collect(),
            p_w: eval.cells.iter().map(|c| c.p_w).collect(),
            x: eval.cells.iter().map(|c| c.x).collect(),
        };
        let report = report_from_coefficients(&eval.coefficients, &state, self.r_th, self.p_max);
        (state, report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    pub state: PowerState,
    pub report: RateReport,
    pub trace: ConvergenceTrace,
}

/// Closed-form cell solutions with every AP at full power.
pub fn solve_at_full_power(
    scenario: &NetworkScenario,
    r_th: f64,
    policy: LinkPolicy,
) -> Result<(PowerState, RateReport)> {
    let evaluator = NetworkEvaluator::new(scenario, r_th, policy)?;
    let p = vec![evaluator.p_max(); scenario.n_cells()];
    let eval = evaluator.evaluate(&p)?;
    Ok(evaluator.finish(&p, &eval))
}

/// Jointly choose AP powers, power splits and links.
pub fn optimize(scenario: &NetworkScenario, r_th: f64, config: &OptimizerConfig) -> Result<Optimization> {
    config.validate()?;
    let evaluator = NetworkEvaluator::new(scenario, r_th, config.link_policy)?;
    let n = scenario.n_cells();
    let p_max = evaluator.p_max();
    let mut p = vec![p_max; n];
    let mut current = evaluator.evaluate(&p)?;
    let mut trace = ConvergenceTrace {
        initial_sum_rate: current.score.sum_rate,
        initial_feasible_cells: current.score.feasible_cells,
        ..Default::default()
    };
    let mut iteration = 0;
    let mut candidate_p = p.clone();

    for _ in 0..config.max_rounds {
        let mut largest_move: f64 = 0.0;
        for k in interference_rank(scenario, &p) {
            iteration += 1;
            let floor = p_min(&current.coefficients.cell(k), r_th, p_max);
            let hi = if config.reset_upper_bound { p_max } else { p[k] };
            let lo = floor.min(hi);

            candidate_p.copy_from_slice(&p);
            let mut failure = None;
            let search = golden_section(
                |x| {
                    candidate_p[k] = x;
                    match evaluator.score(&candidate_p) {
                        Ok(s) => s,
                        Err(e) => {
                            failure.get_or_insert(e);
                            Score {
                                feasible_cells: 0,
                                sum_rate: f64::NEG_INFINITY,
                            }
                        }
                    }
                },
                lo,
                hi,
                config.epsilon,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            trace.golden_iterations += search.iterations;
            trace.golden_evaluations += search.evaluations;

            candidate_p[k] = search.argmax;
            let mut proposal = evaluator.evaluate(&candidate_p)?;
            trace.acceptance_evaluations += 1;
            let mut proposed_power = search.argmax;
            if let Some((x, best)) = search.best {
                if best > proposal.score {
                    candidate_p[k] = x;
                    proposal = evaluator.evaluate(&candidate_p)?;
                    trace.acceptance_evaluations += 1;
                    proposed_power = x;
                }
            }

            if proposal.score >= current.score {
                largest_move = largest_move.max((proposed_power - p[k]).abs());
                p[k] = proposed_power;
                current = proposal;
            }
            if config.track_history {
                trace.records.push(TraceRecord {
                    iteration,
                    ap: k,
                    p_k: p[k],
                    sum_rate: current.score.sum_rate,
                    feasible_cells: current.score.feasible_cells,
                });
            }
        }
        trace.rounds_completed += 1;
        if largest_move <= config.epsilon {
            trace.converged = true;
            break;
        }
    }

    let (state, report) = evaluator.finish(&p, &current);
    Ok(Optimization { state, report, trace })
}
