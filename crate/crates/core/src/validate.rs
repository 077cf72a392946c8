//! Randomised self-checks: closed forms against brute force, plus the
//! analytic invariants of the cell and network solvers.
//!
//! Every check reports the worst deviation it saw next to the limit it was
//! judged against, so a near miss is visible even when the property passes.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{case_bounds, direct_objective_slope, solve_case_direct, solve_cell, CellSolution, LinkPolicy};
use crate::channel::{Layout, NetworkScenario, PhysicalParams};
use crate::error::Result;
use crate::network::{golden_section, optimize, OptimizerConfig};
use crate::oracle::{cell_grid_tolerance, oracle_cell_with, oracle_network, GridSpec};
use crate::rates::{evaluate, meets_threshold, CellChannel};

/// Largest AP power drawn for random cell instances (W); the default `P_max`.
const MAX_INSTANCE_POWER: f64 = 0.36;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    pub worst: f64,
    pub limit: f64,
}

impl PropertyOutcome {
    fn from_deviations(name: &'static str, deviations: &[f64], limit: f64) -> Self {
        // NaN counts as a failure.
        let failed = |d: &f64| !(*d <= limit);
        let failures = deviations.iter().filter(|d| failed(d)).count();
        let worst = deviations
            .iter()
            .map(|d| if d.is_nan() { f64::INFINITY } else { *d })
            .fold(f64::NEG_INFINITY, f64::max);
        PropertyOutcome {
            name,
            passed: failures == 0 && !deviations.is_empty(),
            checked: deviations.len(),
            failures,
            worst,
            limit,
        }
    }
}

impl fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} worst {:.3e} (limit {:.1e}), {}/{} failed",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit,
            self.failures,
            self.checked
        )
    }
}

/// One random single-cell problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellInstance {
    pub channel: CellChannel,
    pub p_k: f64,
    pub r_th: f64,
}

impl CellInstance {
    /// SNR products `Psi * p` spread over four decades, a relay rate over
    /// three, and a QoS target up to 40% of the strong user's full-power rate.
    pub fn random(rng: &mut impl Rng, b_v: f64) -> Self {
        let p_k = rng.gen_range(0.05..MAX_INSTANCE_POWER);
        let channel = CellChannel {
            psi_s: 10f64.powf(rng.gen_range(-1.0..3.0)) / p_k,
            psi_w: 10f64.powf(rng.gen_range(-1.0..3.0)) / p_k,
            r_rf: 10f64.powf(rng.gen_range(5.0..8.0)),
            b_v,
        };
        let r_th = rng.gen_range(0.0..0.4) * channel.rate_strong(p_k);
        CellInstance { channel, p_k, r_th }
    }

    pub fn direct_feasible(&self) -> bool {
        let b = case_bounds(&self.channel, self.p_k, self.r_th);
        b.a_s <= b.c_w
    }

    /// Hybrid case feasible with a window wider than rounding noise.
    pub fn hybrid_window_open(&self) -> bool {
        let b = case_bounds(&self.channel, self.p_k, self.r_th);
        self.channel.r_rf >= self.r_th && b.b_s - b.a_bar > 1e-9 * self.p_k
    }
}

/// `count` instances accepted by `keep`, drawn from a stream seeded by `seed`.
pub fn sample_instances(seed: u64, count: usize, keep: impl Fn(&CellInstance) -> bool) -> Vec<CellInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b_v = PhysicalParams::default().b_v;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let inst = CellInstance::random(&mut rng, b_v);
        if keep(&inst) {
            out.push(inst);
        }
    }
    out
}

pub type DirectSolver = fn(&CellChannel, f64, f64) -> CellSolution;

/// Direct-link closed form against a grid sweep: deviation is the grid's
/// excess objective in units of its Lipschitz bound (limit 1). A solution
/// that breaks a QoS target or the power split counts as infinitely bad.
pub fn check_direct_optimality(instances: &[CellInstance], grid: &GridSpec, solver: DirectSolver) -> PropertyOutcome {
    let deviations: Vec<f64> = instances
        .par_iter()
        .map(|inst| {
            let ch = &inst.channel;
            let sol = solver(ch, inst.p_k, inst.r_th);
            let p_w = inst.p_k - sol.p_s;
            let valid = sol.p_s >= 0.0
                && sol.p_s <= p_w * (1.0 + 1e-12)
                && meets_threshold(ch.rate_strong(sol.p_s), inst.r_th)
                && meets_threshold(ch.rate_weak_direct(sol.p_s, p_w), inst.r_th);
            if !valid {
                return f64::INFINITY;
            }
            let closed = ch.objective(sol.p_s, p_w, false);
            match oracle_cell_with(ch, inst.p_k, inst.r_th, grid, LinkPolicy::DirectOnly) {
                Ok(best) if best.feasible => {
                    (best.cell_objective - closed) / cell_grid_tolerance(ch, inst.p_k, grid)
                }
                // the window is narrower than a grid step: nothing to compare against
                Ok(_) => 0.0,
                Err(_) => f64::NAN,
            }
        })
        .collect();
    PropertyOutcome::from_deviations("direct-split-optimality", &deviations, 1.0)
}

/// Hybrid objective sampled over its feasible window: relative standard deviation.
pub fn check_hybrid_flatness(instances: &[CellInstance], samples: usize, rtol: f64) -> PropertyOutcome {
    let deviations: Vec<f64> = instances
        .par_iter()
        .map(|inst| {
            let ch = &inst.channel;
            let b = case_bounds(ch, inst.p_k, inst.r_th);
            let values: Vec<f64> = (0..samples)
                .map(|i| {
                    let t = i as f64 / (samples - 1).max(1) as f64;
                    let p_s = b.a_bar + t * (b.b_s - b.a_bar);
                    ch.objective(p_s, inst.p_k - p_s, true)
                })
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            var.sqrt() / mean.abs()
        })
        .collect();
    PropertyOutcome::from_deviations("hybrid-objective-flatness", &deviations, rtol)
}

/// Analytic slope of the direct objective against central differences with
/// step `1e-6 p_k` at `points` interior splits. A sign mismatch counts as infinite.
pub fn check_direct_slope(instances: &[CellInstance], points: usize, rtol: f64) -> PropertyOutcome {
    let deviations: Vec<f64> = instances
        .par_iter()
        .flat_map_iter(|inst| {
            let ch = inst.channel;
            let p = inst.p_k;
            let h = 1e-6 * p;
            let f = move |x: f64| ch.objective(x, p - x, false);
            (0..points).map(move |i| {
                let p_s = 0.5 * p * (i as f64 + 0.5) / points as f64;
                let analytic = direct_objective_slope(&ch, p_s);
                let numeric = (f(p_s + h) - f(p_s - h)) / (2.0 * h);
                if analytic.signum() != numeric.signum() {
                    f64::INFINITY
                } else {
                    (numeric - analytic).abs() / analytic.abs()
                }
            })
        })
        .collect();
    PropertyOutcome::from_deviations("direct-slope-sign", &deviations, rtol)
}

/// At `P_s = eta` the strong user's rate equals the weak message's rate at the strong user.
pub fn check_eta_equal_rates(instances: &[CellInstance], rtol: f64) -> PropertyOutcome {
    let deviations: Vec<f64> = instances
        .iter()
        .map(|inst| {
            let ch = &inst.channel;
            let eta = case_bounds(ch, inst.p_k, inst.r_th).eta;
            if !(eta > 0.0 && eta < 0.5 * inst.p_k) {
                return f64::INFINITY;
            }
            let r_s = ch.rate_strong(eta);
            (r_s - ch.rate_weak_at_strong(eta, inst.p_k - eta)).abs() / r_s
        })
        .collect();
    PropertyOutcome::from_deviations("eta-equal-rates", &deviations, rtol)
}

/// Each window end sits exactly on the constraint it comes from.
pub fn check_window_endpoints(instances: &[CellInstance], rtol: f64) -> PropertyOutcome {
    let mut deviations = Vec::new();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    for inst in instances {
        let ch = &inst.channel;
        let p = inst.p_k;
        let b = case_bounds(ch, p, inst.r_th);
        if inst.r_th > 0.0 && b.a_s > 0.0 {
            deviations.push(rel(ch.rate_strong(b.a_s), inst.r_th));
        }
        if b.c_w > 0.0 && b.c_w < 0.5 * p {
            deviations.push(rel(ch.rate_weak_direct(b.c_w, p - b.c_w), inst.r_th));
        }
        if b.b_s > 0.0 && b.b_s < 0.5 * p {
            deviations.push(rel(ch.rate_weak_at_strong(b.b_s, p - b.b_s), inst.r_th));
        }
        if b.rf_bound > 0.0 && b.rf_bound < 0.5 * p {
            deviations.push(rel(ch.rate_weak_at_strong(b.rf_bound, p - b.rf_bound), ch.r_rf));
        }
    }
    PropertyOutcome::from_deviations("window-endpoints", &deviations, rtol)
}

/// Full cell solver (both links) against the grid sweep of both links.
pub fn check_cell_selection(instances: &[CellInstance], grid: &GridSpec) -> PropertyOutcome {
    let deviations: Vec<f64> = instances
        .par_iter()
        .map(|inst| {
            let ch = &inst.channel;
            let sol = solve_cell(ch, inst.p_k, inst.r_th);
            let Ok(best) = oracle_cell_with(ch, inst.p_k, inst.r_th, grid, LinkPolicy::Cooperative) else {
                return f64::NAN;
            };
            if best.feasible && !sol.feasible {
                return f64::INFINITY;
            }
            if !best.feasible {
                return 0.0;
            }
            let closed = ch.objective(sol.p_s, sol.p_w, sol.is_hybrid());
            (best.cell_objective - closed) / cell_grid_tolerance(ch, inst.p_k, grid)
        })
        .collect();
    PropertyOutcome::from_deviations("cell-selection-vs-oracle", &deviations, 1.0)
}

/// Golden section on random concave quadratics: distance to the vertex, and
/// exactly two evaluations per iteration (a miscount is infinite).
pub fn check_golden_section(seed: u64, count: usize, epsilon: f64) -> PropertyOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deviations: Vec<f64> = (0..count)
        .map(|_| {
            let lo = rng.gen_range(-10.0..0.0);
            let hi = rng.gen_range(0.0..10.0);
            let vertex = rng.gen_range(lo..hi);
            let curvature = rng.gen_range(0.1..10.0);
            match golden_section(|x: f64| -curvature * (x - vertex).powi(2), lo, hi, epsilon) {
                Ok(s) if s.evaluations == 2 * s.iterations => (s.argmax - vertex).abs(),
                _ => f64::INFINITY,
            }
        })
        .collect();
    PropertyOutcome::from_deviations("golden-section-quadratic", &deviations, epsilon)
}

/// Random small networks: worst sum-rate drop along the optimizer trace
/// while the number of feasible cells is unchanged (relative), plus the
/// report agreeing with an independent evaluation of the returned state.
pub fn check_optimizer_monotone(seed: u64, networks: usize) -> Result<PropertyOutcome> {
    let layout = Layout::grid(3, 3);
    let config = OptimizerConfig {
        max_rounds: 6,
        ..Default::default()
    };
    let mut deviations = Vec::new();
    for i in 0..networks as u64 {
        let mut params = PhysicalParams::default();
        // alternate between the noise-limited default and an interference-limited network
        if i % 2 == 1 {
            params.n_v *= 0.1;
        }
        let scenario = NetworkScenario::generate(&layout, &params, 0.9, seed.wrapping_add(i))?;
        let r_th = 1e6;
        let out = optimize(&scenario, r_th, &config)?;
        let mut prev = (out.trace.initial_feasible_cells, out.trace.initial_sum_rate);
        let mut worst: f64 = 0.0;
        for r in &out.trace.records {
            if r.feasible_cells < prev.0 {
                worst = f64::INFINITY;
            } else if r.feasible_cells == prev.0 {
                worst = worst.max((prev.1 - r.sum_rate) / prev.1);
            }
            prev = (r.feasible_cells, r.sum_rate);
        }
        let check = evaluate(&scenario, &out.state, r_th)?;
        if (check.sum_rate - out.report.sum_rate).abs() > 1e-12 * check.sum_rate
            || out.trace.golden_evaluations != 2 * out.trace.golden_iterations
        {
            worst = f64::INFINITY;
        }
        deviations.push(worst);
    }
    Ok(PropertyOutcome::from_deviations("optimizer-monotone", &deviations, 0.0))
}

/// Two-AP networks: shortfall of the optimizer relative to an exhaustive
/// power sweep, `1 - optimized / oracle`.
pub fn check_network_oracle_gap(seed: u64, networks: usize, min_ratio: f64) -> Result<PropertyOutcome> {
    let layout = Layout::grid(1, 2);
    let params = PhysicalParams::default();
    let config = OptimizerConfig {
        max_rounds: 6,
        ..Default::default()
    };
    let mut deviations = Vec::new();
    for i in 0..networks as u64 {
        let scenario = NetworkScenario::generate(&layout, &params, 0.9, seed.wrapping_add(i))?;
        let r_th = 1e6;
        let out = optimize(&scenario, r_th, &config)?;
        let best = oracle_network(&scenario, r_th, &GridSpec::new(24), &GridSpec::new(2001), LinkPolicy::Cooperative)?;
        if best.score.feasible_cells > out.report.n_feasible() {
            deviations.push(f64::INFINITY);
        } else {
            deviations.push(1.0 - out.report.sum_rate / best.score.sum_rate);
        }
    }
    Ok(PropertyOutcome::from_deviations(
        "optimizer-vs-network-oracle",
        &deviations,
        1.0 - min_ratio,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Random cell instances per cell-level property.
    pub instances: usize,
    pub cell_grid: GridSpec,
    /// Random networks for the optimizer properties.
    pub networks: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: 1,
            instances: 1000,
            cell_grid: GridSpec::CELL_DEFAULT,
            networks: 6,
        }
    }
}

/// The full suite at the default tolerances.
pub fn run_validation(config: &ValidationConfig) -> Result<Vec<PropertyOutcome>> {
    let n = config.instances;
    let s = config.seed;
    let any = sample_instances(s, n, |_| true);
    let direct = sample_instances(s.wrapping_add(1), n, CellInstance::direct_feasible);
    let hybrid = sample_instances(s.wrapping_add(2), n, CellInstance::hybrid_window_open);
    let sloped = sample_instances(s.wrapping_add(3), n, |i| {
        (i.channel.psi_s / i.channel.psi_w).ln().abs() > 1.2f64.ln()
    });
    Ok(vec![
        check_direct_optimality(&direct, &config.cell_grid, solve_case_direct),
        check_hybrid_flatness(&hybrid, 100, 1e-12),
        check_direct_slope(&sloped, 100, 1e-4),
        check_eta_equal_rates(&any, 1e-9),
        check_window_endpoints(&any, 1e-9),
        check_cell_selection(&any, &config.cell_grid),
        check_golden_section(s, n, 1e-6),
        check_optimizer_monotone(s, config.networks)?,
        check_network_oracle_gap(s, config.networks, 0.95)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible_and_filtered() {
        let a = sample_instances(9, 50, CellInstance::direct_feasible);
        let b = sample_instances(9, 50, CellInstance::direct_feasible);
        assert_eq!(a, b);
        assert!(a.iter().all(CellInstance::direct_feasible));
        assert_ne!(a, sample_instances(10, 50, CellInstance::direct_feasible));
    }

    #[test]
    fn outcome_treats_nan_as_failure() {
        let o = PropertyOutcome::from_deviations("x", &[0.1, f64::NAN], 1.0);
        assert!(!o.passed);
        assert_eq!(o.failures, 1);
        assert_eq!(o.worst, f64::INFINITY);
        assert!(!PropertyOutcome::from_deviations("x", &[], 1.0).passed);
    }

    #[test]
    fn small_suite_passes() {
        let config = ValidationConfig {
            seed: 3,
            instances: 60,
            cell_grid: GridSpec::new(5000),
            networks: 2,
        };
        for outcome in run_validation(&config).unwrap() {
            assert!(outcome.passed, "{outcome}");
        }
    }
}
