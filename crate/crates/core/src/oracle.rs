//! Brute-force reference solvers.
//!
//! These sweep grids using nothing but the rate expressions, so they share no
//! code path with the closed-form cell solver or the golden-section loop.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{CellSolution, LinkPolicy};
use crate::channel::NetworkScenario;
use crate::error::{invalid, Error, Result};
use crate::network::{p_min, Score};
use crate::rates::{
    coefficients_with_relay, meets_threshold, relay_rates, CellChannel, PowerState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
}

impl GridSpec {
    pub const CELL_DEFAULT: GridSpec = GridSpec {
        points_per_axis: 100_000,
    };
    pub const NETWORK_DEFAULT: GridSpec = GridSpec { points_per_axis: 64 };

    pub fn new(points_per_axis: usize) -> Self {
        Self { points_per_axis }
    }

    /// Point `i` of an evenly spaced grid on `[lo, hi]`; a one-point grid is `{hi}`.
    fn point(&self, i: usize, lo: f64, hi: f64) -> f64 {
        if self.points_per_axis <= 1 || i + 1 == self.points_per_axis {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (self.points_per_axis - 1) as f64
        }
    }
}

/// Upper bound on how far the best grid point of `[0, p_k/2]` can fall below
/// the true cell optimum: Lipschitz constant of the cell objective in `P_s`
/// times the grid step.
pub fn cell_grid_tolerance(ch: &CellChannel, p_k: f64, grid: &GridSpec) -> f64 {
    let step = 0.5 * p_k / (grid.points_per_axis.max(2) - 1) as f64;
    ch.b_v / (2.0 * LN_2) * (2.0 * ch.psi_s + ch.psi_w) * step
}

/// Exhaustive sweep of `P_s` over `[0, p_k/2]` for both link choices.
pub fn oracle_cell(ch: &CellChannel, p_k: f64, r_th: f64, grid: &GridSpec) -> Result<CellSolution> {
    oracle_cell_with(ch, p_k, r_th, grid, LinkPolicy::Cooperative)
}

pub fn oracle_cell_with(
    ch: &CellChannel,
    p_k: f64,
    r_th: f64,
    grid: &GridSpec,
    policy: LinkPolicy,
) -> Result<CellSolution> {
    if grid.points_per_axis < 2 {
        return Err(invalid("points_per_axis", "cell grids need at least 2 points"));
    }
    let links: &[bool] = match policy {
        LinkPolicy::Cooperative => &[false, true],
        LinkPolicy::DirectOnly => &[false],
    };
    let mut best_feasible: Option<CellSolution> = None;
    let mut best_effort: Option<(f64, CellSolution)> = None;
    for &hybrid in links {
        for i in 0..grid.points_per_axis {
            let p_s = grid.point(i, 0.0, 0.5 * p_k);
            let p_w = p_k - p_s;
            let strong = ch.rate_strong(p_s);
            let weak = if hybrid {
                ch.rate_weak_at_strong(p_s, p_w).min(ch.r_rf)
            } else {
                ch.rate_weak_direct(p_s, p_w)
            };
            let feasible = meets_threshold(strong, r_th) && meets_threshold(weak, r_th);
            let candidate = CellSolution {
                p_s,
                p_w,
                x: hybrid as u8,
                cell_objective: strong + weak,
                feasible,
            };
            if feasible {
                if best_feasible.is_none_or(|b| candidate.cell_objective > b.cell_objective) {
                    best_feasible = Some(candidate);
                }
            } else {
                let worst = strong.min(weak);
                if best_effort.is_none_or(|(w, _)| worst > w) {
                    best_effort = Some((worst, candidate));
                }
            }
        }
    }
    Ok(best_feasible
        .or(best_effort.map(|(_, s)| s))
        .expect("grid has at least two points"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkOracle {
    pub state: PowerState,
    pub score: Score,
    pub grid_points_evaluated: usize,
}

pub const MAX_ORACLE_CELLS: usize = 3;

/// Exhaustive sweep of AP powers over `[p_min, P_max]^N`, each point solved
/// per cell by [`oracle_cell_with`]. `p_min` is taken at zero interference,
/// the smallest it can be anywhere in the sweep.
pub fn oracle_network(
    scenario: &NetworkScenario,
    r_th: f64,
    power_grid: &GridSpec,
    cell_grid: &GridSpec,
    policy: LinkPolicy,
) -> Result<NetworkOracle> {
    let n = scenario.n_cells();
    if n > MAX_ORACLE_CELLS {
        return Err(Error::InvalidScenario(format!(
            "network oracle supports at most {MAX_ORACLE_CELLS} cells, got {n}"
        )));
    }
    if power_grid.points_per_axis == 0 {
        return Err(invalid("points_per_axis", "power grid needs at least 1 point"));
    }
    let p_max = scenario.params.p_max();
    let r_rf = relay_rates(scenario)?;
    let quiet = coefficients_with_relay(scenario, &vec![0.0; n], r_rf.clone())?;
    let floors: Vec<f64> = (0..n).map(|k| p_min(&quiet.cell(k), r_th, p_max)).collect();

    let points = power_grid.points_per_axis;
    let total = points.pow(n as u32);
    let powers_at = |mut index: usize| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let i = index % points;
                index /= points;
                power_grid.point(i, floors[k], p_max)
            })
            .collect()
    };

    let best = (0..total)
        .into_par_iter()
        .map(|index| -> Result<(usize, Score, Vec<f64>, Vec<CellSolution>)> {
            let p = powers_at(index);
            let coef = coefficients_with_relay(scenario, &p, r_rf.clone())?;
            let cells = (0..n)
                .map(|k| oracle_cell_with(&coef.cell(k), p[k], r_th, cell_grid, policy))
                .collect::<Result<Vec<_>>>()?;
            let mut score = Score {
                feasible_cells: 0,
                sum_rate: 0.0,
            };
            for c in &cells {
                score.sum_rate += c.cell_objective;
                score.feasible_cells += c.feasible as usize;
            }
            Ok((index, score, p, cells))
        })
        .try_reduce_with(|a, b| {
            // Deterministic regardless of scheduling: higher score, then lower index.
            let a_wins = a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
            Ok(if a_wins { a } else { b })
        })
        .expect("grid is non-empty")?;

    let (_, score, p, cells) = best;
    Ok(NetworkOracle {
        state: PowerState {
            p,
            p_s: cells.iter().map(|c| c.p_s).collect(),
            p_w: cells.iter().map(|c| c.p_w).collect(),
            x: cells.iter().map(|c| c.x).collect(),
        },
        score,
        grid_points_evaluated: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Layout, PhysicalParams};
    use crate::network::solve_at_full_power;

    fn ch(psi_s: f64, psi_w: f64, r_rf: f64) -> CellChannel {
        CellChannel {
            psi_s,
            psi_w,
            r_rf,
            b_v: 20e6,
        }
    }

    #[test]
    fn two_point_grid_compares_endpoints() {
        let c = ch(50.0, 5.0, 0.0);
        let s = oracle_cell(&c, 0.3, 0.0, &GridSpec::new(2)).unwrap();
        let at_zero = c.objective(0.0, 0.3, false);
        let at_half = c.objective(0.15, 0.15, false);
        assert_eq!(s.cell_objective, at_zero.max(at_half));
        assert_eq!(s.p_s, if at_half > at_zero { 0.15 } else { 0.0 });
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let s = oracle_cell(&ch(5.0, 1.0, 1e9), 0.3, 100e6, &GridSpec::new(1000)).unwrap();
        assert!(!s.feasible);
    }

    #[test]
    fn single_point_power_grid_is_full_power() {
        let s = NetworkScenario::generate(&Layout::grid(1, 2), &PhysicalParams::default(), 0.5, 3).unwrap();
        let out = oracle_network(&s, 1e6, &GridSpec::new(1), &GridSpec::new(2001), LinkPolicy::Cooperative)
            .unwrap();
        assert!(out.state.p.iter().all(|p| *p == s.params.p_max()));
        let (_, report) = solve_at_full_power(&s, 1e6, LinkPolicy::Cooperative).unwrap();
        assert!(out.score.sum_rate <= report.sum_rate * (1.0 + 1e-12));
        assert!(out.score.sum_rate >= report.sum_rate * (1.0 - 1e-3));
    }

    #[test]
    fn rejects_large_networks() {
        let s = NetworkScenario::generate(&Layout::grid(2, 2), &PhysicalParams::default(), 0.5, 3).unwrap();
        assert!(oracle_network(&s, 1e6, &GridSpec::new(2), &GridSpec::new(2), LinkPolicy::Cooperative).is_err());
    }
}
