//! Closed-form power split and link selection for one cell at fixed AP power.
//!
//! With the AP power budget active (`P_w = p - P_s`) each cell reduces to a
//! one-dimensional problem in `P_s` over `[0, p/2]`:
//!
//! * direct link: the objective is monotone in `P_s`, increasing when
//!   `Psi_s > Psi_w`, so the optimum sits on an end of the QoS window
//!   `[A_s, C_w]`;
//! * hybrid link: `R_s + R_{w->s}` is constant in `P_s`, so every point of the
//!   window `[A_bar, B_s]` is optimal and the split equalising the two users'
//!   VLC rates (`eta`) is chosen, clamped into the window.

use serde::{Deserialize, Serialize};

use crate::rates::{CellChannel, CellCoefficients};
use std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub p_s: f64,
    pub p_w: f64,
    pub x: u8,
    pub cell_objective: f64,
    pub feasible: bool,
}

impl CellSolution {
    pub fn is_hybrid(&self) -> bool {
        self.x == 1
    }
}

/// Which link choices a cell may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkPolicy {
    /// Pick the better of direct VLC and hybrid VLC/RF per cell.
    #[default]
    Cooperative,
    /// Conventional NOMA: the weak user is always served directly.
    DirectOnly,
}

/// Constraint windows of both link cases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseBounds {
    /// Smallest `P_s` meeting the strong user's QoS.
    pub a_s: f64,
    /// Largest `P_s` meeting the weak user's direct-link QoS (capped at `p/2`).
    pub c_w: f64,
    /// Smallest `P_s` at which the strong user decodes no faster than the relay forwards.
    pub rf_bound: f64,
    /// `max(a_s, rf_bound)`.
    pub a_bar: f64,
    /// Largest `P_s` meeting the weak user's QoS at the strong user (capped at `p/2`).
    pub b_s: f64,
    /// Split equalising the strong user's rate and the weak message's rate at the strong user.
    pub eta: f64,
}

/// `P_s` at which `(B_v/2) log2((1 + psi p) / (1 + psi P_s))` equals the rate whose
/// `2^(2R/B_v)` is `growth`; decreasing-rate inversion shared by `C_w`, `B_s` and the relay bound.
fn upper_split(psi: f64, p: f64, growth: f64) -> f64 {
    if psi == 0.0 {
        // the rate is identically zero
        return if growth <= 1.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    ((1.0 + psi * p) / growth - 1.0) / psi
}

pub fn case_bounds(ch: &CellChannel, p_k: f64, r_th: f64) -> CaseBounds {
    let growth = (2.0 * r_th / ch.b_v).exp2();
    let a_s = if ch.psi_s == 0.0 {
        if growth > 1.0 { f64::INFINITY } else { 0.0 }
    } else {
        ((growth - 1.0) / ch.psi_s).max(0.0)
    };
    let half = 0.5 * p_k;
    let c_w = half.min(upper_split(ch.psi_w, p_k, growth));
    let b_s = half.min(upper_split(ch.psi_s, p_k, growth));
    let rf_growth = (2.0 * ch.r_rf / ch.b_v).exp2();
    let rf_bound = if ch.psi_s == 0.0 {
        f64::NEG_INFINITY
    } else {
        upper_split(ch.psi_s, p_k, rf_growth)
    };
    let a_bar = a_s.max(rf_bound);
    let eta = p_k / (1.0 + (1.0 + ch.psi_s * p_k).sqrt());
    debug_assert!(eta >= 0.0 && eta <= half * (1.0 + 1e-12) + f64::MIN_POSITIVE);
    CaseBounds {
        a_s,
        c_w,
        rf_bound,
        a_bar,
        b_s,
        eta,
    }
}

fn finish(ch: &CellChannel, p_k: f64, p_s: f64, hybrid: bool, feasible: bool) -> CellSolution {
    let p_w = p_k - p_s;
    CellSolution {
        p_s,
        p_w,
        x: hybrid as u8,
        cell_objective: ch.objective(p_s, p_w, hybrid),
        feasible,
    }
}

/// Optimal split with the weak user on the direct VLC link.
pub fn solve_case_direct(ch: &CellChannel, p_k: f64, r_th: f64) -> CellSolution {
    let bounds = case_bounds(ch, p_k, r_th);
    let feasible = bounds.a_s <= bounds.c_w;
    let p_s = if !feasible {
        bounds.a_s.clamp(0.0, 0.5 * p_k)
    } else if ch.psi_s <= ch.psi_w {
        bounds.a_s
    } else {
        bounds.c_w
    };
    finish(ch, p_k, p_s, false, feasible)
}

/// Fairness-maximising optimal split with the weak user relayed over RF.
pub fn solve_case_hybrid(ch: &CellChannel, p_k: f64, r_th: f64) -> CellSolution {
    let bounds = case_bounds(ch, p_k, r_th);
    let feasible = ch.r_rf >= r_th && bounds.a_s <= bounds.b_s;
    let p_s = if feasible {
        // When even P_s = p/2 leaves the relay as the bottleneck, the objective
        // still rises up to p/2, so the window collapses onto its upper end.
        let lo = bounds.a_bar.min(bounds.b_s);
        bounds.eta.clamp(lo, bounds.b_s)
    } else {
        bounds.eta
    };
    finish(ch, p_k, p_s, true, feasible)
}

/// Solve both link cases and keep the better one.
pub fn solve_cell(ch: &CellChannel, p_k: f64, r_th: f64) -> CellSolution {
    solve_cell_with(ch, p_k, r_th, LinkPolicy::Cooperative)
}

pub fn solve_cell_with(ch: &CellChannel, p_k: f64, r_th: f64, policy: LinkPolicy) -> CellSolution {
    let direct = solve_case_direct(ch, p_k, r_th);
    if policy == LinkPolicy::DirectOnly {
        return direct;
    }
    let hybrid = solve_case_hybrid(ch, p_k, r_th);
    match (direct.feasible, hybrid.feasible) {
        (true, true) => {
            if hybrid.cell_objective > direct.cell_objective {
                hybrid
            } else {
                direct
            }
        }
        (true, false) => direct,
        (false, true) => hybrid,
        (false, false) => {
            let worst_user = |s: &CellSolution| {
                ch.rate_strong(s.p_s).min(ch.rate_weak(s.p_s, s.p_w, s.is_hybrid()))
            };
            if worst_user(&hybrid) > worst_user(&direct) {
                hybrid
            } else {
                direct
            }
        }
    }
}

/// Solve every cell of `coef` at AP powers `p`.
pub fn solve_all(coef: &CellCoefficients, p: &[f64], r_th: f64, policy: LinkPolicy) -> Vec<CellSolution> {
    (0..coef.n_cells())
        .map(|k| solve_cell_with(&coef.cell(k), p[k], r_th, policy))
        .collect()
}

/// Analytic derivative of the direct-link objective `R_s + R_w` with respect
/// to `P_s` along `P_w = p - P_s`:
/// `(B_v / 2 ln 2) * (1 / (1/Psi_s + P_s) - 1 / (1/Psi_w + P_s))`, evaluated
/// in factored form to avoid cancellation.
pub fn direct_objective_slope(ch: &CellChannel, p_s: f64) -> f64 {
    ch.b_v / (2.0 * LN_2) * (ch.psi_s - ch.psi_w)
        / ((1.0 + ch.psi_s * p_s) * (1.0 + ch.psi_w * p_s))
}
