//! Achievable-rate expressions and the per-cell coefficients derived from them.
//!
//! Every VLC rate is written in the normalised form
//! `(B_v / 2) * log2(1 + Psi * P_signal / (1 + Psi * P_interf))`, where `Psi`
//! folds the channel gain and the inter-cell interference-plus-noise floor
//! `Z` into one number. DC bias terms from neighbouring APs are treated as
//! filtered out at the receiver and do not enter `Z`.

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::channel::NetworkScenario;
use crate::error::{invalid, Error, Result};

/// Relative slack used when comparing a rate against its QoS target, so that
/// allocations sitting exactly on a constraint boundary count as feasible.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

/// Relative slack on the power-budget invariants.
pub const POWER_RTOL: f64 = 1e-12;

pub fn meets_threshold(rate: f64, r_th: f64) -> bool {
    rate >= r_th - FEASIBILITY_RTOL * r_th.abs()
}

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Lower-bound constant `c = min(1 / (2 pi e), e b^2 / (2 pi I_H^2))`.
pub fn compute_c(b: f64, i_h: f64) -> Result<f64> {
    if !(b > 0.0 && i_h > 0.0) {
        return Err(invalid("b", "DC bias and LED limit must be positive"));
    }
    if b >= i_h {
        return Err(invalid(
            "b",
            format!("DC bias {b} exceeds the LED current limit {i_h}"),
        ));
    }
    Ok((1.0 / (2.0 * PI * E)).min(E * b * b / (i_h * i_h * 2.0 * PI)))
}

/// Decision variables of the network problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerState {
    /// Total transmit power per AP.
    pub p: Vec<f64>,
    /// Power on the strong user's symbol.
    pub p_s: Vec<f64>,
    /// Power on the weak user's symbol.
    pub p_w: Vec<f64>,
    /// 1 when the weak user is served over the hybrid VLC/RF link.
    pub x: Vec<u8>,
}

impl PowerState {
    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    /// Whether the power split of `cell` satisfies `0 <= P_s <= P_w`,
    /// `P_s + P_w <= p` and `p <= p_max`.
    pub fn cell_is_valid(&self, cell: usize, p_max: f64) -> bool {
        let (p, ps, pw) = (self.p[cell], self.p_s[cell], self.p_w[cell]);
        let slack = POWER_RTOL * p.abs().max(p_max);
        ps >= 0.0
            && ps <= pw + slack
            && ps + pw <= p + slack
            && p >= 0.0
            && p <= p_max + POWER_RTOL * p_max
            && self.x[cell] <= 1
    }

    fn check_shape(&self, n: usize) -> Result<()> {
        if self.p.len() != n || self.p_s.len() != n || self.p_w.len() != n || self.x.len() != n {
            return Err(Error::InvalidScenario(format!(
                "power state does not match the {n}-cell scenario"
            )));
        }
        Ok(())
    }
}

/// The sufficient statistics of one cell at a fixed network power vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellChannel {
    pub psi_s: f64,
    pub psi_w: f64,
    /// Rate the relay can forward over RF (bit/s).
    pub r_rf: f64,
    /// VLC modulation bandwidth (Hz).
    pub b_v: f64,
}

impl CellChannel {
    pub fn rate_strong(&self, p_s: f64) -> f64 {
        self.b_v / 2.0 * log2_1p(self.psi_s * p_s)
    }

    pub fn rate_weak_direct(&self, p_s: f64, p_w: f64) -> f64 {
        self.b_v / 2.0 * log2_1p(self.psi_w * p_w / (1.0 + self.psi_w * p_s))
    }

    /// Rate at which the strong user decodes the weak user's message.
    pub fn rate_weak_at_strong(&self, p_s: f64, p_w: f64) -> f64 {
        self.b_v / 2.0 * log2_1p(self.psi_s * p_w / (1.0 + self.psi_s * p_s))
    }

    pub fn rate_weak_hybrid(&self, p_s: f64, p_w: f64) -> f64 {
        self.rate_weak_at_strong(p_s, p_w).min(self.r_rf)
    }

    pub fn rate_weak(&self, p_s: f64, p_w: f64, hybrid: bool) -> f64 {
        if hybrid {
            self.rate_weak_hybrid(p_s, p_w)
        } else {
            self.rate_weak_direct(p_s, p_w)
        }
    }

    /// Cell contribution to the network objective.
    pub fn objective(&self, p_s: f64, p_w: f64, hybrid: bool) -> f64 {
        self.rate_strong(p_s) + self.rate_weak(p_s, p_w, hybrid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCoefficients {
    pub c: f64,
    pub z_s: Vec<f64>,
    pub z_w: Vec<f64>,
    pub psi_s: Vec<f64>,
    pub psi_w: Vec<f64>,
    pub r_rf: Vec<f64>,
    pub b_v: f64,
}

impl CellCoefficients {
    pub fn n_cells(&self) -> usize {
        self.psi_s.len()
    }

    pub fn cell(&self, k: usize) -> CellChannel {
        CellChannel {
            psi_s: self.psi_s[k],
            psi_w: self.psi_w[k],
            r_rf: self.r_rf[k],
            b_v: self.b_v,
        }
    }
}

/// RF relay rate of every cell; independent of the VLC power allocation.
pub fn relay_rates(scenario: &NetworkScenario) -> Result<Vec<f64>> {
    let params = &scenario.params;
    (0..scenario.n_cells())
        .map(|k| {
            let harvested = scenario.harvested_rf_power(k)?;
            let snr = harvested * scenario.h_rf[k].powi(2) / (params.b_rf * params.n_rf);
            Ok(params.b_rf * log2_1p(snr))
        })
        .collect()
}

/// Interference-plus-noise floors and normalised channel coefficients for AP powers `p`.
pub fn compute_coefficients(scenario: &NetworkScenario, p: &[f64]) -> Result<CellCoefficients> {
    let r_rf = relay_rates(scenario)?;
    coefficients_with_relay(scenario, p, r_rf)
}

/// As [`compute_coefficients`] with precomputed relay rates; the optimizer
/// calls this in its inner loop.
pub fn coefficients_with_relay(
    scenario: &NetworkScenario,
    p: &[f64],
    r_rf: Vec<f64>,
) -> Result<CellCoefficients> {
    let n = scenario.n_cells();
    if p.len() != n || r_rf.len() != n {
        return Err(Error::InvalidScenario(format!(
            "power vector has {} entries for {n} cells",
            p.len()
        )));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("p", "AP powers must be finite and nonnegative"));
    }
    let params = &scenario.params;
    let c = compute_c(params.b, params.i_h)?;
    let scale = c * (params.nu * params.rho).powi(2);
    let noise = params.b_v * params.n_v;
    let floor = |gains: &[f64], k: usize| -> f64 {
        let interference: f64 = gains
            .iter()
            .zip(p)
            .enumerate()
            .filter(|(q, _)| *q != k)
            .map(|(_, (h, pq))| pq * h * h)
            .sum();
        noise + scale * interference
    };
    let z_s: Vec<f64> = (0..n).map(|k| floor(&scenario.h_strong[k], k)).collect();
    let z_w: Vec<f64> = (0..n).map(|k| floor(&scenario.h_weak[k], k)).collect();
    let psi_s = (0..n)
        .map(|k| scale * scenario.h_strong[k][k].powi(2) / z_s[k])
        .collect();
    let psi_w = (0..n)
        .map(|k| scale * scenario.h_weak[k][k].powi(2) / z_w[k])
        .collect();
    Ok(CellCoefficients {
        c,
        z_s,
        z_w,
        psi_s,
        psi_w,
        r_rf,
        b_v: params.b_v,
    })
}

pub fn rate_strong(coef: &CellCoefficients, p_s: f64, cell: usize) -> f64 {
    coef.cell(cell).rate_strong(p_s)
}

pub fn rate_weak_direct(coef: &CellCoefficients, p_s: f64, p_w: f64, cell: usize) -> f64 {
    coef.cell(cell).rate_weak_direct(p_s, p_w)
}

pub fn rate_weak_at_strong(coef: &CellCoefficients, p_s: f64, p_w: f64, cell: usize) -> f64 {
    coef.cell(cell).rate_weak_at_strong(p_s, p_w)
}

pub fn rate_weak_hybrid(coef: &CellCoefficients, p_s: f64, p_w: f64, cell: usize) -> f64 {
    coef.cell(cell).rate_weak_hybrid(p_s, p_w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_s: Vec<f64>,
    pub r_w_direct: Vec<f64>,
    pub r_w_to_s: Vec<f64>,
    pub r_rf: Vec<f64>,
    pub r_w_hybrid: Vec<f64>,
    /// Weak-user rate on the selected link.
    pub r_w_effective: Vec<f64>,
    pub sum_rate: f64,
    pub jain: f64,
    pub feasible: Vec<bool>,
}

impl RateReport {
    pub fn n_feasible(&self) -> usize {
        self.feasible.iter().filter(|f| **f).count()
    }

    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|f| *f)
    }

    /// All user rates, strong users first.
    pub fn user_rates(&self) -> Vec<f64> {
        self.r_s.iter().chain(&self.r_w_effective).copied().collect()
    }
}

/// Rates, sum-rate, fairness and per-cell feasibility of `state`.
pub fn evaluate(scenario: &NetworkScenario, state: &PowerState, r_th: f64) -> Result<RateReport> {
    let n = scenario.n_cells();
    state.check_shape(n)?;
    let coef = compute_coefficients(scenario, &state.p)?;
    Ok(report_from_coefficients(&coef, state, r_th, scenario.params.p_max()))
}

pub(crate) fn report_from_coefficients(
    coef: &CellCoefficients,
    state: &PowerState,
    r_th: f64,
    p_max: f64,
) -> RateReport {
    let n = coef.n_cells();
    let mut report = RateReport {
        r_s: Vec::with_capacity(n),
        r_w_direct: Vec::with_capacity(n),
        r_w_to_s: Vec::with_capacity(n),
        r_rf: coef.r_rf.clone(),
        r_w_hybrid: Vec::with_capacity(n),
        r_w_effective: Vec::with_capacity(n),
        sum_rate: 0.0,
        jain: 0.0,
        feasible: Vec::with_capacity(n),
    };
    for k in 0..n {
        let ch = coef.cell(k);
        let (ps, pw) = (state.p_s[k], state.p_w[k]);
        let hybrid = state.x[k] == 1;
        let r_s = ch.rate_strong(ps);
        let direct = ch.rate_weak_direct(ps, pw);
        let to_s = ch.rate_weak_at_strong(ps, pw);
        let relayed = to_s.min(ch.r_rf);
        let effective = if hybrid { relayed } else { direct };
        report.sum_rate += r_s + effective;
        report.feasible.push(
            meets_threshold(r_s, r_th)
                && meets_threshold(effective, r_th)
                && state.cell_is_valid(k, p_max),
        );
        report.r_s.push(r_s);
        report.r_w_direct.push(direct);
        report.r_w_to_s.push(to_s);
        report.r_w_hybrid.push(relayed);
        report.r_w_effective.push(effective);
    }
    report.jain = jain_index(&report.user_rates());
    report
}

/// Jain's fairness index `(sum r)^2 / (n sum r^2)`; 1 for an empty or all-zero vector.
pub fn jain_index(rates: &[f64]) -> f64 {
    let sum: f64 = rates.iter().sum();
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    if rates.is_empty() || sum_sq == 0.0 {
        return 1.0;
    }
    sum * sum / (rates.len() as f64 * sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Layout, PhysicalParams, Point3};
    use proptest::prelude::*;

    const BV: f64 = 20e6;

    fn ch(psi_s: f64, psi_w: f64) -> CellChannel {
        CellChannel {
            psi_s,
            psi_w,
            r_rf: 1e9,
            b_v: BV,
        }
    }

    fn close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn c_equality_point() {
        let i_h = 1.0;
        let c = compute_c(i_h / E, i_h).unwrap();
        assert!(close(c, 1.0 / (2.0 * PI * E), 1e-14));
        assert!((c - 0.058550).abs() < 5e-7);
    }

    #[test]
    fn c_small_bias_uses_second_term() {
        let c = compute_c(0.1, 1.0).unwrap();
        assert!(close(c, E / (200.0 * PI), 1e-14));
        assert!((c - 0.004327).abs() < 1e-6);
    }

    #[test]
    fn c_rejects_bias_at_or_above_limit() {
        assert!(compute_c(1.0, 1.0).is_err());
        assert!(compute_c(1.5, 1.0).is_err());
        // approaching the limit from below the first term wins
        let c = compute_c(1.0 - 1e-12, 1.0).unwrap();
        assert!(close(c, 1.0 / (2.0 * PI * E), 1e-14));
    }

    #[test]
    fn strong_rate_points() {
        let c = ch(3.0, 1.0);
        assert_eq!(c.rate_strong(0.0), 0.0);
        assert!(close(c.rate_strong(1.0), BV, 1e-14));
        assert!(close(ch(1.0, 1.0).rate_strong(1.0), BV / 2.0, 1e-14));
    }

    #[test]
    fn weak_direct_rate_limits() {
        let c = ch(4.0, 2.0);
        assert_eq!(c.rate_weak_direct(0.3, 0.0), 0.0);
        assert!(close(c.rate_weak_direct(0.0, 0.5), BV / 2.0 * (2.0f64).log2(), 1e-14));
        assert!(c.rate_weak_direct(1e12, 0.5) < 1e-3);
    }

    #[test]
    fn hybrid_rate_is_min_of_links() {
        let mut c = ch(4.0, 2.0);
        c.r_rf = 0.0;
        assert_eq!(c.rate_weak_hybrid(0.1, 0.3), 0.0);
        c.r_rf = f64::MAX;
        assert_eq!(c.rate_weak_hybrid(0.1, 0.3), c.rate_weak_at_strong(0.1, 0.3));
    }

    #[test]
    fn hybrid_branches_agree_at_crossover() {
        // Bisection on P_w for R_{w->s}(P_s, P_w) = R_rf, independent of the closed form.
        let mut c = ch(6.0, 1.0);
        c.r_rf = 5e6;
        let p_s = 0.05;
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if c.rate_weak_at_strong(p_s, mid) < c.r_rf {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p_w = 0.5 * (lo + hi);
        assert!(close(c.rate_weak_at_strong(p_s, p_w), c.r_rf, 1e-12));
        assert!(close(c.rate_weak_hybrid(p_s, p_w), c.r_rf, 1e-12));
    }

    #[test]
    fn jain_points() {
        assert_eq!(jain_index(&[]), 1.0);
        assert!(close(jain_index(&[3.0, 3.0, 3.0]), 1.0, 1e-15));
        assert!(close(jain_index(&[0.0, 0.0, 5.0, 0.0]), 0.25, 1e-15));
        assert!(close(jain_index(&[1.0, 2.0, 3.0]), 6.0 / 7.0, 1e-15));
    }

    fn single_cell() -> NetworkScenario {
        let layout = Layout::grid(1, 1);
        NetworkScenario::generate(&layout, &PhysicalParams::default(), 0.5, 1).unwrap()
    }

    fn mirrored_pair() -> NetworkScenario {
        let params = PhysicalParams::default();
        let aps = vec![Point3::new(1.25, 1.25, 3.0), Point3::new(3.75, 1.25, 3.0)];
        let strong = vec![Point3::new(1.45, 1.25, 0.85), Point3::new(3.55, 1.25, 0.85)];
        let weak = vec![Point3::new(2.2, 1.25, 0.85), Point3::new(2.8, 1.25, 0.85)];
        NetworkScenario::from_positions(aps, strong, weak, params).unwrap()
    }

    #[test]
    fn single_cell_has_noise_floor_only() {
        let s = single_cell();
        let coef = compute_coefficients(&s, &[0.36]).unwrap();
        let noise = s.params.b_v * s.params.n_v;
        assert_eq!(coef.z_s[0], noise);
        assert_eq!(coef.z_w[0], noise);
    }

    #[test]
    fn zero_power_gives_noise_floor_everywhere() {
        let s = NetworkScenario::generate(&Layout::default(), &PhysicalParams::default(), 0.5, 2).unwrap();
        let coef = compute_coefficients(&s, &[0.0; 16]).unwrap();
        let noise = s.params.b_v * s.params.n_v;
        assert!(coef.z_s.iter().chain(&coef.z_w).all(|z| *z == noise));
    }

    #[test]
    fn mirrored_pair_is_symmetric() {
        let s = mirrored_pair();
        let coef = compute_coefficients(&s, &[0.2, 0.2]).unwrap();
        assert!(close(coef.psi_s[0], coef.psi_s[1], 1e-12));
        assert!(close(coef.psi_w[0], coef.psi_w[1], 1e-12));
        assert!(coef.z_s.iter().chain(&coef.z_w).all(|z| *z >= s.params.b_v * s.params.n_v));
    }

    #[test]
    fn evaluate_zero_power_is_infeasible() {
        let s = mirrored_pair();
        let state = PowerState {
            p: vec![0.0; 2],
            p_s: vec![0.0; 2],
            p_w: vec![0.0; 2],
            x: vec![0; 2],
        };
        let report = evaluate(&s, &state, 1e6).unwrap();
        assert_eq!(report.sum_rate, 0.0);
        assert!(report.feasible.iter().all(|f| !f));
    }

    #[test]
    fn evaluate_single_cell_matches_direct_formulas() {
        let s = single_cell();
        let p = &s.params;
        let scale = compute_c(p.b, p.i_h).unwrap() * (p.nu * p.rho).powi(2);
        let noise = p.b_v * p.n_v;
        let (ps, pw) = (0.1, 0.26);
        let hs2 = s.h_strong[0][0].powi(2);
        let hw2 = s.h_weak[0][0].powi(2);
        let r_s = p.b_v / 2.0 * (1.0 + scale * hs2 * ps / noise).log2();
        let r_w = p.b_v / 2.0 * (1.0 + scale * hw2 * pw / (noise + scale * ps * hw2)).log2();
        let state = PowerState {
            p: vec![0.36],
            p_s: vec![ps],
            p_w: vec![pw],
            x: vec![0],
        };
        let report = evaluate(&s, &state, 0.0).unwrap();
        assert!(close(report.sum_rate, r_s + r_w, 1e-12));
        assert!(report.feasible[0]);
    }

    #[test]
    fn evaluate_flags_power_invariant_violations() {
        let s = single_cell();
        let base = PowerState {
            p: vec![0.36],
            p_s: vec![0.2],
            p_w: vec![0.1],
            x: vec![0],
        };
        // P_s > P_w
        assert!(!evaluate(&s, &base, 0.0).unwrap().feasible[0]);
        let over_budget = PowerState {
            p_s: vec![0.1],
            p_w: vec![0.3],
            ..base.clone()
        };
        assert!(!evaluate(&s, &over_budget, 0.0).unwrap().feasible[0]);
        let above_max = PowerState {
            p: vec![0.5],
            p_s: vec![0.1],
            p_w: vec![0.3],
            x: vec![0],
        };
        assert!(!evaluate(&s, &above_max, 0.0).unwrap().feasible[0]);
    }

    #[test]
    fn evaluate_is_pure() {
        let s = NetworkScenario::generate(&Layout::default(), &PhysicalParams::default(), 0.9, 5).unwrap();
        let state = PowerState {
            p: vec![0.3; 16],
            p_s: vec![0.1; 16],
            p_w: vec![0.2; 16],
            x: (0..16).map(|k| (k % 2) as u8).collect(),
        };
        let a = evaluate(&s, &state, 1e6).unwrap();
        let b = evaluate(&s, &state, 1e6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sum_rate.to_bits(), b.sum_rate.to_bits());
    }

    proptest! {
        #[test]
        fn split_conservation(psi in 1e-1f64..1e4, p in 1e-3f64..1.0, frac in 0.0f64..=0.5) {
            let c = ch(psi, psi / 3.0);
            let ps = frac * p;
            let total = c.rate_strong(ps) + c.rate_weak_at_strong(ps, p - ps);
            let full = BV / 2.0 * (1.0 + psi * p).log2();
            prop_assert!(close(total, full, 1e-9));
        }

        #[test]
        fn better_channel_decodes_faster(psi_w in 1e-2f64..1e3, ratio in 1.0f64..100.0,
                                         ps in 0.0f64..0.2, pw in 0.0f64..0.2) {
            let c = ch(psi_w * ratio, psi_w);
            prop_assert!(c.rate_weak_at_strong(ps, pw) >= c.rate_weak_direct(ps, pw));
        }

        #[test]
        fn rates_monotone_in_powers(psi_s in 1e-2f64..1e3, psi_w in 1e-2f64..1e3,
                                    ps in 0.0f64..0.2, pw in 0.0f64..0.2, d in 1e-4f64..0.1) {
            let c = ch(psi_s, psi_w);
            prop_assert!(c.rate_strong(ps + d) >= c.rate_strong(ps));
            prop_assert!(c.rate_weak_direct(ps, pw + d) >= c.rate_weak_direct(ps, pw));
            prop_assert!(c.rate_weak_direct(ps + d, pw) <= c.rate_weak_direct(ps, pw));
            prop_assert!(c.rate_weak_at_strong(ps + d, pw) <= c.rate_weak_at_strong(ps, pw));
            prop_assert!(c.rate_weak_direct(ps, pw) >= 0.0);
        }

        #[test]
        fn jain_in_unit_interval(rates in proptest::collection::vec(0.0f64..1e8, 1..40)) {
            let j = jain_index(&rates);
            prop_assert!(j > 0.0 && j <= 1.0 + 1e-12);
        }
    }
}
