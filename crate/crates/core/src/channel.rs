//! Network geometry and channel gains.
//!
//! VLC links use the line-of-sight Lambertian model with LEDs facing straight
//! down and photodiodes facing straight up. The strong-to-weak RF link uses a
//! log-distance path loss. The relay's harvested power follows the usual
//! solar-cell model `f * I_DC * V_t * ln(1 + I_DC / I_0)` driven by the DC
//! photocurrent collected from every AP.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Physical constants of the optical front end, the LEDs and the RF relay link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Electric-to-optical conversion factor.
    pub nu: f64,
    /// Optical-to-electric conversion factor (A/W).
    pub rho: f64,
    /// DC bias current shared by all APs (A).
    pub b: f64,
    /// Maximum LED input current (A).
    pub i_h: f64,
    /// VLC modulation bandwidth (Hz).
    pub b_v: f64,
    /// VLC noise power spectral density (W/Hz).
    pub n_v: f64,
    /// RF bandwidth per user (Hz).
    pub b_rf: f64,
    /// RF noise power spectral density (W/Hz).
    pub n_rf: f64,
    pub lambertian_order: f64,
    /// Photodiode area (m^2).
    pub pd_area: f64,
    /// Receiver field-of-view half angle (rad).
    pub fov_half_angle: f64,
    pub optical_filter_gain: f64,
    pub concentrator_gain: f64,
    pub eh_fill_factor: f64,
    /// Thermal voltage of the harvesting cell (V).
    pub eh_thermal_voltage: f64,
    /// Dark saturation current of the harvesting cell (A).
    pub eh_dark_current: f64,
    pub rf_path_loss_exponent: f64,
    /// RF path loss at the 1 m reference distance (dB).
    pub rf_ref_loss_db: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        defaults().params.clone()
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 18] = [
            ("nu", self.nu),
            ("rho", self.rho),
            ("b", self.b),
            ("i_h", self.i_h),
            ("b_v", self.b_v),
            ("n_v", self.n_v),
            ("b_rf", self.b_rf),
            ("n_rf", self.n_rf),
            ("lambertian_order", self.lambertian_order),
            ("pd_area", self.pd_area),
            ("fov_half_angle", self.fov_half_angle),
            ("optical_filter_gain", self.optical_filter_gain),
            ("concentrator_gain", self.concentrator_gain),
            ("eh_fill_factor", self.eh_fill_factor),
            ("eh_thermal_voltage", self.eh_thermal_voltage),
            ("eh_dark_current", self.eh_dark_current),
            ("rf_path_loss_exponent", self.rf_path_loss_exponent),
            ("rf_ref_loss_db", self.rf_ref_loss_db),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if self.b >= self.i_h {
            return Err(invalid(
                "b",
                format!("DC bias {} must be below the LED limit i_h = {}", self.b, self.i_h),
            ));
        }
        if self.fov_half_angle > PI / 2.0 {
            return Err(invalid("fov_half_angle", "must lie in (0, pi/2]"));
        }
        Ok(())
    }

    /// Largest admissible AP transmit power, `(I_H - b)^2`.
    pub fn p_max(&self) -> f64 {
        (self.i_h - self.b).powi(2)
    }
}

/// Room and AP grid geometry used to build scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    /// Distance between neighbouring APs (m).
    pub ap_spacing: f64,
    pub room_width: f64,
    pub room_length: f64,
    pub ceiling_height: f64,
    pub receiver_height: f64,
    /// Strong users are drawn from a disc of this fraction of the cell radius.
    pub strong_disc_fraction: f64,
}

impl Default for Layout {
    fn default() -> Self {
        defaults().layout.clone()
    }
}

impl Layout {
    /// A `rows x cols` grid of APs centred in a room just large enough to hold it.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let base = Self::default();
        Self {
            rows,
            cols,
            room_width: cols as f64 * base.ap_spacing,
            room_length: rows as f64 * base.ap_spacing,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("rows/cols", "AP grid must be non-empty"));
        }
        for (name, value) in [
            ("ap_spacing", self.ap_spacing),
            ("room_width", self.room_width),
            ("room_length", self.room_length),
            ("ceiling_height", self.ceiling_height),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.receiver_height >= 0.0 && self.receiver_height < self.ceiling_height) {
            return Err(invalid("receiver_height", "must lie in [0, ceiling_height)"));
        }
        if !(self.strong_disc_fraction > 0.0 && self.strong_disc_fraction <= 1.0) {
            return Err(invalid("strong_disc_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Radius of the disc inscribed in one grid cell; every point of it is
    /// closest to that cell's AP.
    pub fn cell_radius(&self) -> f64 {
        self.ap_spacing / 2.0
    }

    /// AP positions in row-major order, grid centred in the room.
    pub fn ap_positions(&self) -> Vec<Point3> {
        let x0 = (self.room_width - (self.cols as f64 - 1.0) * self.ap_spacing) / 2.0;
        let y0 = (self.room_length - (self.rows as f64 - 1.0) * self.ap_spacing) / 2.0;
        (0..self.rows)
            .flat_map(|r| {
                (0..self.cols).map(move |c| {
                    Point3::new(
                        x0 + c as f64 * self.ap_spacing,
                        y0 + r as f64 * self.ap_spacing,
                        self.ceiling_height,
                    )
                })
            })
            .collect()
    }
}

/// The embedded default parameter set together with a provenance note per entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub params: PhysicalParams,
    pub layout: Layout,
    pub provenance: BTreeMap<String, String>,
}

pub const DEFAULTS_JSON: &str = include_str!("../config/defaults.json");

pub fn defaults() -> &'static Defaults {
    static DEFAULTS: OnceLock<Defaults> = OnceLock::new();
    DEFAULTS.get_or_init(|| {
        serde_json::from_str(DEFAULTS_JSON).expect("embedded config/defaults.json is malformed")
    })
}

/// Line-of-sight Lambertian DC gain from an LED at `ap` (facing down) to a
/// photodiode at `user` (facing up). Zero outside the receiver field of view.
pub fn vlc_channel_gain(ap: &Point3, user: &Point3, params: &PhysicalParams) -> Result<f64> {
    let d = ap.distance(user);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry("AP and receiver coincide"));
    }
    // Both planes are horizontal, so irradiance and incidence angles coincide.
    let cos_angle = (ap.z - user.z) / d;
    if cos_angle <= 0.0 || cos_angle.min(1.0).acos() > params.fov_half_angle {
        return Ok(0.0);
    }
    let m = params.lambertian_order;
    let gain = (m + 1.0) * params.pd_area / (2.0 * PI * d * d)
        * cos_angle.powf(m)
        * params.optical_filter_gain
        * params.concentrator_gain
        * cos_angle;
    Ok(gain)
}

/// Amplitude gain of the RF link between two users under log-distance path loss.
pub fn rf_channel_gain(a: &Point3, b: &Point3, params: &PhysicalParams) -> Result<f64> {
    let d = a.distance(b);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry("RF endpoints coincide"));
    }
    let loss_db = params.rf_ref_loss_db + 10.0 * params.rf_path_loss_exponent * d.log10();
    Ok(10f64.powf(-loss_db / 20.0))
}

/// Power harvested by a receiver from a DC photocurrent `i_dc` (A).
pub fn harvested_power_from_current(i_dc: f64, params: &PhysicalParams) -> f64 {
    params.eh_fill_factor
        * i_dc
        * params.eh_thermal_voltage
        * (i_dc / params.eh_dark_current).ln_1p()
}

/// Sample strong and weak user positions for every AP.
///
/// The strong user is uniform on a disc of radius `strong_disc_fraction * R`
/// around the AP; the weak user is uniform on the annulus `[alpha * R, R]`,
/// where `R` is the cell radius. Radii are drawn by inverse CDF so that, for
/// a fixed seed, weak-user radii grow monotonically with `alpha`.
pub fn place_users(
    ap_positions: &[Point3],
    layout: &Layout,
    alpha: f64,
    seed: u64,
) -> Result<(Vec<Point3>, Vec<Point3>)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1), got {alpha}")));
    }
    let radius = layout.cell_radius();
    let strong_radius = layout.strong_disc_fraction * radius;
    let inner = alpha * radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strong = Vec::with_capacity(ap_positions.len());
    let mut weak = Vec::with_capacity(ap_positions.len());
    for ap in ap_positions {
        let (u, phi): (f64, f64) = (rng.gen(), rng.gen());
        let r = strong_radius * u.sqrt();
        let phi = 2.0 * PI * phi;
        strong.push(Point3::new(
            ap.x + r * phi.cos(),
            ap.y + r * phi.sin(),
            layout.receiver_height,
        ));

        let (u, phi): (f64, f64) = (rng.gen(), rng.gen());
        let r = (inner * inner + u * (radius * radius - inner * inner)).sqrt();
        let phi = 2.0 * PI * phi;
        weak.push(Point3::new(
            ap.x + r * phi.cos(),
            ap.y + r * phi.sin(),
            layout.receiver_height,
        ));
    }
    Ok((strong, weak))
}

/// Everything one optimization needs: positions, channel gains and constants.
///
/// `h_strong[u][q]` is the VLC gain from AP `q` to the strong user of cell `u`;
/// `h_weak` likewise for weak users. `h_rf[k]` is the RF amplitude gain
/// between the two users of cell `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkScenario {
    pub ap_positions: Vec<Point3>,
    pub strong_user_positions: Vec<Point3>,
    pub weak_user_positions: Vec<Point3>,
    pub h_strong: Vec<Vec<f64>>,
    pub h_weak: Vec<Vec<f64>>,
    pub h_rf: Vec<f64>,
    pub params: PhysicalParams,
}

impl NetworkScenario {
    /// Build a scenario from positions, computing all gains. Users whose own-AP
    /// gains contradict their strong/weak labels are swapped.
    pub fn from_positions(
        ap_positions: Vec<Point3>,
        mut strong: Vec<Point3>,
        mut weak: Vec<Point3>,
        params: PhysicalParams,
    ) -> Result<Self> {
        params.validate()?;
        let n = ap_positions.len();
        if n == 0 || strong.len() != n || weak.len() != n {
            return Err(Error::InvalidScenario(format!(
                "need one strong and one weak user per AP ({n} APs, {} strong, {} weak)",
                strong.len(),
                weak.len()
            )));
        }
        for k in 0..n {
            let gs = vlc_channel_gain(&ap_positions[k], &strong[k], &params)?;
            let gw = vlc_channel_gain(&ap_positions[k], &weak[k], &params)?;
            if gw > gs {
                std::mem::swap(&mut strong[k], &mut weak[k]);
            }
        }
        let gains = |users: &[Point3]| -> Result<Vec<Vec<f64>>> {
            users
                .iter()
                .map(|u| {
                    ap_positions
                        .iter()
                        .map(|ap| vlc_channel_gain(ap, u, &params))
                        .collect()
                })
                .collect()
        };
        let h_strong = gains(&strong)?;
        let h_weak = gains(&weak)?;
        let h_rf = strong
            .iter()
            .zip(&weak)
            .map(|(s, w)| rf_channel_gain(s, w, &params))
            .collect::<Result<Vec<_>>>()?;
        let scenario = Self {
            ap_positions,
            strong_user_positions: strong,
            weak_user_positions: weak,
            h_strong,
            h_weak,
            h_rf,
            params,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Place users on `layout` and build the resulting scenario.
    pub fn generate(layout: &Layout, params: &PhysicalParams, alpha: f64, seed: u64) -> Result<Self> {
        layout.validate()?;
        let aps = layout.ap_positions();
        let (strong, weak) = place_users(&aps, layout, alpha, seed)?;
        Self::from_positions(aps, strong, weak, params.clone())
    }

    pub fn n_cells(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.n_cells();
        if n == 0 {
            return Err(Error::InvalidScenario("no APs".into()));
        }
        if self.strong_user_positions.len() != n
            || self.weak_user_positions.len() != n
            || self.h_rf.len() != n
        {
            return Err(Error::InvalidScenario(
                "user positions and RF gains need one entry per AP".into(),
            ));
        }
        for (name, m) in [("h_strong", &self.h_strong), ("h_weak", &self.h_weak)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidScenario(format!("{name} must be {n} x {n}")));
            }
            if m.iter().flatten().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::InvalidScenario(format!("{name} has a negative or non-finite gain")));
            }
        }
        if self.h_rf.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidScenario("h_rf has a negative or non-finite gain".into()));
        }
        for k in 0..n {
            if self.h_strong[k][k] < self.h_weak[k][k] {
                return Err(Error::InvalidScenario(format!(
                    "cell {k}: strong user gain {} is below weak user gain {}",
                    self.h_strong[k][k], self.h_weak[k][k]
                )));
            }
        }
        Ok(())
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.n_cells() {
            return Err(Error::CellIndex {
                index: cell,
                n_cells: self.n_cells(),
            });
        }
        Ok(())
    }

    /// DC photocurrent collected by the strong user of `cell` from all APs.
    pub fn dc_photocurrent(&self, cell: usize) -> Result<f64> {
        self.check_cell(cell)?;
        let p = &self.params;
        let total_gain: f64 = self.h_strong[cell].iter().sum();
        Ok(p.rho * p.nu * p.b * total_gain)
    }

    /// Power harvested by the strong user of `cell` and available to the RF relay (W).
    pub fn harvested_rf_power(&self, cell: usize) -> Result<f64> {
        Ok(harvested_power_from_current(self.dc_photocurrent(cell)?, &self.params))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Self = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Free-function form of [`NetworkScenario::harvested_rf_power`].
pub fn harvested_rf_power(scenario: &NetworkScenario, cell: usize) -> Result<f64> {
    scenario.harvested_rf_power(cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> PhysicalParams {
        PhysicalParams::default()
    }

    #[test]
    fn defaults_parse_and_validate() {
        let d = defaults();
        d.params.validate().unwrap();
        d.layout.validate().unwrap();
        assert_eq!(d.layout.n_cells(), 16);
        assert_eq!(d.layout.ap_spacing, 2.5);
        // every default carries a provenance note
        let params_json = serde_json::to_value(&d.params).unwrap();
        let layout_json = serde_json::to_value(&d.layout).unwrap();
        for key in params_json
            .as_object()
            .unwrap()
            .keys()
            .chain(layout_json.as_object().unwrap().keys())
        {
            assert!(d.provenance.contains_key(key), "missing provenance for {key}");
        }
    }

    #[test]
    fn p_max_is_headroom_squared() {
        let p = params();
        assert!((p.p_max() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn bias_above_led_limit_rejected() {
        let p = PhysicalParams { b: 1.2, ..params() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn gain_directly_below_ap() {
        let p = params();
        let d = 2.15;
        let g = vlc_channel_gain(&Point3::new(0.0, 0.0, 3.0), &Point3::new(0.0, 0.0, 3.0 - d), &p).unwrap();
        let expected = 2.0 * p.pd_area / (2.0 * PI * d * d);
        assert!((g - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn gain_inverse_square_at_fixed_angles() {
        let p = params();
        let ap = Point3::new(0.0, 0.0, 0.0);
        let near = vlc_channel_gain(&ap, &Point3::new(0.3, 0.4, -1.0), &p).unwrap();
        let far = vlc_channel_gain(&ap, &Point3::new(0.6, 0.8, -2.0), &p).unwrap();
        assert!((near / far - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gain_zero_outside_fov() {
        let p = params();
        // 70 degrees off axis with a 60 degree field of view
        let h = 1.0;
        let r = h * 70f64.to_radians().tan();
        let g = vlc_channel_gain(&Point3::new(0.0, 0.0, h), &Point3::new(r, 0.0, 0.0), &p).unwrap();
        assert_eq!(g, 0.0);
        // receiver above the LED plane
        let g = vlc_channel_gain(&Point3::new(0.0, 0.0, 0.0), &Point3::new(0.0, 0.0, 1.0), &p).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn coincident_points_are_errors() {
        let p = params();
        let x = Point3::new(1.0, 2.0, 3.0);
        assert!(matches!(vlc_channel_gain(&x, &x, &p), Err(Error::DegenerateGeometry(_))));
        assert!(matches!(rf_channel_gain(&x, &x, &p), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn rf_gain_reference_and_exponent() {
        let p = params();
        let o = Point3::new(0.0, 0.0, 0.0);
        let h = rf_channel_gain(&o, &Point3::new(1.0, 0.0, 0.0), &p).unwrap();
        assert!((h * h - 1e-4).abs() < 1e-18);

        let h = rf_channel_gain(&o, &Point3::new(10.0, 0.0, 0.0), &p).unwrap();
        assert!((h * h / 10f64.powf(-5.8) - 1.0).abs() < 1e-12);

        let p2 = PhysicalParams { rf_path_loss_exponent: 2.0, ..p };
        let a = rf_channel_gain(&o, &Point3::new(1.5, 0.0, 0.0), &p2).unwrap();
        let b = rf_channel_gain(&o, &Point3::new(3.0, 0.0, 0.0), &p2).unwrap();
        assert!(((a * a) / (b * b) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn harvested_power_closed_form_points() {
        let p = params();
        assert_eq!(harvested_power_from_current(0.0, &p), 0.0);
        let i_dc = p.eh_dark_current * (std::f64::consts::E - 1.0);
        let expected = p.eh_fill_factor * i_dc * p.eh_thermal_voltage;
        let got = harvested_power_from_current(i_dc, &p);
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn harvested_power_zero_without_light_and_grows_with_bias() {
        let layout = Layout::default();
        let s = NetworkScenario::generate(&layout, &params(), 0.5, 3).unwrap();
        let mut dark = s.clone();
        for row in &mut dark.h_strong {
            row.iter_mut().for_each(|g| *g = 0.0);
        }
        assert_eq!(dark.harvested_rf_power(0).unwrap(), 0.0);

        let low = s.harvested_rf_power(5).unwrap();
        let mut brighter = s.clone();
        brighter.params.b = 0.8;
        assert!(brighter.harvested_rf_power(5).unwrap() > low);
        assert!(s.harvested_rf_power(16).is_err());
    }

    #[test]
    fn placement_respects_alpha_annulus() {
        let layout = Layout::default();
        let aps = layout.ap_positions();
        let radius = layout.cell_radius();
        for seed in 0..20 {
            let (strong, weak) = place_users(&aps, &layout, 0.95, seed).unwrap();
            for k in 0..aps.len() {
                let rw = weak[k].horizontal_distance(&aps[k]);
                assert!(rw >= 0.95 * radius - 1e-12 && rw <= radius + 1e-12);
                let rs = strong[k].horizontal_distance(&aps[k]);
                assert!(rs <= layout.strong_disc_fraction * radius + 1e-12);
            }
        }
        assert!(place_users(&aps, &layout, 1.0, 0).is_err());
        assert!(place_users(&aps, &layout, -0.1, 0).is_err());
    }

    #[test]
    fn placement_alpha_zero_covers_the_disc() {
        let layout = Layout::default();
        let aps = layout.ap_positions();
        let radius = layout.cell_radius();
        let mut min_r = f64::INFINITY;
        for seed in 0..200 {
            let (_, weak) = place_users(&aps, &layout, 0.0, seed).unwrap();
            for k in 0..aps.len() {
                min_r = min_r.min(weak[k].horizontal_distance(&aps[k]));
            }
        }
        assert!(min_r < 0.1 * radius);
    }

    #[test]
    fn placement_is_deterministic() {
        let layout = Layout::default();
        let aps = layout.ap_positions();
        assert_eq!(
            place_users(&aps, &layout, 0.7, 42).unwrap(),
            place_users(&aps, &layout, 0.7, 42).unwrap()
        );
        assert_ne!(
            place_users(&aps, &layout, 0.7, 42).unwrap(),
            place_users(&aps, &layout, 0.7, 43).unwrap()
        );
    }

    #[test]
    fn larger_alpha_pushes_weak_users_outward() {
        let layout = Layout::default();
        let aps = layout.ap_positions();
        let mean_radius = |alpha: f64| {
            let mut total = 0.0;
            let mut count = 0;
            for seed in 0..100 {
                let (_, weak) = place_users(&aps, &layout, alpha, seed).unwrap();
                for k in 0..aps.len() {
                    total += weak[k].horizontal_distance(&aps[k]);
                    count += 1;
                }
            }
            total / count as f64
        };
        let (a, b, c) = (mean_radius(0.2), mean_radius(0.6), mean_radius(0.9));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn generated_scenarios_keep_strong_label_consistent() {
        let layout = Layout::default();
        for seed in 0..50 {
            let s = NetworkScenario::generate(&layout, &params(), 0.0, seed).unwrap();
            for k in 0..s.n_cells() {
                assert!(s.h_strong[k][k] >= s.h_weak[k][k]);
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let s = NetworkScenario::generate(&Layout::default(), &params(), 0.9, 11).unwrap();
        let back = NetworkScenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = NetworkScenario::from_json("{\n  \"ap_positions\": [\n  oops\n]}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    proptest! {
        #[test]
        fn gain_is_nonnegative_and_bounded(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.0f64..2.9) {
            let p = params();
            let ap = Point3::new(0.0, 0.0, 3.0);
            let g = vlc_channel_gain(&ap, &Point3::new(x, y, z), &p).unwrap();
            let d = 3.0 - z;
            prop_assert!(g >= 0.0);
            prop_assert!(g <= 2.0 * p.pd_area / (2.0 * PI * d * d) * (1.0 + 1e-12));
        }

        #[test]
        fn harvested_power_monotone_in_current(a in 0.0f64..1e-3, delta in 0.0f64..1e-3) {
            let p = params();
            prop_assert!(harvested_power_from_current(a + delta, &p) >= harvested_power_from_current(a, &p));
        }
    }
}
