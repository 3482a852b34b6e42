//! Model parameters, their defaults and the flat key/value config format.
//!
//! Every field is stored in canonical units (m, min, W, Wh, per m, per m²).
//! Config keys use the same units; a few unit-suffixed aliases
//! (`*_per_km2`, `*_db`, `*_kwh`, `*_kw`, `v_mps`, `ev_interarrival`) are
//! accepted on input and converted at load time.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::energy;
use crate::error::{Error, Result};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationKind {
    Ev,
    Uav,
}

impl StationKind {
    pub fn label(self) -> &'static str {
        match self {
            StationKind::Ev => "ev",
            StationKind::Uav => "uav",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServingPolicy {
    Fifs,
    EvFirst,
}

impl ServingPolicy {
    pub fn label(self) -> &'static str {
        match self {
            ServingPolicy::Fifs => "fifs",
            ServingPolicy::EvFirst => "ev_first",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "fifs" | "FIFS" => Some(ServingPolicy::Fifs),
            "ev_first" | "evfirst" | "EVFirst" => Some(ServingPolicy::EvFirst),
            _ => None,
        }
    }
}

/// Which pair of station densities the user declared authoritative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensitySource {
    /// Line density and per-line point densities; planar densities derived.
    Line,
    /// Planar densities; per-line point densities derived from `lambda_l`.
    Planar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Poisson line process intensity (per m).
    pub lambda_l: f64,
    /// Station densities along a line (per m).
    pub lambda_p_ev: f64,
    pub lambda_p_d: f64,
    /// Planar station densities (per m²).
    pub lambda_c_ev: f64,
    pub lambda_c_d: f64,
    /// TBS density (per m²).
    pub lambda_t: f64,
    /// UAV density (per m²).
    pub lambda_u: f64,
    /// User cluster radius (m).
    pub r_c: f64,
    /// UAV altitude (m).
    pub h: f64,
}

impl GeometryParams {
    pub fn lambda_p(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Ev => self.lambda_p_ev,
            StationKind::Uav => self.lambda_p_d,
        }
    }

    pub fn lambda_c(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Ev => self.lambda_c_ev,
            StationKind::Uav => self.lambda_c_d,
        }
    }

    /// Returns a copy with `delta` (per m²) extra dedicated stations, keeping
    /// the line process and scaling the per-line UAV-station density.
    pub fn with_extra_uav_stations(&self, delta: f64) -> Self {
        let mut g = self.clone();
        g.lambda_c_d += delta;
        g.lambda_p_d = g.lambda_c_d / (PI * g.lambda_l);
        g
    }
}

/// Rotary-wing power model constants (SI units: W, m/s, kg/m³, m²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    pub p0: f64,
    pub pi: f64,
    pub u_tip: f64,
    pub v0: f64,
    pub d0: f64,
    pub rho_air: f64,
    pub s_rotor: f64,
    pub a_disc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// UAV battery (Wh).
    pub b_max: f64,
    /// EV battery (Wh).
    pub b_max_ev: f64,
    /// EV charging rate (W).
    pub p_cha: f64,
    /// Service-related power (W).
    pub p_s: f64,
    /// Travel-related power (W).
    pub p_m: f64,
    /// Cruise speed (m/min).
    pub v: f64,
    pub rotor: RotorParams,
    pub mu_soc: f64,
    pub sigma_soc: f64,
    /// UAV charging duration at EV stations (min).
    pub t_ch_d_ev: f64,
    /// UAV charging duration at dedicated stations (min).
    pub t_ch_d_d: f64,
}

impl EnergyParams {
    /// Travel-free service time `B_max / p_s` (min).
    pub fn t_ser_full(&self) -> f64 {
        units::drain_minutes(self.b_max, self.p_s)
    }

    /// Largest one-way distance a UAV can fly and still return (m).
    pub fn reachable_radius(&self) -> f64 {
        self.v * units::drain_minutes(self.b_max, self.p_m) / 2.0
    }

    pub fn t_ch(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Ev => self.t_ch_d_ev,
            StationKind::Uav => self.t_ch_d_d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationParams {
    pub c_slots: u32,
    pub m_per_slot: u32,
    /// EV arrival rate (per min).
    pub mu_e: f64,
    pub serving_policy: ServingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub rho_u: f64,
    pub rho_t: f64,
    pub alpha_l: f64,
    pub alpha_n: f64,
    pub alpha_t: f64,
    pub m_l: u32,
    pub m_n: u32,
    /// Mean additional losses, linear.
    pub eta_l: f64,
    pub eta_n: f64,
    pub c1: f64,
    pub c2: f64,
    /// SINR threshold, linear.
    pub gamma: f64,
    /// Noise power (W).
    pub sigma_n2: f64,
    pub a_fit: f64,
    pub b_fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    /// Energy price (USD/kWh).
    pub c_vol: f64,
    /// Maintenance per charger (USD/year).
    pub c_main: f64,
    pub w_wait: f64,
    pub w_inf_ev: f64,
    pub w_cov: f64,
    pub w_c: f64,
    pub w_inf_d: f64,
}

/// How UAVs pick a charging station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Association {
    /// Nearest by `min(R_ev, beta_d * R_d)`.
    BiasedDistance(f64),
    /// Each UAV goes to its nearest EV station with probability `beta_o`,
    /// otherwise to its nearest dedicated station.
    IndependentThinning(f64),
}

impl Association {
    pub fn beta(&self) -> f64 {
        match *self {
            Association::BiasedDistance(b) | Association::IndependentThinning(b) => b,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Association::BiasedDistance(_) => "biased",
            Association::IndependentThinning(_) => "thinning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub association: Association,
    /// Extra dedicated station density (per m²).
    pub delta_lambda_c_d: f64,
}

impl PolicyDecision {
    pub fn new(association: Association, delta_lambda_c_d: f64) -> Result<Self> {
        let d = Self { association, delta_lambda_c_d };
        d.validate()?;
        Ok(d)
    }

    /// Every UAV uses its own stations.
    pub fn no_sharing() -> Self {
        Self { association: Association::IndependentThinning(0.0), delta_lambda_c_d: 0.0 }
    }

    pub fn biased(beta_d: f64) -> Self {
        Self { association: Association::BiasedDistance(beta_d), delta_lambda_c_d: 0.0 }
    }

    pub fn thinning(beta_o: f64) -> Self {
        Self { association: Association::IndependentThinning(beta_o), delta_lambda_c_d: 0.0 }
    }

    pub fn is_no_sharing(&self) -> bool {
        matches!(self.association, Association::IndependentThinning(b) if b == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self.association {
            Association::BiasedDistance(b) if !(b > 0.0 && b.is_finite()) => {
                return Err(invalid("beta_d", "must be > 0"));
            }
            Association::IndependentThinning(b) if !(0.0..=1.0).contains(&b) => {
                return Err(invalid("beta_o", "must lie in [0, 1]"));
            }
            _ => {}
        }
        if !(self.delta_lambda_c_d >= 0.0 && self.delta_lambda_c_d.is_finite()) {
            return Err(invalid("delta_lambda_c_d", "must be >= 0"));
        }
        Ok(())
    }
}

/// The complete, validated parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub density_source: DensitySource,
    pub geometry: GeometryParams,
    pub energy: EnergyParams,
    pub station: StationParams,
    pub channel: ChannelParams,
    pub economics: EconomicParams,
}

/// Reference planar densities listed alongside the default line/point
/// densities; they disagree with `pi * lambda_l * lambda_p`.
pub const REFERENCE_LAMBDA_C_EV: f64 = 0.25 * units::PER_KM2;
pub const REFERENCE_LAMBDA_C_D: f64 = 0.5 * units::PER_KM2;

impl Default for ParamSet {
    fn default() -> Self {
        let lambda_l = 24.0 / PI * 1e-3;
        let lambda_p_ev = 2.1e-5;
        let lambda_p_d = 1.05e-5;
        ParamSet {
            density_source: DensitySource::Line,
            geometry: GeometryParams {
                lambda_l,
                lambda_p_ev,
                lambda_p_d,
                lambda_c_ev: PI * lambda_l * lambda_p_ev,
                lambda_c_d: PI * lambda_l * lambda_p_d,
                lambda_t: 1.0 * units::PER_KM2,
                lambda_u: 4.0 * units::PER_KM2,
                r_c: 100.0,
                h: 100.0,
            },
            energy: EnergyParams {
                b_max: 177.6,
                b_max_ev: 60.0 * units::KWH,
                p_cha: 120.0 * units::KW,
                p_s: 177.5,
                p_m: 161.8,
                v: units::mps_to_m_per_min(18.46),
                rotor: RotorParams {
                    p0: 79.86,
                    pi: 88.63,
                    u_tip: 120.0,
                    v0: 4.03,
                    d0: 0.6,
                    rho_air: 1.225,
                    s_rotor: 0.05,
                    a_disc: 0.503,
                },
                mu_soc: 3.0,
                sigma_soc: 0.6,
                t_ch_d_ev: 30.0,
                t_ch_d_d: 5.0,
            },
            station: StationParams {
                c_slots: 2,
                m_per_slot: 2,
                mu_e: 1.0 / 20.0,
                serving_policy: ServingPolicy::EvFirst,
            },
            channel: ChannelParams {
                rho_u: 0.2,
                rho_t: 10.0,
                alpha_l: 2.1,
                alpha_n: 4.0,
                alpha_t: 4.0,
                m_l: 3,
                m_n: 1,
                eta_l: units::db_to_linear(0.0),
                eta_n: units::db_to_linear(-20.0),
                c1: 25.27,
                c2: 0.2,
                gamma: units::db_to_linear(0.0),
                sigma_n2: 1e-9,
                a_fit: 3.5,
                b_fit: 3.5,
            },
            economics: EconomicParams {
                c_vol: 0.2,
                c_main: 1131.0,
                w_wait: -1.0 / 3.0,
                w_inf_ev: 2.0 / 3.0,
                w_cov: 8.0,
                w_c: -1.0,
                w_inf_d: -1e-4,
            },
        }
    }
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::InvalidParam { field: field.to_string(), reason: reason.to_string() }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, &format!("must be > 0 (got {x})")))
    }
}

fn nonnegative(field: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, &format!("must be >= 0 (got {x})")))
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

impl ParamSet {
    /// Checks every invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (k, v) in [
            ("lambda_l", g.lambda_l),
            ("lambda_p_ev", g.lambda_p_ev),
            ("lambda_p_d", g.lambda_p_d),
            ("lambda_c_ev", g.lambda_c_ev),
            ("lambda_c_d", g.lambda_c_d),
            ("lambda_t", g.lambda_t),
            ("lambda_u", g.lambda_u),
            ("r_c", g.r_c),
            ("h", g.h),
        ] {
            positive(k, v)?;
        }
        if !(g.lambda_c_ev > g.lambda_c_d) {
            return Err(Error::Invariant("lambda_c_ev > lambda_c_d violated".into()));
        }
        for (k, c, p) in [
            ("lambda_c_ev", g.lambda_c_ev, g.lambda_p_ev),
            ("lambda_c_d", g.lambda_c_d, g.lambda_p_d),
        ] {
            if !rel_close(c, PI * g.lambda_l * p, 1e-12) {
                return Err(Error::Invariant(format!(
                    "{k} = {c:e} disagrees with pi*lambda_l*lambda_p = {:e}",
                    PI * g.lambda_l * p
                )));
            }
        }

        let e = &self.energy;
        for (k, v) in [
            ("b_max", e.b_max),
            ("b_max_ev", e.b_max_ev),
            ("p_cha", e.p_cha),
            ("p_s", e.p_s),
            ("p_m", e.p_m),
            ("v", e.v),
            ("rotor_p0", e.rotor.p0),
            ("rotor_pi", e.rotor.pi),
            ("rotor_u_tip", e.rotor.u_tip),
            ("rotor_v0", e.rotor.v0),
            ("rotor_d0", e.rotor.d0),
            ("rotor_rho_air", e.rotor.rho_air),
            ("rotor_s", e.rotor.s_rotor),
            ("rotor_a_disc", e.rotor.a_disc),
            ("mu_soc", e.mu_soc),
            ("sigma_soc", e.sigma_soc),
            ("t_ch_d_ev", e.t_ch_d_ev),
            ("t_ch_d_d", e.t_ch_d_d),
        ] {
            positive(k, v)?;
        }
        if !(e.t_ch_d_ev > e.t_ch_d_d) {
            return Err(Error::Invariant("t_ch_d_ev > t_ch_d_d violated".into()));
        }

        let s = &self.station;
        if s.c_slots < 1 {
            return Err(invalid("c_slots", "must be >= 1"));
        }
        if s.m_per_slot < 1 {
            return Err(invalid("m_per_slot", "must be >= 1"));
        }
        nonnegative("mu_e", s.mu_e)?;

        let c = &self.channel;
        for (k, v) in [
            ("rho_u", c.rho_u),
            ("rho_t", c.rho_t),
            ("eta_l", c.eta_l),
            ("eta_n", c.eta_n),
            ("c1", c.c1),
            ("c2", c.c2),
            ("gamma", c.gamma),
            ("sigma_n2", c.sigma_n2),
            ("a_fit", c.a_fit),
            ("b_fit", c.b_fit),
        ] {
            positive(k, v)?;
        }
        for (k, v) in [("alpha_l", c.alpha_l), ("alpha_n", c.alpha_n), ("alpha_t", c.alpha_t)] {
            if !(v > 2.0 && v.is_finite()) {
                return Err(invalid(k, &format!("path-loss exponent must be > 2 (got {v})")));
            }
        }
        if c.m_l < 1 {
            return Err(invalid("m_l", "must be >= 1"));
        }
        if c.m_n < 1 {
            return Err(invalid("m_n", "must be >= 1"));
        }

        let m = &self.economics;
        nonnegative("c_vol", m.c_vol)?;
        nonnegative("c_main", m.c_main)?;
        for (k, v) in [
            ("w_wait", m.w_wait),
            ("w_inf_ev", m.w_inf_ev),
            ("w_cov", m.w_cov),
            ("w_c", m.w_c),
            ("w_inf_d", m.w_inf_d),
        ] {
            if !v.is_finite() {
                return Err(invalid(k, "must be finite"));
            }
        }
        Ok(())
    }

    /// Warns when the planar station densities differ from the reference
    /// pairing.
    pub fn density_pairing_warning(&self) -> Option<String> {
        let g = &self.geometry;
        let off = |a: f64, b: f64| !rel_close(a, b, 1e-3);
        if off(g.lambda_c_ev, REFERENCE_LAMBDA_C_EV) || off(g.lambda_c_d, REFERENCE_LAMBDA_C_D) {
            Some(format!(
                "planar densities lambda_c_ev = {:.4}/km², lambda_c_d = {:.4}/km² differ from the \
                 reference pairing (0.25/km², 0.5/km²); set density_source = \"planar\" and both \
                 lambda_c_* keys to override",
                g.lambda_c_ev / units::PER_KM2,
                g.lambda_c_d / units::PER_KM2
            ))
        } else {
            None
        }
    }

    /// Loads parameters from config text. Missing keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut p = ParamSet::default();
        p.apply_table(&table)?;
        Ok(p)
    }

    /// Applies `key=value` overrides on top of `self`, re-deriving and
    /// re-validating.
    pub fn with_overrides<'a, I: IntoIterator<Item = &'a str>>(&self, overrides: I) -> Result<Self> {
        let mut text = String::new();
        for kv in overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override `{kv}` is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            let value = if v.parse::<toml::Value>().is_ok() || v.starts_with('"') {
                v.to_string()
            } else {
                format!("\"{v}\"")
            };
            // toml::Value::from_str only accepts a full document in some
            // versions, so build one.
            let value = if format!("x = {value}").parse::<toml::Table>().is_ok() {
                value
            } else {
                format!("\"{v}\"")
            };
            let _ = writeln!(text, "{k} = {value}");
        }
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut p = self.clone();
        p.apply_table(&table)?;
        Ok(p)
    }

    fn apply_table(&mut self, table: &toml::Table) -> Result<()> {
        let mut seen_planar = false;
        let mut seen_points = false;
        let mut explicit_source: Option<DensitySource> = None;
        let mut claimed: Vec<&'static str> = Vec::new();

        for (key, value) in table {
            let canonical = set_field(self, key, value)?;
            if claimed.contains(&canonical) {
                return Err(Error::Parse(format!("`{key}` given more than once (via an alias)")));
            }
            claimed.push(canonical);
            match canonical {
                "lambda_c_ev" | "lambda_c_d" => seen_planar = true,
                "lambda_p_ev" | "lambda_p_d" => seen_points = true,
                "density_source" => {
                    explicit_source = Some(self.density_source);
                }
                _ => {}
            }
        }

        let source = match explicit_source {
            Some(s) => s,
            None if seen_planar && seen_points => {
                return Err(Error::Invariant(
                    "both lambda_p_* and lambda_c_* given; set density_source = \"line\" or \"planar\" \
                     to say which pair is authoritative"
                        .into(),
                ));
            }
            None if seen_planar => DensitySource::Planar,
            None if seen_points => DensitySource::Line,
            None => self.density_source,
        };
        self.density_source = source;

        // Ordering is checked on the user-facing planar values before anything
        // is re-derived from them.
        let g = &mut self.geometry;
        if source == DensitySource::Planar && !(g.lambda_c_ev > g.lambda_c_d) {
            return Err(Error::Invariant("lambda_c_ev > lambda_c_d violated".into()));
        }
        positive("lambda_l", g.lambda_l)?;
        match source {
            DensitySource::Line => {
                g.lambda_c_ev = PI * g.lambda_l * g.lambda_p_ev;
                g.lambda_c_d = PI * g.lambda_l * g.lambda_p_d;
            }
            DensitySource::Planar => {
                g.lambda_p_ev = g.lambda_c_ev / (PI * g.lambda_l);
                g.lambda_p_d = g.lambda_c_d / (PI * g.lambda_l);
            }
        }
        self.validate()
    }

    /// Serializes every field; reloading the text yields an identical set.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in field_values(self) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Checks both EV queue conditions for the current station parameters.
    pub fn stability_check(&self) -> Result<bool> {
        stability_check(self)
    }
}

/// True iff the EV queue is stable (`mu_e E[T] < c`) and the mean-squared EV
/// waiting-time denominator is positive (`mu_e E[T]^2 < 1`).
pub fn stability_check(p: &ParamSet) -> Result<bool> {
    if p.station.mu_e == 0.0 {
        return Ok(true);
    }
    let mom = energy::charge_time_moments(&p.energy)?;
    let load = p.station.mu_e * mom.mean;
    let squared = p.station.mu_e * mom.mean * mom.mean;
    Ok(load < p.station.c_slots as f64 && squared < 1.0)
}

/// Only the capacity condition `mu_e E[T] < c`.
pub fn ev_queue_stable(mu_e: f64, mean_t_ch_ev: f64, c_slots: u32) -> bool {
    mu_e * mean_t_ch_ev < c_slots as f64
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn field_values(p: &ParamSet) -> Vec<(&'static str, String)> {
    let g = &p.geometry;
    let e = &p.energy;
    let r = &e.rotor;
    let s = &p.station;
    let c = &p.channel;
    let m = &p.economics;
    let src = match p.density_source {
        DensitySource::Line => "\"line\"",
        DensitySource::Planar => "\"planar\"",
    };
    vec![
        ("density_source", src.to_string()),
        ("lambda_l", fmt_f64(g.lambda_l)),
        ("lambda_p_ev", fmt_f64(g.lambda_p_ev)),
        ("lambda_p_d", fmt_f64(g.lambda_p_d)),
        ("lambda_c_ev", fmt_f64(g.lambda_c_ev)),
        ("lambda_c_d", fmt_f64(g.lambda_c_d)),
        ("lambda_t", fmt_f64(g.lambda_t)),
        ("lambda_u", fmt_f64(g.lambda_u)),
        ("r_c", fmt_f64(g.r_c)),
        ("h", fmt_f64(g.h)),
        ("b_max", fmt_f64(e.b_max)),
        ("b_max_ev", fmt_f64(e.b_max_ev)),
        ("p_cha", fmt_f64(e.p_cha)),
        ("p_s", fmt_f64(e.p_s)),
        ("p_m", fmt_f64(e.p_m)),
        ("v", fmt_f64(e.v)),
        ("rotor_p0", fmt_f64(r.p0)),
        ("rotor_pi", fmt_f64(r.pi)),
        ("rotor_u_tip", fmt_f64(r.u_tip)),
        ("rotor_v0", fmt_f64(r.v0)),
        ("rotor_d0", fmt_f64(r.d0)),
        ("rotor_rho_air", fmt_f64(r.rho_air)),
        ("rotor_s", fmt_f64(r.s_rotor)),
        ("rotor_a_disc", fmt_f64(r.a_disc)),
        ("mu_soc", fmt_f64(e.mu_soc)),
        ("sigma_soc", fmt_f64(e.sigma_soc)),
        ("t_ch_d_ev", fmt_f64(e.t_ch_d_ev)),
        ("t_ch_d_d", fmt_f64(e.t_ch_d_d)),
        ("c_slots", s.c_slots.to_string()),
        ("m_per_slot", s.m_per_slot.to_string()),
        ("mu_e", fmt_f64(s.mu_e)),
        ("serving_policy", format!("\"{}\"", s.serving_policy.label())),
        ("rho_u", fmt_f64(c.rho_u)),
        ("rho_t", fmt_f64(c.rho_t)),
        ("alpha_l", fmt_f64(c.alpha_l)),
        ("alpha_n", fmt_f64(c.alpha_n)),
        ("alpha_t", fmt_f64(c.alpha_t)),
        ("m_l", c.m_l.to_string()),
        ("m_n", c.m_n.to_string()),
        ("eta_l", fmt_f64(c.eta_l)),
        ("eta_n", fmt_f64(c.eta_n)),
        ("c1", fmt_f64(c.c1)),
        ("c2", fmt_f64(c.c2)),
        ("gamma", fmt_f64(c.gamma)),
        ("sigma_n2", fmt_f64(c.sigma_n2)),
        ("a_fit", fmt_f64(c.a_fit)),
        ("b_fit", fmt_f64(c.b_fit)),
        ("c_vol", fmt_f64(m.c_vol)),
        ("c_main", fmt_f64(m.c_main)),
        ("w_wait", fmt_f64(m.w_wait)),
        ("w_inf_ev", fmt_f64(m.w_inf_ev)),
        ("w_cov", fmt_f64(m.w_cov)),
        ("w_c", fmt_f64(m.w_c)),
        ("w_inf_d", fmt_f64(m.w_inf_d)),
    ]
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(key, "expected a number")),
    }
}

fn as_u32(key: &str, v: &toml::Value) -> Result<u32> {
    match v {
        toml::Value::Integer(i) if *i >= 0 && *i <= u32::MAX as i64 => Ok(*i as u32),
        toml::Value::Float(f) if f.fract() == 0.0 && *f >= 0.0 && *f <= u32::MAX as f64 => Ok(*f as u32),
        _ => Err(invalid(key, "expected a non-negative integer")),
    }
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| invalid(key, "expected a string"))
}

/// Sets one field from a config entry; returns the canonical key it maps to.
fn set_field(p: &mut ParamSet, key: &str, v: &toml::Value) -> Result<&'static str> {
    let g = &mut p.geometry;
    let e = &mut p.energy;
    let s = &mut p.station;
    let c = &mut p.channel;
    let m = &mut p.economics;
    let f = |v: &toml::Value| as_f64(key, v);
    let canonical = match key {
        "density_source" => {
            p.density_source = match as_str(key, v)? {
                "line" | "points" => DensitySource::Line,
                "planar" => DensitySource::Planar,
                other => return Err(invalid(key, &format!("expected \"line\" or \"planar\", got {other:?}"))),
            };
            "density_source"
        }
        "lambda_l" => { g.lambda_l = f(v)?; "lambda_l" }
        "lambda_p_ev" => { g.lambda_p_ev = f(v)?; "lambda_p_ev" }
        "lambda_p_d" => { g.lambda_p_d = f(v)?; "lambda_p_d" }
        "lambda_c_ev" => { g.lambda_c_ev = f(v)?; "lambda_c_ev" }
        "lambda_c_ev_per_km2" => { g.lambda_c_ev = f(v)? * units::PER_KM2; "lambda_c_ev" }
        "lambda_c_d" => { g.lambda_c_d = f(v)?; "lambda_c_d" }
        "lambda_c_d_per_km2" => { g.lambda_c_d = f(v)? * units::PER_KM2; "lambda_c_d" }
        "lambda_t" => { g.lambda_t = f(v)?; "lambda_t" }
        "lambda_t_per_km2" => { g.lambda_t = f(v)? * units::PER_KM2; "lambda_t" }
        "lambda_u" => { g.lambda_u = f(v)?; "lambda_u" }
        "lambda_u_per_km2" => { g.lambda_u = f(v)? * units::PER_KM2; "lambda_u" }
        "r_c" => { g.r_c = f(v)?; "r_c" }
        "h" => { g.h = f(v)?; "h" }
        "b_max" => { e.b_max = f(v)?; "b_max" }
        "b_max_ev" => { e.b_max_ev = f(v)?; "b_max_ev" }
        "b_max_ev_kwh" => { e.b_max_ev = f(v)? * units::KWH; "b_max_ev" }
        "p_cha" => { e.p_cha = f(v)?; "p_cha" }
        "p_cha_kw" => { e.p_cha = f(v)? * units::KW; "p_cha" }
        "p_s" => { e.p_s = f(v)?; "p_s" }
        "p_m" => { e.p_m = f(v)?; "p_m" }
        "v" => { e.v = f(v)?; "v" }
        "v_mps" => { e.v = units::mps_to_m_per_min(f(v)?); "v" }
        "rotor_p0" => { e.rotor.p0 = f(v)?; "rotor_p0" }
        "rotor_pi" => { e.rotor.pi = f(v)?; "rotor_pi" }
        "rotor_u_tip" => { e.rotor.u_tip = f(v)?; "rotor_u_tip" }
        "rotor_v0" => { e.rotor.v0 = f(v)?; "rotor_v0" }
        "rotor_d0" => { e.rotor.d0 = f(v)?; "rotor_d0" }
        "rotor_rho_air" => { e.rotor.rho_air = f(v)?; "rotor_rho_air" }
        "rotor_s" => { e.rotor.s_rotor = f(v)?; "rotor_s" }
        "rotor_a_disc" => { e.rotor.a_disc = f(v)?; "rotor_a_disc" }
        "mu_soc" => { e.mu_soc = f(v)?; "mu_soc" }
        "sigma_soc" => { e.sigma_soc = f(v)?; "sigma_soc" }
        "t_ch_d_ev" => { e.t_ch_d_ev = f(v)?; "t_ch_d_ev" }
        "t_ch_d_d" => { e.t_ch_d_d = f(v)?; "t_ch_d_d" }
        "c_slots" => { s.c_slots = as_u32(key, v)?; "c_slots" }
        "m_per_slot" => { s.m_per_slot = as_u32(key, v)?; "m_per_slot" }
        "mu_e" => { s.mu_e = f(v)?; "mu_e" }
        "ev_interarrival" => {
            let t = f(v)?;
            if !(t > 0.0) {
                return Err(invalid(key, "interarrival time must be > 0"));
            }
            s.mu_e = 1.0 / t;
            "mu_e"
        }
        "serving_policy" => {
            let raw = as_str(key, v)?;
            s.serving_policy = ServingPolicy::parse(raw)
                .ok_or_else(|| invalid(key, &format!("expected \"fifs\" or \"ev_first\", got {raw:?}")))?;
            "serving_policy"
        }
        "rho_u" => { c.rho_u = f(v)?; "rho_u" }
        "rho_t" => { c.rho_t = f(v)?; "rho_t" }
        "alpha_l" => { c.alpha_l = f(v)?; "alpha_l" }
        "alpha_n" => { c.alpha_n = f(v)?; "alpha_n" }
        "alpha_t" => { c.alpha_t = f(v)?; "alpha_t" }
        "m_l" => { c.m_l = as_u32(key, v)?; "m_l" }
        "m_n" => { c.m_n = as_u32(key, v)?; "m_n" }
        "eta_l" => { c.eta_l = f(v)?; "eta_l" }
        "eta_l_db" => { c.eta_l = units::db_to_linear(f(v)?); "eta_l" }
        "eta_n" => { c.eta_n = f(v)?; "eta_n" }
        "eta_n_db" => { c.eta_n = units::db_to_linear(f(v)?); "eta_n" }
        "c1" => { c.c1 = f(v)?; "c1" }
        "c2" => { c.c2 = f(v)?; "c2" }
        "gamma" => { c.gamma = f(v)?; "gamma" }
        "gamma_db" => { c.gamma = units::db_to_linear(f(v)?); "gamma" }
        "sigma_n2" => { c.sigma_n2 = f(v)?; "sigma_n2" }
        "a_fit" => { c.a_fit = f(v)?; "a_fit" }
        "b_fit" => { c.b_fit = f(v)?; "b_fit" }
        "c_vol" => { m.c_vol = f(v)?; "c_vol" }
        "c_main" => { m.c_main = f(v)?; "c_main" }
        "w_wait" => { m.w_wait = f(v)?; "w_wait" }
        "w_inf_ev" => { m.w_inf_ev = f(v)?; "w_inf_ev" }
        "w_cov" => { m.w_cov = f(v)?; "w_cov" }
        "w_c" => { m.w_c = f(v)?; "w_c" }
        "w_inf_d" => { m.w_inf_d = f(v)?; "w_inf_d" }
        other => return Err(Error::UnknownKey(other.to_string())),
    };
    Ok(canonical)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_source_gives_defaults() {
        let p = ParamSet::from_config_str("").unwrap();
        assert_eq!(p, ParamSet::default());
        assert!((p.geometry.lambda_t / units::PER_KM2 - 1.0).abs() < 1e-12);
        assert!((p.geometry.lambda_u / units::PER_KM2 - 4.0).abs() < 1e-12);
        assert_eq!(p.geometry.h, 100.0);
        assert_eq!(p.channel.gamma, 1.0);
    }

    #[test]
    fn planar_ordering_violation_is_reported() {
        let err = ParamSet::from_config_str("lambda_c_ev_per_km2 = 0.25\nlambda_c_d_per_km2 = 0.5\n")
            .unwrap_err();
        assert_eq!(err.to_string(), "lambda_c_ev > lambda_c_d violated");
    }

    #[test]
    fn line_pair_derives_planar_density_and_flags_reference_pairing() {
        let text = format!("lambda_l = {}\nlambda_p_ev = 2.1e-5\n", 24.0 / PI * 1e-3);
        let p = ParamSet::from_config_str(&text).unwrap();
        let per_km2 = p.geometry.lambda_c_ev / units::PER_KM2;
        assert!((per_km2 - 0.504).abs() < 1e-9, "{per_km2}");
        assert!(p.density_pairing_warning().is_some());
    }

    #[test]
    fn both_pairs_without_source_is_an_error() {
        let err = ParamSet::from_config_str("lambda_p_ev = 2.1e-5\nlambda_c_ev = 5e-7\n").unwrap_err();
        assert!(err.to_string().contains("density_source"), "{err}");
    }

    #[test]
    fn planar_override_is_accepted_when_declared() {
        let text = "density_source = \"planar\"\nlambda_c_ev_per_km2 = 0.5\nlambda_c_d_per_km2 = 0.25\n\
                    lambda_p_ev = 1.0\n";
        let p = ParamSet::from_config_str(text).unwrap();
        assert!(rel_close(p.geometry.lambda_p_ev, 0.5e-6 / (PI * p.geometry.lambda_l), 1e-12));
        assert!(p.density_pairing_warning().is_some());
    }

    #[test]
    fn unknown_key_is_reported() {
        let err = ParamSet::from_config_str("lambda_q = 3\n").unwrap_err();
        assert_eq!(err, Error::UnknownKey("lambda_q".into()));
    }

    #[test]
    fn alias_and_canonical_together_rejected() {
        let err = ParamSet::from_config_str("gamma = 1.0\ngamma_db = 0.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn first_violation_names_field() {
        let err = ParamSet::from_config_str("c_slots = 0\n").unwrap_err();
        assert!(err.to_string().contains("c_slots"));
        let err = ParamSet::from_config_str("alpha_l = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("alpha_l"));
        let err = ParamSet::from_config_str("t_ch_d_ev = 4\n").unwrap_err();
        assert!(err.to_string().contains("t_ch_d_ev > t_ch_d_d"));
    }

    #[test]
    fn round_trip_defaults_exact() {
        let p = ParamSet::default();
        let q = ParamSet::from_config_str(&p.to_config_string()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn overrides_apply() {
        let p = ParamSet::default().with_overrides(["c_slots=3", "serving_policy=fifs", "ev_interarrival=40"]).unwrap();
        assert_eq!(p.station.c_slots, 3);
        assert_eq!(p.station.serving_policy, ServingPolicy::Fifs);
        assert!((p.station.mu_e - 0.025).abs() < 1e-15);
    }

    #[test]
    fn stability_boundaries() {
        let mut p = ParamSet::default();
        p.station.mu_e = 0.0;
        assert!(stability_check(&p).unwrap());
        let mean = energy::charge_time_moments(&p.energy).unwrap().mean;
        p.station.mu_e = p.station.c_slots as f64 / mean;
        assert!(!stability_check(&p).unwrap());
    }

    #[test]
    fn decision_invariants() {
        assert!(PolicyDecision::new(Association::BiasedDistance(0.0), 0.0).is_err());
        assert!(PolicyDecision::new(Association::IndependentThinning(1.5), 0.0).is_err());
        assert!(PolicyDecision::new(Association::IndependentThinning(0.3), -1.0).is_err());
        assert!(PolicyDecision::new(Association::BiasedDistance(2.0), 1e-7).is_ok());
        assert!(PolicyDecision::no_sharing().is_no_sharing());
    }

    proptest::proptest! {
        #[test]
        fn round_trip_is_exact(
            lu in 0.5f64..20.0,
            c in 1u32..6,
            mu in 0.0f64..0.2,
            gamma_db in -10.0f64..10.0,
            w in -1.0f64..1.0,
        ) {
            let mut p = ParamSet::default();
            p.geometry.lambda_u = lu * units::PER_KM2;
            p.station.c_slots = c;
            p.station.mu_e = mu;
            p.channel.gamma = units::db_to_linear(gamma_db);
            p.economics.w_wait = w;
            let q = ParamSet::from_config_str(&p.to_config_string()).unwrap();
            proptest::prop_assert_eq!(p, q);
        }
    }
}
