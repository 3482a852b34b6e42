//! Downlink SINR coverage of a typical user: its cluster UAV when that UAV
//! is available, otherwise the strongest of the nearest available LoS UAV,
//! NLoS UAV and TBS.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::availability::{self, AvailabilityModel, BetaKind, BetaOptimum};
use crate::error::{Error, Result};
use crate::params::{ChannelParams, EnergyParams, ParamSet, PolicyDecision};
use crate::quad::{self, FailureSlot, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkClass {
    ClusterLoS,
    ClusterNLoS,
    NearbyLoS,
    NearbyNLoS,
    Tbs,
}

impl LinkClass {
    pub const ALL: [LinkClass; 5] =
        [LinkClass::ClusterLoS, LinkClass::ClusterNLoS, LinkClass::NearbyLoS, LinkClass::NearbyNLoS, LinkClass::Tbs];

    pub fn label(self) -> &'static str {
        match self {
            LinkClass::ClusterLoS => "cluster_los",
            LinkClass::ClusterNLoS => "cluster_nlos",
            LinkClass::NearbyLoS => "nearby_los",
            LinkClass::NearbyNLoS => "nearby_nlos",
            LinkClass::Tbs => "tbs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoveragePath {
    /// Gamma-CCDF series with Laplace-transform derivatives.
    Exact,
    /// Alzer binomial expansion.
    Approx,
}

impl CoveragePath {
    pub fn label(self) -> &'static str {
        match self {
            CoveragePath::Exact => "exact",
            CoveragePath::Approx => "approx",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageBreakdown {
    pub p_a: f64,
    pub cluster_los: f64,
    pub cluster_nlos: f64,
    pub nearby_los: f64,
    pub nearby_nlos: f64,
    pub tbs: f64,
    pub total: f64,
    pub path: CoveragePath,
    pub warnings: Vec<String>,
}

impl CoverageBreakdown {
    pub fn component(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::ClusterLoS => self.cluster_los,
            LinkClass::ClusterNLoS => self.cluster_nlos,
            LinkClass::NearbyLoS => self.nearby_los,
            LinkClass::NearbyNLoS => self.nearby_nlos,
            LinkClass::Tbs => self.tbs,
        }
    }
}

/// `P_l(r)` for a UAV at altitude `h` and Euclidean distance `r`.
pub fn los_probability(r: f64, ch: &ChannelParams, h: f64) -> Result<f64> {
    if !(h > 0.0) || !(r >= h) {
        return Err(Error::Domain { what: "user-UAV distance below altitude", value: r });
    }
    let z = (r * r - h * h).max(0.0).sqrt();
    Ok(los_from_horizontal(z, h, ch))
}

pub(crate) fn los_from_horizontal(z: f64, h: f64, ch: &ChannelParams) -> f64 {
    let angle = h.atan2(z).to_degrees();
    1.0 / (1.0 + ch.c1 * (-ch.c2 * (angle - ch.c1)).exp())
}

/// `1 - (m / (m + x))^m` without cancellation for small `x`.
fn nakagami_mgf_complement(m: u32, x: f64) -> f64 {
    let m = m as f64;
    -(-m * (x / m).ln_1p()).exp_m1()
}

/// `β₂ = (m!)^{-1/m}`.
pub fn alzer_beta2(m: u32) -> f64 {
    let ln_fact: f64 = (1..=m).map(|k| (k as f64).ln()).sum();
    (-ln_fact / m as f64).exp()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Far edge of the numerically integrated interference field (m).
const FAR_FIELD: f64 = 1e12;
/// Survival probability at which outer distance integrals are cut.
const OUTER_SURVIVAL: f64 = 1e-14;
pub(crate) const FIELD_TOL: Tolerance = Tolerance::new(1e-9, 1e-11);
const OUTER_TOL: Tolerance = Tolerance::new(1e-12, 1e-9);
const DERIVATIVE_STEP: f64 = 0.1;
const DERIVATIVE_AGREEMENT: f64 = 1e-3;

/// `∫_lo^∞ f(z) dz` where `f(z) → coef · z^{1-α}` far out: linear up to 1 m,
/// log-scale up to [`FAR_FIELD`], analytic power-law tail beyond.
pub(crate) fn far_field_integral<F: Fn(f64) -> f64>(f: F, lo: f64, coef: f64, alpha: f64) -> Result<f64> {
    let mut total = 0.0;
    if lo < 1.0 {
        total += quad::integrate(&f, lo, 1.0, FIELD_TOL)?.value;
    }
    let start = lo.max(1.0);
    if start < FAR_FIELD {
        total += quad::integrate_log(&f, start, FAR_FIELD, FIELD_TOL)?.value;
    }
    total += coef * FAR_FIELD.max(lo).powf(2.0 - alpha) / (alpha - 2.0);
    Ok(total)
}

/// Coverage evaluator for a given availability `p_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageModel {
    pub ch: ChannelParams,
    pub h: f64,
    pub r_c: f64,
    /// Density of available UAVs, `P_a λ_u`.
    pub lambda_avail: f64,
    pub lambda_t: f64,
    pub p_a: f64,
}

impl CoverageModel {
    pub fn new(p: &ParamSet, p_a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_a) {
            return Err(Error::Domain { what: "availability", value: p_a });
        }
        for (name, a) in [("alpha_l", p.channel.alpha_l), ("alpha_n", p.channel.alpha_n), ("alpha_t", p.channel.alpha_t)] {
            if !(a > 2.0) {
                return Err(Error::InvalidParam { field: name.into(), reason: "path-loss exponent must exceed 2".into() });
            }
        }
        Ok(Self {
            ch: p.channel.clone(),
            h: p.geometry.h,
            r_c: p.geometry.r_c,
            lambda_avail: p_a * p.geometry.lambda_u,
            lambda_t: p.geometry.lambda_t,
            p_a,
        })
    }

    fn horizontal(&self, r: f64) -> f64 {
        (r * r - self.h * self.h).max(0.0).sqrt()
    }

    pub fn p_los(&self, r: f64) -> f64 {
        los_from_horizontal(self.horizontal(r), self.h, &self.ch)
    }

    /// LoS probability seen from infinitely far away.
    fn p_los_far(&self) -> f64 {
        los_from_horizontal(f64::INFINITY, self.h, &self.ch)
    }

    /// `∫_0^z t P_l(√(t²+h²)) dt` (and its NLoS complement) over horizontal radius `z`.
    fn los_mass(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        Ok(quad::integrate(|t| t * los_from_horizontal(t, self.h, &self.ch), 0.0, z, FIELD_TOL)?.value)
    }

    fn mass(&self, z: f64, los: bool) -> Result<f64> {
        let l = self.los_mass(z)?;
        Ok(if los { l } else { 0.5 * z * z - l })
    }

    // Boundary radii of the strongest-power association.

    /// Distance at which an NLoS UAV matches the average power of a LoS UAV at `r`.
    pub fn nlos_balance(&self, r: f64) -> f64 {
        let c = &self.ch;
        (c.eta_n / c.eta_l).powf(1.0 / c.alpha_n) * r.powf(c.alpha_l / c.alpha_n)
    }

    fn d_n(&self, r: f64) -> f64 {
        self.nlos_balance(r).max(self.h)
    }

    fn d_l(&self, r: f64) -> f64 {
        let c = &self.ch;
        ((c.eta_l / c.eta_n).powf(1.0 / c.alpha_l) * r.powf(c.alpha_n / c.alpha_l)).max(self.h)
    }

    fn d_lt(&self, r: f64) -> f64 {
        let c = &self.ch;
        (c.rho_t / (c.rho_u * c.eta_l)).powf(1.0 / c.alpha_t) * r.powf(c.alpha_l / c.alpha_t)
    }

    fn d_nt(&self, r: f64) -> f64 {
        let c = &self.ch;
        (c.rho_t / (c.rho_u * c.eta_n)).powf(1.0 / c.alpha_t) * r.powf(c.alpha_n / c.alpha_t)
    }

    fn d_tl(&self, r: f64) -> f64 {
        let c = &self.ch;
        ((c.rho_u * c.eta_l / c.rho_t).powf(1.0 / c.alpha_l) * r.powf(c.alpha_t / c.alpha_l)).max(self.h)
    }

    fn d_tn(&self, r: f64) -> f64 {
        let c = &self.ch;
        ((c.rho_u * c.eta_n / c.rho_t).powf(1.0 / c.alpha_n) * r.powf(c.alpha_t / c.alpha_n)).max(self.h)
    }

    fn uav_void(&self, z: f64, los: bool) -> Result<f64> {
        Ok((-2.0 * PI * self.lambda_avail * self.mass(z, los)?).exp())
    }

    fn tbs_void(&self, d: f64) -> f64 {
        (-PI * self.lambda_t * d * d).exp()
    }

    pub fn cluster_pdf(&self, r: f64) -> f64 {
        if r < self.h || r > (self.h * self.h + self.r_c * self.r_c).sqrt() {
            0.0
        } else {
            2.0 * r / (self.r_c * self.r_c)
        }
    }

    /// Density of the distance to the nearest available LoS (or NLoS) UAV.
    pub fn nearby_pdf(&self, r: f64, los: bool) -> Result<f64> {
        if r < self.h || self.lambda_avail <= 0.0 {
            return Ok(0.0);
        }
        let p = if los { self.p_los(r) } else { 1.0 - self.p_los(r) };
        Ok(2.0 * PI * self.lambda_avail * p * r * self.uav_void(self.horizontal(r), los)?)
    }

    pub fn nearby_cdf(&self, r: f64, los: bool) -> Result<f64> {
        if r <= self.h {
            return Ok(0.0);
        }
        Ok(-(-2.0 * PI * self.lambda_avail * self.mass(self.horizontal(r), los)?).exp_m1())
    }

    pub fn tbs_pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        2.0 * PI * r * self.lambda_t * (-PI * self.lambda_t * r * r).exp()
    }

    /// Probability that a serving candidate of `class` at distance `r` wins
    /// the strongest-average-power comparison. Cluster links always win.
    pub fn assoc_prob(&self, r: f64, class: LinkClass) -> Result<f64> {
        match class {
            LinkClass::ClusterLoS | LinkClass::ClusterNLoS => Ok(1.0),
            LinkClass::NearbyLoS => {
                Ok(self.uav_void(self.horizontal(self.d_n(r)), false)? * self.tbs_void(self.d_lt(r)))
            }
            LinkClass::NearbyNLoS => {
                Ok(self.uav_void(self.horizontal(self.d_l(r)), true)? * self.tbs_void(self.d_nt(r)))
            }
            LinkClass::Tbs => Ok(self.uav_void(self.horizontal(self.d_tl(r)), true)?
                * self.uav_void(self.horizontal(self.d_tn(r)), false)?),
        }
    }

    /// Horizontal exclusion radii `(NLoS UAVs, LoS UAVs, TBSs)` of the
    /// interference field when the serving node of `class` is at `r`.
    pub fn exclusion(&self, r: f64, class: LinkClass) -> (f64, f64, f64) {
        match class {
            LinkClass::ClusterLoS | LinkClass::ClusterNLoS => (0.0, 0.0, 0.0),
            LinkClass::NearbyLoS => (self.horizontal(self.d_n(r)), self.horizontal(r), self.d_lt(r)),
            LinkClass::NearbyNLoS => (self.horizontal(r), self.horizontal(self.d_l(r)), self.d_nt(r)),
            LinkClass::Tbs => (self.horizontal(self.d_tn(r)), self.horizontal(self.d_tl(r)), r),
        }
    }

    fn uav_field(&self, s: f64, lo: f64, los: bool) -> Result<f64> {
        let c = &self.ch;
        let (m, eta, alpha) = if los { (c.m_l, c.eta_l, c.alpha_l) } else { (c.m_n, c.eta_n, c.alpha_n) };
        let k = s * eta * c.rho_u;
        let h2 = self.h * self.h;
        let f = |z: f64| {
            let d2 = z * z + h2;
            let p = los_from_horizontal(z, self.h, c);
            let p = if los { p } else { 1.0 - p };
            nakagami_mgf_complement(m, k * d2.powf(-alpha / 2.0)) * z * p
        };
        let p_far = if los { self.p_los_far() } else { 1.0 - self.p_los_far() };
        far_field_integral(f, lo, k * p_far, alpha)
    }

    fn tbs_field(&self, s: f64, lo: f64) -> Result<f64> {
        let c = &self.ch;
        let k = s * c.rho_t;
        let f = |z: f64| {
            let x = k * z.powf(-c.alpha_t);
            z * x / (1.0 + x)
        };
        far_field_integral(f, lo, k, c.alpha_t)
    }

    /// Laplace transform of the aggregate interference, `L_I(s, r)`.
    pub fn laplace_interference(&self, s: f64, r: f64, class: LinkClass) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain { what: "Laplace argument", value: s });
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        let (a, b, c) = self.exclusion(r, class);
        let mut exponent = 0.0;
        if self.lambda_avail > 0.0 {
            exponent += 2.0 * PI * self.lambda_avail * (self.uav_field(s, a, false)? + self.uav_field(s, b, true)?);
        }
        if self.lambda_t > 0.0 {
            exponent += 2.0 * PI * self.lambda_t * self.tbs_field(s, c)?;
        }
        Ok((-exponent).exp())
    }

    /// `L_{σ²+I}(s, r) = e^{-sσ²} L_I(s, r)`.
    pub fn laplace_total(&self, s: f64, r: f64, class: LinkClass) -> Result<f64> {
        Ok((-s * self.ch.sigma_n2).exp() * self.laplace_interference(s, r, class)?)
    }

    /// Nakagami shape and `g(r)` of the serving link.
    fn link(&self, r: f64, class: LinkClass) -> (u32, f64) {
        let c = &self.ch;
        match class {
            LinkClass::ClusterLoS | LinkClass::NearbyLoS => (c.m_l, c.gamma / (c.eta_l * c.rho_u) * r.powf(c.alpha_l)),
            LinkClass::ClusterNLoS | LinkClass::NearbyNLoS => {
                (c.m_n, c.gamma / (c.eta_n * c.rho_u) * r.powf(c.alpha_n))
            }
            LinkClass::Tbs => (1, c.gamma / c.rho_t * r.powf(c.alpha_t)),
        }
    }

    /// `P(SINR ≥ γ | r, class)` before association weighting.
    pub fn conditional_success(&self, r: f64, class: LinkClass, path: CoveragePath, warnings: &mut Vec<String>) -> Result<f64> {
        let (m, g) = self.link(r, class);
        let lt = |s: f64| self.laplace_total(s, r, class);
        if m == 1 {
            return lt(g);
        }
        match path {
            CoveragePath::Approx => {
                let b2 = alzer_beta2(m);
                let mut total = 0.0;
                for k in 1..=m {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    total += sign * binomial(m, k) * lt(k as f64 * b2 * m as f64 * g)?;
                }
                Ok(total)
            }
            CoveragePath::Exact => {
                if m > 3 {
                    return Err(Error::InvalidParam {
                        field: "m".into(),
                        reason: format!("exact coverage path supports Nakagami m <= 3, got {m}"),
                    });
                }
                let s0 = m as f64 * g;
                let mut total = lt(s0)?;
                for k in 1..m {
                    let (d, spread) = scaled_derivative(&lt, s0, k)?;
                    if spread > DERIVATIVE_AGREEMENT {
                        warnings.push(format!(
                            "derivative of order {k} unstable at r = {r:.3} m ({}): spread {spread:.2e}",
                            class.label()
                        ));
                    }
                    // (-s)^k / k! · L^{(k)}(s) with d = s^k L^{(k)}(s) / k!.
                    total += if k % 2 == 1 { -d } else { d };
                }
                Ok(total)
            }
        }
    }

    fn outer_limit(&self, los: bool) -> Result<f64> {
        let target = -OUTER_SURVIVAL.ln() / (2.0 * PI * self.lambda_avail);
        let mut z = 10.0 * self.h;
        while self.mass(z, los)? < target {
            z *= 2.0;
            if z > 1e9 {
                return Err(Error::Domain { what: "nearest available UAV distance", value: z });
            }
        }
        Ok((z * z + self.h * self.h).sqrt())
    }

    /// One of the five coverage components.
    pub fn component(&self, class: LinkClass, path: CoveragePath, warnings: &mut Vec<String>) -> Result<f64> {
        let slot = FailureSlot::new();
        let mut local = Vec::new();
        let value = {
            let mut eval = |r: f64, weight: f64| -> f64 {
                if weight == 0.0 {
                    return 0.0;
                }
                match self.conditional_success(r, class, path, &mut local) {
                    Ok(v) => v * weight,
                    Err(e) => {
                        slot.record(e);
                        0.0
                    }
                }
            };
            match class {
                LinkClass::ClusterLoS | LinkClass::ClusterNLoS => {
                    let los = class == LinkClass::ClusterLoS;
                    let top = (self.h * self.h + self.r_c * self.r_c).sqrt();
                    let nodes = quad::composite_nodes(self.h, top, 8);
                    nodes
                        .iter()
                        .map(|&(r, w)| {
                            let p = if los { self.p_los(r) } else { 1.0 - self.p_los(r) };
                            w * eval(r, p * self.cluster_pdf(r))
                        })
                        .sum()
                }
                LinkClass::NearbyLoS | LinkClass::NearbyNLoS => {
                    if self.lambda_avail <= 0.0 {
                        0.0
                    } else {
                        let los = class == LinkClass::NearbyLoS;
                        let top = self.outer_limit(los)?;
                        let cell = std::cell::RefCell::new(&mut eval);
                        let f = |r: f64| {
                            let weight = match (self.nearby_pdf(r, los), self.assoc_prob(r, class)) {
                                (Ok(f), Ok(a)) => f * a,
                                (Err(e), _) | (_, Err(e)) => {
                                    slot.record(e);
                                    0.0
                                }
                            };
                            (cell.borrow_mut())(r, weight)
                        };
                        quad::integrate_log(f, self.h, top, OUTER_TOL)?.value
                    }
                }
                LinkClass::Tbs => {
                    if self.lambda_t <= 0.0 {
                        0.0
                    } else {
                        let top = (-OUTER_SURVIVAL.ln() / (PI * self.lambda_t)).sqrt();
                        let cell = std::cell::RefCell::new(&mut eval);
                        let f = |r: f64| {
                            let weight = match self.assoc_prob(r, class) {
                                Ok(a) => a * self.tbs_pdf(r),
                                Err(e) => {
                                    slot.record(e);
                                    0.0
                                }
                            };
                            (cell.borrow_mut())(r, weight)
                        };
                        quad::integrate(f, 0.0, top, OUTER_TOL)?.value
                    }
                }
            }
        };
        local.dedup();
        warnings.extend(local);
        slot.finish(value)
    }

    /// Probability that the nearby link of `class` is the one selected,
    /// `∫ A_class(r) f_class(r) dr`.
    pub fn association_mass(&self, class: LinkClass) -> Result<f64> {
        let slot = FailureSlot::new();
        let v = match class {
            LinkClass::ClusterLoS | LinkClass::ClusterNLoS => {
                return Err(Error::Domain { what: "association mass of a cluster link", value: 0.0 });
            }
            LinkClass::NearbyLoS | LinkClass::NearbyNLoS => {
                if self.lambda_avail <= 0.0 {
                    return Ok(0.0);
                }
                let los = class == LinkClass::NearbyLoS;
                let top = self.outer_limit(los)?;
                quad::integrate_log(
                    |r| match (self.nearby_pdf(r, los), self.assoc_prob(r, class)) {
                        (Ok(f), Ok(a)) => f * a,
                        (Err(e), _) | (_, Err(e)) => {
                            slot.record(e);
                            0.0
                        }
                    },
                    self.h,
                    top,
                    OUTER_TOL,
                )?
                .value
            }
            LinkClass::Tbs => {
                if self.lambda_t <= 0.0 {
                    return Ok(0.0);
                }
                let top = (-OUTER_SURVIVAL.ln() / (PI * self.lambda_t)).sqrt();
                quad::integrate(
                    |r| match self.assoc_prob(r, class) {
                        Ok(a) => a * self.tbs_pdf(r),
                        Err(e) => {
                            slot.record(e);
                            0.0
                        }
                    },
                    0.0,
                    top,
                    OUTER_TOL,
                )?
                .value
            }
        };
        slot.finish(v)
    }

    pub fn breakdown(&self, path: CoveragePath) -> Result<CoverageBreakdown> {
        let mut warnings = Vec::new();
        let mut v = [0.0; 5];
        for (slot, class) in LinkClass::ALL.into_iter().enumerate() {
            v[slot] = self.component(class, path, &mut warnings)?;
            if !(-1e-9..=1.0 + 1e-9).contains(&v[slot]) {
                return Err(Error::Invariant(format!("{} coverage {} outside [0, 1]", class.label(), v[slot])));
            }
        }
        let total = self.p_a * (v[0] + v[1]) + (1.0 - self.p_a) * (v[2] + v[3] + v[4]);
        Ok(CoverageBreakdown {
            p_a: self.p_a,
            cluster_los: v[0],
            cluster_nlos: v[1],
            nearby_los: v[2],
            nearby_nlos: v[3],
            tbs: v[4],
            total,
            path,
            warnings,
        })
    }
}

/// `s^k f^{(k)}(s) / k!` by Richardson-extrapolated central differences
/// with relative step `DERIVATIVE_STEP`, plus the disagreement between two
/// extrapolation levels.
fn scaled_derivative<F: Fn(f64) -> Result<f64>>(f: &F, s: f64, k: u32) -> Result<(f64, f64)> {
    let diff = |h: f64| -> Result<f64> {
        let d = s * h;
        Ok(match k {
            1 => (f(s + d)? - f(s - d)?) / (2.0 * h),
            2 => (f(s + d)? - 2.0 * f(s)? + f(s - d)?) / (h * h) / 2.0,
            _ => unreachable!("derivative order checked by caller"),
        })
    };
    let h = DERIVATIVE_STEP;
    let (d1, d2, d3) = (diff(h)?, diff(h / 2.0)?, diff(h / 4.0)?);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    Ok((r2, (r2 - r1).abs()))
}

/// Availability with neither waiting nor travel at dedicated stations:
/// `T_ser / (T_ser + T_ch,d,d)`.
pub fn upper_bound_availability(e: &EnergyParams) -> f64 {
    let t = e.t_ser_full();
    t / (t + e.t_ch_d_d)
}

/// Coverage for a decision, with availability from `avail`.
pub fn total_coverage(avail: &AvailabilityModel, decision: &PolicyDecision, path: CoveragePath) -> Result<CoverageBreakdown> {
    let p_a = avail.evaluate(decision)?.p_a.clamp(0.0, 1.0);
    CoverageModel::new(avail.params(), p_a)?.breakdown(path)
}

pub fn upper_bound_coverage(p: &ParamSet, path: CoveragePath) -> Result<CoverageBreakdown> {
    CoverageModel::new(p, upper_bound_availability(&p.energy))?.breakdown(path)
}

/// Association parameter of `kind` maximizing coverage. Coverage depends
/// on the decision only through `P_a` and increases with it, so the search
/// runs on availability and coverage is evaluated once at the optimum.
pub fn optimize_coverage(
    avail: &AvailabilityModel,
    kind: BetaKind,
    path: CoveragePath,
) -> Result<(BetaOptimum, CoverageBreakdown)> {
    let decision = |b: f64| match kind {
        BetaKind::Biased => PolicyDecision::biased(b),
        BetaKind::Thinning => PolicyDecision::thinning(b),
    };
    let best = availability::optimize_beta(kind, |b| Ok(avail.evaluate(&decision(b))?.p_a))?;
    let cov = CoverageModel::new(avail.params(), best.value.clamp(0.0, 1.0))?.breakdown(path)?;
    Ok((best, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(p_a: f64) -> CoverageModel {
        CoverageModel::new(&ParamSet::default(), p_a).unwrap()
    }

    #[test]
    fn los_fixtures() {
        let p = ParamSet::default();
        let (ch, h) = (&p.channel, p.geometry.h);
        let overhead = los_probability(h, ch, h).unwrap();
        assert!((overhead - 0.99994).abs() < 5e-6, "{overhead}");
        // Elevation angle of exactly c1 degrees.
        let z = h / ch.c1.to_radians().tan();
        let at_c1 = los_probability((z * z + h * h).sqrt(), ch, h).unwrap();
        assert!((at_c1 - 1.0 / (1.0 + ch.c1)).abs() < 1e-12);
        assert!((at_c1 - 0.03806).abs() < 1e-5);
        let mut prev = 1.0;
        for i in 1..200 {
            let v = los_probability(h + 10.0 * i as f64, ch, h).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(los_probability(h * 0.5, ch, h).is_err());
    }

    #[test]
    fn beta2_fixture() {
        assert!((alzer_beta2(3) - 0.5503).abs() < 1e-4);
        assert_eq!(alzer_beta2(1), 1.0);
    }

    #[test]
    fn cluster_pdf_normalized() {
        let m = model(0.6);
        let top = (m.h * m.h + m.r_c * m.r_c).sqrt();
        let v = quad::integrate(|r| m.cluster_pdf(r), m.h, top, Tolerance::new(1e-14, 1e-12)).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplace_basics() {
        let m = model(0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for class in LinkClass::ALL {
            assert_eq!(m.laplace_total(0.0, 150.0, class).unwrap(), 1.0);
        }
        for _ in 0..10 {
            let class = LinkClass::ALL[rng.random_range(0..5)];
            let r = m.h + rng.random::<f64>() * 400.0;
            let s1 = 10f64.powf(rng.random_range(2.0..8.0));
            let s2 = s1 * rng.random_range(1.5..20.0);
            let (l1, l2) = (m.laplace_total(s1, r, class).unwrap(), m.laplace_total(s2, r, class).unwrap());
            let mid = m.laplace_total(0.5 * (s1 + s2), r, class).unwrap();
            assert!(l2 <= l1 && l1 <= 1.0 && l2 > 0.0);
            assert!(mid.ln() <= 0.5 * (l1.ln() + l2.ln()) + 1e-12);
        }
    }

    #[test]
    fn laplace_without_interferers_is_noise_only() {
        let mut p = ParamSet::default();
        p.geometry.lambda_t = 0.0;
        let m = CoverageModel::new(&p, 0.0).unwrap();
        let s = 3e6;
        let v = m.laplace_total(s, 120.0, LinkClass::NearbyLoS).unwrap();
        assert!((v - (-s * p.channel.sigma_n2).exp()).abs() < 1e-15);
    }

    #[test]
    fn tbs_field_matches_closed_form() {
        // α_t = 4: ∫_c^∞ z k/(k + z^4) dz = (√k/2)(π/2 - atan(c²/√k)).
        let m = model(0.6);
        for (s, c) in [(1e5, 0.0), (1e7, 50.0), (3e8, 400.0)] {
            let k: f64 = s * m.ch.rho_t;
            let expect = 0.5 * k.sqrt() * (PI / 2.0 - (c * c / k.sqrt()).atan());
            let got = m.tbs_field(s, c).unwrap();
            assert!((got - expect).abs() < 1e-8 * expect, "{got} vs {expect}");
        }
    }

    #[test]
    fn boundary_equation_holds() {
        let m = model(0.6);
        let r: f64 = 200.0;
        let d = m.nlos_balance(r);
        let c = &m.ch;
        let lhs = c.eta_l * r.powf(-c.alpha_l);
        let rhs = c.eta_n * d.powf(-c.alpha_n);
        assert!((lhs - rhs).abs() < 1e-12 * lhs);
        // Below the altitude the void radius is clamped to h.
        assert_eq!(m.d_n(r), d.max(m.h));
    }

    #[test]
    fn association_masses_sum_to_one() {
        let m = model(0.6);
        let total: f64 = [LinkClass::NearbyLoS, LinkClass::NearbyNLoS, LinkClass::Tbs]
            .into_iter()
            .map(|c| m.association_mass(c).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn no_competitors_always_associate() {
        let mut p = ParamSet::default();
        p.geometry.lambda_t = 0.0;
        let m = CoverageModel::new(&p, 0.0).unwrap();
        for class in LinkClass::ALL {
            assert_eq!(m.assoc_prob(300.0, class).unwrap(), 1.0);
        }
        assert_eq!(m.nearby_cdf(5e3, true).unwrap(), 0.0);
    }

    #[test]
    fn rayleigh_paths_coincide() {
        let mut p = ParamSet::default();
        p.channel.m_l = 1;
        let m = CoverageModel::new(&p, 0.6).unwrap();
        let mut w = Vec::new();
        for class in [LinkClass::ClusterLoS, LinkClass::NearbyLoS] {
            let a = m.component(class, CoveragePath::Approx, &mut w).unwrap();
            let e = m.component(class, CoveragePath::Exact, &mut w).unwrap();
            assert_eq!(a, e);
        }
    }

    #[test]
    fn exact_and_approx_agree() {
        let m = model(0.6);
        let e = m.breakdown(CoveragePath::Exact).unwrap();
        let a = m.breakdown(CoveragePath::Approx).unwrap();
        assert!(e.warnings.is_empty(), "{:?}", e.warnings);
        assert!((e.total - a.total).abs() < 0.02, "{} vs {}", e.total, a.total);
    }

    #[test]
    fn degenerate_mixtures() {
        let one = model(1.0).breakdown(CoveragePath::Approx).unwrap();
        assert!((one.total - (one.cluster_los + one.cluster_nlos)).abs() < 1e-15);
        let zero = model(0.0).breakdown(CoveragePath::Approx).unwrap();
        assert!((zero.total - (zero.nearby_los + zero.nearby_nlos + zero.tbs)).abs() < 1e-15);
    }

    #[test]
    fn monotone_in_threshold_and_noise() {
        let mut prev = 1.0 + 1e-12;
        for db in [-20.0, -10.0, -5.0, 0.0, 5.0, 10.0] {
            let mut p = ParamSet::default();
            p.channel.gamma = crate::units::db_to_linear(db);
            let v = CoverageModel::new(&p, 0.6).unwrap().breakdown(CoveragePath::Approx).unwrap().total;
            assert!(v <= prev, "{db} dB: {v} > {prev}");
            prev = v;
        }
        let mut prev = 1.0 + 1e-12;
        for n in [1e-12, 1e-9, 1e-7, 1e-5] {
            let mut p = ParamSet::default();
            p.channel.sigma_n2 = n;
            let v = CoverageModel::new(&p, 0.6).unwrap().breakdown(CoveragePath::Approx).unwrap().total;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn tiny_threshold_reaches_association_ceiling() {
        let mut p = ParamSet::default();
        p.channel.gamma = 1e-12;
        let b = CoverageModel::new(&p, 0.6).unwrap().breakdown(CoveragePath::Approx).unwrap();
        assert!((b.total - 1.0).abs() < 1e-3, "{}", b.total);
    }

    #[test]
    fn coverage_increases_with_availability() {
        let mut last = 0.0;
        for i in 0..=10 {
            let c = model(i as f64 / 10.0).breakdown(CoveragePath::Approx).unwrap().total;
            assert!(c > last, "P_a = {}: {c} <= {last}", i as f64 / 10.0);
            last = c;
        }
    }

    #[test]
    fn optimized_coverage_is_interior_and_bounded() {
        let p = ParamSet::default();
        let avail = AvailabilityModel::new(&p, crate::queueing::QueueModel::default()).unwrap();
        let none = total_coverage(&avail, &PolicyDecision::no_sharing(), CoveragePath::Approx).unwrap().total;
        let upper = upper_bound_coverage(&p, CoveragePath::Approx).unwrap().total;
        for kind in [BetaKind::Biased, BetaKind::Thinning] {
            let (best, cov) = optimize_coverage(&avail, kind, CoveragePath::Approx).unwrap();
            assert!(!best.plateau);
            let (lo, hi) = match kind {
                BetaKind::Biased => (0.1, 10.0),
                BetaKind::Thinning => (0.0, 1.0),
            };
            assert!(best.beta > lo * 1.01 && best.beta < hi * 0.99, "{kind:?}: {}", best.beta);
            assert!(none < cov.total && cov.total < upper, "{none} {} {upper}", cov.total);
        }
    }
}
