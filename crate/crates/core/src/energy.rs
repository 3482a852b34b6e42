//! EV state-of-charge / charging-time model and UAV power and endurance.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::params::{EnergyParams, RotorParams};
use crate::quad::{self, Tolerance};
use crate::units;

/// Lognormal SOC (percent) truncated to (0, 100].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocDistribution {
    pub mu: f64,
    pub sigma: f64,
    norm: f64,
}

impl SocDistribution {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && mu.is_finite()) {
            return Err(Error::Domain { what: "soc sigma", value: sigma });
        }
        let mut d = Self { mu, sigma, norm: 1.0 };
        d.norm = d.untruncated_cdf(100.0);
        if !(d.norm > 0.0) {
            return Err(Error::Domain { what: "soc truncation mass", value: d.norm });
        }
        Ok(d)
    }

    pub fn from_params(p: &EnergyParams) -> Result<Self> {
        Self::new(p.mu_soc, p.sigma_soc)
    }

    fn untruncated_cdf(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        0.5 * (1.0 + erf((e.ln() - self.mu) / (self.sigma * SQRT_2)))
    }

    /// Truncation constant `F(100) - F(0)`.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn pdf(&self, e: f64) -> Result<f64> {
        if !(e > 0.0 && e <= 100.0) {
            return Err(Error::Domain { what: "soc_pdf", value: e });
        }
        let z = (e.ln() - self.mu) / self.sigma;
        Ok((-0.5 * z * z).exp() / (e * self.sigma * (2.0 * std::f64::consts::PI).sqrt()) / self.norm)
    }

    pub fn cdf(&self, e: f64) -> f64 {
        if e >= 100.0 {
            1.0
        } else {
            self.untruncated_cdf(e) / self.norm
        }
    }

    /// Draws by rejection from the untruncated lognormal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let ln = LogNormal::new(self.mu, self.sigma).expect("validated parameters");
        loop {
            let e = ln.sample(rng);
            if e <= 100.0 {
                return e;
            }
        }
    }
}

/// Charging time of an EV arriving with `soc` percent (min).
pub fn ev_charge_time(soc: f64, p: &EnergyParams) -> f64 {
    units::drain_minutes(p.b_max_ev, p.p_cha) * (1.0 - soc / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeTimeMoments {
    /// min
    pub mean: f64,
    /// min²
    pub second_moment: f64,
}

impl ChargeTimeMoments {
    pub fn variance(&self) -> f64 {
        (self.second_moment - self.mean * self.mean).max(0.0)
    }
}

/// First two moments of the EV charging time, by quadrature in log-SOC.
pub fn charge_time_moments(p: &EnergyParams) -> Result<ChargeTimeMoments> {
    let soc = SocDistribution::from_params(p)?;
    let full = units::drain_minutes(p.b_max_ev, p.p_cha);
    let ln_max = 100f64.ln();
    let top = ln_max.min(soc.mu + 40.0 * soc.sigma);
    let bottom = (soc.mu - 40.0 * soc.sigma).min(top - soc.sigma);
    let tol = Tolerance::new(1e-13, 1e-12);
    // With e = exp(t) the lognormal density becomes a Gaussian in t.
    let weight = |t: f64| {
        let z = (t - soc.mu) / soc.sigma;
        (-0.5 * z * z).exp() / (soc.sigma * (2.0 * std::f64::consts::PI).sqrt()) / soc.norm
    };
    let m1 = quad::integrate(|t| weight(t) * full * (1.0 - t.exp() / 100.0), bottom, top, tol)?;
    let m2 = quad::integrate(
        |t| {
            let x = full * (1.0 - t.exp() / 100.0);
            weight(t) * x * x
        },
        bottom,
        top,
        tol,
    )?;
    Ok(ChargeTimeMoments { mean: m1.value, second_moment: m2.value })
}

/// Rotary-wing propulsion power at forward speed `v` (m/s), in W.
pub fn travel_power(v: f64, r: &RotorParams) -> f64 {
    r.p0 * (1.0 + 3.0 * v * v / (r.u_tip * r.u_tip))
        + r.pi * r.v0 / v
        + 0.5 * r.d0 * r.rho_air * r.s_rotor * r.a_disc * v * v * v
}

/// Speed (m/s) minimizing energy per unit distance, `travel_power(v) / v`.
pub fn optimal_velocity(r: &RotorParams) -> Result<f64> {
    let cost = |v: f64| travel_power(v, r) / v;
    let (lo, hi, n) = (0.1, 200.0, 400);
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&v| cost(v)).collect();
    let minima: Vec<usize> = (1..n).filter(|&i| vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1]).collect();
    let k = match minima.as_slice() {
        [k] => *k,
        _ => return Err(Error::Optimize(format!("energy per distance has {} local minima", minima.len()))),
    };
    Ok(golden_section(cost, grid[k - 1], grid[k + 1], 1e-7))
}

/// Minimizes a unimodal function on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn check_reach(y: f64, p: &EnergyParams) -> Result<()> {
    let max = p.reachable_radius();
    if !(y >= 0.0) || y > max * (1.0 + 1e-12) {
        return Err(Error::Unreachable { distance: y, max });
    }
    Ok(())
}

/// One-way travel time to a station at horizontal distance `y` (min).
pub fn travel_time(y: f64, p: &EnergyParams) -> Result<f64> {
    check_reach(y, p)?;
    Ok(y / p.v)
}

/// Hover/service time left after a round trip of `2y` (min).
pub fn service_time(y: f64, p: &EnergyParams) -> Result<f64> {
    check_reach(y, p)?;
    let travel_wh = units::energy_wh(p.p_m, y / p.v);
    Ok(units::drain_minutes(p.b_max - 2.0 * travel_wh, p.p_s).max(0.0))
}
