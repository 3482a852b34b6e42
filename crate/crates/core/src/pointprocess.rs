//! Poisson point and Poisson-line Cox process sampling, and the PLCP
//! first-contact distance distribution.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::StationKind;
use crate::quad::{self, FailureSlot, Tolerance};
use crate::seed;

pub type Point = [f64; 2];

/// Square sampling window `[-w, w]²` with an inner statistics region
/// `[-(w - guard), w - guard]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub half_width: f64,
    pub guard: f64,
}

impl Window {
    pub fn new(half_width: f64, guard: f64) -> Result<Self> {
        if !(half_width > guard && guard >= 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParam {
                field: "window".into(),
                reason: format!("need half_width > guard >= 0 (got {half_width}, {guard})"),
            });
        }
        Ok(Self { half_width, guard })
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0].abs() <= self.half_width && p[1].abs() <= self.half_width
    }

    /// True if `p` lies in the region where statistics are collected.
    pub fn in_interior(&self, p: Point) -> bool {
        let w = self.half_width - self.guard;
        p[0].abs() <= w && p[1].abs() <= w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Point>,
    pub density: f64,
}

/// Homogeneous PPP of `density` (per m²) in `w`.
pub fn sample_ppp(density: f64, w: &Window, seed: u64) -> PointSet {
    sample_ppp_with(density, w, &mut seed::rng(seed))
}

pub fn sample_ppp_with<R: Rng + ?Sized>(density: f64, w: &Window, rng: &mut R) -> PointSet {
    let n = poisson(density * w.area(), rng);
    let hw = w.half_width;
    let points = (0..n).map(|_| [rng.random_range(-hw..=hw), rng.random_range(-hw..=hw)]).collect();
    PointSet { points, density }
}

/// Poisson variate; zero mean gives zero.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

/// Line `{x : x·(cos θ, sin θ) = rho}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub theta: f64,
    pub rho: f64,
}

impl Line {
    /// Point at signed abscissa `t` along the line (origin at the foot of
    /// the perpendicular from (0, 0)).
    pub fn point(&self, t: f64) -> Point {
        let (s, c) = self.theta.sin_cos();
        [self.rho * c - t * s, self.rho * s + t * c]
    }

    /// Abscissa interval of the chord inside `w`, if any.
    pub fn chord(&self, w: &Window) -> Option<(f64, f64)> {
        let (s, c) = self.theta.sin_cos();
        let origin = [self.rho * c, self.rho * s];
        let dir = [-s, c];
        let hw = w.half_width;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..2 {
            if dir[k].abs() < 1e-15 {
                if origin[k].abs() > hw {
                    return None;
                }
                continue;
            }
            let a = (-hw - origin[k]) / dir[k];
            let b = (hw - origin[k]) / dir[k];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (hi > lo).then_some((lo, hi))
    }
}

/// Lines plus the station abscissae on each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcpRealization {
    pub lines: Vec<Line>,
    pub stations: Vec<Vec<f64>>,
    pub kind: StationKind,
}

impl PlcpRealization {
    pub fn points(&self) -> Vec<Point> {
        self.lines
            .iter()
            .zip(&self.stations)
            .flat_map(|(l, ts)| ts.iter().map(move |&t| l.point(t)))
            .collect()
    }

    pub fn station_count(&self) -> usize {
        self.stations.iter().map(Vec::len).sum()
    }

    /// Writes the line table and the station table as CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "table,line,theta,rho,t,x,y")?;
        for (i, l) in self.lines.iter().enumerate() {
            writeln!(out, "line,{i},{},{},,,", l.theta, l.rho)?;
        }
        for (i, (l, ts)) in self.lines.iter().zip(&self.stations).enumerate() {
            for &t in ts {
                let p = l.point(t);
                writeln!(out, "station,{i},,,{t},{},{}", p[0], p[1])?;
            }
        }
        Ok(())
    }
}

/// PLCP in a square window: lines with offsets on the circumscribed
/// interval `[-w√2, w√2]`, stations Poisson along each in-window chord.
pub fn sample_plcp(lambda_l: f64, lambda_p: f64, w: &Window, kind: StationKind, seed: u64) -> PlcpRealization {
    sample_plcp_with(lambda_l, lambda_p, w, kind, &mut seed::rng(seed))
}

pub fn sample_plcp_with<R: Rng + ?Sized>(
    lambda_l: f64,
    lambda_p: f64,
    w: &Window,
    kind: StationKind,
    rng: &mut R,
) -> PlcpRealization {
    let reach = w.half_width * SQRT_2;
    let n_lines = poisson(lambda_l * PI * 2.0 * reach, rng);
    let mut lines = Vec::with_capacity(n_lines);
    let mut stations = Vec::with_capacity(n_lines);
    for _ in 0..n_lines {
        let line = Line { theta: rng.random_range(0.0..PI), rho: rng.random_range(-reach..=reach) };
        let Some((lo, hi)) = line.chord(w) else { continue };
        let k = poisson(lambda_p * (hi - lo), rng);
        let mut ts: Vec<f64> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
        ts.sort_by(f64::total_cmp);
        lines.push(line);
        stations.push(ts);
    }
    PlcpRealization { lines, stations, kind }
}

/// Distance from the origin to the nearest PLCP point, sampled directly
/// on the disk of radius `radius` around the origin. Returns `None` if the
/// disk holds no station.
pub fn sample_first_contact<R: Rng + ?Sized>(lambda_l: f64, lambda_p: f64, radius: f64, rng: &mut R) -> Option<f64> {
    let n_lines = poisson(lambda_l * PI * 2.0 * radius, rng);
    let mut best = f64::INFINITY;
    for _ in 0..n_lines {
        let rho: f64 = rng.random_range(-radius..=radius);
        let half = (radius * radius - rho * rho).max(0.0).sqrt();
        let k = poisson(lambda_p * 2.0 * half, rng);
        for _ in 0..k {
            let t: f64 = rng.random_range(-half..=half);
            best = best.min(rho.hypot(t));
        }
    }
    (best <= radius).then_some(best)
}

/// First-contact distance distribution of a PLCP seen from a typical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstContact {
    pub lambda_l: f64,
    pub lambda_p: f64,
}

const INNER_TOL: Tolerance = Tolerance::new(1e-15, 1e-13);

impl FirstContact {
    pub fn new(lambda_l: f64, lambda_p: f64) -> Self {
        Self { lambda_l, lambda_p }
    }

    /// `∫₀ʳ 1 - exp(-2λ_p √(r²-ρ²)) dρ` with `ρ = r sin u`.
    fn chord_void(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        let k = 2.0 * self.lambda_p * r;
        let e = quad::integrate(|u| -(-k * u.cos()).exp_m1() * u.cos(), 0.0, FRAC_PI_2, INNER_TOL)?;
        Ok(r * e.value)
    }

    /// Derivative of [`Self::chord_void`] in `r`.
    fn chord_void_rate(&self, r: f64) -> Result<f64> {
        let k = 2.0 * self.lambda_p * r;
        let e = quad::integrate(|u| (-k * u.cos()).exp(), 0.0, FRAC_PI_2, INNER_TOL)?;
        Ok(2.0 * self.lambda_p * r * e.value)
    }

    pub fn ccdf(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain { what: "first-contact distance", value: r });
        }
        if r.is_infinite() {
            return Ok(0.0);
        }
        Ok((-2.0 * PI * self.lambda_l * self.chord_void(r)?).exp())
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain { what: "first-contact distance", value: r });
        }
        if r.is_infinite() {
            return Ok(1.0);
        }
        Ok(-(-2.0 * PI * self.lambda_l * self.chord_void(r)?).exp_m1())
    }

    pub fn pdf(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain { what: "first-contact distance", value: r });
        }
        if r == 0.0 || r.is_infinite() {
            return Ok(0.0);
        }
        let g = self.chord_void(r)?;
        Ok(2.0 * PI * self.lambda_l * self.chord_void_rate(r)? * (-2.0 * PI * self.lambda_l * g).exp())
    }

    /// Smallest radius (to 0.1%) beyond which the CCDF is below `eps`.
    pub fn tail_radius(&self, eps: f64) -> Result<f64> {
        let mut hi = 1.0 / (PI * self.lambda_l * self.lambda_p).sqrt();
        while self.ccdf(hi)? > eps {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-3 * hi {
            let mid = 0.5 * (lo + hi);
            if self.ccdf(mid)? > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Mean first-contact distance.
    pub fn mean(&self) -> Result<f64> {
        let top = self.tail_radius(1e-14)?;
        let slot = FailureSlot::new();
        let ccdf = |r: f64| {
            self.ccdf(r).unwrap_or_else(|e| {
                slot.record(e);
                0.0
            })
        };
        let e = quad::integrate(ccdf, 0.0, top, Tolerance::new(1e-9, 1e-10))?;
        slot.finish(e.value)
    }
}

pub fn first_contact_cdf(r: f64, lambda_l: f64, lambda_p: f64) -> Result<f64> {
    FirstContact::new(lambda_l, lambda_p).cdf(r)
}

pub fn first_contact_pdf(r: f64, lambda_l: f64, lambda_p: f64) -> Result<f64> {
    FirstContact::new(lambda_l, lambda_p).pdf(r)
}

/// Default window guard: three mean first-contact distances of the sparser
/// station kind.
pub fn default_guard(lambda_l: f64, lambda_p_min: f64) -> Result<f64> {
    Ok(3.0 * FirstContact::new(lambda_l, lambda_p_min).mean()?)
}
