//! Monte Carlo SINR of a typical user at the origin.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{self, LinkClass};
use crate::error::{Error, Result};
use crate::params::{ChannelParams, ParamSet};
use crate::pointprocess;
use crate::seed;
use crate::stats::{self, Interval};

/// Radius (m) inside which interferers are drawn individually.
pub const NEAR_RADIUS: f64 = 20_000.0;
const DRAWS_PER_CHUNK: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSim {
    pub p_a: f64,
    pub total: Interval,
    /// `P(SINR ≥ γ, serving class)` in [`LinkClass::ALL`] order.
    pub components: [f64; 5],
    pub draws: usize,
    /// Mean interference from beyond [`NEAR_RADIUS`] (W).
    pub far_interference: f64,
    pub seed: u64,
}

impl CoverageSim {
    pub fn component(&self, class: LinkClass) -> f64 {
        let i = LinkClass::ALL.iter().position(|c| *c == class).expect("class listed");
        self.components[i]
    }
}

struct Node {
    mean_power: f64,
    fade_shape: u32,
    class: LinkClass,
}

/// Unit-mean Nakagami power gains keyed by shape.
type Fades = Vec<(u32, Gamma<f64>)>;

fn fade<R: Rng>(m: u32, gammas: &Fades, rng: &mut R) -> f64 {
    if m == 1 {
        return Exp1.sample(rng);
    }
    match gammas.iter().find(|(k, _)| *k == m) {
        Some((_, g)) => g.sample(rng),
        None => Gamma::new(m as f64, 1.0 / m as f64).expect("positive shape").sample(rng),
    }
}

/// Average interference from UAVs and TBSs beyond `NEAR_RADIUS`.
fn far_field(ch: &ChannelParams, h: f64, lambda_avail: f64, lambda_t: f64) -> Result<f64> {
    let p_far = coverage::los_from_horizontal(f64::INFINITY, h, ch);
    let uav = |los: bool| -> Result<f64> {
        let (eta, alpha) = if los { (ch.eta_l, ch.alpha_l) } else { (ch.eta_n, ch.alpha_n) };
        let f = |z: f64| {
            let p = coverage::los_from_horizontal(z, h, ch);
            let p = if los { p } else { 1.0 - p };
            z * p * eta * ch.rho_u * (z * z + h * h).powf(-alpha / 2.0)
        };
        let coef = eta * ch.rho_u * if los { p_far } else { 1.0 - p_far };
        coverage::far_field_integral(f, NEAR_RADIUS, coef, alpha)
    };
    let tbs = ch.rho_t * NEAR_RADIUS.powf(2.0 - ch.alpha_t) / (ch.alpha_t - 2.0);
    Ok(2.0 * PI * (lambda_avail * (uav(true)? + uav(false)?) + lambda_t * tbs))
}

/// Disk of radius `NEAR_RADIUS` around the origin: Poisson count, uniform
/// positions, returned as horizontal distances.
fn disk_distances<R: Rng>(density: f64, rng: &mut R) -> Vec<f64> {
    let n = pointprocess::poisson(density * PI * NEAR_RADIUS * NEAR_RADIUS, rng);
    (0..n).map(|_| NEAR_RADIUS * rng.random::<f64>().sqrt()).collect()
}

fn uav_node<R: Rng>(z: f64, ch: &ChannelParams, h: f64, rng: &mut R) -> Node {
    let d = z.hypot(h);
    let los = rng.random::<f64>() < coverage::los_from_horizontal(z, h, ch);
    let (eta, alpha, m, class) = if los {
        (ch.eta_l, ch.alpha_l, ch.m_l, LinkClass::NearbyLoS)
    } else {
        (ch.eta_n, ch.alpha_n, ch.m_n, LinkClass::NearbyNLoS)
    };
    Node { mean_power: eta * ch.rho_u * d.powf(-alpha), fade_shape: m, class }
}

/// One draw; returns the serving class when the SINR meets the threshold.
fn draw<R: Rng>(p: &ParamSet, p_a: f64, far: f64, gammas: &Fades, rng: &mut R) -> Option<LinkClass> {
    let ch = &p.channel;
    let g = &p.geometry;
    let mut nodes: Vec<Node> = Vec::new();
    for z in disk_distances(p_a * g.lambda_u, rng) {
        nodes.push(uav_node(z, ch, g.h, rng));
    }
    for z in disk_distances(g.lambda_t, rng) {
        nodes.push(Node { mean_power: ch.rho_t * z.max(1.0).powf(-ch.alpha_t), fade_shape: 1, class: LinkClass::Tbs });
    }
    let serving = if rng.random::<f64>() < p_a {
        let z = g.r_c * rng.random::<f64>().sqrt();
        let mut n = uav_node(z, ch, g.h, rng);
        n.class = match n.class {
            LinkClass::NearbyLoS => LinkClass::ClusterLoS,
            _ => LinkClass::ClusterNLoS,
        };
        n
    } else {
        let best = nodes.iter().enumerate().max_by(|a, b| a.1.mean_power.total_cmp(&b.1.mean_power))?.0;
        nodes.swap_remove(best)
    };
    let signal = serving.mean_power * fade(serving.fade_shape, gammas, rng);
    let interference: f64 = nodes.iter().map(|n| n.mean_power * fade(n.fade_shape, gammas, rng)).sum();
    (signal >= ch.gamma * (interference + far + ch.sigma_n2)).then_some(serving.class)
}

/// Estimates coverage with `draws` independent snapshots. Interferers
/// within `NEAR_RADIUS` are sampled with their fades; the rest enter as
/// their mean aggregate power.
pub fn simulate_coverage(p: &ParamSet, p_a: f64, draws: usize, seed: u64) -> Result<CoverageSim> {
    if !(0.0..=1.0).contains(&p_a) {
        return Err(Error::Domain { what: "availability", value: p_a });
    }
    if draws == 0 {
        return Err(Error::InvalidParam { field: "draws".into(), reason: "must be >= 1".into() });
    }
    let ch = &p.channel;
    let far = far_field(ch, p.geometry.h, p_a * p.geometry.lambda_u, p.geometry.lambda_t)?;
    let gammas: Fades = [ch.m_l, ch.m_n]
        .into_iter()
        .filter(|&m| m > 1)
        .map(|m| (m, Gamma::new(m as f64, 1.0 / m as f64).expect("positive shape")))
        .collect();
    let chunks = draws.div_ceil(DRAWS_PER_CHUNK);
    let counts: Vec<[usize; 5]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(seed::child(seed, c as u64));
            let n = DRAWS_PER_CHUNK.min(draws - c * DRAWS_PER_CHUNK);
            let mut out = [0usize; 5];
            for _ in 0..n {
                if let Some(class) = draw(p, p_a, far, &gammas, &mut rng) {
                    out[LinkClass::ALL.iter().position(|k| *k == class).expect("class listed")] += 1;
                }
            }
            out
        })
        .collect();
    let mut components = [0.0; 5];
    let mut chunk_means = Vec::with_capacity(chunks);
    for (c, k) in counts.iter().enumerate() {
        let n = DRAWS_PER_CHUNK.min(draws - c * DRAWS_PER_CHUNK) as f64;
        for i in 0..5 {
            components[i] += k[i] as f64;
        }
        chunk_means.push(k.iter().sum::<usize>() as f64 / n);
    }
    for x in &mut components {
        *x /= draws as f64;
    }
    let mut total = stats::replicate_interval(&chunk_means);
    total.mean = components.iter().sum();
    Ok(CoverageSim { p_a, total, components, draws, far_interference: far, seed })
}
