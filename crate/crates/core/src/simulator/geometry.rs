//! Spatial realizations: station and UAV placement, association, per-cell
//! loads, and the resulting time-fraction availability.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::availability;
use crate::error::{Error, Result};
use crate::params::{Association, PolicyDecision, StationKind};
use crate::pointprocess::{self, Point};
use crate::queueing::QueueContext;
use crate::seed;
use crate::stats::{self, Interval};

use super::{des, SimConfig};

/// Attempts per realization before giving up on an empty window.
const MAX_RESAMPLES: usize = 100;

/// One UAV in the statistics region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavSample {
    pub kind: StationKind,
    /// Horizontal distance to its charging station (m).
    pub distance: f64,
    /// Other UAVs sharing that station.
    pub others: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub decision: PolicyDecision,
    /// Share of UAVs associating with EV stations, across realizations.
    pub a_ev: Interval,
    pub samples: Vec<UavSample>,
    /// UAV counts at EV and dedicated stations in the statistics region.
    pub loads_ev: Vec<usize>,
    pub loads_d: Vec<usize>,
    pub realizations: usize,
    pub degenerate_resamples: usize,
    pub seed: u64,
    per_realization: Vec<(usize, usize)>,
}

impl GeometryReport {
    /// Pooled EV share over every sampled UAV.
    pub fn a_ev_pooled(&self) -> f64 {
        let ev = self.samples.iter().filter(|s| s.kind == StationKind::Ev).count();
        ev as f64 / self.samples.len().max(1) as f64
    }

    pub fn loads(&self, kind: StationKind) -> &[usize] {
        match kind {
            StationKind::Ev => &self.loads_ev,
            StationKind::Uav => &self.loads_d,
        }
    }

    /// Empirical PMF of the UAV count at a station of `kind`.
    pub fn load_histogram(&self, kind: StationKind) -> Vec<f64> {
        stats::histogram(self.loads(kind))
    }

    /// Empirical PMF of other UAVs seen by a UAV at a station of `kind`.
    pub fn others_histogram(&self, kind: StationKind) -> Vec<f64> {
        let counts: Vec<usize> = self.samples.iter().filter(|s| s.kind == kind).map(|s| s.others as usize).collect();
        stats::histogram(&counts)
    }

    pub fn distances(&self, kind: StationKind) -> Vec<f64> {
        self.samples.iter().filter(|s| s.kind == kind).map(|s| s.distance).collect()
    }
}

fn nearest(p: Point, stations: &[Point]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in stations.iter().enumerate() {
        let d2 = (p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, d2)| (i, d2.sqrt()))
}

struct Realization {
    samples: Vec<UavSample>,
    loads_ev: Vec<usize>,
    loads_d: Vec<usize>,
    resamples: usize,
}

fn realize(cfg: &SimConfig, decision: &PolicyDecision, index: usize) -> Result<Realization> {
    let geo = cfg.params.geometry.with_extra_uav_stations(decision.delta_lambda_c_d);
    let w = &cfg.window;
    let (need_ev, need_d) = match decision.association {
        Association::BiasedDistance(_) => (true, true),
        Association::IndependentThinning(b) => (b > 0.0, b < 1.0),
    };
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = seed::rng(seed::grandchild(cfg.seed, index as u64, attempt as u64));
        let ev = pointprocess::sample_plcp_with(geo.lambda_l, geo.lambda_p_ev, w, StationKind::Ev, &mut rng).points();
        let d = pointprocess::sample_plcp_with(geo.lambda_l, geo.lambda_p_d, w, StationKind::Uav, &mut rng).points();
        let uavs = pointprocess::sample_ppp_with(geo.lambda_u, w, &mut rng).points;
        if (need_ev && ev.is_empty()) || (need_d && d.is_empty()) {
            continue;
        }
        let mut assigned = Vec::with_capacity(uavs.len());
        for &u in &uavs {
            let to_ev = match decision.association {
                Association::BiasedDistance(beta) => {
                    let re = nearest(u, &ev).map_or(f64::INFINITY, |x| x.1);
                    let rd = nearest(u, &d).map_or(f64::INFINITY, |x| x.1);
                    re <= beta * rd
                }
                Association::IndependentThinning(b) => rng.random::<f64>() < b,
            };
            let (kind, set) = if to_ev { (StationKind::Ev, &ev) } else { (StationKind::Uav, &d) };
            let (i, dist) = nearest(u, set).expect("non-empty station set");
            assigned.push((u, kind, i, dist));
        }
        let mut count_ev = vec![0usize; ev.len()];
        let mut count_d = vec![0usize; d.len()];
        for &(_, kind, i, _) in &assigned {
            match kind {
                StationKind::Ev => count_ev[i] += 1,
                StationKind::Uav => count_d[i] += 1,
            }
        }
        let samples = assigned
            .iter()
            .filter(|(u, ..)| w.in_interior(*u))
            .map(|&(_, kind, i, distance)| {
                let n = match kind {
                    StationKind::Ev => count_ev[i],
                    StationKind::Uav => count_d[i],
                };
                UavSample { kind, distance, others: (n - 1) as u32 }
            })
            .collect();
        let interior = |pts: &[Point], counts: &[usize]| -> Vec<usize> {
            pts.iter().zip(counts).filter(|(p, _)| w.in_interior(**p)).map(|(_, &c)| c).collect()
        };
        return Ok(Realization {
            samples,
            loads_ev: interior(&ev, &count_ev),
            loads_d: interior(&d, &count_d),
            resamples: attempt,
        });
    }
    Err(Error::Simulation(format!("realization {index}: no stations after {MAX_RESAMPLES} attempts")))
}

/// Samples both station processes and the UAV field `cfg.realizations`
/// times and associates every UAV under `decision`.
pub fn simulate_geometry(cfg: &SimConfig, decision: &PolicyDecision) -> Result<GeometryReport> {
    cfg.validate()?;
    decision.validate()?;
    let parts: Vec<Realization> =
        (0..cfg.realizations).into_par_iter().map(|i| realize(cfg, decision, i)).collect::<Result<_>>()?;
    let mut report = GeometryReport {
        decision: *decision,
        a_ev: Interval { mean: 0.0, half_width: 0.0 },
        samples: Vec::new(),
        loads_ev: Vec::new(),
        loads_d: Vec::new(),
        realizations: cfg.realizations,
        degenerate_resamples: 0,
        seed: cfg.seed,
        per_realization: Vec::new(),
    };
    let mut fractions = Vec::with_capacity(parts.len());
    for r in parts {
        let ev = r.samples.iter().filter(|s| s.kind == StationKind::Ev).count();
        if !r.samples.is_empty() {
            fractions.push(ev as f64 / r.samples.len() as f64);
        }
        let start = report.samples.len();
        report.samples.extend(r.samples);
        report.per_realization.push((start, report.samples.len()));
        report.loads_ev.extend(r.loads_ev);
        report.loads_d.extend(r.loads_d);
        report.degenerate_resamples += r.resamples;
    }
    report.a_ev = stats::replicate_interval(&fractions);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilitySim {
    pub p_a: Interval,
    /// Mean UAV wait over sampled UAVs (min).
    pub mean_wait: Interval,
    /// Contribution of UAVs at EV and at dedicated stations.
    pub ev_term: f64,
    pub uav_term: f64,
    /// Simulated mean UAV wait per `(kind, N)` used.
    pub waits: Vec<(StationKind, u32, f64)>,
    pub geometry: GeometryReport,
}

/// Time-fraction availability of every sampled UAV, with its wait taken
/// from a DES of its own station at the realized UAV count.
pub fn simulate_availability(cfg: &SimConfig, decision: &PolicyDecision) -> Result<AvailabilitySim> {
    let geometry = simulate_geometry(cfg, decision)?;
    let p = &cfg.params;
    let mut keys: BTreeMap<(u8, u32), StationKind> = BTreeMap::new();
    for s in &geometry.samples {
        keys.insert((s.kind as u8, s.others + 1), s.kind);
    }
    let keys: Vec<((u8, u32), StationKind)> = keys.into_iter().collect();
    let waits: Vec<f64> = keys
        .par_iter()
        .map(|&((k, n), kind)| {
            let ctx = QueueContext::from_params(p, kind, n)?;
            let r = des::simulate_queue(&cfg.des(&ctx), &p.energy, seed::grandchild(cfg.seed ^ 0xde5, k as u64, n as u64))?;
            Ok(r.uav_wait.mean)
        })
        .collect::<Result<_>>()?;
    let lookup: BTreeMap<(u8, u32), f64> = keys.iter().map(|(k, _)| *k).zip(waits.iter().copied()).collect();
    let reach = p.energy.reachable_radius();
    let fraction = |s: &UavSample| -> Result<f64> {
        if s.distance >= reach {
            return Ok(0.0);
        }
        let t_w = lookup[&(s.kind as u8, s.others + 1)];
        availability::time_fraction(s.distance, p.energy.t_ch(s.kind), t_w, &p.energy)
    };
    let mut per = Vec::with_capacity(geometry.per_realization.len());
    let mut per_wait = Vec::with_capacity(geometry.per_realization.len());
    let (mut ev_sum, mut d_sum) = (0.0, 0.0);
    for &(a, b) in &geometry.per_realization {
        if a == b {
            continue;
        }
        let mut acc = 0.0;
        let mut wait = 0.0;
        for s in &geometry.samples[a..b] {
            wait += lookup[&(s.kind as u8, s.others + 1)];
            let f = fraction(s)?;
            acc += f;
            match s.kind {
                StationKind::Ev => ev_sum += f,
                StationKind::Uav => d_sum += f,
            }
        }
        per.push(acc / (b - a) as f64);
        per_wait.push(wait / (b - a) as f64);
    }
    let total = geometry.samples.len().max(1) as f64;
    Ok(AvailabilitySim {
        p_a: stats::replicate_interval(&per),
        mean_wait: stats::replicate_interval(&per_wait),
        ev_term: ev_sum / total,
        uav_term: d_sum / total,
        waits: keys.iter().zip(&waits).map(|(&((_, n), kind), &w)| (kind, n, w)).collect(),
        geometry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{self, CellLoadPmf};
    use crate::params::ParamSet;

    fn cfg(realizations: usize) -> SimConfig {
        let mut c = SimConfig::new(ParamSet::default(), 3).unwrap();
        c.realizations = realizations;
        c
    }

    #[test]
    fn thinning_endpoints_use_one_kind() {
        let c = cfg(2);
        let all_d = simulate_geometry(&c, &PolicyDecision::no_sharing()).unwrap();
        assert_eq!(all_d.a_ev_pooled(), 0.0);
        let all_ev = simulate_geometry(&c, &PolicyDecision::thinning(1.0)).unwrap();
        assert_eq!(all_ev.a_ev_pooled(), 1.0);
    }

    #[test]
    fn even_thinning_splits_evenly() {
        let r = simulate_geometry(&cfg(8), &PolicyDecision::thinning(0.5)).unwrap();
        assert!((r.a_ev.mean - 0.5).abs() <= r.a_ev.half_width.max(0.01), "{:?}", r.a_ev);
    }

    #[test]
    fn split_matches_association_integral() {
        let c = cfg(10);
        let d = PolicyDecision::biased(1.0);
        let r = simulate_geometry(&c, &d).unwrap();
        let a = association::association_split(&c.params, &d).unwrap();
        assert!((r.a_ev_pooled() - a.a_ev).abs() < 0.02, "{} vs {}", r.a_ev_pooled(), a.a_ev);
    }

    #[test]
    fn station_load_mean_matches_intensity_ratio() {
        let c = cfg(10);
        let d = PolicyDecision::biased(1.0);
        let r = simulate_geometry(&c, &d).unwrap();
        let split = association::association_split(&c.params, &d).unwrap();
        for kind in [StationKind::Ev, StationKind::Uav] {
            let rho = association::load_ratio(&c.params, &d, &split, kind);
            let loads: Vec<f64> = r.loads(kind).iter().map(|&n| n as f64).collect();
            let ci = stats::replicate_interval(&loads);
            assert!((ci.mean - rho).abs() < 0.05 * rho, "{kind:?}: {} vs {rho}", ci.mean);
            assert!((CellLoadPmf::typical_station(rho, 3.5, 3.5).mean() - rho).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let c = cfg(3);
        let d = PolicyDecision::thinning(0.4);
        assert_eq!(simulate_geometry(&c, &d).unwrap(), simulate_geometry(&c, &d).unwrap());
    }
}
