//! Fraction of time a UAV spends serving its cluster, averaged over the
//! serving distance and the number of UAVs sharing its charging station.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{self, AssociationSplit, CellLoadPmf, StationGeometry};
use crate::energy::{self, ChargeTimeMoments};
use crate::error::{Error, Result};
use crate::params::{Association, EnergyParams, ParamSet, PolicyDecision, StationKind};
use crate::quad;
use crate::queueing::{self, QueueContext, QueueModel};
use crate::units;

/// Kronrod panels for the serving-distance integral.
const Y_PANELS: usize = 48;

/// `(vB_max - 2y p_m) / (vB_max - 2y(p_m - p_s) + v p_s (T_ch + T_w))`.
pub fn g_fraction(y: f64, t_ch: f64, t_w: f64, p: &EnergyParams) -> Result<f64> {
    let max = p.reachable_radius();
    if !(y >= 0.0) || y > max * (1.0 + 1e-12) {
        return Err(Error::Unreachable { distance: y, max });
    }
    if !(t_ch >= 0.0 && t_w >= 0.0) {
        return Err(Error::Domain { what: "charge/wait time", value: t_ch.min(t_w) });
    }
    // m·W throughout: v [m/min] · B [W·min].
    let vb = p.v * p.b_max * units::HOUR;
    let num = (vb - 2.0 * y * p.p_m).max(0.0);
    let den = vb - 2.0 * y * (p.p_m - p.p_s) + p.v * p.p_s * (t_ch + t_w);
    Ok(num / den)
}

/// Time-fraction form `T_ser / (T_ser + T_ch + T_w + 2 T_tra)`.
pub fn time_fraction(y: f64, t_ch: f64, t_w: f64, p: &EnergyParams) -> Result<f64> {
    let ser = energy::service_time(y, p)?;
    let tra = energy::travel_time(y, p)?;
    let den = ser + t_ch + t_w + 2.0 * tra;
    Ok(if den > 0.0 { ser / den } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityResult {
    pub p_a: f64,
    /// Contribution of UAVs served at EV stations.
    pub ev_term: f64,
    /// Contribution of UAVs served at dedicated stations.
    pub uav_term: f64,
    /// Largest other-UAV count kept in either sum.
    pub n_truncation: usize,
    pub split: AssociationSplit,
}

impl AvailabilityResult {
    pub fn term(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Ev => self.ev_term,
            StationKind::Uav => self.uav_term,
        }
    }
}

/// Availability evaluator for one parameter set. Conditional UAV waits
/// depend only on the station kind and load, so they are cached across
/// association decisions.
#[derive(Debug)]
pub struct AvailabilityModel {
    params: ParamSet,
    queue: QueueModel,
    moments: ChargeTimeMoments,
    waits: Mutex<HashMap<(StationKind, u32), f64>>,
}

impl AvailabilityModel {
    pub fn new(params: &ParamSet, queue: QueueModel) -> Result<Self> {
        let moments = energy::charge_time_moments(&params.energy)?;
        Ok(Self { params: params.clone(), queue, moments, waits: Mutex::new(HashMap::new()) })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn queue_model(&self) -> &QueueModel {
        &self.queue
    }

    /// UAV wait at a station of `kind` shared by `n_total` UAVs.
    pub fn wait(&self, kind: StationKind, n_total: u32) -> Result<f64> {
        if let Some(v) = self.waits.lock().expect("wait cache poisoned").get(&(kind, n_total)) {
            return Ok(*v);
        }
        let ctx = QueueContext::with_moments(&self.params, kind, n_total, self.moments);
        let v = queueing::uav_wait(&ctx, &self.queue)?;
        self.waits.lock().expect("wait cache poisoned").insert((kind, n_total), v);
        Ok(v)
    }

    fn waits_for(&self, kind: StationKind, n_max: usize) -> Result<Vec<f64>> {
        (0..=n_max).into_par_iter().map(|n| self.wait(kind, n as u32 + 1)).collect()
    }

    pub fn evaluate(&self, decision: &PolicyDecision) -> Result<AvailabilityResult> {
        decision.validate()?;
        let p = &self.params;
        let geo = p.geometry.with_extra_uav_stations(decision.delta_lambda_c_d);
        let stations = StationGeometry::new(&geo);
        let split = association::association_split(p, decision)?;
        let mut terms = [0.0; 2];
        let mut n_truncation = 0;
        for (slot, kind) in [StationKind::Ev, StationKind::Uav].into_iter().enumerate() {
            let share = split.get(kind);
            if share <= 0.0 || geo.lambda_c(kind) <= 0.0 {
                continue;
            }
            let rho = association::load_ratio(p, decision, &split, kind);
            let pmf = CellLoadPmf::other_uavs(rho, p.channel.a_fit, p.channel.b_fit);
            n_truncation = n_truncation.max(pmf.n_max());
            let kernel = distance_kernel(&stations, kind, decision, p)?;
            let waits = self.waits_for(kind, pmf.n_max())?;
            let t_ch = p.energy.t_ch(kind);
            let mut total = 0.0;
            for (prob, t_w) in pmf.probs.iter().zip(&waits) {
                let mut inner = 0.0;
                for &(y, w) in &kernel {
                    inner += w * g_fraction(y, t_ch, *t_w, &p.energy)?;
                }
                total += prob * inner;
            }
            terms[slot] = total;
        }
        let p_a = terms[0] + terms[1];
        if !(-1e-12..=1.0 + 1e-9).contains(&p_a) {
            return Err(Error::Invariant(format!("availability {p_a} outside [0, 1]")));
        }
        Ok(AvailabilityResult { p_a, ev_term: terms[0], uav_term: terms[1], n_truncation, split })
    }

    /// Mean UAV wait `Σ_kind A_kind Σ_n p(n) T_w(kind, n + 1)` (min).
    pub fn mean_uav_wait(&self, decision: &PolicyDecision) -> Result<f64> {
        decision.validate()?;
        let p = &self.params;
        let split = association::association_split(p, decision)?;
        let mut total = 0.0;
        for kind in [StationKind::Ev, StationKind::Uav] {
            let share = split.get(kind);
            if share <= 0.0 {
                continue;
            }
            let rho = association::load_ratio(p, decision, &split, kind);
            let pmf = CellLoadPmf::other_uavs(rho, p.channel.a_fit, p.channel.b_fit);
            let waits = self.waits_for(kind, pmf.n_max())?;
            total += share * pmf.probs.iter().zip(&waits).map(|(q, w)| q * w).sum::<f64>();
        }
        Ok(total)
    }

    /// Mean duty cycle `E[T_ser + T_ch + 2 T_tra + T_w]` (min) of a UAV
    /// served at a station of `kind`; `None` if no UAV goes there.
    pub fn mean_cycle(&self, decision: &PolicyDecision, kind: StationKind) -> Result<Option<f64>> {
        decision.validate()?;
        let p = &self.params;
        let geo = p.geometry.with_extra_uav_stations(decision.delta_lambda_c_d);
        let split = association::association_split(p, decision)?;
        if split.get(kind) <= 0.0 || geo.lambda_c(kind) <= 0.0 {
            return Ok(None);
        }
        let kernel = distance_kernel(&StationGeometry::new(&geo), kind, decision, p)?;
        let mass: f64 = kernel.iter().map(|(_, w)| w).sum();
        if mass <= 0.0 {
            return Ok(None);
        }
        let mut flight = 0.0;
        for &(y, w) in &kernel {
            flight += w * (energy::service_time(y, &p.energy)? + 2.0 * energy::travel_time(y, &p.energy)?);
        }
        let rho = association::load_ratio(p, decision, &split, kind);
        let pmf = CellLoadPmf::other_uavs(rho, p.channel.a_fit, p.channel.b_fit);
        let waits = self.waits_for(kind, pmf.n_max())?;
        let t_w: f64 = pmf.probs.iter().zip(&waits).map(|(q, w)| q * w).sum();
        Ok(Some(flight / mass + p.energy.t_ch(kind) + t_w))
    }

    pub fn biased(&self, beta_d: f64) -> Result<AvailabilityResult> {
        self.evaluate(&PolicyDecision::biased(beta_d))
    }

    pub fn thinning(&self, beta_o: f64) -> Result<AvailabilityResult> {
        self.evaluate(&PolicyDecision::thinning(beta_o))
    }
}

/// Quadrature nodes over the reachable serving distances with the joint
/// density of distance and association folded into the weights.
fn distance_kernel(
    stations: &StationGeometry,
    kind: StationKind,
    decision: &PolicyDecision,
    p: &ParamSet,
) -> Result<Vec<(f64, f64)>> {
    let top = p.energy.reachable_radius().min(stations.tail_radius(kind)?);
    let nodes = quad::composite_nodes(0.0, top, Y_PANELS);
    nodes
        .into_par_iter()
        .map(|(y, w)| {
            let k = match decision.association {
                Association::BiasedDistance(b) => stations.joint_kernel(kind, b, y)?,
                Association::IndependentThinning(b) => {
                    let share = match kind {
                        StationKind::Ev => b,
                        StationKind::Uav => 1.0 - b,
                    };
                    share * stations.first_contact(kind).pdf(y)?
                }
            };
            Ok((y, w * k))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaKind {
    /// `β_d` on a log grid over `[0.1, 10]`.
    Biased,
    /// `β_o` on `[0, 1]`.
    Thinning,
}

impl BetaKind {
    fn to_beta(self, u: f64) -> f64 {
        match self {
            BetaKind::Biased => u.exp(),
            BetaKind::Thinning => u,
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            BetaKind::Biased => (0.1f64.ln(), 10f64.ln()),
            BetaKind::Thinning => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaOptimum {
    pub beta: f64,
    pub value: f64,
    /// Objective flat across the grid; `beta` is then the first grid point.
    pub plateau: bool,
}

pub const BETA_GRID_POINTS: usize = 41;

/// Grid search over `kind`'s β range refined by golden section around the
/// best grid point. `eval` is called concurrently.
pub fn optimize_beta<F>(kind: BetaKind, eval: F) -> Result<BetaOptimum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    optimize_beta_with(kind, BETA_GRID_POINTS, eval)
}

pub fn optimize_beta_with<F>(kind: BetaKind, points: usize, eval: F) -> Result<BetaOptimum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if points < 3 {
        return Err(Error::Optimize(format!("beta grid needs at least 3 points, got {points}")));
    }
    let (lo, hi) = kind.range();
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&u| eval(kind.to_beta(u))).collect::<Result<_>>()?;
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Optimize("empty beta grid".into()))?;
    let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    if best_val - worst <= 1e-12 * best_val.abs().max(1.0) {
        return Ok(BetaOptimum { beta: kind.to_beta(grid[0]), value: values[0], plateau: true });
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(points - 1)];
    let failure = Mutex::new(None);
    let neg = |u: f64| match eval(kind.to_beta(u)) {
        Ok(v) => -v,
        Err(e) => {
            failure.lock().expect("optimizer lock poisoned").get_or_insert(e);
            f64::INFINITY
        }
    };
    let u = energy::golden_section(neg, a, b, 1e-7);
    if let Some(e) = failure.into_inner().expect("optimizer lock poisoned") {
        return Err(e);
    }
    let refined = eval(kind.to_beta(u))?;
    if refined >= best_val {
        Ok(BetaOptimum { beta: kind.to_beta(u), value: refined, plateau: false })
    } else {
        Ok(BetaOptimum { beta: kind.to_beta(grid[best]), value: best_val, plateau: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(p: &ParamSet) -> AvailabilityModel {
        AvailabilityModel::new(p, QueueModel::default()).unwrap()
    }

    #[test]
    fn g_fraction_boundaries() {
        let e = ParamSet::default().energy;
        assert_eq!(g_fraction(0.0, 0.0, 0.0, &e).unwrap(), 1.0);
        assert!(g_fraction(e.reachable_radius(), 5.0, 3.0, &e).unwrap().abs() < 1e-12);
        assert!(g_fraction(e.reachable_radius() * 1.01, 0.0, 0.0, &e).is_err());
    }

    #[test]
    fn g_fraction_matches_time_fraction() {
        let e = ParamSet::default().energy;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let y = rng.random::<f64>() * e.reachable_radius();
            let t_ch = rng.random::<f64>() * 60.0;
            let t_w = rng.random::<f64>() * 200.0;
            let a = g_fraction(y, t_ch, t_w, &e).unwrap();
            let b = time_fraction(y, t_ch, t_w, &e).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn branches_sum_and_bounded() {
        let p = ParamSet::default();
        let m = model(&p);
        for beta in [0.3, 1.0, 3.0] {
            let r = m.biased(beta).unwrap();
            assert!(r.ev_term >= 0.0 && r.uav_term >= 0.0);
            assert_eq!(r.p_a, r.ev_term + r.uav_term);
            assert!(r.p_a > 0.0 && r.p_a < 1.0);
        }
        for beta in [0.0, 0.4, 1.0] {
            let r = m.thinning(beta).unwrap();
            assert!(r.p_a > 0.0 && r.p_a < 1.0);
        }
    }

    #[test]
    fn thinning_endpoints_are_single_kind() {
        let p = ParamSet::default();
        let m = model(&p);
        let d = m.thinning(0.0).unwrap();
        assert_eq!(d.ev_term, 0.0);
        assert!(d.uav_term > 0.0);
        let ev = m.thinning(1.0).unwrap();
        assert_eq!(ev.uav_term, 0.0);
        assert!(ev.ev_term > 0.0);
    }

    #[test]
    fn empty_network_limit() {
        let mut p = ParamSet::default();
        p.geometry.lambda_u = 1e-15;
        p.energy.t_ch_d_ev = 1e-9;
        p.energy.t_ch_d_d = 1e-10;
        p.station.mu_e = 0.0;
        let r = model(&p).biased(1.0).unwrap();
        // E_y[g(y, 0, 0)] by direct quadrature of both kinds.
        let stations = StationGeometry::new(&p.geometry);
        let mut expect = 0.0;
        for kind in [StationKind::Ev, StationKind::Uav] {
            let top = stations.tail_radius(kind).unwrap();
            expect += quad::integrate(
                |y| stations.joint_kernel(kind, 1.0, y).unwrap() * g_fraction(y, 0.0, 0.0, &p.energy).unwrap(),
                0.0,
                top,
                quad::Tolerance::new(1e-12, 1e-10),
            )
            .unwrap()
            .value;
        }
        assert!((r.p_a - expect).abs() < 1e-6, "{} vs {expect}", r.p_a);
        assert!(r.p_a < 1.0);
        // Dense stations pull the serving distance to zero.
        p.geometry.lambda_l *= 30.0;
        p.geometry.lambda_p_ev *= 30.0;
        p.geometry.lambda_p_d *= 30.0;
        p.geometry.lambda_c_ev *= 900.0;
        p.geometry.lambda_c_d *= 900.0;
        let dense = model(&p).biased(1.0).unwrap();
        assert!(dense.p_a > r.p_a && dense.p_a > 0.99, "{}", dense.p_a);
    }

    #[test]
    fn nonincreasing_in_charge_time_and_load() {
        let base = ParamSet::default();
        let mut prev = f64::INFINITY;
        for t in [20.0, 30.0, 45.0, 60.0] {
            let mut p = base.clone();
            p.energy.t_ch_d_ev = t;
            let v = model(&p).biased(1.0).unwrap().p_a;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for lu in [1.0, 2.0, 4.0, 8.0] {
            let mut p = base.clone();
            p.geometry.lambda_u = lu * units::PER_KM2;
            let v = model(&p).biased(1.0).unwrap().p_a;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn planted_optimum() {
        let f = |b: f64| Ok(-(b - 0.37) * (b - 0.37));
        let r = optimize_beta(BetaKind::Thinning, f).unwrap();
        assert!((r.beta - 0.37).abs() < 1e-3);
        let g = |b: f64| Ok(-(b.ln() - 2.2f64.ln()).powi(2));
        let r = optimize_beta(BetaKind::Biased, g).unwrap();
        assert!((r.beta - 2.2).abs() < 1e-3);
    }

    #[test]
    fn flat_objective_reports_plateau() {
        let r = optimize_beta(BetaKind::Thinning, |_| Ok(0.5)).unwrap();
        assert!(r.plateau);
        assert_eq!(r.beta, 0.0);
    }
}
