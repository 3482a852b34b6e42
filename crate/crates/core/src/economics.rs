//! Operator objectives: the EV operator trades extra EV waiting against the
//! sharing fee, the UAV operator trades coverage against new stations and
//! the fee it pays.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{self, CellLoadPmf};
use crate::availability::{self, AvailabilityModel, BetaKind};
use crate::coverage::{CoverageModel, CoveragePath};
use crate::error::{Error, Result};
use crate::params::{Association, EconomicParams, ParamSet, PolicyDecision, ServingPolicy, StationKind};
use crate::queueing::{self, QueueContext, QueueModel};
use crate::units;

/// Yearly fee per shared station (USD): energy delivered to visiting UAVs
/// at `c_vol` plus maintenance of every charger.
pub fn sharing_fee(mean_uavs: f64, mean_cycle: f64, p: &ParamSet) -> Result<f64> {
    if !(mean_uavs >= 0.0) {
        return Err(Error::Domain { what: "mean UAVs per station", value: mean_uavs });
    }
    let maintenance = p.station.c_slots as f64 * p.economics.c_main;
    if mean_uavs == 0.0 {
        return Ok(maintenance);
    }
    if !(mean_cycle > 0.0 && mean_cycle.is_finite()) {
        return Err(Error::Domain { what: "UAV cycle time", value: mean_cycle });
    }
    let charges_per_year = units::MINUTES_PER_YEAR * mean_uavs / mean_cycle;
    Ok(charges_per_year * p.energy.b_max / units::KWH * p.economics.c_vol + maintenance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_wait: f64,
    pub w_inf_ev: f64,
    pub w_cov: f64,
    pub w_c: f64,
    pub w_inf_d: f64,
}

impl Weights {
    pub fn from_params(e: &EconomicParams) -> Self {
        Self { w_wait: e.w_wait, w_inf_ev: e.w_inf_ev, w_cov: e.w_cov, w_c: e.w_c, w_inf_d: e.w_inf_d }
    }

    /// Operators that weigh waiting and coverage heavily.
    pub fn performance(e: &EconomicParams) -> Self {
        Self { w_wait: -2.0 / 3.0, w_inf_ev: 1.0 / 3.0, w_cov: 8.0, ..Self::from_params(e) }
    }

    /// Operators that weigh revenue and build cost heavily.
    pub fn cost(e: &EconomicParams) -> Self {
        Self { w_wait: -1.0 / 3.0, w_inf_ev: 2.0 / 3.0, w_cov: 6.0, ..Self::from_params(e) }
    }
}

/// Unweighted ingredients of both objectives at one decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub p_a: f64,
    /// Extra mean wait of one EV relative to an EV-first station without UAVs (min).
    pub extra_wait: f64,
    /// Extra EV waiting per station and year (EV-hours).
    pub extra_wait_hours: f64,
    /// Sharing fee per EV station (USD/year).
    pub fee: f64,
    pub coverage: f64,
    /// Coverage relative to the no-sharing, no-new-station baseline.
    pub coverage_ratio: f64,
    /// `Δλ_c,d / λ_c,d`.
    pub build_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveResult {
    pub decision: PolicyDecision,
    pub components: Components,
    pub weights: Weights,
    pub c_e: f64,
    pub c_u: f64,
}

impl ObjectiveResult {
    pub fn new(decision: PolicyDecision, c: Components, w: Weights) -> Self {
        Self {
            decision,
            components: c,
            weights: w,
            c_e: w.w_wait * c.extra_wait_hours + w.w_inf_ev * c.fee,
            c_u: w.w_cov * c.coverage_ratio + w.w_c * c.build_ratio + w.w_inf_d * c.fee,
        }
    }
}

/// Evaluates objective components against fixed no-sharing baselines.
#[derive(Debug)]
pub struct EconomicModel {
    avail: AvailabilityModel,
    path: CoveragePath,
    baseline_coverage: f64,
    baseline_ev_wait: f64,
}

impl EconomicModel {
    pub fn new(p: &ParamSet, queue: QueueModel, path: CoveragePath) -> Result<Self> {
        let avail = AvailabilityModel::new(p, queue)?;
        let base = avail.evaluate(&PolicyDecision::no_sharing())?;
        let baseline_coverage = CoverageModel::new(p, base.p_a)?.breakdown(path)?.total;
        let ctx = QueueContext::from_params(p, StationKind::Ev, 0)?;
        let baseline_ev_wait = queueing::ev_wait(&ctx, ServingPolicy::EvFirst, &queue)?;
        Ok(Self { avail, path, baseline_coverage, baseline_ev_wait })
    }

    pub fn params(&self) -> &ParamSet {
        self.avail.params()
    }

    pub fn availability(&self) -> &AvailabilityModel {
        &self.avail
    }

    pub fn baseline_coverage(&self) -> f64 {
        self.baseline_coverage
    }

    pub fn baseline_ev_wait(&self) -> f64 {
        self.baseline_ev_wait
    }

    /// Mean EV wait at an EV station, averaged over the number of UAVs it serves.
    pub fn ev_wait(&self, decision: &PolicyDecision) -> Result<f64> {
        let p = self.params();
        let split = association::association_split(p, decision)?;
        let rho = association::load_ratio(p, decision, &split, StationKind::Ev);
        let pmf = CellLoadPmf::typical_station(rho, p.channel.a_fit, p.channel.b_fit);
        let model = self.avail.queue_model();
        let base = QueueContext::from_params(p, StationKind::Ev, 0)?;
        let waits: Vec<f64> = (0..pmf.probs.len())
            .into_par_iter()
            .map(|n| queueing::ev_wait(&base.with_n(n as u32), p.station.serving_policy, model))
            .collect::<Result<_>>()?;
        Ok(pmf.probs.iter().zip(&waits).map(|(q, w)| q * w).sum::<f64>() / pmf.total())
    }

    pub fn fee(&self, decision: &PolicyDecision) -> Result<f64> {
        let p = self.params();
        let split = association::association_split(p, decision)?;
        let mean_uavs = association::load_ratio(p, decision, &split, StationKind::Ev);
        match self.avail.mean_cycle(decision, StationKind::Ev)? {
            Some(cycle) => sharing_fee(mean_uavs, cycle, p),
            None => sharing_fee(0.0, 0.0, p),
        }
    }

    pub fn components(&self, decision: &PolicyDecision) -> Result<Components> {
        let p = self.params();
        let p_a = self.avail.evaluate(decision)?.p_a;
        let coverage = CoverageModel::new(p, p_a)?.breakdown(self.path)?.total;
        let extra_wait = self.ev_wait(decision)? - self.baseline_ev_wait;
        Ok(Components {
            p_a,
            extra_wait,
            // min × per-min arrivals × minutes per year, expressed in hours.
            extra_wait_hours: extra_wait * p.station.mu_e * units::MINUTES_PER_YEAR / units::HOUR,
            fee: self.fee(decision)?,
            coverage,
            coverage_ratio: coverage / self.baseline_coverage,
            build_ratio: decision.delta_lambda_c_d / p.geometry.lambda_c_d,
        })
    }

    /// Both objectives at `decision`.
    pub fn evaluate(&self, decision: &PolicyDecision, w: Weights) -> Result<ObjectiveResult> {
        Ok(ObjectiveResult::new(*decision, self.components(decision)?, w))
    }

    /// Biased-distance `β_d` that maximizes availability without new stations.
    pub fn availability_optimal_beta(&self) -> Result<f64> {
        Ok(availability::optimize_beta(BetaKind::Biased, |b| Ok(self.avail.biased(b)?.p_a))?.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub weights: Weights,
    /// EV operator's stage: `β_d` grid with no new stations.
    pub ev_stage: Vec<ObjectiveResult>,
    pub beta_star: f64,
    /// UAV operator's stage: `Δλ` grid at `beta_star`.
    pub uav_stage: Vec<ObjectiveResult>,
    /// `Δλ` maximizing and minimizing `C_u`.
    pub delta_star: f64,
    pub delta_star_min: f64,
}

fn argmax<F: Fn(&ObjectiveResult) -> f64>(rows: &[ObjectiveResult], f: F) -> Result<&ObjectiveResult> {
    rows.iter().max_by(|a, b| f(a).total_cmp(&f(b))).ok_or_else(|| Error::Optimize("empty grid".into()))
}

fn grid_rows(model: &EconomicModel, decisions: &[PolicyDecision], w: Weights) -> Result<Vec<ObjectiveResult>> {
    decisions.par_iter().map(|d| model.evaluate(d, w)).collect()
}

/// Sequential decision: the EV operator picks `β_d` from `betas` with no
/// new stations, then the UAV operator picks `Δλ` from `deltas` at that `β_d`.
pub fn decision_sweep(model: &EconomicModel, betas: &[f64], deltas: &[f64], w: Weights) -> Result<SweepResult> {
    let ev_decisions: Vec<PolicyDecision> = betas.iter().map(|&b| PolicyDecision::biased(b)).collect();
    let ev_stage = grid_rows(model, &ev_decisions, w)?;
    let beta_star = argmax(&ev_stage, |r| r.c_e)?.decision.association.beta();
    let uav_decisions: Vec<PolicyDecision> = deltas
        .iter()
        .map(|&d| PolicyDecision::new(Association::BiasedDistance(beta_star), d))
        .collect::<Result<_>>()?;
    let uav_stage = grid_rows(model, &uav_decisions, w)?;
    let delta_star = argmax(&uav_stage, |r| r.c_u)?.decision.delta_lambda_c_d;
    let delta_star_min = argmax(&uav_stage, |r| -r.c_u)?.decision.delta_lambda_c_d;
    Ok(SweepResult { weights: w, ev_stage, beta_star, uav_stage, delta_star, delta_star_min })
}

/// The same game with the UAV operator moving first at `betas[0]`.
pub fn decision_sweep_reversed(
    model: &EconomicModel,
    betas: &[f64],
    deltas: &[f64],
    w: Weights,
) -> Result<(f64, f64)> {
    let first = *betas.first().ok_or_else(|| Error::Optimize("empty beta grid".into()))?;
    let uav: Vec<PolicyDecision> = deltas
        .iter()
        .map(|&d| PolicyDecision::new(Association::BiasedDistance(first), d))
        .collect::<Result<_>>()?;
    let delta = argmax(&grid_rows(model, &uav, w)?, |r| r.c_u)?.decision.delta_lambda_c_d;
    let ev: Vec<PolicyDecision> = betas
        .iter()
        .map(|&b| PolicyDecision::new(Association::BiasedDistance(b), delta))
        .collect::<Result<_>>()?;
    let beta = argmax(&grid_rows(model, &ev, w)?, |r| r.c_e)?.decision.association.beta();
    Ok((beta, delta))
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Queue model used for operator decisions: the EV no-drone wait needs the
/// queueing-theoretic form (the mean-squared one leaves its domain at default
/// loads) and the residual UAV delay uses the expected-minimum integrand.
pub fn decision_queue_model() -> QueueModel {
    QueueModel {
        no_drone: queueing::NoDroneForm::PollaczekKhinchine,
        residual: queueing::ResidualForm::MinResidual,
        ..QueueModel::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> EconomicModel {
        EconomicModel::new(&ParamSet::default(), decision_queue_model(), CoveragePath::Approx).unwrap()
    }

    #[test]
    fn fee_fixtures() {
        let p = ParamSet::default();
        let floor = 2.0 * 1131.0;
        assert_eq!(sharing_fee(0.0, 100.0, &p).unwrap(), floor);
        let energy = sharing_fee(10.0, 100.0, &p).unwrap() - floor;
        assert!((energy - 1867.0).abs() < 1.0, "{energy}");
        let mut one = p.clone();
        one.station.c_slots = 1;
        assert_eq!(sharing_fee(0.0, 1.0, &one).unwrap(), 1131.0);
        assert!(sharing_fee(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn fee_nondecreasing_in_load_and_chargers() {
        let p = ParamSet::default();
        let mut last = 0.0;
        for n in [0.0, 0.5, 2.0, 8.0] {
            let f = sharing_fee(n, 90.0, &p).unwrap();
            assert!(f >= last);
            last = f;
        }
        let mut more = p.clone();
        more.station.c_slots = 3;
        assert!(sharing_fee(4.0, 90.0, &more).unwrap() > sharing_fee(4.0, 90.0, &p).unwrap());
    }

    #[test]
    fn no_sharing_baseline() {
        let m = model();
        let w = Weights::from_params(&m.params().economics);
        let r = m.evaluate(&PolicyDecision::no_sharing(), w).unwrap();
        assert!(r.components.extra_wait.abs() < 1e-12);
        assert!((r.c_e - w.w_inf_ev * 2.0 * 1131.0).abs() < 1e-9);
        assert!((r.components.coverage_ratio - 1.0).abs() < 1e-12);
        assert!((r.c_u - (w.w_cov + w.w_inf_d * 2.0 * 1131.0)).abs() < 1e-9);
    }

    #[test]
    fn components_recombine() {
        let m = model();
        let w = Weights::cost(&m.params().economics);
        let d = PolicyDecision::new(Association::BiasedDistance(0.4), 1e-7).unwrap();
        let r = m.evaluate(&d, w).unwrap();
        let c = r.components;
        assert_eq!(r.c_e, w.w_wait * c.extra_wait_hours + w.w_inf_ev * c.fee);
        assert_eq!(r.c_u, w.w_cov * c.coverage_ratio + w.w_c * c.build_ratio + w.w_inf_d * c.fee);
    }

    #[test]
    fn fee_and_extra_wait_grow_with_sharing() {
        let m = model();
        let w = Weights::from_params(&m.params().economics);
        let rows: Vec<_> = [0.1, 0.2, 0.35, 0.5].iter().map(|&b| m.evaluate(&PolicyDecision::biased(b), w).unwrap()).collect();
        for pair in rows.windows(2) {
            assert!(pair[1].components.fee > pair[0].components.fee);
            assert!(pair[1].components.extra_wait > pair[0].components.extra_wait);
            assert!(pair[1].c_e != pair[0].c_e);
        }
    }

    #[test]
    fn new_stations_raise_coverage_and_cost() {
        let m = model();
        let w = Weights::from_params(&m.params().economics);
        let lc = m.params().geometry.lambda_c_d;
        let rows: Vec<_> = linear_grid(0.0, lc, 4)
            .into_iter()
            .map(|dl| m.evaluate(&PolicyDecision::new(Association::BiasedDistance(0.5), dl).unwrap(), w).unwrap())
            .collect();
        for pair in rows.windows(2) {
            assert!(pair[1].components.coverage >= pair[0].components.coverage);
            assert!(pair[1].components.build_ratio > pair[0].components.build_ratio);
        }
    }

    #[test]
    fn single_point_sweep_equals_direct_call() {
        let m = model();
        let w = Weights::performance(&m.params().economics);
        let s = decision_sweep(&m, &[0.3], &[0.0], w).unwrap();
        assert_eq!(s.ev_stage[0], m.evaluate(&PolicyDecision::biased(0.3), w).unwrap());
        assert_eq!(s.uav_stage[0].c_u, s.ev_stage[0].c_u);
        assert_eq!(s.beta_star, 0.3);
    }

    #[test]
    fn grids() {
        assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let g = log_grid(0.1, 10.0, 3);
        assert!((g[1] - 1.0).abs() < 1e-12 && (g[2] - 10.0).abs() < 1e-12);
    }
}
