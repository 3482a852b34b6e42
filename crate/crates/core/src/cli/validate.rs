use crate::association::{association_split, CellLoadPmf};
use crate::availability::AvailabilityModel;
use crate::coverage::{upper_bound_coverage, CoverageModel, CoveragePath, LinkClass};
use crate::economics::{decision_queue_model, sharing_fee, EconomicModel, Weights};
use crate::error::Result;
use crate::energy::charge_time_moments;
use crate::params::{ev_queue_stable, stability_check, ParamSet, PolicyDecision, ServingPolicy, StationKind};
use crate::queueing::{report, QueueContext, QueueModel, Regime};
use crate::simulator::{simulate_queue, DesConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

const BIASES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const THINNING: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Runs every invariant check on `p`. A check that errors counts as failed.
pub fn run_checks(p: &ParamSet, seed: u64) -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn(&ParamSet, u64) -> Result<(bool, String)>); 12] = [
        ("params", params_ok),
        ("association-partition", association_partition),
        ("cell-load-pmf", cell_load_pmf),
        ("policy-equivalence-large-n", policy_equivalence),
        ("ev-first-not-above-fifs", ev_first_ordering),
        ("availability-range", availability_range),
        ("laplace-at-zero", laplace_at_zero),
        ("coverage-paths-agree", coverage_paths),
        ("coverage-below-upper-bound", coverage_bounded),
        ("fee-fixture", fee_fixture),
        ("no-sharing-objective", no_sharing_objective),
        ("des-littles-law", des_little),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f(p, seed) {
            Ok((pass, detail)) => CheckOutcome { name, pass, detail },
            Err(e) => CheckOutcome { name, pass: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn params_ok(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    p.validate()?;
    let mean = charge_time_moments(&p.energy)?.mean;
    let stable = ev_queue_stable(p.station.mu_e, mean, p.station.c_slots);
    // The mean-squared no-drone EV wait needs the stricter condition; the
    // decision model falls back to Pollaczek-Khinchine when it fails.
    let squared = stability_check(p)?;
    Ok((stable, format!("valid, EV queue stable = {stable}, mean-squared EV-wait form in domain = {squared}")))
}

fn association_partition(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let decisions = BIASES.map(PolicyDecision::biased).into_iter().chain(THINNING.map(PolicyDecision::thinning));
    for d in decisions {
        let s = association_split(p, &d)?;
        worst = worst.max((s.get(StationKind::Ev) + s.get(StationKind::Uav) - 1.0).abs());
    }
    Ok((worst <= 1e-6, format!("max |A_ev + A_d - 1| = {worst:.2e}")))
}

fn cell_load_pmf(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let (a, b) = (p.channel.a_fit, p.channel.b_fit);
    let mut norm = 0.0f64;
    let mut mean = 0.0f64;
    for rho in [0.5, 2.0, 8.0, 30.0] {
        let others = CellLoadPmf::other_uavs(rho, a, b);
        let typical = CellLoadPmf::typical_station(rho, a, b);
        norm = norm.max((others.total() - 1.0).abs()).max((typical.total() - 1.0).abs());
        mean = mean.max((others.mean() - (a + 1.0) / b * rho).abs()).max((typical.mean() - a / b * rho).abs());
    }
    Ok((norm <= 1e-9 && mean <= 1e-8, format!("normalization error {norm:.2e}, mean error {mean:.2e}")))
}

fn policy_equivalence(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let model = decision_queue_model();
    let mut checked = 0;
    let mut all_equal = true;
    for kind in [StationKind::Ev, StationKind::Uav] {
        for n in [10, 20, 40, 80, 160] {
            let ctx = QueueContext::from_params(p, kind, n)?;
            if ctx.regime() != Regime::LargeN || !ctx.is_stable() {
                continue;
            }
            let a = report(&ctx, ServingPolicy::Fifs, &model)?.t_w_uav;
            let b = report(&ctx, ServingPolicy::EvFirst, &model)?.t_w_uav;
            all_equal &= a.to_bits() == b.to_bits();
            checked += 1;
        }
    }
    Ok((all_equal && checked > 0, format!("{checked} large-N contexts, identical UAV waits = {all_equal}")))
}

fn ev_first_ordering(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let model = decision_queue_model();
    let mut ok = true;
    for n in [0, 2, 5, 12, 30] {
        let ctx = QueueContext::from_params(p, StationKind::Ev, n)?;
        let a = report(&ctx, ServingPolicy::EvFirst, &model)?.t_w_ev;
        let b = report(&ctx, ServingPolicy::Fifs, &model)?.t_w_ev;
        ok &= a <= b;
    }
    Ok((ok, format!("EV-first EV wait <= FIFS EV wait: {ok}")))
}

fn availability_range(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let m = AvailabilityModel::new(p, QueueModel::default())?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in BIASES {
        let v = m.biased(b)?.p_a;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    for b in THINNING {
        let v = m.thinning(b)?.p_a;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi), format!("P_a in [{lo:.4}, {hi:.4}]")))
}

fn laplace_at_zero(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let m = CoverageModel::new(p, 0.6)?;
    let mut worst = 0.0f64;
    for class in LinkClass::ALL {
        for r in [150.0, 500.0, 2000.0] {
            let at_zero = m.laplace_interference(0.0, r, class)?;
            let near_zero = m.laplace_interference(1e-30, r, class)?;
            worst = worst.max((at_zero - 1.0).abs()).max((near_zero - 1.0).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |L_I(0) - 1| = {worst:.2e}")))
}

fn coverage_paths(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for p_a in [0.3, 0.6, 0.9] {
        let m = CoverageModel::new(p, p_a)?;
        let exact = m.breakdown(CoveragePath::Exact)?.total;
        let approx = m.breakdown(CoveragePath::Approx)?.total;
        worst = worst.max((exact - approx).abs());
    }
    Ok((worst <= 0.02, format!("max |exact - approx| = {worst:.4}")))
}

fn coverage_bounded(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let avail = AvailabilityModel::new(p, QueueModel::default())?;
    let upper = upper_bound_coverage(p, CoveragePath::Approx)?.total;
    let mut worst = 0.0f64;
    for b in BIASES {
        let p_a = avail.biased(b)?.p_a;
        worst = worst.max(CoverageModel::new(p, p_a)?.breakdown(CoveragePath::Approx)?.total);
    }
    Ok((worst <= upper + 1e-12 && upper <= 1.0, format!("max coverage {worst:.4} <= upper bound {upper:.4}")))
}

fn fee_fixture(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let mut q = p.clone();
    q.energy.b_max = 177.6;
    q.economics.c_vol = 0.2;
    let energy_term = sharing_fee(10.0, 100.0, &q)? - sharing_fee(0.0, 100.0, &q)?;
    Ok(((energy_term - 1867.0).abs() <= 1.0, format!("energy term {energy_term:.2} USD/year")))
}

fn no_sharing_objective(p: &ParamSet, _: u64) -> Result<(bool, String)> {
    let model = EconomicModel::new(p, decision_queue_model(), CoveragePath::Approx)?;
    let w = Weights::from_params(&p.economics);
    let r = model.evaluate(&PolicyDecision::no_sharing(), w)?;
    let floor = w.w_inf_ev * p.station.c_slots as f64 * p.economics.c_main;
    let ok = (r.c_e - floor).abs() <= 1e-9 * floor.abs().max(1.0) && (r.components.coverage_ratio - 1.0).abs() <= 1e-12;
    Ok((ok, format!("C_e = {:.3}, fee floor term = {floor:.3}", r.c_e)))
}

fn des_little(p: &ParamSet, seed: u64) -> Result<(bool, String)> {
    let ctx = QueueContext::from_params(p, StationKind::Ev, 4)?;
    let cfg = DesConfig::from_context(&ctx, p.station.serving_policy);
    let r = simulate_queue(&cfg, &p.energy, seed)?;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-9);
    let (ev, uav) = (rel(r.ev_queue_mean, r.ev_little), rel(r.uav_queue_mean, r.uav_little));
    Ok((ev <= 0.05 && uav <= 0.05, format!("relative gap EV {ev:.2e}, UAV {uav:.2e}")))
}
