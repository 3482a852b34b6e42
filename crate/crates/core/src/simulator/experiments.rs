//! Figure sweeps: analytic values next to their simulated counterparts,
//! emitted as fixed-schema CSV tables.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association;
use crate::availability::{self, AvailabilityModel, BetaKind};
use crate::coverage::{self, CoverageModel, CoveragePath};
use crate::economics::{self, EconomicModel, Weights};
use crate::error::{Error, Result};
use crate::params::{ParamSet, PolicyDecision, ServingPolicy, StationKind};
use crate::queueing::{self, NoDroneForm, QueueContext, QueueModel};
use crate::seed;
use crate::stats::Interval;
use crate::units;

use super::{des, geometry, sinr, SimConfig};

/// EV interarrival times (min) on the x-axis of the waiting and coverage sweeps.
pub const INTERARRIVAL_GRID: [f64; 11] = [1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0];
const BETA_POINTS: usize = 21;
const ECONOMICS_BETAS: usize = 13;
const ECONOMICS_DELTAS: usize = 13;
/// Station loads with smaller empirical probability are not simulated.
const LOAD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    WaitUav,
    WaitEv,
    Coverage,
    Beta,
    Economics,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::WaitUav, Experiment::WaitEv, Experiment::Coverage, Experiment::Beta, Experiment::Economics];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::WaitUav => "fig-wait-uav",
            Experiment::WaitEv => "fig-wait-ev",
            Experiment::Coverage => "fig-coverage",
            Experiment::Beta => "fig-beta",
            Experiment::Economics => "fig-economics",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Association policy swept by `fig-beta`.
    pub policy: BetaKind,
    /// SINR snapshots per coverage point.
    pub draws: usize,
    pub path: CoveragePath,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { policy: BetaKind::Biased, draws: 10_000, path: CoveragePath::Approx }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Num(x) if x.is_finite() => write!(out, "{x}").expect("write to string"),
            Cell::Num(_) => {}
            Cell::Int(i) => write!(out, "{i}").expect("write to string"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                write!(out, "\"{}\"", s.replace('"', "\"\"")).expect("write to string")
            }
            Cell::Text(s) => out.push_str(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) if x.is_finite() => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i as i64)
    }
}

/// One CSV table: header row, then one row per sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<String>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[i] {
                    Cell::Text(s) => s.clone(),
                    other => {
                        let mut s = String::new();
                        other.render(&mut s);
                        s
                    }
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Runs the named sweep. Each sweep point draws its randomness from a
/// child of `cfg.seed` keyed by the point index.
pub fn run_experiment(exp: Experiment, cfg: &SimConfig, opts: &ExperimentOptions) -> Result<Table> {
    cfg.validate()?;
    match exp {
        Experiment::WaitUav => wait_uav(cfg),
        Experiment::WaitEv => wait_ev(cfg),
        Experiment::Coverage => coverage_sweep(cfg, opts),
        Experiment::Beta => beta_sweep(cfg, opts),
        Experiment::Economics => economics_sweep(cfg, opts),
    }
}

fn with_interarrival(p: &ParamSet, tau: f64) -> ParamSet {
    let mut q = p.clone();
    q.station.mu_e = 1.0 / tau;
    q
}

fn point_cfg(cfg: &SimConfig, params: ParamSet, index: usize) -> SimConfig {
    SimConfig { params, seed: seed::child(cfg.seed, index as u64), ..cfg.clone() }
}

fn ev_stable(p: &ParamSet) -> Result<bool> {
    Ok(QueueContext::from_params(p, StationKind::Ev, 0)?.is_stable())
}

fn blank(n: usize) -> Vec<Cell> {
    vec![Cell::Num(f64::NAN); n]
}

fn ci(i: &Interval) -> [Cell; 2] {
    [Cell::Num(i.mean), Cell::Num(i.half_width)]
}

fn availability_optimum(avail: &AvailabilityModel, kind: BetaKind) -> Result<f64> {
    let decision = |b: f64| match kind {
        BetaKind::Biased => PolicyDecision::biased(b),
        BetaKind::Thinning => PolicyDecision::thinning(b),
    };
    Ok(availability::optimize_beta(kind, |b| Ok(avail.evaluate(&decision(b))?.p_a))?.beta)
}

fn wait_uav(cfg: &SimConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "interarrival_min",
        "mu_e_per_min",
        "c",
        "m",
        "status",
        "beta_d",
        "analytic_no_sharing",
        "analytic_sharing",
        "analytic_reduction",
        "sim_no_sharing",
        "sim_no_sharing_ci",
        "sim_sharing",
        "sim_sharing_ci",
        "sim_reduction",
    ]);
    let p = &cfg.params;
    let no_sharing_sim = geometry::simulate_availability(&point_cfg(cfg, p.clone(), 0), &PolicyDecision::no_sharing())?;
    let no_sharing = AvailabilityModel::new(p, QueueModel::default())?.mean_uav_wait(&PolicyDecision::no_sharing())?;
    let rows: Vec<Vec<Cell>> = INTERARRIVAL_GRID
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| -> Result<Vec<Cell>> {
            let q = with_interarrival(p, tau);
            let mut row: Vec<Cell> =
                vec![tau.into(), q.station.mu_e.into(), q.station.c_slots.into(), q.station.m_per_slot.into()];
            if !ev_stable(&q)? {
                row.push("unstable".into());
                row.extend(blank(9));
                return Ok(row);
            }
            let avail = AvailabilityModel::new(&q, QueueModel::default())?;
            let beta = availability_optimum(&avail, BetaKind::Biased)?;
            let decision = PolicyDecision::biased(beta);
            let sharing = avail.mean_uav_wait(&decision)?;
            let sim = geometry::simulate_availability(&point_cfg(cfg, q.clone(), i + 1), &decision)?;
            row.push("ok".into());
            row.extend([beta.into(), no_sharing.into(), sharing.into(), (no_sharing - sharing).into()]);
            row.extend(ci(&no_sharing_sim.mean_wait));
            row.extend(ci(&sim.mean_wait));
            row.push((no_sharing_sim.mean_wait.mean - sim.mean_wait.mean).into());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

/// Mean EV wait at an EV station with the UAV count drawn from `loads`,
/// each count simulated by its own DES.
fn simulated_ev_wait(cfg: &SimConfig, loads: &[f64], policy: ServingPolicy, stream: u64) -> Result<Interval> {
    let p = &cfg.params;
    let picks: Vec<(usize, f64)> = loads.iter().copied().enumerate().filter(|&(_, q)| q >= LOAD_FLOOR).collect();
    let mass: f64 = picks.iter().map(|(_, q)| q).sum();
    let waits: Vec<Interval> = picks
        .par_iter()
        .map(|&(n, _)| {
            let ctx = QueueContext::from_params(p, StationKind::Ev, n as u32)?;
            let mut d = cfg.des(&ctx);
            d.policy = policy;
            Ok(des::simulate_queue(&d, &p.energy, seed::grandchild(cfg.seed, stream, n as u64))?.ev_wait)
        })
        .collect::<Result<_>>()?;
    let mean = picks.iter().zip(&waits).map(|((_, q), w)| q * w.mean).sum::<f64>() / mass;
    // Independent DES runs: half-widths combine in quadrature.
    let hw = picks.iter().zip(&waits).map(|((_, q), w)| (q * w.half_width).powi(2)).sum::<f64>().sqrt() / mass;
    Ok(Interval { mean, half_width: hw })
}

fn wait_ev(cfg: &SimConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "interarrival_min",
        "mu_e_per_min",
        "status",
        "beta_d",
        "no_drone_mean_squared",
        "no_drone_pk",
        "analytic_ev_first",
        "analytic_fifs",
        "analytic_extra_ev_first",
        "sim_baseline",
        "sim_baseline_ci",
        "sim_ev_first",
        "sim_ev_first_ci",
        "sim_fifs",
        "sim_fifs_ci",
        "sim_extra_ev_first",
    ]);
    let p = &cfg.params;
    let rows: Vec<Vec<Cell>> = INTERARRIVAL_GRID
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| -> Result<Vec<Cell>> {
            let q = with_interarrival(p, tau);
            let mut row: Vec<Cell> = vec![tau.into(), q.station.mu_e.into()];
            if !ev_stable(&q)? {
                row.push("unstable".into());
                row.extend(blank(13));
                return Ok(row);
            }
            let base_ctx = QueueContext::from_params(&q, StationKind::Ev, 0)?;
            let squared = queueing::ev_wait_no_drone(&base_ctx, NoDroneForm::MeanSquared).unwrap_or(f64::NAN);
            let pk = queueing::ev_wait_no_drone(&base_ctx, NoDroneForm::PollaczekKhinchine)?;
            let model = economics::decision_queue_model();
            let avail = AvailabilityModel::new(&q, model)?;
            let beta = availability_optimum(&avail, BetaKind::Biased)?;
            let decision = PolicyDecision::biased(beta);
            let split = association::association_split(&q, &decision)?;
            let rho = association::load_ratio(&q, &decision, &split, StationKind::Ev);
            let pmf = association::CellLoadPmf::typical_station(rho, q.channel.a_fit, q.channel.b_fit);
            let mut analytic = [0.0; 2];
            for (k, policy) in [ServingPolicy::EvFirst, ServingPolicy::Fifs].into_iter().enumerate() {
                for (n, prob) in pmf.probs.iter().enumerate() {
                    analytic[k] += prob * queueing::ev_wait(&base_ctx.with_n(n as u32), policy, &model)?;
                }
                analytic[k] /= pmf.total();
            }
            let pc = point_cfg(cfg, q.clone(), i);
            let geo = geometry::simulate_geometry(&pc, &decision)?;
            let loads = geo.load_histogram(StationKind::Ev);
            let baseline = simulated_ev_wait(&pc, &[1.0], ServingPolicy::EvFirst, 0)?;
            let ev_first = simulated_ev_wait(&pc, &loads, ServingPolicy::EvFirst, 1)?;
            let fifs = simulated_ev_wait(&pc, &loads, ServingPolicy::Fifs, 2)?;
            row.push("ok".into());
            row.extend([beta.into(), squared.into(), pk.into(), analytic[0].into(), analytic[1].into()]);
            row.push((analytic[0] - pk).into());
            row.extend(ci(&baseline));
            row.extend(ci(&ev_first));
            row.extend(ci(&fifs));
            row.push((ev_first.mean - baseline.mean).into());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

fn coverage_sweep(cfg: &SimConfig, opts: &ExperimentOptions) -> Result<Table> {
    let mut t = Table::new(&[
        "interarrival_min",
        "mu_e_per_min",
        "status",
        "p_a_no_sharing",
        "coverage_no_sharing",
        "beta_d",
        "p_a_biased",
        "coverage_biased",
        "beta_o",
        "p_a_thinning",
        "coverage_thinning",
        "p_a_upper",
        "coverage_upper",
        "sim_coverage_biased",
        "sim_coverage_biased_ci",
    ]);
    let p = &cfg.params;
    let base = AvailabilityModel::new(p, QueueModel::default())?.evaluate(&PolicyDecision::no_sharing())?.p_a;
    let base_cov = CoverageModel::new(p, base)?.breakdown(opts.path)?.total;
    let upper_pa = coverage::upper_bound_availability(&p.energy);
    let upper = CoverageModel::new(p, upper_pa)?.breakdown(opts.path)?.total;
    let rows: Vec<Vec<Cell>> = INTERARRIVAL_GRID
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| -> Result<Vec<Cell>> {
            let q = with_interarrival(p, tau);
            let mut row: Vec<Cell> = vec![tau.into(), q.station.mu_e.into()];
            if !ev_stable(&q)? {
                row.push("unstable".into());
                row.extend([base.into(), base_cov.into()]);
                row.extend(blank(6));
                row.extend([upper_pa.into(), upper.into()]);
                row.extend(blank(2));
                return Ok(row);
            }
            let avail = AvailabilityModel::new(&q, QueueModel::default())?;
            let (bd, cov_b) = coverage::optimize_coverage(&avail, BetaKind::Biased, opts.path)?;
            let (bo, cov_t) = coverage::optimize_coverage(&avail, BetaKind::Thinning, opts.path)?;
            let sim = sinr::simulate_coverage(&q, bd.value.clamp(0.0, 1.0), opts.draws, seed::child(cfg.seed, i as u64))?;
            row.push("ok".into());
            row.extend([base.into(), base_cov.into()]);
            row.extend([bd.beta.into(), bd.value.into(), cov_b.total.into()]);
            row.extend([bo.beta.into(), bo.value.into(), cov_t.total.into()]);
            row.extend([upper_pa.into(), upper.into()]);
            row.extend(ci(&sim.total));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

/// β values swept by `fig-beta`.
pub fn beta_grid(kind: BetaKind) -> Vec<f64> {
    match kind {
        BetaKind::Biased => economics::log_grid(0.1, 10.0, BETA_POINTS),
        BetaKind::Thinning => economics::linear_grid(0.0, 1.0, BETA_POINTS),
    }
}

fn beta_sweep(cfg: &SimConfig, opts: &ExperimentOptions) -> Result<Table> {
    let mut t = Table::new(&[
        "policy",
        "beta",
        "a_ev",
        "p_a",
        "ev_term",
        "uav_term",
        "coverage",
        "sim_a_ev",
        "sim_p_a",
        "sim_p_a_ci",
    ]);
    let p = &cfg.params;
    let avail = AvailabilityModel::new(p, QueueModel::default())?;
    let label = match opts.policy {
        BetaKind::Biased => "biased",
        BetaKind::Thinning => "thinning",
    };
    let rows: Vec<Vec<Cell>> = beta_grid(opts.policy)
        .into_par_iter()
        .enumerate()
        .map(|(i, beta)| -> Result<Vec<Cell>> {
            let decision = match opts.policy {
                BetaKind::Biased => PolicyDecision::biased(beta),
                BetaKind::Thinning => PolicyDecision::thinning(beta),
            };
            let a = avail.evaluate(&decision)?;
            let cov = CoverageModel::new(p, a.p_a.clamp(0.0, 1.0))?.breakdown(opts.path)?;
            let sim = geometry::simulate_availability(&point_cfg(cfg, p.clone(), i), &decision)?;
            let mut row: Vec<Cell> = vec![label.into(), beta.into(), a.split.a_ev.into(), a.p_a.into()];
            row.extend([a.ev_term.into(), a.uav_term.into(), cov.total.into(), sim.geometry.a_ev_pooled().into()]);
            row.extend(ci(&sim.p_a));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

fn economics_sweep(cfg: &SimConfig, opts: &ExperimentOptions) -> Result<Table> {
    let mut t = Table::new(&[
        "weights",
        "stage",
        "beta_d",
        "delta_lambda_c_d_per_km2",
        "p_a",
        "extra_ev_wait_min",
        "extra_ev_wait_hours",
        "fee_usd",
        "coverage",
        "coverage_ratio",
        "build_ratio",
        "c_e",
        "c_u",
        "chosen",
    ]);
    let p = &cfg.params;
    let model = EconomicModel::new(p, economics::decision_queue_model(), opts.path)?;
    let beta_max = model.availability_optimal_beta()?;
    let betas = economics::log_grid(0.1, beta_max, ECONOMICS_BETAS);
    let deltas = economics::linear_grid(0.0, 2.0 * p.geometry.lambda_c_d, ECONOMICS_DELTAS);
    for (label, w) in [("performance", Weights::performance(&p.economics)), ("cost", Weights::cost(&p.economics))] {
        let s = economics::decision_sweep(&model, &betas, &deltas, w)?;
        for (stage, rows, chosen) in [("ev", &s.ev_stage, s.beta_star), ("uav", &s.uav_stage, s.delta_star)] {
            for r in rows {
                let c = &r.components;
                let picked = match stage {
                    "ev" => r.decision.association.beta() == chosen,
                    _ => r.decision.delta_lambda_c_d == chosen,
                };
                t.push(vec![
                    label.into(),
                    stage.into(),
                    r.decision.association.beta().into(),
                    (r.decision.delta_lambda_c_d / units::PER_KM2).into(),
                    c.p_a.into(),
                    c.extra_wait.into(),
                    c.extra_wait_hours.into(),
                    c.fee.into(),
                    c.coverage.into(),
                    c.coverage_ratio.into(),
                    c.build_ratio.into(),
                    r.c_e.into(),
                    r.c_u.into(),
                    Cell::Int(picked as i64),
                ]);
            }
        }
    }
    Ok(t)
}

/// `(β_d, Δλ_c,d)` marked as chosen for `weights` in an economics table.
pub fn chosen_decision(t: &Table, weights: &str) -> Option<(f64, f64)> {
    let w = t.text_column("weights")?;
    let stage = t.text_column("stage")?;
    let chosen = t.column("chosen")?;
    let beta = t.column("beta_d")?;
    let delta = t.column("delta_lambda_c_d_per_km2")?;
    let pick = |st: &str| (0..t.rows.len()).find(|&i| w[i] == weights && stage[i] == st && chosen[i] == Some(1.0));
    let b = beta[pick("ev")?]?;
    let d = delta[pick("uav")?]?;
    Some((b, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> SimConfig {
        let mut c = SimConfig::new(ParamSet::default(), seed).unwrap();
        c.realizations = 3;
        c
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!(matches!("fig-nope".parse::<Experiment>(), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn csv_quoting_and_blanks() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![Cell::Num(0.5), Cell::Num(f64::NAN), "x,y".into()]);
        assert_eq!(t.to_csv(), "a,b,c\n0.5,,\"x,y\"\n");
    }

    #[test]
    fn beta_sweep_is_deterministic_and_rises_then_falls() {
        let opts = ExperimentOptions { policy: BetaKind::Thinning, ..Default::default() };
        let a = run_experiment(Experiment::Beta, &quick(7), &opts).unwrap().to_csv();
        let b = run_experiment(Experiment::Beta, &quick(7), &opts).unwrap().to_csv();
        assert_eq!(a, b);
        let t = run_experiment(Experiment::Beta, &quick(7), &opts).unwrap();
        let cov: Vec<f64> = t.column("coverage").unwrap().into_iter().map(Option::unwrap).collect();
        let peak = cov.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        assert!(peak > 0 && peak < cov.len() - 1);
    }
}
