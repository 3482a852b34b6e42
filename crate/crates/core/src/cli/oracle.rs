use std::fmt::Write;

use crate::association::association_split;
use crate::availability::AvailabilityModel;
use crate::coverage::CoverageModel;
use crate::economics::decision_queue_model;
use crate::error::{Error, Result};
use crate::params::{PolicyDecision, ServingPolicy, StationKind};
use crate::queueing::{ev_wait, uav_wait, QueueContext, QueueModel};
use crate::seed;
use crate::simulator::{simulate_availability, simulate_coverage, simulate_geometry, simulate_queue};
use crate::simulator::{Cell, DesConfig, ExperimentOptions, SimConfig, Table};
use crate::stats::Interval;

const COLUMNS: [&str; 8] =
    ["stage", "quantity", "setting", "analytic", "simulated", "sim_ci", "abs_deviation", "rel_deviation"];

fn push(t: &mut Table, stage: &str, quantity: &str, setting: &str, analytic: f64, sim: Interval) {
    let abs = (sim.mean - analytic).abs();
    let rel = if analytic != 0.0 { abs / analytic.abs() } else { f64::NAN };
    t.push(vec![
        stage.into(),
        quantity.into(),
        Cell::Text(setting.to_string()),
        analytic.into(),
        sim.mean.into(),
        sim.half_width.into(),
        abs.into(),
        rel.into(),
    ]);
}

/// Analytic value next to its simulated counterpart for each model stage.
/// Queue points whose EV load is unstable are left out.
pub fn oracle_table(cfg: &SimConfig, opts: &ExperimentOptions) -> Result<Table> {
    cfg.validate()?;
    let p = &cfg.params;
    let mut t = Table::new(&COLUMNS);

    let decisions = [
        ("no sharing", PolicyDecision::no_sharing()),
        ("biased 0.25", PolicyDecision::biased(0.25)),
        ("biased 1", PolicyDecision::biased(1.0)),
        ("biased 4", PolicyDecision::biased(4.0)),
        ("thinning 0.5", PolicyDecision::thinning(0.5)),
    ];
    for (i, (label, d)) in decisions.iter().enumerate().skip(1) {
        let analytic = association_split(p, d)?.get(StationKind::Ev);
        let c = SimConfig { seed: seed::child(cfg.seed, i as u64), ..cfg.clone() };
        push(&mut t, "geometry", "A_ev", label, analytic, simulate_geometry(&c, d)?.a_ev);
    }

    let model = QueueModel::default();
    let ev_model = decision_queue_model();
    let points = [
        (StationKind::Ev, 2),
        (StationKind::Ev, 6),
        (StationKind::Ev, 12),
        (StationKind::Ev, 20),
        (StationKind::Ev, 40),
        (StationKind::Uav, 2),
        (StationKind::Uav, 10),
        (StationKind::Uav, 30),
    ];
    for (i, (kind, n)) in points.into_iter().enumerate() {
        let ctx = QueueContext::from_params(p, kind, n)?;
        if !ctx.is_stable() {
            continue;
        }
        let policies: &[ServingPolicy] = match kind {
            StationKind::Ev => &[ServingPolicy::Fifs, ServingPolicy::EvFirst],
            StationKind::Uav => &[ServingPolicy::Fifs],
        };
        for (j, &policy) in policies.iter().enumerate() {
            let mut des_cfg = DesConfig::from_context(&ctx, policy);
            if let Some(h) = cfg.des_horizon {
                des_cfg.horizon = h;
            }
            let des = match simulate_queue(&des_cfg, &p.energy, seed::grandchild(cfg.seed, 100 + i as u64, j as u64)) {
                Ok(r) => r,
                Err(Error::Unstable { .. }) => continue,
                Err(e) => return Err(e),
            };
            let setting = match kind {
                StationKind::Ev => format!("ev N={n} {}", policy.label()),
                StationKind::Uav => format!("uav N={n}"),
            };
            push(&mut t, "queueing", "uav_wait_min", &setting, uav_wait(&ctx, &model)?, des.uav_wait);
            if kind == StationKind::Ev {
                push(&mut t, "queueing", "ev_wait_min", &setting, ev_wait(&ctx, policy, &ev_model)?, des.ev_wait);
            }
        }
    }

    let avail = AvailabilityModel::new(p, model)?;
    for (i, (label, d)) in decisions.iter().take(3).enumerate() {
        let analytic = avail.evaluate(d)?.p_a;
        let c = SimConfig { seed: seed::child(cfg.seed, 200 + i as u64), ..cfg.clone() };
        push(&mut t, "availability", "P_a", label, analytic, simulate_availability(&c, d)?.p_a);
    }

    for (i, (label, d)) in decisions.iter().take(3).enumerate() {
        let p_a = avail.evaluate(d)?.p_a;
        let analytic = CoverageModel::new(p, p_a)?.breakdown(opts.path)?.total;
        let sim = simulate_coverage(p, p_a, opts.draws, seed::child(cfg.seed, 300 + i as u64))?;
        push(&mut t, "coverage", "P_cov", label, analytic, sim.total);
    }
    Ok(t)
}

/// Fixed-width rendering for the terminal.
pub fn render(t: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<13} {:<13} {:<18} {:>10} {:>10} {:>9} {:>9} {:>8}",
        "stage", "quantity", "setting", "analytic", "simulated", "±ci", "|dev|", "rel"
    );
    let text = |c: &Cell| match c {
        Cell::Text(s) => s.clone(),
        other => other.as_f64().map(|x| format!("{x}")).unwrap_or_default(),
    };
    let num = |c: &Cell| c.as_f64().map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for r in &t.rows {
        let _ = writeln!(
            out,
            "{:<13} {:<13} {:<18} {:>10} {:>10} {:>9} {:>9} {:>8}",
            text(&r[0]),
            text(&r[1]),
            text(&r[2]),
            num(&r[3]),
            num(&r[4]),
            num(&r[5]),
            num(&r[6]),
            num(&r[7])
        );
    }
    out
}
