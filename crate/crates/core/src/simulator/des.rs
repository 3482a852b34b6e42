//! Event-driven simulation of one charging station shared by Poisson EVs
//! and a fixed population of cyclic UAVs.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::energy::{self, SocDistribution};
use crate::error::{Error, Result};
use crate::params::{EnergyParams, ServingPolicy};
use crate::queueing::QueueContext;
use crate::seed;
use crate::stats::{self, Interval};

/// Waiting EVs beyond which the queue is declared unstable.
const QUEUE_LIMIT: usize = 20_000;
/// Fraction of all EV arrivals still waiting at the horizon that signals
/// unbounded growth.
const BACKLOG_FRACTION: f64 = 0.05;

/// How UAVs share the `m` positions of a charger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortMode {
    /// A freed charger takes up to `m` waiting UAVs at once; late arrivals
    /// wait for the whole batch to finish.
    Batch,
    /// A UAV may start on a free position of a charger already charging
    /// UAVs, provided no EV is ahead of it.
    Join,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesConfig {
    pub n_uavs: u32,
    pub c_slots: u32,
    pub m_per_slot: u32,
    /// EV arrivals per minute.
    pub mu_e: f64,
    pub t_ser: f64,
    pub t_ch: f64,
    /// One-way travel time; part of the UAV cycle, not of its wait.
    pub t_tra: f64,
    pub policy: ServingPolicy,
    pub ports: PortMode,
    /// Simulated time (min).
    pub horizon: f64,
    pub warmup_fraction: f64,
    pub batches: usize,
}

impl DesConfig {
    pub fn from_context(ctx: &QueueContext, policy: ServingPolicy) -> Self {
        let mut cfg = Self {
            n_uavs: ctx.n,
            c_slots: ctx.c_slots,
            m_per_slot: ctx.m_per_slot,
            mu_e: ctx.mu_e,
            t_ser: ctx.t_ser,
            t_ch: ctx.t_ch,
            t_tra: 0.0,
            policy,
            ports: PortMode::Batch,
            horizon: 0.0,
            warmup_fraction: 0.2,
            batches: 20,
        };
        cfg.horizon = cfg.default_horizon();
        cfg
    }

    /// Long enough for 200 saturated UAV cycles and 20 000 EV arrivals.
    pub fn default_horizon(&self) -> f64 {
        let cycle = self.t_ser + self.t_ch + 2.0 * self.t_tra;
        let saturated = self.n_uavs as f64 * self.t_ch / (self.c_slots * self.m_per_slot) as f64;
        let ev = if self.mu_e > 0.0 { 20_000.0 / self.mu_e } else { 0.0 };
        (200.0 * cycle.max(saturated)).max(ev).max(1e4)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.c_slots >= 1
            && self.m_per_slot >= 1
            && self.mu_e >= 0.0
            && self.t_ser >= 0.0
            && self.t_ch > 0.0
            && self.t_tra >= 0.0
            && self.horizon > 0.0
            && (0.0..1.0).contains(&self.warmup_fraction)
            && self.batches >= 20;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam { field: "des".into(), reason: format!("invalid DES configuration {self:?}") })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesReport {
    pub uav_wait: Interval,
    pub ev_wait: Interval,
    pub uav_samples: usize,
    pub ev_samples: usize,
    /// Time-averaged number of waiting EVs after warm-up.
    pub ev_queue_mean: f64,
    /// EV arrival rate × mean EV wait, the Little's-law counterpart.
    pub ev_little: f64,
    pub uav_queue_mean: f64,
    pub uav_little: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    EvArrival,
    UavArrival(u32),
    SlotDone(usize),
    UavDone(usize, u32),
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Free,
    Ev,
    Uavs(Vec<u32>),
    /// Number of UAVs charging on individual positions.
    Ports(u32),
}

struct Station<'a, R: Rng> {
    cfg: &'a DesConfig,
    rng: R,
    soc: SocDistribution,
    energy: &'a EnergyParams,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    slots: Vec<Slot>,
    ev_queue: VecDeque<f64>,
    uav_queue: VecDeque<(u32, f64)>,
    warm: f64,
    last: f64,
    ev_area: f64,
    uav_area: f64,
    ev_waits: Vec<(f64, f64)>,
    uav_waits: Vec<(f64, f64)>,
    ev_arrivals: usize,
    ev_arrivals_after_warm: usize,
    uav_arrivals_after_warm: usize,
}

impl<R: Rng> Station<'_, R> {
    fn push(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.heap.push(Scheduled { time, seq: self.seq, event });
    }

    fn advance(&mut self, t: f64) {
        let from = self.last.max(self.warm);
        if t > from {
            self.ev_area += (t - from) * self.ev_queue.len() as f64;
            self.uav_area += (t - from) * self.uav_queue.len() as f64;
        }
        self.last = t;
    }

    fn record(list: &mut Vec<(f64, f64)>, warm: f64, arrival: f64, start: f64) {
        if arrival >= warm {
            list.push((arrival, start - arrival));
        }
    }

    fn ev_next(&self) -> bool {
        match (self.ev_queue.front(), self.uav_queue.front()) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(&e), Some(&(_, u))) => match self.cfg.policy {
                ServingPolicy::EvFirst => true,
                ServingPolicy::Fifs => e <= u,
            },
        }
    }

    fn start_ev(&mut self, k: usize, t: f64) {
        let arrival = self.ev_queue.pop_front().expect("checked non-empty");
        Self::record(&mut self.ev_waits, self.warm, arrival, t);
        let soc = self.soc.sample(&mut self.rng);
        let service = energy::ev_charge_time(soc, self.energy);
        self.slots[k] = Slot::Ev;
        self.push(t + service, Event::SlotDone(k));
    }

    fn dispatch(&mut self, t: f64) {
        let m = self.cfg.m_per_slot;
        loop {
            if self.ev_queue.is_empty() && self.uav_queue.is_empty() {
                return;
            }
            if self.ev_next() {
                // Customers behind the head EV wait for it.
                let Some(k) = self.slots.iter().position(|s| *s == Slot::Free) else { return };
                self.start_ev(k, t);
                continue;
            }
            match self.cfg.ports {
                PortMode::Batch => {
                    let Some(k) = self.slots.iter().position(|s| *s == Slot::Free) else { return };
                    let mut batch = Vec::with_capacity(m as usize);
                    while batch.len() < m as usize {
                        let Some((id, arrival)) = self.uav_queue.pop_front() else { break };
                        Self::record(&mut self.uav_waits, self.warm, arrival, t);
                        batch.push(id);
                    }
                    self.slots[k] = Slot::Uavs(batch);
                    self.push(t + self.cfg.t_ch, Event::SlotDone(k));
                }
                PortMode::Join => {
                    let partial = self.slots.iter().position(|s| matches!(s, Slot::Ports(n) if *n < m));
                    let Some(k) = partial.or_else(|| self.slots.iter().position(|s| *s == Slot::Free)) else {
                        return;
                    };
                    let (id, arrival) = self.uav_queue.pop_front().expect("head UAV exists");
                    Self::record(&mut self.uav_waits, self.warm, arrival, t);
                    self.slots[k] = match self.slots[k] {
                        Slot::Ports(n) => Slot::Ports(n + 1),
                        _ => Slot::Ports(1),
                    };
                    self.push(t + self.cfg.t_ch, Event::UavDone(k, id));
                }
            }
        }
    }

    fn run(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let ev_gap = (cfg.mu_e > 0.0).then(|| Exp::new(cfg.mu_e).expect("positive rate"));
        if let Some(d) = &ev_gap {
            let first = d.sample(&mut self.rng);
            self.push(first, Event::EvArrival);
        }
        let cycle = cfg.t_ser + cfg.t_ch + 2.0 * cfg.t_tra;
        for id in 0..cfg.n_uavs {
            let phase = self.rng.random::<f64>() * cycle;
            self.push(phase, Event::UavArrival(id));
        }
        while let Some(Scheduled { time: t, event, .. }) = self.heap.pop() {
            if t > cfg.horizon {
                break;
            }
            self.advance(t);
            match event {
                Event::EvArrival => {
                    self.ev_queue.push_back(t);
                    self.ev_arrivals += 1;
                    if t >= self.warm {
                        self.ev_arrivals_after_warm += 1;
                    }
                    if self.ev_queue.len() > QUEUE_LIMIT {
                        return Err(self.unstable());
                    }
                    let gap = ev_gap.as_ref().expect("EV arrivals imply a rate").sample(&mut self.rng);
                    self.push(t + gap, Event::EvArrival);
                }
                Event::UavArrival(id) => {
                    self.uav_queue.push_back((id, t));
                    if t >= self.warm {
                        self.uav_arrivals_after_warm += 1;
                    }
                }
                Event::UavDone(k, id) => {
                    self.slots[k] = match self.slots[k] {
                        Slot::Ports(n) if n > 1 => Slot::Ports(n - 1),
                        _ => Slot::Free,
                    };
                    self.push(t + 2.0 * cfg.t_tra + cfg.t_ser, Event::UavArrival(id));
                }
                Event::SlotDone(k) => {
                    if let Slot::Uavs(batch) = std::mem::replace(&mut self.slots[k], Slot::Free) {
                        for id in batch {
                            self.push(t + 2.0 * cfg.t_tra + cfg.t_ser, Event::UavArrival(id));
                        }
                    }
                }
            }
            self.dispatch(t);
        }
        self.advance(cfg.horizon);
        if self.ev_arrivals > 0 && self.ev_queue.len() as f64 > BACKLOG_FRACTION * self.ev_arrivals as f64 {
            return Err(self.unstable());
        }
        Ok(())
    }

    fn unstable(&self) -> Error {
        Error::Unstable { load: self.cfg.mu_e * self.mean_service(), capacity: self.cfg.c_slots as f64 }
    }

    fn mean_service(&self) -> f64 {
        energy::charge_time_moments(self.energy).map(|m| m.mean).unwrap_or(f64::NAN)
    }
}

/// Runs one station for `cfg.horizon` minutes. Waits are collected for
/// customers arriving after the warm-up and summarized by batch means.
pub fn simulate_queue(cfg: &DesConfig, energy: &EnergyParams, seed: u64) -> Result<DesReport> {
    cfg.validate()?;
    let soc = SocDistribution::from_params(energy)?;
    let warm = cfg.warmup_fraction * cfg.horizon;
    let mut st = Station {
        cfg,
        rng: seed::rng(seed),
        soc,
        energy,
        heap: BinaryHeap::new(),
        seq: 0,
        slots: vec![Slot::Free; cfg.c_slots as usize],
        ev_queue: VecDeque::new(),
        uav_queue: VecDeque::new(),
        warm,
        last: 0.0,
        ev_area: 0.0,
        uav_area: 0.0,
        ev_waits: Vec::new(),
        uav_waits: Vec::new(),
        ev_arrivals: 0,
        ev_arrivals_after_warm: 0,
        uav_arrivals_after_warm: 0,
    };
    st.run()?;
    let span = cfg.horizon - warm;
    let summarize = |mut list: Vec<(f64, f64)>| -> Interval {
        if list.is_empty() {
            return Interval { mean: 0.0, half_width: 0.0 };
        }
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        let waits: Vec<f64> = list.into_iter().map(|(_, w)| w).collect();
        stats::batch_means(&waits, cfg.batches)
    };
    let ev_samples = st.ev_waits.len();
    let uav_samples = st.uav_waits.len();
    let ev_wait = summarize(std::mem::take(&mut st.ev_waits));
    let uav_wait = summarize(std::mem::take(&mut st.uav_waits));
    Ok(DesReport {
        ev_queue_mean: st.ev_area / span,
        ev_little: st.ev_arrivals_after_warm as f64 / span * ev_wait.mean,
        uav_queue_mean: st.uav_area / span,
        uav_little: st.uav_arrivals_after_warm as f64 / span * uav_wait.mean,
        uav_wait,
        ev_wait,
        uav_samples,
        ev_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamSet, StationKind};
    use crate::queueing::{self, NoDroneForm, QueueModel};

    fn ctx(kind: StationKind, n: u32) -> QueueContext {
        QueueContext::from_params(&ParamSet::default(), kind, n).unwrap()
    }

    #[test]
    fn idle_station_has_no_wait() {
        let mut c = ctx(StationKind::Ev, 3);
        c.mu_e = 0.0;
        let r = simulate_queue(&DesConfig::from_context(&c, ServingPolicy::Fifs), &ParamSet::default().energy, 1).unwrap();
        assert_eq!(r.uav_wait.mean, 0.0);
        assert_eq!(r.ev_samples, 0);
    }

    #[test]
    fn dedicated_station_matches_cyclic_formula() {
        let p = ParamSet::default();
        for n in [14, 20] {
            let c = ctx(StationKind::Uav, n);
            let r = simulate_queue(&DesConfig::from_context(&c, ServingPolicy::Fifs), &p.energy, 2).unwrap();
            let a = queueing::uav_wait_dedicated(&c);
            assert!((r.uav_wait.mean - a).abs() <= 0.1 * a.max(1.0), "n={n}: {} vs {a}", r.uav_wait.mean);
        }
    }

    #[test]
    fn same_seed_same_report() {
        let c = ctx(StationKind::Ev, 8);
        let cfg = DesConfig::from_context(&c, ServingPolicy::EvFirst);
        let e = ParamSet::default().energy;
        assert_eq!(simulate_queue(&cfg, &e, 9).unwrap(), simulate_queue(&cfg, &e, 9).unwrap());
    }

    #[test]
    fn littles_law_holds() {
        let c = ctx(StationKind::Ev, 6);
        let r = simulate_queue(&DesConfig::from_context(&c, ServingPolicy::Fifs), &ParamSet::default().energy, 4).unwrap();
        assert!((r.ev_queue_mean - r.ev_little).abs() <= 0.05 * r.ev_little.max(0.05), "{} vs {}", r.ev_queue_mean, r.ev_little);
        assert!((r.uav_queue_mean - r.uav_little).abs() <= 0.05 * r.uav_little.max(0.05));
    }

    #[test]
    fn port_modes_agree_with_one_uav_per_slot() {
        let mut c = ctx(StationKind::Ev, 6);
        c.m_per_slot = 1;
        let e = ParamSet::default().energy;
        let batch = DesConfig::from_context(&c, ServingPolicy::Fifs);
        let join = DesConfig { ports: PortMode::Join, ..batch.clone() };
        assert_eq!(simulate_queue(&batch, &e, 6).unwrap(), simulate_queue(&join, &e, 6).unwrap());
    }

    #[test]
    fn ev_first_orders_ev_waits() {
        let c = ctx(StationKind::Ev, 30);
        let e = ParamSet::default().energy;
        let fifs = simulate_queue(&DesConfig::from_context(&c, ServingPolicy::Fifs), &e, 5).unwrap();
        let evf = simulate_queue(&DesConfig::from_context(&c, ServingPolicy::EvFirst), &e, 5).unwrap();
        assert!(evf.ev_wait.hi() < fifs.ev_wait.lo());
    }

    #[test]
    fn pk_form_matches_pure_ev_queue() {
        let mut c = ctx(StationKind::Ev, 0);
        c.mu_e = 0.06;
        let model = QueueModel { no_drone: NoDroneForm::PollaczekKhinchine, ..QueueModel::default() };
        let a = queueing::ev_wait_no_drone(&c, model.no_drone).unwrap();
        let r = simulate_queue(&DesConfig::from_context(&c, ServingPolicy::EvFirst), &ParamSet::default().energy, 6).unwrap();
        // Erlang-C × (1 + CV²)/2 is itself an approximation for c > 1.
        assert!((r.ev_wait.mean - a).abs() <= 0.15 * a, "{} vs {a}", r.ev_wait.mean);
    }

    #[test]
    fn overload_is_reported() {
        let mut c = ctx(StationKind::Ev, 4);
        c.mu_e = 0.2;
        let mut cfg = DesConfig::from_context(&c, ServingPolicy::Fifs);
        cfg.horizon = 2e5;
        let err = simulate_queue(&cfg, &ParamSet::default().energy, 7).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }
}
