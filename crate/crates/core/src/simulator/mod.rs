//! Monte Carlo and discrete-event counterparts of the analytic model.

pub mod des;
pub mod experiments;
pub mod geometry;
pub mod sinr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamSet, StationKind};
use crate::pointprocess::{self, Window};

pub use des::{simulate_queue, DesConfig, DesReport};
pub use experiments::{run_experiment, Cell, Experiment, ExperimentOptions, Table};
pub use geometry::{simulate_availability, simulate_geometry, AvailabilitySim, GeometryReport, UavSample};
pub use sinr::{simulate_coverage, CoverageSim};

/// Half-width of the default square window (m).
pub const DEFAULT_HALF_WIDTH: f64 = 15_000.0;
pub const DEFAULT_REALIZATIONS: usize = 50;
/// Duty cycles the DES must cover after warm-up.
const MIN_DUTY_CYCLES: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ParamSet,
    pub window: Window,
    pub realizations: usize,
    /// DES horizon (min); `None` picks one per station from its load.
    pub des_horizon: Option<f64>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(params: ParamSet, seed: u64) -> Result<Self> {
        let g = &params.geometry;
        let guard = pointprocess::default_guard(g.lambda_l, g.lambda_p_ev.min(g.lambda_p_d))?;
        let cfg = Self {
            window: Window::new(DEFAULT_HALF_WIDTH, guard)?,
            params,
            realizations: DEFAULT_REALIZATIONS,
            des_horizon: None,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidParam { field: "realizations".into(), reason: "must be >= 1".into() });
        }
        if let Some(h) = self.des_horizon {
            let e = &self.params.energy;
            let cycle = e.t_ser_full() + e.t_ch(StationKind::Ev).max(e.t_ch(StationKind::Uav));
            if !(0.8 * h > MIN_DUTY_CYCLES * cycle) {
                return Err(Error::InvalidParam {
                    field: "des_horizon".into(),
                    reason: format!("{h} min covers fewer than {MIN_DUTY_CYCLES} duty cycles after warm-up"),
                });
            }
        }
        Ok(())
    }

    /// DES configuration for one station with the horizon override applied.
    pub fn des(&self, ctx: &crate::queueing::QueueContext) -> DesConfig {
        let mut d = DesConfig::from_context(ctx, self.params.station.serving_policy);
        if let Some(h) = self.des_horizon {
            d.horizon = h;
        }
        d
    }
}
