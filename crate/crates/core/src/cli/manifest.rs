use serde::{Deserialize, Serialize};

use crate::availability::BetaKind;
use crate::params::ParamSet;
use crate::pointprocess::Window;
use crate::simulator::{ExperimentOptions, SimConfig};

/// Package version plus `git describe` of the build tree when available.
pub const VERSION: &str = env!("CHARGESHARE_VERSION");

/// Everything needed to regenerate one output directory entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub realizations: usize,
    pub des_horizon: Option<f64>,
    pub window: Window,
    pub options: ExperimentOptions,
    pub params: ParamSet,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// Command line that reproduces the outputs from this directory.
    pub command: String,
}

impl RunManifest {
    pub fn new(experiment: &str, cfg: &SimConfig, opts: &ExperimentOptions, outputs: Vec<String>) -> Self {
        let mut command = format!(
            "chargeshare {experiment} --config {experiment}.config.toml --seed {} --realizations {} --draws {} --path {}",
            cfg.seed,
            cfg.realizations,
            opts.draws,
            opts.path.label()
        );
        if experiment == "fig-beta" {
            command.push_str(match opts.policy {
                BetaKind::Biased => " --policy biased",
                BetaKind::Thinning => " --policy thinning",
            });
        }
        Self {
            experiment: experiment.to_string(),
            version: VERSION.to_string(),
            seed: cfg.seed,
            realizations: cfg.realizations,
            des_horizon: cfg.des_horizon,
            window: cfg.window,
            options: *opts,
            params: cfg.params.clone(),
            outputs,
            command,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
