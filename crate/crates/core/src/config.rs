//! TOML configuration file. Every section and key is optional; missing values
//! fall back to the built-in defaults.
//!
//! ```toml
//! [chassis]                 # metres
//! length = 0.24
//! width = 0.12
//! r_min = 0.3
//!
//! [chassis.workspace]       # leg-plane trapezoid, metres, z up from the hip axis
//! bottom_z = -0.19
//! bottom_half_width = 0.13
//! top_z = -0.12
//! top_half_width = 0.07
//!
//! [links]                   # five-bar, metres
//! l_prox = 0.12
//! l_dist = 0.14
//! hip_sep = 0.04
//!
//! [gait]
//! v_max = 0.6               # m/s
//! cycle_time = 1.0          # s
//! step_height = 0.05        # elliptical baseline apex, m
//!
//! [sim]                     # see SimConfig
//! [ars]                     # see ArsConfig
//! [shaper]                  # see TrainConfig
//! [demos]                   # see ManoeuvreConfig
//! [efficiency]              # see EfficiencyConfig
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ars::ArsConfig;
use crate::error::{Error, Result};
use crate::eval::EfficiencyConfig;
use crate::kinematics::LinkConfig;
use crate::planner::{ChassisGeometry, GaitDefaults};
use crate::shaper::{ManoeuvreConfig, TrainConfig};
use crate::sim::SimConfig;

/// Environment variable naming a config file to load instead of the defaults.
pub const CONFIG_ENV: &str = "QUADSHAPE_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub chassis: ChassisGeometry,
    pub links: LinkConfig,
    pub gait: GaitDefaults,
    pub sim: SimConfig,
    pub ars: ArsConfig,
    pub shaper: TrainConfig,
    pub demos: ManoeuvreConfig,
    pub efficiency: EfficiencyConfig,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Explicit path, else `$QUADSHAPE_CONFIG`, else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(Path::new(&p)),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.chassis.validate()?;
        self.links.validate()?;
        self.sim.validate()?;
        self.ars.validate()?;
        self.shaper.validate()?;
        self.demos.validate()?;
        if self.efficiency.sizes.is_empty() || self.efficiency.epochs == 0 || self.efficiency.val_stride == 0 {
            return Err(Error::Config("efficiency runs need sizes, epochs and a validation stride".into()));
        }
        if !(self.gait.v_max > 0.0 && self.gait.cycle_time > 0.0 && self.gait.step_height > 0.0) {
            return Err(Error::Config("gait defaults must be positive".into()));
        }
        Ok(())
    }
}
