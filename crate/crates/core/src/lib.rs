//! Quadruped gait synthesis with rational Bézier foot trajectories, tuned by
//! augmented random search on a deterministic surrogate, and a command shaper
//! that turns raw joystick streams into smooth, stable commands by mixing a
//! fixed filter bank under a convolutional gating network.

pub mod ars;
pub mod bezier;
pub mod config;
pub mod error;
pub mod eval;
pub mod kinematics;
pub mod library;
pub mod planner;
pub mod shaper;
pub mod sim;
pub mod teleop;

pub use bezier::{ControlPolygon, CurveParam};
pub use config::Config;
pub use error::{Error, Result};
pub use kinematics::{JointState, LinkConfig};
pub use library::GaitLibrary;
pub use planner::{
    ChassisGeometry, FootPath, FootTrajectory, GaitCommand, GaitDefaults, GaitParams, LegId, Radius,
    Workspace,
};
pub use shaper::{CommandWindow, DemoPair, FilterBank, ModelKind, Network, TrainConfig, WINDOW_LEN};
pub use sim::{CostBreakdown, SimConfig, Surrogate};
pub use teleop::{Mode, RobotPose, Session, SessionAssets, WireMessage};
