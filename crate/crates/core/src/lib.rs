//! Q-learning control of sensor sampling intervals.
//!
//! The crate is split along the pipeline: [`rl`] holds the agent, [`synth`]
//! and [`trace`] produce signals, [`sim`] replays a signal in closed loop,
//! [`metrics`] scores the resulting decision logs and [`sweep`] runs
//! parameter grids over scenario suites.

pub mod error;
pub mod metrics;
pub mod report;
pub mod rl;
pub mod scenario;
pub mod signal;
pub mod sim;
pub mod sweep;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use rl::{
    apply_action, compute_reward, q_update, select_action, valid_actions, Action, AgentState,
    LearningParams, QTable, QualityThreshold, SamplingInterval,
};
pub use signal::{SignalSource, GRID_STEP, SECONDS_PER_DAY};
pub use sim::{run_fixed_interval, run_simulation, DecisionLogEntry, RunResult, SimConfig};
