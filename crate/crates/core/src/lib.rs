//! Optimal trading policies by direct differentiation of simulated rollouts.
//!
//! The engine unrolls a known, differentiable market environment for `T`
//! steps, feeds each state through a feed-forward action network, and
//! backpropagates the cumulative reward through the whole rollout to train
//! the network. An independent dynamic-programming solver on discretized
//! grids provides ground truth for verification, and the analysis module
//! turns policies into action curves, trading bands, trajectories and
//! correlation tables.

pub mod analysis;
pub mod autodiff;
pub mod env;
pub mod error;
pub mod oracle;
pub mod policy;
pub mod train;

pub use error::{Error, Result};

pub use analysis::{
    correlation_matrix, extract_bands, no_trade_heatmap, probe_action_curve, reward_vs_horizon,
    simulate_trajectory, steady_state_reward, BandReport, CorrelationMatrix, CurveSpec,
    HeatmapGrid, Trajectory,
};
pub use env::{AlphaModel, CostSpec, EnvSpec, MaxWeight, RiskSpec, State, StaticParam};
pub use oracle::{compare_policy, dp_solve, myopic_optimum, DpSolution, GridSpec};
pub use policy::{init_policy, ActionPolicy, Architecture, CheckpointMeta, PolicyParams};
pub use train::{rollout_cr, train, TrainConfig, TrainingCurve};
