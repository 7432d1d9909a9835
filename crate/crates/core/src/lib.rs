//! Dual-arm whole-body motion planning over two composed dynamic roadmaps.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod demo;
pub mod dual;
pub mod error;
pub mod format;
pub mod kinematics;
pub mod planner;
pub mod roadmap;
pub mod scenario;
pub mod search;
pub mod voxel;

pub use config::{ChainConfig, ChainId, FullConfig, MetricWeights};
pub use error::{Error, Result};
pub use kinematics::{Body, CollisionCondition, RobotModel};
pub use voxel::{OccupancySet, VoxelGrid, VoxelId};
