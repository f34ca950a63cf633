//! Joint trajectory and transmit-beamforming planning for a dual-UAV
//! air-to-ground system: a source UAV (Alice) serves a ground user (Bob)
//! while a jamming UAV (Jack) degrades an eavesdropper (Eve), and both UAVs
//! illuminate a set of ground targets during dedicated sensing slots.
//!
//! The pipeline is:
//!
//! 1. [`bcd::run_bcd`] alternates per-slot beamforming ([`beamforming`]) with
//!    trust-region trajectory updates for each UAV ([`trajectory`]) until the
//!    average secrecy rate stops improving.
//! 2. [`scs::plan_scs`] picks sensing slots greedily on the optimized
//!    trajectory and re-solves those slots with a beampattern-gain floor and
//!    a dedicated sensing covariance.
//! 3. [`baselines`] provides the fly-hover-fly and single-UAV comparisons.
//!
//! Everything is evaluated through [`metrics`], which every optimizer and
//! test treats as ground truth.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bcd;
pub mod beamforming;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod scenario;
pub mod scs;
pub mod selfcheck;
pub mod solver;
pub mod trajectory;

pub use baselines::SchemeId;
pub use bcd::{run_bcd, InitStrategy, SolutionPlan};
pub use beamforming::{BeamformingPlan, SlotBeams};
pub use error::{Error, Result};
pub use geometry::ChannelSet;
pub use metrics::{MetricsReport, SlotLabel};
pub use scenario::{default_scenario, AlgorithmParams, ScenarioConfig};
pub use trajectory::Trajectory;

/// Horizontal position in meters.
pub type Point2 = nalgebra::Vector2<f64>;

/// The two UAVs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uav {
    Alice,
    Jack,
}

impl Uav {
    pub fn name(self) -> &'static str {
        match self {
            Uav::Alice => "alice",
            Uav::Jack => "jack",
        }
    }

    pub fn other(self) -> Uav {
        match self {
            Uav::Alice => Uav::Jack,
            Uav::Jack => Uav::Alice,
        }
    }
}

/// Ground communication nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundNode {
    Bob,
    Eve,
}
