//! Distributed adaptive learning control for networks of two-link robot arms.
//!
//! A virtual leader generates a periodic reference. Each follower runs two
//! layers:
//!
//! * a distributed observer ([`estimator`]) that reconstructs the leader's
//!   state and system matrix from its in-neighbors over the communication
//!   digraph ([`graph`]);
//! * a local controller ([`controller`]) that tracks the observer estimate
//!   while an RBF network ([`rbf`]) learns the arm's unknown dynamics.
//!
//! [`engine`] integrates the whole network with one fixed-step RK4 scheme and
//! supports replaying previously learned weights with adaptation switched off.

pub mod cli;
pub mod config;
pub mod controller;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod graph;
pub mod integrate;
pub mod io;
pub mod leader;
pub mod log;
pub mod manipulator;
pub mod metrics;
pub mod rbf;
pub mod verify;

pub use config::{default_experiment, parse_and_validate, ConfigDocument};
pub use engine::{run_experiment, ExperimentOutput, Simulator, WorldState};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Mode};
pub use graph::{DirectedGraph, Edge};
pub use metrics::{compute_metrics, MetricSettings, Summary};

impl ExperimentConfig {
    /// Metric settings implied by this experiment.
    pub fn metric_settings(&self) -> MetricSettings {
        MetricSettings {
            settling: self.settling,
            window: self.average_window,
            caps: self.safety,
        }
    }
}
