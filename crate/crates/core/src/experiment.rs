//! Validated experiment description consumed by the simulation engine.

use crate::controller::{ControllerGains, InputProjection};
use crate::error::{Error, Result};
use crate::estimator::ObserverGains;
use crate::graph::DirectedGraph;
use crate::leader::{validate_leader_matrix, LeaderSystem};
use crate::manipulator::{ManipulatorParams, ManipulatorState};
use crate::rbf::{RbfLattice, WeightMatrix};

/// Joints per arm. The shipped dynamics are two-link.
pub const JOINTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub params: ManipulatorParams,
    pub initial: ManipulatorState,
    pub observer: ObserverGains,
    pub controller: ControllerGains,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Mode {
    /// Adapt the weights online and average them over the window.
    #[default]
    Learn,
    /// Run with the given per-agent weights frozen.
    Replay(Vec<WeightMatrix>),
}

/// Divergence limits. Exceeding `torque` aborts the run; the other two are
/// reported by the metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyCaps {
    /// N·m
    pub torque: f64,
    /// rad/s
    pub filtered_error: f64,
    pub weight_norm: f64,
}

impl Default for SafetyCaps {
    fn default() -> Self {
        Self {
            torque: 500.0,
            filtered_error: 100.0,
            weight_norm: 1.0e4,
        }
    }
}

/// Settling detection for the metrics summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlingRule {
    /// rad
    pub threshold: f64,
    /// s
    pub hold: f64,
}

impl Default for SettlingRule {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            hold: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: DirectedGraph,
    pub leader: LeaderSystem,
    pub eigen_tolerance: f64,
    /// One entry per follower, agent `i` at index `i - 1`.
    pub agents: Vec<AgentConfig>,
    pub lattice: RbfLattice,
    pub projection: InputProjection,
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
    /// `[t_a, t_b]` in s.
    pub average_window: (f64, f64),
    pub log_stride: usize,
    pub average_stride: usize,
    /// Worker threads for the per-agent fan-out; results do not depend on it.
    pub threads: usize,
    pub safety: SafetyCaps,
    pub settling: SettlingRule,
    pub mode: Mode,
}

impl ExperimentConfig {
    /// Number of integration steps covering `duration`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn follower_count(&self) -> usize {
        self.agents.len()
    }

    /// Checks every cross-field rule. Failures name the violated rule.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation(
                "time step",
                format!("dt = {} must be > 0", self.dt),
            ));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::validation(
                "duration",
                format!("duration = {} must be >= 0", self.duration),
            ));
        }
        let (t_a, t_b) = self.average_window;
        if !(t_a >= 0.0 && t_b > t_a && t_b.is_finite()) {
            return Err(Error::validation(
                "averaging window",
                format!("need 0 <= t_a < t_b, got [{t_a}, {t_b}]"),
            ));
        }
        if self.log_stride == 0 || self.average_stride == 0 {
            return Err(Error::validation("stride", "strides must be >= 1"));
        }
        if self.threads == 0 {
            return Err(Error::validation("threads", "threads must be >= 1"));
        }
        if self.graph.follower_count() != self.agents.len() {
            return Err(Error::validation(
                "dimension consistency",
                format!(
                    "topology has {} followers but {} agents are configured",
                    self.graph.follower_count(),
                    self.agents.len()
                ),
            ));
        }
        let unreachable = self.graph.unreachable_followers();
        if !unreachable.is_empty() {
            return Err(Error::validation(
                "Assumption 2 (directed spanning tree rooted at the leader)",
                format!("agents {unreachable:?} are not reachable from node 0"),
            ));
        }
        validate_leader_matrix(&self.leader.matrix, self.eigen_tolerance).map_err(|e| match e {
            Error::AssumptionViolated { .. } => Error::validation(
                "Assumption 1 (leader eigenvalues on the imaginary axis)",
                e.to_string(),
            ),
            other => Error::validation("leader matrix", other.to_string()),
        })?;
        if self.leader.state_dim() != 2 * JOINTS || self.leader.initial_state.len() != 2 * JOINTS {
            return Err(Error::validation(
                "dimension consistency",
                format!(
                    "leader state must have dimension {} for {}-joint arms",
                    2 * JOINTS,
                    JOINTS
                ),
            ));
        }
        if self.lattice.dims() != self.projection.dim() {
            return Err(Error::validation(
                "dimension consistency",
                format!(
                    "network has {} input dimensions but {} inputs are selected",
                    self.lattice.dims(),
                    self.projection.dim()
                ),
            ));
        }
        for (idx, agent) in self.agents.iter().enumerate() {
            let tag = |e: Error| match e {
                Error::Validation { rule, detail } => Error::Validation {
                    rule,
                    detail: format!("agent {}: {detail}", idx + 1),
                },
                other => other,
            };
            agent.params.validate().map_err(tag)?;
            agent.observer.validate().map_err(tag)?;
            agent.controller.validate().map_err(tag)?;
            let s = &agent.initial;
            if s.q.iter().chain(s.qdot.iter()).any(|v| !v.is_finite()) {
                return Err(tag(Error::validation(
                    "initial conditions",
                    "non-finite joint state",
                )));
            }
        }
        let caps = self.safety;
        if [caps.torque, caps.filtered_error, caps.weight_norm]
            .iter()
            .any(|c| c.is_nan() || *c <= 0.0)
        {
            return Err(Error::validation("safety caps", "caps must be > 0"));
        }
        if !(self.settling.threshold > 0.0 && self.settling.hold >= 0.0) {
            return Err(Error::validation(
                "settling rule",
                "threshold must be > 0 and hold >= 0",
            ));
        }
        if let Mode::Replay(weights) = &self.mode {
            if weights.len() != self.agents.len() {
                return Err(Error::validation(
                    "replay weights",
                    format!(
                        "{} weight sets for {} agents",
                        weights.len(),
                        self.agents.len()
                    ),
                ));
            }
            for w in weights {
                if w.nodes() != self.lattice.node_count() || w.outputs() != JOINTS {
                    return Err(Error::validation(
                        "replay weights",
                        format!(
                            "weight matrix {}x{} does not match lattice {}x{}",
                            w.nodes(),
                            w.outputs(),
                            self.lattice.node_count(),
                            JOINTS
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}
