//! TOML scenario documents.
//!
//! Units: seconds, radians, kilograms, meters, kg·m², N·m. Every section
//! rejects unknown keys.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{ControllerGains, InputProjection};
use crate::error::{Error, Result};
use crate::estimator::ObserverGains;
use crate::experiment::{AgentConfig, ExperimentConfig, Mode, SafetyCaps, SettlingRule};
use crate::graph::{DirectedGraph, Edge};
use crate::leader::{LeaderSystem, DEFAULT_EIGEN_TOL};
use crate::manipulator::{Friction, ManipulatorParams, ManipulatorState, STANDARD_GRAVITY};
use crate::rbf::RbfLattice;

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled five-arm scenario.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: u32,
    pub simulation: SimulationSection,
    pub leader: LeaderSection,
    pub topology: TopologySection,
    pub observer: ObserverSection,
    pub controller: ControllerSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub safety: SafetySection,
    #[serde(default)]
    pub metrics: MetricsSection,
    pub agents: Vec<AgentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
    /// `[t_a, t_b]`, s
    pub average_window: [f64; 2],
    #[serde(default = "default_stride")]
    pub log_stride: usize,
    #[serde(default = "default_stride")]
    pub average_stride: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    /// Row-major system matrix.
    pub matrix: Vec<Vec<f64>>,
    /// `[positions (rad); velocities (rad/s)]`
    pub initial_state: Vec<f64>,
    #[serde(default = "default_eigen_tol")]
    pub eigen_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub beta1: f64,
    pub beta2: f64,
}

/// Either a scalar (times identity) or a full 2x2 row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

impl GainSpec {
    fn to_matrix(&self) -> Matrix2<f64> {
        match self {
            GainSpec::Scalar(k) => Matrix2::identity() * *k,
            GainSpec::Matrix(m) => Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
        }
    }

    fn from_matrix(m: &Matrix2<f64>) -> Self {
        if m[(0, 1)] == 0.0 && m[(1, 0)] == 0.0 && m[(0, 0)] == m[(1, 1)] {
            GainSpec::Scalar(m[(0, 0)])
        } else {
            GainSpec::Matrix([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    /// 1/s
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub gain: GainSpec,
    pub adaptation_rate: f64,
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Indices into `[q1, q2, q1', q2', xr1', xr2', xr1'', xr2'']`.
    #[serde(default = "default_inputs")]
    pub input_indices: Vec<usize>,
    pub nodes_per_dim: usize,
    /// One `[lo, hi]` per input dimension.
    pub ranges: Vec<[f64; 2]>,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySection {
    /// N·m, aborts the run.
    pub torque_cap: f64,
    /// rad/s
    pub filtered_error_cap: f64,
    pub weight_norm_cap: f64,
}

impl Default for SafetySection {
    fn default() -> Self {
        let caps = SafetyCaps::default();
        Self {
            torque_cap: caps.torque,
            filtered_error_cap: caps.filtered_error,
            weight_norm_cap: caps.weight_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    /// rad
    pub settle_threshold: f64,
    /// s
    pub settle_hold: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let rule = SettlingRule::default();
        Self {
            settle_threshold: rule.threshold,
            settle_hold: rule.hold,
        }
    }
}

/// Optional per-agent gain overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptation_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<f64>,
}

impl GainOverrides {
    fn is_empty(&self) -> bool {
        *self == GainOverrides::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    /// kg
    pub m1: f64,
    /// kg
    pub m2: f64,
    /// m
    pub l1: f64,
    /// m
    pub l2: f64,
    /// m, defaults to `l1 / 2`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lc1: Option<f64>,
    /// m, defaults to `l2 / 2`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lc2: Option<f64>,
    /// kg·m²
    pub i1: f64,
    /// kg·m²
    pub i2: f64,
    /// m/s², defaults to 9.81
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<Friction>,
    /// rad
    pub q0: [f64; 2],
    /// rad/s
    #[serde(default)]
    pub qdot0: [f64; 2],
    #[serde(default, skip_serializing_if = "GainOverrides::is_empty")]
    pub overrides: GainOverrides,
}

fn default_stride() -> usize {
    10
}
fn default_threads() -> usize {
    1
}
fn default_eigen_tol() -> f64 {
    DEFAULT_EIGEN_TOL
}
fn one() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    5.0
}
fn default_inputs() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    /// Builds and validates the experiment.
    pub fn to_experiment(&self) -> Result<ExperimentConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let followers = self.agents.len();
        if followers == 0 {
            return Err(Error::validation(
                "agents",
                "at least one agent is required",
            ));
        }
        let edges: Vec<Edge> = self
            .topology
            .edges
            .iter()
            .map(|e| Edge::new(e.from, e.to, e.weight))
            .collect();
        let graph = DirectedGraph::new(followers + 1, &edges)
            .map_err(|e| Error::validation("topology", e.to_string()))?;

        let rows = self.leader.matrix.len();
        if self.leader.matrix.iter().any(|r| r.len() != rows) {
            return Err(Error::validation(
                "leader matrix",
                "matrix must be square (every row the same length as the row count)",
            ));
        }
        let flat: Vec<f64> = self.leader.matrix.iter().flatten().copied().collect();
        let leader = LeaderSystem {
            matrix: DMatrix::from_row_slice(rows, rows, &flat),
            initial_state: DVector::from_vec(self.leader.initial_state.clone()),
        };

        let projection = InputProjection::new(self.network.input_indices.clone())?;
        let lattice = RbfLattice::new(
            projection.dim(),
            self.network.nodes_per_dim,
            &self.network.ranges,
            self.network.width,
        )
        .map_err(|e| Error::validation("network", e.to_string()))?;

        let c = &self.controller;
        let agents = self
            .agents
            .iter()
            .map(|a| {
                let o = &a.overrides;
                let params = ManipulatorParams {
                    m1: a.m1,
                    m2: a.m2,
                    l1: a.l1,
                    l2: a.l2,
                    lc1: a.lc1.unwrap_or(a.l1 / 2.0),
                    lc2: a.lc2.unwrap_or(a.l2 / 2.0),
                    i1: a.i1,
                    i2: a.i2,
                    gravity: a.gravity.unwrap_or(STANDARD_GRAVITY),
                    friction: a.friction.unwrap_or_default(),
                };
                AgentConfig {
                    params,
                    initial: ManipulatorState::new(a.q0, a.qdot0),
                    observer: ObserverGains {
                        beta1: o.beta1.unwrap_or(self.observer.beta1),
                        beta2: o.beta2.unwrap_or(self.observer.beta2),
                    },
                    controller: ControllerGains {
                        lambda: o.lambda.unwrap_or(c.lambda),
                        k: o.gain.as_ref().unwrap_or(&c.gain).to_matrix(),
                        gamma: o.adaptation_rate.unwrap_or(c.adaptation_rate),
                        sigma: o.leakage.unwrap_or(c.leakage),
                    },
                }
            })
            .collect();

        let cfg = ExperimentConfig {
            graph,
            leader,
            eigen_tolerance: self.leader.eigen_tolerance,
            agents,
            lattice,
            projection,
            dt: self.simulation.dt,
            duration: self.simulation.duration,
            average_window: (
                self.simulation.average_window[0],
                self.simulation.average_window[1],
            ),
            log_stride: self.simulation.log_stride,
            average_stride: self.simulation.average_stride,
            threads: self.simulation.threads,
            safety: SafetyCaps {
                torque: self.safety.torque_cap,
                filtered_error: self.safety.filtered_error_cap,
                weight_norm: self.safety.weight_norm_cap,
            },
            settling: SettlingRule {
                threshold: self.metrics.settle_threshold,
                hold: self.metrics.settle_hold,
            },
            mode: Mode::Learn,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializable form of a validated experiment. Every derived default is
    /// written out explicitly; per-agent gains that differ from the first
    /// agent's become overrides.
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        let base = cfg.agents.first();
        let base_obs = base.map(|a| a.observer).unwrap_or_default();
        let base_ctl = base.map(|a| a.controller).unwrap_or_default();
        let m = &cfg.leader.matrix;
        let lattice = cfg.lattice.descriptor();
        Self {
            schema_version: SCHEMA_VERSION,
            simulation: SimulationSection {
                dt: cfg.dt,
                duration: cfg.duration,
                average_window: [cfg.average_window.0, cfg.average_window.1],
                log_stride: cfg.log_stride,
                average_stride: cfg.average_stride,
                threads: cfg.threads,
            },
            leader: LeaderSection {
                matrix: (0..m.nrows())
                    .map(|i| m.row(i).iter().copied().collect())
                    .collect(),
                initial_state: cfg.leader.initial_state.iter().copied().collect(),
                eigen_tolerance: cfg.eigen_tolerance,
            },
            topology: TopologySection {
                edges: cfg
                    .graph
                    .edges()
                    .iter()
                    .map(|e| EdgeEntry {
                        from: e.parent,
                        to: e.child,
                        weight: e.weight,
                    })
                    .collect(),
            },
            observer: ObserverSection {
                beta1: base_obs.beta1,
                beta2: base_obs.beta2,
            },
            controller: ControllerSection {
                lambda: base_ctl.lambda,
                gain: GainSpec::from_matrix(&base_ctl.k),
                adaptation_rate: base_ctl.gamma,
                leakage: base_ctl.sigma,
            },
            network: NetworkSection {
                input_indices: cfg.projection.indices().to_vec(),
                nodes_per_dim: lattice.nodes_per_dim,
                ranges: lattice.ranges.clone(),
                width: lattice.width,
            },
            safety: SafetySection {
                torque_cap: cfg.safety.torque,
                filtered_error_cap: cfg.safety.filtered_error,
                weight_norm_cap: cfg.safety.weight_norm,
            },
            metrics: MetricsSection {
                settle_threshold: cfg.settling.threshold,
                settle_hold: cfg.settling.hold,
            },
            agents: cfg
                .agents
                .iter()
                .map(|a| {
                    let p = &a.params;
                    let differs = |x: f64, y: f64| (x != y).then_some(x);
                    AgentSection {
                        m1: p.m1,
                        m2: p.m2,
                        l1: p.l1,
                        l2: p.l2,
                        lc1: Some(p.lc1),
                        lc2: Some(p.lc2),
                        i1: p.i1,
                        i2: p.i2,
                        gravity: Some(p.gravity),
                        friction: (!p.friction.is_zero()).then_some(p.friction),
                        q0: [a.initial.q[0], a.initial.q[1]],
                        qdot0: [a.initial.qdot[0], a.initial.qdot[1]],
                        overrides: GainOverrides {
                            beta1: differs(a.observer.beta1, base_obs.beta1),
                            beta2: differs(a.observer.beta2, base_obs.beta2),
                            lambda: differs(a.controller.lambda, base_ctl.lambda),
                            gain: (a.controller.k != base_ctl.k)
                                .then(|| GainSpec::from_matrix(&a.controller.k)),
                            adaptation_rate: differs(a.controller.gamma, base_ctl.gamma),
                            leakage: differs(a.controller.sigma, base_ctl.sigma),
                        },
                    }
                })
                .collect(),
        }
    }
}

/// Parses a TOML document and validates every assumption and field.
pub fn parse_and_validate(text: &str) -> Result<ExperimentConfig> {
    ConfigDocument::parse(text)?.to_experiment()
}

/// Bundled scenario, parsed.
pub fn default_experiment() -> ExperimentConfig {
    parse_and_validate(DEFAULT_SCENARIO).expect("bundled scenario is valid")
}

/// Hex SHA-256 of the canonical serialization of a validated experiment.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = ConfigDocument::from_experiment(cfg).to_toml();
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manipulator::bundled_robots;

    #[test]
    fn bundled_scenario_matches_the_published_setup() {
        let cfg = default_experiment();
        assert_eq!(cfg.agents.len(), 5);
        for (a, p) in cfg.agents.iter().zip(bundled_robots()) {
            assert_eq!(a.params, p);
            assert_eq!(
                a.observer,
                ObserverGains {
                    beta1: 1.0,
                    beta2: 1.0
                }
            );
            assert_eq!(a.controller.k, Matrix2::identity() * 10.0);
            assert_eq!(a.controller.gamma, 10.0);
            assert_eq!(a.controller.sigma, 0.001);
            assert_eq!(a.controller.lambda, 5.0);
            assert_eq!(a.initial.qdot, nalgebra::Vector2::zeros());
        }
        let q0: Vec<[f64; 2]> = cfg
            .agents
            .iter()
            .map(|a| [a.initial.q[0], a.initial.q[1]])
            .collect();
        assert_eq!(
            q0,
            vec![[0.2, 0.1], [0.3, 0.5], [0.4, 0.1], [0.2, 0.5], [0.4, 0.1]]
        );
        assert_eq!(cfg.lattice.node_count(), 256);
        assert_eq!(cfg.lattice.width(), 0.8);
        assert_eq!(cfg.lattice.descriptor().ranges, vec![[-1.2, 1.2]; 4]);
        assert_eq!(cfg.leader, LeaderSystem::default_oscillator());
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.duration, 30.0);
        assert_eq!(cfg.average_window, (20.0, 30.0));
        assert!(cfg.graph.has_spanning_tree_from_leader());
        // Agent 1 listens to the leader only.
        assert_eq!(cfg.graph.in_neighbors(1), vec![(0, 1.0)]);
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = default_experiment();
        let text = ConfigDocument::from_experiment(&cfg).to_toml();
        let again = parse_and_validate(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn round_trip_keeps_overrides() {
        let mut doc = ConfigDocument::parse(DEFAULT_SCENARIO).unwrap();
        doc.agents[2].overrides.lambda = Some(3.0);
        doc.agents[3].overrides.gain = Some(GainSpec::Matrix([[12.0, 1.0], [1.0, 9.0]]));
        doc.agents[4].friction = Some(Friction {
            constant: [0.0, 0.1],
            viscous: [0.2, 0.2],
        });
        let cfg = doc.to_experiment().unwrap();
        let again = parse_and_validate(&ConfigDocument::from_experiment(&cfg).to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.agents[2].controller.lambda, 3.0);
    }

    fn expect_rule(text: &str, needle: &str) {
        match parse_and_validate(text) {
            Err(Error::Validation { rule, detail }) => {
                assert!(
                    rule.contains(needle) || detail.contains(needle),
                    "{rule}: {detail}"
                );
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_edge_into_agent_three_violates_assumption_two() {
        let mut doc = ConfigDocument::parse(DEFAULT_SCENARIO).unwrap();
        doc.topology.edges.retain(|e| e.to != 3);
        expect_rule(&doc.to_toml(), "Assumption 2");
    }

    #[test]
    fn negative_gain_is_rejected() {
        let mut doc = ConfigDocument::parse(DEFAULT_SCENARIO).unwrap();
        doc.controller.gain = GainSpec::Scalar(-1.0);
        expect_rule(&doc.to_toml(), "gain positivity");
    }

    #[test]
    fn unstable_leader_violates_assumption_one() {
        let mut doc = ConfigDocument::parse(DEFAULT_SCENARIO).unwrap();
        doc.leader.matrix[0][0] = 0.5;
        expect_rule(&doc.to_toml(), "Assumption 1");
    }

    #[test]
    fn unknown_keys_and_bad_versions() {
        let text = DEFAULT_SCENARIO.replace("[simulation]", "[simulation]\nbogus = 1");
        assert!(matches!(
            parse_and_validate(&text),
            Err(Error::Parse { .. })
        ));
        let text = DEFAULT_SCENARIO.replace("schema_version = 1", "schema_version = 2");
        expect_rule(&text, "schema_version");
    }

    #[test]
    fn parse_errors_carry_a_line() {
        let text = "schema_version = 1\n[simulation]\ndt = \"fast\"\n";
        match ConfigDocument::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lc_defaults_to_half_length() {
        let doc = ConfigDocument::parse(DEFAULT_SCENARIO).unwrap();
        assert!(doc
            .agents
            .iter()
            .all(|a| a.lc1.is_none() && a.lc2.is_none()));
        let cfg = doc.to_experiment().unwrap();
        for a in &cfg.agents {
            assert_eq!(a.params.lc1, a.params.l1 / 2.0);
            assert_eq!(a.params.lc2, a.params.l2 / 2.0);
        }
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&default_experiment());
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&default_experiment()));
    }
}
