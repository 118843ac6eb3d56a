//! Built-in invariant checks run by `dalc verify`.

use nalgebra::{DMatrix, Vector2};

use crate::controller::{ControllerGains, InputProjection};
use crate::engine::Simulator;
use crate::estimator::ObserverGains;
use crate::experiment::{AgentConfig, ExperimentConfig, Mode, SafetyCaps, SettlingRule};
use crate::graph::{DirectedGraph, Edge};
use crate::leader::{closed_form_default_leader, LeaderSystem, DEFAULT_EIGEN_TOL};
use crate::manipulator::{bundled_robots, ManipulatorState};
use crate::rbf::RbfLattice;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Low-discrepancy points in `[lo, hi)` (additive recurrence on the golden ratio).
struct Weyl {
    state: f64,
    step: f64,
}

impl Weyl {
    fn new(seed: f64, step: f64) -> Self {
        Self { state: seed, step }
    }

    fn next(&mut self, lo: f64, hi: f64) -> f64 {
        self.state = (self.state + self.step).fract();
        lo + (hi - lo) * self.state
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Largest `|x^T (M' - 2C) x|` over `samples` points per bundled robot.
pub fn skew_symmetry_residual(samples: usize) -> f64 {
    let mut seq = [
        Weyl::new(0.1, 0.618_033_988_749_895),
        Weyl::new(0.2, 0.414_213_562_373_095),
        Weyl::new(0.3, 0.732_050_807_568_877),
    ];
    let mut worst: f64 = 0.0;
    for p in bundled_robots() {
        for _ in 0..samples {
            let q = Vector2::new(seq[0].next(-3.2, 3.2), seq[1].next(-3.2, 3.2));
            let qd = Vector2::new(seq[2].next(-5.0, 5.0), seq[0].next(-5.0, 5.0));
            let x = Vector2::new(seq[1].next(-10.0, 10.0), seq[2].next(-10.0, 10.0));
            let n = p.mass_matrix_rate(&q, &qd) - p.coriolis_matrix(&q, &qd) * 2.0;
            worst = worst.max(x.dot(&(n * x)).abs());
        }
    }
    worst
}

/// Observer-only network: one agent per entry of `edges`' followers with a
/// tiny lattice, zero initial arm state.
pub fn observer_experiment(graph: DirectedGraph, dt: f64, duration: f64) -> ExperimentConfig {
    let followers = graph.follower_count();
    let robot = bundled_robots()[0];
    ExperimentConfig {
        graph,
        leader: LeaderSystem::default_oscillator(),
        eigen_tolerance: DEFAULT_EIGEN_TOL,
        agents: (0..followers)
            .map(|_| AgentConfig {
                params: robot,
                initial: ManipulatorState::new([0.0, 0.8], [0.8, 0.0]),
                observer: ObserverGains::default(),
                controller: ControllerGains::default(),
            })
            .collect(),
        lattice: RbfLattice::new(4, 2, &[[-1.2, 1.2]; 4], 0.8).expect("valid lattice"),
        projection: InputProjection::measured_state(),
        dt,
        duration,
        average_window: (0.0, duration.max(dt)),
        log_stride: 100,
        average_stride: 100,
        threads: 1,
        safety: SafetyCaps {
            torque: 1e6,
            ..SafetyCaps::default()
        },
        settling: SettlingRule::default(),
        mode: Mode::Learn,
    }
}

/// Leader-only network.
pub fn leader_experiment(dt: f64, duration: f64) -> ExperimentConfig {
    observer_experiment(DirectedGraph::leader_only(), dt, duration)
}

/// Max abs error of the integrated default leader against its closed form at `t_end`.
pub fn leader_integration_error(dt: f64, t_end: f64) -> f64 {
    let cfg = leader_experiment(dt, t_end);
    let sim = Simulator::new(&cfg).expect("leader-only config is valid");
    let mut world = sim.initial_world();
    let steps = cfg.steps();
    for k in 1..=steps {
        world = sim
            .integrate_step(&world, dt)
            .expect("leader field is finite");
        world.t = k as f64 * dt;
    }
    (world.leader_state() - closed_form_default_leader(world.t)).amax()
}

/// Largest entrywise deviation of agent 1's matrix estimate from
/// `(1 - e^{-t}) A0` on a leader-fed agent with unit weight and gain.
pub fn observer_closed_form_error(dt: f64, duration: f64) -> f64 {
    let graph = DirectedGraph::new(2, &[Edge::new(0, 1, 1.0)]).expect("valid graph");
    let cfg = observer_experiment(graph, dt, duration);
    let a0 = cfg.leader.matrix.clone();
    let sim = Simulator::new(&cfg).expect("valid config");
    let mut world = sim.initial_world();
    let mut worst: f64 = 0.0;
    for k in 1..=cfg.steps() {
        world = sim.integrate_step(&world, dt).expect("finite");
        world.t = k as f64 * dt;
        let expected: DMatrix<f64> = &a0 * (1.0 - (-world.t).exp());
        worst = worst.max((world.observer(0).a_hat - expected).amax());
    }
    worst
}

pub fn run_builtin_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();

    let worst = skew_symmetry_residual(10_000);
    out.push(check(
        "skew_symmetry",
        worst <= 1e-10,
        format!("max |x^T (M' - 2C) x| = {worst:e} (limit 1e-10)"),
    ));

    let chain = DirectedGraph::chain(5).expect("valid chain");
    let p = chain.laplacian();
    let row_sum = (0..p.laplacian.nrows())
        .map(|i| p.laplacian.row(i).sum().abs())
        .fold(0.0, f64::max);
    let min_re = p.min_real_eigenvalue_h();
    out.push(check(
        "laplacian",
        row_sum == 0.0 && (min_re - 1.0).abs() < 1e-6 && chain.has_spanning_tree_from_leader(),
        format!("max |row sum| = {row_sum:e}, min Re eig(H) = {min_re}"),
    ));

    let err = observer_closed_form_error(1e-3, 15.0);
    out.push(check(
        "observer_closed_form",
        err <= 1e-6,
        format!("max |A_hat_1 - (1 - e^-t) A0| = {err:e} over 15 s (limit 1e-6)"),
    ));

    let coarse = leader_integration_error(1e-3, 10.0);
    let fine = leader_integration_error(5e-4, 10.0);
    let ratio = coarse / fine;
    out.push(check(
        "rk4_order",
        coarse < 1e-9 && (ratio - 16.0).abs() <= 2.0,
        format!("error {coarse:e} -> {fine:e}, ratio {ratio:.2} (expected 16 +/- 2)"),
    ));
    out
}
