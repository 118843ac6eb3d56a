//! Monolithic fixed-step simulation of the leader, every observer, every arm
//! and every weight matrix.
//!
//! The flat state is laid out as
//!
//! ```text
//! [ chi0 | agent 1 | agent 2 | ... ]
//! agent = [ chi_hat | A_hat (column-major) | q | q' | W (column-major) ]
//! ```
//!
//! A vector-field evaluation runs in phases over one immutable snapshot:
//! leader field, observer rates for all agents, then per agent the observer
//! acceleration, controller and plant. Per-agent work may run on a thread
//! pool; every agent's slice is produced by exactly one task and all
//! cross-agent sums are taken in ascending neighbor order, so results do not
//! depend on the thread count.

use std::ops::Range;

use nalgebra::{DMatrix, DMatrixView, DVector, Vector2};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::controller::{reference_signals, target_function, tracking_errors, TrackingErrors};
use crate::error::{Error, Result};
use crate::estimator::{
    observer_matrix_derivative, observer_state_derivative, observer_state_second_derivative,
    ObserverState,
};
use crate::experiment::{ExperimentConfig, Mode, JOINTS};
use crate::graph::LEADER;
use crate::integrate::rk4_step;
use crate::log::{AgentSample, LogSample, TrajectoryLog};
use crate::manipulator::ManipulatorState;
use crate::rbf::{WeightMatrix, WindowAverage};

/// Offsets of the blocks inside the flat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub agents: usize,
    pub state_dim: usize,
    pub nodes: usize,
}

impl Layout {
    pub fn leader(&self) -> Range<usize> {
        0..self.state_dim
    }

    pub fn agent_len(&self) -> usize {
        let s = self.state_dim;
        s + s * s + 2 * JOINTS + self.nodes * JOINTS
    }

    /// Block of agent `i` (zero-based).
    pub fn agent(&self, i: usize) -> Range<usize> {
        let start = self.state_dim + i * self.agent_len();
        start..start + self.agent_len()
    }

    pub fn total(&self) -> usize {
        self.state_dim + self.agents * self.agent_len()
    }

    fn chi_hat(&self) -> Range<usize> {
        0..self.state_dim
    }

    fn a_hat(&self) -> Range<usize> {
        let s = self.state_dim;
        s..s + s * s
    }

    fn q(&self) -> Range<usize> {
        let o = self.a_hat().end;
        o..o + JOINTS
    }

    fn qdot(&self) -> Range<usize> {
        let o = self.q().end;
        o..o + JOINTS
    }

    fn weights(&self) -> Range<usize> {
        let o = self.qdot().end;
        o..o + self.nodes * JOINTS
    }
}

/// Time plus flattened state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub x: Vec<f64>,
    pub layout: Layout,
}

impl WorldState {
    pub fn leader_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x[self.layout.leader()])
    }

    fn agent_slice(&self, i: usize) -> &[f64] {
        &self.x[self.layout.agent(i)]
    }

    pub fn observer(&self, i: usize) -> ObserverState {
        read_observer(&self.layout, self.agent_slice(i))
    }

    pub fn arm(&self, i: usize) -> ManipulatorState {
        read_arm(&self.layout, self.agent_slice(i))
    }

    /// Overwrites agent `i`'s estimates.
    ///
    /// # Panics
    /// If `obs` does not match the leader dimension.
    pub fn set_observer(&mut self, i: usize, obs: &ObserverState) {
        let l = self.layout;
        let block = &mut self.x[l.agent(i)];
        block[l.chi_hat()].copy_from_slice(obs.chi_hat.as_slice());
        block[l.a_hat()].copy_from_slice(obs.a_hat.as_slice());
    }

    pub fn weights(&self, i: usize) -> WeightMatrix {
        let l = &self.layout;
        WeightMatrix(DMatrix::from_column_slice(
            l.nodes,
            JOINTS,
            &self.agent_slice(i)[l.weights()],
        ))
    }
}

fn read_observer(l: &Layout, block: &[f64]) -> ObserverState {
    ObserverState {
        chi_hat: DVector::from_column_slice(&block[l.chi_hat()]),
        a_hat: DMatrix::from_column_slice(l.state_dim, l.state_dim, &block[l.a_hat()]),
    }
}

fn read_arm(l: &Layout, block: &[f64]) -> ManipulatorState {
    let q = &block[l.q()];
    let qd = &block[l.qdot()];
    ManipulatorState {
        q: Vector2::new(q[0], q[1]),
        qdot: Vector2::new(qd[0], qd[1]),
    }
}

/// Outputs of the learned-weights run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub log: TrajectoryLog,
    /// Window-averaged weights (learn mode, when the window was reached).
    pub averaged_weights: Option<Vec<WeightMatrix>>,
    /// Weights at the end of the run.
    pub final_weights: Vec<WeightMatrix>,
    pub final_world: WorldState,
}

/// Per-agent quantities computed in one evaluation.
struct AgentEval {
    chi_rate: DVector<f64>,
    a_rate: DMatrix<f64>,
    errors: TrackingErrors,
    xr_dot: Vector2<f64>,
    xr_ddot: Vector2<f64>,
    z: Vec<f64>,
    s: DVector<f64>,
    feedforward: Vector2<f64>,
    tau: Vector2<f64>,
}

/// Stateless driver over one validated configuration.
pub struct Simulator<'a> {
    cfg: &'a ExperimentConfig,
    layout: Layout,
    neighbors: Vec<Vec<(usize, f64)>>,
    pool: Option<ThreadPool>,
    frozen: bool,
    zero_torque: bool,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout {
            agents: cfg.agents.len(),
            state_dim: cfg.leader.state_dim(),
            nodes: cfg.lattice.node_count(),
        };
        let neighbors = (1..=cfg.agents.len())
            .map(|i| cfg.graph.in_neighbors(i))
            .collect();
        let pool = if cfg.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.threads)
                    .build()
                    .map_err(|e| Error::validation("threads", e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            cfg,
            layout,
            neighbors,
            pool,
            frozen: matches!(cfg.mode, Mode::Replay(_)),
            zero_torque: false,
        })
    }

    /// Forces every actuator torque to zero. The observers never read plant
    /// state, so the first layer must be unaffected.
    pub fn with_zero_torque(mut self) -> Self {
        self.zero_torque = true;
        self
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Initial conditions: leader from the config, observers and (in learn
    /// mode) weights at zero, arms at their configured states.
    pub fn initial_world(&self) -> WorldState {
        let l = self.layout;
        let mut x = vec![0.0; l.total()];
        x[l.leader()].copy_from_slice(self.cfg.leader.initial_state.as_slice());
        for (i, agent) in self.cfg.agents.iter().enumerate() {
            let block = &mut x[l.agent(i)];
            block[l.q()].copy_from_slice(agent.initial.q.as_slice());
            block[l.qdot()].copy_from_slice(agent.initial.qdot.as_slice());
            if let Mode::Replay(weights) = &self.cfg.mode {
                block[l.weights()].copy_from_slice(weights[i].0.as_slice());
            }
        }
        WorldState {
            t: 0.0,
            x,
            layout: l,
        }
    }

    /// Maps `f` over the agents, on the pool when configured. The first error
    /// in agent order wins.
    fn fan_out<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        let n = self.layout.agents;
        let results: Vec<Result<T>> = match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(&f).collect(),
        };
        results.into_iter().collect()
    }

    fn observer_rates(
        &self,
        observers: &[ObserverState],
        chi0: &DVector<f64>,
    ) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
        let a0 = &self.cfg.leader.matrix;
        self.fan_out(|i| {
            let gains = self.cfg.agents[i].observer;
            let mut states = Vec::with_capacity(self.neighbors[i].len());
            let mut mats = Vec::with_capacity(self.neighbors[i].len());
            for &(j, w) in &self.neighbors[i] {
                if j == LEADER {
                    states.push((w, chi0));
                    mats.push((w, a0));
                } else {
                    states.push((w, &observers[j - 1].chi_hat));
                    mats.push((w, &observers[j - 1].a_hat));
                }
            }
            let own = &observers[i];
            Ok((
                observer_state_derivative(own, &states, gains.beta1)?,
                observer_matrix_derivative(&own.a_hat, &mats, gains.beta2)?,
            ))
        })
    }

    /// Everything up to and including the torque for every agent.
    fn evaluate_agents(&self, t: f64, x: &[f64]) -> Result<(DVector<f64>, Vec<AgentEval>)> {
        let l = &self.layout;
        let chi0 = DVector::from_column_slice(&x[l.leader()]);
        let chi0_rate = &self.cfg.leader.matrix * &chi0;
        let observers: Vec<ObserverState> = (0..l.agents)
            .map(|i| read_observer(l, &x[l.agent(i)]))
            .collect();
        let rates = self.observer_rates(&observers, &chi0)?;

        let evals = self.fan_out(|i| {
            let agent = &self.cfg.agents[i];
            let (chi_rate, a_rate) = &rates[i];
            let neighbor_rates: Vec<(f64, &DVector<f64>)> = self.neighbors[i]
                .iter()
                .map(|&(j, w)| {
                    if j == LEADER {
                        (w, &chi0_rate)
                    } else {
                        (w, &rates[j - 1].0)
                    }
                })
                .collect();
            let own = &observers[i];
            let chi_acc = observer_state_second_derivative(
                own,
                chi_rate,
                a_rate,
                &neighbor_rates,
                agent.observer.beta1,
            )?;

            let block = &x[l.agent(i)];
            let arm = read_arm(l, block);
            let lambda = agent.controller.lambda;
            let errors = tracking_errors(&arm, &own.chi_hat, chi_rate, lambda)?;
            let (xr_dot, xr_ddot) = reference_signals(chi_rate, &chi_acc, &errors, lambda)?;
            let z = self.cfg.projection.project(&arm, &xr_dot, &xr_ddot);
            let mut s = DVector::zeros(l.nodes);
            self.cfg.lattice.regressor_into(&z, s.as_mut_slice())?;
            let w = DMatrixView::from_slice(&block[l.weights()], l.nodes, JOINTS);
            let ff = w.tr_mul(&s);
            let feedforward = Vector2::new(ff[0], ff[1]);
            let tau = if self.zero_torque {
                Vector2::zeros()
            } else {
                feedforward - agent.controller.k * errors.r
            };
            let magnitude = tau.norm();
            if !magnitude.is_finite() {
                return Err(Error::NumericalBlowup { t, agent: i + 1 });
            }
            if magnitude > self.cfg.safety.torque {
                return Err(Error::TorqueCapExceeded {
                    t,
                    agent: i + 1,
                    magnitude,
                    cap: self.cfg.safety.torque,
                });
            }
            Ok(AgentEval {
                chi_rate: chi_rate.clone(),
                a_rate: a_rate.clone(),
                errors,
                xr_dot,
                xr_ddot,
                z,
                s,
                feedforward,
                tau,
            })
        })?;
        Ok((chi0_rate, evals))
    }

    fn vector_field(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let l = self.layout;
        let (chi0_rate, evals) = self.evaluate_agents(t, x)?;
        dx[l.leader()].copy_from_slice(chi0_rate.as_slice());
        if chi0_rate.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { t, agent: LEADER });
        }

        let chunks = self.fan_out(|i| {
            let ev = &evals[i];
            let agent = &self.cfg.agents[i];
            let block = &x[l.agent(i)];
            let arm = read_arm(&l, block);
            let qddot = agent.params.forward_dynamics(&arm, &ev.tau)?;

            let mut out = vec![0.0; l.agent_len()];
            out[l.chi_hat()].copy_from_slice(ev.chi_rate.as_slice());
            out[l.a_hat()].copy_from_slice(ev.a_rate.as_slice());
            out[l.q()].copy_from_slice(arm.qdot.as_slice());
            out[l.qdot()].copy_from_slice(qddot.as_slice());
            if !self.frozen {
                let gains = &agent.controller;
                let w = &block[l.weights()];
                let w_rate = &mut out[l.weights()];
                for j in 0..JOINTS {
                    let r_j = ev.errors.r[j];
                    let col = j * l.nodes..(j + 1) * l.nodes;
                    for ((d, s), wk) in w_rate[col.clone()].iter_mut().zip(ev.s.iter()).zip(&w[col])
                    {
                        *d = -gains.gamma * (s * r_j + gains.sigma * wk);
                    }
                }
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalBlowup { t, agent: i + 1 });
            }
            Ok(out)
        })?;
        for (i, chunk) in chunks.into_iter().enumerate() {
            dx[l.agent(i)].copy_from_slice(&chunk);
        }
        Ok(())
    }

    /// `d(world)/dt` at the given snapshot.
    pub fn assemble_vector_field(&self, world: &WorldState) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; world.x.len()];
        self.vector_field(world.t, &world.x, &mut dx)?;
        Ok(dx)
    }

    /// One RK4 step of size `dt`.
    pub fn integrate_step(&self, world: &WorldState, dt: f64) -> Result<WorldState> {
        let x = rk4_step(
            |t, x, dx| self.vector_field(t, x, dx),
            world.t,
            &world.x,
            dt,
        )?;
        Ok(WorldState {
            t: world.t + dt,
            x,
            layout: world.layout,
        })
    }

    /// Per-agent diagnostics at a snapshot, including the model-based target
    /// `H` (never fed back into the controller).
    pub fn diagnose(&self, world: &WorldState) -> Result<Vec<AgentSample>> {
        let l = &self.layout;
        let (_, evals) = self.evaluate_agents(world.t, &world.x)?;
        let chi0 = world.leader_state();
        let a0 = &self.cfg.leader.matrix;
        Ok(evals
            .iter()
            .enumerate()
            .map(|(i, ev)| {
                let block = &world.x[l.agent(i)];
                let obs = read_observer(l, block);
                let arm = read_arm(l, block);
                let h = target_function(&self.cfg.agents[i].params, &arm, &ev.xr_dot, &ev.xr_ddot);
                let w = DMatrixView::from_slice(&block[l.weights()], l.nodes, JOINTS);
                AgentSample {
                    e: [ev.errors.e[0], ev.errors.e[1]],
                    r: [ev.errors.r[0], ev.errors.r[1]],
                    tau: [ev.tau[0], ev.tau[1]],
                    chi_tilde_norm: (&obs.chi_hat - &chi0).norm(),
                    a_tilde_fro: (&obs.a_hat - a0).norm(),
                    nn_residual: (ev.feedforward - h).norm(),
                    h: [h[0], h[1]],
                    z: ev.z.clone(),
                    weight_norm: w.norm(),
                    avg_residual: None,
                }
            })
            .collect())
    }

    fn log_sample(&self, world: &WorldState) -> Result<LogSample> {
        Ok(LogSample {
            t: world.t,
            leader: world.x[self.layout.leader()].to_vec(),
            agents: self.diagnose(world)?,
        })
    }

    /// Integrates `[0, duration]`, logging every `log_stride` steps and
    /// averaging the weights over the configured window.
    pub fn run(&self) -> Result<ExperimentOutput> {
        let cfg = self.cfg;
        let l = self.layout;
        let (t_a, t_b) = cfg.average_window;
        let mut averages: Vec<WindowAverage> = (0..l.agents)
            .map(|_| WindowAverage::new(t_a, t_b, l.nodes, JOINTS))
            .collect();
        let mut world = self.initial_world();
        let mut log = TrajectoryLog::default();

        let record = |world: &WorldState,
                      k: usize,
                      log: &mut TrajectoryLog,
                      averages: &mut [WindowAverage]|
         -> Result<()> {
            if k.is_multiple_of(cfg.log_stride) {
                log.samples.push(self.log_sample(world)?);
            }
            if k.is_multiple_of(cfg.average_stride) {
                for (i, avg) in averages.iter_mut().enumerate() {
                    avg.push_slice(world.t, &world.x[l.agent(i)][l.weights()]);
                }
            }
            Ok(())
        };

        record(&world, 0, &mut log, &mut averages)?;
        for k in 1..=cfg.steps() {
            world = self.integrate_step(&world, cfg.dt)?;
            // Pin the clock to the grid so window membership is exact.
            world.t = k as f64 * cfg.dt;
            record(&world, k, &mut log, &mut averages)?;
        }

        let final_weights: Vec<WeightMatrix> = (0..l.agents).map(|i| world.weights(i)).collect();
        let averaged_weights = match &cfg.mode {
            Mode::Replay(weights) => {
                fill_residuals(&mut log, cfg, weights);
                None
            }
            Mode::Learn => {
                if l.agents > 0 && averages.iter().all(|a| a.count() > 0) {
                    let weights = averages
                        .into_iter()
                        .map(WindowAverage::finish)
                        .collect::<Result<Vec<_>>>()?;
                    fill_residuals(&mut log, cfg, &weights);
                    Some(weights)
                } else {
                    None
                }
            }
        };
        Ok(ExperimentOutput {
            log,
            averaged_weights,
            final_weights,
            final_world: world,
        })
    }
}

/// Fills `avg_residual` for the samples inside the averaging window.
fn fill_residuals(log: &mut TrajectoryLog, cfg: &ExperimentConfig, weights: &[WeightMatrix]) {
    let (t_a, t_b) = cfg.average_window;
    for sample in &mut log.samples {
        if sample.t < t_a - 1e-9 || sample.t > t_b + 1e-9 {
            continue;
        }
        for (agent, w) in sample.agents.iter_mut().zip(weights) {
            // Lattice dims were validated against the projection.
            if let Ok(out) = cfg.lattice.evaluate(w, &agent.z) {
                let h = Vector2::new(agent.h[0], agent.h[1]);
                agent.avg_residual = Some((Vector2::new(out[0], out[1]) - h).norm());
            }
        }
    }
}

/// Validates the configuration and runs it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    Simulator::new(cfg)?.run()
}
