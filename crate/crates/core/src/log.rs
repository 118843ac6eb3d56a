//! In-memory trajectory log filled by the engine at a fixed stride.

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSample {
    /// Position error `q - x_hat1`, rad.
    pub e: [f64; 2],
    /// Filtered error, rad/s.
    pub r: [f64; 2],
    /// N·m
    pub tau: [f64; 2],
    pub chi_tilde_norm: f64,
    pub a_tilde_fro: f64,
    /// `|W_hat^T S(Z) - H|` with the live weights.
    pub nn_residual: f64,
    /// Model-based target `H`, N·m.
    pub h: [f64; 2],
    /// Network input.
    pub z: Vec<f64>,
    pub weight_norm: f64,
    /// `|W_bar^T S(Z) - H|`, filled after the run for samples in the averaging window.
    pub avg_residual: Option<f64>,
}

impl AgentSample {
    pub fn e_norm(&self) -> f64 {
        self.e[0].hypot(self.e[1])
    }

    pub fn r_norm(&self) -> f64 {
        self.r[0].hypot(self.r[1])
    }

    pub fn tau_norm(&self) -> f64 {
        self.tau[0].hypot(self.tau[1])
    }

    pub fn h_norm(&self) -> f64 {
        self.h[0].hypot(self.h[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogSample {
    pub t: f64,
    pub leader: Vec<f64>,
    pub agents: Vec<AgentSample>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub samples: Vec<LogSample>,
}

impl TrajectoryLog {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn follower_count(&self) -> usize {
        self.samples.first().map_or(0, |s| s.agents.len())
    }

    /// Per-sample view of one agent (zero-based index).
    pub fn agent_series(&self, agent: usize) -> impl Iterator<Item = (f64, &AgentSample)> {
        self.samples.iter().map(move |s| (s.t, &s.agents[agent]))
    }
}
