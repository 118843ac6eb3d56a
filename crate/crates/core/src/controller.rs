//! Second layer: the per-agent learning controller.
//!
//! Only local data is used here: the arm's own state and its own observer.
//! The reference is the position block of the observer estimate.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::manipulator::{ManipulatorParams, ManipulatorState};
use crate::rbf::{RbfLattice, WeightMatrix};

/// Length of the full controller signal vector `[q, q', xr', xr'']`.
pub const SIGNAL_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Filtered-error slope, 1/s.
    pub lambda: f64,
    /// Feedback gain matrix.
    pub k: Matrix2<f64>,
    /// Adaptation rate.
    pub gamma: f64,
    /// Leakage.
    pub sigma: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            k: Matrix2::identity() * 10.0,
            gamma: 10.0,
            sigma: 0.001,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("sigma", self.sigma),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    "controller gain positivity",
                    format!("{name} = {v} must be > 0"),
                ));
            }
        }
        if self.k != self.k.transpose() || self.k.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "controller gain positivity",
                "K must be a finite symmetric matrix",
            ));
        }
        // Sylvester's criterion.
        let det = self.k[(0, 0)] * self.k[(1, 1)] - self.k[(0, 1)] * self.k[(1, 0)];
        if !(self.k[(0, 0)] > 0.0 && det > 0.0) {
            return Err(Error::validation(
                "controller gain positivity",
                format!("K = {:?} is not positive definite", self.k.as_slice()),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    pub e: Vector2<f64>,
    pub edot: Vector2<f64>,
    pub r: Vector2<f64>,
}

fn position_block(v: &DVector<f64>, context: &'static str) -> Result<Vector2<f64>> {
    if v.len() != 4 {
        return Err(Error::DimensionMismatch {
            context,
            expected: 4,
            got: v.len(),
        });
    }
    Ok(Vector2::new(v[0], v[1]))
}

/// `e = q - x_hat1`, `e' = q' - x_hat1'`, `r = e' + lambda e`.
pub fn tracking_errors(
    x: &ManipulatorState,
    chi_hat: &DVector<f64>,
    chi_hat_dot: &DVector<f64>,
    lambda: f64,
) -> Result<TrackingErrors> {
    let e = x.q - position_block(chi_hat, "observer estimate")?;
    let edot = x.qdot - position_block(chi_hat_dot, "observer rate")?;
    Ok(TrackingErrors {
        e,
        edot,
        r: edot + e * lambda,
    })
}

/// `xr' = x_hat1' - lambda e`, `xr'' = x_hat1'' - lambda e'`.
pub fn reference_signals(
    chi_hat_dot: &DVector<f64>,
    chi_hat_ddot: &DVector<f64>,
    errors: &TrackingErrors,
    lambda: f64,
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let xr_dot = position_block(chi_hat_dot, "observer rate")? - errors.e * lambda;
    let xr_ddot = position_block(chi_hat_ddot, "observer acceleration")? - errors.edot * lambda;
    Ok((xr_dot, xr_ddot))
}

/// Selects the network input from `[q, q', xr', xr'']`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputProjection {
    indices: Vec<usize>,
}

impl InputProjection {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::validation(
                "network input",
                "input index list is empty",
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= SIGNAL_DIM) {
            return Err(Error::validation(
                "network input",
                format!("input index {bad} outside 0..{SIGNAL_DIM}"),
            ));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(Error::validation("network input", "repeated input index"));
        }
        Ok(Self { indices })
    }

    /// Joint positions and velocities.
    pub fn measured_state() -> Self {
        Self {
            indices: vec![0, 1, 2, 3],
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn project(
        &self,
        x: &ManipulatorState,
        xr_dot: &Vector2<f64>,
        xr_ddot: &Vector2<f64>,
    ) -> Vec<f64> {
        let full = [
            x.q[0], x.q[1], x.qdot[0], x.qdot[1], xr_dot[0], xr_dot[1], xr_ddot[0], xr_ddot[1],
        ];
        self.indices.iter().map(|&i| full[i]).collect()
    }
}

/// `tau = W^T S - K r` from a precomputed regressor.
pub fn torque_from_regressor(
    weights: &WeightMatrix,
    s: &DVector<f64>,
    r: &Vector2<f64>,
    k: &Matrix2<f64>,
) -> Result<Vector2<f64>> {
    weights.check_nodes(s.len())?;
    if weights.outputs() != 2 {
        return Err(Error::DimensionMismatch {
            context: "weight matrix columns",
            expected: 2,
            got: weights.outputs(),
        });
    }
    let ff = weights.output(s);
    Ok(Vector2::new(ff[0], ff[1]) - k * r)
}

pub fn control_torque(
    weights: &WeightMatrix,
    lattice: &RbfLattice,
    z: &[f64],
    r: &Vector2<f64>,
    gains: &ControllerGains,
) -> Result<Vector2<f64>> {
    let s = lattice.regressor(z)?;
    torque_from_regressor(weights, &s, r, &gains.k)
}

/// `dW/dt`, column `j` = `-gamma (S r_j + sigma W_j)`.
pub fn adapt_weights(
    weights: &WeightMatrix,
    s: &DVector<f64>,
    r: &Vector2<f64>,
    gains: &ControllerGains,
) -> Result<DMatrix<f64>> {
    weights.check_nodes(s.len())?;
    if weights.outputs() != r.len() {
        return Err(Error::DimensionMismatch {
            context: "weight matrix columns",
            expected: r.len(),
            got: weights.outputs(),
        });
    }
    let mut out = DMatrix::zeros(weights.nodes(), weights.outputs());
    for j in 0..weights.outputs() {
        let mut col = out.column_mut(j);
        col.copy_from(&(s * r[j] + weights.0.column(j) * gains.sigma));
        col *= -gains.gamma;
    }
    Ok(out)
}

/// Model-based `H = M xr'' + C xr' + g (+ friction)`. Diagnostic only: the
/// controller never sees it.
pub fn target_function(
    p: &ManipulatorParams,
    x: &ManipulatorState,
    xr_dot: &Vector2<f64>,
    xr_ddot: &Vector2<f64>,
) -> Vector2<f64> {
    p.mass_matrix(&x.q) * xr_ddot
        + p.coriolis_matrix(&x.q, &x.qdot) * xr_dot
        + p.gravity_vector(&x.q)
        + p.friction.torque(&x.qdot)
}
