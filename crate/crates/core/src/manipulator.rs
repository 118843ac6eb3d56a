//! Two-link planar arm: `M(q) q'' + C(q, q') q' + g(q) + F(q') = tau`.
//!
//! `F` is an optional friction term, off unless configured.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Determinant floor for the 2x2 mass-matrix solve.
const SINGULAR_DET: f64 = 1e-12;

/// Constant plus viscous joint friction, `F(q') = constant + viscous .* q'`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Friction {
    /// N·m
    #[serde(default)]
    pub constant: [f64; 2],
    /// N·m·s/rad
    #[serde(default)]
    pub viscous: [f64; 2],
}

impl Friction {
    pub fn torque(&self, qdot: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            self.constant[0] + self.viscous[0] * qdot[0],
            self.constant[1] + self.viscous[1] * qdot[1],
        )
    }

    pub fn is_zero(&self) -> bool {
        *self == Friction::default()
    }
}

/// Physical constants of one arm. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub gravity: f64,
    pub friction: Friction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorState {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
}

impl ManipulatorState {
    pub fn new(q: [f64; 2], qdot: [f64; 2]) -> Self {
        Self {
            q: Vector2::from(q),
            qdot: Vector2::from(qdot),
        }
    }
}

impl ManipulatorParams {
    /// Centers of mass at mid-link, standard gravity, no friction.
    pub fn with_mid_link_com(m1: f64, m2: f64, l1: f64, l2: f64, i1: f64, i2: f64) -> Self {
        Self {
            m1,
            m2,
            l1,
            l2,
            lc1: l1 / 2.0,
            lc2: l2 / 2.0,
            i1,
            i2,
            gravity: STANDARD_GRAVITY,
            friction: Friction::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("lc1", self.lc1),
            ("lc2", self.lc2),
            ("I1", self.i1),
            ("I2", self.i2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    "manipulator parameters",
                    format!("{name} = {v} must be > 0"),
                ));
            }
        }
        if self.lc1 > self.l1 || self.lc2 > self.l2 {
            return Err(Error::validation(
                "manipulator parameters",
                "center-of-mass distance exceeds link length",
            ));
        }
        if !self.gravity.is_finite() {
            return Err(Error::validation(
                "manipulator parameters",
                "gravity must be finite",
            ));
        }
        let f = self.friction;
        if f.constant.iter().chain(&f.viscous).any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "manipulator parameters",
                "friction must be finite",
            ));
        }
        Ok(())
    }

    /// `m2 l1 lc2`, the coefficient of every configuration-dependent term.
    fn coupling(&self) -> f64 {
        self.m2 * self.l1 * self.lc2
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let c2 = q[1].cos();
        let lc2_sq = self.lc2 * self.lc2;
        let m11 = self.m1 * self.lc1 * self.lc1
            + self.m2 * (self.l1 * self.l1 + lc2_sq + 2.0 * self.l1 * self.lc2 * c2)
            + self.i1
            + self.i2;
        let m12 = self.m2 * (lc2_sq + self.l1 * self.lc2 * c2) + self.i2;
        let m22 = self.m2 * lc2_sq + self.i2;
        Matrix2::new(m11, m12, m12, m22)
    }

    /// Analytic `dM/dt = dM/dq2 * q2'`.
    pub fn mass_matrix_rate(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let d = -self.coupling() * q[1].sin() * qdot[1];
        Matrix2::new(2.0 * d, d, d, 0.0)
    }

    pub fn coriolis_matrix(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let h = self.coupling() * q[1].sin();
        Matrix2::new(-h * qdot[1], -h * (qdot[0] + qdot[1]), h * qdot[0], 0.0)
    }

    pub fn gravity_vector(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let g = self.gravity;
        let distal = self.m2 * self.lc2 * g * (q[0] + q[1]).cos();
        let proximal = (self.m1 * self.lc2 + self.m2 * self.l1) * g * q[0].cos();
        Vector2::new(proximal + distal, distal)
    }

    /// `q'' = M^-1 (tau - C q' - g - F)`, via a 2x2 solve.
    pub fn forward_dynamics(
        &self,
        s: &ManipulatorState,
        tau: &Vector2<f64>,
    ) -> Result<Vector2<f64>> {
        let m = self.mass_matrix(&s.q);
        let rhs = tau
            - self.coriolis_matrix(&s.q, &s.qdot) * s.qdot
            - self.gravity_vector(&s.q)
            - self.friction.torque(&s.qdot);
        solve2(&m, &rhs)
    }

    /// `M q'' + C q' + g + F`.
    pub fn inverse_dynamics(&self, s: &ManipulatorState, qddot: &Vector2<f64>) -> Vector2<f64> {
        self.mass_matrix(&s.q) * qddot
            + self.coriolis_matrix(&s.q, &s.qdot) * s.qdot
            + self.gravity_vector(&s.q)
            + self.friction.torque(&s.qdot)
    }

    pub fn kinetic_energy(&self, s: &ManipulatorState) -> f64 {
        0.5 * s.qdot.dot(&(self.mass_matrix(&s.q) * s.qdot))
    }
}

fn solve2(m: &Matrix2<f64>, rhs: &Vector2<f64>) -> Result<Vector2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale = m.amax().max(1.0);
    if det.is_nan() || det.abs() <= SINGULAR_DET * scale * scale {
        return Err(Error::SingularMass { det });
    }
    Ok(Vector2::new(
        (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
    ))
}

/// The five heterogeneous arms of the bundled scenario.
pub fn bundled_robots() -> [ManipulatorParams; 5] {
    [
        ManipulatorParams::with_mid_link_com(2.0, 0.85, 0.35, 0.31, 61.25e-3, 20.42e-3),
        ManipulatorParams::with_mid_link_com(2.2, 0.9, 0.5, 0.4, 70e-3, 25.21e-3),
        ManipulatorParams::with_mid_link_com(2.3, 1.0, 0.6, 0.5, 72.14e-3, 27.1e-3),
        ManipulatorParams::with_mid_link_com(1.9, 0.9, 0.52, 0.48, 67.21e-3, 25.4e-3),
        ManipulatorParams::with_mid_link_com(2.4, 1.5, 0.57, 0.53, 73.42e-3, 22.63e-3),
    ]
}
