//! Virtual leader `chi0' = A0 chi0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default eigenvalue tolerance for the imaginary-axis check.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;

/// Leader system matrix and initial state. The state is `[positions; velocities]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSystem {
    pub matrix: DMatrix<f64>,
    pub initial_state: DVector<f64>,
}

impl LeaderSystem {
    /// Validates dimensions and the imaginary-axis condition on the spectrum.
    pub fn new(matrix: DMatrix<f64>, initial_state: DVector<f64>, tol: f64) -> Result<Self> {
        validate_leader_matrix(&matrix, tol)?;
        if initial_state.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                context: "leader initial state",
                expected: matrix.nrows(),
                got: initial_state.len(),
            });
        }
        if !matrix.nrows().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                context: "leader state must be [positions; velocities]",
                expected: matrix.nrows() + 1,
                got: matrix.nrows(),
            });
        }
        Ok(Self {
            matrix,
            initial_state,
        })
    }

    /// Double harmonic oscillator used by the bundled scenario.
    pub fn default_oscillator() -> Self {
        Self {
            matrix: default_leader_matrix(),
            initial_state: DVector::from_vec(vec![0.0, 0.8, 0.8, 0.0]),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Joints per arm (half the state dimension).
    pub fn joints(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn vector_field(&self, chi: &DVector<f64>) -> Result<DVector<f64>> {
        leader_vector_field(&self.matrix, chi)
    }
}

pub fn default_leader_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        ],
    )
}

/// Accepts iff every eigenvalue has `|Re| <= tol`. Zero eigenvalues are admitted.
pub fn validate_leader_matrix(matrix: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !matrix.is_square() {
        return Err(Error::NotSquare {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    if matrix.nrows() == 0 {
        return Ok(());
    }
    let eigenvalues = matrix.complex_eigenvalues();
    let worst = eigenvalues
        .iter()
        .max_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .copied();
    match worst {
        Some(z) if z.re.is_nan() || z.re.abs() > tol => {
            Err(Error::AssumptionViolated { re: z.re, im: z.im })
        }
        _ => Ok(()),
    }
}

pub fn leader_vector_field(matrix: &DMatrix<f64>, chi: &DVector<f64>) -> Result<DVector<f64>> {
    if chi.len() != matrix.ncols() {
        return Err(Error::DimensionMismatch {
            context: "leader vector field",
            expected: matrix.ncols(),
            got: chi.len(),
        });
    }
    Ok(matrix * chi)
}

/// Exact trajectory of the default oscillator from `[0, 0.8, 0.8, 0]`.
pub fn closed_form_default_leader(t: f64) -> DVector<f64> {
    let (s, c) = t.sin_cos();
    DVector::from_vec(vec![0.8 * s, 0.8 * c, 0.8 * c, -0.8 * s])
}
