//! First layer: distributed estimation of the leader's state and system matrix.
//!
//! Each follower keeps `(chi_hat, a_hat)` and relaxes them toward its
//! in-neighbors. A neighbor that is the leader contributes the true `chi0`,
//! `A0` and `A0 chi0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub chi_hat: DVector<f64>,
    pub a_hat: DMatrix<f64>,
}

impl ObserverState {
    pub fn zeros(state_dim: usize) -> Self {
        Self {
            chi_hat: DVector::zeros(state_dim),
            a_hat: DMatrix::zeros(state_dim, state_dim),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.chi_hat.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    /// State-consensus gain.
    pub beta1: f64,
    /// Matrix-consensus gain.
    pub beta2: f64,
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
        }
    }
}

impl ObserverGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    "observer gain positivity",
                    format!("{name} = {v} must be > 0"),
                ));
            }
        }
        Ok(())
    }
}

fn check_vec(context: &'static str, expected: usize, v: &DVector<f64>) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

fn check_mat(context: &'static str, expected: usize, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got: if m.nrows() != expected {
                m.nrows()
            } else {
                m.ncols()
            },
        });
    }
    Ok(())
}

/// `a_hat chi_hat + beta1 sum_j a_ij (chi_j - chi_hat)`.
pub fn observer_state_derivative(
    own: &ObserverState,
    neighbors: &[(f64, &DVector<f64>)],
    beta1: f64,
) -> Result<DVector<f64>> {
    let dim = own.state_dim();
    check_mat("observer matrix estimate", dim, &own.a_hat)?;
    let mut out = &own.a_hat * &own.chi_hat;
    let coupling = consensus_sum(&own.chi_hat, neighbors, "neighbor state estimate")?;
    out.axpy(beta1, &coupling, 1.0);
    Ok(out)
}

/// `beta2 sum_j a_ij (A_j - a_hat)`.
pub fn observer_matrix_derivative(
    own: &DMatrix<f64>,
    neighbors: &[(f64, &DMatrix<f64>)],
    beta2: f64,
) -> Result<DMatrix<f64>> {
    let mut sum = DMatrix::zeros(own.nrows(), own.ncols());
    for (w, other) in neighbors {
        if other.shape() != own.shape() {
            return Err(Error::DimensionMismatch {
                context: "neighbor matrix estimate",
                expected: own.nrows(),
                got: other.nrows(),
            });
        }
        sum += (*other - own) * *w;
    }
    Ok(sum * beta2)
}

/// Time derivative of [`observer_state_derivative`]:
/// `a_hat' chi_hat + a_hat chi_hat' + beta1 sum_j a_ij (chi_j' - chi_hat')`.
///
/// `neighbor_rates` carries each neighbor's current `chi_hat'` (for the leader,
/// `A0 chi0`), in the same order as the neighbor list used for the first
/// derivative.
pub fn observer_state_second_derivative(
    own: &ObserverState,
    own_rate: &DVector<f64>,
    a_hat_rate: &DMatrix<f64>,
    neighbor_rates: &[(f64, &DVector<f64>)],
    beta1: f64,
) -> Result<DVector<f64>> {
    let dim = own.state_dim();
    check_vec("observer state rate", dim, own_rate)?;
    check_mat("observer matrix rate", dim, a_hat_rate)?;
    let mut out = a_hat_rate * &own.chi_hat;
    out.gemv(1.0, &own.a_hat, own_rate, 1.0);
    let coupling = consensus_sum(own_rate, neighbor_rates, "neighbor state rate")?;
    out.axpy(beta1, &coupling, 1.0);
    Ok(out)
}

fn consensus_sum(
    own: &DVector<f64>,
    neighbors: &[(f64, &DVector<f64>)],
    context: &'static str,
) -> Result<DVector<f64>> {
    let mut sum = DVector::zeros(own.len());
    for (w, other) in neighbors {
        check_vec(context, own.len(), other)?;
        sum += (*other - own) * *w;
    }
    Ok(sum)
}

/// Per-agent `(|chi_hat - chi0|, |a_hat - A0|_F)`.
pub fn estimation_errors(
    observers: &[ObserverState],
    chi0: &DVector<f64>,
    a0: &DMatrix<f64>,
) -> Vec<(f64, f64)> {
    observers
        .iter()
        .map(|o| ((&o.chi_hat - chi0).norm(), (&o.a_hat - a0).norm()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leader::default_leader_matrix;

    fn chi0() -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.8, 0.8, 0.0])
    }

    #[test]
    fn exact_tracking_is_a_fixed_point() {
        let a0 = default_leader_matrix();
        let own = ObserverState {
            chi_hat: chi0(),
            a_hat: a0.clone(),
        };
        let c = chi0();
        let d = observer_state_derivative(&own, &[(1.0, &c)], 1.0).unwrap();
        assert_eq!(d, &a0 * chi0());
    }

    #[test]
    fn zero_estimate_pulled_toward_leader() {
        let own = ObserverState::zeros(4);
        let c = chi0();
        let d = observer_state_derivative(&own, &[(1.0, &c)], 1.0).unwrap();
        assert_eq!(d, chi0());
    }

    #[test]
    fn no_neighbors_is_pure_drift() {
        let own = ObserverState {
            chi_hat: DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
            a_hat: default_leader_matrix(),
        };
        let d = observer_state_derivative(&own, &[], 3.0).unwrap();
        assert_eq!(d, &own.a_hat * &own.chi_hat);
    }

    #[test]
    fn matrix_derivative_examples() {
        let a0 = default_leader_matrix();
        let zero = DMatrix::zeros(4, 4);
        assert_eq!(
            observer_matrix_derivative(&zero, &[(1.0, &a0)], 1.0).unwrap(),
            a0
        );
        assert_eq!(
            observer_matrix_derivative(&a0, &[(1.0, &a0), (2.5, &a0)], 1.0).unwrap(),
            zero
        );
        let delta = DMatrix::from_fn(4, 4, |i, j| (i as f64) - 0.5 * j as f64);
        let other = &a0 + &delta;
        let d = observer_matrix_derivative(&a0, &[(0.7, &other)], 2.0).unwrap();
        assert!((d - delta * 1.4).amax() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let own = ObserverState::zeros(4);
        let short = DVector::zeros(3);
        assert!(matches!(
            observer_state_derivative(&own, &[(1.0, &short)], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let small = DMatrix::zeros(3, 3);
        assert!(matches!(
            observer_matrix_derivative(&own.a_hat, &[(1.0, &small)], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        // Freeze a small network snapshot, propagate it along its own first
        // derivative for a tiny step and compare.
        let a0 = default_leader_matrix();
        let own = ObserverState {
            chi_hat: DVector::from_vec(vec![0.1, -0.2, 0.3, 0.05]),
            a_hat: DMatrix::from_fn(4, 4, |i, j| 0.1 * (i as f64 - j as f64)),
        };
        let nb = ObserverState {
            chi_hat: DVector::from_vec(vec![0.4, 0.1, -0.2, 0.3]),
            a_hat: DMatrix::from_fn(4, 4, |i, j| 0.05 * (i * j) as f64),
        };
        let (b1, b2, w) = (1.3, 0.7, 0.9);
        let rates = |o: &ObserverState, n: &ObserverState| {
            let nb_rate = observer_state_derivative(n, &[(1.0, &chi0())], b1).unwrap();
            let nb_a_rate = observer_matrix_derivative(&n.a_hat, &[(1.0, &a0)], b2).unwrap();
            let own_rate = observer_state_derivative(o, &[(w, &n.chi_hat)], b1).unwrap();
            let own_a_rate = observer_matrix_derivative(&o.a_hat, &[(w, &n.a_hat)], b2).unwrap();
            (own_rate, own_a_rate, nb_rate, nb_a_rate)
        };
        let (own_rate, own_a_rate, nb_rate, nb_a_rate) = rates(&own, &nb);
        let analytic =
            observer_state_second_derivative(&own, &own_rate, &own_a_rate, &[(w, &nb_rate)], b1)
                .unwrap();
        let h = 1e-6;
        let step =
            |o: &ObserverState, rate: &DVector<f64>, a_rate: &DMatrix<f64>, s: f64| ObserverState {
                chi_hat: &o.chi_hat + rate * s,
                a_hat: &o.a_hat + a_rate * s,
            };
        let fwd = rates(
            &step(&own, &own_rate, &own_a_rate, h),
            &step(&nb, &nb_rate, &nb_a_rate, h),
        )
        .0;
        let bwd = rates(
            &step(&own, &own_rate, &own_a_rate, -h),
            &step(&nb, &nb_rate, &nb_a_rate, -h),
        )
        .0;
        let fd = (fwd - bwd) / (2.0 * h);
        assert!((fd - analytic).amax() < 1e-8);
    }

    #[test]
    fn errors_vanish_at_truth() {
        let a0 = default_leader_matrix();
        let obs = vec![ObserverState {
            chi_hat: chi0(),
            a_hat: a0.clone(),
        }];
        assert_eq!(estimation_errors(&obs, &chi0(), &a0), vec![(0.0, 0.0)]);
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(ObserverGains::default().validate().is_ok());
        assert!(ObserverGains {
            beta1: 0.0,
            beta2: 1.0
        }
        .validate()
        .is_err());
        assert!(ObserverGains {
            beta1: 1.0,
            beta2: -1.0
        }
        .validate()
        .is_err());
    }
}
