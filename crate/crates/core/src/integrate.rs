//! Classical fixed-step Runge–Kutta over a flat state vector.

use crate::error::Result;

/// One RK4 step of `x' = f(t, x)`. `f` writes the derivative into its output
/// slice and may fail, in which case the step is aborted.
pub fn rk4_step<F>(mut f: F, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let half = 0.5 * dt;

    f(t, x, &mut k1)?;
    for i in 0..n {
        stage[i] = x[i] + half * k1[i];
    }
    f(t + half, &stage, &mut k2)?;
    for i in 0..n {
        stage[i] = x[i] + half * k2[i];
    }
    f(t + half, &stage, &mut k3)?;
    for i in 0..n {
        stage[i] = x[i] + dt * k3[i];
    }
    f(t + dt, &stage, &mut k4)?;

    let sixth = dt / 6.0;
    Ok((0..n)
        .map(|i| x[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut x = vec![1.0];
        let dt = 0.01;
        for k in 0..100 {
            x = rk4_step(
                |_, x, dx| {
                    dx[0] = -x[0];
                    Ok(())
                },
                k as f64 * dt,
                &x,
                dt,
            )
            .unwrap();
        }
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn exact_for_cubic_in_time() {
        // x' = 3t^2 integrates exactly under RK4.
        let x = rk4_step(
            |t, _, dx| {
                dx[0] = 3.0 * t * t;
                Ok(())
            },
            1.0,
            &[1.0],
            0.5,
        )
        .unwrap();
        assert!((x[0] - 1.5f64.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let x0 = vec![0.3, -1.0, 7.5];
        let x = rk4_step(
            |_, _, dx| {
                dx.fill(0.0);
                Ok(())
            },
            0.0,
            &x0,
            1e-3,
        )
        .unwrap();
        assert_eq!(x, x0);
    }
}
