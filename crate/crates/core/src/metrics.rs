//! Summary metrics extracted from a trajectory log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{SafetyCaps, SettlingRule};
use crate::log::TrajectoryLog;

/// Samples of `|A_tilde|` at or below this are excluded from the rate fit.
const RATE_FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    /// 1-based agent id.
    pub agent: usize,
    /// `None` when the error never settles for the hold time.
    pub settling_time: Option<f64>,
    pub post_settling_sup_e: Option<f64>,
    pub sup_e: f64,
    pub sup_r: f64,
    pub sup_tau: f64,
    pub sup_weight_norm: f64,
    pub final_a_tilde_fro: f64,
    pub final_chi_tilde_norm: f64,
    /// Least-squares slope of `ln |A_tilde|_F` against time, 1/s.
    pub a_tilde_rate: Option<f64>,
    /// `max |W_bar^T S - H| / max |H|` over the averaging window.
    pub nn_residual_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub agents: Vec<AgentMetrics>,
    pub duration: f64,
    pub samples: usize,
    /// Every sup stays below its cap.
    pub within_caps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSettings {
    pub settling: SettlingRule,
    pub window: (f64, f64),
    pub caps: SafetyCaps,
}

/// Earliest sample time after which `|e|` stays below the threshold through
/// the end of the log, provided at least `hold` seconds are observed.
pub fn settling_time(times: &[f64], e_norms: &[f64], rule: &SettlingRule) -> Option<f64> {
    let end = *times.last()?;
    let mut candidate = None;
    for (&t, &e) in times.iter().zip(e_norms).rev() {
        if e < rule.threshold {
            candidate = Some(t);
        } else {
            break;
        }
    }
    candidate.filter(|&t| end - t >= rule.hold - 1e-9)
}

/// Least-squares slope of `ln(y)` against `t`, over the points with
/// `y > RATE_FIT_FLOOR`.
pub fn log_rate_fit(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &y)| y > RATE_FIT_FLOOR && y.is_finite())
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn compute_metrics(log: &TrajectoryLog, settings: &MetricSettings) -> Result<Summary> {
    let first = log.samples.first().ok_or(Error::EmptyLog)?;
    let last = log.samples.last().ok_or(Error::EmptyLog)?;
    let (t_a, t_b) = settings.window;
    let times: Vec<f64> = log.samples.iter().map(|s| s.t).collect();
    let caps = settings.caps;
    let mut within_caps = true;

    let agents = (0..first.agents.len())
        .map(|i| {
            let series: Vec<_> = log.agent_series(i).collect();
            let e_norms: Vec<f64> = series.iter().map(|(_, a)| a.e_norm()).collect();
            let sup = |f: &dyn Fn(&crate::log::AgentSample) -> f64| {
                series.iter().map(|(_, a)| f(a)).fold(0.0, f64::max)
            };
            let settle = settling_time(&times, &e_norms, &settings.settling);
            let post_settling_sup_e = settle.map(|ts| {
                series
                    .iter()
                    .filter(|(t, _)| *t >= ts)
                    .map(|(_, a)| a.e_norm())
                    .fold(0.0, f64::max)
            });
            let a_tilde: Vec<f64> = series.iter().map(|(_, a)| a.a_tilde_fro).collect();

            let in_window: Vec<_> = series
                .iter()
                .filter(|(t, _)| *t >= t_a - 1e-9 && *t <= t_b + 1e-9)
                .collect();
            let nn_residual_ratio = if in_window.iter().all(|(_, a)| a.avg_residual.is_some())
                && !in_window.is_empty()
            {
                let num = in_window
                    .iter()
                    .filter_map(|(_, a)| a.avg_residual)
                    .fold(0.0, f64::max);
                let den = in_window
                    .iter()
                    .map(|(_, a)| a.h_norm())
                    .fold(0.0, f64::max);
                (den > 0.0).then(|| num / den)
            } else {
                None
            };

            let m = AgentMetrics {
                agent: i + 1,
                settling_time: settle,
                post_settling_sup_e,
                sup_e: sup(&|a| a.e_norm()),
                sup_r: sup(&|a| a.r_norm()),
                sup_tau: sup(&|a| a.tau_norm()),
                sup_weight_norm: sup(&|a| a.weight_norm),
                final_a_tilde_fro: last.agents[i].a_tilde_fro,
                final_chi_tilde_norm: last.agents[i].chi_tilde_norm,
                a_tilde_rate: log_rate_fit(&times, &a_tilde),
                nn_residual_ratio,
            };
            let finite = [m.sup_r, m.sup_tau, m.sup_weight_norm]
                .iter()
                .all(|v| v.is_finite());
            if !(finite
                && m.sup_r < caps.filtered_error
                && m.sup_tau < caps.torque
                && m.sup_weight_norm < caps.weight_norm)
            {
                within_caps = false;
            }
            m
        })
        .collect();

    Ok(Summary {
        agents,
        duration: last.t - first.t,
        samples: log.samples.len(),
        within_caps,
    })
}
