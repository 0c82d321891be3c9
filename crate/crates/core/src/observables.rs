//! Physical observables of a trajectory and power-law exponent fits.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::evolution::RawState;
use crate::grid::SpectralField;
use crate::spectral_ops::{NeumannStats, SpectralOperators};

/// Minimum number of samples a fit window must hold.
pub const MIN_FIT_SAMPLES: usize = 16;
/// Width, in time units, of the running-maximum envelope window.
pub const ENVELOPE_WIDTH: f64 = 5.0;

/// `Omega = B_t Theta`.
pub fn reconstruct_vorticity(
    ops: &SpectralOperators,
    t: f64,
    theta: &SpectralField,
) -> Result<(SpectralField, NeumannStats)> {
    let (omega, stats) = ops.apply_bt(t, theta)?;
    Ok((omega.ensure_finite("vorticity reconstruction")?, stats))
}

/// Moving-frame velocity from the vorticity.
///
/// With `psi = Delta_t^{-1} Omega = -T_L Omega / p`:
/// `V^x = -g (d_Y - t d_X) psi`, which is `h + (g - 1) * h` for
/// `h = i (eta - k t) T_L Omega / p`, and `V^y = d_X psi = -i k T_L Omega / p`.
pub fn velocity_components(
    ops: &SpectralOperators,
    t: f64,
    omega: &SpectralField,
) -> Result<(SpectralField, SpectralField, NeumannStats)> {
    let grid = ops.grid();
    let k = grid.kf();
    let (tl, stats) = ops.solve_tl(t, omega)?;
    let h = tl.map_indexed(|j, z| {
        let a = grid.etas()[j] - k * t;
        z * Complex64::new(0.0, a / (k * k + a * a))
    });
    let vx = if ops.is_couette() {
        h
    } else {
        h.add(&ops.apply_g_minus_one(&h))
    };
    let vy = tl.map_indexed(|j, z| {
        let a = grid.etas()[j] - k * t;
        z * Complex64::new(0.0, -k / (k * k + a * a))
    });
    Ok((vx.ensure_finite("velocity")?, vy.ensure_finite("velocity")?, stats))
}

/// `L^2` norms along a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub q_norm: Vec<f64>,
    pub vx_norm: Vec<f64>,
    pub vy_norm: Vec<f64>,
    /// `||Omega|| + ||sqrt(p) Q||`.
    pub growth_norm: Vec<f64>,
}

pub fn series_norms(ops: &SpectralOperators, history: &[RawState]) -> Result<(ObservableSeries, NeumannStats)> {
    let grid = ops.grid();
    let k = grid.kf();
    let mut out = ObservableSeries::default();
    let mut stats = NeumannStats::default();
    for state in history {
        let (omega, s1) = reconstruct_vorticity(ops, state.t, &state.theta)?;
        let (vx, vy, s2) = velocity_components(ops, state.t, &omega)?;
        stats.merge(&s1);
        stats.merge(&s2);
        let grad_q = state.q.map_indexed(|j, z| {
            let a = grid.etas()[j] - k * state.t;
            z * (k * k + a * a).sqrt()
        });
        out.times.push(state.t);
        out.q_norm.push(state.q.l2_norm(grid));
        out.vx_norm.push(vx.l2_norm(grid));
        out.vy_norm.push(vy.l2_norm(grid));
        out.growth_norm.push(omega.l2_norm(grid) + grad_q.l2_norm(grid));
    }
    Ok((out, stats))
}

/// Centred running maximum: `env_i = max { v_j : |t_j - t_i| <= width / 2 }`.
/// `times` must be non-decreasing.
pub fn running_max_envelope(times: &[f64], values: &[f64], width: f64) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let half = 0.5 * width;
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(values.len());
    for (i, &t) in times.iter().enumerate() {
        while times[lo] < t - half {
            lo += 1;
        }
        hi = hi.max(i);
        while hi + 1 < times.len() && times[hi + 1] <= t + half {
            hi += 1;
        }
        out.push(values[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    out
}

/// Least-squares fit of `log v = log c + exponent * log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn fit_power_law(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Result<PowerLawFit> {
    if times.len() != values.len() {
        return Err(invalid("values", "times and values differ in length"));
    }
    if !(t_lo >= 1.0) || !(t_hi > t_lo) {
        return Err(invalid(
            "window",
            format!("need 1 <= t_lo < t_hi, got [{t_lo}, {t_hi}]"),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= t_lo && t <= t_hi {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(
                    "values",
                    format!("non-positive or non-finite value {v} at t = {t}"),
                ));
            }
            xs.push(t.ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientWindow {
            count: xs.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(PowerLawFit {
        exponent,
        prefactor: intercept.exp(),
        r_squared,
        samples: xs.len(),
    })
}

/// [`fit_power_law`] applied to the running-maximum envelope of `values`.
pub fn fit_envelope_power_law(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Result<PowerLawFit> {
    let env = running_max_envelope(times, values, ENVELOPE_WIDTH);
    fit_power_law(times, &env, t_lo, t_hi)
}
