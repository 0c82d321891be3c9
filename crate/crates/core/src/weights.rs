//! Time-dependent weights of the near-Couette energy functional.
//!
//! The weight `m = m1 * w^delta` enters the symmetric variables as `m^{-1}`.
//! `w` carries the decay correction with `w'/w = |p'| / (4p)`; `m1` is the
//! uniformly bounded weight with `|m1'/m1| = C_beta k^2 / p`.
//!
//! Two conventions exist for `m1`. [`eval_m1`] is the closed form
//! `exp[C_beta (arctan(eta/k - t) - arctan(eta/k))]`, which decreases in `t`.
//! Its reciprocal, [`eval_m1_growth`], solves `m1'/m1 = +C_beta k^2 / p` and
//! is the factor used inside [`eval_m`] and the energy functional, where the
//! weight has to grow for `-m'/m` to act as damping.
//!
//! `C_beta >= 512` for every admissible `R`, so `m` overflows `f64` quickly.
//! Use the `log_*` evaluators whenever the weight is combined with data.

use crate::error::{invalid, Result};
use crate::multipliers::{eval_p, eval_p_prime, integrated_kp_ratio, Frequency};

/// Parameters shared by all weight evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSet {
    pub beta: f64,
    pub r: f64,
    pub c0: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub c_beta: f64,
}

/// `256 sqrt(R) (2 sqrt(R) / (2 sqrt(R) - 1)) (1 + beta^2)`.
pub fn c_beta(r: f64, beta: f64) -> f64 {
    let sr = r.sqrt();
    256.0 * sr * (2.0 * sr / (2.0 * sr - 1.0)) * (1.0 + beta * beta)
}

impl WeightSet {
    pub fn new(beta: f64, r: f64, c0: f64, epsilon: f64) -> Result<Self> {
        if !(r > 0.25) || !r.is_finite() {
            return Err(invalid("R", format!("weights need R > 1/4, got {r}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("must be >= 0, got {beta}")));
        }
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(invalid("C0", format!("must be > 0, got {c0}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(invalid("epsilon", format!("must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            beta,
            r,
            c0,
            epsilon,
            delta: c0 * epsilon,
            c_beta: c_beta(r, beta),
        })
    }

    /// Same weight set with `delta` overridden (sensitivity sweeps, tests).
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Declared exchange constant for `m^{-1}`, as a natural log: `ln 16 + 2 C_beta`.
    pub fn declared_m_exchange_log_bound(&self) -> f64 {
        16f64.ln() + 2.0 * self.c_beta
    }

    /// The exponent of the growing `m1` never leaves `[0, pi C_beta)`.
    pub fn m1_log_range(&self) -> f64 {
        std::f64::consts::PI * self.c_beta
    }
}

/// `ln w`, the exact integral of `w'/w = |p'|/(4p)` from `w(0) = 1`.
///
/// For `eta/k >= 0` this is the two-branch closed form
/// `((k^2+eta^2)/p)^{1/4}` before the critical time and
/// `((k^2+eta^2) p / k^4)^{1/4}` after it. When the critical time is negative
/// `p` only grows on `t >= 0` and the weight is `(p / (k^2+eta^2))^{1/4}`.
pub fn log_w(t: f64, f: Frequency) -> f64 {
    let k = f.kf();
    let eta = f.eta();
    let base = k * k + eta * eta;
    let p = eval_p(t, f);
    let tc = f.critical_time();
    if tc < 0.0 {
        0.25 * (p / base).ln()
    } else if t < tc {
        0.25 * (base / p).ln()
    } else {
        0.25 * (base * p / (k * k * k * k)).ln()
    }
}

/// Decay-correction weight, `w(0) = 1`, continuous in `t`.
pub fn eval_w(t: f64, f: Frequency) -> f64 {
    log_w(t, f).exp()
}

/// `w'/w = |p'| / (4p)`.
pub fn w_log_derivative(t: f64, f: Frequency) -> f64 {
    eval_p_prime(t, f).abs() / (4.0 * eval_p(t, f))
}

/// Closed-form `m1 = exp[C_beta (arctan(eta/k - t) - arctan(eta/k))]`.
pub fn eval_m1(t: f64, f: Frequency, c_beta: f64) -> f64 {
    (-log_m1_growth(t, f, c_beta)).exp()
}

/// `ln` of the growing weight `1 / eval_m1`, i.e. `C_beta int_0^t k^2/p`.
pub fn log_m1_growth(t: f64, f: Frequency, c_beta: f64) -> f64 {
    c_beta * integrated_kp_ratio(t, f)
}

pub fn eval_m1_growth(t: f64, f: Frequency, c_beta: f64) -> f64 {
    log_m1_growth(t, f, c_beta).exp()
}

/// `m1'/m1 = C_beta k^2 / p` for the growing convention.
pub fn m1_log_derivative(t: f64, f: Frequency, c_beta: f64) -> f64 {
    let k = f.kf();
    c_beta * k * k / eval_p(t, f)
}

pub fn log_m(t: f64, f: Frequency, ws: &WeightSet) -> f64 {
    log_m1_growth(t, f, ws.c_beta) + ws.delta * log_w(t, f)
}

/// `m = m1 w^delta` with the growing `m1`. Overflows to `inf` for large
/// `C_beta t`; prefer [`log_m`] or [`inv_m`].
pub fn eval_m(t: f64, f: Frequency, ws: &WeightSet) -> f64 {
    log_m(t, f, ws).exp()
}

/// `m^{-1}`, underflowing to zero instead of overflowing.
pub fn inv_m(t: f64, f: Frequency, ws: &WeightSet) -> f64 {
    (-log_m(t, f, ws)).exp()
}

/// `m'/m = delta w'/w + m1'/m1`.
pub fn m_log_derivative(t: f64, f: Frequency, ws: &WeightSet) -> f64 {
    ws.delta * w_log_derivative(t, f) + m1_log_derivative(t, f, ws.c_beta)
}

/// Left-over-right ratios of the three frequency-exchange inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeRatios {
    /// `p^{-1}(eta) / (<eta-xi>^2 p^{-1}(xi))`
    pub p: f64,
    /// `(|p'|/p)(eta) / (<eta-xi>^2 (|p'|/p)(xi) + |k| <eta-xi>^3 p^{-1}(xi))`
    pub p_prime: f64,
    /// `ln[m^{-1}(eta) / (<eta-xi>^delta m^{-1}(xi))]`
    pub log_m: f64,
}

/// Analytic constant for the `p` exchange, from `<a> <= sqrt(2) <a-b> <b>`.
pub const P_EXCHANGE_BOUND: f64 = 2.0;
/// Analytic constant for the `|p'|/p` exchange.
pub const P_PRIME_EXCHANGE_BOUND: f64 = 4.0;

fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

pub fn check_exchange(t: f64, k: i64, eta: f64, xi: f64, ws: &WeightSet) -> Result<ExchangeRatios> {
    let fe = Frequency::new(k, eta)?;
    let fx = Frequency::new(k, xi)?;
    let d = bracket(eta - xi);
    let (pe, px) = (eval_p(t, fe), eval_p(t, fx));
    let (dpe, dpx) = (eval_p_prime(t, fe).abs(), eval_p_prime(t, fx).abs());
    let kabs = fe.kf().abs();

    let p = (1.0 / pe) / (d * d / px);
    let p_prime = (dpe / pe) / (d * d * dpx / px + kabs * d * d * d / px);
    let log_m = log_m(t, fx, ws) - log_m(t, fe, ws) - ws.delta * d.ln();
    Ok(ExchangeRatios { p, p_prime, log_m })
}
