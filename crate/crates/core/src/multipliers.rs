//! Time-dependent Fourier multipliers of the moving-frame operators.
//!
//! At a fixed x-wavenumber `k` and Y-frequency `eta` the linearized operator
//! `-Delta_L` has symbol `p(t) = k^2 + (eta - k t)^2`. The stratification
//! correction `B_L = (1 + i beta (eta - k t) / p)^{-1}` is also a pure
//! multiplier. Everything here is a closed-form function of `(t; k, eta)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative slack applied to the analytic bound predicates.
pub const BOUND_SLACK: f64 = 1.0 + 1e-12;

/// A point `(k, eta)` of frequency space with `k != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    k: i64,
    eta: f64,
}

impl Frequency {
    pub fn new(k: i64, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        Ok(Self { k, eta })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The critical time `eta / k` at which `p` attains its minimum `k^2`.
    pub fn critical_time(&self) -> f64 {
        self.eta / self.kf()
    }

    /// `eta - k t`, the sheared Y-frequency.
    #[inline]
    pub fn sheared(&self, t: f64) -> f64 {
        self.eta - self.kf() * t
    }
}

/// All three multipliers at one `(t; k, eta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierValue {
    pub p: f64,
    pub p_prime: f64,
    pub bl: Complex64,
}

impl MultiplierValue {
    pub fn at(t: f64, f: Frequency, beta: f64) -> Self {
        Self {
            p: eval_p(t, f),
            p_prime: eval_p_prime(t, f),
            bl: eval_bl(t, f, beta),
        }
    }
}

/// Symbol of `-Delta_L`: `k^2 + (eta - k t)^2`.
#[inline]
pub fn eval_p(t: f64, f: Frequency) -> f64 {
    let k = f.kf();
    let a = f.sheared(t);
    k * k + a * a
}

/// Time derivative of [`eval_p`]: `-2 k (eta - k t)`.
#[inline]
pub fn eval_p_prime(t: f64, f: Frequency) -> f64 {
    -2.0 * f.kf() * f.sheared(t)
}

/// Symbol of `B_L`, the reciprocal of `1 + i beta (eta - k t) / p`.
///
/// Evaluated through the split real/imaginary form so that `beta = 0` and
/// `t = eta / k` return exactly one.
#[inline]
pub fn eval_bl(t: f64, f: Frequency, beta: f64) -> Complex64 {
    bl_from_parts(eval_p(t, f), f.sheared(t), beta)
}

#[inline]
pub(crate) fn bl_from_parts(p: f64, sheared: f64, beta: f64) -> Complex64 {
    let bs = beta * sheared;
    let denom = p * p + bs * bs;
    Complex64::new(p * p / denom, -beta * p * sheared / denom)
}

/// Outcome of the four elementary bounds on `B_L`, with the evaluated sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlBoundReport {
    /// `|B_L| <= 1 + beta`
    pub modulus: bool,
    /// `|Im B_L| <= beta / sqrt(p)`
    pub imaginary: bool,
    /// `|Re(B_L - 1)| <= beta^2 / p`
    pub real_defect: bool,
    /// `|B_L - 1| <= (beta + beta^2) / sqrt(p)`
    pub defect: bool,
    pub abs_bl: f64,
    pub abs_im: f64,
    pub abs_re_defect: f64,
    pub abs_defect: f64,
    pub p: f64,
}

impl BlBoundReport {
    pub fn all_hold(&self) -> bool {
        self.modulus && self.imaginary && self.real_defect && self.defect
    }
}

pub fn bl_bound_report(t: f64, f: Frequency, beta: f64) -> BlBoundReport {
    let p = eval_p(t, f);
    let bl = eval_bl(t, f, beta);
    let sqrt_p = p.sqrt();
    let abs_bl = bl.norm();
    let abs_im = bl.im.abs();
    let abs_re_defect = (bl.re - 1.0).abs();
    let abs_defect = (bl - 1.0).norm();
    BlBoundReport {
        modulus: abs_bl <= (1.0 + beta) * BOUND_SLACK,
        imaginary: abs_im <= beta / sqrt_p * BOUND_SLACK,
        real_defect: abs_re_defect <= beta * beta / p * BOUND_SLACK,
        defect: abs_defect <= (beta + beta * beta) / sqrt_p * BOUND_SLACK,
        abs_bl,
        abs_im,
        abs_re_defect,
        abs_defect,
        p,
    }
}

/// Checks `1/sqrt(1+beta^2) <= |B_L| <= 1` with the standard slack.
pub fn bl_in_sandwich(t: f64, f: Frequency, beta: f64) -> bool {
    let abs = eval_bl(t, f, beta).norm();
    let lower = 1.0 / (1.0 + beta * beta).sqrt();
    abs <= BOUND_SLACK && abs * BOUND_SLACK >= lower
}

/// Closed form of `int_0^T k^2 / p(t) dt = arctan(eta/k) - arctan(eta/k - T)`.
pub fn integrated_kp_ratio(t_end: f64, f: Frequency) -> f64 {
    let c = f.critical_time();
    c.atan() - (c - t_end).atan()
}
