//! Background shear profiles near Couette and their Fourier data.
//!
//! A profile is `U(y) = y + a * phi((y - y0) / sigma)` with the Gaussian
//! primitive `phi(x) = int_{-inf}^x exp(-s^2) ds`, so `U' = 1 + (a/sigma) e^{-x^2}`
//! and `U'' = -(2a/sigma^2) x e^{-x^2}`. Moving-frame coefficients are
//! `g = U' o U^{-1}` and `b = U'' o U^{-1}`.
//!
//! Transforms follow `f^(eta) = int f(Y) e^{-i eta Y} dY`, so Plancherel reads
//! `||f||_{L^2}^2 = (1 / 2 pi) int |f^|^2 d eta`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::FrequencyGrid;

/// Half-width of the `y`-window, in units of `sigma`, outside of which the
/// bump is below `e^{-100}`.
const Y_WINDOW: f64 = 10.0;
/// Tolerance on `Y` for the numeric inversion of `U`.
const INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Couette,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShearProfile {
    kind: ProfileKind,
    amplitude: f64,
    sigma: f64,
    center: f64,
    epsilon: f64,
    epsilon_physical: f64,
}

pub fn build_profile(kind: ProfileKind, amplitude: f64, sigma: f64, center: f64) -> Result<ShearProfile> {
    if kind == ProfileKind::Couette {
        return Ok(ShearProfile {
            kind,
            amplitude: 0.0,
            sigma: 1.0,
            center: 0.0,
            epsilon: 0.0,
            epsilon_physical: 0.0,
        });
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    if !amplitude.is_finite() || !center.is_finite() {
        return Err(invalid("amplitude", "amplitude and center must be finite"));
    }
    // sup |phi'| = 1
    let ratio = amplitude.abs() / sigma;
    if ratio >= 1.0 {
        return Err(Error::NonMonotoneProfile { ratio });
    }
    let mut profile = ShearProfile {
        kind,
        amplitude,
        sigma,
        center,
        epsilon: 0.0,
        epsilon_physical: 0.0,
    };
    profile.epsilon = profile.measure_epsilon(0.0);
    profile.epsilon_physical = profile.measure_epsilon_physical();
    Ok(profile)
}

impl ShearProfile {
    pub fn couette() -> Self {
        build_profile(ProfileKind::Couette, 0.0, 1.0, 0.0).expect("couette is always valid")
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// `||g - 1||_5 + ||b||_4`, the smallness parameter at `s = 0`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `||U' - 1||_{H^6} + ||U''||_{H^5}` measured in the original variable `y`.
    pub fn epsilon_physical(&self) -> f64 {
        self.epsilon_physical
    }

    /// `true` when every coefficient is exactly that of Couette.
    pub fn is_trivial(&self) -> bool {
        self.kind == ProfileKind::Couette || self.amplitude == 0.0
    }

    /// Lower bound on `U'`; positive for every constructed profile.
    pub fn min_slope(&self) -> f64 {
        1.0 + (self.amplitude / self.sigma).min(0.0)
    }

    fn x(&self, y: f64) -> f64 {
        (y - self.center) / self.sigma
    }

    pub fn u(&self, y: f64) -> f64 {
        if self.is_trivial() {
            return y;
        }
        let x = self.x(y);
        y + self.amplitude * 0.5 * PI.sqrt() * (1.0 + libm::erf(x))
    }

    pub fn u_prime(&self, y: f64) -> f64 {
        if self.is_trivial() {
            return 1.0;
        }
        let x = self.x(y);
        1.0 + self.amplitude / self.sigma * (-x * x).exp()
    }

    pub fn u_second(&self, y: f64) -> f64 {
        if self.is_trivial() {
            return 0.0;
        }
        let x = self.x(y);
        -2.0 * self.amplitude / (self.sigma * self.sigma) * x * (-x * x).exp()
    }

    /// Solves `U(y) = big_y` by safeguarded Newton iteration.
    pub fn inverse(&self, big_y: f64) -> f64 {
        if self.is_trivial() {
            return big_y;
        }
        // U(y) - y lies between 0 and a sqrt(pi).
        let shift = self.amplitude * PI.sqrt();
        let (mut lo, mut hi) = (big_y - shift.max(0.0), big_y - shift.min(0.0));
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.u(y) - big_y;
            if r.abs() <= INVERSION_TOL {
                return y;
            }
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let newton = y - r / self.u_prime(y);
            y = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= INVERSION_TOL * 1e-3 {
                return y;
            }
        }
        y
    }

    /// `g(Y) = U'(U^{-1}(Y))`
    pub fn g(&self, big_y: f64) -> f64 {
        self.u_prime(self.inverse(big_y))
    }

    /// `b(Y) = U''(U^{-1}(Y))`
    pub fn b(&self, big_y: f64) -> f64 {
        self.u_second(self.inverse(big_y))
    }

    /// Uniform `Y` nodes covering the bump, fine enough for transforms up
    /// to `|eta| <= eta_extent`.
    fn y_nodes(&self, eta_extent: f64) -> (Vec<f64>, f64) {
        let lo = self.u(self.center - Y_WINDOW * self.sigma);
        let hi = self.u(self.center + Y_WINDOW * self.sigma);
        let h_max = (self.sigma / 10.0).min(2.0 * PI / (eta_extent + 30.0 / self.sigma));
        let count = ((hi - lo) / h_max).ceil() as usize + 1;
        let h = (hi - lo) / (count - 1) as f64;
        ((0..count).map(|j| lo + j as f64 * h).collect(), h)
    }

    /// Samples of `g - 1`, `g^2 - 1`, `b` on the transform nodes.
    fn coefficient_samples(&self, ys: &[f64]) -> [Vec<f64>; 3] {
        let mut g1 = Vec::with_capacity(ys.len());
        let mut g2 = Vec::with_capacity(ys.len());
        let mut bb = Vec::with_capacity(ys.len());
        for &big_y in ys {
            let y = self.inverse(big_y);
            let g = self.u_prime(y);
            g1.push(g - 1.0);
            g2.push(g * g - 1.0);
            bb.push(self.u_second(y));
        }
        [g1, g2, bb]
    }

    /// `||g - 1||_{s+5} + ||b||_{s+4}` on a dedicated fine frequency grid.
    pub fn measure_epsilon(&self, s: f64) -> f64 {
        if self.is_trivial() {
            return 0.0;
        }
        let etas = self.norm_etas();
        let (ys, h) = self.y_nodes(etas[etas.len() - 1]);
        let [g1, _, bb] = self.coefficient_samples(&ys);
        let g1_hat = transform_samples(&ys, &g1, h, &etas);
        let b_hat = transform_samples(&ys, &bb, h, &etas);
        sobolev_norm(&g1_hat, &etas, s + 5.0) + sobolev_norm(&b_hat, &etas, s + 4.0)
    }

    fn measure_epsilon_physical(&self) -> f64 {
        let etas = self.norm_etas();
        let lo = self.center - Y_WINDOW * self.sigma;
        let hi = self.center + Y_WINDOW * self.sigma;
        let h_max = (self.sigma / 10.0).min(2.0 * PI / (etas[etas.len() - 1] + 30.0 / self.sigma));
        let count = ((hi - lo) / h_max).ceil() as usize + 1;
        let h = (hi - lo) / (count - 1) as f64;
        let ys: Vec<f64> = (0..count).map(|j| lo + j as f64 * h).collect();
        let d1: Vec<f64> = ys.iter().map(|&y| self.u_prime(y) - 1.0).collect();
        let d2: Vec<f64> = ys.iter().map(|&y| self.u_second(y)).collect();
        sobolev_norm(&transform_samples(&ys, &d1, h, &etas), &etas, 6.0)
            + sobolev_norm(&transform_samples(&ys, &d2, h, &etas), &etas, 5.0)
    }

    fn norm_etas(&self) -> Vec<f64> {
        let extent = 30.0 / self.sigma;
        let n = 4001;
        let d = 2.0 * extent / (n - 1) as f64;
        (0..n).map(|j| -extent + j as f64 * d).collect()
    }
}

/// Trapezoid approximation of `int f(Y) e^{-i eta Y} dY` from uniform samples.
pub fn transform_samples(ys: &[f64], values: &[f64], h: f64, etas: &[f64]) -> Vec<Complex64> {
    let last = ys.len().saturating_sub(1);
    etas.iter()
        .map(|&eta| {
            ys.iter()
                .zip(values)
                .enumerate()
                .map(|(j, (&y, &v))| {
                    let w = if j == 0 || j == last { 0.5 * h } else { h };
                    Complex64::from_polar(w * v, -eta * y)
                })
                .sum()
        })
        .collect()
}

/// `(int <eta>^{2s} |f^(eta)|^2 d eta)^{1/2}` by the trapezoid rule on the
/// given (sorted) frequencies.
pub fn sobolev_norm(fhat: &[Complex64], etas: &[f64], order: f64) -> f64 {
    debug_assert_eq!(fhat.len(), etas.len());
    let integrand: Vec<f64> = fhat
        .iter()
        .zip(etas)
        .map(|(f, &e)| (1.0 + e * e).powf(order) * f.norm_sqr())
        .collect();
    let mut total = 0.0;
    for j in 1..etas.len() {
        total += 0.5 * (etas[j] - etas[j - 1]) * (integrand[j] + integrand[j - 1]);
    }
    total.sqrt()
}

/// Fourier data of a profile sampled at the lags `l * deta`,
/// `|l| <= n - 1`, of a grid with `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpectrum {
    n: usize,
    deta: f64,
    trivial: bool,
    g_minus_one: Vec<Complex64>,
    g2_minus_one: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl ProfileSpectrum {
    /// The all-zero spectrum of Couette on a grid.
    pub fn couette(grid: &FrequencyGrid) -> Self {
        let len = 2 * grid.len() - 1;
        let zero = vec![Complex64::new(0.0, 0.0); len];
        Self {
            n: grid.len(),
            deta: grid.deta(),
            trivial: true,
            g_minus_one: zero.clone(),
            g2_minus_one: zero.clone(),
            b: zero,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn grid_len(&self) -> usize {
        self.n
    }

    pub fn deta(&self) -> f64 {
        self.deta
    }

    /// Lag frequencies `l * deta`, `l = -(n-1) ..= n-1`.
    pub fn lag_etas(&self) -> Vec<f64> {
        let n = self.n as i64;
        (-(n - 1)..n).map(|l| l as f64 * self.deta).collect()
    }

    /// Transform of `g - 1` at the lags, index `l + n - 1`.
    pub fn g_minus_one(&self) -> &[Complex64] {
        &self.g_minus_one
    }

    /// Transform of `g^2 - 1` at the lags.
    pub fn g2_minus_one(&self) -> &[Complex64] {
        &self.g2_minus_one
    }

    /// Transform of `b` at the lags.
    pub fn b(&self) -> &[Complex64] {
        &self.b
    }

    /// Value of a lag array at integer lag `l`.
    pub fn lag(&self, arr: &[Complex64], l: i64) -> Complex64 {
        arr[(l + self.n as i64 - 1) as usize]
    }
}

pub fn sample_spectrum(profile: &ShearProfile, grid: &FrequencyGrid) -> Result<ProfileSpectrum> {
    if profile.is_trivial() {
        return Ok(ProfileSpectrum::couette(grid));
    }
    let sigma = profile.sigma();
    if sigma * grid.deta() > 0.25 {
        return Err(Error::UnderResolved(format!(
            "sigma * deta = {} exceeds 1/4",
            sigma * grid.deta()
        )));
    }
    if grid.eta_max() * sigma < 20.0 {
        return Err(Error::UnderResolved(format!(
            "eta_max * sigma = {} is below 20",
            grid.eta_max() * sigma
        )));
    }
    let mut spec = ProfileSpectrum::couette(grid);
    spec.trivial = false;
    let lags = spec.lag_etas();
    let (ys, h) = profile.y_nodes(lags[lags.len() - 1]);
    let [g1, g2, bb] = profile.coefficient_samples(&ys);
    spec.g_minus_one = transform_samples(&ys, &g1, h, &lags);
    spec.g2_minus_one = transform_samples(&ys, &g2, h, &lags);
    spec.b = transform_samples(&ys, &bb, h, &lags);
    Ok(spec)
}
