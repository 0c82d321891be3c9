//! Time integration of the per-wavenumber systems and their energies.
//!
//! The state is advanced in the raw unknowns `(Theta_k, Q_k)`. Symmetric
//! variables `Z1 = m^{-1} p^{-1/4} Theta`, `Z2 = m^{-1} p^{1/4} i sqrt(R) Q`
//! are formed on demand for the energy functionals.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{FrequencyGrid, SpectralField};
use crate::multipliers::{bl_from_parts, eval_p, eval_p_prime, Frequency};
use crate::spectral_ops::{NeumannStats, SpectralOperators};
use crate::weights::{log_m, WeightSet};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Growth factor of the field norm that aborts an integration.
pub const BLOWUP_FACTOR: f64 = 1e6;
/// Largest admissible `dt * |k| * max(R, 1 + beta)`.
pub const STABILITY_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RawState {
    pub t: f64,
    pub theta: SpectralField,
    pub q: SpectralField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricState {
    pub t: f64,
    pub z1: SpectralField,
    pub z2: SpectralField,
}

impl RawState {
    pub fn new(t: f64, theta: SpectralField, q: SpectralField) -> Self {
        assert_eq!(theta.len(), q.len(), "theta and q must share the grid");
        Self { t, theta, q }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(0.0, SpectralField::zeros(n), SpectralField::zeros(n))
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.q.is_finite()
    }

    /// Unweighted `l^2` size of the pair, used only for blow-up detection.
    fn size(&self) -> f64 {
        self.theta
            .iter()
            .chain(self.q.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Symmetric variables with weight `m`; `None` means `m = 1`.
    pub fn to_symmetric(&self, k: i64, etas: &[f64], r: f64, weights: Option<&WeightSet>) -> SymmetricState {
        let sr = r.sqrt();
        let mut z1 = SpectralField::zeros(etas.len());
        let mut z2 = SpectralField::zeros(etas.len());
        for (j, &eta) in etas.iter().enumerate() {
            let f = Frequency::new(k, eta).expect("k is nonzero");
            let p = eval_p(self.t, f);
            let inv_m = weights.map_or(1.0, |ws| (-log_m(self.t, f, ws)).exp());
            z1[j] = self.theta[j] * (inv_m * p.powf(-0.25));
            z2[j] = self.q[j] * I * (inv_m * p.powf(0.25) * sr);
        }
        SymmetricState { t: self.t, z1, z2 }
    }
}

impl SymmetricState {
    pub fn to_raw(&self, k: i64, etas: &[f64], r: f64, weights: Option<&WeightSet>) -> RawState {
        let sr = r.sqrt();
        let mut theta = SpectralField::zeros(etas.len());
        let mut q = SpectralField::zeros(etas.len());
        for (j, &eta) in etas.iter().enumerate() {
            let f = Frequency::new(k, eta).expect("k is nonzero");
            let p = eval_p(self.t, f);
            let m = weights.map_or(1.0, |ws| log_m(self.t, f, ws).exp());
            theta[j] = self.z1[j] * (m * p.powf(0.25));
            q[j] = self.z2[j] * (m * p.powf(-0.25) / sr) / I;
        }
        RawState::new(self.t, theta, q)
    }
}

/// A linear system `d/dt (a, b) = F(t, a, b)` on a fixed set of frequencies.
pub trait Dynamics {
    fn rhs(&mut self, t: f64, a: &SpectralField, b: &SpectralField) -> Result<(SpectralField, SpectralField)>;

    /// `|k| max(R, 1 + beta)`, the rate entering the step-size pre-check.
    fn stability_rate(&self) -> f64;
}

/// Couette right-hand side, pointwise in `eta`:
/// `d_t Theta = -i k R Q + i k beta B_L Theta / p`, `d_t Q = -i k B_L Theta / p`.
pub fn rhs_couette(
    k: i64,
    etas: &[f64],
    t: f64,
    theta: &SpectralField,
    q: &SpectralField,
    beta: f64,
    r: f64,
) -> (SpectralField, SpectralField) {
    let kf = k as f64;
    let ik = Complex64::new(0.0, kf);
    let mut dtheta = SpectralField::zeros(etas.len());
    let mut dq = SpectralField::zeros(etas.len());
    for (j, &eta) in etas.iter().enumerate() {
        let a = eta - kf * t;
        let p = kf * kf + a * a;
        let bl_over_p = bl_from_parts(p, a, beta) / p;
        dtheta[j] = -ik * r * q[j] + ik * beta * bl_over_p * theta[j];
        dq[j] = -ik * bl_over_p * theta[j];
    }
    (dtheta, dq)
}

/// Symmetrized Couette system in `(Z1, Z2)` with `m = 1`.
pub fn rhs_symmetric_couette(
    k: i64,
    etas: &[f64],
    t: f64,
    z1: &SpectralField,
    z2: &SpectralField,
    beta: f64,
    r: f64,
) -> (SpectralField, SpectralField) {
    let kf = k as f64;
    let sr = r.sqrt();
    let mut d1 = SpectralField::zeros(etas.len());
    let mut d2 = SpectralField::zeros(etas.len());
    for (j, &eta) in etas.iter().enumerate() {
        let a = eta - kf * t;
        let p = kf * kf + a * a;
        let pp = -2.0 * kf * a;
        let bl = bl_from_parts(p, a, beta);
        let diag = pp / (4.0 * p);
        let off = kf * sr / p.sqrt();
        d1[j] = -diag * z1[j] - off * z2[j] + I * (beta * kf / p) * bl * z1[j];
        d2[j] = off * bl * z1[j] + diag * z2[j];
    }
    (d1, d2)
}

/// Near-Couette right-hand side with `v = Delta_t^{-1} B_t Theta`:
/// `d_t Theta = -i k R Q + i k [(b - beta (g - 1)) * v - beta v]`, `d_t Q = i k v`.
pub fn rhs_full(
    ops: &SpectralOperators,
    t: f64,
    theta: &SpectralField,
    q: &SpectralField,
    r: f64,
) -> Result<(SpectralField, SpectralField, NeumannStats)> {
    let grid = ops.grid();
    let ik = Complex64::new(0.0, grid.kf());
    let beta = ops.beta();
    let (bt, mut stats) = ops.apply_bt(t, theta)?;
    let (v, s2) = ops.apply_inv_delta_t(t, &bt)?;
    stats.merge(&s2);
    let mut coupling = ops.apply_b_coefficient(&v);
    if beta != 0.0 {
        coupling.axpy(Complex64::new(-beta, 0.0), &ops.apply_g_minus_one(&v));
        coupling.axpy(Complex64::new(-beta, 0.0), &v);
    }
    let mut dtheta = q.scale(-ik * r);
    dtheta.axpy(ik, &coupling);
    let dq = v.scale(ik);
    Ok((
        dtheta.ensure_finite("near-Couette right-hand side")?,
        dq.ensure_finite("near-Couette right-hand side")?,
        stats,
    ))
}

/// Exact Couette system on an arbitrary set of `eta` values.
#[derive(Debug, Clone)]
pub struct CouetteDynamics {
    pub k: i64,
    pub etas: Vec<f64>,
    pub beta: f64,
    pub r: f64,
}

impl Dynamics for CouetteDynamics {
    fn rhs(&mut self, t: f64, a: &SpectralField, b: &SpectralField) -> Result<(SpectralField, SpectralField)> {
        Ok(rhs_couette(self.k, &self.etas, t, a, b, self.beta, self.r))
    }

    fn stability_rate(&self) -> f64 {
        (self.k as f64).abs() * self.r.max(1.0 + self.beta)
    }
}

/// Symmetrized Couette system, for cross-checking [`CouetteDynamics`].
#[derive(Debug, Clone)]
pub struct SymmetricCouetteDynamics(pub CouetteDynamics);

impl Dynamics for SymmetricCouetteDynamics {
    fn rhs(&mut self, t: f64, a: &SpectralField, b: &SpectralField) -> Result<(SpectralField, SpectralField)> {
        let c = &self.0;
        Ok(rhs_symmetric_couette(c.k, &c.etas, t, a, b, c.beta, c.r))
    }

    fn stability_rate(&self) -> f64 {
        self.0.stability_rate()
    }
}

/// Full near-Couette system; accumulates solver statistics over the run.
#[derive(Debug)]
pub struct NearCouetteDynamics<'a> {
    pub ops: &'a SpectralOperators,
    pub r: f64,
    pub stats: NeumannStats,
}

impl<'a> NearCouetteDynamics<'a> {
    pub fn new(ops: &'a SpectralOperators, r: f64) -> Self {
        Self {
            ops,
            r,
            stats: NeumannStats::default(),
        }
    }
}

impl Dynamics for NearCouetteDynamics<'_> {
    fn rhs(&mut self, t: f64, a: &SpectralField, b: &SpectralField) -> Result<(SpectralField, SpectralField)> {
        let (da, db, stats) = rhs_full(self.ops, t, a, b, self.r)?;
        self.stats.merge(&stats);
        Ok((da, db))
    }

    fn stability_rate(&self) -> f64 {
        self.ops.grid().kf().abs() * self.r.max(1.0 + self.ops.beta())
    }
}

/// Time stepping parameters. Snapshots are kept every `record_every` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub t_max: f64,
    pub dt: f64,
    pub record_every: usize,
}

impl Integration {
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    fn validate(&self, rate: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(invalid("t_max", format!("must be >= 0, got {}", self.t_max)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        let steps = self.t_max / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(invalid(
                "dt",
                format!("t_max = {} is not a multiple of dt = {}", self.t_max, self.dt),
            ));
        }
        if self.dt * rate > STABILITY_MARGIN {
            return Err(invalid(
                "dt",
                format!(
                    "dt * |k| * max(R, 1 + beta) = {:.3} exceeds {STABILITY_MARGIN}",
                    self.dt * rate
                ),
            ));
        }
        Ok(())
    }
}

/// Classical RK4 from `initial.t`. The returned history starts with the
/// initial state and always ends with the final one. Times are `t0 + n dt`.
pub fn evolve(initial: RawState, dynamics: &mut dyn Dynamics, schedule: Integration) -> Result<Vec<RawState>> {
    schedule.validate(dynamics.stability_rate())?;
    if !initial.is_finite() {
        return Err(Error::NonFinite("initial data"));
    }
    let steps = schedule.steps();
    let dt = schedule.dt;
    let t0 = initial.t;
    let bound = BLOWUP_FACTOR * initial.size();
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let sixth = Complex64::new(dt / 6.0, 0.0);
    let third = Complex64::new(dt / 3.0, 0.0);

    let mut history = Vec::with_capacity(steps / schedule.record_every + 2);
    let mut state = initial;
    history.push(state.clone());
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        let (a, b) = (&state.theta, &state.q);
        let (k1a, k1b) = dynamics.rhs(t, a, b)?;
        let mut a2 = a.clone();
        a2.axpy(half, &k1a);
        let mut b2 = b.clone();
        b2.axpy(half, &k1b);
        let (k2a, k2b) = dynamics.rhs(t + 0.5 * dt, &a2, &b2)?;
        let mut a3 = a.clone();
        a3.axpy(half, &k2a);
        let mut b3 = b.clone();
        b3.axpy(half, &k2b);
        let (k3a, k3b) = dynamics.rhs(t + 0.5 * dt, &a3, &b3)?;
        let mut a4 = a.clone();
        a4.axpy(full, &k3a);
        let mut b4 = b.clone();
        b4.axpy(full, &k3b);
        let (k4a, k4b) = dynamics.rhs(t + dt, &a4, &b4)?;

        let mut next_a = a.clone();
        let mut next_b = b.clone();
        for (w, ka, kb) in [
            (sixth, &k1a, &k1b),
            (third, &k2a, &k2b),
            (third, &k3a, &k3b),
            (sixth, &k4a, &k4b),
        ] {
            next_a.axpy(w, ka);
            next_b.axpy(w, kb);
        }
        state = RawState::new(t0 + (n + 1) as f64 * dt, next_a, next_b);

        let size = state.size();
        if !size.is_finite() || size > bound {
            return Err(Error::StepUnstable {
                t: state.t,
                norm: size,
                bound,
            });
        }
        if (n + 1) % schedule.record_every == 0 || n + 1 == steps {
            history.push(state.clone());
        }
    }
    Ok(history)
}

/// Per-`eta` Couette energy density and `|Z1|^2 + |Z2|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseEnergy {
    pub density: Vec<f64>,
    pub z_squared: Vec<f64>,
}

/// `E(eta) = 1/2 [|Z1|^2 + |Z2|^2 + Re(p' p^{-1/2} Z1 conj(Z2)) / (2 k sqrt(R))]`.
pub fn energy_density(k: i64, eta: f64, t: f64, z1: Complex64, z2: Complex64, r: f64) -> f64 {
    let f = Frequency::new(k, eta).expect("k is nonzero");
    let (p, pp) = (eval_p(t, f), eval_p_prime(t, f));
    let cross = (z1 * z2.conj()).re * pp / p.sqrt() / (2.0 * k as f64 * r.sqrt());
    0.5 * (z1.norm_sqr() + z2.norm_sqr() + cross)
}

/// Coercivity constants `1/2 (1 -+ 1/(2 sqrt(R)))`.
pub fn coercivity_constants(r: f64) -> (f64, f64) {
    let c = 1.0 / (2.0 * r.sqrt());
    (0.5 * (1.0 - c), 0.5 * (1.0 + c))
}

pub fn pointwise_energy(k: i64, etas: &[f64], state: &RawState, r: f64) -> PointwiseEnergy {
    let z = state.to_symmetric(k, etas, r, None);
    let density = etas
        .iter()
        .enumerate()
        .map(|(j, &eta)| energy_density(k, eta, state.t, z.z1[j], z.z2[j], r))
        .collect();
    let z_squared = (0..etas.len())
        .map(|j| z.z1[j].norm_sqr() + z.z2[j].norm_sqr())
        .collect();
    PointwiseEnergy { density, z_squared }
}

/// Weighted functional `E_s` in log form; `value` underflows to zero once
/// the weight `m` becomes large, `log_value` does not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEnergy {
    pub value: f64,
    pub log_value: f64,
}

/// `E_s = 1/2 [||Z1||_s^2 + ||Z2||_s^2 + Re<p' p^{-1/2} Z1, Z2>_s / (2 k sqrt(R))]`
/// with `Z` weighted by `m = m1 w^delta` and `||.||_s` carrying `<k, eta>^{2s}`.
pub fn weighted_energy_es(grid: &FrequencyGrid, state: &RawState, ws: &WeightSet, r: f64, s: f64) -> WeightedEnergy {
    let k = grid.k();
    let kf = grid.kf();
    let unweighted = pointwise_energy(k, grid.etas(), state, r);
    // log of each quadrature term, with m^{-2} kept in exponent form.
    let logs: Vec<f64> = grid
        .etas()
        .iter()
        .enumerate()
        .map(|(j, &eta)| {
            let d = unweighted.density[j] * grid.trapezoid_weight(j);
            if d <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let f = Frequency::new(k, eta).expect("k is nonzero");
            let sobolev = s * (1.0 + kf * kf + eta * eta).ln();
            d.ln() + sobolev - 2.0 * log_m(state.t, f, ws)
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return WeightedEnergy {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
        };
    }
    let log_value = peak + logs.iter().map(|l| (l - peak).exp()).sum::<f64>().ln();
    WeightedEnergy {
        value: log_value.exp(),
        log_value,
    }
}

/// Energies along a recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub es: Vec<f64>,
    pub log_es: Vec<f64>,
    /// Extrema of `E(t; eta) / E(0; eta)` over times and significant points.
    pub ratio_max: f64,
    pub ratio_min: f64,
}

/// Points whose initial energy share is below this fraction are ignored in
/// the per-`eta` ratios.
pub const RATIO_MASS_FLOOR: f64 = 1e-8;

impl EnergyReport {
    /// Without weights (possible only for `R <= 1/4`) the `E_s` columns are NaN.
    pub fn from_history(grid: &FrequencyGrid, history: &[RawState], r: f64, ws: Option<&WeightSet>, s: f64) -> Self {
        let k = grid.k();
        let (lo_c, hi_c) = coercivity_constants(r);
        let mut report = EnergyReport {
            times: Vec::with_capacity(history.len()),
            energy: Vec::with_capacity(history.len()),
            lower: Vec::with_capacity(history.len()),
            upper: Vec::with_capacity(history.len()),
            es: Vec::with_capacity(history.len()),
            log_es: Vec::with_capacity(history.len()),
            ratio_max: f64::NAN,
            ratio_min: f64::NAN,
        };
        let mut initial: Option<(Vec<f64>, Vec<bool>)> = None;
        let (mut rmax, mut rmin) = (f64::NEG_INFINITY, f64::INFINITY);
        for state in history {
            let pe = pointwise_energy(k, grid.etas(), state, r);
            let total = grid.integrate(pe.density.iter().copied());
            let zsq = grid.integrate(pe.z_squared.iter().copied());
            let (e0, significant) = initial.get_or_insert_with(|| {
                let floor = RATIO_MASS_FLOOR * total;
                let sig = pe
                    .density
                    .iter()
                    .map(|d| d * grid.deta() >= floor && *d > 0.0)
                    .collect();
                (pe.density.clone(), sig)
            });
            for j in 0..grid.len() {
                if significant[j] {
                    let ratio = pe.density[j] / e0[j];
                    rmax = rmax.max(ratio);
                    rmin = rmin.min(ratio);
                }
            }
            let es = ws.map_or(
                WeightedEnergy {
                    value: f64::NAN,
                    log_value: f64::NAN,
                },
                |ws| weighted_energy_es(grid, state, ws, r, s),
            );
            report.times.push(state.t);
            report.energy.push(total);
            report.lower.push(lo_c * zsq);
            report.upper.push(hi_c * zsq);
            report.es.push(es.value);
            report.log_es.push(es.log_value);
        }
        if rmax.is_finite() {
            report.ratio_max = rmax;
            report.ratio_min = rmin;
        }
        report
    }

    /// `E_s(t_{n+1}) <= E_s(t_n) (1 + rel_tol)` at every recorded step,
    /// compared in log form so underflow of `E_s` is harmless.
    pub fn es_monotone(&self, rel_tol: f64) -> bool {
        let slack = rel_tol.ln_1p();
        self.log_es
            .windows(2)
            .all(|w| w[1] == f64::NEG_INFINITY || w[1] <= w[0] + slack)
    }

    /// Largest relative step-to-step increase of `E_s`.
    pub fn es_max_relative_increase(&self) -> f64 {
        self.log_es
            .windows(2)
            .filter(|w| w[1].is_finite() && w[0].is_finite())
            .map(|w| (w[1] - w[0]).exp_m1())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn coercivity_holds(&self) -> bool {
        self.energy
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(e, (lo, hi))| *lo <= e * (1.0 + 1e-12) && *e <= hi * (1.0 + 1e-12))
    }
}

/// `Gamma = exp(4 pi (1 + beta)^2 / (2 sqrt(R) - 1))`, the per-`eta` energy envelope.
pub fn couette_energy_envelope(r: f64, beta: f64) -> f64 {
    (4.0 * std::f64::consts::PI * (1.0 + beta).powi(2) / (2.0 * r.sqrt() - 1.0)).exp()
}
