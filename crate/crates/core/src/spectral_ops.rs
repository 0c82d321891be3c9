//! Moving-frame operators on the truncated frequency grid.
//!
//! Multiplication by a profile coefficient `c(Y)` acts in frequency space as
//! the linear convolution `(1/2pi) int c^(eta - xi) u(xi) d xi`, truncated to
//! the grid with zero extension. The resolvents `T_L = (I - T_eps)^{-1}` and
//! `T_B = (I - B_eps)^{-1}` are computed by fixed-point iteration
//! `u <- f + K u` with a relative `L^2` residual test.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, SpectralField};
use crate::multipliers::bl_from_parts;
use crate::shear::ProfileSpectrum;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Stopping rule for the Neumann iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Convergence record of one or more Neumann solves.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeumannStats {
    pub solves: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
    /// Largest ratio of successive residuals seen.
    pub max_contraction: f64,
}

impl NeumannStats {
    pub fn merge(&mut self, other: &NeumannStats) {
        self.solves += other.solves;
        self.max_iterations = self.max_iterations.max(other.max_iterations);
        self.max_residual = self.max_residual.max(other.max_residual);
        self.max_contraction = self.max_contraction.max(other.max_contraction);
    }
}

/// Linear convolution with a fixed kernel sampled at the grid lags.
pub struct ConvolutionKernel {
    n: usize,
    scale: f64,
    lags: Vec<Complex64>,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    zero: bool,
}

impl std::fmt::Debug for ConvolutionKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionKernel")
            .field("n", &self.n)
            .field("scale", &self.scale)
            .field("zero", &self.zero)
            .finish()
    }
}

impl ConvolutionKernel {
    /// `lags[l + n - 1]` is the kernel at lag `l * deta`.
    pub fn new(lags: &[Complex64], n: usize, deta: f64) -> Self {
        assert_eq!(lags.len(), 2 * n - 1, "kernel needs 2n - 1 lags");
        let fft_len = (3 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![ZERO; fft_len];
        spectrum[..lags.len()].copy_from_slice(lags);
        forward.process(&mut spectrum);
        Self {
            n,
            scale: deta / (2.0 * PI),
            lags: lags.to_vec(),
            spectrum,
            forward,
            inverse,
            zero: lags.iter().all(|z| *z == ZERO),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// `out_i = (deta / 2pi) sum_j K(i - j) u_j`, evaluated by FFT.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(u.len(), self.n);
        if self.zero {
            return vec![ZERO; self.n];
        }
        let len = self.spectrum.len();
        let mut buf = vec![ZERO; len];
        buf[..self.n].copy_from_slice(u);
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let norm = self.scale / len as f64;
        buf[self.n - 1..2 * self.n - 1].iter().map(|z| z * norm).collect()
    }

    /// Same sum evaluated directly in `O(n^2)`.
    pub fn apply_direct(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let acc: Complex64 = (0..n).map(|j| self.lags[i + n - 1 - j] * u[j]).sum();
                acc * self.scale
            })
            .collect()
    }
}

/// All moving-frame operators for one grid, profile and `beta`.
#[derive(Debug)]
pub struct SpectralOperators {
    grid: FrequencyGrid,
    beta: f64,
    settings: SolverSettings,
    trivial: bool,
    g_minus_one: ConvolutionKernel,
    g2_minus_one: ConvolutionKernel,
    b: ConvolutionKernel,
}

impl SpectralOperators {
    pub fn new(grid: FrequencyGrid, spectrum: &ProfileSpectrum, beta: f64, settings: SolverSettings) -> Self {
        assert_eq!(spectrum.grid_len(), grid.len(), "spectrum sampled on another grid");
        let (n, deta) = (grid.len(), grid.deta());
        Self {
            beta,
            settings,
            trivial: spectrum.is_trivial(),
            g_minus_one: ConvolutionKernel::new(spectrum.g_minus_one(), n, deta),
            g2_minus_one: ConvolutionKernel::new(spectrum.g2_minus_one(), n, deta),
            b: ConvolutionKernel::new(spectrum.b(), n, deta),
            grid,
        }
    }

    /// Couette operators: every operator reduces to its multiplier.
    pub fn couette(grid: FrequencyGrid, beta: f64) -> Self {
        let spec = ProfileSpectrum::couette(&grid);
        Self::new(grid, &spec, beta, SolverSettings::default())
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn is_couette(&self) -> bool {
        self.trivial
    }

    /// `(p, eta - k t)` at grid index `j`.
    #[inline]
    fn symbols(&self, t: f64, j: usize) -> (f64, f64) {
        let k = self.grid.kf();
        let a = self.grid.etas()[j] - k * t;
        (k * k + a * a, a)
    }

    pub fn p_values(&self, t: f64) -> Vec<f64> {
        (0..self.grid.len()).map(|j| self.symbols(t, j).0).collect()
    }

    /// Multiplies by the symbol of `B_L`.
    pub fn apply_bl(&self, t: f64, u: &SpectralField) -> SpectralField {
        u.map_indexed(|j, z| {
            let (p, a) = self.symbols(t, j);
            z * bl_from_parts(p, a, self.beta)
        })
    }

    /// Multiplies by the symbol `1 + i beta (eta - k t) / p` of `B_L^{-1}`.
    pub fn apply_bl_inverse(&self, t: f64, u: &SpectralField) -> SpectralField {
        u.map_indexed(|j, z| {
            let (p, a) = self.symbols(t, j);
            z * Complex64::new(1.0, self.beta * a / p)
        })
    }

    /// `Delta_L^{-1} u = -u / p`.
    pub fn apply_inv_laplace_l(&self, t: f64, u: &SpectralField) -> SpectralField {
        u.map_indexed(|j, z| -z / self.symbols(t, j).0)
    }

    /// `(d_Y - t d_X) Delta_L^{-1}`, symbol `-i (eta - k t) / p`.
    pub fn apply_sheared_derivative_inv_l(&self, t: f64, u: &SpectralField) -> SpectralField {
        u.map_indexed(|j, z| {
            let (p, a) = self.symbols(t, j);
            z * Complex64::new(0.0, -a / p)
        })
    }

    /// `T_eps u = (g^2 - 1) * [-(eta-kt)^2/p u] + b * [i (eta-kt)/p u]`.
    pub fn apply_t_eps(&self, t: f64, u: &SpectralField) -> SpectralField {
        if self.trivial {
            return SpectralField::zeros(u.len());
        }
        let ug = u.map_indexed(|j, z| {
            let (p, a) = self.symbols(t, j);
            -z * (a * a / p)
        });
        let ub = u.map_indexed(|j, z| {
            let (p, a) = self.symbols(t, j);
            z * Complex64::new(0.0, a / p)
        });
        let cg = self.g2_minus_one.apply(ug.values());
        let cb = self.b.apply(ub.values());
        SpectralField(cg.iter().zip(&cb).map(|(x, y)| x + y).collect())
    }

    /// Forward moving-frame Laplacian
    /// `Delta_t u = -p u + (g^2 - 1) * [-(eta-kt)^2 u] + b * [i (eta-kt) u]`.
    pub fn apply_delta_t(&self, t: f64, u: &SpectralField) -> SpectralField {
        let lead = u.map_indexed(|j, z| -z * self.symbols(t, j).0);
        if self.trivial {
            return lead;
        }
        let ug = u.map_indexed(|j, z| {
            let a = self.symbols(t, j).1;
            -z * (a * a)
        });
        let ub = u.map_indexed(|j, z| z * Complex64::new(0.0, self.symbols(t, j).1));
        let cg = self.g2_minus_one.apply(ug.values());
        let cb = self.b.apply(ub.values());
        SpectralField(
            lead.iter()
                .zip(cg.iter().zip(&cb))
                .map(|(l, (x, y))| l + x + y)
                .collect(),
        )
    }

    /// Multiplication by `g - 1` as a convolution.
    pub fn apply_g_minus_one(&self, u: &SpectralField) -> SpectralField {
        SpectralField(self.g_minus_one.apply(u.values()))
    }

    /// Multiplication by `b` as a convolution.
    pub fn apply_b_coefficient(&self, u: &SpectralField) -> SpectralField {
        SpectralField(self.b.apply(u.values()))
    }

    /// `T_L f = (I - T_eps)^{-1} f`.
    pub fn solve_tl(&self, t: f64, f: &SpectralField) -> Result<(SpectralField, NeumannStats)> {
        if self.trivial {
            return Ok((f.clone(), NeumannStats::default()));
        }
        self.neumann(f, |u| Ok((self.apply_t_eps(t, u), NeumannStats::default())))
    }

    /// `B_eps u = beta B_L [(g - 1) * D T_L u + D (T_L u - u)]` with `D` the
    /// symbol of `(d_Y - t d_X) Delta_L^{-1}`; uses `T_eps T_L = T_L - I`.
    pub fn apply_b_eps(&self, t: f64, u: &SpectralField) -> Result<(SpectralField, NeumannStats)> {
        if self.trivial || self.beta == 0.0 {
            return Ok((SpectralField::zeros(u.len()), NeumannStats::default()));
        }
        let (tl, stats) = self.solve_tl(t, u)?;
        let conv = self.apply_g_minus_one(&self.apply_sheared_derivative_inv_l(t, &tl));
        let local = self.apply_sheared_derivative_inv_l(t, &tl.sub(u));
        let inner = conv.add(&local);
        let out = self.apply_bl(t, &inner).scale(Complex64::new(self.beta, 0.0));
        Ok((out, stats))
    }

    /// `T_B f = (I - B_eps)^{-1} f`.
    pub fn solve_tb(&self, t: f64, f: &SpectralField) -> Result<(SpectralField, NeumannStats)> {
        if self.trivial || self.beta == 0.0 {
            return Ok((f.clone(), NeumannStats::default()));
        }
        self.neumann(f, |u| self.apply_b_eps(t, u))
    }

    /// `B_t u = T_B (B_L u)`.
    pub fn apply_bt(&self, t: f64, u: &SpectralField) -> Result<(SpectralField, NeumannStats)> {
        self.solve_tb(t, &self.apply_bl(t, u))
    }

    /// `B_t^{-1} u = B_L^{-1} (I - B_eps) u`.
    pub fn apply_bt_inverse(&self, t: f64, u: &SpectralField) -> Result<(SpectralField, NeumannStats)> {
        let (be, stats) = self.apply_b_eps(t, u)?;
        Ok((self.apply_bl_inverse(t, &u.sub(&be)), stats))
    }

    /// `Delta_t^{-1} u = Delta_L^{-1} T_L u`.
    pub fn apply_inv_delta_t(&self, t: f64, u: &SpectralField) -> Result<(SpectralField, NeumannStats)> {
        let (tl, stats) = self.solve_tl(t, u)?;
        Ok((self.apply_inv_laplace_l(t, &tl), stats))
    }

    fn neumann<F>(&self, f: &SpectralField, mut apply: F) -> Result<(SpectralField, NeumannStats)>
    where
        F: FnMut(&SpectralField) -> Result<(SpectralField, NeumannStats)>,
    {
        let mut stats = NeumannStats {
            solves: 1,
            ..Default::default()
        };
        let f_norm = f.l2_norm(&self.grid);
        if f_norm == 0.0 {
            return Ok((f.clone(), stats));
        }
        let SolverSettings { tol, max_iter } = self.settings;
        let mut u = f.clone();
        let mut prev_residual = f64::NAN;
        for iteration in 1..=max_iter {
            let (ku, inner) = apply(&u)?;
            stats.merge(&inner);
            let next = f.add(&ku);
            let residual = next.sub(&u).l2_norm(&self.grid) / f_norm;
            if !residual.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual,
                });
            }
            if prev_residual.is_finite() && prev_residual > 0.0 {
                stats.max_contraction = stats.max_contraction.max(residual / prev_residual);
            }
            stats.max_iterations = stats.max_iterations.max(iteration);
            if residual <= tol {
                stats.max_residual = stats.max_residual.max(residual);
                return Ok((u, stats));
            }
            // Diverging iterates: no point in continuing.
            if residual > 1e8 {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual,
                });
            }
            prev_residual = residual;
            u = next;
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: prev_residual,
        })
    }
}
