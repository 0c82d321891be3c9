//! Truncated Y-frequency grid at a fixed x-wavenumber, and fields on it.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::multipliers::Frequency;

/// Uniform cell-centred grid `eta_j = -eta_max + (j + 1/2) deta`, `j < n`.
///
/// The grid is symmetric about zero (`eta_{n-1-j} = -eta_j`), and differences
/// of grid points are integer multiples of `deta`, which is what the
/// convolution operators sample their kernels at.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    k: i64,
    eta_max: f64,
    deta: f64,
    etas: Vec<f64>,
}

/// Resolution floor for acceptance runs.
pub const MIN_ACCEPTANCE_POINTS: usize = 128;

impl FrequencyGrid {
    pub fn new(k: i64, eta_max: f64, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        if !(eta_max > 0.0) || !eta_max.is_finite() {
            return Err(invalid("eta_max", format!("must be positive, got {eta_max}")));
        }
        if n == 0 || !n.is_multiple_of(2) {
            return Err(invalid("N", format!("must be a positive even count, got {n}")));
        }
        let deta = 2.0 * eta_max / n as f64;
        let etas = (0..n).map(|j| -eta_max + (j as f64 + 0.5) * deta).collect();
        Ok(Self { k, eta_max, deta, etas })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    pub fn deta(&self) -> f64 {
        self.deta
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn frequency(&self, j: usize) -> Frequency {
        Frequency::new(self.k, self.etas[j]).expect("grid k is nonzero")
    }

    /// Trapezoid weights on the grid (half weight at both ends).
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.len() {
            0.5 * self.deta
        } else {
            self.deta
        }
    }

    /// Trapezoid integral of a real integrand sampled on the grid.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        values
            .into_iter()
            .enumerate()
            .map(|(j, v)| self.trapezoid_weight(j) * v)
            .sum()
    }

    /// Samples a function of `eta` on the grid.
    pub fn field_from(&self, f: impl Fn(f64) -> Complex64) -> SpectralField {
        SpectralField(self.etas.iter().map(|&e| f(e)).collect())
    }

    /// `true` for grid indices outside the central `1 - 2 * margin` fraction.
    pub fn is_outer(&self, j: usize, margin: f64) -> bool {
        self.etas[j].abs() > (1.0 - margin) * self.eta_max
    }
}

/// Complex values over the points of a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralField(pub Vec<Complex64>);

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_finite(self, what: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what))
        }
    }

    /// Pointwise product with a multiplier evaluated at each index.
    pub fn map_indexed(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        Self(self.0.iter().enumerate().map(|(j, &z)| f(j, z)).collect())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * a).collect())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: Complex64, other: &Self) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Trapezoid `L^2` norm over the grid, `(int |u|^2 d eta)^{1/2}`.
    pub fn l2_norm(&self, grid: &FrequencyGrid) -> f64 {
        grid.integrate(self.0.iter().map(|z| z.norm_sqr())).sqrt()
    }
}

impl Index<usize> for SpectralField {
    type Output = Complex64;

    fn index(&self, j: usize) -> &Complex64 {
        &self.0[j]
    }
}

impl IndexMut<usize> for SpectralField {
    fn index_mut(&mut self, j: usize) -> &mut Complex64 {
        &mut self.0[j]
    }
}

impl From<Vec<Complex64>> for SpectralField {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_uniform_and_symmetric() {
        let g = FrequencyGrid::new(1, 20.0, 256).unwrap();
        assert_eq!(g.deta(), 40.0 / 256.0);
        for j in 0..g.len() - 1 {
            let d = g.etas()[j + 1] - g.etas()[j];
            assert!((d - g.deta()).abs() < 1e-13);
        }
        for j in 0..g.len() {
            assert_eq!(g.etas()[j], -g.etas()[g.len() - 1 - j]);
        }
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert_eq!(FrequencyGrid::new(0, 1.0, 8), Err(Error::ZeroWavenumber));
        assert!(FrequencyGrid::new(1, 1.0, 7).is_err());
        assert!(FrequencyGrid::new(1, 1.0, 0).is_err());
        assert!(FrequencyGrid::new(1, -1.0, 8).is_err());
    }

    #[test]
    fn trapezoid_of_gaussian() {
        let g = FrequencyGrid::new(1, 12.0, 512).unwrap();
        let v = g.integrate(g.etas().iter().map(|e| (-e * e).exp()));
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
