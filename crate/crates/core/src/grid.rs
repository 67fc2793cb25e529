//! Spatial grids and sampled wave fields.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid must have a power-of-two point count >= 256, got {0}")]
    BadPointCount(usize),
    #[error("grid bounds must satisfy x_min < x_max")]
    BadBounds,
    #[error("field sampled on {got} points, grid has {want}")]
    GridMismatch { got: usize, want: usize },
}

/// Uniform spatial grid `x_j = x_min + j dx`, `j = 0..n`, excluding `x_max`
/// (the FFT torus convention: `x_max` aliases `x_min`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self, GridError> {
        if !(x_min < x_max) {
            return Err(GridError::BadBounds);
        }
        if n_points < 256 || !n_points.is_power_of_two() {
            return Err(GridError::BadPointCount(n_points));
        }
        Ok(SpatialGrid { x_min, x_max, n_points })
    }

    /// Symmetric grid [-half, half) with `x = 0` on a node.
    pub fn symmetric(half: f64, n_points: usize) -> Result<Self, GridError> {
        SpatialGrid::new(-half, half, n_points)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in FFT layout: 0, 1, .., n/2-1, -n/2, .., -1 times 2π/Lx.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let scale = 2.0 * std::f64::consts::PI / (self.x_max - self.x_min);
        (0..n)
            .map(|j| {
                let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                k * scale
            })
            .collect()
    }

    /// True when x = 0 lies on a node and nodes pair as x_j = -x_{n-j}.
    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() < 1e-12 * self.dx()
    }
}

/// A complex field sampled on a [`SpatialGrid`] at one instant.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: SpatialGrid,
    pub samples: Vec<Complex64>,
    pub time: f64,
}

impl WaveField {
    pub fn new(grid: SpatialGrid, samples: Vec<Complex64>, time: f64) -> Result<Self, GridError> {
        if samples.len() != grid.n_points {
            return Err(GridError::GridMismatch { got: samples.len(), want: grid.n_points });
        }
        Ok(WaveField { grid, samples, time })
    }

    pub fn from_fn<F: FnMut(f64) -> Complex64>(grid: SpatialGrid, time: f64, mut f: F) -> Self {
        let samples = (0..grid.n_points).map(|j| f(grid.x(j))).collect();
        WaveField { grid, samples, time }
    }

    /// Discrete L² norm, `sqrt(dx Σ |f|²)`.
    pub fn norm(&self) -> f64 {
        (self.grid.dx() * self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.dx() * self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Discrete inner product `dx Σ conj(f) g` (first slot conjugated).
pub fn inner(dx: f64, f: &[Complex64], g: &[Complex64]) -> Complex64 {
    debug_assert_eq!(f.len(), g.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        acc += a.conj() * b;
    }
    acc * dx
}
