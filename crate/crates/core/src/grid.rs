//! Periodic lattices on flat complex tori and the fields that live on them.
//!
//! The torus is `C^n / (2πZ)^{2n}` with `n ∈ {1, 2}`. Real axes are ordered
//! `(x_1, y_1, …, x_n, y_n)` with `z_j = x_j + i y_j`, stored row-major with
//! `x_1` slowest. Other periods are reached by rescaling the potential.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sum::pairwise_sum_by;

pub const MAX_AXES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    n: usize,
    points: usize,
}

impl TorusGrid {
    /// `n` complex dimensions, `points` samples per real axis (even, ≥ 8).
    pub fn new(n: usize, points: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::InvalidArgument(format!("complex dimension must be 1 or 2, got {n}")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "points per axis must be even and at least 8, got {points}"
            )));
        }
        Ok(TorusGrid { n, points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    /// Uniform quadrature weight `(2π/N)^{2n}`.
    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.axes() as i32)
    }

    /// Lebesgue volume of the fundamental domain, `(2π)^{2n}`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.axes() as i32)
    }

    /// Per-axis sample indices of a flat index.
    pub fn multi_index(&self, mut index: usize) -> [usize; MAX_AXES] {
        let mut m = [0; MAX_AXES];
        for a in (0..self.axes()).rev() {
            m[a] = index % self.points;
            index /= self.points;
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m[..self.axes()].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Real coordinates of a sample point, `x_a = 2π m_a / N`.
    pub fn coords(&self, index: usize) -> [f64; MAX_AXES] {
        let m = self.multi_index(index);
        let h = self.spacing();
        let mut x = [0.0; MAX_AXES];
        for a in 0..self.axes() {
            x[a] = h * m[a] as f64;
        }
        x
    }

    /// Signed wavenumber of transform index `m`, in `−N/2+1 ..= N/2`.
    pub fn wavenumber(&self, m: usize) -> i64 {
        if m <= self.points / 2 {
            m as i64
        } else {
            m as i64 - self.points as i64
        }
    }
}

/// Real scalar field sampled on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        check_finite("scalar field", &values)?;
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every grid point; the closure receives the real
    /// coordinates `(x_1, y_1, …)`.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: TorusGrid, f: F) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..grid.axes()])
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("scalar field", &self.values)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `∫ f dx` with the uniform weight.
    pub fn integrate(&self) -> f64 {
        self.grid.weight() * pairwise_sum_by(self.values.len(), |i| self.values[i])
    }

    /// Arithmetic mean over grid points (background-normalized average).
    pub fn mean(&self) -> f64 {
        pairwise_sum_by(self.values.len(), |i| self.values[i]) / self.values.len() as f64
    }

    /// Discrete `L²` norm `(Σ f² w)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.weight() * pairwise_sum_by(self.values.len(), |i| self.values[i] * self.values[i])).sqrt()
    }
}

/// Complex scalar field, used for holomorphic derivatives of real fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: TorusGrid,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: TorusGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument("complex field length does not match grid".into()));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.grid, self.values.iter().map(|v| v.re).collect())
    }

    pub fn im(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.grid, self.values.iter().map(|v| v.im).collect())
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::new(1, 6).is_err());
        assert!(TorusGrid::new(1, 9).is_err());
        assert!(TorusGrid::new(2, 8).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = TorusGrid::new(2, 8).unwrap();
        for i in [0, 1, 7, 8, 63, 511, 4095] {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
        // x_1 is the slowest axis
        assert_eq!(g.multi_index(512)[0], 1);
        assert_eq!(g.multi_index(1)[3], 1);
    }

    #[test]
    fn wavenumbers_cover_standard_range() {
        let g = TorusGrid::new(1, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|m| g.wavenumber(m)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut v = vec![0.0; 64];
        v[5] = f64::NAN;
        assert_eq!(ScalarField::new(g, v), Err(Error::NonFinite { what: "scalar field", index: 5 }));
    }

    #[test]
    fn quadrature_of_constant_is_volume() {
        let g = TorusGrid::new(1, 16).unwrap();
        let one = ScalarField::constant(g, 1.0);
        assert!((one.integrate() - 4.0 * PI * PI).abs() < 1e-12);
    }
}
