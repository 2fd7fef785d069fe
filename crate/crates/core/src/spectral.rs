//! Spectral calculus in holomorphic coordinates on the flat torus.
//!
//! With `∂_{z_j} = ½(∂_{x_j} − i∂_{y_j})`, a Fourier mode with real
//! wavenumbers `(k_j, l_j)` has symbols
//!
//! ```text
//! ∂_{z_j}  ↦ i(k_j − i l_j)/2        ∂_{z̄_j} ↦ i(k_j + i l_j)/2
//! Δ_c = Σ_j ∂_{z_j}∂_{z̄_j} ↦ −Σ_j (k_j² + l_j²)/4
//! ```
//!
//! The Nyquist wavenumber is zeroed in every first-order factor so that
//! odd-order derivatives of real fields stay real. Mixed operators are built
//! as products of first-order factors; [`Torus::laplace_flat`] and the
//! biharmonic solve use the even symbol with the Nyquist mode kept.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::NdFft;
use crate::grid::{check_finite, ComplexField, ScalarField, TorusGrid, MAX_AXES};
use crate::herm::{self, Mat};
use crate::sum::pairwise_sum_by;

/// A first-order complex derivative along complex axis `j` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    Holo(usize),
    Anti(usize),
}

/// Per-axis integer wavenumbers and the derived derivative symbols.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    grid: TorusGrid,
    k: Vec<i64>,
    odd: Vec<f64>,
}

impl FrequencyTable {
    pub fn new(grid: TorusGrid) -> Self {
        let n = grid.points_per_axis();
        let k: Vec<i64> = (0..n).map(|m| grid.wavenumber(m)).collect();
        let odd = k.iter().map(|&k| if k == (n / 2) as i64 { 0.0 } else { k as f64 }).collect();
        FrequencyTable { grid, k, odd }
    }

    pub fn wavenumbers(&self) -> &[i64] {
        &self.k
    }

    /// Wavenumber vector `(k_1, l_1, …)` of a flat spectral index.
    pub fn mode(&self, index: usize) -> [i64; MAX_AXES] {
        let m = self.grid.multi_index(index);
        let mut out = [0; MAX_AXES];
        for a in 0..self.grid.axes() {
            out[a] = self.k[m[a]];
        }
        out
    }

    /// Symbol of `∂_{z_j}` at the mode with multi-index `m`.
    pub fn holo_symbol(&self, m: &[usize], j: usize) -> C64 {
        let k = self.odd[m[2 * j]];
        let l = self.odd[m[2 * j + 1]];
        C64::new(l, k) * 0.5
    }

    /// Symbol of `∂_{z̄_j}`.
    pub fn antiholo_symbol(&self, m: &[usize], j: usize) -> C64 {
        let k = self.odd[m[2 * j]];
        let l = self.odd[m[2 * j + 1]];
        C64::new(-l, k) * 0.5
    }

    /// Symbol of the real derivative `∂/∂(axis)`, Nyquist zeroed.
    pub fn real_symbol(&self, m: &[usize], axis: usize) -> C64 {
        C64::new(0.0, self.odd[m[axis]])
    }

    /// Symbol of the flat complex Laplacian, `−Σ (k_j² + l_j²)/4`.
    pub fn laplace_symbol(&self, m: &[usize]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.grid.axes() {
            let k = self.k[m[a]] as f64;
            s += k * k;
        }
        -0.25 * s
    }

    pub fn symbol(&self, m: &[usize], ds: &[Deriv]) -> C64 {
        ds.iter().fold(C64::new(1.0, 0.0), |acc, d| {
            acc * match *d {
                Deriv::Holo(j) => self.holo_symbol(m, j),
                Deriv::Anti(j) => self.antiholo_symbol(m, j),
            }
        })
    }

    /// Largest absolute wavenumber over all axes of a mode.
    pub fn max_abs_wavenumber(&self, m: &[usize]) -> i64 {
        (0..self.grid.axes()).map(|a| self.k[m[a]].abs()).max().unwrap_or(0)
    }
}

/// Hermitian-matrix-valued field; entry `[i][j]` at a point is the
/// `(i, j̄)` component.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub grid: TorusGrid,
    pub values: Vec<Mat>,
}

impl TensorField {
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Maximum pointwise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        self.values.iter().fold(0.0, |m, v| m.max(herm::hermitian_defect(n, v)))
    }
}

/// Spectral engine for one torus grid: transform plans plus frequency table.
#[derive(Debug, Clone)]
pub struct Torus {
    grid: TorusGrid,
    fft: Arc<NdFft>,
    freq: Arc<FrequencyTable>,
}

impl Torus {
    pub fn new(grid: TorusGrid) -> Self {
        Torus {
            grid,
            fft: Arc::new(NdFft::new(grid.axes(), grid.points_per_axis())),
            freq: Arc::new(FrequencyTable::new(grid)),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn freq(&self) -> &FrequencyTable {
        &self.freq
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::InvalidArgument("field grid does not match the torus".into()));
        }
        Ok(())
    }

    /// Forward (unnormalized) transform of a real field.
    pub fn forward(&self, f: &ScalarField) -> Vec<C64> {
        let mut buf: Vec<C64> = f.values().iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    pub fn forward_complex(&self, values: &[C64]) -> Vec<C64> {
        let mut buf = values.to_vec();
        self.fft.forward(&mut buf);
        buf
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, mut spec: Vec<C64>) -> Vec<C64> {
        self.fft.inverse(&mut spec);
        spec
    }

    pub fn inverse_real(&self, spec: Vec<C64>) -> ScalarField {
        let v = self.inverse(spec);
        ScalarField::from_vec_unchecked(self.grid, v.into_iter().map(|c| c.re).collect())
    }

    /// Multiplies a spectrum by `symbol(multi_index)` in place.
    pub fn apply_symbol<S>(&self, spec: &mut [C64], symbol: S)
    where
        S: Fn(&[usize]) -> C64 + Sync,
    {
        let grid = self.grid;
        spec.par_iter_mut().enumerate().for_each(|(i, v)| {
            let m = grid.multi_index(i);
            *v *= symbol(&m[..]);
        });
    }

    /// Applies a product of first-order derivatives to a spectrum and
    /// returns the physical-space result.
    pub fn derivative_of_spectrum(&self, spec: &[C64], ds: &[Deriv]) -> Vec<C64> {
        let mut s = spec.to_vec();
        let freq = &self.freq;
        self.apply_symbol(&mut s, |m| freq.symbol(m, ds));
        self.inverse(s)
    }

    /// Product of real-axis derivatives applied to a real spectrum.
    pub fn real_derivative_of_spectrum(&self, spec: &[C64], axes: &[usize]) -> Vec<f64> {
        let mut s = spec.to_vec();
        let freq = &self.freq;
        self.apply_symbol(&mut s, |m| axes.iter().fold(C64::new(1.0, 0.0), |acc, &a| acc * freq.real_symbol(m, a)));
        self.inverse(s).into_iter().map(|c| c.re).collect()
    }

    /// `∂_{z_j} f` for complex axis `j` (0-based).
    pub fn d_holo(&self, f: &ScalarField, j: usize) -> Result<ComplexField> {
        self.first_derivative(f, Deriv::Holo(j))
    }

    /// `∂_{z̄_j} f` for complex axis `j` (0-based).
    pub fn d_antiholo(&self, f: &ScalarField, j: usize) -> Result<ComplexField> {
        self.first_derivative(f, Deriv::Anti(j))
    }

    fn first_derivative(&self, f: &ScalarField, d: Deriv) -> Result<ComplexField> {
        self.check_grid(f)?;
        f.validate()?;
        let j = match d {
            Deriv::Holo(j) | Deriv::Anti(j) => j,
        };
        if j >= self.grid.n() {
            return Err(Error::InvalidArgument(format!("axis {j} out of range for n = {}", self.grid.n())));
        }
        let spec = self.forward(f);
        ComplexField::new(self.grid, self.derivative_of_spectrum(&spec, &[d]))
    }

    /// Flat complex Laplacian `Δ_c f`, a quarter of the real Laplacian.
    pub fn laplace_flat(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_grid(f)?;
        f.validate()?;
        let mut spec = self.forward(f);
        let freq = &self.freq;
        self.apply_symbol(&mut spec, |m| C64::new(freq.laplace_symbol(m), 0.0));
        Ok(self.inverse_real(spec))
    }

    /// `(Id + σ Δ_c²) f`.
    pub fn biharmonic_shift_apply(&self, f: &ScalarField, sigma: f64) -> ScalarField {
        let mut spec = self.forward(f);
        let freq = &self.freq;
        self.apply_symbol(&mut spec, |m| {
            let mu = freq.laplace_symbol(m);
            C64::new(1.0 + sigma * mu * mu, 0.0)
        });
        self.inverse_real(spec)
    }

    /// Solves `(Id + σ Δ_c²) u = f` exactly, mode by mode.
    pub fn biharmonic_shift_solve(&self, f: &ScalarField, sigma: f64) -> Result<ScalarField> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("shift σ must be positive, got {sigma}")));
        }
        self.check_grid(f)?;
        f.validate()?;
        let mut spec = self.forward(f);
        let freq = &self.freq;
        self.apply_symbol(&mut spec, |m| {
            let mu = freq.laplace_symbol(m);
            C64::new(1.0 / (1.0 + sigma * mu * mu), 0.0)
        });
        Ok(self.inverse_real(spec))
    }

    /// Removes every Fourier mode with a Nyquist wavenumber on some axis.
    /// First-order symbols vanish along those axes, so the discrete curvature
    /// cannot see (or damp) such modes.
    pub fn drop_nyquist(&self, f: &ScalarField) -> ScalarField {
        let mut spec = self.forward(f);
        let nyq = self.grid.points_per_axis() / 2;
        let axes = self.grid.axes();
        self.apply_symbol(&mut spec, |m| {
            if m[..axes].contains(&nyq) {
                C64::default()
            } else {
                C64::new(1.0, 0.0)
            }
        });
        self.inverse_real(spec)
    }

    /// Trigonometric interpolation of `f` onto the finer torus `target`
    /// (same `n`, at least as many points per axis). Nyquist modes of the
    /// source are dropped.
    pub fn prolong(&self, f: &ScalarField, target: &Torus) -> Result<ScalarField> {
        self.check_grid(f)?;
        let (src, dst) = (self.grid, target.grid);
        let (ns, nt) = (src.points_per_axis(), dst.points_per_axis());
        if src.n() != dst.n() || nt < ns {
            return Err(Error::InvalidArgument(format!("cannot prolong N = {ns} onto n = {}, N = {nt}", dst.n())));
        }
        let axes = src.axes();
        let spec = self.forward(f);
        let mut out = vec![C64::default(); dst.len()];
        let ratio = dst.len() as f64 / src.len() as f64;
        'modes: for (i, c) in spec.iter().enumerate() {
            let mi = src.multi_index(i);
            let mut mj = [0usize; MAX_AXES];
            for a in 0..axes {
                let k = src.wavenumber(mi[a]);
                if k.unsigned_abs() as usize == ns / 2 {
                    continue 'modes;
                }
                mj[a] = k.rem_euclid(nt as i64) as usize;
            }
            out[dst.flat_index(&mj[..axes])] = c * ratio;
        }
        Ok(target.inverse_real(out))
    }

    /// Pseudo-inverse of `−Δ_c` on mean-zero fields (zero mode dropped).
    pub fn inverse_neg_laplace(&self, f: &[f64]) -> Vec<f64> {
        let mut spec: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft.forward(&mut spec);
        let freq = &self.freq;
        self.apply_symbol(&mut spec, |m| {
            let mu = freq.laplace_symbol(m);
            if mu == 0.0 {
                C64::default()
            } else {
                C64::new(-1.0 / mu, 0.0)
            }
        });
        self.inverse(spec).into_iter().map(|c| c.re).collect()
    }

    /// Pseudo-inverse of `(Id + Δ_c²)` restricted to non-constant modes.
    pub fn inverse_biharmonic_shift_meanfree(&self, f: &[f64]) -> Vec<f64> {
        let mut spec: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft.forward(&mut spec);
        let freq = &self.freq;
        self.apply_symbol(&mut spec, |m| {
            let mu = freq.laplace_symbol(m);
            if mu == 0.0 {
                C64::default()
            } else {
                C64::new(1.0 / (1.0 + mu * mu), 0.0)
            }
        });
        self.inverse(spec).into_iter().map(|c| c.re).collect()
    }

    /// Modes whose every wavenumber is `0` or the Nyquist value `N/2`; all
    /// first-order symbols vanish on them. Returned as real `±1` patterns,
    /// mutually orthogonal, the constant first.
    pub fn unresolved_modes(&self) -> Vec<Vec<f64>> {
        let axes = self.grid.axes();
        let grid = self.grid;
        (0..1usize << axes)
            .map(|mask| {
                (0..grid.len())
                    .map(|i| {
                        let m = grid.multi_index(i);
                        let odd = (0..axes).filter(|a| mask >> a & 1 == 1).map(|a| m[a]).sum::<usize>();
                        if odd % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Euclidean projection onto the complement of [`Torus::unresolved_modes`].
    pub fn project_resolved(&self, v: &mut [f64]) {
        let axes = self.grid.axes();
        let grid = self.grid;
        let len = v.len() as f64;
        for mask in 0..1usize << axes {
            let sign = |i: usize| {
                let m = grid.multi_index(i);
                let odd = (0..axes).filter(|a| mask >> a & 1 == 1).map(|a| m[a]).sum::<usize>();
                if odd % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            let c = pairwise_sum_by(v.len(), |i| v[i] * sign(i)) / len;
            v.par_iter_mut().enumerate().for_each(|(i, x)| *x -= c * sign(i));
        }
    }

    /// Parseval-side `L²` norm, `(w/M · Σ_k |f̂_k|²)^{1/2}`.
    pub fn mode_norm(&self, f: &ScalarField) -> f64 {
        let spec = self.forward(f);
        let scale = self.grid.weight() / self.grid.len() as f64;
        (scale * pairwise_sum_by(spec.len(), |i| spec[i].norm_sqr())).sqrt()
    }

    /// `L²` norm of the Fourier modes whose largest per-axis |wavenumber|
    /// exceeds `k_cut`.
    pub fn spectral_tail_norm(&self, f: &ScalarField, k_cut: usize) -> Result<f64> {
        let half = self.grid.points_per_axis() / 2;
        if k_cut == 0 || k_cut >= half {
            return Err(Error::InvalidArgument(format!("k_cut must lie in 1..{half}, got {k_cut}")));
        }
        self.check_grid(f)?;
        f.validate()?;
        let spec = self.forward(f);
        let scale = self.grid.weight() / self.grid.len() as f64;
        let grid = self.grid;
        let freq = &self.freq;
        let cut = k_cut as i64;
        let tail = pairwise_sum_by(spec.len(), |i| {
            let m = grid.multi_index(i);
            if freq.max_abs_wavenumber(&m) > cut {
                spec[i].norm_sqr()
            } else {
                0.0
            }
        });
        Ok((scale * tail).sqrt())
    }

    /// Complex Hessian `∂_i∂_{j̄} f` of a real field, Hermitian pointwise.
    pub fn complex_hessian(&self, f: &ScalarField) -> Result<TensorField> {
        self.check_grid(f)?;
        check_finite("hessian input", f.values())?;
        let spec = self.forward(f);
        Ok(self.complex_hessian_of_spectrum(&spec))
    }

    pub(crate) fn complex_hessian_of_spectrum(&self, spec: &[C64]) -> TensorField {
        let n = self.grid.n();
        let mut values = vec![herm::ZERO; self.grid.len()];
        for i in 0..n {
            for j in i..n {
                let d = self.derivative_of_spectrum(spec, &[Deriv::Holo(i), Deriv::Anti(j)]);
                for (v, x) in values.iter_mut().zip(d) {
                    if i == j {
                        v[i][i] = C64::new(x.re, 0.0);
                    } else {
                        v[i][j] = x;
                        v[j][i] = x.conj();
                    }
                }
            }
        }
        TensorField { grid: self.grid, values }
    }

    /// Holomorphic Hessian `∂_i∂_j f` (symmetric, not Hermitian).
    pub(crate) fn holo_hessian_of_spectrum(&self, spec: &[C64]) -> Vec<Mat> {
        let n = self.grid.n();
        let mut values = vec![herm::ZERO; self.grid.len()];
        for i in 0..n {
            for j in i..n {
                let d = self.derivative_of_spectrum(spec, &[Deriv::Holo(i), Deriv::Holo(j)]);
                for (v, x) in values.iter_mut().zip(d) {
                    v[i][j] = x;
                    v[j][i] = x;
                }
            }
        }
        values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus(n: usize, pts: usize) -> Torus {
        Torus::new(TorusGrid::new(n, pts).unwrap())
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn prolong_interpolates_trig_polynomials() {
        let (c, f) = (torus(1, 8), torus(1, 32));
        let p = |x: &[f64]| 0.3 * (x[0] - 2.0 * x[1]).cos() + (3.0 * x[1] + 0.4).sin();
        let fine = c.prolong(&ScalarField::from_fn(c.grid(), p), &f).unwrap();
        assert!(max_err(fine.values(), ScalarField::from_fn(f.grid(), p).values()) < 1e-14);
        assert!(f.prolong(&fine, &c).is_err());
        assert!(c.prolong(&ScalarField::zeros(c.grid()), &torus(2, 8)).is_err());
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let t = torus(1, 16);
        let f = ScalarField::constant(t.grid(), 3.5);
        let d = t.d_holo(&f, 0).unwrap();
        assert!(d.values().iter().all(|v| v.norm() < 1e-14));
        let l = t.laplace_flat(&f).unwrap();
        assert!(l.sup_norm() < 1e-14);
    }

    #[test]
    fn d_holo_of_cosine() {
        let t = torus(1, 32);
        let f = ScalarField::from_fn(t.grid(), |x| x[0].cos());
        let d = t.d_holo(&f, 0).unwrap();
        let expect = ScalarField::from_fn(t.grid(), |x| -x[0].sin() / 2.0);
        assert!(max_err(d.re().values(), expect.values()) <= 1e-12);
        assert!(d.im().sup_norm() <= 1e-12);
    }

    #[test]
    fn d_holo_of_exp_sin_matches_series_oracle() {
        // exp(sin x) = Σ_m sin^m x / m!, so d/dx = cos x · Σ_m sin^m x / m!
        // truncated at enough terms; ∂_z of an x-only function is ½ d/dx.
        let t = torus(1, 64);
        let f = ScalarField::from_fn(t.grid(), |x| x[0].sin().exp());
        let series = |x: f64| {
            let s = x.sin();
            let mut term = 1.0;
            let mut acc = 0.0;
            for m in 0..30 {
                if m > 0 {
                    term *= s / m as f64;
                }
                acc += term;
            }
            0.5 * x.cos() * acc
        };
        let d = t.d_holo(&f, 0).unwrap().re();
        let expect = ScalarField::from_fn(t.grid(), |x| series(x[0]));
        let diff = d.zip_map(&expect, |a, b| a - b);
        assert!(diff.l2_norm() / expect.l2_norm() <= 1e-10);
    }

    #[test]
    fn laplace_examples() {
        let t = torus(1, 16);
        let f = ScalarField::from_fn(t.grid(), |x| x[0].cos());
        let l = t.laplace_flat(&f).unwrap();
        assert!(max_err(l.values(), f.map(|v| -v / 4.0).values()) < 1e-13);

        let t2 = torus(2, 8);
        let g = ScalarField::from_fn(t2.grid(), |x| x[0].cos() * x[3].cos());
        let l2 = t2.laplace_flat(&g).unwrap();
        assert!(max_err(l2.values(), g.map(|v| -v / 2.0).values()) < 1e-13);
    }

    #[test]
    fn biharmonic_shift_examples() {
        let t = torus(1, 16);
        let f = ScalarField::from_fn(t.grid(), |x| x[0].cos());
        let u = t.biharmonic_shift_solve(&f, 16.0).unwrap();
        assert!(max_err(u.values(), f.map(|v| v / 2.0).values()) < 1e-13);

        let c = ScalarField::constant(t.grid(), 2.0);
        let u = t.biharmonic_shift_solve(&c, 123.0).unwrap();
        assert!(max_err(u.values(), c.values()) < 1e-14);

        assert!(t.biharmonic_shift_solve(&f, 0.0).is_err());
        assert!(t.biharmonic_shift_solve(&f, -1.0).is_err());
    }

    #[test]
    fn tail_norm_examples() {
        let t = torus(1, 32);
        let low = ScalarField::from_fn(t.grid(), |x| x[0].cos());
        assert!(t.spectral_tail_norm(&low, 4).unwrap() < 1e-12);
        // cos(8x) lies entirely above k_cut = 4: the tail is the whole norm,
        // ∫cos²(8x) = 2π², so the norm is π√2.
        let high = ScalarField::from_fn(t.grid(), |x| (8.0 * x[0]).cos());
        let tail = t.spectral_tail_norm(&high, 4).unwrap();
        assert!((tail - high.l2_norm()).abs() < 1e-12);
        assert!((tail - PI * 2f64.sqrt()).abs() < 1e-12);
        assert!(t.spectral_tail_norm(&high, 0).is_err());
        assert!(t.spectral_tail_norm(&high, 16).is_err());
    }

    #[test]
    fn hessian_diagonal_matches_laplacian_off_nyquist() {
        let t = torus(2, 8);
        let f = ScalarField::from_fn(t.grid(), |x| (x[0] + 2.0 * x[1]).sin() + (x[2] - x[3]).cos());
        let h = t.complex_hessian(&f).unwrap();
        let lap = t.laplace_flat(&f).unwrap();
        let tr: Vec<f64> = h.values.iter().map(|m| (m[0][0] + m[1][1]).re).collect();
        assert!(max_err(&tr, lap.values()) < 1e-12);
        assert!(h.hermitian_defect() < 1e-14);
    }
}
