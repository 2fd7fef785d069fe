//! Pointwise Kähler geometry of a potential on the flat torus.
//!
//! For a potential `φ` the metric is `h_{ij̄} = δ_{ij} + ∂_i∂_{j̄}φ`. The
//! volume density is `det h` against Lebesgue coordinate measure; the
//! constant `2ⁿ n!` relating `ω_φⁿ` to that measure is absorbed, so every
//! integral below is `Σ (·) det(h) w` with `w = (2π/N)^{2n}`.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{check_finite, ScalarField, TorusGrid};
use crate::herm::{self, Mat};
use crate::spectral::{Deriv, TensorField, Torus};
use crate::sum::pairwise_sum_by;

/// Smallest metric eigenvalue still counted as positive.
pub const EPS_POS: f64 = 1e-8;

/// Hermitian metric field of a potential with inverse, determinant and
/// eigenvalue caches.
#[derive(Debug)]
pub struct Metric {
    torus: Torus,
    potential: ScalarField,
    spectrum: Vec<C64>,
    h: Vec<Mat>,
    /// Upper-index form: `ginv[x][i][j] = g^{i j̄}`.
    ginv: Vec<Mat>,
    det: Vec<f64>,
    eig_min: Vec<f64>,
    eig_max: Vec<f64>,
    christoffel: OnceLock<Vec<[Mat; 2]>>,
}

/// Ricci form, scalar curvature and log volume ratio of one metric.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub ricci: TensorField,
    pub scalar: ScalarField,
    pub log_ratio: ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalIntegrals {
    pub volume: f64,
    pub total_scalar: f64,
    pub mean_scalar: f64,
    pub calabi: f64,
    pub modified_calabi: f64,
}

/// Builds the metric of `φ`; fails with `NonAdmissible` when the smallest
/// eigenvalue anywhere is at or below [`EPS_POS`].
pub fn assemble_metric(torus: &Torus, phi: &ScalarField) -> Result<Metric> {
    Metric::assemble(torus, phi)
}

impl Metric {
    pub fn assemble(torus: &Torus, phi: &ScalarField) -> Result<Metric> {
        if phi.grid() != torus.grid() {
            return Err(Error::InvalidArgument("potential grid does not match the torus".into()));
        }
        check_finite("potential", phi.values())?;
        let n = torus.grid().n();
        let spectrum = torus.forward(phi);
        let hess = torus.complex_hessian_of_spectrum(&spectrum);
        let id = herm::identity(n);
        let h: Vec<Mat> = hess
            .values
            .into_par_iter()
            .map(|mut m| {
                for i in 0..n {
                    for j in 0..n {
                        m[i][j] += id[i][j];
                    }
                }
                m
            })
            .collect();
        let (eig_min, eig_max): (Vec<f64>, Vec<f64>) = h.par_iter().map(|m| herm::eigen_extremes(n, m)).unzip();

        let (index, &min_eig) = eig_min
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is non-empty");
        if !(min_eig > EPS_POS) {
            return Err(Error::NonAdmissible { min_eig, index });
        }

        let det: Vec<f64> = h.par_iter().map(|m| herm::det(n, m)).collect();
        let ginv: Vec<Mat> = h
            .par_iter()
            .map(|m| {
                let inv = herm::inverse(n, m);
                let mut g = herm::ZERO;
                for i in 0..n {
                    for j in 0..n {
                        g[i][j] = inv[j][i];
                    }
                }
                g
            })
            .collect();

        Ok(Metric {
            torus: torus.clone(),
            potential: phi.clone(),
            spectrum,
            h,
            ginv,
            det,
            eig_min,
            eig_max,
            christoffel: OnceLock::new(),
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn grid(&self) -> TorusGrid {
        self.torus.grid()
    }

    pub fn n(&self) -> usize {
        self.torus.grid().n()
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn potential_spectrum(&self) -> &[C64] {
        &self.spectrum
    }

    /// Lower-index components `h_{ij̄}` per point.
    pub fn components(&self) -> &[Mat] {
        &self.h
    }

    /// Inverse metric `g^{ij̄}` per point, stored as `[i][j]`.
    pub fn inverse(&self) -> &[Mat] {
        &self.ginv
    }

    /// `det h` per point, the volume density.
    pub fn density(&self) -> &[f64] {
        &self.det
    }

    pub fn min_eigenvalues(&self) -> &[f64] {
        &self.eig_min
    }

    pub fn max_eigenvalues(&self) -> &[f64] {
        &self.eig_max
    }

    /// Volume integral `Σ f det(h) w`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.grid().weight() * pairwise_sum_by(f.len(), |i| f[i] * self.det[i])
    }

    /// `μ_φ`-weighted mean of a field.
    pub fn weighted_mean(&self, f: &[f64]) -> f64 {
        let num = pairwise_sum_by(f.len(), |i| f[i] * self.det[i]);
        let den = pairwise_sum_by(f.len(), |i| self.det[i]);
        num / den
    }

    /// `g^{ij̄} T_{ij̄}` pointwise, real part.
    pub fn contract(&self, t: &[Mat]) -> ScalarField {
        let n = self.n();
        let v = self
            .ginv
            .par_iter()
            .zip(t.par_iter())
            .map(|(g, t)| {
                let mut s = C64::default();
                for i in 0..n {
                    for j in 0..n {
                        s += g[i][j] * t[i][j];
                    }
                }
                s.re
            })
            .collect();
        ScalarField::from_vec_unchecked(self.grid(), v)
    }

    /// `F = log(ω_φⁿ / ωⁿ) = log det h`.
    pub fn log_ratio(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.grid(), self.det.iter().map(|d| d.ln()).collect())
    }

    /// `R_{ij̄} = −∂_i∂_{j̄} log det h`.
    pub fn ricci(&self) -> TensorField {
        let f = self.log_ratio();
        let mut t = self.torus.complex_hessian(&f).expect("log det is finite on admissible metrics");
        for m in t.values.iter_mut() {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
        }
        t
    }

    /// `R = g^{ij̄} R_{ij̄}`.
    pub fn scalar_curvature(&self) -> ScalarField {
        self.contract(&self.ricci().values)
    }

    pub fn curvature(&self) -> CurvatureBundle {
        let ricci = self.ricci();
        let scalar = self.contract(&ricci.values);
        CurvatureBundle { ricci, scalar, log_ratio: self.log_ratio() }
    }

    /// Volume, total scalar curvature, its mean and both Calabi energies.
    pub fn global_integrals(&self, r: &ScalarField) -> GlobalIntegrals {
        let rv = r.values();
        let w = self.grid().weight();
        let volume = w * pairwise_sum_by(rv.len(), |i| self.det[i]);
        let total_scalar = self.integrate(rv);
        let mean_scalar = total_scalar / volume;
        let calabi = w * pairwise_sum_by(rv.len(), |i| rv[i] * rv[i] * self.det[i]);
        let modified_calabi = w * pairwise_sum_by(rv.len(), |i| {
            let d = rv[i] - mean_scalar;
            d * d * self.det[i]
        });
        GlobalIntegrals { volume, total_scalar, mean_scalar, calabi, modified_calabi }
    }

    /// Global `(λ, Λ)` with `λ ω ≤ ω_φ ≤ Λ ω`.
    pub fn equivalence_constants(&self) -> (f64, f64) {
        let lo = self.eig_min.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.eig_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Christoffel symbols `Γ^γ_{αβ} = g^{γδ̄} ∂_α h_{βδ̄}`, indexed
    /// `[point][γ][α][β]`.
    pub fn christoffel(&self) -> &[[Mat; 2]] {
        self.christoffel.get_or_init(|| {
            let n = self.n();
            let len = self.grid().len();
            // dh[α][β][δ] = ∂_α∂_β∂_{δ̄} φ, symmetric in α, β.
            let mut dh: Vec<Vec<Vec<C64>>> = vec![vec![Vec::new(); n * n]; n];
            for a in 0..n {
                for b in a..n {
                    for d in 0..n {
                        let v = self.torus.derivative_of_spectrum(
                            &self.spectrum,
                            &[Deriv::Holo(a), Deriv::Holo(b), Deriv::Anti(d)],
                        );
                        if a != b {
                            dh[b][a * n + d] = v.clone();
                        }
                        dh[a][b * n + d] = v;
                    }
                }
            }
            (0..len)
                .into_par_iter()
                .map(|x| {
                    let g = &self.ginv[x];
                    let mut gam = [herm::ZERO; 2];
                    for c in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                let mut s = C64::default();
                                for d in 0..n {
                                    s += g[c][d] * dh[a][b * n + d][x];
                                }
                                gam[c][a][b] = s;
                            }
                        }
                    }
                    gam
                })
                .collect()
        })
    }
}
