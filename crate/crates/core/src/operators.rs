//! Operators attached to a fixed admissible metric.
//!
//! Conventions: `⟨f, g⟩_μ = Σ f g det(h) w`. The Lichnérowicz operator is
//! assembled in weak form from the covariant holomorphic Hessian
//! `f_{,αβ} = ∂_α∂_β f − Γ^γ_{αβ} ∂_γ f`:
//!
//! ```text
//! ⟨D f, g⟩_μ = Re Σ_x w det(h) g^{αγ̄} g^{βδ̄} f_{,αβ} conj(g_{,γδ})
//! ```
//!
//! so `D` is symmetric and non-negative on the grid to roundoff. On the flat
//! metric it reduces to `Δ_c²`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::grid::{check_finite, ScalarField};
use crate::herm::{self, Mat};
use crate::krylov::{dot, pcg, SolverOptions};
use crate::spectral::Deriv;
use crate::sum::pairwise_sum_by;

#[derive(Debug, Clone)]
pub struct GreenSolution {
    /// Mean-zero (w.r.t. `μ_φ`) solution of `Δ_φ F = ρ − ρ̄`.
    pub f: ScalarField,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub lambda: f64,
    /// Mean-zero, unit `L²(μ_φ)` norm.
    pub eigenfield: ScalarField,
    /// `‖D u − λ u‖_μ / ‖u‖_μ`.
    pub rayleigh_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    /// Block size of the subspace iteration; larger blocks converge faster
    /// when the lowest eigenvalue sits in a tight cluster.
    pub block: usize,
    pub max_outer: usize,
    pub inner: SolverOptions,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-6, block: 10, max_outer: 200, inner: SolverOptions { tol: 1e-11, max_iter: 2000 }, seed: 17 }
    }
}

fn check_field(m: &Metric, f: &ScalarField) -> Result<()> {
    if f.grid() != m.grid() {
        return Err(Error::InvalidArgument("field grid does not match the metric".into()));
    }
    check_finite("operator input", f.values())
}

/// `Δ_φ f = g^{ij̄} ∂_i∂_{j̄} f`.
pub fn laplace_phi(m: &Metric, f: &ScalarField) -> Result<ScalarField> {
    check_field(m, f)?;
    let hess = m.torus().complex_hessian(f)?;
    Ok(m.contract(&hess.values))
}

/// Divergence form `−Re Σ_i ∂_i(det(h) g^{ij̄} ∂_{j̄} u)`, symmetric and
/// positive semi-definite in the Euclidean grid inner product. Equals
/// `−det(h) Δ_φ u` up to aliasing.
fn weak_laplacian(m: &Metric, u: &[f64]) -> Vec<f64> {
    let n = m.n();
    let torus = m.torus();
    let spec = torus.forward_complex(&u.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>());
    let grads: Vec<Vec<C64>> = (0..n).map(|j| torus.derivative_of_spectrum(&spec, &[Deriv::Anti(j)])).collect();
    let det = m.density();
    let ginv = m.inverse();
    let mut acc = vec![C64::default(); u.len()];
    for i in 0..n {
        let flux: Vec<C64> = (0..u.len())
            .into_par_iter()
            .map(|x| {
                let mut s = C64::default();
                for (j, g) in grads.iter().enumerate() {
                    s += ginv[x][i][j] * g[x];
                }
                s * det[x]
            })
            .collect();
        let mut fs = torus.forward_complex(&flux);
        let freq = torus.freq();
        torus.apply_symbol(&mut fs, |mm| freq.holo_symbol(mm, i));
        for (a, b) in acc.iter_mut().zip(fs) {
            *a += b;
        }
    }
    torus.inverse(acc).into_iter().map(|c| -c.re).collect()
}

/// Solves `Δ_φ F = ρ − ρ̄` (ρ̄ the `μ_φ`-mean) for mean-zero `F`.
///
/// CG on the divergence form, preconditioned by the flat inverse Laplacian;
/// iteration stops once `‖(b − K F)/det h‖ ≤ tol · ‖ρ − ρ̄‖`. Components of
/// the right-hand side on the unresolved checkerboard modes (see
/// [`Torus::unresolved_modes`](crate::spectral::Torus::unresolved_modes)) lie
/// outside the range of the discrete operator and are discarded.
pub fn green_solve(m: &Metric, rho: &ScalarField, opts: SolverOptions) -> Result<GreenSolution> {
    check_field(m, rho)?;
    let det = m.density();
    let mean = m.weighted_mean(rho.values());
    let centered: Vec<f64> = rho.values().iter().map(|r| r - mean).collect();
    let w = m.grid().weight();
    let scale = (w * pairwise_sum_by(centered.len(), |i| centered[i] * centered[i])).sqrt();
    if scale == 0.0 {
        return Ok(GreenSolution { f: ScalarField::zeros(m.grid()), residual_norm: 0.0, iterations: 0 });
    }
    // K F = −det Δ_φ F = −det (ρ − ρ̄)
    let b: Vec<f64> = centered.iter().zip(det).map(|(c, d)| -c * d).collect();
    let torus = m.torus();
    let norm = |r: &[f64]| (w * pairwise_sum_by(r.len(), |i| (r[i] / det[i]).powi(2))).sqrt();
    let out = pcg(
        |u| weak_laplacian(m, u),
        |r| torus.inverse_neg_laplace(r),
        |v| torus.project_resolved(v),
        norm,
        &b,
        opts.tol * scale,
        opts.max_iter,
    )?;
    let mut f = out.x;
    let shift = m.weighted_mean(&f);
    f.iter_mut().for_each(|v| *v -= shift);
    Ok(GreenSolution {
        f: ScalarField::from_vec_unchecked(m.grid(), f),
        residual_norm: out.residual,
        iterations: out.iterations,
    })
}

/// `μ_φ`-orthogonal projection off the span of `basis`.
struct WeightedProjector {
    basis: Vec<Vec<f64>>,
    gram_lu: Vec<Vec<f64>>,
    weight: Vec<f64>,
}

impl WeightedProjector {
    fn new(basis: Vec<Vec<f64>>, weight: &[f64]) -> Self {
        let k = basis.len();
        let mut gram = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in a..k {
                let v = pairwise_sum_by(weight.len(), |i| basis[a][i] * basis[b][i] * weight[i]);
                gram[a][b] = v;
                gram[b][a] = v;
            }
        }
        // in-place Cholesky; the Gram matrix of independent vectors is SPD
        for j in 0..k {
            for p in 0..j {
                let l = gram[j][p];
                for i in j..k {
                    gram[i][j] -= gram[i][p] * l;
                }
            }
            let d = gram[j][j].sqrt();
            for i in j..k {
                gram[i][j] /= d;
            }
        }
        WeightedProjector { basis, gram_lu: gram, weight: weight.to_vec() }
    }

    fn apply(&self, u: &mut [f64]) {
        let k = self.basis.len();
        let w = &self.weight;
        let mut c: Vec<f64> =
            self.basis.iter().map(|z| pairwise_sum_by(u.len(), |i| z[i] * u[i] * w[i])).collect();
        let l = &self.gram_lu;
        for i in 0..k {
            for p in 0..i {
                c[i] -= l[i][p] * c[p];
            }
            c[i] /= l[i][i];
        }
        for i in (0..k).rev() {
            for p in i + 1..k {
                c[i] -= l[p][i] * c[p];
            }
            c[i] /= l[i][i];
        }
        for (z, ci) in self.basis.iter().zip(c) {
            u.iter_mut().zip(z).for_each(|(x, zi)| *x -= ci * zi);
        }
    }
}

/// Covariant holomorphic Hessian `f_{,αβ}` per point.
fn covariant_hessian(m: &Metric, spec: &[C64]) -> Vec<Mat> {
    let n = m.n();
    let torus = m.torus();
    let mut t = torus.holo_hessian_of_spectrum(spec);
    let grads: Vec<Vec<C64>> = (0..n).map(|c| torus.derivative_of_spectrum(spec, &[Deriv::Holo(c)])).collect();
    let gam = m.christoffel();
    t.par_iter_mut().enumerate().for_each(|(x, tx)| {
        for a in 0..n {
            for b in 0..n {
                let mut s = C64::default();
                for (c, g) in grads.iter().enumerate() {
                    s += gam[x][c][a][b] * g[x];
                }
                tx[a][b] -= s;
            }
        }
    });
    t
}

/// `U^{γδ} = det(h) g^{αγ̄} g^{βδ̄} T_{αβ}`.
fn raise_weighted(m: &Metric, t: &[Mat]) -> Vec<Mat> {
    let n = m.n();
    let ginv = m.inverse();
    let det = m.density();
    t.par_iter()
        .enumerate()
        .map(|(x, tx)| {
            let g = &ginv[x];
            let mut u = herm::ZERO;
            for c in 0..n {
                for d in 0..n {
                    let mut s = C64::default();
                    for a in 0..n {
                        for b in 0..n {
                            s += g[a][c] * g[b][d] * tx[a][b];
                        }
                    }
                    u[c][d] = s * det[x];
                }
            }
            u
        })
        .collect()
}

fn spectrum_of(m: &Metric, f: &[f64]) -> Vec<C64> {
    m.torus().forward_complex(&f.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())
}

/// `det(h) · D f`, the Euclidean-symmetric form of the operator.
fn lichnerowicz_weighted(m: &Metric, f: &[f64]) -> Vec<f64> {
    let n = m.n();
    let torus = m.torus();
    let spec = spectrum_of(m, f);
    let t = covariant_hessian(m, &spec);
    let u = raise_weighted(m, &t);
    let gam = m.christoffel();
    let freq = torus.freq();
    let mut acc = vec![C64::default(); f.len()];
    // Σ_{γδ} ∂_{γ̄}∂_{δ̄} U^{γδ}
    for c in 0..n {
        for d in c..n {
            let comp: Vec<C64> = u.iter().map(|ux| ux[c][d]).collect();
            let mut s = torus.forward_complex(&comp);
            let mult = if c == d { 1.0 } else { 2.0 };
            torus.apply_symbol(&mut s, |mm| freq.antiholo_symbol(mm, c) * freq.antiholo_symbol(mm, d) * mult);
            acc.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }
    // Σ_ε ∂_{ε̄}( conj(Γ^ε_{γδ}) U^{γδ} )
    for e in 0..n {
        let comp: Vec<C64> = (0..f.len())
            .into_par_iter()
            .map(|x| {
                let mut s = C64::default();
                for c in 0..n {
                    for d in 0..n {
                        s += gam[x][e][c][d].conj() * u[x][c][d];
                    }
                }
                s
            })
            .collect();
        let mut s = torus.forward_complex(&comp);
        torus.apply_symbol(&mut s, |mm| freq.antiholo_symbol(mm, e));
        acc.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
    torus.inverse(acc).into_iter().map(|c| c.re).collect()
}

/// Applies the Lichnérowicz operator `D f = f_{,αβ}^{ αβ}` of the metric.
pub fn lichnerowicz_apply(m: &Metric, f: &ScalarField) -> Result<ScalarField> {
    check_field(m, f)?;
    let kd = lichnerowicz_weighted(m, f.values());
    let det = m.density();
    let v = kd.iter().zip(det).map(|(k, d)| k / d).collect();
    Ok(ScalarField::from_vec_unchecked(m.grid(), v))
}

/// Bilinear form `Re ∫ f_{,αβ} conj(g_{,γδ}) g^{αγ̄} g^{βδ̄} μ_φ`.
pub fn lichnerowicz_form(m: &Metric, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_field(m, f)?;
    check_field(m, g)?;
    let n = m.n();
    let tf = covariant_hessian(m, &spectrum_of(m, f.values()));
    let uf = raise_weighted(m, &tf);
    let tg = if std::ptr::eq(f, g) { tf } else { covariant_hessian(m, &spectrum_of(m, g.values())) };
    let s = pairwise_sum_by(uf.len(), |x| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += (uf[x][a][b] * tg[x][a][b].conj()).re;
            }
        }
        s
    });
    Ok(m.grid().weight() * s)
}

/// `∫ R_{,αβ} R^{,αβ} μ_φ ≥ 0`; the Calabi energy decreases at twice this rate.
pub fn dissipation(m: &Metric, r: &ScalarField) -> Result<f64> {
    lichnerowicz_form(m, r, r)
}

/// Futaki character on the frame field `∂/∂z_j`: `−∫ ∂_{z_j} F_φ μ_φ`.
pub fn futaki(m: &Metric, j: usize, opts: SolverOptions) -> Result<C64> {
    if j >= m.n() {
        return Err(Error::InvalidArgument(format!("axis {j} out of range for n = {}", m.n())));
    }
    let green = green_solve(m, &m.scalar_curvature(), opts)?;
    futaki_from_green(m, &green.f, j)
}

/// [`futaki`] for every frame field `∂/∂z_0, …`, sharing one Green solve.
pub fn futaki_components(m: &Metric, opts: SolverOptions) -> Result<Vec<C64>> {
    let green = green_solve(m, &m.scalar_curvature(), opts)?;
    (0..m.n()).map(|j| futaki_from_green(m, &green.f, j)).collect()
}

fn futaki_from_green(m: &Metric, f: &ScalarField, j: usize) -> Result<C64> {
    let df = m.torus().d_holo(f, j)?;
    let det = m.density();
    let v = df.values();
    let re = pairwise_sum_by(v.len(), |i| v[i].re * det[i]);
    let im = pairwise_sum_by(v.len(), |i| v[i].im * det[i]);
    Ok(-C64::new(re, im) * m.grid().weight())
}

/// Smallest non-zero eigenvalue of `D` on `μ_φ`-mean-zero fields by block
/// inverse iteration with Rayleigh–Ritz, working `μ_φ`-orthogonally to the
/// discrete kernel (constants and unresolved checkerboard modes). Each step
/// solves `D u = v` per block vector with CG preconditioned by the flat
/// `(Id + Δ_c²)⁻¹`.
pub fn lowest_eigenvalue(m: &Metric, opts: EigenOptions) -> Result<EigenReport> {
    if opts.block == 0 {
        return Err(Error::InvalidArgument("eigen block size must be positive".into()));
    }
    let len = m.grid().len();
    let det = m.density().to_vec();
    let w = m.grid().weight();
    let torus = m.torus();
    let mu_dot = |a: &[f64], b: &[f64]| w * pairwise_sum_by(a.len(), |i| a[i] * b[i] * det[i]);
    let projector = WeightedProjector::new(torus.unresolved_modes(), &det);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = (0..opts.block)
        .map(|_| {
            let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            projector.apply(&mut v);
            v
        })
        .collect();

    let mut last_residual = f64::INFINITY;
    for it in 1..=opts.max_outer {
        let mut us = Vec::with_capacity(block.len());
        let mut kus = Vec::with_capacity(block.len());
        for v in &block {
            let b: Vec<f64> = v.iter().zip(&det).map(|(a, d)| a * d).collect();
            let bnorm = dot(&b, &b).sqrt();
            let out = pcg(
                |u| lichnerowicz_weighted(m, u),
                |r| torus.inverse_biharmonic_shift_meanfree(r),
                |v| torus.project_resolved(v),
                |r| dot(r, r).sqrt(),
                &b,
                opts.inner.tol * bnorm,
                opts.inner.max_iter,
            )?;
            let mut u = out.x;
            projector.apply(&mut u);
            kus.push(lichnerowicz_weighted(m, &u));
            us.push(u);
        }
        let (theta, coeffs) = rayleigh_ritz(&us, &kus, &mu_dot, w)?;
        let combine = |vs: &[Vec<f64>], c: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; len];
            for (v, &ci) in vs.iter().zip(c) {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += ci * x);
            }
            out
        };
        block = coeffs.iter().map(|c| combine(&us, c)).collect();
        let u = &block[0];
        let ku = combine(&kus, &coeffs[0]);
        let lambda = theta[0];
        let res: Vec<f64> = ku.iter().zip(&det).zip(u).map(|((k, d), x)| k / d - lambda * x).collect();
        last_residual = mu_dot(&res, &res).sqrt();
        if last_residual <= opts.tol {
            return Ok(EigenReport {
                lambda,
                eigenfield: ScalarField::from_vec_unchecked(m.grid(), block.swap_remove(0)),
                rayleigh_residual: last_residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_outer, residual: last_residual })
}

/// Ritz pairs of `K` on `span(us)` with respect to `μ_φ`: ascending values and,
/// per value, the coefficients of a `μ_φ`-orthonormal Ritz vector.
fn rayleigh_ritz(
    us: &[Vec<f64>],
    kus: &[Vec<f64>],
    mu_dot: &dyn Fn(&[f64], &[f64]) -> f64,
    w: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    use nalgebra::DMatrix;
    let p = us.len();
    let gram = DMatrix::from_fn(p, p, |a, b| mu_dot(&us[a], &us[b]));
    // K already carries det(h), so the stiffness pairs with the plain sum
    let stiff = DMatrix::from_fn(p, p, |a, b| {
        let (x, y) = (&kus[a], &us[b]);
        let (x2, y2) = (&kus[b], &us[a]);
        0.5 * w * (pairwise_sum_by(x.len(), |i| x[i] * y[i]) + pairwise_sum_by(x2.len(), |i| x2[i] * y2[i]))
    });
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let linv = chol.l().try_inverse().expect("Cholesky factor is invertible");
    let reduced = &linv * stiff * linv.transpose();
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let back = linv.transpose() * &eig.eigenvectors;
    let theta = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let coeffs = order.iter().map(|&k| back.column(k).iter().copied().collect()).collect();
    Ok((theta, coeffs))
}
