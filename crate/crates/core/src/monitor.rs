//! Compactness diagnostics of a single state: potential and curvature sizes,
//! metric equivalence constants, the log volume ratio `F = log det h`, and
//! Sobolev/Hölder proxies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Metric;
use crate::herm::{self, Mat};
use crate::sum::pairwise_sum_by;

/// Exponent of the Sobolev proxy `‖φ‖_{W^{2,p}}`.
pub const SOBOLEV_P: i32 = 8;
/// Exponent of the discrete Hölder seminorm of the metric.
pub const HOLDER_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub sup_phi: f64,
    /// Largest pointwise norm of the Ricci form measured against the metric.
    pub sup_ric: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub sup_f: f64,
    pub inf_f: f64,
    /// Background-measure mean of `F`.
    pub mean_f: f64,
    pub sup_laplace_phi: f64,
    pub sup_laplace_f: f64,
    pub sobolev_w2p: f64,
    pub holder_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenCheck {
    pub holds: bool,
    /// `V_φ/V₀ − exp(mean F) ≥ 0`.
    pub margin: f64,
}

/// `(tr(h⁻¹ Ric h⁻¹ Ric))^{1/2}` at one point.
fn ricci_norm(n: usize, hinv: &Mat, ric: &Mat) -> f64 {
    let a = herm::mul(n, hinv, ric);
    herm::trace_product(n, &a, &a).re.max(0.0).sqrt()
}

pub fn report(m: &Metric) -> CompactnessReport {
    let n = m.n();
    let torus = m.torus();
    let phi = m.potential();

    let ricci = m.ricci();
    let h = m.components();
    let sup_ric = ricci
        .values
        .par_iter()
        .zip(h.par_iter())
        .map(|(r, hx)| ricci_norm(n, &herm::inverse(n, hx), r))
        .reduce(|| 0.0, f64::max);

    let (lambda, big_lambda) = m.equivalence_constants();
    let f = m.log_ratio();
    let lap_phi = torus.laplace_flat(phi).expect("potential is finite");
    let lap_f = torus.laplace_flat(&f).expect("log det is finite");

    CompactnessReport {
        sup_phi: phi.sup_norm(),
        sup_ric,
        lambda,
        big_lambda,
        sup_f: f.max(),
        inf_f: f.min(),
        mean_f: f.mean(),
        sup_laplace_phi: lap_phi.sup_norm(),
        sup_laplace_f: lap_f.sup_norm(),
        sobolev_w2p: sobolev_proxy(m),
        holder_h: holder_seminorm(m, HOLDER_ALPHA),
    }
}

/// `(∫ |φ|^p + |∇φ|^p + |∇²φ|^p)^{1/p}` against the background measure, with
/// real spectral derivatives.
pub fn sobolev_proxy(m: &Metric) -> f64 {
    let grid = m.grid();
    let axes = grid.axes();
    let spec = m.potential_spectrum();
    let torus = m.torus();
    let len = grid.len();
    let mut grad2 = vec![0.0; len];
    let mut hess2 = vec![0.0; len];
    for a in 0..axes {
        let d = torus.real_derivative_of_spectrum(spec, &[a]);
        grad2.iter_mut().zip(&d).for_each(|(g, v)| *g += v * v);
        for b in a..axes {
            let d = torus.real_derivative_of_spectrum(spec, &[a, b]);
            let mult = if a == b { 1.0 } else { 2.0 };
            hess2.iter_mut().zip(&d).for_each(|(g, v)| *g += mult * v * v);
        }
    }
    let p = SOBOLEV_P as f64;
    let phi = m.potential().values();
    let s = pairwise_sum_by(len, |i| phi[i].abs().powf(p) + grad2[i].powf(p / 2.0) + hess2[i].powf(p / 2.0));
    (grid.weight() * s).powf(1.0 / p)
}

/// Discrete `C^α` seminorm of the metric: the largest
/// `‖h(x + s e_a) − h(x)‖_F / (s·spacing)^α` over grid points, axes and
/// periodic offsets `1 ≤ s ≤ N/2`.
pub fn holder_seminorm(m: &Metric, alpha: f64) -> f64 {
    let grid = m.grid();
    let n = m.n();
    let pts = grid.points_per_axis();
    let dx = grid.spacing();
    let h = m.components();
    let diff = |a: &Mat, b: &Mat| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += (a[i][j] - b[i][j]).norm_sqr();
            }
        }
        s.sqrt()
    };
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let mi = grid.multi_index(x);
            let mut best: f64 = 0.0;
            for a in 0..grid.axes() {
                for s in 1..=pts / 2 {
                    let mut mj = mi;
                    mj[a] = (mj[a] + s) % pts;
                    let y = grid.flat_index(&mj[..grid.axes()]);
                    best = best.max(diff(&h[x], &h[y]) / (s as f64 * dx).powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Jensen's inequality `exp(⨍F) ≤ ⨍exp(F) = V_φ/V₀` with its margin.
pub fn jensen_check(m: &Metric) -> JensenCheck {
    let det = m.density();
    let volume_ratio = pairwise_sum_by(det.len(), |i| det[i]) / det.len() as f64;
    let mean_f = pairwise_sum_by(det.len(), |i| det[i].ln()) / det.len() as f64;
    let margin = volume_ratio - mean_f.exp();
    JensenCheck { holds: margin >= -1e-10, margin }
}
