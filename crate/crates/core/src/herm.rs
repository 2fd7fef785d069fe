//! Small dense complex matrices (n ≤ 2) used pointwise for metric algebra.
//!
//! A [`Mat`] always has 2×2 storage; only the leading `n×n` block is
//! meaningful. Entry `[i][j]` of a metric stores `h_{i j̄}`.

use num_complex::Complex64 as C64;

pub type Mat = [[C64; 2]; 2];

pub const ZERO: Mat = [[C64 { re: 0.0, im: 0.0 }; 2]; 2];

pub fn identity(n: usize) -> Mat {
    let mut m = ZERO;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = C64::new(1.0, 0.0);
    }
    m
}

/// Real determinant of a Hermitian block.
pub fn det(n: usize, m: &Mat) -> f64 {
    match n {
        1 => m[0][0].re,
        _ => (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re,
    }
}

/// Inverse by closed form (scalar in n = 1, adjugate in n = 2).
pub fn inverse(n: usize, m: &Mat) -> Mat {
    let mut inv = ZERO;
    match n {
        1 => inv[0][0] = C64::new(1.0, 0.0) / m[0][0],
        _ => {
            let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            inv[0][0] = m[1][1] / d;
            inv[1][1] = m[0][0] / d;
            inv[0][1] = -m[0][1] / d;
            inv[1][0] = -m[1][0] / d;
        }
    }
    inv
}

pub fn mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut c = ZERO;
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::default();
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn trace(n: usize, a: &Mat) -> C64 {
    (0..n).map(|i| a[i][i]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(n: usize, a: &Mat, b: &Mat) -> C64 {
    let mut s = C64::default();
    for i in 0..n {
        for k in 0..n {
            s += a[i][k] * b[k][i];
        }
    }
    s
}

/// Smallest and largest eigenvalue of a Hermitian block.
pub fn eigen_extremes(n: usize, m: &Mat) -> (f64, f64) {
    match n {
        1 => (m[0][0].re, m[0][0].re),
        _ => {
            let a = m[0][0].re;
            let b = m[1][1].re;
            let c = m[0][1].norm_sqr();
            let mid = 0.5 * (a + b);
            let rad = (0.25 * (a - b) * (a - b) + c).sqrt();
            (mid - rad, mid + rad)
        }
    }
}

/// Largest deviation from Hermitian symmetry, `max |m_{ij} − conj(m_{ji})|`.
pub fn hermitian_defect(n: usize, m: &Mat) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            d = d.max((m[i][j] - m[j][i].conj()).norm());
        }
    }
    d
}
