//! Variational Dirichlet problem on the unit disc and the removable
//! singularity check for weak cscK metrics on the punctured disc (n = 1).
//!
//! The disc is a masked, cell-centered Cartesian grid on `[−1, 1]²` with
//! nodes `−1 + h/2 + i·h`, `h = 2/N_d`; for odd `N_d` the origin is a node.
//! Interior nodes have `|z| < 1`; the band is the set of interior nodes with
//! a 4-neighbor outside, and carries the Dirichlet data.
//!
//! Discrete functional, for a coefficient `a = a_{11̄}` (so `a^{11̄} det a = 1`):
//!
//! ```text
//! I(u) = ¼ Σ_{edges} (u_p − u_q)²  +  Σ_{interior} R̄·u·a·h²
//! ```
//!
//! The edge term is the plain Dirichlet integral `∫|∂_z u|²`. Its minimizer
//! with band values pinned solves `½·(graph Laplacian) u = −R̄ a h²`, i.e.
//! `∂∂̄u = (R̄/2)·a`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::herm::Mat;
use crate::krylov::{dot, pcg, SolverOptions};
use crate::spectral::Torus;
use crate::sum::pairwise_sum_by;

/// Relative residual target of the disc solve.
pub const DISC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Exterior,
    Band,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrid {
    points: usize,
    kind: Vec<NodeKind>,
    /// Dense index of each free node, `usize::MAX` elsewhere.
    free_index: Vec<usize>,
    free: Vec<usize>,
    puncture: Option<usize>,
}

impl DiscGrid {
    /// `points` nodes per axis (≥ 5); with `puncture`, the node nearest the
    /// origin is marked as the puncture.
    pub fn new(points: usize, puncture: bool) -> Result<Self> {
        if points < 5 {
            return Err(Error::InvalidArgument(format!("disc grid needs at least 5 points per axis, got {points}")));
        }
        let h = 2.0 / points as f64;
        let coord = |i: usize| -1.0 + 0.5 * h + i as f64 * h;
        let inside = |i: isize, j: isize| {
            i >= 0 && j >= 0 && (i as usize) < points && (j as usize) < points && {
                let (x, y) = (coord(i as usize), coord(j as usize));
                x * x + y * y < 1.0
            }
        };
        let mut kind = vec![NodeKind::Exterior; points * points];
        for i in 0..points {
            for j in 0..points {
                let (ii, jj) = (i as isize, j as isize);
                if !inside(ii, jj) {
                    continue;
                }
                let all_in = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().all(|(di, dj)| inside(ii + di, jj + dj));
                kind[i * points + j] = if all_in { NodeKind::Free } else { NodeKind::Band };
            }
        }
        let mut free_index = vec![usize::MAX; kind.len()];
        let mut free = Vec::new();
        for (p, k) in kind.iter().enumerate() {
            if *k == NodeKind::Free {
                free_index[p] = free.len();
                free.push(p);
            }
        }
        let puncture = puncture.then(|| {
            let c = (points - 1) / 2;
            (c..=points / 2)
                .flat_map(|i| (c..=points / 2).map(move |j| (i, j)))
                .min_by(|a, b| {
                    let r = |(i, j): (usize, usize)| coord(i).powi(2) + coord(j).powi(2);
                    r(*a).total_cmp(&r(*b))
                })
                .map(|(i, j)| i * points + j)
                .expect("grid is non-empty")
        });
        Ok(DiscGrid { points, kind, free_index, free, puncture })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    /// Node `(i, j)` with `x = coord(i)`, `y = coord(j)` lives at `i·N_d + j`.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let h = self.spacing();
        let c = |i: usize| -1.0 + 0.5 * h + i as f64 * h;
        (c(node / self.points), c(node % self.points))
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kind[node]
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.kind[node] != NodeKind::Exterior
    }

    pub fn puncture(&self) -> Option<usize> {
        self.puncture
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&p| self.is_interior(p))
    }

    pub fn band_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&p| self.kind[p] == NodeKind::Band)
    }

    fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((node / self.points) as isize, (node % self.points) as isize);
        let n = self.points as isize;
        [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| {
            let (a, b) = (i + di, j + dj);
            (a >= 0 && b >= 0 && a < n && b < n).then(|| (a * n + b) as usize)
        })
    }

    /// Edges between interior nodes, each once.
    fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.interior_nodes()
            .flat_map(move |p| self.neighbors(p).filter(move |&q| q > p && self.is_interior(q)).map(move |q| (p, q)))
    }

    /// Samples `f(x, y)` at every node of the square.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .map(|p| {
                let (x, y) = self.coords(p);
                f(x, y)
            })
            .collect()
    }
}

/// Dirichlet problem data: coefficient `a = a_{11̄}` on interior nodes,
/// boundary values on the band (read from `boundary` at band nodes), and the
/// constant of the source term.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscProblem {
    pub grid: DiscGrid,
    pub a: Vec<f64>,
    pub boundary: Vec<f64>,
    pub rbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakSolution {
    /// Values on every node of the square; exterior nodes hold 0.
    pub u: Vec<f64>,
    pub energy: f64,
    /// `‖A u − b‖ / ‖b‖` of the reduced system.
    pub residual: f64,
    pub iterations: usize,
}

impl DiscProblem {
    pub fn new(grid: DiscGrid, a: Vec<f64>, boundary: Vec<f64>, rbar: f64) -> Result<Self> {
        if a.len() != grid.len() || boundary.len() != grid.len() {
            return Err(Error::InvalidArgument("coefficient and boundary fields must cover the square grid".into()));
        }
        if !rbar.is_finite() {
            return Err(Error::InvalidArgument("R̄ must be finite".into()));
        }
        let p = DiscProblem { grid, a, boundary, rbar };
        p.ellipticity()?;
        for q in p.grid.band_nodes() {
            if !p.boundary[q].is_finite() {
                return Err(Error::NonFinite { what: "boundary data", index: q });
            }
        }
        Ok(p)
    }

    /// Uniform ellipticity witnesses `(λ_e, Λ_e)` over interior nodes.
    pub fn ellipticity(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self.grid.interior_nodes() {
            let a = self.a[p];
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::EllipticityLost { node: p, min_eig: a });
            }
            lo = lo.min(a);
            hi = hi.max(a);
        }
        Ok((lo, hi))
    }

    /// `u` on the interior with the band pinned to the boundary data.
    fn lift(&self, free: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut u = vec![0.0; g.len()];
        for p in g.band_nodes() {
            u[p] = self.boundary[p];
        }
        for (k, &p) in g.free.iter().enumerate() {
            u[p] = free[k];
        }
        u
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        g.free
            .iter()
            .map(|&p| {
                let mut s = 0.0;
                for q in g.neighbors(p) {
                    let xq = match g.free_index[q] {
                        usize::MAX => 0.0,
                        k => x[k],
                    };
                    s += x[g.free_index[p]] - xq;
                }
                0.5 * s
            })
            .collect()
    }

    fn rhs(&self) -> Vec<f64> {
        let g = &self.grid;
        let h2 = g.spacing().powi(2);
        g.free
            .iter()
            .map(|&p| {
                let pinned: f64 = g.neighbors(p).filter(|&q| g.kind[q] == NodeKind::Band).map(|q| self.boundary[q]).sum();
                0.5 * pinned - self.rbar * self.a[p] * h2
            })
            .collect()
    }

    /// Applies the reduced operator to the free values of a full field and
    /// returns the right-hand side that makes `u` an exact discrete solution.
    pub fn source_for(&self, u: &[f64]) -> Vec<f64> {
        let free: Vec<f64> = self.grid.free.iter().map(|&p| u[p]).collect();
        let mut b = self.apply(&free);
        let g = &self.grid;
        for (k, &p) in g.free.iter().enumerate() {
            b[k] -= 0.5 * g.neighbors(p).filter(|&q| g.kind[q] == NodeKind::Band).map(|q| self.boundary[q]).sum::<f64>();
        }
        b
    }

    /// Minimizes `I` with a caller-supplied reduced source `s` in place of
    /// `−R̄ a h²` (used by manufactured-solution checks).
    pub fn minimize_with_source(&self, source: &[f64]) -> Result<WeakSolution> {
        let g = &self.grid;
        if source.len() != g.free.len() {
            return Err(Error::InvalidArgument("source must have one value per free node".into()));
        }
        let mut b: Vec<f64> = source.to_vec();
        for (k, &p) in g.free.iter().enumerate() {
            b[k] += 0.5 * g.neighbors(p).filter(|&q| g.kind[q] == NodeKind::Band).map(|q| self.boundary[q]).sum::<f64>();
        }
        self.solve(&b)
    }

    fn solve(&self, b: &[f64]) -> Result<WeakSolution> {
        let bnorm = dot(b, b).sqrt();
        let out = if bnorm == 0.0 {
            crate::krylov::CgOutcome { x: vec![0.0; b.len()], iterations: 0, residual: 0.0 }
        } else {
            pcg(
                |x| self.apply(x),
                // Jacobi: the diagonal of ½·graph Laplacian is 2 at free nodes
                |r| r.iter().map(|v| 0.5 * v).collect(),
                |_| {},
                |r| dot(r, r).sqrt(),
                b,
                DISC_TOL * bnorm,
                SolverOptions::default().max_iter.max(20 * self.grid.points),
            )?
        };
        let u = self.lift(&out.x);
        let energy = dirichlet_energy(self, &u)?;
        let residual = if bnorm == 0.0 { 0.0 } else { out.residual / bnorm };
        Ok(WeakSolution { u, energy, residual, iterations: out.iterations })
    }
}

/// Discrete `I(u)`; `u` must be finite on every interior node.
pub fn dirichlet_energy(p: &DiscProblem, u: &[f64]) -> Result<f64> {
    let g = &p.grid;
    if u.len() != g.len() {
        return Err(Error::InvalidArgument("field must cover the square grid".into()));
    }
    p.ellipticity()?;
    for q in g.interior_nodes() {
        if !u[q].is_finite() {
            return Err(Error::NonFinite { what: "disc field", index: q });
        }
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let grad = pairwise_sum_by(edges.len(), |e| {
        let (a, b) = edges[e];
        (u[a] - u[b]).powi(2)
    });
    let interior: Vec<usize> = g.interior_nodes().collect();
    let h2 = g.spacing().powi(2);
    let source = pairwise_sum_by(interior.len(), |k| {
        let q = interior[k];
        u[q] * p.a[q]
    });
    Ok(0.25 * grad + p.rbar * h2 * source)
}

/// The minimizer of `I` with band values pinned.
pub fn minimize_dirichlet(p: &DiscProblem) -> Result<WeakSolution> {
    p.solve(&p.rhs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Desingularization {
    pub solution: WeakSolution,
    /// `a = 1 + ∂∂̄φ` on interior nodes.
    pub coefficient: Vec<f64>,
    /// `v = log a − u₀` on interior nodes (0 elsewhere).
    pub v: Vec<f64>,
    /// `sup|v|` over interior nodes farther than `2h` from the origin.
    pub sup_v: f64,
}

/// `1 + ¼(φ_xx + φ_yy)` by centered differences, one-sided next to the
/// puncture, and the neighbor mean at the puncture itself.
pub fn coefficient_from_potential(grid: &DiscGrid, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != grid.len() {
        return Err(Error::InvalidArgument("potential must cover the square grid".into()));
    }
    let n = grid.points;
    let h2 = grid.spacing().powi(2);
    let at = |i: isize, j: isize| phi[i as usize * n + j as usize];
    let punct = grid.puncture.map(|p| ((p / n) as isize, (p % n) as isize));
    let second = |i: isize, j: isize, di: isize, dj: isize| -> f64 {
        if let Some((pi, pj)) = punct {
            let (bi, bj) = (i - di, j - dj);
            let (fi, fj) = (i + di, j + dj);
            if (bi, bj) == (pi, pj) {
                return (at(i, j) - 2.0 * at(fi, fj) + at(fi + di, fj + dj)) / h2;
            }
            if (fi, fj) == (pi, pj) {
                return (at(i, j) - 2.0 * at(bi, bj) + at(bi - di, bj - dj)) / h2;
            }
        }
        let last = n as isize - 1;
        let (bi, bj, fi, fj) = (i - di, j - dj, i + di, j + dj);
        if bi < 0 || bj < 0 {
            return (at(i, j) - 2.0 * at(fi, fj) + at(fi + di, fj + dj)) / h2;
        }
        if fi > last || fj > last {
            return (at(i, j) - 2.0 * at(bi, bj) + at(bi - di, bj - dj)) / h2;
        }
        (at(fi, fj) - 2.0 * at(i, j) + at(bi, bj)) / h2
    };
    let mut a = vec![0.0; grid.len()];
    for p in grid.interior_nodes() {
        if Some(p) == grid.puncture {
            continue;
        }
        let (i, j) = ((p / n) as isize, (p % n) as isize);
        a[p] = 1.0 + 0.25 * (second(i, j, 1, 0) + second(i, j, 0, 1));
    }
    if let Some(p) = grid.puncture {
        a[p] = grid.neighbors(p).map(|q| a[q]).sum::<f64>() / 4.0;
    }
    for p in grid.interior_nodes() {
        if !(a[p] > 0.0) {
            return Err(Error::EllipticityLost { node: p, min_eig: a[p] });
        }
    }
    Ok(a)
}

/// Reconstructs `u₀` from `φ` on the (punctured) disc and measures
/// `v = log det(δ + ∂∂̄φ) − u₀`.
///
/// `rbar` is the constant scalar curvature of the metric. The Dirichlet
/// problem is posed so that `u₀` solves `−g^{11̄}∂∂̄u₀ = R̄`, the equation
/// `log det` satisfies for a cscK metric; since the minimizer of `I` solves
/// `∂∂̄u = (R̄_I/2)·a`, the functional is built with `R̄_I = −2·rbar`.
pub fn desingularize(grid: &DiscGrid, phi: &[f64], rbar: f64) -> Result<Desingularization> {
    let a = coefficient_from_potential(grid, phi)?;
    let log_a: Vec<f64> = a.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
    let problem = DiscProblem::new(grid.clone(), a.clone(), log_a.clone(), -2.0 * rbar)?;
    let solution = minimize_dirichlet(&problem)?;
    let mut v = vec![0.0; grid.len()];
    let mut sup_v: f64 = 0.0;
    let cut = 2.0 * grid.spacing();
    for p in grid.interior_nodes() {
        v[p] = log_a[p] - solution.u[p];
        let (x, y) = grid.coords(p);
        if (x * x + y * y).sqrt() > cut {
            sup_v = sup_v.max(v[p].abs());
        }
    }
    Ok(Desingularization { solution, coefficient: a, v, sup_v })
}

/// Reads a one-dimensional torus potential in the chart `z ↦ center + radius·z`
/// and rescales it, `φ_D(z) = radius⁻²·φ_T(center + radius·z)`, evaluating the
/// trigonometric interpolant at every square-grid node. Nyquist modes are
/// skipped since they have no unique continuous extension.
pub fn torus_chart(torus: &Torus, phi: &ScalarField, grid: &DiscGrid, center: [f64; 2], radius: f64) -> Result<Vec<f64>> {
    let tg = torus.grid();
    if tg.n() != 1 || phi.grid() != tg {
        return Err(Error::InvalidArgument("torus chart needs a potential on a one-dimensional torus".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("chart radius must be positive, got {radius}")));
    }
    let nt = tg.points_per_axis();
    let nd = grid.points();
    let scale = 1.0 / tg.len() as f64;
    let spec: Vec<C64> = torus.forward(phi).into_iter().map(|c| c * scale).collect();
    let ks: Vec<i64> = (0..nt).map(|m| tg.wavenumber(m)).collect();
    let nyq = (nt / 2) as i64;
    let coord = |i: usize| grid.coords(i * nd).0;
    // e[axis][i][m] = exp(i k_m (center + radius·coord_i))
    let table = |c: f64| -> Vec<Vec<C64>> {
        (0..nd)
            .map(|i| {
                let s = c + radius * coord(i);
                ks.iter().map(|&k| if k.abs() == nyq { C64::default() } else { C64::from_polar(1.0, k as f64 * s) }).collect()
            })
            .collect()
    };
    let ex = table(center[0]);
    let ey = table(center[1]);
    // b[mx][j] = Σ_my ĉ[mx, my] e_y[j][my]
    let b: Vec<Vec<C64>> = (0..nt)
        .map(|mx| (0..nd).map(|j| (0..nt).map(|my| spec[mx * nt + my] * ey[j][my]).sum()).collect())
        .collect();
    let inv_r2 = radius.powi(-2);
    let mut out = vec![0.0; grid.len()];
    for i in 0..nd {
        for j in 0..nd {
            let v: C64 = (0..nt).map(|mx| ex[i][mx] * b[mx][j]).sum();
            out[i * nd + j] = v.re * inv_r2;
        }
    }
    Ok(out)
}

/// Maximum-principle bracket `|z|²·Σ_i a^{iī} + ((q−2)/2)·Re(a^{ij̄} z̄_i z_j)`
/// at sample points `z` with inverse coefficients `a_inv` (`n×n` blocks).
/// Returns the values and their minimum.
pub fn barrier_bracket(n: usize, z: &[[C64; 2]], a_inv: &[Mat], q: f64) -> Result<(Vec<f64>, f64)> {
    if !(q < 0.0) {
        return Err(Error::InvalidArgument(format!("barrier exponent q must be negative, got {q}")));
    }
    if !(n == 1 || n == 2) || z.len() != a_inv.len() {
        return Err(Error::InvalidArgument("need n ∈ {1, 2} and one coefficient block per point".into()));
    }
    let vals: Vec<f64> = z
        .iter()
        .zip(a_inv)
        .map(|(z, a)| {
            let r2: f64 = (0..n).map(|i| z[i].norm_sqr()).sum();
            let tr: f64 = (0..n).map(|i| a[i][i].re).sum();
            let mut quad = C64::default();
            for i in 0..n {
                for j in 0..n {
                    quad += a[i][j] * z[i].conj() * z[j];
                }
            }
            r2 * tr + 0.5 * (q - 2.0) * quad.re
        })
        .collect();
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((vals, min))
}

/// [`barrier_bracket`] on the interior disc nodes with `|z| > h`, using
/// `a^{11̄} = 1/a`.
pub fn disc_barrier_bracket(grid: &DiscGrid, a: &[f64], q: f64) -> Result<(Vec<f64>, f64)> {
    let h = grid.spacing();
    let mut z = Vec::new();
    let mut inv = Vec::new();
    for p in grid.interior_nodes() {
        let (x, y) = grid.coords(p);
        if (x * x + y * y).sqrt() > h {
            z.push([C64::new(x, y), C64::default()]);
            let mut m = crate::herm::ZERO;
            m[0][0] = C64::new(1.0 / a[p], 0.0);
            inv.push(m);
        }
    }
    barrier_bracket(1, &z, &inv, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(points: usize, puncture: bool) -> DiscGrid {
        DiscGrid::new(points, puncture).unwrap()
    }

    #[test]
    fn band_surrounds_free_nodes() {
        let g = flat(33, true);
        for &p in g.free_nodes() {
            assert!(g.neighbors(p).all(|q| g.is_interior(q)));
        }
        assert!(g.band_nodes().count() > 0);
        assert_eq!(g.coords(g.puncture().unwrap()), (0.0, 0.0));
    }

    #[test]
    fn energy_examples() {
        let g = flat(129, false);
        let ones = vec![1.0; g.len()];
        let c = 2.5;
        let p = DiscProblem::new(g.clone(), ones.clone(), vec![0.0; g.len()], 0.0).unwrap();
        assert_eq!(dirichlet_energy(&p, &vec![c; g.len()]).unwrap(), 0.0);
        let p1 = DiscProblem { rbar: 1.0, ..p.clone() };
        let e = dirichlet_energy(&p1, &vec![c; g.len()]).unwrap();
        assert!((e - c * PI).abs() < 4.0 * c * g.spacing(), "{e}");
        let x = g.sample(|x, _| x);
        let e = dirichlet_energy(&p, &x).unwrap();
        assert!((e - PI / 4.0).abs() < g.spacing(), "{e}");
    }

    #[test]
    fn harmonic_extension_of_x() {
        let g = flat(65, false);
        let x = g.sample(|x, _| x);
        let p = DiscProblem::new(g.clone(), vec![1.0; g.len()], x.clone(), 0.0).unwrap();
        let s = minimize_dirichlet(&p).unwrap();
        let err = g.interior_nodes().map(|q| (s.u[q] - x[q]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(s.residual <= DISC_TOL);
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = flat(33, false);
        let p = DiscProblem::new(g.clone(), vec![1.0; g.len()], vec![0.0; g.len()], 0.0).unwrap();
        let s = minimize_dirichlet(&p).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        let g = flat(17, false);
        let mut a = vec![1.0; g.len()];
        let node = g.free_nodes()[3];
        a[node] = -0.1;
        assert!(matches!(
            DiscProblem::new(g.clone(), a, vec![0.0; g.len()], 0.0),
            Err(Error::EllipticityLost { node: k, .. }) if k == node
        ));
    }

    #[test]
    fn barrier_examples() {
        let id = {
            let mut m = crate::herm::ZERO;
            m[0][0] = C64::new(1.0, 0.0);
            m[1][1] = C64::new(1.0, 0.0);
            m
        };
        let z1 = [C64::new(0.3, -0.4), C64::default()];
        let (v, _) = barrier_bracket(1, &[z1], &[id], -0.5).unwrap();
        assert!((v[0] - 0.25 * (-0.5) / 2.0).abs() < 1e-15);
        let r = 0.7;
        let z2 = [C64::new(r, 0.0), C64::default()];
        let (v, _) = barrier_bracket(2, &[z2], &[id], -0.1).unwrap();
        assert!((v[0] - 0.95 * r * r).abs() < 1e-15);
        let (v, _) = barrier_bracket(2, &[z2], &[id], -1e-12).unwrap();
        assert!((v[0] - r * r).abs() < 1e-9);
        assert!(barrier_bracket(1, &[z1], &[id], 0.0).is_err());
    }
}
