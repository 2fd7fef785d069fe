use calabi_core::error::Error;
use calabi_core::flow;
use calabi_core::geometry::assemble_metric;
use calabi_core::grid::{ScalarField, TorusGrid};
use calabi_core::krylov::SolverOptions;
use calabi_core::operators::*;
use calabi_core::spectral::Torus;

fn torus(n: usize, pts: usize) -> Torus {
    Torus::new(TorusGrid::new(n, pts).unwrap())
}

#[test]
fn flat_lichnerowicz_is_the_squared_laplacian() {
    let t = torus(2, 8);
    let m = assemble_metric(&t, &ScalarField::zeros(t.grid())).unwrap();
    let f = flow::random_spectrum(&t, 2.0, 9, 1.0).unwrap();
    let d = lichnerowicz_apply(&m, &f).unwrap();
    let ll = t.laplace_flat(&t.laplace_flat(&f).unwrap()).unwrap();
    assert!(d.zip_map(&ll, |a, b| (a - b).abs()).max() < 1e-12);
}

#[test]
fn futaki_components_match_single_calls() {
    let t = torus(2, 8);
    let phi = ScalarField::from_fn(t.grid(), |x| 0.2 * (x[0] + x[3]).cos() + 0.1 * x[2].sin());
    let m = assemble_metric(&t, &phi).unwrap();
    let opts = SolverOptions { tol: 1e-12, max_iter: 2000 };
    let all = futaki_components(&m, opts).unwrap();
    for (j, v) in all.iter().enumerate() {
        assert_eq!(*v, futaki(&m, j, opts).unwrap());
    }
    assert!(matches!(futaki(&m, 2, opts), Err(Error::InvalidArgument(_))));
}

#[test]
fn lowest_eigenvalue_of_a_curved_metric() {
    let t = torus(1, 16);
    let phi = ScalarField::from_fn(t.grid(), |x| 0.4 * x[0].cos() + 0.2 * x[1].sin());
    let m = assemble_metric(&t, &phi).unwrap();
    let r = lowest_eigenvalue(&m, EigenOptions::default()).unwrap();
    assert!(r.lambda > 0.0 && r.rayleigh_residual <= 1e-6);
    // Rayleigh quotient of the eigenfield reproduces λ
    let q = lichnerowicz_form(&m, &r.eigenfield, &r.eigenfield).unwrap();
    let nrm = m.integrate(&r.eigenfield.map(|v| v * v).into_values());
    assert!((q / nrm - r.lambda).abs() < 1e-8 * r.lambda.max(1.0));
    assert!(m.weighted_mean(r.eigenfield.values()).abs() < 1e-10);
}

#[test]
fn dissipation_is_zero_only_on_constants() {
    let t = torus(1, 16);
    let m = assemble_metric(&t, &ScalarField::from_fn(t.grid(), |x| 0.3 * x[0].cos())).unwrap();
    assert!(dissipation(&m, &ScalarField::constant(t.grid(), 2.0)).unwrap().abs() < 1e-20);
    assert!(dissipation(&m, &m.scalar_curvature()).unwrap() > 0.0);
}

#[test]
fn grid_mismatch_is_rejected() {
    let t = torus(1, 16);
    let m = assemble_metric(&t, &ScalarField::zeros(t.grid())).unwrap();
    let other = ScalarField::zeros(TorusGrid::new(1, 8).unwrap());
    assert!(matches!(laplace_phi(&m, &other), Err(Error::InvalidArgument(_))));
    assert!(matches!(green_solve(&m, &other, SolverOptions::default()), Err(Error::InvalidArgument(_))));
}

#[test]
fn green_solver_reports_iteration_cap() {
    let t = torus(1, 32);
    let phi = flow::random_spectrum(&t, 3.0, 4, 0.6).unwrap();
    let m = assemble_metric(&t, &phi).unwrap();
    let rho = flow::random_spectrum(&t, 1.0, 5, 1.0).unwrap();
    let r = green_solve(&m, &rho, SolverOptions { tol: 1e-14, max_iter: 2 });
    assert!(matches!(r, Err(Error::NoConvergence { iterations: 2, .. })), "{r:?}");
}
