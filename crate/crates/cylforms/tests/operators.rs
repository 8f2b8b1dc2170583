mod support;

use std::sync::Arc;

use cylforms::forms::{exterior_d, hodge_star, inner_product, Grid, GridForm};
use cylforms::geometry::{conformal_rescale, ConformalFactor};
use cylforms::hodge_ops::{bochner_residual, conformal_identity_operator, laplacian0, laplacian1, laplacian2};
use cylforms::MetricField2D;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> Arc<Grid> {
    Grid::new(16, 48, 2.0).unwrap()
}

fn bump_form(grid: &Arc<Grid>, degree: u8, seed: u64) -> GridForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = support::random_form(grid, degree, &mut rng);
    let zc = 0.5 * grid.z_max();
    let half = 0.35 * grid.z_max();
    let n = grid.n_theta();
    let profile: Vec<f64> = (0..grid.len())
        .map(|i| {
            let s = (grid.z()[i / n] - zc) / half;
            if s.abs() < 1.0 { (1.0 - s * s).powi(8) } else { 0.0 }
        })
        .collect();
    raw.mul_field(&profile)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compositional_and_explicit_agree(seed in any::<u64>(), degree in 1u8..=2) {
        let g = grid();
        let metric = support::angular_metric(2.0);
        let pair = if degree == 1 { laplacian1(&g, &metric) } else { laplacian2(&g, &metric) }.unwrap();
        let w = support::random_form(&g, degree, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = pair.compositional.apply(&w).unwrap();
        let b = pair.explicit.as_ref().unwrap().apply(&w).unwrap();
        prop_assert!(support::relative_gap(&a, &b) < 1e-9);
    }

    #[test]
    fn operators_are_linear(seed in any::<u64>(), (ar, ai, br, bi) in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)) {
        let g = grid();
        let op = laplacian1(&g, &MetricField2D::conformal_paper(2.0)).unwrap().compositional;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = support::random_form(&g, 1, &mut rng);
        let e = support::random_form(&g, 1, &mut rng);
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let lhs = op.apply(&w.scale(a).add(&e.scale(b)).unwrap()).unwrap();
        let rhs = op.apply(&w).unwrap().scale(a).add(&op.apply(&e).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn d_squared_vanishes(seed in any::<u64>()) {
        let g = grid();
        let u = support::random_form(&g, 0, &mut ChaCha8Rng::seed_from_u64(seed));
        let ddu = exterior_d(&exterior_d(&u).unwrap()).unwrap();
        prop_assert!(ddu.max_abs_interior(4) < 1e-9 * u.max_abs());
    }

    #[test]
    fn star_squared_on_one_forms_is_minus_identity(seed in any::<u64>()) {
        let g = grid();
        let m = MetricField2D::conformal_paper(2.0);
        let w = support::random_form(&g, 1, &mut ChaCha8Rng::seed_from_u64(seed));
        let ss = hodge_star(&hodge_star(&w, &m).unwrap(), &m).unwrap();
        prop_assert!(ss.add(&w).unwrap().max_abs() < 1e-13 * w.max_abs());
    }
}

#[test]
fn laplacians_are_symmetric_on_compact_support() {
    let g = Grid::new(32, 400, 3.0).unwrap();
    for metric in [MetricField2D::hyperbolic(3.0), MetricField2D::conformal_paper(3.0)] {
        let ops = [laplacian0(&g, &metric).unwrap(), laplacian1(&g, &metric).unwrap(), laplacian2(&g, &metric).unwrap()];
        for (degree, pair) in ops.iter().enumerate() {
            let w = bump_form(&g, degree as u8, 1 + degree as u64);
            let e = bump_form(&g, degree as u8, 11 + degree as u64);
            let op = &pair.compositional;
            let a = inner_product(&op.apply(&w).unwrap(), &e, &metric).unwrap();
            let b = inner_product(&w, &op.apply(&e).unwrap(), &metric).unwrap();
            assert!((a - b).norm() < 1e-8 * a.norm().max(1.0), "{} degree {degree}: {a} vs {b}", metric.name());
        }
    }
}

#[test]
fn flat_cylinder_harmonic_examples() {
    let g = Grid::new(16, 240, 3.0).unwrap();
    let flat = MetricField2D::flat(3.0);
    let l0 = laplacian0(&g, &flat).unwrap().compositional;
    let u = GridForm::scalar(g.clone(), |t, z| Complex64::new(t.sin() * z.sinh(), 0.0));
    let r = l0.apply(&u).unwrap().max_abs_interior(3);
    assert!(r < 1e-8, "{r}");
    let g = Grid::new(16, 60, 3.0).unwrap();
    let l1 = laplacian1(&g, &flat).unwrap().compositional;
    let dx1 = GridForm::one_form(g.clone(), |_, _| Complex64::new(1.0, 0.0), |_, _| Complex64::default());
    let r = l1.apply(&dx1).unwrap().max_abs();
    assert!(r < 1e-12, "{r}");
}

#[test]
fn conformal_one_form_identity_on_random_forms() {
    let g = Grid::new(16, 60, 3.0).unwrap();
    let base = MetricField2D::hyperbolic(3.0);
    let f = ConformalFactor::paper();
    let rescaled = conformal_rescale(&base, &f).unwrap();
    let direct = laplacian1(&g, &rescaled).unwrap().compositional;
    let identity = conformal_identity_operator(&g, &base, &f, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(support::SEED);
    for _ in 0..8 {
        let w = support::random_form(&g, 1, &mut rng);
        assert!(support::relative_gap(&direct.apply(&w).unwrap(), &identity.apply(&w).unwrap()) < 1e-9);
    }
}

#[test]
fn bochner_sides_scale_quadratically() {
    let g = Grid::new(64, 300, 3.0).unwrap();
    let m = MetricField2D::hyperbolic(3.0);
    let w = bump_form(&g, 1, 5);
    let r1 = bochner_residual(&w, &m).unwrap();
    let r2 = bochner_residual(&w.scale(Complex64::new(2.0, 0.0)), &m).unwrap();
    assert!((r2.grad_norm_sq - 4.0 * r1.grad_norm_sq).abs() < 1e-10 * r2.grad_norm_sq);
    assert!((r2.curvature_term - 4.0 * r1.curvature_term).abs() < 1e-10 * r2.curvature_term.abs());
    assert!(r1.curvature_term < 0.0);
}

#[test]
fn bochner_rejects_support_on_the_boundary() {
    let g = Grid::new(16, 60, 3.0).unwrap();
    let w = GridForm::one_form(g, |t, _| Complex64::new(t.cos(), 0.0), |_, _| Complex64::default());
    assert!(bochner_residual(&w, &MetricField2D::flat(3.0)).is_err());
}
