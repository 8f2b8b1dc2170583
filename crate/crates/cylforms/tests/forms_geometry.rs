mod support;

use cylforms::expr::Expr;
use cylforms::forms::{inner_product, stokes_residual, Grid};
use cylforms::geometry::{
    conformal_paper_curvature, conformal_rescale, gaussian_curvature, liouville_residual, pseudosphere_check, ConformalFactor,
};
use cylforms::MetricField2D;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROUNDOFF: f64 = 1e-13;

fn relative_stokes(metric: &MetricField2D, n_z: usize, degree: u8, seed: u64) -> f64 {
    let g = Grid::new(16, n_z, metric.domain_length()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = support::random_form(&g, degree, &mut rng);
    let e = support::random_form(&g, degree + 1, &mut rng);
    let scale = (inner_product(&w, &w, metric).unwrap().norm() * inner_product(&e, &e, metric).unwrap().norm()).sqrt();
    stokes_residual(&w, &e, metric).unwrap() / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn stokes_residual_converges(seed in any::<u64>(), degree in 0u8..=1, which in 0usize..3) {
        let metric = [MetricField2D::hyperbolic(2.0), MetricField2D::conformal_paper(2.0), support::angular_metric(2.0)][which].clone();
        let r: Vec<f64> = [32, 64, 128].iter().map(|&n| relative_stokes(&metric, n, degree, seed)).collect();
        // pairs integrated exactly leave only roundoff, with no order to measure
        if r[0] > ROUNDOFF {
            prop_assert!((r[0] / r[1]).log2() >= 2.0 && (r[1] / r[2]).log2() >= 2.0, "{:?}", r);
        } else {
            prop_assert!(r.iter().all(|&v| v <= ROUNDOFF), "{:?}", r);
        }
    }

    #[test]
    fn liouville_relation_for_random_factors(a in 0.0..0.8f64, b in 0.3..2.0f64, z in 0.0..6.0f64) {
        let x2 = Expr::x2();
        let factor = ConformalFactor::new(Expr::constant(1.0) + x2.clone() * a * (x2 * (-b)).exp());
        let r = liouville_residual(&MetricField2D::hyperbolic(12.0), &factor, 0.0, z).unwrap();
        prop_assert!(r.abs() < 1e-10);
    }
}

#[test]
fn preset_curvatures() {
    let g1 = MetricField2D::hyperbolic(12.0);
    let g2 = conformal_rescale(&g1, &ConformalFactor::paper()).unwrap();
    for i in 0..=60 {
        let z = 0.2 * i as f64;
        assert!((gaussian_curvature(&g1, 0.3, z).unwrap() + 1.0).abs() < 1e-12);
        assert!((gaussian_curvature(&g2, 0.3, z).unwrap() - conformal_paper_curvature(z)).abs() < 1e-10);
        assert_eq!(gaussian_curvature(&MetricField2D::flat(12.0), 0.0, z).unwrap(), 0.0);
    }
}

#[test]
fn pseudosphere_embeds_the_hyperbolic_cusp() {
    let zs: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
    let r = pseudosphere_check(&zs).unwrap();
    assert!(r.metric_residual < 1e-12, "{}", r.metric_residual);
    assert!(r.tractrix_residual < 1e-10, "{}", r.tractrix_residual);
    assert!(pseudosphere_check(&[-1.0]).is_err());
}
