use cylforms::dtn::{self, cauchy_compare, cauchy_data, DtnConfig, OperatorSource, Verdict};
use cylforms::geometry::ConformalFactor;
use cylforms::modes::{conjugate_by_u, discrete_spectrum, mode_operator_p, ModeOperator};
use cylforms::MetricField2D;
use num_complex::Complex64;
use proptest::prelude::*;

fn cfg(k_max: i64) -> DtnConfig {
    DtnConfig { k_max, ..Default::default() }
}

#[test]
fn conjugation_preserves_the_weighted_spectrum() {
    let g1 = MetricField2D::hyperbolic(12.0);
    for k in [0, 1, -2, 5] {
        let weighted = discrete_spectrum(&ModeOperator::laplacian(&g1, 1, k).unwrap(), 3, 2000).unwrap();
        let conj = discrete_spectrum(&conjugate_by_u(&g1, k).unwrap(), 3, 2000).unwrap();
        let displayed = discrete_spectrum(&mode_operator_p(k, 12.0), 3, 2000).unwrap();
        for i in 0..3 {
            assert!((weighted[i] - conj[i]).abs() < 1e-5 * conj[i], "k {k}: {weighted:?} vs {conj:?}");
            assert!((displayed[i] - conj[i]).abs() < 1e-12 * conj[i]);
        }
    }
}

#[test]
fn conformal_metrics_share_scalar_but_not_one_form_data() {
    let g1 = MetricField2D::hyperbolic(12.0);
    let by_identity = OperatorSource::ConformalIdentity { base: g1.clone(), factor: ConformalFactor::paper() };
    let scalar = cauchy_compare(&OperatorSource::Laplacian(g1.clone()), &by_identity, 0, &cfg(6)).unwrap();
    assert_eq!(scalar.verdict, Verdict::Indistinguishable);
    let one = cauchy_compare(
        &OperatorSource::Laplacian(g1),
        &OperatorSource::Laplacian(MetricField2D::conformal_paper(12.0)),
        1,
        &cfg(6),
    )
    .unwrap();
    assert_eq!(one.verdict, Verdict::Distinguished);
    assert!((1..=6).all(|k| one.gap(k).unwrap() > 1e-3));
}

#[test]
fn second_order_scheme_converges_to_graded_solver() {
    let m = MetricField2D::conformal_paper(12.0);
    let reference = dtn::dtn0(&m, &cfg(4)).unwrap();
    let err = |n: usize| {
        let d = dtn::dtn0_second_order(&m, &DtnConfig { n_z: n, ..cfg(4) }).unwrap();
        reference.blocks.iter().zip(&d.blocks).map(|(a, b)| (a.entries[0] - b.entries[0]).norm()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(300), err(600));
    assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
}

#[test]
fn one_form_dtn_mirrors_in_k_and_reports_ndelta() {
    let d = dtn::dtn1(&MetricField2D::conformal_paper(12.0), &DtnConfig { emit_ndelta: true, ..cfg(5) }).unwrap();
    let lam = dtn::a11_from_dtn(&d).unwrap();
    for k in 1..=5i64 {
        let a = lam.iter().find(|p| p.0 == k).unwrap().1;
        let b = lam.iter().find(|p| p.0 == -k).unwrap().1;
        assert!((a - b).abs() < 1e-10 * a.abs());
    }
    let nd = d.nd_delta.as_ref().unwrap();
    assert_eq!(nd.len(), d.mode_count());
    assert!(nd.iter().all(|b| b.entries.iter().all(|v| *v == Complex64::default())));
}

#[test]
fn dtn_serializes_round_trip() {
    let d = dtn::dtn1(&MetricField2D::flat(12.0), &cfg(2)).unwrap();
    let json = serde_json::to_string(&d).unwrap();
    let back: dtn::DtNMatrix = serde_json::from_str(&json).unwrap();
    assert_eq!(back.blocks, d.blocks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cauchy_data_is_linear_in_dirichlet_data(re in proptest::collection::vec(-1.0..1.0f64, 10), im in proptest::collection::vec(-1.0..1.0f64, 10)) {
        let d = dtn::dtn1(&MetricField2D::hyperbolic(12.0), &cfg(2)).unwrap();
        let f: Vec<Complex64> = (0..10).map(|i| Complex64::new(re[i], im[i])).collect();
        let (f1, f2) = f.split_at(5);
        let c = cauchy_data(&d, f1, f2).unwrap();
        let doubled: Vec<Complex64> = f1.iter().map(|v| v * 2.0).collect();
        let c2 = cauchy_data(&d, &doubled, &f2.iter().map(|v| v * 2.0).collect::<Vec<_>>()).unwrap();
        for i in 0..5 {
            prop_assert!((c2.nd_omega[i] - c.nd_omega[i] * 2.0).norm() < 1e-12 * (1.0 + c.nd_omega[i].norm()));
            prop_assert!((c2.td_omega[i] - c.td_omega[i] * 2.0).norm() < 1e-12 * (1.0 + c.td_omega[i].norm()));
        }
    }
}
