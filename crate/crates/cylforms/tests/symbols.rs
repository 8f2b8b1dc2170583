mod support;

use cylforms::geometry::{boundary_jet, MetricField2D};
use cylforms::symbols::{forward_symbols, measure_symbols, recover_jets};
use cylforms::{dtn, symbols};

#[test]
fn recursion_matches_independent_taylor_oracle() {
    for metric in [MetricField2D::hyperbolic(12.0), MetricField2D::conformal_paper(12.0), MetricField2D::flat(12.0)] {
        let st = forward_symbols(&metric, 0.0, 3).unwrap();
        for xi in [1.0, -1.0, 2.5] {
            let oracle = support::symbol_oracle(&metric, xi, 3);
            for (i, want) in oracle.iter().enumerate() {
                let got = st.symbols[i].eval(xi).unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        let scale = want[r][c].norm().max(1.0);
                        assert!(
                            (got[r][c] - want[r][c]).norm() < 1e-12 * scale,
                            "{} order {} ξ {xi} ({r},{c}): {} vs {}",
                            metric.name(),
                            1 - i as i32,
                            got[r][c],
                            want[r][c]
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn hyperbolic_order_zero_entry_is_minus_one_for_every_frequency() {
    let st = forward_symbols(&MetricField2D::hyperbolic(12.0), 1.3, 2).unwrap();
    for xi in [0.5, 1.0, -1.0, 7.0, -40.0] {
        let oracle = support::symbol_oracle(&MetricField2D::hyperbolic(12.0), xi, 2);
        let a0 = st.get(0).unwrap().eval(xi).unwrap()[0][0];
        assert!((a0.re + 1.0).abs() < 1e-12 && a0.im.abs() < 1e-12, "{a0}");
        assert!((oracle[1][0][0] - a0).norm() < 1e-12);
    }
}

#[test]
fn round_trip_recovers_jets_of_presets() {
    let presets = [
        MetricField2D::flat(12.0),
        MetricField2D::hyperbolic(12.0),
        MetricField2D::conformal_paper(12.0),
        support::angular_metric(2.0),
    ];
    for metric in presets {
        let n_theta = if metric.is_rotationally_symmetric() { 4 } else { 32 };
        let est = recover_jets(&measure_symbols(&metric, 3, n_theta).unwrap(), 3).unwrap();
        let want = boundary_jet(&metric, 4, n_theta).unwrap();
        for l in 0..=4 {
            for (a, b) in est.metric.samples(l).iter().zip(want.samples(l)) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{} level {l}: {a} vs {b}", metric.name());
            }
        }
    }
}

#[test]
fn dtn_fit_reads_order_zero_symbol() {
    let cfg = dtn::DtnConfig { k_max: 64, ..Default::default() };
    let d = dtn::dtn1(&MetricField2D::hyperbolic(12.0), &cfg).unwrap();
    let lam = dtn::a11_from_dtn(&d).unwrap();
    let fit = symbols::fit_symbol_from_dtn(&lam, 8, 64, 4).unwrap();
    println!("{:?}", fit);
    assert!((fit.coefficients[0] + 1.0).abs() < 1e-3);
    assert!((fit.coefficients[1] + 1.0).abs() < 0.02, "{:?}", fit.coefficients);
}
