use std::sync::Arc;

use cylforms::greens::{green_mode, green_modes, log_coefficient_fit, GreenConfig, GreenGrid, ModeProfile};
use cylforms::geometry::local_distance;
use cylforms::modes::ModeOperator;
use cylforms::MetricField2D;
use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

type M2 = Matrix2<Complex64>;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `(u, q = p u')` with `q' = V u`, for the mode operator `−(p u')' + V u`.
fn rhs(op: &ModeOperator, z: f64, u: &M2, q: &M2) -> (M2, M2) {
    let mut d = op.divergence_form(z).unwrap();
    if op.dim() == 1 {
        // decoupled unit second component
        d.p[1] = 1.0;
        d.v[1] = 1.0;
    }
    let j = Complex64::new(0.0, d.coupling);
    let v = M2::new(c(d.v[0]), j, -j, c(d.v[1]));
    let pinv = M2::new(c(1.0 / d.p[0]), c(0.0), c(0.0), c(1.0 / d.p[1]));
    (pinv * q, v * u)
}

/// RK4 from `from` to `to` starting at `u = 0`, `q = I`, recording `u`
/// after every `per_node` steps.
fn shoot(op: &ModeOperator, from: f64, to: f64, nodes: usize, per_node: usize) -> Vec<(M2, M2)> {
    let h = (to - from) / (nodes * per_node) as f64;
    let mut u = M2::zeros();
    let mut q = M2::identity();
    let mut z = from;
    let mut out = vec![(u, q)];
    for _ in 0..nodes {
        for _ in 0..per_node {
            let (k1u, k1q) = rhs(op, z, &u, &q);
            let (k2u, k2q) = rhs(op, z + 0.5 * h, &(u + k1u * c(0.5 * h)), &(q + k1q * c(0.5 * h)));
            let (k3u, k3q) = rhs(op, z + 0.5 * h, &(u + k2u * c(0.5 * h)), &(q + k2q * c(0.5 * h)));
            let (k4u, k4q) = rhs(op, z + h, &(u + k3u * c(h)), &(q + k3q * c(h)));
            let s: Complex64 = c(h / 6.0);
            u += (k1u + k2u * c(2.0) + k3u * c(2.0) + k4u) * s;
            q += (k1q + k2q * c(2.0) + k3q * c(2.0) + k4q) * s;
            z += h;
        }
        out.push((u, q));
    }
    out
}

/// Column `G(z_i, z_j)` on `n` uniform intervals from left and right
/// shooting with a unit flux jump at `z_j`.
fn shooting_column(op: &ModeOperator, n: usize, j: usize, z_max: f64) -> Vec<M2> {
    let left = shoot(op, 0.0, z_max, n, 10);
    let mut right = shoot(op, z_max, 0.0, n, 10);
    right.reverse();
    let (ul, ql) = left[j];
    let (ur, qr) = right[j];
    // Y_L A = Y_R B,  q_R B − q_L A = −I
    let mut m = Matrix4::<Complex64>::zeros();
    for r in 0..2 {
        for c in 0..2 {
            m[(r, c)] = ul[(r, c)];
            m[(r, c + 2)] = -ur[(r, c)];
            m[(r + 2, c)] = -ql[(r, c)];
            m[(r + 2, c + 2)] = qr[(r, c)];
        }
    }
    let lu = m.lu();
    let mut a = M2::zeros();
    let mut b = M2::zeros();
    for col in 0..2 {
        let mut e = Vector4::<Complex64>::zeros();
        e[col + 2] = Complex64::new(-1.0, 0.0);
        let x = lu.solve(&e).unwrap();
        for r in 0..2 {
            a[(r, col)] = x[r];
            b[(r, col)] = x[r + 2];
        }
    }
    (0..=n).map(|i| if i <= j { left[i].0 * a } else { right[i].0 * b }).collect()
}

#[test]
fn curved_modes_match_shooting_oracle() {
    let z_max = 3.0;
    let metric = MetricField2D::hyperbolic(z_max);
    for (degree, k) in [(1u8, 1i64), (1, -2), (0, 2)] {
        let mode = green_mode(&metric, degree, k, 600).unwrap();
        let op = ModeOperator::laplacian(&metric, degree, k).unwrap();
        let j = 300;
        let col = mode.column(j);
        let scale = col.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.norm()));
        let oracle = shooting_column(&op, 600, j, z_max);
        for i in [60, 250, 300, 420, 555] {
            let z = z_max * i as f64 / 600.0;
            let want = oracle[i];
            for r in 0..mode.dim() {
                for c in 0..mode.dim() {
                    let got = col[i][r][c];
                    assert!((got - want[(r, c)]).norm() < 1e-8 * scale, "deg {degree} k {k} z {z}: {got} vs {} ", want[(r, c)]);
                }
            }
        }
    }
}

#[test]
fn kernel_vanishes_at_both_ends() {
    let mode = green_mode(&MetricField2D::conformal_paper(6.0), 1, 3, 200).unwrap();
    for j in [1, 50, 199] {
        let col = mode.column(j);
        assert!(col[0].iter().flatten().all(|v| *v == Complex64::default()));
        assert!(col[200].iter().flatten().all(|v| *v == Complex64::default()));
    }
    assert_eq!(mode.boundary_tags(), ["tG=0", "nG=0"]);
}

#[test]
fn mode_sum_tail_is_converged_off_diagonal() {
    let pts = [(0.0, 1.5), (0.4, 1.5), (2.0, 3.0), (0.1, 1.8), (5.0, 0.75)];
    let zs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let metric = MetricField2D::hyperbolic(12.0);
    for degree in [0u8, 1] {
        let grid = GreenGrid::with_points(12.0, 800, &zs).unwrap();
        let profile = Arc::new(ModeProfile::new(&metric, degree, grid, 2).unwrap());
        let a = green_modes(profile.clone(), 64, true).unwrap();
        let b = green_modes(profile, 128, true).unwrap();
        for (i, x) in pts.iter().enumerate() {
            for y in pts[i + 1..].iter().filter(|y| local_distance(&metric, *x, **y) >= 0.3) {
                let (va, vb) = (a.assemble(*x, *y).unwrap().value, b.assemble(*x, *y).unwrap().value);
                for r in 0..2 {
                    for c in 0..2 {
                        assert!((va[r][c] - vb[r][c]).abs() < 1e-8, "deg {degree} {x:?} {y:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn hyperbolic_one_form_log_coefficient_is_locally_flat() {
    let fit = log_coefficient_fit(&MetricField2D::hyperbolic(12.0), 1, (0.0, 1.0), &[0.01, 0.02, 0.05], &GreenConfig::default()).unwrap();
    let ratio = fit.coefficient * 2.0 * std::f64::consts::PI;
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn log_fit_rejects_large_radii() {
    let err = log_coefficient_fit(&MetricField2D::hyperbolic(12.0), 0, (0.0, 3.0), &[0.2, 0.5], &GreenConfig::default());
    assert!(err.is_err());
}
