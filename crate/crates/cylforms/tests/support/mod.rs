//! Shared fixtures for the integration and acceptance suites.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use cylforms::forms::{Grid, GridForm};
use cylforms::geometry::SeriesTerm;
use cylforms::hodge_ops::explicit_efq;
use cylforms::MetricField2D;
use num_complex::Complex64;
use rand::Rng;

pub const SEED: u64 = 0x5eed_c0de;

/// Band-limited form `Σ c e^{imθ} cos(pπz/Z + 0.3p)` with `|m| ≤ 4`, `p < 4`.
pub fn random_form<R: Rng>(grid: &Arc<Grid>, degree: u8, rng: &mut R) -> GridForm {
    let z_max = grid.z_max();
    let n = if degree == 1 { 2 } else { 1 };
    let comps = (0..n)
        .map(|_| {
            let terms: Vec<(f64, f64, Complex64)> = (0..6)
                .map(|_| {
                    let m = rng.gen_range(-4..=4) as f64;
                    let p = rng.gen_range(0..4) as f64;
                    (m, p, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                })
                .collect();
            grid.sample(|t, z| {
                terms.iter().map(|&(m, p, c)| c * Complex64::from_polar(1.0, m * t) * (PI * p * z / z_max + 0.3 * p).cos()).sum()
            })
        })
        .collect();
    GridForm::new(grid.clone(), degree, comps).expect("matching shapes")
}

/// A metric with angular dependence and `g22 ≡ 1`.
pub fn angular_metric(z_max: f64) -> MetricField2D {
    MetricField2D::series(
        &[
            SeriesTerm { power: 0, mode: 0, re: 1.0, im: 0.0 },
            SeriesTerm { power: 0, mode: 1, re: 0.1, im: 0.05 },
            SeriesTerm { power: 1, mode: 0, re: -0.4, im: 0.0 },
            SeriesTerm { power: 1, mode: 2, re: 0.05, im: -0.1 },
            SeriesTerm { power: 2, mode: 0, re: 0.2, im: 0.0 },
        ],
        z_max,
    )
    .expect("valid series metric")
}

/// Relative max-norm difference of two forms.
pub fn relative_gap(a: &GridForm, b: &GridForm) -> f64 {
    a.sub(b).expect("same grid").max_abs() / a.max_abs().max(b.max_abs()).max(1e-300)
}

type Series = Vec<Complex64>;
type SMat = [[Series; 2]; 2];

fn s_mul(a: &[Complex64], b: &[Complex64]) -> Series {
    let n = a.len().min(b.len());
    (0..n).map(|i| (0..=i).map(|j| a[j] * b[i - j]).sum()).collect()
}

fn s_add(a: &[Complex64], b: &[Complex64]) -> Series {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn s_deriv(a: &[Complex64]) -> Series {
    (1..a.len()).map(|i| a[i] * i as f64).collect()
}

fn s_recip(a: &[Complex64]) -> Series {
    let mut out = vec![Complex64::default(); a.len()];
    out[0] = 1.0 / a[0];
    for i in 1..a.len() {
        let s: Complex64 = (1..=i).map(|j| a[j] * out[i - j]).sum();
        out[i] = -s / a[0];
    }
    out
}

fn s_sqrt(a: &[Complex64]) -> Series {
    let mut out = vec![Complex64::default(); a.len()];
    out[0] = a[0].sqrt();
    for i in 1..a.len() {
        let s: Complex64 = (1..i).map(|j| out[j] * out[i - j]).sum();
        out[i] = (a[i] - s) / (2.0 * out[0]);
    }
    out
}

fn m_mul(a: &SMat, b: &SMat) -> SMat {
    std::array::from_fn(|r| std::array::from_fn(|c| s_add(&s_mul(&a[r][0], &b[0][c]), &s_mul(&a[r][1], &b[1][c]))))
}

fn m_add(a: &SMat, b: &SMat) -> SMat {
    std::array::from_fn(|r| std::array::from_fn(|c| s_add(&a[r][c], &b[r][c])))
}

fn m_scale(a: &SMat, s: &[Complex64]) -> SMat {
    std::array::from_fn(|r| std::array::from_fn(|c| s_mul(&a[r][c], s)))
}

fn m_len(a: &SMat) -> usize {
    a.iter().flatten().map(Vec::len).min().unwrap_or(0)
}

/// Symbols `a₁, a₀, …, a_{−m_max}` of an `x1`-independent metric at a fixed
/// `ξ`, each as the 2×2 matrix of values at the boundary.
///
/// Pure Taylor recursion in the boundary distance on the explicit
/// coefficients `E, F, Q`: without `x1` dependence the composition reduces
/// to `2a₁a_m = src + E a_{m+1} − ∂a_{m+1} − Σ a_j a_k`.
pub fn symbol_oracle(metric: &MetricField2D, xi: f64, m_max: usize) -> Vec<[[Complex64; 2]; 2]> {
    let depth = m_max + 2;
    let jet = metric.boundary_normal_jet(0.0, depth).expect("jet depth");
    let series = |j: &cylforms::jet::Jet2| -> Series {
        (0..).map_while(|b| j.coeff(0, b)).map(|v| Complex64::new(v, 0.0)).collect()
    };
    let g11 = series(&jet);
    let root = s_sqrt(&s_recip(&g11));
    let (e, f, q) = explicit_efq(1, &jet).expect("explicit coefficients");
    let mat = |v: &[cylforms::jet::Jet2], s: Complex64| -> SMat {
        std::array::from_fn(|r| std::array::from_fn(|c| series(&v[2 * r + c]).into_iter().map(|x| x * s).collect()))
    };
    let one = Complex64::new(1.0, 0.0);
    let e = mat(&e, one);
    let src1 = mat(&f, Complex64::new(0.0, xi));
    let src0 = mat(&q, one);
    let zero_s = vec![Complex64::default(); depth + 1];
    let diag = |s: Series| -> SMat { [[s.clone(), zero_s.clone()], [zero_s.clone(), s]] };
    let a1: SMat = diag(root.iter().map(|r| -r * xi.abs()).collect());
    let inv_two_a1: Series = s_recip(&root).into_iter().map(|v| v * (-0.5 / xi.abs())).collect();

    let mut syms: Vec<SMat> = vec![a1];
    for step in 0..=m_max {
        let d = 1 - step as i32;
        let prev = &syms[step];
        let dprev: SMat = std::array::from_fn(|r| std::array::from_fn(|c| s_deriv(&prev[r][c]).into_iter().map(|v| -v).collect()));
        let mut rhs = m_add(&m_mul(&e, prev), &dprev);
        if d == 1 {
            rhs = m_add(&rhs, &src1);
        } else if d == 0 {
            rhs = m_add(&rhs, &src0);
        }
        for (ji, aj) in syms.iter().enumerate().skip(1) {
            let j = 1 - ji as i32;
            for (ki, ak) in syms.iter().enumerate().skip(1) {
                if j + (1 - ki as i32) == d {
                    let p = m_mul(aj, ak);
                    rhs = m_add(&rhs, &std::array::from_fn(|r| std::array::from_fn(|c| p[r][c].iter().map(|v| -v).collect())));
                }
            }
        }
        let next = m_scale(&rhs, &inv_two_a1);
        assert!(m_len(&next) > 0, "oracle ran out of Taylor depth");
        syms.push(next);
    }
    syms.iter().map(|m| std::array::from_fn(|r| std::array::from_fn(|c| m[r][c][0]))).collect()
}
