//! Green's forms of `Δ⁽⁰⁾` and `Δ⁽¹⁾` on the truncated cylinder with
//! vanishing tangential and normal traces at both ends.
//!
//! Mode `k` of the weighted operator `S = WΔ` is `−(p u')' + V_k u` with
//! `V_k = V₀ + kV₁ + k²V₂`. Its kernel is built from local solutions: each
//! grid cell contributes the Dirichlet-to-flux map of the homogeneous ODE
//! (fourth-order Magnus substeps, or the exact frozen-coefficient map where
//! the local decay rate makes the propagator ill-conditioned, joined by
//! Schur complements), and the assembled block-tridiagonal
//! system is Hermitian, so `H_k(z, z') = H_k(z', z)†` holds to roundoff and
//! the node values are exact when the coefficients are constant.
//!
//! `G(x, y) = (2π)⁻¹ Σ_k e^{ik(θ−θ')} H_k(z, z')`, summed over `|k| ≤ K`
//! with `H_{−k} = conj H_k`, plus a Liouville–Green tail over `|k| > K`
//! written as a closed-form logarithm.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::Serialize;

use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{Error, Result};
use crate::geometry::{gaussian_curvature, local_distance, MetricField2D};
use crate::hodge_ops::{laplacian_diffop, MULTI_INDICES};
use crate::modes::{Mat2, ModeOperator};
use crate::par;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Magnus substeps per grid cell.
pub const DEFAULT_SUBSTEPS: usize = 2;

/// Nodes of the `z` grid, `0 = z₀ < … < z_N = Z`.
#[derive(Clone, Debug, Serialize)]
pub struct GreenGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl GreenGrid {
    pub fn uniform(z_max: f64, n_intervals: usize) -> Result<Self> {
        if n_intervals < 4 || !(z_max > 0.0) {
            return Err(Error::InvalidInput("Green grid needs Z > 0 and at least 4 intervals".into()));
        }
        let h = z_max / n_intervals as f64;
        Ok(Self { nodes: (0..=n_intervals).map(|i| i as f64 * h).collect(), uniform: true })
    }

    /// Uniform grid with extra nodes inserted; uniform nodes closer than a
    /// quarter step to an inserted node are dropped.
    pub fn with_points(z_max: f64, n_intervals: usize, points: &[f64]) -> Result<Self> {
        let base = Self::uniform(z_max, n_intervals)?;
        if points.is_empty() {
            return Ok(base);
        }
        let h = z_max / n_intervals as f64;
        let mut extra: Vec<f64> = points.to_vec();
        if extra.iter().any(|&z| !(z > 0.0 && z < z_max)) {
            return Err(Error::Domain("inserted Green nodes must be interior".into()));
        }
        extra.sort_by(f64::total_cmp);
        extra.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut nodes: Vec<f64> = base
            .nodes
            .iter()
            .copied()
            .filter(|&z| z == 0.0 || z == z_max || extra.iter().all(|e| (e - z).abs() >= 0.25 * h))
            .collect::<Vec<f64>>()
            .into_iter()
            .chain(extra.iter().copied())
            .collect();
        nodes.sort_by(f64::total_cmp);
        Ok(Self { nodes, uniform: false })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn z_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty grid")
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Index of the node at `z`.
    pub fn index_of(&self, z: f64) -> Result<usize> {
        let i = self.nodes.partition_point(|&n| n < z - 1e-12);
        if i < self.nodes.len() && (self.nodes[i] - z).abs() <= 1e-12 {
            Ok(i)
        } else {
            Err(Error::GridMismatch(format!("z = {z} is not a node of the Green grid")))
        }
    }
}

/// `p`, `V₀`, `V₁`, `V₂` at one `z`.
#[derive(Clone, Copy, Debug)]
struct Coeffs {
    p: [f64; 2],
    v: [Mat2; 3],
    weight: [f64; 2],
}

impl Coeffs {
    fn v_at(&self, k: f64) -> Mat2 {
        let mut m = [[ZERO; 2]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, e) in row.iter_mut().enumerate() {
                *e = self.v[0][r][c] + self.v[1][r][c] * k + self.v[2][r][c] * (k * k);
            }
        }
        m
    }
}

fn div_matrix(op: &ModeOperator, z: f64) -> Result<([f64; 2], Mat2, [f64; 2])> {
    let d = op.divergence_form(z)?;
    let mut v = [[ZERO; 2]; 2];
    v[0][0] = d.v[0].into();
    v[1][1] = d.v[1].into();
    v[0][1] = I * d.coupling;
    v[1][0] = -I * d.coupling;
    Ok((d.p, v, d.weight))
}

/// k-independent coefficient samples on a grid: at the nodes and at the two
/// Gauss points of every Magnus substep.
#[derive(Debug)]
pub struct ModeProfile {
    degree: u8,
    dim: usize,
    metric: MetricField2D,
    grid: GreenGrid,
    substeps: usize,
    nodes: Vec<Coeffs>,
    gauss: Vec<Vec<[Coeffs; 2]>>,
    /// `∫₀^z √(V₂/p)` per component at the nodes.
    phase: Vec<[f64; 2]>,
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // 1/(2√3)

impl ModeProfile {
    pub fn new(metric: &MetricField2D, degree: u8, grid: GreenGrid, substeps: usize) -> Result<Self> {
        if degree > 1 {
            return Err(Error::InvalidDegree(degree as i32));
        }
        if (grid.z_max() - metric.domain_length()).abs() > 1e-12 {
            return Err(Error::GridMismatch("Green grid length differs from the metric domain".into()));
        }
        let ops = [
            ModeOperator::laplacian(metric, degree, 0)?,
            ModeOperator::laplacian(metric, degree, 1)?,
            ModeOperator::laplacian(metric, degree, -1)?,
        ];
        let dim = ops[0].dim();
        let sample = |z: f64| -> Result<Coeffs> {
            let (p, v0, w) = div_matrix(&ops[0], z)?;
            let (_, vp, _) = div_matrix(&ops[1], z)?;
            let (_, vm, _) = div_matrix(&ops[2], z)?;
            let mut v = [[[ZERO; 2]; 2]; 3];
            for r in 0..2 {
                for c in 0..2 {
                    v[0][r][c] = v0[r][c];
                    v[1][r][c] = 0.5 * (vp[r][c] - vm[r][c]);
                    v[2][r][c] = 0.5 * (vp[r][c] + vm[r][c]) - v0[r][c];
                }
            }
            Ok(Coeffs { p, v, weight: w })
        };
        let nz = grid.nodes.len();
        let nodes = par::try_map(nz, |i| sample(grid.nodes[i]))?;
        let gauss = par::try_map(nz - 1, |c| {
            let (a, b) = (grid.nodes[c], grid.nodes[c + 1]);
            let hs = (b - a) / substeps as f64;
            (0..substeps)
                .map(|s| {
                    let mid = a + (s as f64 + 0.5) * hs;
                    Ok([sample(mid - GAUSS_OFFSET * hs)?, sample(mid + GAUSS_OFFSET * hs)?])
                })
                .collect::<Result<Vec<_>>>()
        })?;
        // quadratic dependence on k, checked at k = 2
        let op2 = ModeOperator::laplacian(metric, degree, 2)?;
        let zc = 0.5 * grid.z_max();
        let (_, v2, _) = div_matrix(&op2, zc)?;
        let want = sample(zc)?.v_at(2.0);
        for r in 0..dim {
            for c in 0..dim {
                if (v2[r][c] - want[r][c]).norm() > 1e-10 * (1.0 + v2[r][c].norm()) {
                    return Err(Error::Consistency("mode potential is not quadratic in k".into()));
                }
            }
        }
        let mut phase = vec![[0.0; 2]; nz];
        for c in 0..nz - 1 {
            let hs = (grid.nodes[c + 1] - grid.nodes[c]) / substeps as f64;
            let mut acc = phase[c];
            for g in &gauss[c] {
                for j in 0..dim {
                    for pt in g {
                        let ratio = pt.v[2][j][j].re / pt.p[j];
                        if !(ratio > 0.0) {
                            return Err(Error::Domain("mode operator is not elliptic in k".into()));
                        }
                        acc[j] += 0.5 * hs * ratio.sqrt();
                    }
                }
            }
            phase[c + 1] = acc;
        }
        Ok(Self { degree, dim, metric: metric.clone(), grid, substeps, nodes, gauss, phase })
    }

    pub fn grid(&self) -> &GreenGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    /// Form weight `W` at node `i`.
    pub fn weight(&self, i: usize) -> [f64; 2] {
        self.nodes[i].weight
    }

    /// Liouville–Green amplitude `(p V₂)^{−1/4}` of component `j` at node `i`.
    fn amplitude(&self, i: usize, j: usize) -> f64 {
        let c = &self.nodes[i];
        (c.p[j] * c.v[2][j][j].re).powf(-0.25)
    }
}

type M4 = Matrix4<Complex64>;
type M2 = Matrix2<Complex64>;

/// Dirichlet-to-flux blocks `(N_aa, N_ab, N_ba, N_bb)`: `(u_a, u_b) ↦ (−q_a, q_b)`.
type CellMap = [M2; 4];

/// Substeps with `λh` above this use the frozen-coefficient map.
const STIFF_THRESHOLD: f64 = 2.0;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn generator(co: &Coeffs, k: f64, dim: usize) -> M4 {
    let mut a = M4::zeros();
    let v = co.v_at(k);
    for r in 0..dim {
        a[(r, 2 + r)] = c(1.0 / co.p[r]);
        for s in 0..dim {
            a[(2 + r, s)] = v[r][s];
        }
    }
    if dim == 1 {
        a[(1, 3)] = c(1.0);
        a[(3, 1)] = c(1.0);
    }
    a
}

/// Local rate bound `max‖P⁻¹V‖^{1/2}`.
fn rate(co: &Coeffs, k: f64, dim: usize) -> f64 {
    let v = co.v_at(k);
    (0..dim).map(|r| ((0..dim).map(|s| v[r][s].norm()).sum::<f64>() / co.p[r]).sqrt()).fold(0.0, f64::max)
}

fn magnus_map(g: &[Coeffs; 2], k: f64, dim: usize, hs: f64) -> Result<CellMap> {
    let a1 = generator(&g[0], k, dim);
    let a2 = generator(&g[1], k, dim);
    let comm = a2 * a1 - a1 * a2;
    let omega = (a1 + a2) * c(0.5 * hs) + comm * c(3f64.sqrt() / 12.0 * hs * hs);
    let phi = omega.exp();
    let p11: M2 = phi.fixed_view::<2, 2>(0, 0).into();
    let p12: M2 = phi.fixed_view::<2, 2>(0, 2).into();
    let p21: M2 = phi.fixed_view::<2, 2>(2, 0).into();
    let p22: M2 = phi.fixed_view::<2, 2>(2, 2).into();
    let inv12 = p12.try_inverse().ok_or_else(|| Error::SingularSystem("substep propagator is singular".into()))?;
    Ok([inv12 * p11, -inv12, p21 - p22 * inv12 * p11, p22 * inv12])
}

/// `(t coth t, t csch t)` as functions of `s = t²`, for either sign of `s`.
fn hyperbolic_pair(s: f64) -> (f64, f64) {
    if s.abs() < 1e-6 {
        (1.0 + s / 3.0, 1.0 - s / 6.0)
    } else if s > 0.0 {
        let t = s.sqrt();
        let e = (-2.0 * t).exp();
        (t * (1.0 + e) / (1.0 - e), 2.0 * t * (-t).exp() / (1.0 - e))
    } else {
        let t = (-s).sqrt();
        (t / t.tan(), t / t.sin())
    }
}

/// Exact map of the constant-coefficient system with the averaged
/// coefficients; stable for any `λh`.
fn frozen_map(g: &[Coeffs; 2], k: f64, dim: usize, hs: f64) -> CellMap {
    let va = g[0].v_at(k);
    let vb = g[1].v_at(k);
    let mut p = [1.0; 2];
    let mut v = M2::identity();
    for r in 0..dim {
        p[r] = 0.5 * (g[0].p[r] + g[1].p[r]);
    }
    for r in 0..dim {
        for s in 0..dim {
            v[(r, s)] = 0.5 * (va[r][s] + vb[r][s]) / (p[r] * p[s]).sqrt();
        }
    }
    // Hermitian 2×2 eigen-decomposition of P^{-1/2} V P^{-1/2}
    let (a, d, b) = (v[(0, 0)].re, v[(1, 1)].re, v[(0, 1)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let mu = [mean - rad, mean + rad];
    let q = if b.norm() <= 1e-300 * (1.0 + rad) {
        if a <= d { M2::identity() } else { M2::new(c(0.0), c(1.0), c(1.0), c(0.0)) }
    } else {
        let col = |m: f64| {
            let x = nalgebra::Vector2::new(b, c(m - a));
            x / c(x.norm())
        };
        let (x0, x1) = (col(mu[0]), col(mu[1]));
        M2::new(x0[0], x1[0], x0[1], x1[1])
    };
    let mut diag_c = M2::zeros();
    let mut diag_d = M2::zeros();
    for j in 0..2 {
        let (cc, dd) = hyperbolic_pair(mu[j] * hs * hs);
        diag_c[(j, j)] = c(cc / hs);
        diag_d[(j, j)] = c(dd / hs);
    }
    let sq = M2::from_diagonal(&nalgebra::Vector2::new(c(p[0].sqrt()), c(p[1].sqrt())));
    let nc = sq * q * diag_c * q.adjoint() * sq;
    let nd = -(sq * q * diag_d * q.adjoint() * sq);
    [nc, nd, nd.adjoint(), nc]
}

/// Join the maps of `[a, m]` and `[m, b]` by eliminating `u_m`.
fn join(x: &CellMap, y: &CellMap) -> Result<CellMap> {
    let s = (x[3] + y[0]).try_inverse().ok_or_else(|| Error::SingularSystem("interior substep node is singular".into()))?;
    Ok([x[0] - x[1] * s * x[2], -(x[1] * s * y[1]), -(y[2] * s * x[2]), y[3] - y[2] * s * y[1]])
}

fn cell_map(profile: &ModeProfile, cell: usize, k: f64) -> Result<CellMap> {
    let dim = profile.dim;
    let hs = (profile.grid.nodes[cell + 1] - profile.grid.nodes[cell]) / profile.substeps as f64;
    let mut acc: Option<CellMap> = None;
    for g in &profile.gauss[cell] {
        let lam = rate(&g[0], k, dim).max(rate(&g[1], k, dim));
        let m = if lam * hs <= STIFF_THRESHOLD { magnus_map(g, k, dim, hs)? } else { frozen_map(g, k, dim, hs) };
        acc = Some(match acc {
            None => m,
            Some(prev) => join(&prev, &m)?,
        });
    }
    acc.ok_or_else(|| Error::InvalidInput("cell without substeps".into()))
}

fn hermitian_part(m: &M2) -> M2 {
    (m + m.adjoint()) * c(0.5)
}

/// Kernel of one Fourier mode.
#[derive(Debug)]
pub struct GreenMode {
    k: i64,
    profile: Arc<ModeProfile>,
    lu: BandedLu,
    hermitian_defect: f64,
}

/// Mode `k` on a prepared profile.
pub fn green_mode_on(profile: &Arc<ModeProfile>, k: i64) -> Result<GreenMode> {
    let dim = profile.dim;
    let nz = profile.grid.nodes.len();
    let n_int = nz - 2;
    let kf = k as f64;
    let maps = par::try_map(nz - 1, |c| cell_map(profile, c, kf))?;
    let mut defect: f64 = 0.0;
    let scale = maps.iter().flat_map(|m| m[0].iter()).fold(0.0f64, |a, v| a.max(v.norm()));
    let mut sym = Vec::with_capacity(maps.len());
    for m in &maps {
        let mut e = [Matrix2::zeros(); 4];
        for r in 0..dim {
            for c in 0..dim {
                defect = defect.max((m[1][(r, c)] - m[2][(c, r)].conj()).norm() / scale);
                defect = defect.max((m[0][(r, c)] - m[0][(c, r)].conj()).norm() / scale);
            }
        }
        e[0] = hermitian_part(&m[0]);
        e[3] = hermitian_part(&m[3]);
        e[1] = (m[1] + m[2].adjoint()) * Complex64::new(0.5, 0.0);
        e[2] = e[1].adjoint();
        sym.push(e);
    }
    let band = 2 * dim - 1;
    let mut mat = BandedMatrix::zeros(n_int * dim, band, band);
    let idx = |node: usize, c: usize| (node - 1) * dim + c;
    for node in 1..=n_int {
        for r in 0..dim {
            for c in 0..dim {
                let diag = sym[node][0][(r, c)] + sym[node - 1][3][(r, c)];
                mat.add(idx(node, r), idx(node, c), diag);
                if node < n_int {
                    mat.add(idx(node, r), idx(node + 1, c), sym[node][1][(r, c)]);
                }
                if node > 1 {
                    mat.add(idx(node, r), idx(node - 1, c), sym[node - 1][2][(r, c)]);
                }
            }
        }
    }
    let lu = mat.factor().map_err(|e| Error::SpectralCheck(format!("mode {k}: zero is an eigenvalue of the truncated operator ({e})")))?;
    Ok(GreenMode { k, profile: profile.clone(), lu, hermitian_defect: defect })
}

/// Mode `k` of the Green's form of `Δ⁽ᵈᵉᵍʳᵉᵉ⁾` on a uniform grid.
pub fn green_mode(metric: &MetricField2D, degree: u8, k: i64, n_intervals: usize) -> Result<GreenMode> {
    let grid = GreenGrid::uniform(metric.domain_length(), n_intervals)?;
    let profile = Arc::new(ModeProfile::new(metric, degree, grid, DEFAULT_SUBSTEPS)?);
    green_mode_on(&profile, k)
}

impl GreenMode {
    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn degree(&self) -> u8 {
        self.profile.degree
    }

    pub fn dim(&self) -> usize {
        self.profile.dim
    }

    pub fn profile(&self) -> &Arc<ModeProfile> {
        &self.profile
    }

    /// Boundary conditions at both ends: `tG = 0` and `nG = 0`.
    pub fn boundary_tags(&self) -> [&'static str; 2] {
        ["tG=0", "nG=0"]
    }

    /// Relative non-Hermitian part of the cell maps before symmetrization.
    pub fn hermitian_defect(&self) -> f64 {
        self.hermitian_defect
    }

    fn solve_nodes(&self, rhs: &[[Complex64; 2]]) -> Vec<[Complex64; 2]> {
        let dim = self.dim();
        let nz = rhs.len();
        let mut b = vec![ZERO; (nz - 2) * dim];
        for i in 1..nz - 1 {
            for c in 0..dim {
                b[(i - 1) * dim + c] = rhs[i][c];
            }
        }
        let x = self.lu.solve(&b);
        let mut out = vec![[ZERO; 2]; nz];
        for i in 1..nz - 1 {
            for c in 0..dim {
                out[i][c] = x[(i - 1) * dim + c];
            }
        }
        out
    }

    /// `H_k(z_i, z_j)` for all `i`, as `dim × dim` blocks.
    pub fn column(&self, j: usize) -> Vec<Mat2> {
        let nz = self.profile.grid.nodes.len();
        let dim = self.dim();
        let mut out = vec![[[ZERO; 2]; 2]; nz];
        if j == 0 || j + 1 == nz {
            return out;
        }
        for c in 0..dim {
            let mut rhs = vec![[ZERO; 2]; nz];
            rhs[j][c] = Complex64::new(1.0, 0.0);
            let sol = self.solve_nodes(&rhs);
            for (i, s) in sol.iter().enumerate() {
                for r in 0..dim {
                    out[i][r][c] = s[r];
                }
            }
        }
        out
    }

    /// `∫ H_k(z, z') f(z') dz'` at the nodes, for `f` vanishing at both
    /// ends; trapezoid rule with the kink correction at `z' = z`.
    pub fn apply(&self, f: &[[Complex64; 2]]) -> Result<Vec<[Complex64; 2]>> {
        self.apply_signed(f, false)
    }

    /// As [`apply`](Self::apply) for mode `−k`.
    pub fn apply_conjugate(&self, f: &[[Complex64; 2]]) -> Result<Vec<[Complex64; 2]>> {
        self.apply_signed(f, true)
    }

    fn apply_signed(&self, f: &[[Complex64; 2]], conjugate: bool) -> Result<Vec<[Complex64; 2]>> {
        let grid = &self.profile.grid;
        if !grid.uniform {
            return Err(Error::GridMismatch("kernel quadrature needs a uniform grid".into()));
        }
        if f.len() != grid.nodes.len() {
            return Err(Error::GridMismatch("source has the wrong length".into()));
        }
        let h = grid.nodes[1] - grid.nodes[0];
        let dim = self.dim();
        let rhs: Vec<[Complex64; 2]> = f
            .iter()
            .map(|v| {
                let mut s = [ZERO; 2];
                for c in 0..dim {
                    s[c] = if conjugate { v[c].conj() } else { v[c] } * h;
                }
                s
            })
            .collect();
        let mut u = self.solve_nodes(&rhs);
        let prof = &self.profile;
        let k = if conjugate { -(self.k as f64) } else { self.k as f64 };
        let n = f.len();
        for i in 1..n - 1 {
            if conjugate {
                for c in 0..dim {
                    u[i][c] = u[i][c].conj();
                }
            }
            // kink at z' = z_i: ∫ = T + (h²/12)[F'] − (h⁴/720)[F'''] with
            // F = H(z_i, ·) f and the jumps of H from the ODE
            let (lo, mid, hi) = (&prof.nodes[i - 1], &prof.nodes[i], &prof.nodes[i + 1]);
            let v = mid.v_at(k);
            for r in 0..dim {
                let p = mid.p[r];
                let dp = (hi.p[r] - lo.p[r]) / (2.0 * h);
                let ddp = (hi.p[r] - 2.0 * p + lo.p[r]) / (h * h);
                let df = (f[i + 1][r] - f[i - 1][r]) / (2.0 * h);
                let ddf = (f[i + 1][r] - 2.0 * f[i][r] + f[i - 1][r]) / (h * h);
                let j1 = -1.0 / p;
                let j2 = dp / (p * p);
                let j3 = ddp / (p * p) - 2.0 * dp * dp / p.powi(3);
                let mut f3 = f[i][r] * j3 + df * (3.0 * j2) + ddf * (3.0 * j1);
                for c in 0..dim {
                    f3 -= v[r][c] * f[i][c] / (p * mid.p[c]);
                }
                u[i][r] += f[i][r] * (h * h / 12.0 * j1) - f3 * (h.powi(4) / 720.0);
            }
        }
        Ok(u)
    }

    /// Mode-level delta test: `∫ H_k (S_k φ) = φ` for a bump `φ` built from
    /// independently evaluated mode coefficients; relative max error.
    pub fn delta_residual(&self, bump: &ZBump) -> Result<f64> {
        let op = ModeOperator::laplacian(&self.profile.metric, self.profile.degree, self.k)?;
        let nodes = &self.profile.grid.nodes;
        let dim = self.dim();
        let mut phi = vec![[ZERO; 2]; nodes.len()];
        let src = par::try_map(nodes.len(), |i| -> Result<[Complex64; 2]> {
            let z = nodes[i];
            let c = op.coefficients(z)?;
            let w = op.weight().at(z);
            let d = [0, 1, 2].map(|o| bump.derivative(z, o));
            let mut s = [ZERO; 2];
            for r in 0..dim {
                for col in 0..dim {
                    let amp = bump.amplitude[col];
                    s[r] += (c.c2[r][col] * d[2] + c.c1[r][col] * d[1] + c.c0[r][col] * d[0]) * amp;
                }
                s[r] *= w[r];
            }
            Ok(s)
        })?;
        for (i, p) in phi.iter_mut().enumerate() {
            for c in 0..dim {
                p[c] = Complex64::new(bump.derivative(nodes[i], 0) * bump.amplitude[c], 0.0);
            }
        }
        let u = self.apply(&src)?;
        let mut err: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (a, b) in u.iter().zip(&phi) {
            for c in 0..dim {
                err = err.max((a[c] - b[c]).norm());
                size = size.max(b[c].norm());
            }
        }
        Ok(err / size)
    }
}

/// `(1 − s²)⁶` with `s = (z − center)/radius`, zero outside.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZBump {
    pub center: f64,
    pub radius: f64,
    /// Per-component scale.
    pub amplitude: [f64; 2],
}

impl ZBump {
    /// Derivative of order `o ≤ 2`.
    pub fn derivative(&self, z: f64, o: usize) -> f64 {
        let s = (z - self.center) / self.radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        match o {
            0 => q.powi(6),
            1 => -12.0 * s * q.powi(5) / self.radius,
            _ => (-12.0 * q.powi(5) + 120.0 * s * s * q.powi(4)) / (self.radius * self.radius),
        }
    }
}

/// Modes `0..=K` on a shared profile.
#[derive(Debug)]
pub struct GreenModes {
    profile: Arc<ModeProfile>,
    modes: Vec<GreenMode>,
    tail: bool,
}

/// Build modes `0..=k_max`; `tail` adds the Liouville–Green remainder.
pub fn green_modes(profile: Arc<ModeProfile>, k_max: usize, tail: bool) -> Result<GreenModes> {
    let modes = par::try_map(k_max + 1, |k| green_mode_on(&profile, k as i64))?;
    Ok(GreenModes { profile, modes, tail })
}

/// Assembled value at one pair of points.
#[derive(Clone, Debug, Serialize)]
pub struct GreenEval {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// `G_{ij}(x, y)`, coefficient of `dxⁱ dyʲ`.
    pub value: [[f64; 2]; 2],
    /// Liouville–Green remainder over `|k| > K` included in `value`.
    pub tail: [[f64; 2]; 2],
    pub k_max: usize,
    /// Largest entry of the remainder.
    pub tail_estimate: f64,
}

impl GreenModes {
    pub fn profile(&self) -> &Arc<ModeProfile> {
        &self.profile
    }

    pub fn k_max(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn mode(&self, k: usize) -> &GreenMode {
        &self.modes[k]
    }

    /// Columns `H_k(·, z_y)` for every mode.
    fn columns(&self, y_node: usize) -> Vec<Vec<Mat2>> {
        par::map(self.modes.len(), |k| self.modes[k].column(y_node))
    }

    fn tail_sum(&self, xi: usize, yi: usize, dtheta: f64, j: usize) -> Result<f64> {
        let p = &self.profile;
        let d = (p.phase[xi][j] - p.phase[yi][j]).abs();
        let q = Complex64::from_polar((-d).exp(), dtheta);
        if (Complex64::new(1.0, 0.0) - q).norm() < 1e-14 {
            return Err(Error::Domain("Green's form is singular at coincident points".into()));
        }
        let mut partial = ZERO;
        let mut qk = Complex64::new(1.0, 0.0);
        for k in 1..=self.k_max() {
            qk *= q;
            partial += qk / k as f64;
        }
        let total = -(Complex64::new(1.0, 0.0) - q).ln();
        Ok((total - partial).re * p.amplitude(xi, j) * p.amplitude(yi, j) / (2.0 * PI))
    }

    /// Coupling part of the remainder for entry `(r, c)`, `r ≠ c`: first-order
    /// perturbation of the diagonal kernels by `kV₁`, which decays like `k⁻²`.
    fn coupling_tail(&self, xi: usize, yi: usize, dtheta: f64, r: usize, c: usize) -> f64 {
        let p = &self.profile;
        let rate = |i: usize, j: usize| (p.nodes[i].v[2][j][j].re / p.nodes[i].p[j]).sqrt();
        let v1 = 0.5 * (p.nodes[xi].v[1][r][c] + p.nodes[yi].v[1][r][c]);
        if v1.norm() == 0.0 {
            return 0.0;
        }
        let amp = p.amplitude(xi, 0) * p.amplitude(yi, 0) * p.amplitude(xi, 1) * p.amplitude(yi, 1);
        let speed = 0.5 * (rate(xi, 0) + rate(yi, 0) + rate(xi, 1) + rate(yi, 1));
        let d = 0.5 * ((p.phase[xi][0] - p.phase[yi][0]).abs() + (p.phase[xi][1] - p.phase[yi][1]).abs());
        let q = Complex64::from_polar((-d).exp(), dtheta);
        // Σ_{k>K} q^k/k², summed until the remainder bound is negligible
        let k0 = self.k_max() + 1;
        let gap = (Complex64::new(1.0, 0.0) - q).norm().max(1e-3);
        let mut s = ZERO;
        let mut qk = q.powu(k0 as u32);
        let mut k = k0;
        loop {
            s += qk / (k * k) as f64;
            qk *= q;
            k += 1;
            let bound = qk.norm() / ((k * k) as f64 * gap);
            if bound < 1e-16 * s.norm().max(1e-300) || k > 200 * k0 {
                break;
            }
        }
        // H_rc(k) ≈ −k V₁ amp e^{−|k|D} / (2|k|³ speed), conjugate for −k
        -(v1 * s).re * amp / (2.0 * speed) * 2.0 / (2.0 * PI)
    }

    fn eval_with(&self, cols: &[Vec<Mat2>], x: (f64, f64), y: (f64, f64), yi: usize) -> Result<GreenEval> {
        let xi = self.profile.grid.index_of(x.1)?;
        let dim = self.profile.dim;
        let dtheta = x.0 - y.0;
        let mut value = [[0.0; 2]; 2];
        for (k, col) in cols.iter().enumerate() {
            let h = col[xi];
            let ph = Complex64::from_polar(1.0, k as f64 * dtheta);
            for r in 0..dim {
                for c in 0..dim {
                    let term = if k == 0 { h[r][c].re } else { 2.0 * (ph * h[r][c]).re };
                    value[r][c] += term / (2.0 * PI);
                }
            }
        }
        let mut tail = [[0.0; 2]; 2];
        let boundary = xi == 0 || yi == 0 || xi == self.profile.grid.n_intervals() || yi == self.profile.grid.n_intervals();
        if self.tail && !boundary {
            for j in 0..dim {
                tail[j][j] = self.tail_sum(xi, yi, dtheta, j)?;
            }
            if dim == 2 {
                tail[0][1] = self.coupling_tail(xi, yi, dtheta, 0, 1);
                tail[1][0] = self.coupling_tail(xi, yi, dtheta, 1, 0);
            }
            for r in 0..dim {
                for c in 0..dim {
                    value[r][c] += tail[r][c];
                }
            }
        }
        let tail_estimate = tail.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(GreenEval { x, y, value, tail, k_max: self.k_max(), tail_estimate })
    }

    /// `G(x, y)`; both `z` coordinates must be grid nodes.
    pub fn assemble(&self, x: (f64, f64), y: (f64, f64)) -> Result<GreenEval> {
        let yi = self.profile.grid.index_of(y.1)?;
        let cols = self.columns(yi);
        self.eval_with(&cols, x, y, yi)
    }

    /// `G(x, y)` for many `x` sharing one `y`.
    pub fn assemble_many(&self, xs: &[(f64, f64)], y: (f64, f64)) -> Result<Vec<GreenEval>> {
        let yi = self.profile.grid.index_of(y.1)?;
        let cols = self.columns(yi);
        xs.iter().map(|&x| self.eval_with(&cols, x, y, yi)).collect()
    }
}

/// Free-function form of [`GreenModes::assemble`].
pub fn green_assemble(modes: &GreenModes, x: (f64, f64), y: (f64, f64)) -> Result<GreenEval> {
    modes.assemble(x, y)
}

/// Settings shared by the assembled Green experiments.
#[derive(Clone, Debug, Serialize)]
pub struct GreenConfig {
    pub n_z: usize,
    pub k_max: usize,
    pub n_theta: usize,
    pub substeps: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self { n_z: 800, k_max: 64, n_theta: 256, substeps: DEFAULT_SUBSTEPS }
    }
}

/// Smooth test form `φ = b(z) e^{cos(θ − θ₀)}` per component.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestForm {
    pub bump: ZBump,
    pub theta0: [f64; 2],
}

impl TestForm {
    /// Derivatives in the order of [`MULTI_INDICES`] for component `c`.
    fn derivatives(&self, theta: f64, z: f64, c: usize) -> [f64; 6] {
        let b = [0, 1, 2].map(|o| self.bump.derivative(z, o) * self.bump.amplitude[c]);
        let (s, co) = (theta - self.theta0[c]).sin_cos();
        let e = co.exp();
        let t = [e, -s * e, (s * s - co) * e];
        MULTI_INDICES.map(|(a, bb)| t[a] * b[bb])
    }
}

/// Result of [`delta_property`].
#[derive(Clone, Debug, Serialize)]
pub struct DeltaReport {
    pub max_error: f64,
    pub max_value: f64,
    pub relative_error: f64,
    pub k_max: usize,
    pub n_z: usize,
}

/// `∫ G(x, y) ∧ ∗(Δφ)(y) = φ(x)` on the `(θ, z)` grid, with `Δφ` from the
/// pointwise compositional Laplacian and the `θ` integral done by FFT.
pub fn delta_property(metric: &MetricField2D, degree: u8, cfg: &GreenConfig, phi: &TestForm) -> Result<DeltaReport> {
    let grid = GreenGrid::uniform(metric.domain_length(), cfg.n_z)?;
    let profile = Arc::new(ModeProfile::new(metric, degree, grid, cfg.substeps)?);
    let modes = green_modes(profile.clone(), cfg.k_max, false)?;
    let dim = profile.dim;
    let nodes = profile.grid.nodes.clone();
    let nt = cfg.n_theta;
    if nt < 2 * cfg.k_max + 1 {
        return Err(Error::InvalidInput("n_theta must exceed 2 K_max".into()));
    }
    let thetas: Vec<f64> = (0..nt).map(|i| 2.0 * PI * i as f64 / nt as f64).collect();
    // weighted source W Δφ on the grid, one FFT per z and component
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(nt);
    let spectra = par::try_map(nodes.len(), |zi| -> Result<Vec<[Complex64; 2]>> {
        let z = nodes[zi];
        let mj = metric.jet(0.0, z, 3)?;
        let pc = laplacian_diffop(degree, &mj)?.point_coefficients()?;
        let w = profile.weight(zi);
        let mut rows = vec![vec![ZERO; nt]; dim];
        for (ti, &th) in thetas.iter().enumerate() {
            let ders: Vec<[f64; 6]> = (0..dim).map(|c| phi.derivatives(th, z, c)).collect();
            for r in 0..dim {
                let mut s = 0.0;
                for (slot, &(a, b)) in MULTI_INDICES.iter().enumerate() {
                    let m = pc.get(a, b);
                    for c in 0..dim {
                        s += m[r][c] * ders[c][slot];
                    }
                }
                rows[r][ti] = Complex64::new(w[r] * s, 0.0);
            }
        }
        for row in rows.iter_mut() {
            fft.process(row);
        }
        Ok((0..nt).map(|m| {
            let mut v = [ZERO; 2];
            for r in 0..dim {
                v[r] = rows[r][m] / nt as f64;
            }
            v
        }).collect())
    })?;
    let recon = par::try_map(2 * cfg.k_max + 1, |idx| -> Result<(i64, Vec<[Complex64; 2]>)> {
        let k = idx as i64 - cfg.k_max as i64;
        let slot = k.rem_euclid(nt as i64) as usize;
        let f: Vec<[Complex64; 2]> = spectra.iter().map(|s| s[slot]).collect();
        let mode = modes.mode(k.unsigned_abs() as usize);
        let u = if k >= 0 { mode.apply(&f)? } else { mode.apply_conjugate(&f)? };
        Ok((k, u))
    })?;
    let mut max_error: f64 = 0.0;
    let mut max_value: f64 = 0.0;
    for (zi, &z) in nodes.iter().enumerate() {
        for &th in &thetas {
            for c in 0..dim {
                let mut s = ZERO;
                for (k, u) in &recon {
                    s += u[zi][c] * Complex64::from_polar(1.0, *k as f64 * th);
                }
                let want = phi.derivatives(th, z, c)[0];
                max_error = max_error.max((s - want).norm());
                max_value = max_value.max(want.abs());
            }
        }
    }
    Ok(DeltaReport { max_error, max_value, relative_error: max_error / max_value, k_max: cfg.k_max, n_z: cfg.n_z })
}

/// Result of [`log_coefficient_fit`].
#[derive(Clone, Debug, Serialize)]
pub struct LogFit {
    /// Slope `c` in `value ≈ −c log d + b`.
    pub coefficient: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub radii: Vec<f64>,
    pub samples: Vec<GreenEval>,
    /// The component divided by `g11(y)` for 1-forms.
    pub component: &'static str,
}

/// Circle samples per radius.
pub const FIT_ANGLES: usize = 16;

/// Regress assembled `G(x, y)` against `−log d(x, y)` over circles around
/// `y`. For 1-forms the `dx¹dy¹` component divided by `g11(y)` is used.
pub fn log_coefficient_fit(metric: &MetricField2D, degree: u8, y: (f64, f64), radii: &[f64], cfg: &GreenConfig) -> Result<LogFit> {
    if degree > 1 {
        return Err(Error::InvalidDegree(degree as i32));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if radii.is_empty() || !(r_min > 0.0) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let z_max = metric.domain_length();
    let g11 = metric.g11(y.0, y.1);
    let g22 = metric.g22(y.1);
    let curvature = gaussian_curvature(metric, y.0, y.1)?;
    if r_max * r_max * curvature.abs() > 0.01 || r_max / g11.sqrt() > 0.5 {
        return Err(Error::Domain(format!("radius {r_max} too large for the local log law at curvature {curvature}")));
    }
    if y.1 - 2.0 * r_max / g22.sqrt() <= 0.0 || y.1 + 2.0 * r_max / g22.sqrt() >= z_max {
        return Err(Error::Domain("source point too close to the boundary for these radii".into()));
    }
    if (cfg.k_max as f64) * r_min / g11.sqrt() < 1.0 {
        return Err(Error::InvalidInput(format!("K_max = {} does not resolve radius {r_min}", cfg.k_max)));
    }
    let mut xs = Vec::new();
    for &r in radii {
        for a in 0..FIT_ANGLES {
            let phi = 2.0 * PI * (a as f64 + 0.5) / FIT_ANGLES as f64;
            xs.push((y.0 + r * phi.cos() / g11.sqrt(), y.1 + r * phi.sin() / g22.sqrt()));
        }
    }
    let mut zs: Vec<f64> = xs.iter().map(|x| x.1).collect();
    zs.push(y.1);
    let grid = GreenGrid::with_points(z_max, cfg.n_z, &zs)?;
    let profile = Arc::new(ModeProfile::new(metric, degree, grid, cfg.substeps)?);
    let modes = green_modes(profile, cfg.k_max, true)?;
    let samples = modes.assemble_many(&xs, y)?;
    let scale = if degree == 1 { 1.0 / g11 } else { 1.0 };
    let pts: Vec<(f64, f64)> =
        samples.iter().map(|s| (-local_distance(metric, s.x, s.y).ln(), s.value[0][0] * scale)).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("log fit needs at least two distinct radii".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let c = sxy / sxx;
    let b = my - c * mx;
    let rms = (pts.iter().map(|p| (p.1 - c * p.0 - b).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LogFit {
        coefficient: c,
        intercept: b,
        rms_residual: rms,
        radii: radii.to_vec(),
        samples,
        component: if degree == 1 { "G11/g11(y)" } else { "G" },
    })
}

/// CSV rows `(x1, x2, y1, y2, component, value)`.
pub fn write_green_csv<W: Write>(evals: &[GreenEval], dim: usize, mut w: W) -> io::Result<()> {
    writeln!(w, "x1,x2,y1,y2,component,value")?;
    for e in evals {
        for r in 0..dim {
            for c in 0..dim {
                writeln!(w, "{},{},{},{},G{}{},{:.15e}", e.x.0, e.x.1, e.y.0, e.y.1, r + 1, c + 1, e.value[r][c])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_green(k: f64, z: f64, zp: f64, zm: f64) -> f64 {
        let (lo, hi) = if z < zp { (z, zp) } else { (zp, z) };
        if k == 0.0 {
            lo * (zm - hi) / zm
        } else {
            (k * lo).sinh() * (k * (zm - hi)).sinh() / (k * (k * zm).sinh())
        }
    }

    #[test]
    fn flat_scalar_modes_match_closed_form() {
        let metric = MetricField2D::flat(12.0);
        for k in [0, 1, 3] {
            let g = green_mode(&metric, 0, k, 400).unwrap();
            let nodes = g.profile().grid().nodes().to_vec();
            for j in [37, 200, 311] {
                let col = g.column(j);
                let err = nodes
                    .iter()
                    .zip(&col)
                    .map(|(&z, h)| (h[0][0].re - flat_green(k as f64, z, nodes[j], 12.0)).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-8, "k = {k}: {err}");
            }
        }
    }

    #[test]
    fn flat_one_form_kernel_is_diagonal() {
        let g = green_mode(&MetricField2D::flat(4.0), 1, 2, 200).unwrap();
        let nodes = g.profile().grid().nodes().to_vec();
        let col = g.column(80);
        for (z, h) in nodes.iter().zip(&col) {
            let want = flat_green(2.0, *z, nodes[80], 4.0);
            assert!((h[0][0].re - want).abs() < 1e-8 && (h[1][1].re - want).abs() < 1e-8);
            assert!(h[0][1].norm() < 1e-14 && h[1][0].norm() < 1e-14);
        }
    }

    #[test]
    fn curved_kernel_is_hermitian_and_vanishes_at_ends() {
        let g = green_mode(&MetricField2D::hyperbolic(6.0), 1, 3, 300).unwrap();
        let a = g.column(50);
        let b = g.column(170);
        for r in 0..2 {
            for c in 0..2 {
                let d = (a[170][r][c] - b[50][c][r].conj()).norm();
                assert!(d < 1e-12 * (1.0 + a[170][r][c].norm()), "{d}");
            }
        }
        assert!(a[0].iter().flatten().chain(a[300].iter().flatten()).all(|v| *v == ZERO));
        assert!(g.hermitian_defect() < 1e-8, "{}", g.hermitian_defect());
    }

    #[test]
    fn mode_delta_residual() {
        let bump = ZBump { center: 2.5, radius: 1.2, amplitude: [1.0, -0.6] };
        let cases = [
            (MetricField2D::flat(6.0), 0, [0, 2, 7]),
            (MetricField2D::hyperbolic(6.0), 0, [0, 1, 2]),
            (MetricField2D::hyperbolic(6.0), 1, [0, 1, 2]),
            (MetricField2D::conformal_paper(6.0), 1, [0, 1, 2]),
        ];
        for (m, deg, ks) in cases {
            for k in ks {
                let g = green_mode(&m, deg, k, 600).unwrap();
                let r = g.delta_residual(&bump).unwrap();
                assert!(r < 1e-6, "{} k = {k}: {r}", m.name());
            }
        }
    }

    #[test]
    fn inserted_nodes_are_found() {
        let g = GreenGrid::with_points(12.0, 100, &[3.01, 3.05, 7.3]).unwrap();
        assert!(g.index_of(3.01).is_ok() && g.index_of(7.3).is_ok());
        assert!(g.index_of(3.0).is_err());
        assert!(matches!(GreenGrid::with_points(12.0, 100, &[12.0]), Err(Error::Domain(_))));
    }
}
