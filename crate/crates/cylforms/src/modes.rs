//! Fourier-mode reduction on `S¹ × [0, Z]`.
//!
//! For a θ-independent metric a form `u(z) e^{ikθ}` turns a Laplacian into a
//! second-order ODE system in `z`. This module builds those systems, solves
//! two-point boundary value problems on graded grids with banded LU, and runs
//! self-adjoint eigensolves in divergence form.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::banded::{BandedLu, BandedMatrix, SymBanded};
use crate::error::{Error, Result};
use crate::fd::Stencil;
use crate::geometry::{conformal_rescale, ConformalFactor, MetricField2D};
use crate::hodge_ops::{conformal_identity0, conformal_identity1, conformal_identity2, laplacian_diffop, PointCoefficients};
use crate::par;

pub type Mat2 = [[Complex64; 2]; 2];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `c2 u'' + c1 u' + c0 u` at one `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeCoeffs {
    pub c2: Mat2,
    pub c1: Mat2,
    pub c0: Mat2,
}

impl ModeCoeffs {
    fn from_point(pc: &PointCoefficients, k: f64) -> Self {
        let mut out = ModeCoeffs { c2: [[ZERO; 2]; 2], c1: [[ZERO; 2]; 2], c0: [[ZERO; 2]; 2] };
        for r in 0..pc.dim {
            for c in 0..pc.dim {
                out.c2[r][c] = pc.get(0, 2)[r][c].into();
                out.c1[r][c] = pc.get(0, 1)[r][c] + I * k * pc.get(1, 1)[r][c];
                out.c0[r][c] = pc.get(0, 0)[r][c] + I * k * pc.get(1, 0)[r][c] - k * k * pc.get(2, 0)[r][c];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    Dirichlet,
}

/// Inner-product weight making the mode operator symmetric.
#[derive(Clone, Debug)]
pub enum Weight {
    Flat,
    /// The `L²` form weight of a metric on forms of a degree.
    Hodge { metric: MetricField2D, degree: u8 },
}

impl Weight {
    pub fn at(&self, z: f64) -> [f64; 2] {
        match self {
            Weight::Flat => [1.0, 1.0],
            Weight::Hodge { metric, degree } => {
                let a = metric.g11(0.0, z);
                let b = metric.g22(z);
                match degree {
                    0 => [(a * b).sqrt(), 0.0],
                    1 => [(b / a).sqrt(), (a / b).sqrt()],
                    _ => [1.0 / (a * b).sqrt(), 0.0],
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Laplacian { metric: MetricField2D, degree: u8 },
    ConformalIdentity { base: MetricField2D, factor: ConformalFactor, degree: u8 },
    Conjugated { metric: MetricField2D },
    Displayed { factor: ConformalFactor },
}

/// One Fourier mode of a Laplacian as an ODE system on `[0, Z]`.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    k: i64,
    dim: usize,
    z_max: f64,
    kind: Kind,
    weight: Weight,
    near: BoundaryTag,
    far: BoundaryTag,
}

fn require_symmetric(metric: &MetricField2D) -> Result<()> {
    if metric.is_rotationally_symmetric() {
        Ok(())
    } else {
        Err(Error::UnsupportedShape(format!("metric '{}' depends on θ; modes do not decouple", metric.name())))
    }
}

fn dim_of(degree: u8) -> Result<usize> {
    match degree {
        0 | 2 => Ok(1),
        1 => Ok(2),
        d => Err(Error::InvalidDegree(d as i32)),
    }
}

impl ModeOperator {
    fn build(k: i64, dim: usize, z_max: f64, kind: Kind, weight: Weight) -> Self {
        Self { k, dim, z_max, kind, weight, near: BoundaryTag::Dirichlet, far: BoundaryTag::Dirichlet }
    }

    /// Mode `k` of the compositional Laplacian on `degree`-forms.
    pub fn laplacian(metric: &MetricField2D, degree: u8, k: i64) -> Result<Self> {
        require_symmetric(metric)?;
        let dim = dim_of(degree)?;
        Ok(Self::build(
            k,
            dim,
            metric.domain_length(),
            Kind::Laplacian { metric: metric.clone(), degree },
            Weight::Hodge { metric: metric.clone(), degree },
        ))
    }

    /// Mode `k` of the rescaled Laplacian written through the conformal
    /// identities of the base metric.
    pub fn conformal_identity(base: &MetricField2D, factor: &ConformalFactor, degree: u8, k: i64) -> Result<Self> {
        require_symmetric(base)?;
        if !base.is_warped() {
            return Err(Error::UnsupportedShape("conformal identities need a warped base metric".into()));
        }
        let dim = dim_of(degree)?;
        let target = conformal_rescale(base, factor)?;
        Ok(Self::build(
            k,
            dim,
            base.domain_length(),
            Kind::ConformalIdentity { base: base.clone(), factor: factor.clone(), degree },
            Weight::Hodge { metric: target, degree },
        ))
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn boundary_tags(&self) -> (BoundaryTag, BoundaryTag) {
        (self.near, self.far)
    }

    /// Same operator on `[0, z_max]`.
    pub fn with_z_max(mut self, z_max: f64) -> Self {
        self.z_max = z_max;
        self
    }

    pub fn coefficients(&self, z: f64) -> Result<ModeCoeffs> {
        let k = self.k as f64;
        match &self.kind {
            Kind::Laplacian { metric, degree } => {
                let mj = metric.jet(0.0, z, 3)?;
                Ok(ModeCoeffs::from_point(&laplacian_diffop(*degree, &mj)?.point_coefficients()?, k))
            }
            Kind::ConformalIdentity { base, factor, degree } => {
                let mj = base.jet(0.0, z, 3)?;
                let tau = factor.tau_jet(z, 3)?;
                let op = match degree {
                    0 => conformal_identity0(&mj, &tau)?,
                    1 => conformal_identity1(&mj, &tau)?,
                    _ => conformal_identity2(&mj, &tau)?,
                };
                Ok(ModeCoeffs::from_point(&op.point_coefficients()?, k))
            }
            Kind::Conjugated { metric } => {
                let mj = metric.jet(0.0, z, 3)?;
                let m = ModeCoeffs::from_point(&laplacian_diffop(1, &mj)?.point_coefficients()?, k);
                // U = diag(e^{z/2}, e^{-z/2}); U^{-1} multiplies component c by e^{s_c z}
                let s = [-0.5, 0.5];
                let mut out = ModeCoeffs { c2: [[ZERO; 2]; 2], c1: [[ZERO; 2]; 2], c0: [[ZERO; 2]; 2] };
                for r in 0..2 {
                    for c in 0..2 {
                        let f = ((s[c] - s[r]) * z).exp();
                        out.c2[r][c] = m.c2[r][c] * f;
                        out.c1[r][c] = (m.c2[r][c] * (2.0 * s[c]) + m.c1[r][c]) * f;
                        out.c0[r][c] = (m.c2[r][c] * (s[c] * s[c]) + m.c1[r][c] * s[c] + m.c0[r][c]) * f;
                    }
                }
                Ok(out)
            }
            Kind::Displayed { factor } => {
                let tj = factor.tau_jet(z, 1)?;
                let tau = tj.value()?;
                let dt = tj.partial(0, 1)?;
                let pot = tau / 4.0 + dt / 2.0 + tau * (2.0 * z).exp() * k * k;
                let cpl = I * (2.0 * tau + dt) * z.exp() * k;
                Ok(ModeCoeffs {
                    c2: [[(-tau).into(), ZERO], [ZERO, (-tau).into()]],
                    c1: [[(-dt).into(), ZERO], [ZERO, (-dt).into()]],
                    c0: [[pot.into(), cpl], [-cpl, pot.into()]],
                })
            }
        }
    }

    /// Divergence form `−(p u')' + V u + coupling` of `W·(operator)`.
    pub fn divergence_form(&self, z: f64) -> Result<DivergenceForm> {
        let c = self.coefficients(z)?;
        let w = self.weight.at(z);
        let mut p = [0.0; 2];
        let mut v = [0.0; 2];
        let scale = (0..self.dim)
            .flat_map(|r| (0..self.dim).map(move |s| (r, s)))
            .map(|(r, s)| (w[r] * c.c2[r][s]).norm().max((w[r] * c.c0[r][s]).norm()))
            .fold(0.0, f64::max)
            .max(1e-300);
        let tol = 1e-10 * scale;
        for i in 0..self.dim {
            p[i] = -w[i] * c.c2[i][i].re;
            v[i] = w[i] * c.c0[i][i].re;
            if (w[i] * c.c2[i][i].im).abs() > tol || (w[i] * c.c0[i][i].im).abs() > tol {
                return Err(Error::Consistency(format!("mode operator is not real on the diagonal at z = {z}")));
            }
        }
        let mut coupling = 0.0;
        if self.dim == 2 {
            let s01 = w[0] * c.c0[0][1];
            let s10 = w[1] * c.c0[1][0];
            if s01.re.abs() > tol || (s01 - s10.conj()).norm() > tol || c.c2[0][1].norm() > tol || c.c1[0][1].norm() > tol {
                return Err(Error::Consistency(format!("weighted mode operator is not Hermitian at z = {z}")));
            }
            coupling = s01.im;
        }
        Ok(DivergenceForm { p, v, coupling, weight: w })
    }
}

/// Pointwise data of `W·L = −(p u')' + V u + i·coupling·J u` with
/// `J = [[0, 1], [−1, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceForm {
    pub p: [f64; 2],
    pub v: [f64; 2],
    pub coupling: f64,
    pub weight: [f64; 2],
}

/// Mode `k` of `Δ⁽¹⁾` conjugated by `U = diag(e^{z/2}, e^{−z/2})` into
/// the unweighted space. Requires the 1-form weight `diag(e^z, e^{−z})`,
/// i.e. a metric conformal to the hyperbolic cusp by an `x2`-only factor.
pub fn conjugate_by_u(metric: &MetricField2D, k: i64) -> Result<ModeOperator> {
    require_symmetric(metric)?;
    let z_max = metric.domain_length();
    let w = Weight::Hodge { metric: metric.clone(), degree: 1 };
    for t in [0.0, 0.37, 1.0, 2.9, 0.6 * z_max] {
        let [w0, w1] = w.at(t);
        if (w0 * (-t).exp() - 1.0).abs() > 1e-12 || (w1 * t.exp() - 1.0).abs() > 1e-12 {
            return Err(Error::UnsupportedShape(format!(
                "metric '{}' is not conformal to the cusp metric by a z-only factor",
                metric.name()
            )));
        }
    }
    Ok(ModeOperator::build(k, 2, z_max, Kind::Conjugated { metric: metric.clone() }, Weight::Flat))
}

/// The displayed conjugated operator for the factor's `τ`; equals `P_k`
/// when the factor is the identity.
pub fn mode_operator_l(k: i64, factor: &ConformalFactor, z_max: f64) -> ModeOperator {
    ModeOperator::build(k, 2, z_max, Kind::Displayed { factor: factor.clone() }, Weight::Flat)
}

/// `P_k = (−∂² + 1/4 + e^{2z}k²) I ± 2ike^z J` on `[0, Z]`.
pub fn mode_operator_p(k: i64, z_max: f64) -> ModeOperator {
    mode_operator_l(k, &ConformalFactor::identity(), z_max)
}

/// Nodes and stencils of a mode grid.
#[derive(Clone, Debug)]
pub struct ModeGrid {
    z: Vec<f64>,
    d1: Stencil,
    d2: Stencil,
}

/// Stencil width of the mode solver.
pub const STENCIL_WIDTH: usize = 6;

impl ModeGrid {
    fn from_nodes(z: Vec<f64>) -> Result<Self> {
        if z.len() < STENCIL_WIDTH + 1 {
            return Err(Error::InvalidInput(format!("mode grid needs at least {} nodes", STENCIL_WIDTH + 1)));
        }
        let d1 = Stencil::new(&z, 1, STENCIL_WIDTH);
        let d2 = Stencil::new(&z, 2, STENCIL_WIDTH);
        Ok(Self { z, d1, d2 })
    }

    /// `n` uniform intervals.
    pub fn uniform(z_max: f64, n: usize) -> Result<Self> {
        Self::from_nodes((0..=n).map(|j| z_max * j as f64 / n as f64).collect())
    }

    /// `n` intervals graded towards `z = 0` on the mode's decay scale:
    /// `z = Z sinh(βs)/sinh β` with `sinh β = |k| Z`.
    pub fn graded(z_max: f64, n: usize, k: i64) -> Result<Self> {
        if k == 0 {
            return Self::uniform(z_max, n);
        }
        let beta = ((k.unsigned_abs() as f64) * z_max).asinh();
        let sb = beta.sinh();
        let mut z: Vec<f64> = (0..=n).map(|j| z_max * (beta * j as f64 / n as f64).sinh() / sb).collect();
        z[n] = z_max;
        Self::from_nodes(z)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.z
    }

    pub fn n_intervals(&self) -> usize {
        self.z.len() - 1
    }

    pub fn z_max(&self) -> f64 {
        *self.z.last().expect("nonempty grid")
    }

    /// One-sided derivative weights at `z = 0`.
    pub fn boundary_derivative_row(&self) -> (usize, &[f64]) {
        let r = &self.d1.rows[0];
        (r.start, &r.weights)
    }

    pub fn derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.d1.apply(u)
    }
}

/// Factored two-point boundary value problem for one mode.
#[derive(Clone, Debug)]
pub struct ModeSystem {
    k: i64,
    dim: usize,
    grid: ModeGrid,
    coeffs: Vec<ModeCoeffs>,
    matrix: BandedMatrix,
    row_scale: Vec<f64>,
    lu: BandedLu,
}

/// Values of a mode solution on its grid.
#[derive(Clone, Debug)]
pub struct ModeSolution {
    pub k: i64,
    pub dim: usize,
    pub z: Vec<f64>,
    pub values: Vec<[Complex64; 2]>,
    /// `u'(0)` per component.
    pub derivative_at_zero: [Complex64; 2],
    /// Max discrete residual relative to row scale and solution size.
    pub residual: f64,
}

impl ModeSolution {
    pub fn component(&self, c: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

/// Residual tolerance of a mode solve.
pub const MODE_RESIDUAL_TOLERANCE: f64 = 1e-8;

impl ModeSystem {
    pub fn new(op: &ModeOperator, grid: ModeGrid) -> Result<Self> {
        if (grid.z_max() - op.z_max()).abs() > 1e-12 * op.z_max() {
            return Err(Error::GridMismatch(format!("grid ends at {} but operator at {}", grid.z_max(), op.z_max())));
        }
        let dim = op.dim();
        let n = grid.z.len();
        let coeffs = par::try_map(n, |j| op.coefficients(grid.z[j]))?;
        let band = (STENCIL_WIDTH) * dim;
        let mut m = BandedMatrix::zeros(n * dim, band, band);
        let mut row_scale = vec![1.0; n * dim];
        for c in 0..dim {
            m.set(c, c, Complex64::new(1.0, 0.0));
            m.set((n - 1) * dim + c, (n - 1) * dim + c, Complex64::new(1.0, 0.0));
        }
        for j in 1..n - 1 {
            let cf = &coeffs[j];
            let r1 = &grid.d1.rows[j];
            let r2 = &grid.d2.rows[j];
            for r in 0..dim {
                let row = j * dim + r;
                let mut entries: Vec<(usize, Complex64)> = Vec::with_capacity(2 * STENCIL_WIDTH * dim);
                for c in 0..dim {
                    for (t, w) in r2.weights.iter().enumerate() {
                        entries.push(((r2.start + t) * dim + c, cf.c2[r][c] * *w));
                    }
                    for (t, w) in r1.weights.iter().enumerate() {
                        entries.push(((r1.start + t) * dim + c, cf.c1[r][c] * *w));
                    }
                    entries.push((j * dim + c, cf.c0[r][c]));
                }
                let mut dense = std::collections::BTreeMap::new();
                for (col, v) in entries {
                    *dense.entry(col).or_insert(ZERO) += v;
                }
                let s = dense.values().fold(0.0f64, |a, v| a.max(v.norm())).max(1e-300);
                row_scale[row] = s;
                for (col, v) in dense {
                    if v != ZERO {
                        m.set(row, col, v / s);
                    }
                }
            }
        }
        let lu = m.clone().factor().map_err(|e| match e {
            Error::SingularSystem(msg) => Error::SingularSystem(format!(
                "mode k = {}: {msg}; 0 may be an eigenvalue of the truncated problem, run the spectral probe",
                op.k()
            )),
            other => other,
        })?;
        Ok(Self { k: op.k(), dim, grid, coeffs, matrix: m, row_scale, lu })
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[ModeCoeffs] {
        &self.coeffs
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    /// Dirichlet data `near` at `z = 0` and `far` at `z = Z`.
    pub fn solve(&self, near: &[Complex64], far: &[Complex64]) -> Result<ModeSolution> {
        let dim = self.dim;
        if near.len() != dim || far.len() != dim {
            return Err(Error::InvalidInput(format!("boundary data must have {dim} components")));
        }
        let n = self.grid.z.len();
        let mut rhs = vec![ZERO; n * dim];
        rhs[..dim].copy_from_slice(near);
        rhs[(n - 1) * dim..].copy_from_slice(far);
        let x = self.lu.solve(&rhs);
        let ax = self.matrix.mul_vec(&x);
        let umax = x.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1e-300);
        let residual = ax.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / umax;
        if !(residual < MODE_RESIDUAL_TOLERANCE) {
            return Err(Error::Consistency(format!("mode k = {} solve residual {residual:e}", self.k)));
        }
        let values: Vec<[Complex64; 2]> =
            (0..n).map(|j| if dim == 2 { [x[j * dim], x[j * dim + 1]] } else { [x[j], ZERO] }).collect();
        let (start, w) = self.grid.boundary_derivative_row();
        let mut du = [ZERO; 2];
        for (c, d) in du.iter_mut().enumerate().take(dim) {
            *d = w.iter().enumerate().map(|(t, wt)| values[start + t][c] * *wt).sum();
        }
        Ok(ModeSolution { k: self.k, dim, z: self.grid.z.clone(), values, derivative_at_zero: du, residual })
    }
}

/// Solve with Dirichlet data at `z = 0` and homogeneous data at `z = Z`.
pub fn solve_mode_bvp(op: &ModeOperator, near: &[Complex64], grid: ModeGrid) -> Result<ModeSolution> {
    let far = vec![ZERO; op.dim()];
    ModeSystem::new(op, grid)?.solve(near, &far)
}

/// Symmetric second-order discretization of a mode operator with Dirichlet
/// conditions at both ends, on `n` uniform intervals.
#[derive(Clone, Debug)]
pub struct SymmetricDiscretization {
    /// `M^{-1/2} S M^{-1/2}` after the phase change `u₂ = −i w`.
    pub matrix: SymBanded,
    /// Diagonal weight `M` per unknown.
    pub mass: Vec<f64>,
    /// Complex weighted matrix `S` (before the phase change).
    pub hermitian: BandedMatrix,
}

pub fn symmetric_discretization(op: &ModeOperator, n: usize) -> Result<SymmetricDiscretization> {
    if n < 3 {
        return Err(Error::InvalidInput("eigensolve needs at least 3 intervals".into()));
    }
    let dim = op.dim();
    let h = op.z_max() / n as f64;
    let interior = n - 1;
    let nodes = par::try_map(interior, |j| op.divergence_form((j + 1) as f64 * h))?;
    let mids = par::try_map(n, |j| op.divergence_form((j as f64 + 0.5) * h))?;
    let size = interior * dim;
    let mut a = SymBanded::zeros(size, dim);
    let mut s = BandedMatrix::zeros(size, dim, dim);
    let mut mass = vec![0.0; size];
    let h2 = h * h;
    for j in 0..interior {
        let df = &nodes[j];
        for c in 0..dim {
            let idx = j * dim + c;
            mass[idx] = df.weight[c];
            let left = mids[j].p[c];
            let right = mids[j + 1].p[c];
            let diag = (left + right) / h2 + df.v[c];
            s.add(idx, idx, diag.into());
            a.add(idx, idx, diag);
            if j + 1 < interior {
                s.add(idx, idx + dim, (-right / h2).into());
                s.add(idx + dim, idx, (-right / h2).into());
                a.add(idx, idx + dim, -right / h2);
            }
        }
        if dim == 2 {
            let idx = j * 2;
            s.add(idx, idx + 1, I * df.coupling);
            s.add(idx + 1, idx, -I * df.coupling);
            a.add(idx, idx + 1, df.coupling);
        }
    }
    let mut scaled = SymBanded::zeros(size, dim);
    for i in 0..size {
        for j in i..(i + dim + 1).min(size) {
            let v = a.get(i, j);
            if v != 0.0 {
                scaled.add(i, j, v / (mass[i] * mass[j]).sqrt());
            }
        }
    }
    Ok(SymmetricDiscretization { matrix: scaled, mass, hermitian: s })
}

/// Relative bisection tolerance of eigensolves.
pub const EIGEN_TOLERANCE: f64 = 1e-14;

/// Lowest `n_eig` eigenvalues of the Dirichlet-truncated mode operator on `n`
/// uniform intervals.
pub fn discrete_spectrum(op: &ModeOperator, n_eig: usize, n: usize) -> Result<Vec<f64>> {
    symmetric_discretization(op, n)?.matrix.lowest_eigenvalues(n_eig, EIGEN_TOLERANCE)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEntry {
    pub k: i64,
    pub eigenvalues: Vec<f64>,
}

/// Lowest eigenvalues over a list of modes.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralProbe {
    pub label: String,
    pub entries: Vec<SpectrumEntry>,
    pub bottom_estimate: f64,
}

impl SpectralProbe {
    pub fn k_list(&self) -> Vec<i64> {
        self.entries.iter().map(|e| e.k).collect()
    }

    pub fn lowest(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.eigenvalues[0]).collect()
    }
}

pub fn spectral_probe(
    label: &str,
    ks: &[i64],
    n_eig: usize,
    n: usize,
    family: impl Fn(i64) -> Result<ModeOperator> + Sync + Send,
) -> Result<SpectralProbe> {
    let entries = par::try_map(ks.len(), |i| {
        let eigenvalues = discrete_spectrum(&family(ks[i])?, n_eig, n)?;
        Ok(SpectrumEntry { k: ks[i], eigenvalues })
    })?;
    let bottom_estimate = entries.iter().map(|e| e.eigenvalues[0]).fold(f64::INFINITY, f64::min);
    Ok(SpectralProbe { label: label.to_string(), entries, bottom_estimate })
}

/// Exact Dirichlet eigenvalues `1/4 + (mπ/Z)²` of `P₀`.
pub fn p0_eigenvalue(m: usize, z_max: f64) -> f64 {
    0.25 + (m as f64 * PI / z_max).powi(2)
}

/// Value at `1/Z = 0` of the polynomial in `1/Z` through the samples.
pub fn z_extrapolate(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to extrapolate".into()));
    }
    let x: Vec<f64> = samples.iter().map(|(z, _)| 1.0 / z).collect();
    let mut p: Vec<f64> = samples.iter().map(|(_, v)| *v).collect();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
    }
    Ok(p[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn p_k_entries() {
        let op = mode_operator_p(1, 12.0);
        let z: f64 = 0.7;
        let m = op.coefficients(z).unwrap();
        assert_relative_eq!(m.c0[0][0].re, 0.25 + (2.0 * z).exp(), epsilon = 1e-14);
        assert_relative_eq!(m.c0[0][1].im, 2.0 * z.exp(), epsilon = 1e-14);
        assert_relative_eq!(m.c0[1][0].im, -2.0 * z.exp(), epsilon = 1e-14);
        assert_eq!(m.c2[0][0], c(-1.0));
    }

    #[test]
    fn conjugation_reproduces_p_k() {
        let g1 = MetricField2D::hyperbolic(12.0);
        for k in [0, 1, -3] {
            let a = conjugate_by_u(&g1, k).unwrap();
            let b = mode_operator_p(k, 12.0);
            for z in [0.0, 0.4, 3.0] {
                let (x, y) = (a.coefficients(z).unwrap(), b.coefficients(z).unwrap());
                for r in 0..2 {
                    for s in 0..2 {
                        let tol = 1e-12 * (1.0 + (2.0 * z).exp() * (k * k) as f64);
                        assert!((x.c0[r][s] - y.c0[r][s]).norm() < tol);
                        assert!((x.c1[r][s] - y.c1[r][s]).norm() < 1e-12);
                        assert!((x.c2[r][s] - y.c2[r][s]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn conjugation_of_rescaled_metric_is_displayed_l_k() {
        let g2 = MetricField2D::conformal_paper(12.0);
        let f = ConformalFactor::paper();
        for k in [0, 2] {
            let a = conjugate_by_u(&g2, k).unwrap();
            let b = mode_operator_l(k, &f, 12.0);
            for z in [0.1, 1.3, 5.0] {
                let (x, y) = (a.coefficients(z).unwrap(), b.coefficients(z).unwrap());
                for r in 0..2 {
                    for s in 0..2 {
                        let tol = 1e-12 * (1.0 + (2.0 * z).exp() * (k * k) as f64);
                        assert!((x.c0[r][s] - y.c0[r][s]).norm() < tol, "z {z} ({r},{s})");
                        assert!((x.c1[r][s] - y.c1[r][s]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn theta_dependent_metric_is_rejected() {
        let m = MetricField2D::series(
            &[
                crate::geometry::SeriesTerm { power: 0, mode: 0, re: 1.0, im: 0.0 },
                crate::geometry::SeriesTerm { power: 1, mode: 1, re: 0.1, im: 0.0 },
            ],
            4.0,
        )
        .unwrap();
        assert!(matches!(ModeOperator::laplacian(&m, 1, 1), Err(Error::UnsupportedShape(_))));
        assert!(matches!(conjugate_by_u(&m, 1), Err(Error::UnsupportedShape(_))));
    }

    #[test]
    fn flat_scalar_bvp() {
        let z_max = 12.0;
        let flat = MetricField2D::flat(z_max);
        let op = ModeOperator::laplacian(&flat, 0, 2).unwrap();
        let sol = solve_mode_bvp(&op, &[c(1.0)], ModeGrid::graded(z_max, 800, 2).unwrap()).unwrap();
        let err = sol
            .z
            .iter()
            .zip(&sol.values)
            .map(|(z, v)| (v[0].re - (2.0 * (z_max - z)).sinh() / (2.0 * z_max).sinh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn flat_one_form_linear_mode() {
        let z_max = 12.0;
        let op = ModeOperator::laplacian(&MetricField2D::flat(z_max), 1, 0).unwrap();
        let sol = solve_mode_bvp(&op, &[c(1.0), c(0.0)], ModeGrid::uniform(z_max, 400).unwrap()).unwrap();
        for (z, v) in sol.z.iter().zip(&sol.values) {
            assert!((v[0].re - (1.0 - z / z_max)).abs() < 1e-11, "{z}: {}", v[0].re - (1.0 - z / z_max));
            assert!(v[1].norm() < 1e-14);
        }
    }

    #[test]
    fn p0_dirichlet_eigenvalues() {
        let z_max = 12.0;
        let ev = discrete_spectrum(&mode_operator_p(0, z_max), 4, 2000).unwrap();
        for (m, e) in ev.iter().enumerate() {
            let want = p0_eigenvalue(m / 2 + 1, z_max);
            assert!((e - want).abs() < 1e-6 * want, "{e} vs {want}");
        }
    }

    #[test]
    fn weighted_discretization_is_hermitian() {
        let op = ModeOperator::laplacian(&MetricField2D::conformal_paper(12.0), 1, 3).unwrap();
        let d = symmetric_discretization(&op, 200).unwrap();
        let s = &d.hermitian;
        let mut dev: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in 0..s.n() {
            for j in i.saturating_sub(2)..(i + 3).min(s.n()) {
                dev = dev.max((s.get(i, j) - s.get(j, i).conj()).norm());
                size = size.max(s.get(i, j).norm());
            }
        }
        assert!(dev <= 1e-13 * size, "{dev} / {size}");
    }

    #[test]
    fn extrapolation_removes_inverse_powers() {
        let f = |z: f64| 2.0 + 3.0 / z - 1.0 / (z * z);
        let v = z_extrapolate(&[(8.0, f(8.0)), (12.0, f(12.0)), (16.0, f(16.0))]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }
}
