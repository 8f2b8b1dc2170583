//! Differential forms sampled on a tensor grid of `S¹ × [0, Z]`.
//!
//! The angle is discretized spectrally on `n_theta` equispaced points; the
//! normal direction uses `n_z` uniform intervals (`n_z + 1` nodes) with
//! fourth-order finite differences. Components are complex and stored
//! z-major, `value[j * n_theta + i]` at `(θ_i, z_j)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fd::Stencil;
use crate::geometry::MetricField2D;
use crate::par;

pub type Field = Vec<Complex64>;

pub struct Grid {
    n_theta: usize,
    n_z: usize,
    z_max: f64,
    theta: Vec<f64>,
    z: Vec<f64>,
    d_z: Stencil,
    d_zz: Stencil,
    w_z: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_theta", &self.n_theta)
            .field("n_z", &self.n_z)
            .field("z_max", &self.z_max)
            .finish()
    }
}

impl Grid {
    /// `n_z` must be even (composite Simpson) and at least 6.
    pub fn new(n_theta: usize, n_z: usize, z_max: f64) -> Result<Arc<Self>> {
        if n_theta < 4 {
            return Err(Error::InvalidInput(format!("n_theta = {n_theta} is too small")));
        }
        if n_z < 6 || n_z % 2 != 0 {
            return Err(Error::InvalidInput(format!("n_z = {n_z} must be even and at least 6")));
        }
        if !(z_max > 0.0) {
            return Err(Error::InvalidInput(format!("Z = {z_max} must be positive")));
        }
        let h = z_max / n_z as f64;
        let z: Vec<f64> = (0..=n_z).map(|j| j as f64 * h).collect();
        let w_z = (0..=n_z)
            .map(|j| {
                let c = if j == 0 || j == n_z {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        let theta = (0..n_theta).map(|i| 2.0 * PI * i as f64 / n_theta as f64).collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n_theta,
            n_z,
            z_max,
            theta,
            d_z: Stencil::uniform_fourth_order(&z, 1),
            d_zz: Stencil::uniform_fourth_order(&z, 2),
            z,
            w_z,
            fft: planner.plan_fft_forward(n_theta),
            ifft: planner.plan_fft_inverse(n_theta),
        }))
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.n_theta * (self.n_z + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of node `(i, j)`: trapezoid in θ times Simpson in z.
    pub fn weight(&self, j: usize) -> f64 {
        self.w_z[j] * 2.0 * PI / self.n_theta as f64
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.n_theta == other.n_theta && self.n_z == other.n_z && self.z_max == other.z_max
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> Complex64) -> Field {
        let mut out = Vec::with_capacity(self.len());
        for &z in &self.z {
            for &t in &self.theta {
                out.push(f(t, z));
            }
        }
        out
    }

    /// Spectral `∂θ^order` of a field.
    pub fn d_theta(&self, u: &[Complex64], order: u32) -> Field {
        let n = self.n_theta;
        let rows = par::map(self.n_z + 1, |j| {
            let mut buf = u[j * n..(j + 1) * n].to_vec();
            self.fft.process(&mut buf);
            for (m, c) in buf.iter_mut().enumerate() {
                let k = if m <= (n - 1) / 2 {
                    m as f64
                } else if n % 2 == 1 || m > n / 2 {
                    m as f64 - n as f64
                } else {
                    // Nyquist: odd derivatives vanish, even ones keep (n/2)^order
                    if order % 2 == 1 {
                        *c = Complex64::new(0.0, 0.0);
                        continue;
                    }
                    (n / 2) as f64
                };
                *c *= Complex64::new(0.0, k).powu(order) / n as f64;
            }
            self.ifft.process(&mut buf);
            buf
        });
        rows.concat()
    }

    fn apply_z(&self, st: &Stencil, u: &[Complex64]) -> Field {
        let n = self.n_theta;
        let cols = par::map(n, |i| {
            let mut col = vec![Complex64::default(); self.n_z + 1];
            st.apply_strided(u, i, n, &mut col);
            col
        });
        let mut out = vec![Complex64::default(); u.len()];
        for (i, col) in cols.into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                out[j * n + i] = v;
            }
        }
        out
    }

    /// Fourth-order `∂z` with one-sided closures.
    pub fn d_z(&self, u: &[Complex64]) -> Field {
        self.apply_z(&self.d_z, u)
    }

    /// Fourth-order `∂z²` with one-sided closures.
    pub fn d_zz(&self, u: &[Complex64]) -> Field {
        self.apply_z(&self.d_zz, u)
    }

    /// `∫ u` over the cylinder.
    pub fn integrate(&self, u: &[Complex64]) -> Complex64 {
        let n = self.n_theta;
        (0..=self.n_z)
            .map(|j| u[j * n..(j + 1) * n].iter().sum::<Complex64>() * self.weight(j))
            .sum()
    }
}

/// Metric coefficients sampled at the grid nodes.
#[derive(Clone, Debug)]
pub struct MetricSamples {
    pub g11: Vec<f64>,
    pub g22: Vec<f64>,
}

impl MetricSamples {
    pub fn new(grid: &Grid, metric: &MetricField2D) -> Result<Self> {
        let n = grid.n_theta;
        let mut g11 = Vec::with_capacity(grid.len());
        let mut g22 = Vec::with_capacity(grid.len());
        for &z in &grid.z {
            let b = metric.g22(z);
            for &t in &grid.theta {
                let a = metric.g11(t, z);
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::Domain(format!("metric not positive at ({t}, {z})")));
                }
                g11.push(a);
                g22.push(b);
            }
        }
        debug_assert_eq!(g11.len(), n * (grid.n_z + 1));
        Ok(Self { g11, g22 })
    }

    /// `√(g11 g22)`, the density of the Riemannian measure.
    pub fn volume(&self) -> Vec<f64> {
        self.g11.iter().zip(&self.g22).map(|(a, b)| (a * b).sqrt()).collect()
    }
}

/// A 0-, 1- or 2-form on a grid.
#[derive(Clone, Debug)]
pub struct GridForm {
    degree: u8,
    grid: Arc<Grid>,
    comps: Vec<Field>,
}

fn n_components(degree: u8) -> usize {
    if degree == 1 {
        2
    } else {
        1
    }
}

impl GridForm {
    pub fn new(grid: Arc<Grid>, degree: u8, comps: Vec<Field>) -> Result<Self> {
        if degree > 2 {
            return Err(Error::InvalidDegree(degree as i32));
        }
        if comps.len() != n_components(degree) || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("component arrays do not match the grid".into()));
        }
        Ok(Self { degree, grid, comps })
    }

    pub fn zero(grid: Arc<Grid>, degree: u8) -> Result<Self> {
        let comps = vec![vec![Complex64::default(); grid.len()]; n_components(degree)];
        Self::new(grid, degree, comps)
    }

    pub fn scalar(grid: Arc<Grid>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let c = grid.sample(f);
        Self { degree: 0, grid, comps: vec![c] }
    }

    pub fn one_form(
        grid: Arc<Grid>,
        f1: impl Fn(f64, f64) -> Complex64,
        f2: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let c = vec![grid.sample(f1), grid.sample(f2)];
        Self { degree: 1, grid, comps: c }
    }

    pub fn two_form(grid: Arc<Grid>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let c = grid.sample(f);
        Self { degree: 2, grid, comps: vec![c] }
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    pub fn component(&self, c: usize) -> &Field {
        &self.comps[c]
    }

    pub fn into_components(self) -> Vec<Field> {
        self.comps
    }

    fn check_pair(&self, other: &GridForm) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::GridMismatch("forms live on different grids".into()));
        }
        Ok(())
    }

    fn zip_with(&self, other: &GridForm, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<GridForm> {
        self.check_pair(other)?;
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch(format!("{} vs {}", self.degree, other.degree)));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Ok(GridForm { degree: self.degree, grid: self.grid.clone(), comps })
    }

    pub fn add(&self, other: &GridForm) -> Result<GridForm> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridForm) -> Result<GridForm> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> GridForm {
        let comps = self.comps.iter().map(|c| c.iter().map(|&v| v * s).collect()).collect();
        GridForm { degree: self.degree, grid: self.grid.clone(), comps }
    }

    /// Pointwise multiplication of every component by a real field.
    pub fn mul_field(&self, f: &[f64]) -> GridForm {
        let comps = self.comps.iter().map(|c| c.iter().zip(f).map(|(&v, &w)| v * w).collect()).collect();
        GridForm { degree: self.degree, grid: self.grid.clone(), comps }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude over nodes at least `margin` away from both ends.
    pub fn max_abs_interior(&self, margin: usize) -> f64 {
        let n = self.grid.n_theta;
        let nz = self.grid.n_z;
        self.comps
            .iter()
            .flat_map(|c| {
                c.iter().enumerate().filter(move |(idx, _)| {
                    let j = idx / n;
                    j >= margin && j + margin <= nz
                })
            })
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// CSV dump: header line then one row per node with all components.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "degree,n_theta,n_z,Z")?;
        writeln!(w, "{},{},{},{}", self.degree, self.grid.n_theta, self.grid.n_z, self.grid.z_max)?;
        let names: Vec<String> = (0..self.comps.len()).flat_map(|c| [format!("re{c}"), format!("im{c}")]).collect();
        writeln!(w, "theta,z,{}", names.join(","))?;
        let n = self.grid.n_theta;
        for (j, &z) in self.grid.z.iter().enumerate() {
            for (i, &t) in self.grid.theta.iter().enumerate() {
                write!(w, "{t:.17e},{z:.17e}")?;
                for c in &self.comps {
                    let v = c[j * n + i];
                    write!(w, ",{:.17e},{:.17e}", v.re, v.im)?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Exterior derivative.
pub fn exterior_d(form: &GridForm) -> Result<GridForm> {
    let g = &form.grid;
    match form.degree {
        0 => {
            let u = &form.comps[0];
            Ok(GridForm { degree: 1, grid: g.clone(), comps: vec![g.d_theta(u, 1), g.d_z(u)] })
        }
        1 => {
            let a2 = g.d_z(&form.comps[0]);
            let b1 = g.d_theta(&form.comps[1], 1);
            let c = b1.iter().zip(&a2).map(|(x, y)| x - y).collect();
            Ok(GridForm { degree: 2, grid: g.clone(), comps: vec![c] })
        }
        d => Err(Error::InvalidDegree(d as i32 + 1)),
    }
}

/// Hodge star: `∗1 = √(AB) dx1∧dx2`, `∗dx1 = √(B/A) dx2`, `∗dx2 = −√(A/B) dx1`,
/// `∗(dx1∧dx2) = 1/√(AB)` for `g = A dx1² + B dx2²`.
pub fn hodge_star(form: &GridForm, metric: &MetricField2D) -> Result<GridForm> {
    let ms = MetricSamples::new(&form.grid, metric)?;
    Ok(hodge_star_sampled(form, &ms))
}

pub fn hodge_star_sampled(form: &GridForm, ms: &MetricSamples) -> GridForm {
    let g = form.grid.clone();
    let ab = ms.g11.iter().zip(&ms.g22);
    match form.degree {
        0 => {
            let c = form.comps[0].iter().zip(ab).map(|(&u, (a, b))| u * (a * b).sqrt()).collect();
            GridForm { degree: 2, grid: g, comps: vec![c] }
        }
        1 => {
            let (p, q) = (&form.comps[0], &form.comps[1]);
            let mut c1 = Vec::with_capacity(p.len());
            let mut c2 = Vec::with_capacity(p.len());
            for ((&x, &y), (a, b)) in p.iter().zip(q).zip(ab) {
                c1.push(-y * (a / b).sqrt());
                c2.push(x * (b / a).sqrt());
            }
            GridForm { degree: 1, grid: g, comps: vec![c1, c2] }
        }
        _ => {
            let c = form.comps[0].iter().zip(ab).map(|(&u, (a, b))| u / (a * b).sqrt()).collect();
            GridForm { degree: 0, grid: g, comps: vec![c] }
        }
    }
}

/// `δ = −∗d∗` (all degrees, dimension two).
pub fn codifferential(form: &GridForm, metric: &MetricField2D) -> Result<GridForm> {
    let ms = MetricSamples::new(&form.grid, metric)?;
    codifferential_sampled(form, &ms)
}

pub fn codifferential_sampled(form: &GridForm, ms: &MetricSamples) -> Result<GridForm> {
    if form.degree == 0 {
        return Err(Error::InvalidDegree(-1));
    }
    let s = hodge_star_sampled(form, ms);
    let ds = exterior_d(&s)?;
    Ok(hodge_star_sampled(&ds, ms).scale(Complex64::new(-1.0, 0.0)))
}

/// Which boundary circle of the truncated cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    /// `z = 0`, the boundary of the manifold.
    Inner,
    /// `z = Z`, the truncation boundary.
    Outer,
}

/// A form on a boundary circle sampled at the grid angles; degree 0 or 1
/// (a boundary 1-form is stored by its `dx1` coefficient).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryForm {
    pub degree: u8,
    pub values: Vec<Complex64>,
}

impl BoundaryForm {
    pub fn fourier(&self) -> Vec<Complex64> {
        let n = self.values.len();
        let mut buf = self.values.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        buf.iter().map(|c| c / n as f64).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Tangential and normal traces on one boundary circle.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceData {
    pub t_omega: BoundaryForm,
    pub n_omega: BoundaryForm,
}

fn row(form: &GridForm, c: usize, end: End) -> &[Complex64] {
    let n = form.grid.n_theta;
    let j = match end {
        End::Inner => 0,
        End::Outer => form.grid.n_z,
    };
    &form.comps[c][j * n..(j + 1) * n]
}

fn ends_metric(form: &GridForm, metric: &MetricField2D, end: End) -> (Vec<f64>, f64) {
    let z = match end {
        End::Inner => 0.0,
        End::Outer => form.grid.z_max,
    };
    (form.grid.theta.iter().map(|&t| metric.g11(t, z)).collect(), metric.g22(z))
}

/// Pullback to a boundary circle.
pub fn tangential_trace_at(form: &GridForm, end: End) -> BoundaryForm {
    let n = form.grid.n_theta;
    match form.degree {
        0 => BoundaryForm { degree: 0, values: row(form, 0, end).to_vec() },
        1 => BoundaryForm { degree: 1, values: row(form, 0, end).to_vec() },
        _ => BoundaryForm { degree: 2, values: vec![Complex64::default(); n] },
    }
}

/// Pullback of `∗ω` to a boundary circle.
pub fn normal_trace_at(form: &GridForm, metric: &MetricField2D, end: End) -> BoundaryForm {
    let n = form.grid.n_theta;
    let (a, b) = ends_metric(form, metric, end);
    match form.degree {
        0 => BoundaryForm { degree: 2, values: vec![Complex64::default(); n] },
        1 => {
            let v = row(form, 1, end).iter().zip(&a).map(|(&y, &a)| -y * (a / b).sqrt()).collect();
            BoundaryForm { degree: 1, values: v }
        }
        _ => {
            let v = row(form, 0, end).iter().zip(&a).map(|(&c, &a)| c / (a * b).sqrt()).collect();
            BoundaryForm { degree: 0, values: v }
        }
    }
}

/// `tω` on `z = 0`.
pub fn tangential_trace(form: &GridForm, _metric: &MetricField2D) -> BoundaryForm {
    tangential_trace_at(form, End::Inner)
}

/// `nω = t(∗ω)` on `z = 0`.
pub fn normal_trace(form: &GridForm, metric: &MetricField2D) -> BoundaryForm {
    normal_trace_at(form, metric, End::Inner)
}

pub fn traces(form: &GridForm, metric: &MetricField2D) -> TraceData {
    TraceData { t_omega: tangential_trace(form, metric), n_omega: normal_trace(form, metric) }
}

/// `(ω, η) = ∫ g(ω, η̄) μ`.
pub fn inner_product(omega: &GridForm, eta: &GridForm, metric: &MetricField2D) -> Result<Complex64> {
    let ms = MetricSamples::new(&omega.grid, metric)?;
    inner_product_sampled(omega, eta, &ms)
}

pub fn inner_product_sampled(omega: &GridForm, eta: &GridForm, ms: &MetricSamples) -> Result<Complex64> {
    omega.check_pair(eta)?;
    if omega.degree != eta.degree {
        return Err(Error::DegreeMismatch(format!("inner product of degrees {} and {}", omega.degree, eta.degree)));
    }
    let g = &omega.grid;
    let density: Field = match omega.degree {
        0 => (0..g.len())
            .map(|i| omega.comps[0][i] * eta.comps[0][i].conj() * (ms.g11[i] * ms.g22[i]).sqrt())
            .collect(),
        1 => (0..g.len())
            .map(|i| {
                let (a, b) = (ms.g11[i], ms.g22[i]);
                let r = (a * b).sqrt();
                (omega.comps[0][i] * eta.comps[0][i].conj() / a + omega.comps[1][i] * eta.comps[1][i].conj() / b) * r
            })
            .collect(),
        _ => (0..g.len())
            .map(|i| omega.comps[0][i] * eta.comps[0][i].conj() / (ms.g11[i] * ms.g22[i]).sqrt())
            .collect(),
    };
    Ok(g.integrate(&density))
}

/// `∫_{∂} tω ∧ \overline{nη}` over both circles, oriented as the boundary of
/// the truncated cylinder (`+dθ` at `z = 0`, `−dθ` at `z = Z`).
pub fn boundary_pairing(omega: &GridForm, eta: &GridForm, metric: &MetricField2D) -> Result<Complex64> {
    omega.check_pair(eta)?;
    if eta.degree != omega.degree + 1 {
        return Err(Error::DegreeMismatch("boundary pairing needs deg η = deg ω + 1".into()));
    }
    let w = 2.0 * PI / omega.grid.n_theta as f64;
    let mut total = Complex64::default();
    for (end, sign) in [(End::Inner, 1.0), (End::Outer, -1.0)] {
        let t = tangential_trace_at(omega, end);
        let nn = normal_trace_at(eta, metric, end);
        let s: Complex64 = t.values.iter().zip(&nn.values).map(|(a, b)| a * b.conj()).sum();
        total += s * w * sign;
    }
    Ok(total)
}

/// `|(dω, η) − (ω, δη) − ⟨tω, nη⟩|`.
pub fn stokes_residual(omega: &GridForm, eta: &GridForm, metric: &MetricField2D) -> Result<f64> {
    if eta.degree != omega.degree + 1 {
        return Err(Error::DegreeMismatch(format!(
            "Stokes pairing needs degrees (k, k+1), got ({}, {})",
            omega.degree, eta.degree
        )));
    }
    let ms = MetricSamples::new(&omega.grid, metric)?;
    let lhs = inner_product_sampled(&exterior_d(omega)?, eta, &ms)?;
    let rhs = inner_product_sampled(omega, &codifferential_sampled(eta, &ms)?, &ms)?;
    let bdry = boundary_pairing(omega, eta, metric)?;
    Ok((lhs - rhs - bdry).norm())
}
