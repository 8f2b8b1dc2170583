//! Metrics on the cylinder `S¹ × [0, Z]`.
//!
//! A metric is `g = g11(x1, x2) (dx1)² + g22(x2) (dx2)²`. Warped presets have
//! `g22 ≡ 1`, so `x2` is the distance to the boundary; conformal rescaling by
//! an `x2`-only factor multiplies both coefficients. Boundary jets are always
//! reported in boundary normal coordinates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet2;
use crate::quad;

pub use crate::forms::hodge_star;

/// Default cap on the derivative order a metric will supply.
pub const DEFAULT_MAX_ORDER: usize = 16;

#[derive(Clone, Debug)]
pub struct MetricField2D {
    name: String,
    g11: Expr,
    g22: Expr,
    domain_length: f64,
    max_order: usize,
}

/// Taylor jets of both metric coefficients at a point.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub g11: Jet2,
    pub g22: Jet2,
}

/// One Fourier term `c · e^{i m x1} · x2^power` of a series metric; the
/// conjugate term for `-m` is implied.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SeriesTerm {
    pub power: u32,
    pub mode: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl MetricField2D {
    pub fn new(name: impl Into<String>, g11: Expr, g22: Expr, domain_length: f64) -> Result<Self> {
        if g22.depends_on_x1() {
            return Err(Error::UnsupportedShape("normal metric coefficient must not depend on x1".into()));
        }
        if !(domain_length > 0.0) {
            return Err(Error::InvalidInput(format!("domain length must be positive, got {domain_length}")));
        }
        Ok(Self { name: name.into(), g11, g22, domain_length, max_order: DEFAULT_MAX_ORDER })
    }

    /// Euclidean cylinder, `g11 ≡ 1`.
    pub fn flat(domain_length: f64) -> Self {
        Self::new("flat", Expr::constant(1.0), Expr::constant(1.0), domain_length).expect("valid preset")
    }

    /// `e^{-2z} dθ² + dz²`, curvature −1.
    pub fn hyperbolic(domain_length: f64) -> Self {
        let g11 = (-2.0 * Expr::x2()).exp();
        Self::new("hyperbolic", g11, Expr::constant(1.0), domain_length).expect("valid preset")
    }

    /// `(1 + z e^{-z})` times the hyperbolic metric.
    pub fn conformal_paper(domain_length: f64) -> Self {
        let m = conformal_rescale(&Self::hyperbolic(domain_length), &ConformalFactor::paper())
            .expect("x2-only factor");
        m.renamed("conformal-paper")
    }

    /// `g11 = Σ 2 Re(c_{l,m} e^{i m x1}) x2^l` (the `m = 0` terms counted once).
    pub fn series(terms: &[SeriesTerm], domain_length: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("series metric needs at least one term".into()));
        }
        let mut g11 = Expr::constant(0.0);
        for t in terms {
            let z_pow = Expr::x2().powf(t.power as f64);
            let angular = if t.mode == 0 {
                Expr::constant(t.re)
            } else {
                let mx = t.mode as f64 * Expr::x1();
                2.0 * t.re * mx.cos() - 2.0 * t.im * mx.sin()
            };
            g11 = g11 + angular * z_pow;
        }
        let m = Self::new("series", g11, Expr::constant(1.0), domain_length)?;
        for i in 0..16 {
            let x1 = 2.0 * PI * i as f64 / 16.0;
            if m.g11(x1, 0.0) <= 0.0 {
                return Err(Error::Domain("series metric is not positive on the boundary".into()));
            }
        }
        Ok(m)
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn with_domain_length(mut self, domain_length: f64) -> Self {
        self.domain_length = domain_length;
        self
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn g11_expr(&self) -> &Expr {
        &self.g11
    }

    pub fn g22_expr(&self) -> &Expr {
        &self.g22
    }

    pub fn g11(&self, x1: f64, x2: f64) -> f64 {
        self.g11.eval(x1, x2)
    }

    pub fn g22(&self, x2: f64) -> f64 {
        self.g22.eval(0.0, x2)
    }

    /// `g11 (dx1)² + (dx2)²` with `x2` the boundary distance.
    pub fn is_warped(&self) -> bool {
        self.g22.as_constant() == Some(1.0)
    }

    pub fn is_rotationally_symmetric(&self) -> bool {
        !self.g11.depends_on_x1()
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if order > self.max_order {
            return Err(Error::InsufficientJetDepth { needed: order as i32, available: self.max_order as i32 });
        }
        Ok(())
    }

    pub fn jet(&self, x1: f64, x2: f64, order: usize) -> Result<MetricJet> {
        self.check_order(order)?;
        let o = order as i32;
        let g11 = self.g11.jet_at(x1, x2, o)?;
        let g22 = self.g22.jet_at(x1, x2, o)?;
        if g11.value()? <= 0.0 || g22.value()? <= 0.0 {
            return Err(Error::Domain(format!("metric not positive at ({x1}, {x2})")));
        }
        Ok(MetricJet { g11, g22 })
    }

    /// `∂1^a ∂2^b g11` at a point.
    pub fn partial(&self, a: usize, b: usize, x1: f64, x2: f64) -> Result<f64> {
        self.check_order(a + b)?;
        self.g11.jet_at(x1, x2, (a + b) as i32)?.partial(a, b)
    }

    /// Jet of `g11` at the boundary point `(x1, 0)` in boundary normal
    /// coordinates `(x1, s)`, `s = ∫₀^{x2} √g22`.
    pub fn boundary_normal_jet(&self, x1: f64, order: usize) -> Result<Jet2> {
        self.check_order(order)?;
        let o = order as i32;
        let x1j = Jet2::var1(x1, o);
        if self.is_warped() {
            return self.g11.eval_jet(&x1j, &Jet2::var2(0.0, o));
        }
        // Picard iteration for dz/ds = g22(z)^{-1/2}, z(0) = 0; each pass fixes one more order.
        let mut z = Jet2::var2(0.0, o);
        for _ in 0..=order {
            let w = self.g22.eval_jet(&x1j, &z)?.powf(-0.5)?;
            z = w.integrate2().truncate(o);
        }
        self.g11.eval_jet(&x1j, &z)
    }
}

/// Positive factor `1 + f(x2) = e^{2φ}` of a conformal rescaling.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    one_plus_f: Expr,
}

impl ConformalFactor {
    pub fn new(one_plus_f: Expr) -> Self {
        Self { one_plus_f }
    }

    /// `e^{2φ}` from `φ`.
    pub fn from_phi(phi: Expr) -> Self {
        Self { one_plus_f: (2.0 * phi).exp() }
    }

    /// `1 + z e^{-z}`.
    pub fn paper() -> Self {
        let z = Expr::x2();
        Self::new(1.0 + z.clone() * (-z).exp())
    }

    pub fn identity() -> Self {
        Self::new(Expr::constant(1.0))
    }

    pub fn inverse(&self) -> Self {
        Self::new(1.0 / self.one_plus_f.clone())
    }

    pub fn one_plus_f(&self) -> &Expr {
        &self.one_plus_f
    }

    pub fn sigma(&self, x2: f64) -> f64 {
        self.one_plus_f.eval(0.0, x2)
    }

    pub fn phi(&self, x2: f64) -> f64 {
        0.5 * self.sigma(x2).ln()
    }

    /// `τ = 1 / (1 + f)`.
    pub fn tau(&self, x2: f64) -> f64 {
        1.0 / self.sigma(x2)
    }

    /// Jet of `τ` in `x2`.
    pub fn tau_jet(&self, x2: f64, order: usize) -> Result<Jet2> {
        self.one_plus_f.jet_at(0.0, x2, order as i32)?.recip()
    }
}

/// `e^{2φ} g`. Rejects factors that depend on `x1`.
pub fn conformal_rescale(metric: &MetricField2D, factor: &ConformalFactor) -> Result<MetricField2D> {
    if factor.one_plus_f.depends_on_x1() {
        return Err(Error::UnsupportedShape("conformal factor depends on x1".into()));
    }
    let s = factor.one_plus_f.clone();
    let g11 = if factor.one_plus_f.as_constant() == Some(1.0) { metric.g11.clone() } else { s.clone() * metric.g11.clone() };
    let g22 = match (metric.g22.as_constant(), s.as_constant()) {
        (_, Some(c)) if c == 1.0 => metric.g22.clone(),
        (Some(c), _) if c == 1.0 => s,
        _ => s * metric.g22.clone(),
    };
    let mut out = MetricField2D::new(format!("{}*conformal", metric.name), g11, g22, metric.domain_length)?;
    out.max_order = metric.max_order;
    Ok(out)
}

/// Gaussian curvature of `A (dx1)² + B (dx2)²` with `B = B(x2)`:
/// `K = −(1 / 2√(AB)) ∂2(∂2A / √(AB))`.
pub fn gaussian_curvature(metric: &MetricField2D, x1: f64, x2: f64) -> Result<f64> {
    let j = metric.jet(x1, x2, 2)?;
    let root = (&j.g11 * &j.g22).sqrt()?;
    let inner = &j.g11.d2() * &root.recip()?;
    let k = inner.d2().value()? / (2.0 * root.value()?);
    Ok(-k)
}

/// Closed-form curvature of the conformal preset.
pub fn conformal_paper_curvature(z: f64) -> f64 {
    let e1 = (-z).exp();
    let e2 = (-2.0 * z).exp();
    (e2 * (z + 1.0 - 3.0 * z * z) + e1 * (3.0 - 6.0 * z) - 2.0) / (2.0 * (1.0 + z * e1).powi(3))
}

/// `Δ_{g}(½ log(1+f)) + K_g − K_{g̃}(1+f)` at height `x2` for an `x2`-only
/// factor, with the 0-form Laplacian of `g` applied analytically.
pub fn liouville_residual(metric: &MetricField2D, factor: &ConformalFactor, x1: f64, x2: f64) -> Result<f64> {
    let j = metric.jet(x1, x2, 2)?;
    let phi = factor.one_plus_f.jet_at(x1, x2, 2)?.ln()?.scale(0.5);
    let a = &j.g11;
    let b = &j.g22;
    let root = (a * b).sqrt()?;
    let ratio = (a * &b.recip()?).sqrt()?;
    // Δu = −(1/√(AB)) ∂2(√(A/B) ∂2u) for u = u(x2)
    let lap = -(&ratio * &phi.d2()).d2().value()? / root.value()?;
    let rescaled = conformal_rescale(metric, factor)?;
    let k = gaussian_curvature(metric, x1, x2)?;
    let kt = gaussian_curvature(&rescaled, x1, x2)?;
    Ok(lap + k - kt * factor.one_plus_f.eval(x1, x2))
}

/// First-order geodesic distance with the metric frozen at the midpoint;
/// `x = (x1, x2)`, angular differences taken on the circle.
pub fn local_distance(metric: &MetricField2D, x: (f64, f64), y: (f64, f64)) -> f64 {
    let (x, y) = if (x.0, x.1) <= (y.0, y.1) { (x, y) } else { (y, x) };
    let mut d1 = x.0 - y.0;
    if d1 > PI {
        d1 -= 2.0 * PI;
    } else if d1 < -PI {
        d1 += 2.0 * PI;
    }
    let m1 = y.0 + 0.5 * d1;
    let m2 = 0.5 * (x.1 + y.1);
    let d2 = x.1 - y.1;
    (metric.g11(m1, m2) * d1 * d1 + metric.g22(m2) * d2 * d2).sqrt()
}

/// Normal jets of `g11` on the boundary circle, in boundary normal
/// coordinates, as Fourier coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryJet {
    pub n_theta: usize,
    /// `levels[l][m]` is the FFT-ordered coefficient of `e^{i m x1}`.
    pub levels: Vec<Vec<Complex64>>,
}

impl BoundaryJet {
    /// Build from samples `values[l][i]` of level `l` at `x1 = 2πi/n`.
    pub fn from_samples(values: &[Vec<f64>]) -> Self {
        let n = values.first().map_or(0, Vec::len);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let levels = values
            .iter()
            .map(|v| {
                let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fft.process(&mut buf);
                buf.iter().map(|c| c / n as f64).collect()
            })
            .collect();
        Self { n_theta: n, levels }
    }

    pub fn m_max(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Level `l` evaluated at `x1` by its trigonometric interpolant.
    pub fn eval(&self, l: usize, x1: f64) -> f64 {
        let c = &self.levels[l];
        let n = c.len();
        let mut s = Complex64::new(0.0, 0.0);
        for (m, cm) in c.iter().enumerate() {
            let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let w = if n % 2 == 0 && m == n / 2 { 0.5 } else { 1.0 };
            let ph = Complex64::from_polar(1.0, freq * x1);
            s += cm * ph * w;
            if n % 2 == 0 && m == n / 2 {
                s += cm * Complex64::from_polar(1.0, -freq * x1) * w;
            }
        }
        s.re
    }

    /// Sample values of level `l` on the `n_theta` grid.
    pub fn samples(&self, l: usize) -> Vec<f64> {
        let n = self.n_theta;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n);
        let mut buf = self.levels[l].clone();
        ifft.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

/// `∂ˡ_s g11(x1, 0)` for `l ≤ m_max`, sampled on `n_theta` angles.
pub fn boundary_jet(metric: &MetricField2D, m_max: usize, n_theta: usize) -> Result<BoundaryJet> {
    if m_max > metric.max_order {
        return Err(Error::InsufficientJetDepth { needed: m_max as i32, available: metric.max_order as i32 });
    }
    let mut values = vec![vec![0.0; n_theta]; m_max + 1];
    for i in 0..n_theta {
        let x1 = 2.0 * PI * i as f64 / n_theta as f64;
        let j = metric.boundary_normal_jet(x1, m_max)?;
        for (l, row) in values.iter_mut().enumerate() {
            row[i] = j.partial(0, l)?;
        }
    }
    if values[0].iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("boundary metric is not positive".into()));
    }
    Ok(BoundaryJet::from_samples(&values))
}

/// Result of [`pseudosphere_check`].
#[derive(Clone, Debug, Serialize)]
pub struct PseudosphereReport {
    pub metric_residual: f64,
    pub tractrix_residual: f64,
    pub profile: Vec<(f64, f64, f64)>,
}

/// `h(z) = ∫₀ᶻ √(1 − e^{−2t}) dt`.
pub fn pseudosphere_height(z: f64) -> f64 {
    // t = u² removes the square-root endpoint singularity
    quad::integrate(|u| 2.0 * u * (-(-2.0 * u * u).exp_m1()).max(0.0).sqrt(), 0.0, z.sqrt(), 64)
}

/// Tractrix `x(y) = −√(1−y²) − log y + log(1 + √(1−y²))`.
pub fn tractrix(y: f64) -> f64 {
    let s = (1.0 - y * y).sqrt();
    -s - y.ln() + (1.0 + s).ln()
}

/// Compares the first fundamental form of `(z, θ) ↦ (h(z), e^{−z}cos θ, e^{−z}sin θ)`
/// with the hyperbolic metric, and the profile curve with the tractrix.
pub fn pseudosphere_check(z_samples: &[f64]) -> Result<PseudosphereReport> {
    let mut metric_residual: f64 = 0.0;
    let mut tractrix_residual: f64 = 0.0;
    let mut profile = Vec::with_capacity(z_samples.len());
    for &z in z_samples {
        if z < 0.0 {
            return Err(Error::Domain(format!("pseudosphere sample z = {z} is negative")));
        }
        let h = pseudosphere_height(z);
        let r = (-z).exp();
        profile.push((z, h, r));
        tractrix_residual = tractrix_residual.max((tractrix(r) - h).abs());
        if z == 0.0 {
            continue;
        }
        let hp = (1.0 - (-2.0 * z).exp()).sqrt();
        for i in 0..8 {
            let th = 2.0 * PI * i as f64 / 8.0;
            let xz = [hp, -r * th.cos(), -r * th.sin()];
            let xt = [0.0, -r * th.sin(), r * th.cos()];
            let dot = |u: &[f64; 3], v: &[f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
            metric_residual = metric_residual
                .max((dot(&xz, &xz) - 1.0).abs())
                .max(dot(&xz, &xt).abs())
                .max((dot(&xt, &xt) - (-2.0 * z).exp()).abs());
        }
    }
    Ok(PseudosphereReport { metric_residual, tractrix_residual, profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn curvature_of_presets() {
        for z in [0.0, 0.7, 3.0, 11.5] {
            assert_eq!(gaussian_curvature(&MetricField2D::flat(12.0), 0.3, z).unwrap(), 0.0);
            let k = gaussian_curvature(&MetricField2D::hyperbolic(12.0), 1.0, z).unwrap();
            assert!((k + 1.0).abs() < 1e-12);
        }
        let k0 = gaussian_curvature(&MetricField2D::conformal_paper(12.0), 0.0, 0.0).unwrap();
        assert!((k0 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn conformal_round_trip() {
        let g = MetricField2D::hyperbolic(12.0);
        let f = ConformalFactor::paper();
        let back = conformal_rescale(&conformal_rescale(&g, &f).unwrap(), &f.inverse()).unwrap();
        for z in [0.0, 0.5, 2.0, 9.0] {
            assert_relative_eq!(back.g11(0.2, z), g.g11(0.2, z), max_relative = 1e-14);
            assert_relative_eq!(back.g22(z), 1.0, max_relative = 1e-14);
        }
        let g2 = MetricField2D::conformal_paper(12.0);
        assert_relative_eq!(g2.g11(0.0, 1.0), (1.0 + (-1.0f64).exp()) * (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_angular_factor() {
        let f = ConformalFactor::new(1.0 + 0.1 * Expr::x1().cos());
        assert!(matches!(
            conformal_rescale(&MetricField2D::flat(1.0), &f),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn local_distance_examples() {
        let g1 = MetricField2D::hyperbolic(12.0);
        let d = local_distance(&g1, (0.1, 1.0), (0.0, 1.0));
        assert_relative_eq!(d, (-1.0f64).exp() * 0.1, max_relative = 1e-14);
        assert_eq!(d, local_distance(&g1, (0.0, 1.0), (0.1, 1.0)));
        assert_relative_eq!(local_distance(&MetricField2D::flat(1.0), (0.1, 0.5), (0.0, 0.5)), 0.1);
    }

    #[test]
    fn hyperbolic_boundary_jet() {
        let bj = boundary_jet(&MetricField2D::hyperbolic(12.0), 3, 8).unwrap();
        for (l, want) in [1.0, -2.0, 4.0, -8.0].iter().enumerate() {
            assert_relative_eq!(bj.levels[l][0].re, *want, max_relative = 1e-14);
            assert_relative_eq!(bj.eval(l, 1.3), *want, max_relative = 1e-13);
        }
    }

    #[test]
    fn pseudosphere() {
        let r = pseudosphere_check(&[0.0, 0.5, 1.0, 2.0]).unwrap();
        assert_eq!(r.profile[0].1, 0.0);
        assert_eq!(r.profile[0].2, 1.0);
        assert!(r.metric_residual < 1e-12);
        assert!(r.tractrix_residual < 1e-10);
    }
}
