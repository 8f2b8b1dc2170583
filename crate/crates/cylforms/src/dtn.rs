//! Dirichlet-to-Neumann maps of harmonic 0- and 1-forms, mode by mode.
//!
//! The Dirichlet data are prescribed at the boundary circle `z = 0`; the far
//! end `z = Z` carries homogeneous Dirichlet data standing in for decay.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::fornberg;
use crate::geometry::{conformal_rescale, ConformalFactor, MetricField2D};
use crate::modes::{discrete_spectrum, symmetric_discretization, ModeGrid, ModeOperator, ModeSolution, ModeSystem};
use crate::par;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Where the mode operators come from.
#[derive(Clone, Debug)]
pub enum OperatorSource {
    /// The compositional Laplacian of the metric.
    Laplacian(MetricField2D),
    /// The Laplacian of `factor · base` through the conformal identities of `base`.
    ConformalIdentity { base: MetricField2D, factor: ConformalFactor },
}

impl OperatorSource {
    pub fn metric(&self) -> Result<MetricField2D> {
        match self {
            OperatorSource::Laplacian(m) => Ok(m.clone()),
            OperatorSource::ConformalIdentity { base, factor } => conformal_rescale(base, factor),
        }
    }

    pub fn operator(&self, degree: u8, k: i64) -> Result<ModeOperator> {
        match self {
            OperatorSource::Laplacian(m) => ModeOperator::laplacian(m, degree, k),
            OperatorSource::ConformalIdentity { base, factor } => ModeOperator::conformal_identity(base, factor, degree, k),
        }
    }

    fn label(&self) -> String {
        match self {
            OperatorSource::Laplacian(m) => m.name().to_string(),
            OperatorSource::ConformalIdentity { base, .. } => format!("{}-rescaled-by-identity", base.name()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DtnConfig {
    /// Intervals of each per-mode grid.
    pub n_z: usize,
    pub k_max: i64,
    /// Verify positivity of each truncated mode operator before solving.
    pub spectral_check: bool,
    /// Intervals of the eigensolve behind the spectral check.
    pub spectral_nodes: usize,
    /// Also report `nδω` blocks.
    pub emit_ndelta: bool,
}

impl Default for DtnConfig {
    fn default() -> Self {
        Self { n_z: 800, k_max: 32, spectral_check: true, spectral_nodes: 400, emit_ndelta: false }
    }
}

/// One mode block, row-major.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DtnBlock {
    pub k: i64,
    pub entries: Vec<Complex64>,
}

/// Per-mode DtN blocks.
///
/// Degree 0: `f ↦ ndω`. Degree 1: `(f₁, f₂) ↦ (ndω, tδω)` with
/// `tω = f₁ dθ`, `nω = f₂ dθ` at `z = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DtNMatrix {
    pub degree: u8,
    pub metric: String,
    #[serde(rename = "Z")]
    pub z_max: f64,
    pub n_z: usize,
    #[serde(rename = "K_max")]
    pub k_max: i64,
    /// `g11` and `g22` on the boundary circle.
    pub boundary_metric: [f64; 2],
    pub blocks: Vec<DtnBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nd_delta: Option<Vec<DtnBlock>>,
}

impl DtNMatrix {
    pub fn block(&self, k: i64) -> Option<&DtnBlock> {
        self.blocks.iter().find(|b| b.k == k)
    }

    pub fn mode_count(&self) -> usize {
        self.blocks.len()
    }

    /// Apply to boundary Fourier coefficients listed for `k = −K..=K`.
    pub fn apply(&self, f1: &[Complex64], f2: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let n = self.blocks.len();
        if f1.len() != n || (self.degree == 1 && f2.len() != n) {
            return Err(Error::InvalidInput(format!("expected {n} Fourier coefficients per input")));
        }
        let mut nd = Vec::with_capacity(n);
        let mut td = Vec::with_capacity(n);
        for (i, b) in self.blocks.iter().enumerate() {
            if self.degree == 0 {
                nd.push(b.entries[0] * f1[i]);
                td.push(ZERO);
            } else {
                nd.push(b.entries[0] * f1[i] + b.entries[1] * f2[i]);
                td.push(b.entries[2] * f1[i] + b.entries[3] * f2[i]);
            }
        }
        Ok((nd, td))
    }
}

/// Boundary 4-tuple `(tω, nω, ndω, tδω)` as Fourier coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct CauchyData {
    pub degree: u8,
    pub k: Vec<i64>,
    pub t_omega: Vec<Complex64>,
    pub n_omega: Vec<Complex64>,
    pub nd_omega: Vec<Complex64>,
    pub td_omega: Vec<Complex64>,
}

/// Cauchy data of the harmonic form with the given Dirichlet data.
pub fn cauchy_data(dtn: &DtNMatrix, f1: &[Complex64], f2: &[Complex64]) -> Result<CauchyData> {
    let (nd, td) = dtn.apply(f1, f2)?;
    let n_omega = if dtn.degree == 1 { f2.to_vec() } else { vec![ZERO; f1.len()] };
    Ok(CauchyData {
        degree: dtn.degree,
        k: dtn.blocks.iter().map(|b| b.k).collect(),
        t_omega: f1.to_vec(),
        n_omega,
        nd_omega: nd,
        td_omega: td,
    })
}

/// Metric factors on the boundary circle.
#[derive(Clone, Copy, Debug)]
struct BoundaryFactors {
    g11: f64,
    g22: f64,
    vol: f64,
    /// `√(g11/g22)` and its `z`-derivative.
    ratio: f64,
    ratio_dz: f64,
}

impl BoundaryFactors {
    fn new(metric: &MetricField2D) -> Result<Self> {
        let mj = metric.jet(0.0, 0.0, 1)?;
        let r = (&mj.g11 * &mj.g22.recip()?).sqrt()?;
        let g11 = mj.g11.value()?;
        let g22 = mj.g22.value()?;
        Ok(Self { g11, g22, vol: (g11 * g22).sqrt(), ratio: r.value()?, ratio_dz: r.partial(0, 1)? })
    }
}

/// Reject when the truncated mode operator is not positive.
pub fn spectral_check(op: &ModeOperator, nodes: usize) -> Result<f64> {
    let low = discrete_spectrum(op, 1, nodes)?[0];
    if !(low > 0.0) {
        return Err(Error::SpectralCheck(format!("mode k = {} has lowest eigenvalue {low:e}", op.k())));
    }
    Ok(low)
}

fn mode_system(source: &OperatorSource, degree: u8, k: i64, cfg: &DtnConfig) -> Result<(ModeOperator, ModeSystem)> {
    let op = source.operator(degree, k)?;
    if cfg.spectral_check {
        spectral_check(&op, cfg.spectral_nodes)?;
    }
    let grid = ModeGrid::graded(op.z_max(), cfg.n_z, k)?;
    let sys = ModeSystem::new(&op, grid)?;
    Ok((op, sys))
}

fn ks(k_max: i64) -> Vec<i64> {
    (-k_max..=k_max).collect()
}

/// Tolerance on reconstructed Dirichlet data.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Degree-0 blocks for an operator source.
pub fn dtn0_with(source: &OperatorSource, cfg: &DtnConfig) -> Result<DtNMatrix> {
    let metric = source.metric()?;
    let bf = BoundaryFactors::new(&metric)?;
    let k_list = ks(cfg.k_max);
    let blocks = par::try_map(k_list.len(), |i| {
        let k = k_list[i];
        let (_, sys) = mode_system(source, 0, k, cfg)?;
        let sol = sys.solve(&[Complex64::new(1.0, 0.0)], &[ZERO])?;
        Ok(DtnBlock { k, entries: vec![-bf.ratio * sol.derivative_at_zero[0]] })
    })?;
    Ok(DtNMatrix {
        degree: 0,
        metric: source.label(),
        z_max: metric.domain_length(),
        n_z: cfg.n_z,
        k_max: cfg.k_max,
        boundary_metric: [bf.g11, bf.g22],
        blocks,
        nd_delta: None,
    })
}

pub fn dtn0(metric: &MetricField2D, cfg: &DtnConfig) -> Result<DtNMatrix> {
    dtn0_with(&OperatorSource::Laplacian(metric.clone()), cfg)
}

/// Degree-0 blocks from the second-order divergence-form scheme on `n_z`
/// uniform intervals, independent of the graded high-order solver.
pub fn dtn0_second_order(metric: &MetricField2D, cfg: &DtnConfig) -> Result<DtNMatrix> {
    let bf = BoundaryFactors::new(metric)?;
    let k_list = ks(cfg.k_max);
    let n = cfg.n_z;
    let h = metric.domain_length() / n as f64;
    let blocks = par::try_map(k_list.len(), |i| {
        let k = k_list[i];
        let op = ModeOperator::laplacian(metric, 0, k)?;
        let disc = symmetric_discretization(&op, n)?;
        let p_half = op.divergence_form(0.5 * h)?.p[0];
        let mut rhs = vec![ZERO; n - 1];
        rhs[0] = (p_half / (h * h)).into();
        let u = disc.hermitian.clone().factor()?.solve(&rhs);
        let xs: Vec<f64> = (0..5).map(|j| j as f64 * h).collect();
        let w = &fornberg(0.0, &xs, 1)[1];
        let du = w[0] + (1..5).map(|j| u[j - 1] * w[j]).sum::<Complex64>();
        Ok(DtnBlock { k, entries: vec![-bf.ratio * du] })
    })?;
    Ok(DtNMatrix {
        degree: 0,
        metric: format!("{}-second-order", metric.name()),
        z_max: metric.domain_length(),
        n_z: n,
        k_max: cfg.k_max,
        boundary_metric: [bf.g11, bf.g22],
        blocks,
        nd_delta: None,
    })
}

/// `(ndω, tδω)` at `z = 0` of a degree-1 mode solution.
fn one_form_outputs(sol: &ModeSolution, bf: &BoundaryFactors) -> (Complex64, Complex64) {
    let k = sol.k as f64;
    let a0 = sol.values[0][0];
    let b0 = sol.values[0][1];
    let [da, db] = sol.derivative_at_zero;
    let nd = (I * k * b0 - da) / bf.vol;
    let td = -((I * k) * a0 / bf.ratio + bf.ratio_dz * b0 + bf.ratio * db) / bf.vol;
    (nd, td)
}

/// Dirichlet data `(a(0), b(0))` realizing `tω = f₁`, `nω = f₂`.
fn one_form_dirichlet(f1: Complex64, f2: Complex64, bf: &BoundaryFactors) -> [Complex64; 2] {
    [f1, -f2 / bf.ratio]
}

/// Degree-1 blocks for an operator source.
pub fn dtn1_with(source: &OperatorSource, cfg: &DtnConfig) -> Result<DtNMatrix> {
    let metric = source.metric()?;
    let bf = BoundaryFactors::new(&metric)?;
    let k_list = ks(cfg.k_max);
    let blocks = par::try_map(k_list.len(), |i| {
        let k = k_list[i];
        let (_, sys) = mode_system(source, 1, k, cfg)?;
        let mut cols = Vec::with_capacity(2);
        for (f1, f2) in [(Complex64::new(1.0, 0.0), ZERO), (ZERO, Complex64::new(1.0, 0.0))] {
            let near = one_form_dirichlet(f1, f2, &bf);
            let sol = sys.solve(&near, &[ZERO, ZERO])?;
            let t = sol.values[0][0];
            let n = -bf.ratio * sol.values[0][1];
            if (t - f1).norm() > BOUNDARY_TOLERANCE || (n - f2).norm() > BOUNDARY_TOLERANCE {
                return Err(Error::Consistency(format!("mode {k}: boundary data not reproduced")));
            }
            cols.push(one_form_outputs(&sol, &bf));
        }
        Ok(DtnBlock { k, entries: vec![cols[0].0, cols[1].0, cols[0].1, cols[1].1] })
    })?;
    // n(δω) pulls the 2-form ∗δω back to the boundary curve, where it vanishes.
    let nd_delta = cfg
        .emit_ndelta
        .then(|| k_list.iter().map(|&k| DtnBlock { k, entries: vec![ZERO; 2] }).collect());
    Ok(DtNMatrix {
        degree: 1,
        metric: source.label(),
        z_max: metric.domain_length(),
        n_z: cfg.n_z,
        k_max: cfg.k_max,
        boundary_metric: [bf.g11, bf.g22],
        blocks,
        nd_delta,
    })
}

pub fn dtn1(metric: &MetricField2D, cfg: &DtnConfig) -> Result<DtNMatrix> {
    dtn1_with(&OperatorSource::Laplacian(metric.clone()), cfg)
}

/// `λ(k) = ∂_sω₁(0)` for the harmonic 1-form with `(f₁, f₂) = (e^{ikθ}, 0)`,
/// `s` the boundary distance, recovered from the `f₁ ↦ ndω` entry.
pub fn a11_from_dtn(dtn: &DtNMatrix) -> Result<Vec<(i64, f64)>> {
    if dtn.degree != 1 {
        return Err(Error::DegreeMismatch("λ(k) is read from degree-1 blocks".into()));
    }
    let g11 = dtn.boundary_metric[0];
    dtn.blocks
        .iter()
        .map(|b| {
            let lam = -g11.sqrt() * b.entries[0];
            if lam.im.abs() > 1e-8 * lam.norm().max(1.0) {
                return Err(Error::Consistency(format!("λ({}) is not real: {lam}", b.k)));
            }
            Ok((b.k, lam.re))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Indistinguishable,
    Distinguished,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeGap {
    pub k: i64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub degree: u8,
    pub metrics: [String; 2],
    pub tolerance: f64,
    pub per_mode: Vec<ModeGap>,
    pub max_gap: f64,
    pub verdict: Verdict,
}

impl CompareReport {
    pub fn gap(&self, k: i64) -> Option<f64> {
        self.per_mode.iter().find(|g| g.k == k).map(|g| g.gap)
    }
}

/// Tolerance below which two DtN maps count as equal.
pub const INDISTINGUISHABLE_TOLERANCE: f64 = 1e-10;

/// Per-mode max-entry differences of two DtN maps on identical grids.
pub fn compare_dtn(a: &DtNMatrix, b: &DtNMatrix, tolerance: f64) -> Result<CompareReport> {
    if a.degree != b.degree {
        return Err(Error::DegreeMismatch(format!("degrees {} and {}", a.degree, b.degree)));
    }
    if a.z_max != b.z_max || a.n_z != b.n_z || a.k_max != b.k_max {
        return Err(Error::GridMismatch("DtN maps were computed on different grids".into()));
    }
    let per_mode: Vec<ModeGap> = a
        .blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| ModeGap {
            k: x.k,
            gap: x.entries.iter().zip(&y.entries).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max),
        })
        .collect();
    let max_gap = per_mode.iter().map(|g| g.gap).fold(0.0, f64::max);
    let verdict = if max_gap <= tolerance { Verdict::Indistinguishable } else { Verdict::Distinguished };
    Ok(CompareReport { degree: a.degree, metrics: [a.metric.clone(), b.metric.clone()], tolerance, per_mode, max_gap, verdict })
}

/// Compute and compare the degree-`degree` DtN maps of two operator sources.
pub fn cauchy_compare(a: &OperatorSource, b: &OperatorSource, degree: u8, cfg: &DtnConfig) -> Result<CompareReport> {
    let (ma, mb) = (a.metric()?, b.metric()?);
    if ma.domain_length() != mb.domain_length() {
        return Err(Error::GridMismatch("metrics live on different truncations".into()));
    }
    let (da, db) = match degree {
        0 => (dtn0_with(a, cfg)?, dtn0_with(b, cfg)?),
        1 => (dtn1_with(a, cfg)?, dtn1_with(b, cfg)?),
        d => return Err(Error::InvalidDegree(d as i32)),
    };
    compare_dtn(&da, &db, INDISTINGUISHABLE_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k_max: i64) -> DtnConfig {
        DtnConfig { k_max, ..Default::default() }
    }

    #[test]
    fn flat_scalar_blocks() {
        let d = dtn0(&MetricField2D::flat(12.0), &cfg(3)).unwrap();
        let b3 = d.block(3).unwrap().entries[0];
        assert!((b3.re - 3.0 / (36.0f64).tanh()).abs() < 1e-8);
        let b0 = d.block(0).unwrap().entries[0].re;
        assert!((b0 - 1.0 / 12.0).abs() < 1e-10, "{b0}");
    }

    #[test]
    fn flat_one_form_blocks() {
        let d = dtn1(&MetricField2D::flat(12.0), &cfg(4)).unwrap();
        for k in 1..=4i64 {
            let b = &d.block(k).unwrap().entries;
            let kf = k as f64;
            assert!((b[0] - Complex64::new(kf / (kf * 12.0).tanh(), 0.0)).norm() < 1e-8);
            assert!((b[2] - Complex64::new(0.0, -kf)).norm() < 1e-8, "{:?}", b[2]);
        }
        let lam = a11_from_dtn(&d).unwrap();
        let l4 = lam.iter().find(|(k, _)| *k == 4).unwrap().1;
        assert!((l4 + 4.0).abs() < 1e-8);
        let lm4 = lam.iter().find(|(k, _)| *k == -4).unwrap().1;
        assert!((l4 - lm4).abs() < 1e-12);
    }
}
