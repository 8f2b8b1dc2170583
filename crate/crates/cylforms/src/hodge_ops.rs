//! Hodge Laplacians on 0-, 1- and 2-forms.
//!
//! Operators are built in a small algebra of matrices of differential
//! polynomials `Σ c_{ab}(x) ∂1^a ∂2^b` whose coefficients are Taylor jets at a
//! point. Composition applies the Leibniz rule to the jets, so the
//! compositional Laplacian `dδ + δd` comes out with exact coefficients
//! (including their derivatives, which the symbol calculus consumes). The
//! explicit coordinate formulas are assembled independently and the two are
//! compared coefficient by coefficient and on grid forms.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forms::{self, Field, Grid, GridForm, MetricSamples};
use crate::geometry::{gaussian_curvature, ConformalFactor, MetricField2D, MetricJet};
use crate::jet::Jet2;
use crate::par;

/// Multi-indices `(a, b)` of `∂1^a ∂2^b` up to second order, in storage order.
pub const MULTI_INDICES: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Scalar differential polynomial with jet coefficients.
#[derive(Clone, Debug, Default)]
pub struct DiffPoly {
    terms: BTreeMap<(usize, usize), Jet2>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn multiply(c: Jet2) -> Self {
        Self::term(0, 0, c)
    }

    pub fn term(a: usize, b: usize, c: Jet2) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((a, b), c);
        Self { terms }
    }

    pub fn coefficient(&self, a: usize, b: usize) -> Option<&Jet2> {
        self.terms.get(&(a, b))
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    fn add_term(&mut self, key: (usize, usize), c: Jet2) {
        match self.terms.get_mut(&key) {
            Some(v) => *v = &*v + &c,
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(k, c)| (*k, c.scale(s))).collect() }
    }

    /// `self ∘ other` by the Leibniz rule.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(a, b), c) in &self.terms {
            for (&(p, q), d) in &other.terms {
                for i in 0..=a {
                    for j in 0..=b {
                        let w = binom(a, i) * binom(b, j);
                        let dd = d.deriv(i, j);
                        out.add_term((a - i + p, b - j + q), (c * &dd).scale(w));
                    }
                }
            }
        }
        out
    }
}

/// Matrix of differential polynomials.
#[derive(Clone, Debug)]
pub struct DiffOp {
    rows: usize,
    cols: usize,
    entries: Vec<DiffPoly>,
}

impl DiffOp {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![DiffPoly::zero(); rows * cols] }
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<DiffPoly>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> &DiffPoly {
        &self.entries[r * self.cols + c]
    }

    pub fn compose(&self, other: &DiffOp) -> DiffOp {
        assert_eq!(self.cols, other.rows, "operator shapes do not compose");
        let mut out = DiffOp::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = DiffPoly::zero();
                for m in 0..self.cols {
                    acc = acc.add(&self.entry(r, m).compose(other.entry(m, c)));
                }
                out.entries[r * other.cols + c] = acc;
            }
        }
        out
    }

    pub fn add(&self, other: &DiffOp) -> DiffOp {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect();
        DiffOp { rows: self.rows, cols: self.cols, entries }
    }

    pub fn scale(&self, s: f64) -> DiffOp {
        DiffOp { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|e| e.scale(s)).collect() }
    }

    /// Left multiplication by a scalar jet.
    pub fn premultiply(&self, c: &Jet2) -> DiffOp {
        DiffOp::from_entries(self.rows, self.rows, diag_entries(self.rows, c)).compose(self)
    }

    /// Coefficient `∂1^a ∂2^b` values at the expansion point.
    pub fn coefficient_values(&self, a: usize, b: usize) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.coefficient(a, b).map_or(Ok(0.0), |j| j.value()))
            .collect()
    }

    /// Coefficient jet of `∂1^a ∂2^b` in entry `(r, c)`, zero if absent.
    pub fn coefficient_jet(&self, r: usize, c: usize, a: usize, b: usize, order: i32) -> Jet2 {
        self.entry(r, c).coefficient(a, b).cloned().unwrap_or_else(|| Jet2::zero(order))
    }

    /// Highest derivative order present.
    pub fn max_order(&self) -> usize {
        self.entries.iter().map(DiffPoly::max_order).max().unwrap_or(0)
    }

    /// Values of all second-order-or-lower coefficients at the point.
    pub fn point_coefficients(&self) -> Result<PointCoefficients> {
        if self.max_order() > 2 {
            return Err(Error::Consistency("operator has order above two".into()));
        }
        let mut c = [[[0.0; 2]; 2]; 6];
        for (slot, &(a, b)) in MULTI_INDICES.iter().enumerate() {
            let v = self.coefficient_values(a, b)?;
            for r in 0..self.rows {
                for k in 0..self.cols {
                    c[slot][r][k] = v[r * self.cols + k];
                }
            }
        }
        Ok(PointCoefficients { dim: self.rows, c })
    }
}

fn diag_entries(n: usize, c: &Jet2) -> Vec<DiffPoly> {
    (0..n * n).map(|i| if i % (n + 1) == 0 { DiffPoly::multiply(c.clone()) } else { DiffPoly::zero() }).collect()
}

/// Metric-derived zeroth-order factors at a point.
struct StarJets {
    vol: Jet2,
    a_over_b: Jet2,
    b_over_a: Jet2,
    order: i32,
}

impl StarJets {
    fn new(mj: &MetricJet) -> Result<Self> {
        let a = &mj.g11;
        let b = &mj.g22;
        let order = a.order().min(b.order());
        Ok(Self {
            vol: (a * b).sqrt()?,
            a_over_b: (a * &b.recip()?).sqrt()?,
            b_over_a: (b * &a.recip()?).sqrt()?,
            order,
        })
    }
}

fn dpoly(a: usize, b: usize, s: f64, order: i32) -> DiffPoly {
    DiffPoly::term(a, b, Jet2::constant(s, order))
}

/// Building blocks of the exterior calculus at one point.
pub struct PointCalculus {
    jets: StarJets,
}

impl PointCalculus {
    pub fn new(mj: &MetricJet) -> Result<Self> {
        Ok(Self { jets: StarJets::new(mj)? })
    }

    fn order(&self) -> i32 {
        self.jets.order
    }

    /// `∗` on `degree`-forms.
    pub fn star(&self, degree: u8) -> DiffOp {
        let j = &self.jets;
        match degree {
            0 => DiffOp::from_entries(1, 1, vec![DiffPoly::multiply(j.vol.clone())]),
            1 => DiffOp::from_entries(
                2,
                2,
                vec![
                    DiffPoly::zero(),
                    DiffPoly::multiply(-&j.a_over_b),
                    DiffPoly::multiply(j.b_over_a.clone()),
                    DiffPoly::zero(),
                ],
            ),
            _ => DiffOp::from_entries(1, 1, vec![DiffPoly::multiply(j.vol.recip().expect("positive volume"))]),
        }
    }

    pub fn d(&self, degree: u8) -> DiffOp {
        let o = self.order();
        match degree {
            0 => DiffOp::from_entries(2, 1, vec![dpoly(1, 0, 1.0, o), dpoly(0, 1, 1.0, o)]),
            _ => DiffOp::from_entries(1, 2, vec![dpoly(0, 1, -1.0, o), dpoly(1, 0, 1.0, o)]),
        }
    }

    /// `δ = −∗d∗` on `degree`-forms, `degree ∈ {1, 2}`.
    pub fn delta(&self, degree: u8) -> DiffOp {
        let inner = self.star(degree);
        let d = self.d(2 - degree);
        let outer = self.star(3 - degree);
        outer.compose(&d).compose(&inner).scale(-1.0)
    }

    /// `dδ + δd` on `degree`-forms.
    pub fn laplacian(&self, degree: u8) -> DiffOp {
        match degree {
            0 => self.delta(1).compose(&self.d(0)),
            1 => self.d(0).compose(&self.delta(1)).add(&self.delta(2).compose(&self.d(1))),
            _ => self.d(1).compose(&self.delta(2)),
        }
    }
}

/// Compositional `Δ` on `degree`-forms from metric jets.
pub fn laplacian_diffop(degree: u8, mj: &MetricJet) -> Result<DiffOp> {
    if degree > 2 {
        return Err(Error::InvalidDegree(degree as i32));
    }
    Ok(PointCalculus::new(mj)?.laplacian(degree))
}

/// Explicit coordinate form `−∂2² − g¹¹∂1² + E∂2 + F∂1 + Q` for warped
/// metrics, written in terms of `γ = g¹¹`.
pub fn explicit_diffop(degree: u8, mj: &MetricJet) -> Result<DiffOp> {
    if mj.g22.value()? != 1.0 || mj.g22.partial(0, 1)? != 0.0 {
        return Err(Error::UnsupportedShape("explicit formulas need a warped metric".into()));
    }
    let (e, f, q) = explicit_efq(degree, &mj.g11)?;
    let n = if degree == 1 { 2 } else { 1 };
    let gamma = mj.g11.recip()?;
    let o = gamma.order();
    let mut entries = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let mut p = DiffPoly::term(1, 0, f[r * n + c].clone())
                .add(&DiffPoly::term(0, 1, e[r * n + c].clone()))
                .add(&DiffPoly::term(0, 0, q[r * n + c].clone()));
            if r == c {
                p = p.add(&DiffPoly::term(0, 2, Jet2::constant(-1.0, o))).add(&DiffPoly::term(2, 0, -&gamma));
            }
            entries.push(p);
        }
    }
    Ok(DiffOp::from_entries(n, n, entries))
}

/// `E, F, Q` of the explicit formulas as jets (row-major for degree 1).
pub fn explicit_efq(degree: u8, g11: &Jet2) -> Result<(Vec<Jet2>, Vec<Jet2>, Vec<Jet2>)> {
    let g = g11.recip()?;
    let g1 = g.d1();
    let g2 = g.d2();
    let ginv = g11.clone();
    let o = g.order();
    let zero = || Jet2::zero(o);
    Ok(match degree {
        0 => (vec![(&g2 * &ginv).scale(0.5)], vec![g1.scale(-0.5)], vec![zero()]),
        1 => {
            let lg = g.ln()?;
            let e11 = (&g2 * &ginv).scale(-0.5);
            let e22 = (&g2 * &ginv).scale(0.5);
            let f = vec![g1.scale(-1.5), &g2 * &ginv, -&g2, g1.scale(-0.5)];
            let q = vec![
                g.deriv(2, 0).scale(-0.5),
                lg.deriv(1, 1).scale(0.5),
                g.deriv(1, 1).scale(-0.5),
                lg.deriv(0, 2).scale(0.5),
            ];
            (vec![e11, zero(), zero(), e22], f, q)
        }
        2 => {
            let lg = g.ln()?;
            let e = (&g2 * &ginv).scale(-0.5);
            let f = g1.scale(-1.5);
            let q = &g.deriv(2, 0).scale(-0.5) - &lg.deriv(0, 2).scale(0.5);
            (vec![e], vec![f], vec![q])
        }
        d => return Err(Error::InvalidDegree(d as i32)),
    })
}

/// Right-hand side of the 1-form conformal identity
/// `τΔ_gω − i_{∇_gτ}dω + dτ∧δ_gω` for an `x2`-only factor and `g` warped.
pub fn conformal_identity1(mj: &MetricJet, tau: &Jet2) -> Result<DiffOp> {
    let pc = PointCalculus::new(mj)?;
    let lap = pc.laplacian(1).premultiply(tau);
    let tz = &tau.d2() * &mj.g22.recip()?;
    // i_{∇τ}(c dx1∧dx2) = −τ' c dx1 / g22 and dτ∧u = τ' u dx2
    let ins = DiffOp::from_entries(2, 1, vec![DiffPoly::multiply(tz.clone()), DiffPoly::zero()]).compose(&pc.d(1));
    let wedge = DiffOp::from_entries(2, 1, vec![DiffPoly::zero(), DiffPoly::multiply(tau.d2())]).compose(&pc.delta(1));
    Ok(lap.add(&ins).add(&wedge))
}

/// `Δ_g ∘ (τ ·)` on 2-forms.
pub fn conformal_identity2(mj: &MetricJet, tau: &Jet2) -> Result<DiffOp> {
    let pc = PointCalculus::new(mj)?;
    Ok(pc.laplacian(2).compose(&DiffOp::from_entries(1, 1, vec![DiffPoly::multiply(tau.clone())])))
}

/// `τ Δ_g` on 0-forms.
pub fn conformal_identity0(mj: &MetricJet, tau: &Jet2) -> Result<DiffOp> {
    Ok(PointCalculus::new(mj)?.laplacian(0).premultiply(tau))
}

/// Coefficient matrices of one operator at one point, indexed like
/// [`MULTI_INDICES`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCoefficients {
    pub dim: usize,
    pub c: [[[f64; 2]; 2]; 6],
}

impl PointCoefficients {
    pub fn get(&self, a: usize, b: usize) -> [[f64; 2]; 2] {
        let slot = MULTI_INDICES.iter().position(|&m| m == (a, b)).expect("order ≤ 2");
        self.c[slot]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for s in 0..6 {
            for r in 0..2 {
                for k in 0..2 {
                    m = m.max((self.c[s][r][k] - other.c[s][r][k]).abs());
                }
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How an assembled operator was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Compositional,
    Explicit,
    ConformalIdentity,
}

/// A second-order operator on grid forms with coefficients at every node.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    degree: u8,
    provenance: Provenance,
    grid: Arc<Grid>,
    coeffs: Vec<PointCoefficients>,
}

/// Metric jet order needed to assemble a Laplacian.
const ASSEMBLY_ORDER: usize = 3;

impl AssembledOperator {
    /// Evaluate `build` at every grid node.
    pub fn assemble(
        grid: &Arc<Grid>,
        degree: u8,
        provenance: Provenance,
        metric: &MetricField2D,
        build: impl Fn(&MetricJet, f64, f64) -> Result<DiffOp> + Sync + Send,
    ) -> Result<Self> {
        let n = grid.n_theta();
        let coeffs = par::try_map(grid.len(), |idx| {
            let t = grid.theta()[idx % n];
            let z = grid.z()[idx / n];
            let mj = metric.jet(t, z, ASSEMBLY_ORDER)?;
            build(&mj, t, z)?.point_coefficients()
        })?;
        Ok(Self { degree, provenance, grid: grid.clone(), coeffs })
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn coefficients(&self) -> &[PointCoefficients] {
        &self.coeffs
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `Σ C_ab ∂1^a ∂2^b ω` with spectral θ- and finite-difference z-derivatives.
    pub fn apply(&self, form: &GridForm) -> Result<GridForm> {
        if form.degree() != self.degree {
            return Err(Error::DegreeMismatch(format!("operator on {}-forms applied to a {}-form", self.degree, form.degree())));
        }
        if !form.grid().same_shape(&self.grid) {
            return Err(Error::GridMismatch("operator and form grids differ".into()));
        }
        let g = &self.grid;
        let dim = form.components().len();
        let derivs: Vec<[Field; 6]> = form
            .components()
            .iter()
            .map(|u| {
                let u1 = g.d_theta(u, 1);
                [u.clone(), u1.clone(), g.d_z(u), g.d_theta(u, 2), g.d_z(&u1), g.d_zz(u)]
            })
            .collect();
        let mut out = vec![vec![Complex64::default(); g.len()]; dim];
        for (idx, pc) in self.coeffs.iter().enumerate() {
            for (r, row) in out.iter_mut().enumerate() {
                let mut s = Complex64::default();
                for slot in 0..6 {
                    for (c, dc) in derivs.iter().enumerate() {
                        let w = pc.c[slot][r][c];
                        if w != 0.0 {
                            s += dc[slot][idx] * w;
                        }
                    }
                }
                row[idx] = s;
            }
        }
        GridForm::new(g.clone(), self.degree, out)
    }

    /// Largest coefficient difference from another operator, relative to the
    /// largest coefficient.
    pub fn coefficient_gap(&self, other: &AssembledOperator) -> f64 {
        let scale = self.coeffs.iter().map(PointCoefficients::max_abs).fold(0.0, f64::max).max(1e-300);
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max) / scale
    }

    /// CSV rows `(theta, z, coefficient, row, col, value)`.
    pub fn write_coefficients_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "theta,z,derivative,row,col,value")?;
        let n = self.grid.n_theta();
        let names = ["1", "d1", "d2", "d1d1", "d1d2", "d2d2"];
        for (idx, pc) in self.coeffs.iter().enumerate() {
            let t = self.grid.theta()[idx % n];
            let z = self.grid.z()[idx / n];
            for (slot, name) in names.iter().enumerate() {
                for r in 0..pc.dim {
                    for c in 0..pc.dim {
                        writeln!(w, "{t:.17e},{z:.17e},{name},{r},{c},{:.17e}", pc.c[slot][r][c])?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Compositional and explicit assemblies of a Laplacian.
#[derive(Clone, Debug)]
pub struct LaplacianPair {
    pub compositional: AssembledOperator,
    /// Absent when no explicit formula covers the metric.
    pub explicit: Option<AssembledOperator>,
    /// Relative coefficient gap between the two, when both exist.
    pub gap: Option<f64>,
}

/// Tolerance on the relative coefficient gap between the two assemblies.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-11;

fn laplacian_pair(grid: &Arc<Grid>, metric: &MetricField2D, degree: u8) -> Result<LaplacianPair> {
    let compositional =
        AssembledOperator::assemble(grid, degree, Provenance::Compositional, metric, |mj, _, _| laplacian_diffop(degree, mj))?;
    let explicit = if metric.is_warped() {
        Some(AssembledOperator::assemble(grid, degree, Provenance::Explicit, metric, |mj, _, _| explicit_diffop(degree, mj))?)
    } else {
        None
    };
    let gap = explicit.as_ref().map(|e| compositional.coefficient_gap(e));
    if let Some(g) = gap {
        if g > CROSS_CHECK_TOLERANCE {
            return Err(Error::Consistency(format!(
                "explicit and compositional degree-{degree} Laplacians differ by {g:e}"
            )));
        }
    }
    Ok(LaplacianPair { compositional, explicit, gap })
}

pub fn laplacian0(grid: &Arc<Grid>, metric: &MetricField2D) -> Result<LaplacianPair> {
    laplacian_pair(grid, metric, 0)
}

pub fn laplacian1(grid: &Arc<Grid>, metric: &MetricField2D) -> Result<LaplacianPair> {
    laplacian_pair(grid, metric, 1)
}

pub fn laplacian2(grid: &Arc<Grid>, metric: &MetricField2D) -> Result<LaplacianPair> {
    laplacian_pair(grid, metric, 2)
}

/// `Δ` on the conformally rescaled metric written through the operators of
/// the base metric: `τΔ` (degree 0), the 1-form identity, or `Δ∘(τ·)`
/// (degree 2).
pub fn conformal_identity_operator(
    grid: &Arc<Grid>,
    base: &MetricField2D,
    factor: &ConformalFactor,
    degree: u8,
) -> Result<AssembledOperator> {
    if !base.is_warped() {
        return Err(Error::UnsupportedShape("conformal identities are written for a warped base metric".into()));
    }
    AssembledOperator::assemble(grid, degree, Provenance::ConformalIdentity, base, |mj, _, z| {
        let tau = factor.tau_jet(z, ASSEMBLY_ORDER)?;
        match degree {
            0 => conformal_identity0(mj, &tau),
            1 => conformal_identity1(mj, &tau),
            2 => conformal_identity2(mj, &tau),
            d => Err(Error::InvalidDegree(d as i32)),
        }
    })
}

/// Coefficient fields `E, F, Q` of the explicit formula on a grid,
/// sampled from the compositional operator.
#[derive(Clone, Debug)]
pub struct CoeffMatrices {
    pub degree: u8,
    pub e: Vec<[[f64; 2]; 2]>,
    pub f: Vec<[[f64; 2]; 2]>,
    pub q: Vec<[[f64; 2]; 2]>,
}

impl CoeffMatrices {
    pub fn from_operator(op: &AssembledOperator) -> Self {
        let pick = |a, b| op.coeffs.iter().map(|c| c.get(a, b)).collect();
        Self { degree: op.degree, e: pick(0, 1), f: pick(1, 0), q: pick(0, 0) }
    }
}

/// Both sides of the Bochner identity for a compactly supported 1-form.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BochnerReport {
    pub grad_norm_sq: f64,
    pub d_norm_sq: f64,
    pub delta_norm_sq: f64,
    pub curvature_term: f64,
    pub residual: f64,
}

/// Christoffel symbols `Γ^k_{ij}` of `A dx1² + B(x2) dx2²` from metric jets.
pub fn christoffel(mj: &MetricJet) -> Result<[[[f64; 2]; 2]; 2]> {
    let a = mj.g11.value()?;
    let b = mj.g22.value()?;
    let a1 = mj.g11.partial(1, 0)?;
    let a2 = mj.g11.partial(0, 1)?;
    let b2 = mj.g22.partial(0, 1)?;
    let mut g = [[[0.0; 2]; 2]; 2];
    g[0][0][0] = a1 / (2.0 * a);
    g[0][0][1] = a2 / (2.0 * a);
    g[0][1][0] = a2 / (2.0 * a);
    g[1][0][0] = -a2 / (2.0 * b);
    g[1][1][1] = b2 / (2.0 * b);
    Ok(g)
}

/// `∇_i ω_j` on the grid (`out[i][j]`), using analytic Christoffel symbols.
pub fn covariant_derivative(form: &GridForm, metric: &MetricField2D) -> Result<[[Field; 2]; 2]> {
    if form.degree() != 1 {
        return Err(Error::InvalidDegree(form.degree() as i32));
    }
    let g = form.grid();
    let n = g.n_theta();
    let w = form.components();
    let partial = [[g.d_theta(&w[0], 1), g.d_theta(&w[1], 1)], [g.d_z(&w[0]), g.d_z(&w[1])]];
    let gammas = par::try_map(g.len(), |idx| christoffel(&metric.jet(g.theta()[idx % n], g.z()[idx / n], 1)?))?;
    let mut out: [[Field; 2]; 2] = Default::default();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (0..g.len())
                .map(|idx| {
                    let gam = &gammas[idx];
                    partial[i][j][idx] - w[0][idx] * gam[0][i][j] - w[1][idx] * gam[1][i][j]
                })
                .collect();
        }
    }
    Ok(out)
}

/// `|‖∇ω‖² − (‖dω‖² + ‖δω‖² − ∫K|ω|²μ)|` for `ω` supported away from both
/// boundary circles.
pub fn bochner_residual(form: &GridForm, metric: &MetricField2D) -> Result<BochnerReport> {
    let g = form.grid().clone();
    let edge_rows = 6;
    let n = g.n_theta();
    let nz = g.n_z();
    let edge = form
        .components()
        .iter()
        .flat_map(|c| c.iter().enumerate())
        .filter(|(idx, _)| idx / n < edge_rows || idx / n + edge_rows > nz)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    if edge > 1e-12 * form.max_abs().max(1e-300) {
        return Err(Error::Domain("form support touches the boundary".into()));
    }
    let ms = MetricSamples::new(&g, metric)?;
    let nabla = covariant_derivative(form, metric)?;
    let metric_diag = [&ms.g11, &ms.g22];
    let vol = ms.volume();
    let grad_density: Field = (0..g.len())
        .map(|idx| {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += nabla[i][j][idx].norm_sqr() / (metric_diag[i][idx] * metric_diag[j][idx]);
                }
            }
            Complex64::new(s * vol[idx], 0.0)
        })
        .collect();
    let grad_norm_sq = g.integrate(&grad_density).re;
    let dw = forms::exterior_d(form)?;
    let dlw = forms::codifferential_sampled(form, &ms)?;
    let d_norm_sq = forms::inner_product_sampled(&dw, &dw, &ms)?.re;
    let delta_norm_sq = forms::inner_product_sampled(&dlw, &dlw, &ms)?.re;
    let curv = par::try_map(g.len(), |idx| gaussian_curvature(metric, g.theta()[idx % n], g.z()[idx / n]))?;
    let w = form.components();
    let k_density: Field = (0..g.len())
        .map(|idx| {
            let s = w[0][idx].norm_sqr() / ms.g11[idx] + w[1][idx].norm_sqr() / ms.g22[idx];
            Complex64::new(curv[idx] * s * vol[idx], 0.0)
        })
        .collect();
    let curvature_term = g.integrate(&k_density).re;
    let residual = (grad_norm_sq - (d_norm_sq + delta_norm_sq - curvature_term)).abs();
    Ok(BochnerReport { grad_norm_sq, d_norm_sq, delta_norm_sq, curvature_term, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyp_jet(z: f64) -> MetricJet {
        MetricField2D::hyperbolic(12.0).jet(0.0, z, 3).unwrap()
    }

    #[test]
    fn hyperbolic_zero_form_coefficients() {
        for z in [0.0, 0.8, 2.5] {
            let pc = laplacian_diffop(0, &hyp_jet(z)).unwrap().point_coefficients().unwrap();
            let e2z = (2.0 * z).exp();
            assert!((pc.get(2, 0)[0][0] + e2z).abs() < 1e-12 * e2z);
            assert!((pc.get(0, 2)[0][0] + 1.0).abs() < 1e-14);
            assert!((pc.get(0, 1)[0][0] - 1.0).abs() < 1e-13);
            assert_eq!(pc.get(1, 0)[0][0], 0.0);
            assert_eq!(pc.get(0, 0)[0][0], 0.0);
        }
    }

    #[test]
    fn hyperbolic_one_form_display() {
        for z in [0.0, 0.5, 1.7] {
            let pc = laplacian_diffop(1, &hyp_jet(z)).unwrap().point_coefficients().unwrap();
            let e2z = (2.0 * z).exp();
            let tol = 1e-12 * e2z;
            // diagonal: −∂z² − e^{2z}∂θ² ∓ ∂z ; off-diagonal 2∂θ and −2e^{2z}∂θ
            assert!((pc.get(0, 1)[0][0] + 1.0).abs() < tol);
            assert!((pc.get(0, 1)[1][1] - 1.0).abs() < tol);
            assert!((pc.get(1, 0)[0][1] - 2.0).abs() < tol);
            assert!((pc.get(1, 0)[1][0] + 2.0 * e2z).abs() < tol);
            assert!((pc.get(2, 0)[0][0] + e2z).abs() < tol);
            assert!((pc.get(0, 2)[1][1] + 1.0).abs() < tol);
            assert!(pc.get(0, 0)[0][0].abs() < tol && pc.get(0, 0)[1][1].abs() < tol);
        }
    }

    #[test]
    fn hyperbolic_two_form_coefficients() {
        let pc = laplacian_diffop(2, &hyp_jet(0.4)).unwrap().point_coefficients().unwrap();
        assert!((pc.get(0, 1)[0][0] + 1.0).abs() < 1e-13);
        assert!(pc.get(1, 0)[0][0].abs() < 1e-13);
        assert!(pc.get(0, 0)[0][0].abs() < 1e-13);
    }

    #[test]
    fn explicit_matches_compositional_on_angular_metric() {
        let m = MetricField2D::series(
            &[
                crate::geometry::SeriesTerm { power: 0, mode: 0, re: 1.0, im: 0.0 },
                crate::geometry::SeriesTerm { power: 1, mode: 1, re: 0.1, im: -0.05 },
                crate::geometry::SeriesTerm { power: 2, mode: 0, re: 0.3, im: 0.0 },
            ],
            4.0,
        )
        .unwrap();
        for degree in 0..=2u8 {
            for (t, z) in [(0.3, 0.2), (2.0, 1.1)] {
                let mj = m.jet(t, z, 3).unwrap();
                let a = laplacian_diffop(degree, &mj).unwrap().point_coefficients().unwrap();
                let b = explicit_diffop(degree, &mj).unwrap().point_coefficients().unwrap();
                assert!(a.max_abs_diff(&b) < 1e-13, "degree {degree}: {:?} vs {:?}", a, b);
            }
        }
    }

    #[test]
    fn scalar_principal_symbol() {
        let mj = MetricField2D::conformal_paper(12.0).jet(0.0, 0.9, 3).unwrap();
        let pc = laplacian_diffop(1, &mj).unwrap().point_coefficients().unwrap();
        let a = mj.g11.value().unwrap();
        let b = mj.g22.value().unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { -1.0 } else { 0.0 };
                assert!((pc.get(2, 0)[r][c] - want / a).abs() < 1e-14);
                assert!((pc.get(0, 2)[r][c] - want / b).abs() < 1e-14);
                assert_eq!(pc.get(1, 1)[r][c], 0.0);
            }
        }
    }

    #[test]
    fn conformal_identities_hold_pointwise() {
        let g1 = MetricField2D::hyperbolic(12.0);
        let f = ConformalFactor::paper();
        let g2 = crate::geometry::conformal_rescale(&g1, &f).unwrap();
        for z in [0.0, 0.3, 2.0, 6.0] {
            let mj1 = g1.jet(0.0, z, 3).unwrap();
            let mj2 = g2.jet(0.0, z, 3).unwrap();
            let tau = f.tau_jet(z, 3).unwrap();
            let pairs = [
                (laplacian_diffop(0, &mj2).unwrap(), conformal_identity0(&mj1, &tau).unwrap()),
                (laplacian_diffop(1, &mj2).unwrap(), conformal_identity1(&mj1, &tau).unwrap()),
                (laplacian_diffop(2, &mj2).unwrap(), conformal_identity2(&mj1, &tau).unwrap()),
            ];
            for (a, b) in pairs {
                let (a, b) = (a.point_coefficients().unwrap(), b.point_coefficients().unwrap());
                assert!(a.max_abs_diff(&b) < 1e-12 * a.max_abs().max(1.0), "z = {z}");
            }
        }
    }
}
