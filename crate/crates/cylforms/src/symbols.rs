//! Homogeneous matrix symbols of the boundary factorization
//! `Δ⁽¹⁾ = (D₂ + iE − iA)(D₂ + iA)` in boundary normal coordinates, the
//! layer-stripping inverse that recovers normal jets of the metric from the
//! `(1,1)` entries, and a large-`|k|` fit that reads symbol values off DtN data.
//!
//! A symbol of order `j` is stored as `e(x)|ξ|ʲ + o(x) ξ|ξ|ʲ⁻¹`; each matrix
//! entry of `e` and `o` is a Taylor jet at the boundary point, so tangential
//! and normal derivatives are exact and depth exhaustion is detected.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryJet, MetricField2D, MetricJet};
use crate::hodge_ops::laplacian_diffop;
use crate::jet::{factorial, Jet2};
use crate::par;

pub type CJet = Jet2<Complex64>;
type JetMat = [[CJet; 2]; 2];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn zero_mat(order: i32) -> JetMat {
    std::array::from_fn(|_| std::array::from_fn(|_| CJet::zero(order)))
}

fn mat_mul(a: &JetMat, b: &JetMat) -> JetMat {
    std::array::from_fn(|r| std::array::from_fn(|c| &(&a[r][0] * &b[0][c]) + &(&a[r][1] * &b[1][c])))
}

fn mat_add(a: &JetMat, b: &JetMat) -> JetMat {
    std::array::from_fn(|r| std::array::from_fn(|c| &a[r][c] + &b[r][c]))
}

fn mat_map(a: &JetMat, f: impl Fn(&CJet) -> CJet) -> JetMat {
    std::array::from_fn(|r| std::array::from_fn(|c| f(&a[r][c])))
}

fn mat_order(a: &JetMat) -> i32 {
    a.iter().flatten().map(CJet::order).min().unwrap_or(-1)
}

/// Matrix symbol homogeneous of degree `order` in `ξ`.
#[derive(Clone, Debug)]
pub struct HomSymbol {
    pub order: i32,
    /// Coefficient of `|ξ|^order`.
    pub even: JetMat,
    /// Coefficient of `ξ|ξ|^{order−1}`.
    pub odd: JetMat,
}

impl HomSymbol {
    pub fn zero(order: i32, jet_order: i32) -> Self {
        Self { order, even: zero_mat(jet_order), odd: zero_mat(jet_order) }
    }

    /// Remaining depth of the coefficient jets.
    pub fn x2_jet_order(&self) -> i32 {
        mat_order(&self.even).min(mat_order(&self.odd))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::Consistency(format!("adding symbols of orders {} and {}", self.order, other.order)));
        }
        Ok(Self { order: self.order, even: mat_add(&self.even, &other.even), odd: mat_add(&self.odd, &other.odd) })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { order: self.order, even: mat_map(&self.even, |j| j.scale(s)), odd: mat_map(&self.odd, |j| j.scale(s)) }
    }

    /// Pointwise product; orders add.
    pub fn mul(&self, other: &Self) -> Self {
        Self {
            order: self.order + other.order,
            even: mat_add(&mat_mul(&self.even, &other.even), &mat_mul(&self.odd, &other.odd)),
            odd: mat_add(&mat_mul(&self.even, &other.odd), &mat_mul(&self.odd, &other.even)),
        }
    }

    /// Left multiplication by an `x`-dependent matrix.
    pub fn left_mul(&self, m: &JetMat) -> Self {
        Self { order: self.order, even: mat_mul(m, &self.even), odd: mat_mul(m, &self.odd) }
    }

    /// `∂_ξ`, lowering the order by one.
    pub fn d_xi(&self) -> Self {
        let j = Complex64::new(self.order as f64, 0.0);
        Self { order: self.order - 1, even: mat_map(&self.odd, |c| c.scale(j)), odd: mat_map(&self.even, |c| c.scale(j)) }
    }

    /// `D_{x1} = −i∂_{x1}` applied `a` times.
    pub fn d_x1_pow(&self, a: usize) -> Self {
        let f = (-I).powu(a as u32);
        Self { order: self.order, even: mat_map(&self.even, |c| c.deriv(a, 0).scale(f)), odd: mat_map(&self.odd, |c| c.deriv(a, 0).scale(f)) }
    }

    /// `∂_{x2}`.
    pub fn d_x2(&self) -> Self {
        Self { order: self.order, even: mat_map(&self.even, CJet::d2), odd: mat_map(&self.odd, CJet::d2) }
    }

    /// Value at the expansion point for a given `ξ ≠ 0`.
    pub fn eval(&self, xi: f64) -> Result<[[Complex64; 2]; 2]> {
        let m = xi.abs().powi(self.order);
        let s = xi.signum();
        let mut out = [[Complex64::default(); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = (self.even[r][c].value()? + self.odd[r][c].value()? * s) * m;
            }
        }
        Ok(out)
    }
}

/// Symbols `a₁, a₀, …, a_{−m_max}` at one boundary point.
#[derive(Clone, Debug)]
pub struct SymbolStack {
    pub symbols: Vec<HomSymbol>,
    pub provenance: String,
    /// Coefficients `E, F, Q` and `g¹¹` of the Laplacian, as jets.
    pub e: JetMat,
    pub f: JetMat,
    pub q: JetMat,
    pub inverse_metric: CJet,
}

impl SymbolStack {
    pub fn m_max(&self) -> usize {
        self.symbols.len() - 2
    }

    /// The symbol of order `j`.
    pub fn get(&self, j: i32) -> Option<&HomSymbol> {
        if j > 1 {
            return None;
        }
        self.symbols.get((1 - j) as usize)
    }
}

/// Real jet of `g11` in boundary normal coordinates at a boundary point,
/// with `g22 ≡ 1`.
fn bnc_metric_jet(g11: &Jet2) -> MetricJet {
    MetricJet { g11: g11.clone(), g22: Jet2::constant(1.0, g11.order()) }
}

/// Run the recursion from the `g11` jet in boundary normal coordinates.
pub fn forward_from_jet(g11: &Jet2, m_max: usize, provenance: &str) -> Result<SymbolStack> {
    let order = g11.order();
    let lap = laplacian_diffop(1, &bnc_metric_jet(g11))?;
    let lo = lap.max_order();
    if lo > 2 {
        return Err(Error::Consistency("Laplacian has order above two".into()));
    }
    let jo = order - 2;
    let e: JetMat = std::array::from_fn(|r| std::array::from_fn(|c| lap.coefficient_jet(r, c, 0, 1, jo).to_complex()));
    let f: JetMat = std::array::from_fn(|r| std::array::from_fn(|c| lap.coefficient_jet(r, c, 1, 0, jo).to_complex()));
    let q: JetMat = std::array::from_fn(|r| std::array::from_fn(|c| lap.coefficient_jet(r, c, 0, 0, jo).to_complex()));
    let gamma = g11.recip()?;
    let sqrt_gamma = gamma.sqrt()?;
    let neg_sqrt = (-&sqrt_gamma).to_complex();
    let inv_two_a1 = sqrt_gamma.recip()?.scale(-0.5).to_complex();

    let mut a1 = HomSymbol::zero(1, order);
    a1.even[0][0] = neg_sqrt.clone();
    a1.even[1][1] = neg_sqrt;
    let mut symbols = vec![a1];

    for step in 0..=m_max {
        let m = -(step as i32);
        let d = m + 1;
        let prev = &symbols[step];
        let mut rhs = prev.left_mul(&e).add(&prev.d_x2().scale(Complex64::new(-1.0, 0.0)))?;
        if d == 1 {
            let mut src = HomSymbol::zero(1, jo);
            src.odd = mat_map(&f, |c| c.scale(I));
            rhs = rhs.add(&src)?;
        } else if d == 0 {
            let mut src = HomSymbol::zero(0, jo);
            src.even = q.clone();
            rhs = rhs.add(&src)?;
        }
        // Σ (1/α!) ∂ξ^α a_j D^α a_k over j + k − α = d, excluding the unknown
        for (ji, aj) in symbols.iter().enumerate() {
            let j = 1 - ji as i32;
            for (ki, ak) in symbols.iter().enumerate() {
                let k = 1 - ki as i32;
                let alpha = j + k - d;
                if alpha < 0 || (alpha == 0 && (j == 1 && k == m || k == 1 && j == m)) {
                    continue;
                }
                let alpha = alpha as usize;
                let mut dj = aj.clone();
                for _ in 0..alpha {
                    dj = dj.d_xi();
                }
                let term = dj.mul(&ak.d_x1_pow(alpha)).scale(Complex64::new(-1.0 / factorial(alpha), 0.0));
                rhs = rhs.add(&term)?;
            }
        }
        // divide by 2a₁ = −2√γ|ξ|
        let next = HomSymbol {
            order: m,
            even: mat_map(&rhs.even, |c| c * &inv_two_a1),
            odd: mat_map(&rhs.odd, |c| c * &inv_two_a1),
        };
        symbols.push(next);
    }
    Ok(SymbolStack { symbols, provenance: provenance.to_string(), e, f, q, inverse_metric: gamma.to_complex() })
}

/// Jet depth of the metric needed for `m_max`.
pub fn required_jet_order(m_max: usize) -> usize {
    m_max + 2
}

/// Symbols at the boundary point `(x1, 0)` of a metric.
pub fn forward_symbols(metric: &MetricField2D, x1: f64, m_max: usize) -> Result<SymbolStack> {
    let g11 = metric.boundary_normal_jet(x1, required_jet_order(m_max))?;
    forward_from_jet(&g11, m_max, &format!("{} at x1 = {x1}", metric.name()))
}

/// Principal symbol check `a₁² = g¹¹ξ² I`, returned as the max deviation.
pub fn principal_square_residual(stack: &SymbolStack) -> Result<f64> {
    let a1 = &stack.symbols[0];
    let sq = a1.mul(a1);
    let g = stack.inverse_metric.value()?;
    let v = sq.eval(1.0)?;
    let mut dev: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let want = if r == c { g } else { Complex64::default() };
            dev = dev.max((v[r][c] - want).norm());
        }
    }
    Ok(dev)
}

/// Per-degree maximum of `σ[(D₂ + iE − iA)(D₂ + iA)] − σ[Δ⁽¹⁾]` at the point,
/// at `ξ = ±1`, for degrees `2` down to `1 − m_max`.
pub fn factorization_residual(stack: &SymbolStack) -> Result<Vec<(i32, f64)>> {
    let syms = &stack.symbols;
    let low = 1 - stack.m_max() as i32;
    let mut out = Vec::new();
    let g = stack.inverse_metric.value()?;
    for d in (low..=2).rev() {
        let mut total: Option<HomSymbol> = None;
        let mut acc = |s: HomSymbol| -> Result<()> {
            total = Some(match total.take() {
                None => s,
                Some(t) => t.add(&s)?,
            });
            Ok(())
        };
        for (ji, aj) in syms.iter().enumerate() {
            let j = 1 - ji as i32;
            for (ki, ak) in syms.iter().enumerate() {
                let k = 1 - ki as i32;
                let alpha = j + k - d;
                if alpha < 0 {
                    continue;
                }
                let alpha = alpha as usize;
                let mut dj = aj.clone();
                for _ in 0..alpha {
                    dj = dj.d_xi();
                }
                acc(dj.mul(&ak.d_x1_pow(alpha)).scale(Complex64::new(1.0 / factorial(alpha), 0.0)))?;
            }
        }
        if let Some(a) = stack.get(d) {
            acc(a.d_x2())?;
            acc(a.left_mul(&stack.e).scale(Complex64::new(-1.0, 0.0)))?;
        }
        let mut dev: f64 = 0.0;
        if let Some(t) = total {
            for xi in [1.0, -1.0] {
                let v = t.eval(xi)?;
                let fv = stack.f.clone();
                let qv = stack.q.clone();
                for r in 0..2 {
                    for c in 0..2 {
                        let mut want = Complex64::default();
                        if d == 2 && r == c {
                            want = g.into();
                        } else if d == 1 {
                            want = I * fv[r][c].value()? * xi;
                        } else if d == 0 {
                            want = qv[r][c].value()?;
                        }
                        dev = dev.max((v[r][c] - want).norm());
                    }
                }
            }
        }
        out.push((d, dev));
    }
    Ok(out)
}

/// `(1,1)` entries of measured symbols on the boundary circle.
#[derive(Clone, Debug, Serialize)]
pub struct MeasuredSymbols {
    pub n_theta: usize,
    /// Orders `1, 0, …, −m_max`.
    pub orders: Vec<i32>,
    /// Sample frequencies `ξ`, shared by all entries.
    pub xi: Vec<f64>,
    /// `values[order_index][sample][xi_index]`.
    pub values: Vec<Vec<Vec<Complex64>>>,
}

/// Frequencies at which measured symbols are sampled.
pub const MEASURED_XI: [f64; 3] = [1.0, -1.0, 2.0];

/// Sample `a_{j,11}` of a metric at `n_theta` boundary points.
pub fn measure_symbols(metric: &MetricField2D, m_max: usize, n_theta: usize) -> Result<MeasuredSymbols> {
    let stacks = par::try_map(n_theta, |i| forward_symbols(metric, 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64, m_max))?;
    let orders: Vec<i32> = (0..=m_max as i32 + 1).map(|l| 1 - l).collect();
    let mut values = vec![vec![Vec::new(); n_theta]; orders.len()];
    for (i, st) in stacks.iter().enumerate() {
        for (oi, sym) in st.symbols.iter().enumerate() {
            values[oi][i] = MEASURED_XI.iter().map(|&x| sym.eval(x).map(|m| m[0][0])).collect::<Result<_>>()?;
        }
    }
    Ok(MeasuredSymbols { n_theta, orders, xi: MEASURED_XI.to_vec(), values })
}

/// Recovered normal jets on the boundary circle.
#[derive(Clone, Debug, Serialize)]
pub struct JetEstimate {
    /// `∂ˡ_s g¹¹(x1, 0)`.
    pub inverse_metric: BoundaryJet,
    /// `∂ˡ_s g₁₁(x1, 0)`.
    pub metric: BoundaryJet,
    /// Per level: max mismatch between the measured entry and the forward
    /// prediction from the recovered jets.
    pub residuals: Vec<f64>,
    /// Per level: the coefficient multiplying the new jet, measured by
    /// probing the forward recursion.
    pub probe_coefficients: Vec<f64>,
}

fn spectral_partial(levels: &BoundaryJet, l: usize, a: usize, x1: f64) -> f64 {
    let c = &levels.levels[l];
    let n = c.len();
    let mut s = Complex64::default();
    for (m, cm) in c.iter().enumerate() {
        let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        s += cm * (I * freq).powu(a as u32) * Complex64::from_polar(1.0, freq * x1);
    }
    s.re
}

/// Bivariate jet at `(x1, 0)` from known levels, with zero above `known`.
fn jet_from_levels(levels: &BoundaryJet, known: usize, x1: f64, order: usize) -> Jet2 {
    let mut j = Jet2::zero(order as i32);
    for b in 0..known.min(order + 1) {
        for a in 0..=order - b {
            let v = spectral_partial(levels, b, a, x1);
            j.set_coeff(a, b, v / (factorial(a) * factorial(b)));
        }
    }
    j
}

/// Tolerance of the homogeneity check on measured data.
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-9;

fn even_part(ms: &MeasuredSymbols, oi: usize, i: usize) -> Result<f64> {
    let v = &ms.values[oi][i];
    let pos = ms.xi.iter().position(|&x| x == 1.0);
    let neg = ms.xi.iter().position(|&x| x == -1.0);
    let (Some(p), Some(n)) = (pos, neg) else {
        return Err(Error::InvalidInput("measured symbols need ξ = ±1".into()));
    };
    let j = ms.orders[oi];
    for (xi, val) in ms.xi.iter().zip(v) {
        let s = if *xi > 0.0 { v[p] } else { v[n] };
        let want = s * xi.abs().powi(j);
        if (val - want).norm() > HOMOGENEITY_TOLERANCE * want.norm().max(1.0) {
            return Err(Error::InvalidInput(format!("measured a_{j},11 is not homogeneous of degree {j}")));
        }
    }
    let e = 0.5 * (v[p] + v[n]);
    if e.im.abs() > HOMOGENEITY_TOLERANCE * e.norm().max(1.0) {
        return Err(Error::InvalidInput(format!("measured a_{j},11 has a complex even part")));
    }
    Ok(e.re)
}

/// Layer stripping with the boundary metric already known.
pub fn recover_jets_with_boundary(ms: &MeasuredSymbols, g11_boundary: &[f64], m_max: usize) -> Result<JetEstimate> {
    let n = ms.n_theta;
    if g11_boundary.len() != n {
        return Err(Error::InvalidInput("boundary metric has the wrong sample count".into()));
    }
    if ms.orders.len() < m_max + 2 {
        return Err(Error::InsufficientJetDepth { needed: m_max as i32 + 2, available: ms.orders.len() as i32 });
    }
    if g11_boundary.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Domain("boundary metric must be positive".into()));
    }
    let xs: Vec<f64> = (0..n).map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64).collect();
    let order = required_jet_order(m_max);
    let mut gamma_levels = vec![g11_boundary.iter().map(|g| 1.0 / g).collect::<Vec<f64>>()];
    let mut probe_coefficients = vec![f64::NAN];
    for l in 1..=m_max + 1 {
        let known = BoundaryJet::from_samples(&gamma_levels);
        let out = par::try_map(n, |i| -> Result<(f64, f64)> {
            let base = jet_from_levels(&known, l, xs[i], order);
            let run = |jet: &Jet2| -> Result<f64> {
                let st = forward_from_jet(&jet.recip()?, l - 1, "partial")?;
                Ok(st.symbols[l].eval(1.0)?[0][0].re)
            };
            let t = run(&base)?;
            let mut probe = base.clone();
            probe.set_coeff(0, l, probe.coeff(0, l).unwrap_or(0.0) + 1.0 / factorial(l));
            let kappa = run(&probe)? - t;
            let g = gamma_levels[0][i];
            let analytic = -1.0 / (2.0 * g) / (2.0 * g.sqrt()).powi(l as i32 - 1);
            if (kappa - analytic).abs() > 1e-10 * analytic.abs() {
                return Err(Error::Consistency(format!("level {l}: probed coefficient {kappa} vs {analytic}")));
            }
            let measured = even_part(ms, l, i)?;
            if analytic == 0.0 {
                return Err(Error::Domain("vanishing inverse metric".into()));
            }
            Ok(((measured - t) / analytic, kappa))
        })?;
        probe_coefficients.push(out.iter().map(|o| o.1).fold(f64::NAN, |a, b| if a.is_nan() { b } else { a }));
        gamma_levels.push(out.into_iter().map(|o| o.0).collect());
    }
    let inverse_metric = BoundaryJet::from_samples(&gamma_levels);
    // residuals: forward prediction from the full recovered jets
    let top = m_max + 1;
    let preds = par::try_map(n, |i| -> Result<Vec<f64>> {
        let jet = jet_from_levels(&inverse_metric, top + 1, xs[i], order);
        let st = forward_from_jet(&jet.recip()?, m_max, "recovered")?;
        (0..=top).map(|l| Ok(st.symbols[l].eval(1.0)?[0][0].re)).collect()
    })?;
    let mut residuals = vec![0.0; top + 1];
    for (l, r) in residuals.iter_mut().enumerate() {
        for (i, p) in preds.iter().enumerate() {
            *r = f64::max(*r, (p[l] - even_part(ms, l, i)?).abs());
        }
    }
    let metric_levels = par::try_map(n, |i| -> Result<Vec<f64>> {
        let jet = jet_from_levels(&inverse_metric, top + 1, xs[i], top).recip()?;
        (0..=top).map(|l| jet.partial(0, l)).collect()
    })?;
    let metric_values: Vec<Vec<f64>> = (0..=top).map(|l| metric_levels.iter().map(|v| v[l]).collect()).collect();
    Ok(JetEstimate { inverse_metric, metric: BoundaryJet::from_samples(&metric_values), residuals, probe_coefficients })
}

/// Layer stripping: boundary metric from the principal symbol, then one
/// normal derivative per lower order.
pub fn recover_jets(ms: &MeasuredSymbols, m_max: usize) -> Result<JetEstimate> {
    let g11: Vec<f64> = (0..ms.n_theta)
        .map(|i| {
            let a1 = even_part(ms, 0, i)?;
            if a1 >= 0.0 {
                return Err(Error::Domain("principal symbol must be negative".into()));
            }
            Ok(1.0 / (a1 * a1))
        })
        .collect::<Result<_>>()?;
    recover_jets_with_boundary(ms, &g11, m_max)
}

/// Weighted least-squares fit `λ(k) ≈ Σ c_p |k|^{1−p}`.
#[derive(Clone, Debug, Serialize)]
pub struct SymbolFit {
    /// `c₁, c₀, c₋₁, …`.
    pub coefficients: Vec<f64>,
    /// Standard errors from the weighted residual.
    pub std_errors: Vec<f64>,
    pub weighted_rms: f64,
    pub samples: usize,
    pub k_range: (i64, i64),
}

/// Fit over `k_min ≤ k ≤ k_max` with weights `k²`; only `k > 0` samples are
/// used since `λ(−k) = λ(k)` for rotationally symmetric metrics.
pub fn fit_symbol_from_dtn(lambda: &[(i64, f64)], k_min: i64, k_max: i64, n_terms: usize) -> Result<SymbolFit> {
    if k_min < 1 {
        return Err(Error::InvalidInput("k = 0 must be excluded from the fit".into()));
    }
    let pts: Vec<(f64, f64)> =
        lambda.iter().filter(|(k, _)| *k >= k_min && *k <= k_max).map(|(k, l)| (*k as f64, *l)).collect();
    if pts.len() < n_terms || n_terms == 0 {
        return Err(Error::InvalidInput(format!("{} samples for {n_terms} coefficients", pts.len())));
    }
    // normal equations in scaled columns
    let mut ata = vec![vec![0.0; n_terms]; n_terms];
    let mut atb = vec![0.0; n_terms];
    for &(k, l) in &pts {
        let w = k * k;
        let row: Vec<f64> = (0..n_terms).map(|p| k.powi(1 - p as i32)).collect();
        for a in 0..n_terms {
            atb[a] += w * row[a] * l;
            for b in 0..n_terms {
                ata[a][b] += w * row[a] * row[b];
            }
        }
    }
    let inv = invert(&ata)?;
    let c: Vec<f64> = (0..n_terms).map(|a| (0..n_terms).map(|b| inv[a][b] * atb[b]).sum()).collect();
    let mut ss = 0.0;
    for &(k, l) in &pts {
        let fit: f64 = (0..n_terms).map(|p| c[p] * k.powi(1 - p as i32)).sum();
        ss += k * k * (l - fit).powi(2);
    }
    let dof = (pts.len() - n_terms).max(1) as f64;
    let sigma2 = ss / dof;
    Ok(SymbolFit {
        std_errors: (0..n_terms).map(|a| (sigma2 * inv[a][a]).sqrt()).collect(),
        coefficients: c,
        weighted_rms: (ss / pts.len() as f64).sqrt(),
        samples: pts.len(),
        k_range: (k_min, k_max),
    })
}

fn invert(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().enumerate().map(|(i, r)| {
        let mut row = r.clone();
        row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
        row
    }).collect();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).expect("nonempty");
        if m[p][col].abs() < 1e-300 {
            return Err(Error::SingularSystem("fit normal equations are singular".into()));
        }
        m.swap(col, p);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// One row of a symbol dump.
#[derive(Clone, Debug, Serialize)]
pub struct SymbolSample {
    pub order: i32,
    pub row: usize,
    pub col: usize,
    pub xi: f64,
    pub re: f64,
    pub im: f64,
}

/// Values of every entry of every order at `ξ = ±1`.
pub fn dump_symbols(stack: &SymbolStack) -> Result<Vec<SymbolSample>> {
    let mut out = Vec::new();
    for s in &stack.symbols {
        for xi in [1.0, -1.0] {
            let v = s.eval(xi)?;
            for r in 0..2 {
                for c in 0..2 {
                    out.push(SymbolSample { order: s.order, row: r, col: c, xi, re: v[r][c].re, im: v[r][c].im });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SeriesTerm;

    #[test]
    fn flat_symbols_vanish_below_principal() {
        let st = forward_symbols(&MetricField2D::flat(12.0), 0.0, 4).unwrap();
        for s in &st.symbols[1..] {
            for xi in [1.0, -1.0] {
                let v = s.eval(xi).unwrap();
                assert!(v.iter().flatten().all(|c| c.norm() == 0.0), "order {}", s.order);
            }
        }
        let a1 = st.symbols[0].eval(1.0).unwrap();
        assert_eq!(a1[0][0], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn hyperbolic_order_zero_entry() {
        let st = forward_symbols(&MetricField2D::hyperbolic(12.0), 0.0, 2).unwrap();
        for xi in [1.0, -1.0, 3.0] {
            let v = st.get(0).unwrap().eval(xi).unwrap();
            assert!((v[0][0] + 1.0).norm() < 1e-13, "{:?}", v[0][0]);
        }
        assert!(principal_square_residual(&st).unwrap() < 1e-14);
    }

    #[test]
    fn homogeneity_by_construction() {
        let st = forward_symbols(&MetricField2D::conformal_paper(12.0), 0.0, 3).unwrap();
        for s in &st.symbols {
            let a = s.eval(1.7).unwrap();
            let b = s.eval(1.7 * 2.5).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert!((b[r][c] - a[r][c] * 2.5f64.powi(s.order)).norm() < 1e-12 * (1.0 + a[r][c].norm()));
                }
            }
        }
    }

    #[test]
    fn depth_exhaustion_is_detected() {
        let g11 = MetricField2D::hyperbolic(12.0).boundary_normal_jet(0.0, 3).unwrap();
        let st = forward_from_jet(&g11, 4, "short").unwrap();
        assert!(matches!(st.get(-4).unwrap().eval(1.0), Err(Error::InsufficientJetDepth { .. })));
    }

    #[test]
    fn fit_rejects_zero_mode_and_short_data() {
        let data: Vec<(i64, f64)> = (1..=3).map(|k| (k, -(k as f64))).collect();
        assert!(fit_symbol_from_dtn(&data, 0, 3, 2).is_err());
        assert!(fit_symbol_from_dtn(&data, 2, 3, 3).is_err());
    }

    #[test]
    fn factorization_residual_vanishes_to_depth() {
        let st = forward_symbols(&MetricField2D::conformal_paper(12.0), 0.3, 3).unwrap();
        for (d, r) in factorization_residual(&st).unwrap() {
            if d >= -2 {
                assert!(r < 1e-12, "degree {d}: {r}");
            }
        }
    }

    #[test]
    fn hyperbolic_recovery_gives_powers_of_two() {
        let ms = measure_symbols(&MetricField2D::hyperbolic(12.0), 3, 4).unwrap();
        let est = recover_jets(&ms, 3).unwrap();
        for l in 0..=4 {
            for v in est.inverse_metric.samples(l) {
                assert!((v - 2f64.powi(l as i32)).abs() < 1e-10, "level {l}: {v}");
            }
            for v in est.metric.samples(l) {
                assert!((v - (-2f64).powi(l as i32)).abs() < 1e-10, "level {l}: {v}");
            }
        }
    }

    #[test]
    fn angular_series_round_trip() {
        let terms = [
            SeriesTerm { power: 0, mode: 0, re: 1.0, im: 0.0 },
            SeriesTerm { power: 0, mode: 1, re: 0.1, im: 0.05 },
            SeriesTerm { power: 1, mode: 0, re: -0.7, im: 0.0 },
            SeriesTerm { power: 1, mode: 2, re: 0.05, im: -0.1 },
            SeriesTerm { power: 2, mode: 1, re: 0.2, im: 0.0 },
            SeriesTerm { power: 3, mode: 0, re: 0.3, im: 0.0 },
        ];
        let metric = MetricField2D::series(&terms, 1.0).unwrap();
        let ms = measure_symbols(&metric, 2, 32).unwrap();
        let est = recover_jets(&ms, 2).unwrap();
        let want = crate::geometry::boundary_jet(&metric, 3, 32).unwrap();
        for l in 0..=3 {
            for (a, b) in est.metric.samples(l).iter().zip(want.samples(l)) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "level {l}: {a} vs {b}");
            }
        }
        assert!(est.residuals.iter().all(|r| *r < 1e-10), "{:?}", est.residuals);
    }
}
