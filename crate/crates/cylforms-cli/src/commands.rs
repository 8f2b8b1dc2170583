//! One function per subcommand. Each returns the numeric payload and the
//! verdicts; output files go through [`Output`].

use std::f64::consts::PI;
use std::sync::Arc;

use cylforms::dtn::{self, DtnConfig, OperatorSource, Verdict};
use cylforms::forms::{self, Grid, GridForm};
use cylforms::geometry::{boundary_jet, conformal_paper_curvature, gaussian_curvature, liouville_residual};
use cylforms::greens::{self, GreenConfig};
use cylforms::hodge_ops;
use cylforms::modes::{discrete_spectrum, mode_operator_l, mode_operator_p, p0_eigenvalue, spectral_probe};
use cylforms::symbols::{fit_symbol_from_dtn, forward_symbols, measure_symbols, recover_jets};
use cylforms::{ConformalFactor, MetricField2D};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Expectation, Family, RunConfig};
use crate::report::{Check, Output, Relation};
use crate::CliError;

pub type Outcome = Result<(Value, Vec<Check>), CliError>;

const CURVATURE_EXACT: f64 = 1e-12;
const CURVATURE_CLOSED_FORM: f64 = 1e-10;
const FLAT_BLOCKS: f64 = 1e-8;

/// Band-limited form `Σ c e^{imθ} cos(pπz/Z + 0.3p)` with `|m| ≤ 4`, `p < 4`.
fn random_form(grid: &Arc<Grid>, degree: u8, rng: &mut ChaCha8Rng) -> Result<GridForm, CliError> {
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
    Ok(GridForm::new(grid.clone(), degree, comps)?)
}

pub fn curvature(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let z_max = cfg.grid.z_max;
    let metric = cfg.metric.build(z_max)?;
    let thetas: Vec<f64> = if metric.is_rotationally_symmetric() {
        vec![0.0]
    } else {
        (0..cfg.grid.n_theta).map(|i| 2.0 * PI * i as f64 / cfg.grid.n_theta as f64).collect()
    };
    let n = cfg.grid.n_z;
    let mut rows = Vec::with_capacity((n + 1) * thetas.len());
    for i in 0..=n {
        let z = z_max * i as f64 / n as f64;
        for &t in &thetas {
            rows.push((t, z, gaussian_curvature(&metric, t, z)?));
        }
    }
    out.write("curvature.csv", |w| {
        writeln!(w, "x1,z,K")?;
        rows.iter().try_for_each(|(t, z, k)| writeln!(w, "{t},{z},{k:.17e}"))
    })?;
    let worst = |f: &dyn Fn(f64, f64) -> f64| rows.iter().map(|&(_, z, k)| f(z, k)).fold(0.0, f64::max);
    let mut checks = Vec::new();
    match cfg.metric.preset.as_str() {
        "hyperbolic" => checks.push(Check::new("|K + 1|", worst(&|_, k| (k + 1.0).abs()), Relation::Below, CURVATURE_EXACT)),
        "flat" => checks.push(Check::new("|K|", worst(&|_, k| k.abs()), Relation::Below, CURVATURE_EXACT)),
        "conformal-paper" => {
            checks.push(Check::new(
                "|K - closed form|",
                worst(&|z, k| (k - conformal_paper_curvature(z)).abs()),
                Relation::Below,
                CURVATURE_CLOSED_FORM,
            ));
            let base = MetricField2D::hyperbolic(z_max);
            let factor = ConformalFactor::paper();
            let mut liou: f64 = 0.0;
            for &(t, z, _) in &rows {
                liou = liou.max(liouville_residual(&base, &factor, t, z)?.abs());
            }
            checks.push(Check::new("Liouville residual", liou, Relation::Below, CURVATURE_CLOSED_FORM));
        }
        _ => {}
    }
    let lo = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    Ok((json!({ "metric": metric.name(), "samples": rows.len(), "min_K": lo, "max_K": hi }), checks))
}

pub fn operators_check(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let spec = &cfg.operators;
    let metric = cfg.metric.build(spec.z_max)?;
    let grid = Grid::new(spec.n_theta, spec.n_z, spec.z_max)?;
    let pairs = [hodge_ops::laplacian1(&grid, &metric)?, hodge_ops::laplacian2(&grid, &metric)?];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut per_degree = Vec::new();
    let mut worst: f64 = 0.0;
    for pair in &pairs {
        let explicit = pair.explicit.as_ref().ok_or_else(|| {
            CliError::Config(format!("metric {} has no explicit Laplacian (needs g22 = 1)", metric.name()))
        })?;
        let degree = pair.compositional.degree();
        let mut deg_worst: f64 = 0.0;
        for _ in 0..spec.forms.div_ceil(2) {
            let w = random_form(&grid, degree, &mut rng)?;
            let a = pair.compositional.apply(&w)?;
            let b = explicit.apply(&w)?;
            let gap = a.sub(&b)?.max_abs() / a.max_abs().max(b.max_abs()).max(1e-300);
            deg_worst = deg_worst.max(gap);
        }
        worst = worst.max(deg_worst);
        per_degree.push(json!({ "degree": degree, "worst_gap": deg_worst, "coefficient_gap": pair.gap }));
        out.write(&format!("laplacian{degree}_explicit_coefficients.csv"), |w| explicit.write_coefficients_csv(w))?;
    }
    let forms = 2 * spec.forms.div_ceil(2);
    let checks = vec![Check::new("compositional vs explicit, relative", worst, Relation::Below, spec.tolerance)];
    Ok((json!({ "metric": metric.name(), "forms": forms, "per_degree": per_degree }), checks))
}

fn dtn_config(cfg: &RunConfig) -> DtnConfig {
    DtnConfig { n_z: cfg.grid.n_z, k_max: cfg.modes.k_max, emit_ndelta: cfg.emit_ndelta, ..Default::default() }
}

pub fn dtn(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let metric = cfg.metric.build(cfg.grid.z_max)?;
    let dc = dtn_config(cfg);
    let d = match cfg.degree {
        0 => dtn::dtn0(&metric, &dc)?,
        1 => dtn::dtn1(&metric, &dc)?,
        other => return Err(CliError::Config(format!("dtn is defined for degrees 0 and 1, got {other}"))),
    };
    out.write_json(&format!("dtn{}.json", cfg.degree), &d)?;
    let mut checks = Vec::new();
    let finite = d.blocks.iter().flat_map(|b| &b.entries).all(|c| c.re.is_finite() && c.im.is_finite());
    checks.push(Check::flag("all blocks finite", finite));
    if cfg.metric.preset == "flat" {
        // ndω of the harmonic extension: |k| coth(|k| Z), and 1/Z at k = 0
        let z = cfg.grid.z_max;
        let mut dev: f64 = 0.0;
        for b in &d.blocks {
            let k = b.k.unsigned_abs() as f64;
            if k == 0.0 && cfg.degree == 1 {
                continue;
            }
            let want = if k == 0.0 { 1.0 / z } else { k / (k * z).tanh() };
            dev = dev.max((b.entries[0] - want).norm());
        }
        checks.push(Check::new("flat blocks vs |k|coth(|k|Z)", dev, Relation::Below, FLAT_BLOCKS));
    }
    let mut payload = json!({
        "metric": d.metric,
        "degree": d.degree,
        "Z": d.z_max,
        "n_z": d.n_z,
        "K_max": d.k_max,
        "first_entry": d.blocks.iter().map(|b| json!({ "k": b.k, "re": b.entries[0].re, "im": b.entries[0].im })).collect::<Vec<_>>(),
    });
    if d.degree == 1 {
        payload["lambda"] = json!(dtn::a11_from_dtn(&d)?);
    }
    Ok((payload, checks))
}

pub fn compare(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let spec = &cfg.compare;
    let z_max = cfg.grid.z_max;
    let a = cfg.metric.build(z_max)?;
    let b = spec.other.build(z_max)?;
    let identity_pair = cfg.metric.preset == "hyperbolic" && spec.other.preset == "conformal-paper";
    let src_b = if spec.conformal_identity && identity_pair && cfg.degree == 0 {
        OperatorSource::ConformalIdentity { base: a.clone(), factor: ConformalFactor::paper() }
    } else {
        OperatorSource::Laplacian(b)
    };
    let dc = dtn_config(cfg);
    let rep = match cfg.degree {
        0 | 1 => dtn::cauchy_compare(&OperatorSource::Laplacian(a), &src_b, cfg.degree, &dc)?,
        other => return Err(CliError::Config(format!("compare is defined for degrees 0 and 1, got {other}"))),
    };
    out.write("gaps.csv", |w| {
        writeln!(w, "k,gap")?;
        rep.per_mode.iter().try_for_each(|g| writeln!(w, "{},{:.17e}", g.k, g.gap))
    })?;
    out.write_json("compare.json", &rep)?;
    let expect = spec.expect.clone().unwrap_or(if cfg.degree == 0 {
        Expectation::Indistinguishable
    } else {
        Expectation::Distinguished
    });
    let checks = match expect {
        Expectation::Indistinguishable => vec![Check::new("max gap (indistinguishable)", rep.max_gap, Relation::Below, spec.tolerance)],
        Expectation::Distinguished => {
            let smallest = rep.per_mode.iter().filter(|g| g.k != 0).map(|g| g.gap).fold(f64::INFINITY, f64::min);
            vec![Check::new("smallest gap over k != 0 (distinguished)", smallest, Relation::Above, spec.tolerance)]
        }
    };
    let verdict = match rep.verdict {
        Verdict::Indistinguishable => "indistinguishable",
        Verdict::Distinguished => "distinguished",
    };
    Ok((
        json!({ "degree": rep.degree, "metrics": rep.metrics, "max_gap": rep.max_gap, "verdict": verdict, "tolerance": rep.tolerance }),
        checks,
    ))
}

pub fn recover(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let spec = &cfg.recover;
    if spec.levels < 1 {
        return Err(CliError::Config("recover.levels must be at least 1".into()));
    }
    let metric = cfg.metric.build(cfg.grid.z_max)?;
    let n_theta = if metric.is_rotationally_symmetric() { 4 } else { cfg.grid.n_theta };
    let est = recover_jets(&measure_symbols(&metric, spec.levels - 1, n_theta)?, spec.levels - 1)?;
    let want = boundary_jet(&metric, spec.levels, n_theta)?;
    let mut rows = Vec::new();
    let mut per_level = Vec::new();
    for l in 0..=spec.levels {
        let mut worst: f64 = 0.0;
        for (i, (a, b)) in est.metric.samples(l).iter().zip(want.samples(l)).enumerate() {
            let err = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(err);
            rows.push((l, 2.0 * PI * i as f64 / n_theta as f64, *a, b, err));
        }
        per_level.push(worst);
    }
    out.write("jets.csv", |w| {
        writeln!(w, "level,x1,recovered,analytic,relative_error")?;
        rows.iter().try_for_each(|(l, t, a, b, e)| writeln!(w, "{l},{t},{a:.17e},{b:.17e},{e:.3e}"))
    })?;
    let worst = per_level.iter().copied().fold(0.0, f64::max);
    let mut checks = vec![Check::new("jet round trip, relative", worst, Relation::Below, spec.tolerance)];
    let mut payload = json!({ "metric": metric.name(), "levels": spec.levels, "per_level_error": per_level, "residuals": est.residuals });
    if spec.fit_from_dtn {
        if !metric.is_rotationally_symmetric() {
            return Err(CliError::Config("the DtN symbol fit needs a rotationally symmetric metric".into()));
        }
        let d = dtn::dtn1(&metric, &DtnConfig { n_z: cfg.grid.n_z, k_max: spec.fit_k_max, ..Default::default() })?;
        let fit = fit_symbol_from_dtn(&dtn::a11_from_dtn(&d)?, cfg.modes.k_min, spec.fit_k_max, spec.fit_terms)?;
        let stack = forward_symbols(&metric, 0.0, 1)?;
        let entry = |j: i32| -> Result<f64, CliError> {
            let s = stack.get(j).ok_or_else(|| CliError::Config(format!("symbol of order {j} unavailable")))?;
            Ok(s.eval(1.0)?[0][0].re)
        };
        let (a1, a0) = (entry(1)?, entry(0)?);
        checks.push(Check::new("|c0 - a0,11|", (fit.coefficients[1] - a0).abs(), Relation::Below, spec.fit_tolerance));
        payload["fit"] = json!({ "coefficients": fit.coefficients, "std_errors": fit.std_errors, "k_range": fit.k_range, "forward_a1": a1, "forward_a0": a0 });
    }
    Ok((payload, checks))
}

pub fn spectrum(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let spec = &cfg.spectrum;
    let z_max = cfg.grid.z_max;
    let ks: Vec<i64> = (-spec.k_range..=spec.k_range).collect();
    let factor = ConformalFactor::paper();
    let probe = match spec.family {
        Family::P => spectral_probe("P_k", &ks, spec.n_eig, spec.nodes, |k| Ok(mode_operator_p(k, z_max)))?,
        Family::L => spectral_probe("L_k", &ks, spec.n_eig, spec.nodes, |k| Ok(mode_operator_l(k, &factor, z_max)))?,
    };
    out.write_json("spectrum.json", &probe)?;
    out.write("spectrum.csv", |w| {
        writeln!(w, "k,index,eigenvalue")?;
        for e in &probe.entries {
            for (i, v) in e.eigenvalues.iter().enumerate() {
                writeln!(w, "{},{i},{v:.17e}", e.k)?;
            }
        }
        Ok(())
    })?;
    let mut checks = Vec::new();
    let mut payload = json!({ "family": probe.label, "bottom_estimate": probe.bottom_estimate, "lowest": probe.lowest(), "k": probe.k_list() });
    match spec.family {
        Family::P => {
            checks.push(Check::new("min lowest eigenvalue over P_k", probe.bottom_estimate, Relation::Above, 0.25));
            let p0 = discrete_spectrum(&mode_operator_p(0, z_max), 1, spec.p0_nodes)?[0];
            let exact = p0_eigenvalue(1, z_max);
            checks.push(Check::new("|P_0 lowest - (1/4 + (pi/Z)^2)|", (p0 - exact).abs(), Relation::Below, spec.p0_tolerance));
            payload["p0"] = json!({ "computed": p0, "exact": exact, "nodes": spec.p0_nodes });
        }
        Family::L => checks.push(Check::new("min lowest eigenvalue over L_k", probe.bottom_estimate, Relation::Above, 0.0)),
    }
    Ok((payload, checks))
}

pub fn green(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let spec = &cfg.green;
    let metric = cfg.metric.build(cfg.grid.z_max)?;
    if cfg.degree > 1 {
        return Err(CliError::Config(format!("green log fit is defined for degrees 0 and 1, got {}", cfg.degree)));
    }
    let gc = GreenConfig { n_z: cfg.grid.n_z, k_max: spec.k_max, ..Default::default() };
    let radii = spec.radii_for(&cfg.metric.preset);
    let fit = greens::log_coefficient_fit(&metric, cfg.degree, spec.y, &radii, &gc)?;
    let dim = if cfg.degree == 0 { 1 } else { 2 };
    out.write("green_samples.csv", |w| greens::write_green_csv(&fit.samples, dim, w))?;
    let ratio = fit.coefficient / spec.expected;
    let checks = vec![Check::new("|coefficient / expected - 1|", (ratio - 1.0).abs(), Relation::Below, spec.tolerance)];
    Ok((
        json!({
            "metric": metric.name(),
            "degree": cfg.degree,
            "y": spec.y,
            "radii": fit.radii,
            "component": fit.component,
            "coefficient": fit.coefficient,
            "intercept": fit.intercept,
            "rms_residual": fit.rms_residual,
            "measured_constant": 1.0 / fit.coefficient,
        }),
        checks,
    ))
}

pub fn stokes_check(cfg: &RunConfig, out: &mut Output) -> Outcome {
    let spec = &cfg.stokes;
    let metric = cfg.metric.build(spec.z_max)?;
    let grids: Vec<Arc<Grid>> = spec.n_z.iter().map(|&n| Grid::new(spec.n_theta, n, spec.z_max)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut min_order = f64::INFINITY;
    for pair in 0..spec.pairs {
        let degree = (pair % 2) as u8;
        let seed: u64 = rng.gen();
        let mut res = Vec::with_capacity(grids.len());
        for g in &grids {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let w = random_form(g, degree, &mut r)?;
            let e = random_form(g, degree + 1, &mut r)?;
            let scale = (forms::inner_product(&w, &w, &metric)?.norm() * forms::inner_product(&e, &e, &metric)?.norm()).sqrt();
            let rel = forms::stokes_residual(&w, &e, &metric)? / scale;
            rows.push((pair, degree, g.n_z(), rel));
            res.push(rel);
        }
        for w in res.windows(2) {
            min_order = min_order.min((w[0] / w[1]).log2());
        }
    }
    out.write("stokes.csv", |w| {
        writeln!(w, "pair,degree,n_z,relative_residual")?;
        rows.iter().try_for_each(|(p, d, n, r)| writeln!(w, "{p},{d},{n},{r:.6e}"))
    })?;
    let checks = vec![Check::new("min observed convergence order", min_order, Relation::AtLeast, spec.min_order)];
    Ok((json!({ "metric": metric.name(), "pairs": spec.pairs, "n_z": spec.n_z, "min_order": min_order }), checks))
}
