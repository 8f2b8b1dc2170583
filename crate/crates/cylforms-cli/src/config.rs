//! JSON run configuration.

use std::path::Path;

use cylforms::geometry::SeriesTerm;
use cylforms::MetricField2D;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSpec {
    /// `flat`, `hyperbolic`, `conformal-paper` or `series`.
    pub preset: String,
    /// Terms of a `series` metric.
    pub terms: Vec<SeriesTerm>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { preset: "hyperbolic".into(), terms: Vec::new() }
    }
}

impl MetricSpec {
    pub fn named(preset: &str) -> Self {
        Self { preset: preset.into(), terms: Vec::new() }
    }

    pub fn build(&self, z_max: f64) -> Result<MetricField2D, CliError> {
        if !self.terms.is_empty() && self.preset != "series" {
            return Err(CliError::Config(format!("series terms given for preset {:?}", self.preset)));
        }
        match self.preset.as_str() {
            "flat" => Ok(MetricField2D::flat(z_max)),
            "hyperbolic" => Ok(MetricField2D::hyperbolic(z_max)),
            "conformal-paper" => Ok(MetricField2D::conformal_paper(z_max)),
            "series" if self.terms.is_empty() => Err(CliError::Config("series metric needs terms".into())),
            "series" => Ok(MetricField2D::series(&self.terms, z_max)?),
            other => Err(CliError::Config(format!("unknown metric preset {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_z: usize,
    #[serde(rename = "Z")]
    pub z_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_theta: 32, n_z: 800, z_max: 12.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSpec {
    #[serde(rename = "K_max")]
    pub k_max: i64,
    /// Smallest `k` entering symbol fits.
    pub k_min: i64,
}

impl Default for ModeSpec {
    fn default() -> Self {
        Self { k_max: 32, k_min: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorsSpec {
    pub forms: usize,
    pub n_theta: usize,
    pub n_z: usize,
    #[serde(rename = "Z")]
    pub z_max: f64,
    pub tolerance: f64,
}

impl Default for OperatorsSpec {
    fn default() -> Self {
        Self { forms: 50, n_theta: 32, n_z: 96, z_max: 3.0, tolerance: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Indistinguishable,
    Distinguished,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    pub other: MetricSpec,
    /// Evaluate a `conformal-paper` partner through the conformal identities
    /// of the hyperbolic metric.
    pub conformal_identity: bool,
    pub tolerance: f64,
    /// Defaults to indistinguishable for degree 0, distinguished for degree 1.
    pub expect: Option<Expectation>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            other: MetricSpec::named("conformal-paper"),
            conformal_identity: true,
            tolerance: cylforms::dtn::INDISTINGUISHABLE_TOLERANCE,
            expect: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverSpec {
    /// Highest recovered jet level.
    pub levels: usize,
    pub tolerance: f64,
    /// Also fit `λ(k)` from degree-1 DtN blocks.
    pub fit_from_dtn: bool,
    pub fit_k_max: i64,
    pub fit_terms: usize,
    pub fit_tolerance: f64,
}

impl Default for RecoverSpec {
    fn default() -> Self {
        Self { levels: 4, tolerance: 1e-9, fit_from_dtn: false, fit_k_max: 64, fit_terms: 4, fit_tolerance: 0.02 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum Family {
    P,
    L,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSpec {
    pub family: Family,
    /// Modes `−k_range ≤ k ≤ k_range`.
    pub k_range: i64,
    pub n_eig: usize,
    pub nodes: usize,
    /// Intervals of the separate `P₀` eigenvalue check.
    pub p0_nodes: usize,
    pub p0_tolerance: f64,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self { family: Family::P, k_range: 16, n_eig: 3, nodes: 1200, p0_nodes: 2000, p0_tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSpec {
    pub y: (f64, f64),
    /// Coordinate radii of the sample circles; preset-dependent when omitted.
    pub radii: Option<Vec<f64>>,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    /// Expected slope of `G` against `−log d`.
    pub expected: f64,
    /// Relative tolerance on the slope.
    pub tolerance: f64,
}

impl GreenSpec {
    /// Flat grids resolve wider circles at the default `K_max`; curved
    /// metrics need small ones for the local log law.
    pub fn radii_for(&self, preset: &str) -> Vec<f64> {
        match (&self.radii, preset) {
            (Some(r), _) => r.clone(),
            (None, "flat") => vec![0.02, 0.05, 0.1, 0.2],
            (None, _) => vec![0.01, 0.02, 0.05],
        }
    }
}

impl Default for GreenSpec {
    fn default() -> Self {
        Self {
            y: (0.0, 1.0),
            radii: None,
            k_max: 64,
            expected: 1.0 / (2.0 * std::f64::consts::PI),
            tolerance: 0.02,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesSpec {
    pub pairs: usize,
    pub n_theta: usize,
    pub n_z: Vec<usize>,
    #[serde(rename = "Z")]
    pub z_max: f64,
    pub min_order: f64,
}

impl Default for StokesSpec {
    fn default() -> Self {
        Self { pairs: 20, n_theta: 16, n_z: vec![32, 64, 128], z_max: 2.0, min_order: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub grid: GridSpec,
    pub modes: ModeSpec,
    pub degree: u8,
    pub seed: u64,
    pub emit_ndelta: bool,
    pub operators: OperatorsSpec,
    pub compare: CompareSpec,
    pub recover: RecoverSpec,
    pub spectrum: SpectrumSpec,
    pub green: GreenSpec,
    pub stokes: StokesSpec,
}

pub const DEFAULT_SEED: u64 = 0x5eed_c0de;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: MetricSpec::default(),
            grid: GridSpec::default(),
            modes: ModeSpec::default(),
            degree: 1,
            seed: DEFAULT_SEED,
            emit_ndelta: false,
            operators: OperatorsSpec::default(),
            compare: CompareSpec::default(),
            recover: RecoverSpec::default(),
            spectrum: SpectrumSpec::default(),
            green: GreenSpec::default(),
            stokes: StokesSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.grid.z_max > 0.0 && self.grid.z_max.is_finite()) {
            return bad(format!("Z must be positive, got {}", self.grid.z_max));
        }
        if self.grid.n_z < 8 || self.grid.n_theta < 4 {
            return bad("grid needs n_z >= 8 and n_theta >= 4".into());
        }
        if self.degree > 2 {
            return bad(format!("degree {} is not 0, 1 or 2", self.degree));
        }
        if self.modes.k_max < 1 {
            return bad("K_max must be at least 1".into());
        }
        if self.modes.k_min < 1 {
            return bad("k_min must be at least 1".into());
        }
        if self.stokes.n_z.len() < 2 {
            return bad("stokes.n_z needs at least two grids".into());
        }
        if self.green.radii.as_ref().is_some_and(|r| r.len() < 2) {
            return bad("green.radii needs at least two radii".into());
        }
        self.metric.build(self.grid.z_max)?;
        self.compare.other.build(self.grid.z_max)?;
        Ok(())
    }
}
