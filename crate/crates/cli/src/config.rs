//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use pwkit::analysis::{ProbeSpec, VerdictStatus, WarpFamily};
use pwkit::pwcore::io::{read_signal, ValueEncoding};
use pwkit::pwcore::{make_catalog_with, AffineMap, CatalogKind, GridSpec, PwSignal, Warp};
use pwkit::spectra::{SampleGrid, Window};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Required by every kind that draws random points, lines or probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Where artifacts go. Not part of the experiment's identity: it is left
    /// out of the hash and of the config echoed into reports.
    #[serde(default = "default_dir", skip_serializing_if = "is_empty_path")]
    pub dir: PathBuf,
    /// File name prefix; defaults to the experiment kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    #[serde(default)]
    pub plots: bool,
}

fn is_empty_path(p: &Path) -> bool {
    p.as_os_str().is_empty()
}

fn default_dir() -> PathBuf {
    PathBuf::from("pwkit-out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: default_dir(),
            stem: None,
            plots: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Identity residual bound, relative to `1 + |lhs|`.
    pub identity: f64,
    /// Phase residual at or below which a profile is affine-consistent.
    pub affine: f64,
    /// Phase residual above which a profile witnesses non-affinity.
    pub nonaffine: f64,
    /// Allowed ratio of out-of-band energy to the measured leakage floor.
    pub leakage_factor: f64,
    /// Most negative growth margin accepted.
    pub growth: f64,
    /// Max-entry reconstruction error of the injective decomposition, relative to `‖A‖`.
    pub decomposition: f64,
    /// Out-of-band fraction used for bandwidth estimates.
    pub bandwidth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            affine: 1e-6,
            nonaffine: 1e-2,
            leakage_factor: 10.0,
            growth: 1e-8,
            decomposition: 1e-12,
            bandwidth: 1e-3,
        }
    }
}

/// Where a signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    Catalog {
        dim: usize,
        catalog: CatalogKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
        #[serde(default)]
        grid: GridSpec,
    },
    /// A signal header written by the `catalog` or `projection` experiments.
    File { path: PathBuf },
}

impl SignalSpec {
    /// `base` resolves relative file paths (the config file's directory).
    pub fn load(&self, base: &Path) -> CliResult<PwSignal> {
        match self {
            SignalSpec::Catalog {
                dim,
                catalog,
                shift,
                grid,
            } => Ok(make_catalog_with(
                *dim,
                *catalog,
                shift.clone().unwrap_or_else(|| vec![0.0; *dim]),
                *grid,
            )?),
            SignalSpec::File { path } => Ok(read_signal(&base.join(path))?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    Preserved,
    NotPreserved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadSpec {
    pub family: WarpFamily,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Identity residuals and quadrature-versus-closed-form checks at seeded points.
    Catalog {
        signal: SignalSpec,
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_encoding")]
        encoding: ValueEncoding,
    },
    /// Values of `f ∘ φ` at seeded points; affine warps are also composed
    /// spectrally and checked against direct substitution.
    Warp {
        signal: SignalSpec,
        warp: Warp,
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
    /// Periodogram of `f` or `f ∘ φ` with out-of-band energy and bandwidth.
    Spectrum {
        signal: SignalSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        warp: Option<Warp>,
        grid: SampleGrid,
        #[serde(default)]
        window: Window,
        /// Defaults to the band radius, times `‖Dφ(0)‖` when warped.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    /// Phase-linearity verdict on seeded line probes.
    VerifyAffine {
        warp: Warp,
        #[serde(default = "default_probe_count")]
        probes: usize,
        #[serde(default)]
        probe: ProbeSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<VerdictStatus>,
    },
    /// Whether `f ∘ φ` stays bandlimited, measured against the prediction
    /// that it does exactly when `φ` is injective affine.
    VerifyTheorem {
        signal: SignalSpec,
        warp: Warp,
        grid: SampleGrid,
        #[serde(default)]
        window: Window,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        claim: Option<Claim>,
        #[serde(default = "default_probe_count")]
        probes: usize,
        #[serde(default)]
        probe: ProbeSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spread: Option<SpreadSpec>,
    },
    /// Exponential-type bound on seeded complex lines.
    GrowthBound {
        signal: SignalSpec,
        #[serde(default = "default_lines")]
        lines: usize,
        #[serde(default = "default_radii")]
        radii: Vec<f64>,
        #[serde(default = "default_circle_points")]
        points: usize,
    },
    /// Marginal spectrum on the first `m` coordinates, checked against the
    /// restriction `f(x, 0)`; optionally decomposes an injective map.
    Projection {
        signal: SignalSpec,
        m: usize,
        #[serde(default = "default_projection_points")]
        points: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<AffineMap>,
        #[serde(default = "default_encoding")]
        encoding: ValueEncoding,
    },
}

fn default_points() -> usize {
    100
}
fn default_half_width() -> f64 {
    10.0
}
fn default_encoding() -> ValueEncoding {
    ValueEncoding::F64le
}
fn default_probe_count() -> usize {
    20
}
fn default_lines() -> usize {
    50
}
fn default_radii() -> Vec<f64> {
    vec![1.0, 5.0, 10.0]
}
fn default_circle_points() -> usize {
    64
}
fn default_projection_points() -> usize {
    50
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Catalog { .. } => "catalog",
            Experiment::Warp { .. } => "warp",
            Experiment::Spectrum { .. } => "spectrum",
            Experiment::VerifyAffine { .. } => "verify-affine",
            Experiment::VerifyTheorem { .. } => "verify-theorem",
            Experiment::GrowthBound { .. } => "growth-bound",
            Experiment::Projection { .. } => "projection",
        }
    }

    fn randomized(&self) -> bool {
        !matches!(self, Experiment::Spectrum { .. })
    }
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, so command-line overrides (such as a
    /// seed) can complete the config first.
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads and parses a config file without validating it.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (this build reads {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.experiment.randomized() && self.seed.is_none() {
            return Err(CliError::Config(format!(
                "experiment {} draws random points and needs a seed",
                self.experiment.name()
            )));
        }
        if is_empty_path(&self.output.dir) {
            return Err(CliError::Config("output dir must not be empty".into()));
        }
        if let Some(stem) = &self.output.stem {
            if stem.is_empty() || stem.contains(['/', '\\']) {
                return Err(CliError::Config(format!(
                    "output stem {stem:?} must be a plain file name"
                )));
            }
        }
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .unwrap_or_else(|| self.experiment.name().to_string())
    }

    /// Replaces the tolerance that decides pass or fail for this kind.
    pub fn set_primary_tolerance(&mut self, tol: f64) -> CliResult<()> {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(CliError::Usage(format!(
                "--tol must be a nonnegative number, got {tol}"
            )));
        }
        let t = &mut self.tolerances;
        match self.experiment {
            Experiment::Catalog { .. } => t.identity = tol,
            Experiment::Spectrum { .. } => t.bandwidth = tol,
            Experiment::Warp { .. } => {
                return Err(CliError::Usage(
                    "the warp experiment has no tolerance to override".into(),
                ))
            }
            Experiment::VerifyAffine { .. } => t.affine = tol,
            Experiment::VerifyTheorem { .. } => t.leakage_factor = tol,
            Experiment::GrowthBound { .. } => t.growth = tol,
            Experiment::Projection { .. } => t.decomposition = tol,
        }
        Ok(())
    }

    /// The config without its output directory.
    pub fn canonical(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        c
    }

    /// SHA-256 of the serialised canonical form, lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(&self.canonical()).expect("config serialises"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
