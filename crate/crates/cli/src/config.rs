//! Run configuration: a TOML file of `key = value` lines grouped in sections,
//! with command-line flags layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;
use vonmises::barrier::{BarrierConstants, BarrierKind};
use vonmises::data::InitialData;
use vonmises::diagnostics::Quantity;
use vonmises::march::{MarchConfig, Scheme};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Blasius,
    March,
    Verify,
    Fit,
    Barrier,
    All,
}

impl Command {
    pub fn runs_march(self) -> bool {
        matches!(self, Command::March | Command::Fit | Command::Barrier | Command::All)
    }

    pub fn runs_verify(self) -> bool {
        matches!(self, Command::Verify | Command::All)
    }

    pub fn runs_fit(self) -> bool {
        matches!(self, Command::Fit | Command::All)
    }

    pub fn runs_barrier(self) -> bool {
        matches!(self, Command::Barrier | Command::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    Low,
    #[default]
    Default,
    High,
}

impl Resolution {
    /// (cells, dx0)
    pub fn preset(self) -> (usize, f64) {
        match self {
            Resolution::Low => (1000, 0.02),
            Resolution::Default => (4000, 0.01),
            Resolution::High => (8000, 0.005),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    BlasiusShift { x0: f64 },
    GaussianConcave { amplitude: f64, width: f64 },
    /// two-column `y,u` CSV; relative paths are taken from the config file's directory
    Table { path: PathBuf },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::BlasiusShift { x0: 2.0 }
    }
}

impl DataSpec {
    pub fn load(&self, base: &Path) -> Result<InitialData> {
        Ok(match self {
            DataSpec::BlasiusShift { x0 } => InitialData::BlasiusShift { x0: *x0 },
            DataSpec::GaussianConcave { amplitude, width } => {
                InitialData::GaussianConcave { amplitude: *amplitude, width: *width }
            }
            DataSpec::Table { path } => InitialData::read_table(&base.join(path))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlasiusSettings {
    pub zeta_max: f64,
    pub tol: f64,
}

impl Default for BlasiusSettings {
    fn default() -> Self {
        BlasiusSettings { zeta_max: 12.0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSettings {
    pub quantities: Vec<Quantity>,
    /// include the ln(x+e) factor in decay fits
    pub with_log: bool,
    /// fits use checkpoints with x at or above this
    pub fit_start: f64,
    /// Euler profiles are sampled at ζ = k·euler_dzeta, k = 1..=euler_points
    pub euler_points: usize,
    pub euler_dzeta: f64,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        DiagnosticsSettings {
            quantities: Quantity::ALL.to_vec(),
            with_log: true,
            fit_start: 10.0,
            euler_points: 500,
            euler_dzeta: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    /// screen concavity as a gate and require max ∂ₓw ≤ max_dxw at every checkpoint
    pub concavity: bool,
    pub max_dxw: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings { concavity: true, max_dxw: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub x_end: f64,
    pub max_error: f64,
    pub min_dx_order: f64,
    pub min_dpsi_order: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { x_end: 100.0, max_error: 1e-3, min_dx_order: 1.0, min_dpsi_order: 1.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierSettings {
    pub kinds: Vec<BarrierKind>,
    pub samples: usize,
    /// fixed constants; anything left out is searched or defaulted
    pub constants: BarrierConstants,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings {
            kinds: vec![BarrierKind::ExpTail, BarrierKind::Sharp, BarrierKind::DxPhi, BarrierKind::D2xwCos],
            samples: 400,
            constants: BarrierConstants::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    command: Option<Command>,
    resolution: Option<Resolution>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MarchSection {
    x_end: Option<f64>,
    dx0: Option<f64>,
    step_growth: Option<f64>,
    cells: Option<usize>,
    grading: Option<f64>,
    psi_max_factor: Option<f64>,
    w_floor_coeff: Option<f64>,
    picard_iters: Option<usize>,
    scheme: Option<Scheme>,
    checkpoint_ratio: Option<f64>,
}

/// `[barrier]`: constants are given inline as `eps = 0.05`, `N = 8`, ...
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BarrierSection {
    kinds: Option<Vec<Spanned<String>>>,
    samples: Option<usize>,
    #[serde(rename = "C")]
    c: Option<f64>,
    #[serde(rename = "B")]
    b: Option<f64>,
    #[serde(rename = "K")]
    k: Option<f64>,
    lambda: Option<f64>,
    eps: Option<f64>,
    alpha: Option<f64>,
    #[serde(rename = "M")]
    m: Option<f64>,
    #[serde(rename = "N")]
    n: Option<f64>,
    h0: Option<f64>,
    h1: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    run: RunSection,
    data: Option<DataSpec>,
    march: MarchSection,
    blasius: BlasiusSettings,
    diagnostics: DiagnosticsSettings,
    audit: AuditSettings,
    verify: VerifySettings,
    barrier: BarrierSection,
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub resolution: Option<Resolution>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub resolution: Resolution,
    pub data: DataSpec,
    pub march: MarchConfig,
    pub blasius: BlasiusSettings,
    pub diagnostics: DiagnosticsSettings,
    pub audit: AuditSettings,
    pub verify: VerifySettings,
    pub barrier: BarrierSettings,
    /// left out of the summary so that outputs do not depend on where they are written
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Reads and parses a config file. Relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::error::io_at(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base, overrides)
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let at = |offset: usize, message: String| CliError::Config { origin: origin.into(), line: line_of(text, offset), message };
        let file: FileConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().trim().to_string();
            match e.span() {
                Some(span) => at(span.start, message),
                None => CliError::ConfigValue { origin: origin.into(), message },
            }
        })?;
        let value_err = |message: String| CliError::ConfigValue { origin: origin.into(), message };

        let resolution = overrides.resolution.or(file.run.resolution).unwrap_or_default();
        let (cells, dx0) = resolution.preset();
        let m = file.march;
        let d = MarchConfig::default();
        let march = MarchConfig {
            x_end: m.x_end.unwrap_or(d.x_end),
            dx0: m.dx0.unwrap_or(dx0),
            step_growth: m.step_growth.unwrap_or(d.step_growth),
            cells: m.cells.unwrap_or(cells),
            grading: m.grading.unwrap_or(d.grading),
            psi_max_factor: m.psi_max_factor.unwrap_or(d.psi_max_factor),
            w_floor_coeff: m.w_floor_coeff.unwrap_or(d.w_floor_coeff),
            picard_iters: m.picard_iters.unwrap_or(d.picard_iters),
            scheme: m.scheme.unwrap_or(d.scheme),
            checkpoint_ratio: m.checkpoint_ratio.unwrap_or(d.checkpoint_ratio),
        };
        march.validate().map_err(|e| value_err(format!("[march] {e}")))?;

        let mut barrier = BarrierSettings::default();
        let bs = file.barrier;
        if let Some(kinds) = bs.kinds {
            barrier.kinds = kinds
                .into_iter()
                .map(|k| {
                    let start = k.span().start;
                    k.into_inner().parse::<BarrierKind>().map_err(|e| at(start, e.to_string()))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(s) = bs.samples {
            barrier.samples = s;
        }
        barrier.constants = BarrierConstants {
            c: bs.c,
            b: bs.b,
            k: bs.k,
            lambda: bs.lambda,
            eps: bs.eps,
            alpha: bs.alpha,
            m: bs.m,
            n: bs.n,
            h0: bs.h0,
            h1: bs.h1,
        };
        if barrier.samples == 0 {
            return Err(value_err("[barrier] samples must be positive".into()));
        }

        let b = &file.blasius;
        if !(b.zeta_max > 0.0 && b.tol > 0.0) {
            return Err(value_err("[blasius] zeta_max and tol must be positive".into()));
        }
        let dg = &file.diagnostics;
        if dg.euler_points == 0 || !(dg.euler_dzeta > 0.0) {
            return Err(value_err("[diagnostics] euler_points and euler_dzeta must be positive".into()));
        }

        Ok(RunConfig {
            command: overrides.command.or(file.run.command).unwrap_or(Command::All),
            resolution,
            data: file.data.unwrap_or_default(),
            march,
            blasius: file.blasius,
            diagnostics: file.diagnostics,
            audit: file.audit,
            verify: file.verify,
            barrier,
            out: overrides.out.clone().or(file.run.out.map(|o| base_dir.join(o))).unwrap_or_else(|| PathBuf::from("out")),
            base_dir: base_dir.to_path_buf(),
        })
    }
}
