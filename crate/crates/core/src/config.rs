//! Run configuration: one JSON document, unknown keys rejected.

use serde::{Deserialize, Serialize};

use crate::branch::{DEFAULT_EPS_MAX, DEFAULT_EPS_MIN, DEFAULT_POINTS};
use crate::directions::{ProbeSteps, DEFAULT_SEED, DICTIONARY_SIZE, GATEAUX_STEP, HESSIAN_STEP};
use crate::error::{Error, Result};
use crate::functionals::CasimirForm;
use crate::kdv::DEFAULT_GENERICITY_THRESHOLD;
use crate::spectral_chain::NOISE_FACTOR;
use crate::stratification::StratificationProfile;
use crate::wavefields::{DECAY_WIDTHS, DEFAULT_NX, DEFAULT_NY};

pub const SCHEMA_VERSION: u32 = 1;
/// Amplitudes above this are accepted with a warning.
pub const EPS_WARN: f64 = 0.15;
/// Amplitudes at or above this are rejected.
pub const EPS_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: StratificationProfile,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
    pub probes: ProbeConfig,
    pub thresholds: ThresholdConfig,
    pub output: OutputConfig,
    /// Debug switch for the sigma-weighted Casimir term.
    pub casimir_form: CasimirForm,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: StratificationProfile::exponential(1.0, 1.0, 1.0),
            grid: GridConfig::default(),
            sweep: SweepConfig::default(),
            probes: ProbeConfig::default(),
            thresholds: ThresholdConfig::default(),
            output: OutputConfig::default(),
            casimir_form: CasimirForm::SigmaFree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Half-width policy: `L = decay_widths / (k eps)`.
    pub decay_widths: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: DEFAULT_NX,
            ny: DEFAULT_NY,
            decay_widths: DECAY_WIDTHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Explicit amplitudes for the branch; overrides the uniform-in-c default.
    pub eps_list: Option<Vec<f64>>,
    /// Explicit speeds for the branch; overrides `eps_list`.
    pub c_list: Option<Vec<f64>>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
    /// Amplitudes of the residual and chain studies.
    pub residual_eps: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps_list: None,
            c_list: None,
            eps_min: DEFAULT_EPS_MIN,
            eps_max: DEFAULT_EPS_MAX,
            points: DEFAULT_POINTS,
            residual_eps: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub gateaux_step: f64,
    pub hessian_step: f64,
    /// `delta_c = delta_c_fraction * eps^2`.
    pub delta_c_fraction: f64,
    pub seed: u64,
    pub directions: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            gateaux_step: GATEAUX_STEP,
            hessian_step: HESSIAN_STEP,
            delta_c_fraction: 0.05,
            seed: DEFAULT_SEED,
            directions: DICTIONARY_SIZE,
        }
    }
}

impl ProbeConfig {
    pub fn steps(&self) -> ProbeSteps {
        ProbeSteps {
            gateaux: self.gateaux_step,
            hessian: self.hessian_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub genericity: f64,
    pub chain_noise_factor: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            genericity: DEFAULT_GENERICITY_THRESHOLD,
            chain_noise_factor: NOISE_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

fn config_error(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name}: must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Parses a JSON document; errors carry the serde line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let message = full.strip_suffix(&suffix).unwrap_or(&full);
            config_error(format!(
                "line {}, column {}: {message}",
                e.line(),
                e.column()
            ))
        })
    }

    /// Checks every numeric field; returns warnings for amplitudes outside the asymptotic range.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.grid.nx < 16 || self.grid.ny < 16 {
            let field = if self.grid.ny < 16 {
                "grid.ny"
            } else {
                "grid.nx"
            };
            return Err(config_error(format!(
                "{field}: ny ≥ 16 required (and nx ≥ 16), got nx = {}, ny = {}",
                self.grid.nx, self.grid.ny
            )));
        }
        positive("grid.decay_widths", self.grid.decay_widths)?;
        positive("sweep.eps_min", self.sweep.eps_min)?;
        positive("sweep.eps_max", self.sweep.eps_max)?;
        if self.sweep.eps_max <= self.sweep.eps_min {
            return Err(config_error("sweep.eps_max: must exceed sweep.eps_min"));
        }
        positive("probes.gateaux_step", self.probes.gateaux_step)?;
        positive("probes.hessian_step", self.probes.hessian_step)?;
        positive("probes.delta_c_fraction", self.probes.delta_c_fraction)?;
        if self.probes.delta_c_fraction >= 1.0 {
            return Err(config_error(
                "probes.delta_c_fraction: must be below 1 (delta_c < eps^2)",
            ));
        }
        if self.sweep.points < 3 {
            return Err(config_error(format!(
                "sweep.points: at least 3 required, got {}",
                self.sweep.points
            )));
        }
        if self.probes.directions == 0 {
            return Err(config_error("probes.directions: must be positive"));
        }
        positive("thresholds.genericity", self.thresholds.genericity)?;
        positive(
            "thresholds.chain_noise_factor",
            self.thresholds.chain_noise_factor,
        )?;
        if let Some(cs) = &self.sweep.c_list {
            for &c in cs {
                positive("sweep.c_list", c)?;
            }
        }
        let mut warnings = Vec::new();
        let amplitudes: [(&str, &[f64]); 3] = [
            (
                "sweep.eps_list",
                self.sweep.eps_list.as_deref().unwrap_or(&[]),
            ),
            ("sweep.residual_eps", &self.sweep.residual_eps),
            ("sweep.eps_max", &[self.sweep.eps_min, self.sweep.eps_max]),
        ];
        for (name, &eps) in amplitudes
            .iter()
            .flat_map(|(n, v)| v.iter().map(move |e| (*n, e)))
        {
            positive(name, eps)?;
            if eps >= EPS_MAX {
                return Err(config_error(format!(
                    "{name}: eps = {eps} not below {EPS_MAX}"
                )));
            }
            if eps > EPS_WARN {
                warnings.push(format!(
                    "eps = {eps} above {EPS_WARN}: outside the small-amplitude regime"
                ));
            }
        }
        warnings.dedup();
        Ok(warnings)
    }

    pub fn delta_c(&self, eps: f64) -> f64 {
        self.probes.delta_c_fraction * eps * eps
    }
}
