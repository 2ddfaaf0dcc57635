//! Config documents accepted by every subcommand.
//!
//! A config is either a bare table document (`{"disks": [...]}`) or a lab
//! document with a `table` key plus optional per-subcommand sections.

use lorentz_core::campaign::CampaignKind;
use lorentz_core::constants::ConstantsConfig;
use lorentz_core::TableSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub table: TableSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub count: CountSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub campaign: Option<CampaignSection>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    #[serde(default)]
    pub replica: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { n: 1000, replica: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSection {
    pub n: usize,
    #[serde(default)]
    pub replica: u64,
    /// Also report the continuous-time count at this time.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub cell_size: Option<f64>,
}

impl Default for CountSection {
    fn default() -> Self {
        CountSection {
            n: 1000,
            replica: 0,
            t: None,
            cell_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub tau_replicas: u64,
    pub tau_steps: u64,
    pub sigma_replicas: u64,
    pub sigma_steps: u64,
    pub j_tolerance: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let d = ConstantsConfig::default();
        ConstantsSection {
            tau_replicas: d.tau_replicas,
            tau_steps: d.tau_steps,
            sigma_replicas: d.sigma_replicas,
            sigma_steps: d.sigma_steps,
            j_tolerance: d.j_tolerance,
        }
    }
}

impl ConstantsSection {
    pub fn with_seed(&self, seed: u64) -> ConstantsConfig {
        ConstantsConfig {
            seed,
            tau_replicas: self.tau_replicas,
            tau_steps: self.tau_steps,
            sigma_replicas: self.sigma_replicas,
            sigma_steps: self.sigma_steps,
            j_tolerance: self.j_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub kinds: Vec<CampaignKind>,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    pub replicas: u64,
    #[serde(default)]
    pub budget_secs: Option<f64>,
    #[serde(default)]
    pub cell_size: Option<f64>,
    /// Compute a constants report and attach it to every result.
    #[serde(default = "yes")]
    pub attach_constants: bool,
    #[serde(default)]
    pub decorrelation: Option<DecorrelationSection>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecorrelationSection {
    pub r: u64,
    pub s: u64,
    pub gaps: Vec<u64>,
    pub replicas: u64,
}

#[derive(Debug)]
pub struct LoadedConfig {
    pub lab: LabConfig,
    /// SHA-256 of the file bytes.
    pub sha256: String,
}

#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

pub fn load(path: &Path) -> Result<LoadedConfig, ParseError> {
    let bytes = std::fs::read(path).map_err(|e| ParseError(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| ParseError(format!("{}: malformed JSON: {e}", path.display())))?;
    let lab = if value.get("table").is_some() {
        serde_json::from_value::<LabConfig>(value)
            .map_err(|e| ParseError(format!("{}: invalid lab config: {e}", path.display())))?
    } else {
        let table = serde_json::from_value::<TableSpec>(value)
            .map_err(|e| ParseError(format!("{}: invalid table document: {e}", path.display())))?;
        LabConfig {
            table,
            seed: DEFAULT_SEED,
            simulate: SimulateSection::default(),
            count: CountSection::default(),
            constants: ConstantsSection::default(),
            campaign: None,
        }
    };
    Ok(LoadedConfig { lab, sha256 })
}
