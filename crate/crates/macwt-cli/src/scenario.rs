//! Scenario files: one JSON document that names a mode, a channel, and every
//! knob the run needs.
//!
//! Scenarios are the only input the runner takes, and the seed is a required
//! field: a scenario with no seed is rejected at load time, so no artifact is
//! ever produced from ambient randomness. Loading resolves relative channel
//! paths against the scenario file's directory and rejects anything the named
//! mode cannot use, with the offending field spelled out in the error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use macwt::channel::InputDistribution;
use macwt::codec::{Conditioning, LeakageScenario};
use macwt::fading::{GainDist, GainModel, PowerPolicy};
use macwt::protocol::SlotConfig;
use macwt::{Error, Result};

/// Experiment mode; one CLI subcommand each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Region,
    Ramp,
    Protocol,
    LeakageAudit,
    Fading,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Region => "region",
            Mode::Ramp => "ramp",
            Mode::Protocol => "protocol",
            Mode::LeakageAudit => "leakage-audit",
            Mode::Fading => "fading",
        }
    }
}

/// Where the channel comes from: a finite transition-law file for the
/// discrete modes, or inline Gaussian noise variances for fading runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChannelSpec {
    /// Finite law in the dense channel JSON format; a relative path is
    /// resolved against the scenario file's directory at load time.
    File { path: PathBuf },
    /// Receiver and eavesdropper noise variances (sigma1^2, sigma2^2).
    Gaussian { noise: (f64, f64) },
}

/// Slot geometry as written in scenarios. The second-part length n2 = n1 * l
/// is derived, so it is not a field here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub n1: u64,
    pub l: u64,
    pub epsilon: f64,
    #[serde(default)]
    pub window: u64,
}

impl SlotSpec {
    pub fn to_config(&self) -> Result<SlotConfig> {
        SlotConfig::new(self.n1, self.l, self.epsilon, self.window)
    }
}

/// Product input distribution for modes that evaluate a single operating
/// point (ramp, protocol, codebook builds). Region mode sweeps a grid
/// instead and ignores this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

/// The four gain processes of a fading scenario. The gain stream is seeded
/// by the scenario seed, so no seed is repeated here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainModelSpec {
    pub h1: GainDist,
    pub h2: GainDist,
    pub g1: GainDist,
    pub g2: GainDist,
}

impl GainModelSpec {
    pub fn with_seed(&self, seed: u64) -> GainModel {
        GainModel { h1: self.h1, h2: self.h2, g1: self.g1, g2: self.g2, seed }
    }
}

/// One codebook to build for an audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSpec {
    pub user: u8,
    pub n: u32,
    pub message_bits: u32,
    pub confusion_bits: u32,
    /// Offset added to the scenario seed for this table's sampling stream;
    /// defaults to the codebook's position in the entry, so sibling tables
    /// never share a stream by accident.
    #[serde(default)]
    pub seed_offset: Option<u64>,
}

/// One exact audit: a scenario shape, optional conditioning, a budget, and
/// the codebooks it needs (none for the one-time pad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    /// Names the row in the audit CSV; letters, digits, `_` and `-` only,
    /// since it also names the codebook artifacts.
    pub label: String,
    pub scenario: LeakageScenario,
    #[serde(default)]
    pub conditioning: Option<Conditioning>,
    pub budget_bits: f64,
    #[serde(default)]
    pub codebooks: Vec<CodebookSpec>,
}

fn default_grid_steps() -> usize {
    // 10 subdivisions = 11 points per input axis
    10
}

/// A fully described run. Optional fields are per-mode; `validate` checks
/// the cross-field constraints and names the violated field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    /// Root of all randomness in the run. Required: reproducibility is part
    /// of every artifact's meaning.
    pub seed: u64,
    /// Default output directory; the --out flag overrides it.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    /// Simplex subdivisions per input axis for region sweeps.
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default)]
    pub input: Option<InputSpec>,
    #[serde(default)]
    pub slot: Option<SlotSpec>,
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub gain_model: Option<GainModelSpec>,
    #[serde(default)]
    pub power_policy: Option<PowerPolicy>,
    #[serde(default)]
    pub audits: Option<Vec<AuditEntry>>,
}

/// Reads, resolves, and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidModel(format!("scenario {}: {e}", path.display()))
    })?;
    let mut sc: Scenario = serde_json::from_str(&text).map_err(|e| {
        // serde_json reports line/column and the missing or bad field
        Error::InvalidModel(format!("scenario {}: {e}", path.display()))
    })?;
    if let Some(ChannelSpec::File { path: p }) = &mut sc.channel {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    /// Canonical JSON emission; `load -> emit -> load` is an identity.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Applies CLI flag overrides. Call before `validate`.
    pub fn with_overrides(mut self, seed: Option<u64>, horizon: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(k) = horizon {
            self.horizon = Some(k);
        }
        self
    }

    /// Cross-field validation; every error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let mode = self.mode;
        let need = |field: &str| {
            Error::InvalidModel(format!("scenario: {} mode requires \"{field}\"", mode.name()))
        };

        match (&self.channel, mode) {
            (None, _) => return Err(need("channel")),
            (Some(ChannelSpec::Gaussian { .. }), Mode::Fading) => {}
            (Some(ChannelSpec::File { .. }), Mode::Fading) => {
                return Err(Error::InvalidModel(
                    "scenario: fading mode takes inline gaussian channel parameters, not a channel file".into(),
                ));
            }
            (Some(ChannelSpec::Gaussian { .. }), _) => {
                return Err(Error::InvalidModel(format!(
                    "scenario: {} mode needs a finite channel file, not gaussian parameters",
                    mode.name()
                )));
            }
            (Some(ChannelSpec::File { path }), _) => {
                if !path.exists() {
                    return Err(Error::InvalidModel(format!(
                        "scenario: channel file {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        if let Some(ChannelSpec::Gaussian { noise }) = &self.channel {
            if !(noise.0.is_finite() && noise.0 > 0.0 && noise.1.is_finite() && noise.1 > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "scenario: channel noise variances must be positive, got {noise:?}"
                )));
            }
        }

        match mode {
            Mode::Region => {
                if self.grid_steps == 0 {
                    return Err(Error::InvalidModel(
                        "scenario: \"grid_steps\" must be at least 1".into(),
                    ));
                }
            }
            Mode::Ramp => {
                self.slot.ok_or_else(|| need("slot"))?.to_config()?;
            }
            Mode::Protocol => {
                self.slot.ok_or_else(|| need("slot"))?.to_config()?;
                self.require_horizon()?;
            }
            Mode::LeakageAudit => {
                let audits = self.audits.as_ref().ok_or_else(|| need("audits"))?;
                if audits.is_empty() {
                    return Err(Error::InvalidModel(
                        "scenario: \"audits\" must name at least one audit".into(),
                    ));
                }
                for entry in audits {
                    entry.validate()?;
                }
            }
            Mode::Fading => {
                let slot = self.slot.ok_or_else(|| need("slot"))?.to_config()?;
                let horizon = self.require_horizon()?;
                let model = self
                    .gain_model
                    .as_ref()
                    .ok_or_else(|| need("gain_model"))?
                    .with_seed(self.seed);
                model.validate()?;
                let policy = self.power_policy.ok_or_else(|| need("power_policy"))?;
                policy.validate(&model)?;
                let _ = (slot, horizon);
            }
        }

        if let Some(input) = &self.input {
            // surfaces the usual sum/positivity errors with the field named
            InputDistribution::new(input.p1.clone(), input.p2.clone()).map_err(|e| {
                Error::InvalidModel(format!("scenario: \"input\": {e}"))
            })?;
        }
        Ok(())
    }

    fn require_horizon(&self) -> Result<u64> {
        match self.horizon {
            Some(k) if k >= 1 => Ok(k),
            Some(_) => Err(Error::InvalidModel(
                "scenario: \"horizon\" must be at least 1".into(),
            )),
            None => Err(Error::InvalidModel(format!(
                "scenario: {} mode requires \"horizon\"",
                self.mode.name()
            ))),
        }
    }
}

impl AuditEntry {
    fn validate(&self) -> Result<()> {
        if self.label.is_empty()
            || !self.label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            return Err(Error::InvalidModel(format!(
                "scenario: audit label {:?} must be nonempty [A-Za-z0-9_-]",
                self.label
            )));
        }
        if !self.budget_bits.is_finite() || self.budget_bits < 0.0 {
            return Err(Error::InvalidModel(format!(
                "scenario: audit {:?}: \"budget_bits\" must be finite and nonnegative",
                self.label
            )));
        }
        let expected: &[u8] = match self.scenario {
            LeakageScenario::OneTimePad { .. } => &[],
            LeakageScenario::WiretapSlot { .. } => &[1, 2],
            LeakageScenario::TwoSlotChain { .. } => &[1, 2, 1, 2],
        };
        let got: Vec<u8> = self.codebooks.iter().map(|c| c.user).collect();
        if got != expected {
            return Err(Error::InvalidModel(format!(
                "scenario: audit {:?}: \"codebooks\" must list users {expected:?} in order, got {got:?}",
                self.label
            )));
        }
        Ok(())
    }
}
