//! Run configuration: TOML (or JSON by extension), unknown keys rejected.

use std::path::Path;

use nlwpi_core::model::{DimerModel, DimerParams, PulseTrain};
use nlwpi_core::oracle::OracleSettings;
use nlwpi_core::propagation::PropagationSettings;
use nlwpi_core::signal::{DelayGrid, Detection};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: DimerParams,
    /// Pulse shapes, carriers, amplitudes and phases. Omitted: the default
    /// train for the model. Delays are overwritten by the scan.
    pub train: Option<PulseTrain>,
    pub propagation: PropagationSettings,
    pub detection: Detection,
    pub include_anomalous_term: bool,
    pub scan: ScanConfig,
    pub pump_probe: PumpProbeConfig,
    pub terms: TermsConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: DimerParams::default(),
            train: None,
            propagation: PropagationSettings::default(),
            detection: Detection::TotalPopulation,
            include_anomalous_term: false,
            scan: ScanConfig::default(),
            pump_probe: PumpProbeConfig::default(),
            terms: TermsConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Delay grid of the interferometric signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// fs
    pub t_ba: Vec<f64>,
    /// fs
    pub t_dc: Vec<f64>,
    /// fs
    pub t_ca: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { t_ba: vec![0.0, 20.0, 40.0, 60.0], t_dc: vec![0.0, 20.0, 40.0, 60.0], t_ca: 200.0 }
    }
}

impl ScanConfig {
    pub fn grid(&self) -> DelayGrid {
        DelayGrid { t_ba: self.t_ba.clone(), t_dc: self.t_dc.clone(), t_ca: self.t_ca }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PumpProbeConfig {
    /// Pump-probe delays (fs).
    pub t_ca: Vec<f64>,
}

impl Default for PumpProbeConfig {
    fn default() -> Self {
        Self { t_ca: (0..20).map(|k| 100.0 + 10.0 * k as f64).collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TermsConfig {
    /// Restrict the listing to one family id, e.g. "++:B|DCAPP".
    pub family: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// (t_BA, t_CA, t_DC) in fs.
    pub points: Vec<[f64; 3]>,
    /// Field scales, largest first.
    pub scales: Vec<f64>,
    /// Overrides the model's basis size for the oracle comparison.
    pub n_vib_per_mode: Option<usize>,
    pub min_order: f64,
    pub max_error: f64,
    pub oracle: OracleSettings,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            points: vec![[60.0, 180.0, 60.0], [75.0, 210.0, 90.0], [110.0, 300.0, 55.0]],
            scales: vec![1e-3, 5e-4, 2.5e-4],
            n_vib_per_mode: Some(6),
            min_order: 1.8,
            max_error: 1e-3,
            oracle: OracleSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The train actually used: the configured one or the model default.
    pub fn resolved_train(&self) -> PulseTrain {
        self.train.clone().unwrap_or_else(|| PulseTrain::default_for(&self.model))
    }

    /// Fills every defaulted field so the echo is self-contained, and checks
    /// the values.
    pub fn resolve(mut self) -> Result<(Self, DimerModel), CliError> {
        self.train = Some(self.resolved_train());
        self.propagation.validate()?;
        let model = DimerModel::new(self.model.clone())?;
        let train = self.train.as_ref().expect("just set");
        train.validate()?;
        train.validate_control(&model)?;
        if let Detection::Exciton(k) = self.detection {
            if k > 1 {
                return Err(CliError::Config(format!("detection exciton index {k} out of range (0 or 1)")));
            }
        }
        Ok((self, model))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips_through_toml_and_json() {
        let (cfg, _) = RunConfig::default().resolve().unwrap();
        assert!(cfg.train.is_some());
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn empty_file_means_defaults_and_unknown_keys_fail() {
        assert_eq!(toml::from_str::<RunConfig>("").unwrap(), RunConfig::default());
        assert!(toml::from_str::<RunConfig>("[verify.oracle]\nrtoll = 1.0\n").is_err());
        assert!(toml::from_str::<RunConfig>("detection = { site = \"Site1\" }\n").is_ok());
    }

    #[test]
    fn resonant_control_pulse_is_a_config_error() {
        let mut cfg = RunConfig::default();
        let mut train = cfg.resolved_train();
        train.pulses[0].carrier_freq = 12400.0;
        cfg.train = Some(train);
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }
}
