//! TOML experiment configuration. Every field has a default, so an empty file
//! is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crossbar::NoiseResolution;
use crate::error::{RacaError, Result};
use crate::network::{LayerSettings, NetworkSpec};
use crate::neurons::{CoincidencePolicy, SigmoidNeuronConfig, WtaConfig, PROBIT_LOGIT_LAMBDA, WTA_LAMBDA};
use crate::noise::DEFAULT_TEMPERATURE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub sigmoid_sweep: SweepConfig,
    pub wta_raster: RasterConfig,
    pub accuracy: AccuracyConfig,
    pub cost: CostConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 0,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            sigmoid_sweep: SweepConfig::default(),
            wta_raster: RasterConfig::default(),
            accuracy: AccuracyConfig::default(),
            cost: CostConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the four standard MNIST IDX files.
    pub mnist_dir: PathBuf,
    /// Weight archive; defaults to `weights.bin` in the output directory.
    pub weights: Option<PathBuf>,
    /// Test images used by the accuracy and cost runners; 0 means all.
    pub test_limit: usize,
    /// Training images used by the trainer; 0 means all.
    pub train_limit: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            mnist_dir: PathBuf::from("data/mnist"),
            weights: None,
            test_limit: 1000,
            train_limit: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub dims: Vec<usize>,
    pub g_min: f64,
    pub g_max: f64,
    pub v_r: f64,
    pub temperature: f64,
    pub w_limit: f64,
    pub hidden_lambda: f64,
    pub output_lambda: f64,
    pub v_th0: f64,
    pub v_supply: f64,
    pub max_steps: usize,
    pub coincidence: CoincidencePolicy,
    pub noise_resolution: NoiseResolution,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let layer = LayerSettings::default();
        let wta = WtaConfig::default();
        Self {
            dims: vec![784, 64, 32, 10],
            g_min: layer.g_min,
            g_max: layer.g_max,
            v_r: layer.v_r,
            temperature: DEFAULT_TEMPERATURE,
            w_limit: layer.w_limit,
            hidden_lambda: PROBIT_LOGIT_LAMBDA,
            output_lambda: WTA_LAMBDA,
            v_th0: wta.v_th0,
            v_supply: wta.v_supply,
            max_steps: wta.max_steps,
            coincidence: wta.coincidence,
            noise_resolution: NoiseResolution::PerColumn,
        }
    }
}

impl NetworkConfig {
    /// Network spec with both calibration lambdas multiplied by
    /// `noise_scale`; a scale of 0 switches noise off.
    pub fn spec(&self, v_th0: f64, noise_scale: f64) -> Result<NetworkSpec> {
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(RacaError::Config(format!("noise scale must be >= 0, got {noise_scale}")));
        }
        let layer = LayerSettings {
            w_limit: self.w_limit,
            g_min: self.g_min,
            g_max: self.g_max,
            v_r: self.v_r,
            temperature: self.temperature,
            bandwidth: (noise_scale == 0.0).then_some(0.0),
        };
        let scale = if noise_scale == 0.0 { 1.0 } else { noise_scale };
        let spec = NetworkSpec {
            layer_dims: self.dims.clone(),
            layers: vec![layer; self.dims.len().saturating_sub(1)],
            hidden: SigmoidNeuronConfig {
                calibration_lambda: self.hidden_lambda * scale,
                comparator_threshold: 0.0,
            },
            output: WtaConfig {
                calibration_lambda: self.output_lambda * scale,
                v_th0,
                v_supply: self.v_supply,
                max_steps: self.max_steps,
                coincidence: self.coincidence,
            },
            noise_resolution: self.noise_resolution,
        };
        spec.validate().map_err(|e| RacaError::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.3,
            batch_size: 32,
        }
    }
}

/// Which physical knob a sigmoid sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Read voltage in volts.
    #[serde(rename = "v_r")]
    VR,
    /// Factor applied to both ends of the conductance window.
    G0,
    /// Factor applied to the calibrated bandwidth.
    Bandwidth,
    /// Devices per column; the per-device weight scale is held fixed.
    NCol,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::VR => "v_r",
            SweepAxis::G0 => "g0",
            SweepAxis::Bandwidth => "bandwidth",
            SweepAxis::NCol => "n_col",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Comparator trials per (knob, logit) point.
    pub trials: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub z_count: usize,
    /// Devices per column at the base setting.
    pub n_rows: usize,
    pub g_min: f64,
    pub g_max: f64,
    /// Base read voltage; the bandwidth is calibrated here.
    pub v_r: f64,
    pub temperature: f64,
    pub lambda: f64,
    pub noise_resolution: NoiseResolution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::VR,
            values: vec![0.05, 0.1, 0.2],
            trials: 10_000,
            z_min: -6.0,
            z_max: 6.0,
            z_count: 25,
            n_rows: 16,
            g_min: 1.0e-6,
            g_max: 1.0e-5,
            v_r: 0.1,
            temperature: DEFAULT_TEMPERATURE,
            lambda: PROBIT_LOGIT_LAMBDA,
            noise_resolution: NoiseResolution::PerDevice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    /// Explicit logits; when empty, `n_neurons` logits are drawn uniformly
    /// from `[-logit_bound, logit_bound]`.
    pub logits: Vec<f64>,
    pub n_neurons: usize,
    pub logit_bound: f64,
    /// Decisions written out step by step.
    pub traced_decisions: usize,
    /// Decisions behind the empirical win distribution.
    pub decisions: usize,
    pub n_rows: usize,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            logits: Vec::new(),
            n_neurons: 10,
            logit_bound: 3.0,
            traced_decisions: 100,
            decisions: 10_000,
            n_rows: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyConfig {
    pub trial_grid: Vec<usize>,
    pub v_th0: Vec<f64>,
    /// Multipliers on both calibration lambdas; 0 disables noise.
    pub noise_scales: Vec<f64>,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            trial_grid: (0..=8).map(|k| 1 << k).collect(),
            v_th0: vec![0.05, 0.0],
            noise_scales: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub trials: usize,
    /// Inputs to run; 0 uses `data.test_limit`.
    pub inputs: usize,
    pub energies: Option<EventEnergies>,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            trials: 1,
            inputs: 1,
            energies: None,
        }
    }
}

/// Per-event energies in picojoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEnergies {
    pub dac: f64,
    pub mac: f64,
    pub comparator: f64,
    pub adc: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| RacaError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RacaError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn weights_path(&self) -> PathBuf {
        self.data.weights.clone().unwrap_or_else(|| self.out_dir.join("weights.bin"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RacaError::Config(m));
        if self.network.dims.len() < 2 {
            return bad(format!("network.dims needs at least two entries, got {:?}", self.network.dims));
        }
        self.network.spec(self.network.v_th0, 1.0)?;
        let s = &self.sigmoid_sweep;
        if s.values.is_empty() {
            return bad("sigmoid_sweep.values is empty".into());
        }
        if s.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad(format!("sigmoid_sweep.values must be positive, got {:?}", s.values));
        }
        if s.axis == SweepAxis::NCol && s.values.iter().any(|v| v.fract() != 0.0 || *v < 2.0 || *v % 2.0 != 0.0) {
            return bad("n_col sweep values must be even integers >= 2".into());
        }
        if s.trials == 0 || s.z_count < 2 || !(s.z_max > s.z_min) {
            return bad("sigmoid_sweep needs trials > 0, z_count >= 2 and z_max > z_min".into());
        }
        let r = &self.wta_raster;
        let n = if r.logits.is_empty() { r.n_neurons } else { r.logits.len() };
        if n < 2 {
            return bad("wta_raster needs at least two neurons".into());
        }
        if r.decisions == 0 {
            return bad("wta_raster.decisions must be positive".into());
        }
        let a = &self.accuracy;
        if a.trial_grid.is_empty() || a.trial_grid.contains(&0) {
            return bad("accuracy.trial_grid must be non-empty and positive".into());
        }
        if a.v_th0.is_empty() || a.noise_scales.is_empty() {
            return bad("accuracy needs at least one v_th0 and one noise scale".into());
        }
        for &v in &a.v_th0 {
            self.network.spec(v, 1.0)?;
        }
        for &ns in &a.noise_scales {
            self.network.spec(self.network.v_th0, ns)?;
        }
        if self.cost.trials == 0 {
            return bad("cost.trials must be positive".into());
        }
        Ok(())
    }
}
