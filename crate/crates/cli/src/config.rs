//! Experiment configuration: one JSON file, validated end to end before
//! any computation. Errors carry the path of the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use paralens::backend::OptimiserKind;
use paralens::loss::{LossKind, RateKind};
use paralens::optim::{self, AdamVariant};
use paralens::smooth::LayerSpec;
use paralens::tensor::Pointwise;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Smooth,
    Z2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Dream,
    Gan,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Train => "train",
            Mode::Dream => "dream",
            Mode::Gan => "gan",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Sigmoid,
    Relu,
}

impl From<Activation> for Pointwise {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Identity => Pointwise::Identity,
            Activation::Sigmoid => Pointwise::Sigmoid,
            Activation::Relu => Pointwise::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerConfig {
    Linear {
        input: usize,
        output: usize,
    },
    Bias {
        width: usize,
    },
    Activation {
        activation: Activation,
        width: usize,
    },
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    Conv {
        kernel: usize,
        image: usize,
    },
    Maxpool {
        window: usize,
        output: usize,
    },
    Cpr {
        kernel: usize,
        image: usize,
        window: usize,
    },
    Softmax {
        width: usize,
    },
    Reshape {
        from: Vec<usize>,
        to: Vec<usize>,
    },
}

impl LayerConfig {
    pub fn spec(&self) -> LayerSpec {
        match self.clone() {
            LayerConfig::Linear { input, output } => LayerSpec::Linear { input, output },
            LayerConfig::Bias { width } => LayerSpec::Bias { width },
            LayerConfig::Activation { activation, width } => LayerSpec::Activation {
                kind: activation.into(),
                width,
            },
            LayerConfig::Dense {
                input,
                output,
                activation,
            } => LayerSpec::Dense {
                input,
                output,
                activation: activation.into(),
            },
            LayerConfig::Conv { kernel, image } => LayerSpec::Conv { kernel, image },
            LayerConfig::Maxpool { window, output } => LayerSpec::MaxPool { window, output },
            LayerConfig::Cpr {
                kernel,
                image,
                window,
            } => LayerSpec::Cpr {
                kernel,
                image,
                window,
            },
            LayerConfig::Softmax { width } => LayerSpec::Softmax { width },
            LayerConfig::Reshape { from, to } => LayerSpec::Reshape { from, to },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Layers(Vec<LayerConfig>),
    Circuit(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Quadratic,
    SoftmaxCrossEntropy,
    Dot,
    Xor,
}

impl From<LossName> for LossKind {
    fn from(l: LossName) -> Self {
        match l {
            LossName::Quadratic => LossKind::Quadratic,
            LossName::SoftmaxCrossEntropy => LossKind::SoftmaxCrossEntropy,
            LossName::Dot => LossKind::Dot,
            LossName::Xor => LossKind::Xor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    /// The constant change injected into the loss; its sign pairs with the
    /// optimiser's polarity.
    Constant { value: f64 },
    Identity,
    Proportional { epsilon: f64 },
}

impl From<RateConfig> for RateKind {
    fn from(r: RateConfig) -> Self {
        match r {
            RateConfig::Constant { value } => RateKind::Constant(value),
            RateConfig::Identity => RateKind::Identity,
            RateConfig::Proportional { epsilon } => RateKind::Proportional(epsilon),
        }
    }
}

fn gamma() -> f64 {
    optim::DEFAULT_GAMMA
}
fn beta1() -> f64 {
    optim::DEFAULT_BETA1
}
fn beta2() -> f64 {
    optim::DEFAULT_BETA2
}
fn adam_eps() -> f64 {
    optim::DEFAULT_ADAM_EPS
}
fn adam_delta() -> f64 {
    optim::DEFAULT_ADAM_DELTA
}
fn adagrad_eps() -> f64 {
    optim::DEFAULT_ADAGRAD_EPS
}
fn adagrad_delta() -> f64 {
    optim::DEFAULT_ADAGRAD_DELTA
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimiserConfig {
    Ascent,
    Descent,
    Momentum {
        #[serde(default = "gamma")]
        gamma: f64,
    },
    Nesterov {
        #[serde(default = "gamma")]
        gamma: f64,
    },
    Adagrad {
        #[serde(default = "adagrad_eps")]
        eps: f64,
        #[serde(default = "adagrad_delta")]
        delta: f64,
    },
    Adam {
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
        #[serde(default = "adam_delta")]
        delta: f64,
        #[serde(default)]
        corrected_state: bool,
    },
}

impl From<OptimiserConfig> for OptimiserKind {
    fn from(o: OptimiserConfig) -> Self {
        match o {
            OptimiserConfig::Ascent => OptimiserKind::Ascent,
            OptimiserConfig::Descent => OptimiserKind::Descent,
            OptimiserConfig::Momentum { gamma } => OptimiserKind::Momentum { gamma },
            OptimiserConfig::Nesterov { gamma } => OptimiserKind::Nesterov { gamma },
            OptimiserConfig::Adagrad { eps, delta } => OptimiserKind::Adagrad { eps, delta },
            OptimiserConfig::Adam {
                beta1,
                beta2,
                eps,
                delta,
                corrected_state,
            } => OptimiserKind::Adam {
                beta1,
                beta2,
                eps,
                delta,
                variant: if corrected_state {
                    AdamVariant::CorrectedState
                } else {
                    AdamVariant::Standard
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
        /// Keep only the first `limit` training items.
        limit: Option<usize>,
    },
    /// Header row required; the last `label_columns` columns are labels.
    Csv {
        train: PathBuf,
        test: Option<PathBuf>,
        label_columns: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DreamConfig {
    /// The `b_t` paired with the prediction by the dot loss.
    pub target: Vec<f64>,
    pub steps: usize,
    /// Starting input; zeros when absent.
    pub initial_input: Option<Vec<f64>>,
    /// Frozen model parameters; seeded initialisation when absent.
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    pub generator: Vec<LayerConfig>,
    pub discriminator: Vec<LayerConfig>,
    /// Constant learning rate; a power of two keeps the step exact under
    /// rescaling.
    pub alpha: f64,
    pub steps: usize,
    /// Real samples are drawn from `N(real_mean, real_std²)` per coordinate.
    pub real_mean: f64,
    pub real_std: f64,
}

fn default_backend() -> BackendName {
    BackendName::Smooth
}
fn default_epochs() -> usize {
    1
}
fn default_batch() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_backend")]
    pub backend: BackendName,
    pub mode: Option<Mode>,
    pub model: Option<ModelConfig>,
    pub loss: Option<LossName>,
    pub rate: Option<RateConfig>,
    pub optimiser: Option<OptimiserConfig>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    pub data: Option<DataConfig>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub dream: Option<DreamConfig>,
    pub gan: Option<GanConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses JSON text. Relative input paths resolve against `base_dir`;
    /// the output directory is relative to the working directory.
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            invalid(if path == "." { "<root>".into() } else { path }, inner.to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("<file>", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_str(&text, &base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(e) = o.epochs {
            self.epochs = e;
        }
        if let Some(b) = o.batch_size {
            self.batch_size = b;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
