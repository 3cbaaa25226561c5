//! Experiment execution. Every mode validates the whole configuration
//! (models, losses, optimisers, file references) before loading data, and
//! checks data widths against the model before the first step.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use paralens::backend::{Backend, OptimiserKind};
use paralens::boolean::Circuit;
use paralens::check::{self, FD_STEP, FD_TOLERANCE, REAL_AXIOM_TOLERANCE};
use paralens::loss::{LossKind, RateKind};
use paralens::smooth::LayerSpec;
use paralens::train::{self, Dataset, FitConfig, MetricRow};
use paralens::{ParametricLens, Scalar, Shape, Tensor, Z2};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::config::{invalid, BackendName, DataConfig, ExperimentConfig, LayerConfig, Mode, ModelConfig};
use crate::data;
use crate::error::CliError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const PARAMS_FILE: &str = "params.bin";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DREAM_TRAJECTORY_FILE: &str = "dream_trajectory.csv";
pub const DREAM_INPUT_FILE: &str = "dream_input.bin";
pub const GENERATOR_FILE: &str = "generator_params.bin";
pub const DISCRIMINATOR_FILE: &str = "discriminator_params.bin";

/// Builds a layer chain, naming the first layer whose construction fails or
/// whose input does not match its predecessor's output.
pub fn build_chain(layers: &[LayerConfig], path: &str) -> Result<ParametricLens<f64>, CliError> {
    if layers.is_empty() {
        return Err(invalid(path, "at least one layer is required"));
    }
    let mut built: Vec<ParametricLens<f64>> = Vec::with_capacity(layers.len());
    for (i, l) in layers.iter().enumerate() {
        let at = format!("{path}[{i}]");
        let f = l.spec().build().map_err(|e| invalid(&at, e.to_string()))?;
        if let Some(prev) = built.last() {
            if prev.dst() != f.src() {
                return Err(invalid(
                    at,
                    format!(
                        "expects input {}, previous layer produces {}",
                        f.src().point,
                        prev.dst().point
                    ),
                ));
            }
        }
        built.push(f);
    }
    ParametricLens::compose_all(&built).map_err(|e| invalid(path, e.to_string()))
}

pub fn layer_specs(layers: &[LayerConfig]) -> Vec<LayerSpec> {
    layers.iter().map(LayerConfig::spec).collect()
}

fn check_mode(cfg: &ExperimentConfig, mode: Mode) -> Result<(), CliError> {
    match cfg.mode {
        Some(m) if m != mode => Err(invalid(
            "mode",
            format!("config is for `{m}`, invoked as `{mode}`"),
        )),
        _ => Ok(()),
    }
}

fn existing(cfg: &ExperimentConfig, p: &Path, field: &str) -> Result<PathBuf, CliError> {
    let full = cfg.resolve(p);
    if !full.is_file() {
        return Err(invalid(field, format!("file {} does not exist", full.display())));
    }
    Ok(full)
}

/// A validated model on either backend.
pub enum Model {
    Smooth(ParametricLens<f64>),
    Boolean(ParametricLens<Z2>),
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<Model, CliError> {
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| invalid("model", "a model is required"))?;
    match (cfg.backend, model) {
        (BackendName::Smooth, ModelConfig::Layers(layers)) => {
            Ok(Model::Smooth(build_chain(layers, "model.layers")?))
        }
        (BackendName::Z2, ModelConfig::Circuit(path)) => {
            let full = existing(cfg, path, "model.circuit")?;
            let text = std::fs::read_to_string(&full)
                .map_err(|e| invalid("model.circuit", e.to_string()))?;
            let c = Circuit::parse(&text).map_err(|e| invalid("model.circuit", e.to_string()))?;
            Ok(Model::Boolean(
                c.build().map_err(|e| invalid("model.circuit", e.to_string()))?,
            ))
        }
        (BackendName::Smooth, ModelConfig::Circuit(_)) => Err(invalid(
            "model",
            "circuit models need `\"backend\": \"z2\"`",
        )),
        (BackendName::Z2, ModelConfig::Layers(_)) => Err(invalid(
            "model",
            "the z2 backend takes a `circuit` model",
        )),
    }
}

/// Loss, rate and optimiser kinds, each checked against the backend and
/// the port it acts on.
struct Kinds {
    loss: LossKind,
    rate: RateKind,
    optimiser: OptimiserKind,
}

fn kinds<S: Backend>(
    cfg: &ExperimentConfig,
    width: usize,
    port: &Shape,
    default_loss: Option<LossKind>,
) -> Result<Kinds, CliError> {
    let loss = cfg
        .loss
        .map(LossKind::from)
        .or(default_loss)
        .ok_or_else(|| invalid("loss", "a loss is required"))?;
    S::loss(loss, width).map_err(|e| invalid("loss", e.to_string()))?;
    let rate: RateKind = cfg
        .rate
        .ok_or_else(|| invalid("rate", "a learning rate is required"))?
        .into();
    S::rate(rate, &loss.output_shape(width)).map_err(|e| invalid("rate", e.to_string()))?;
    let optimiser: OptimiserKind = cfg
        .optimiser
        .ok_or_else(|| invalid("optimiser", "an optimiser is required"))?
        .into();
    S::optimiser(&optimiser, port).map_err(|e| invalid("optimiser", e.to_string()))?;
    Ok(Kinds {
        loss,
        rate,
        optimiser,
    })
}

fn create_output(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output {
        file: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        file: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_tensor<S: Scalar>(path: &Path, t: &Tensor<S>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| output_error(path, e))?);
    train::write_params(&mut w, t).map_err(|e| output_error(path, e))?;
    w.flush().map_err(|e| output_error(path, e))
}

fn read_tensor<S: Scalar>(path: &Path) -> Result<Tensor<S>, CliError> {
    let mut f = File::open(path)
        .map_err(|e| CliError::data(path.display(), crate::error::DataError::Io(e.to_string())))?;
    train::read_params(&mut f).map_err(|e| {
        CliError::data(path.display(), crate::error::DataError::Io(e.to_string()))
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| output_error(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| output_error(path, e))
}

/// `epoch,step,loss,accuracy`; accuracy is empty where undefined.
pub struct MetricsWriter {
    path: PathBuf,
    w: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_path(&path).map_err(|e| output_error(&path, e))?;
        w.write_record(["epoch", "step", "loss", "accuracy"])
            .map_err(|e| output_error(&path, e))?;
        Ok(MetricsWriter { path, w })
    }

    pub fn row(&mut self, r: &MetricRow) -> Result<(), CliError> {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        self.w
            .write_record([
                r.epoch.to_string(),
                r.step.to_string(),
                r.loss.to_string(),
                acc,
            ])
            .map_err(|e| output_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush().map_err(|e| output_error(&self.path, e))
    }
}

fn load_data<S: Scalar>(
    cfg: &ExperimentConfig,
) -> Result<(Dataset<S>, Option<Dataset<S>>), CliError> {
    let dc = cfg
        .data
        .as_ref()
        .ok_or_else(|| invalid("data", "a dataset is required"))?;
    match dc {
        DataConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            limit,
        } => {
            if S::KIND != paralens::ScalarKind::Real64 {
                return Err(invalid("data.format", "IDX images need the smooth backend"));
            }
            let ti = existing(cfg, train_images, "data.train_images")?;
            let tl = existing(cfg, train_labels, "data.train_labels")?;
            let test = match (test_images, test_labels) {
                (Some(i), Some(l)) => Some((
                    existing(cfg, i, "data.test_images")?,
                    existing(cfg, l, "data.test_labels")?,
                )),
                (None, None) => None,
                (Some(_), None) => {
                    return Err(invalid("data.test_labels", "test images need test labels"))
                }
                (None, Some(_)) => {
                    return Err(invalid("data.test_images", "test labels need test images"))
                }
            };
            let load = |i: &Path, l: &Path, lim| {
                data::load_idx(i, l, lim).map_err(|(f, e)| CliError::data(f, e))
            };
            let train = load(&ti, &tl, *limit)?;
            let test = test.map(|(i, l)| load(&i, &l, None)).transpose()?;
            Ok((reals_as::<S>(train), test.map(reals_as::<S>)))
        }
        DataConfig::Csv {
            train,
            test,
            label_columns,
        } => {
            let tr = existing(cfg, train, "data.train")?;
            let te = test
                .as_ref()
                .map(|t| existing(cfg, t, "data.test"))
                .transpose()?;
            let load = |p: &Path| {
                data::load_csv::<S>(p, *label_columns).map_err(|e| CliError::data(p.display(), e))
            };
            let train = load(&tr)?;
            let test = te.map(|p| load(&p)).transpose()?;
            Ok((train, test))
        }
    }
}

fn reals_as<S: Scalar>(d: Dataset<f64>) -> Dataset<S> {
    let conv = |v: Vec<Tensor<f64>>| -> Vec<Tensor<S>> {
        v.into_iter()
            .map(|t| {
                let v = t.data().iter().map(|&x| S::from_f64(x)).collect();
                Tensor::new(t.shape().clone(), v).expect("same length")
            })
            .collect()
    };
    Dataset {
        inputs: conv(d.inputs),
        labels: conv(d.labels),
    }
}

fn check_widths<S: Scalar>(
    data: &Dataset<S>,
    model: &ParametricLens<S>,
    field: &str,
) -> Result<(), CliError> {
    let (a, b) = (model.src().point.numel(), model.dst().point.numel());
    if let (Some(x), Some(y)) = (data.inputs.first(), data.labels.first()) {
        if x.numel() != a || y.numel() != b {
            return Err(invalid(
                field,
                format!(
                    "examples have {} inputs and {} labels, model maps {} to {}",
                    x.numel(),
                    y.numel(),
                    a,
                    b
                ),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seconds: f64,
    pub final_epoch_loss: Option<f64>,
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainSummary, CliError> {
    check_mode(cfg, Mode::Train)?;
    match build_model(cfg)? {
        Model::Smooth(m) => train_with::<f64>(cfg, m),
        Model::Boolean(m) => train_with::<Z2>(cfg, m),
    }
}

fn train_with<S: Backend>(
    cfg: &ExperimentConfig,
    model: ParametricLens<S>,
) -> Result<TrainSummary, CliError> {
    let width = model.dst().point.numel();
    let k = kinds::<S>(cfg, width, &model.param().point, None)?;
    if cfg.batch_size == 0 {
        return Err(invalid("batch_size", "must be at least 1"));
    }
    let plan = train::assemble_supervised(&model, k.loss, k.rate, &k.optimiser, cfg.batch_size)
        .map_err(|e| invalid("model", e.to_string()))?;
    let (train_data, test_data) = load_data::<S>(cfg)?;
    check_widths(&train_data, &model, "data.train")?;
    if let Some(t) = &test_data {
        check_widths(t, &model, "data.test")?;
    }
    if train_data.len() < cfg.batch_size {
        return Err(invalid(
            "batch_size",
            format!("{} exceeds the {} training examples", cfg.batch_size, train_data.len()),
        ));
    }

    let out = &cfg.output_dir;
    create_output(out)?;
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    let init = plan.initial_state(model.init_params(&mut rng));
    let fit_cfg = FitConfig {
        epochs: cfg.epochs,
        seed: cfg.seed,
        shuffle: cfg.shuffle,
    };
    let mut metrics = MetricsWriter::create(out.join(METRICS_FILE))?;
    let mut write_err = None;
    let mut epoch_sum = (0usize, 0.0f64, 0usize);
    let report = |e: usize, sum: f64, n: usize| {
        eprintln!("epoch {}/{}: mean loss {:.6}", e + 1, cfg.epochs, sum / n as f64);
    };
    let started = Instant::now();
    let outcome = train::fit(&plan, &train_data, &fit_cfg, init, |row| {
        if row.epoch != epoch_sum.0 && epoch_sum.2 > 0 {
            report(epoch_sum.0, epoch_sum.1, epoch_sum.2);
            epoch_sum = (row.epoch, 0.0, 0);
        }
        epoch_sum.0 = row.epoch;
        epoch_sum.1 += row.loss;
        epoch_sum.2 += 1;
        if write_err.is_none() {
            write_err = metrics.row(row).err();
        }
    })?;
    if epoch_sum.2 > 0 {
        report(epoch_sum.0, epoch_sum.1, epoch_sum.2);
    }
    let seconds = started.elapsed().as_secs_f64();
    if let Some(e) = write_err {
        return Err(e);
    }
    metrics.finish()?;

    let st = &outcome.state;
    write_tensor(&out.join(PARAMS_FILE), &st.params)?;
    let loss_lens = S::loss(k.loss, width)?;
    let exposed = plan.optimiser().get(&st.opt_state, &st.params)?;
    let on_train = train::evaluate(&model, &loss_lens, &exposed, &train_data)?;
    let on_test = test_data
        .as_ref()
        .map(|t| train::evaluate(&model, &loss_lens, &exposed, t))
        .transpose()?;
    let last_epoch = outcome.trace.last().map(|r| r.epoch);
    let final_epoch_loss = last_epoch.map(|e| {
        let rows: Vec<f64> = outcome
            .trace
            .iter()
            .filter(|r| r.epoch == e)
            .map(|r| r.loss)
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    });
    let summary = TrainSummary {
        steps: st.t,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seconds,
        final_epoch_loss,
        train_loss: on_train.loss,
        train_accuracy: on_train.accuracy,
        test_loss: on_test.as_ref().map(|e| e.loss),
        test_accuracy: on_test.and_then(|e| e.accuracy),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DreamSummary {
    pub steps: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
}

pub fn dream(cfg: &ExperimentConfig) -> Result<DreamSummary, CliError> {
    check_mode(cfg, Mode::Dream)?;
    match build_model(cfg)? {
        Model::Smooth(m) => dream_with::<f64>(cfg, m),
        Model::Boolean(m) => dream_with::<Z2>(cfg, m),
    }
}

fn dream_with<S: Backend>(
    cfg: &ExperimentConfig,
    model: ParametricLens<S>,
) -> Result<DreamSummary, CliError> {
    let dc = cfg
        .dream
        .as_ref()
        .ok_or_else(|| invalid("dream", "a `dream` section is required"))?;
    let (a_shape, width) = (model.src().point.clone(), model.dst().point.numel());
    let k = kinds::<S>(cfg, width, &a_shape, Some(LossKind::Dot))?;
    if dc.target.len() != width {
        return Err(invalid(
            "dream.target",
            format!("model output has width {width}, target has {}", dc.target.len()),
        ));
    }
    let to_s = |v: &[f64]| v.iter().map(|&x| S::from_f64(x)).collect::<Vec<S>>();
    let target = Tensor::new(model.dst().point.clone(), to_s(&dc.target))?;
    let mut a = match &dc.initial_input {
        Some(v) if v.len() != a_shape.numel() => {
            return Err(invalid(
                "dream.initial_input",
                format!("model input has {} entries, got {}", a_shape.numel(), v.len()),
            ))
        }
        Some(v) => Tensor::new(a_shape.clone(), to_s(v))?,
        None => Tensor::zeros(a_shape.clone()),
    };
    let plan = train::assemble_dream(&model, k.loss, k.rate, &k.optimiser)
        .map_err(|e| invalid("model", e.to_string()))?;
    let p = match &dc.params {
        Some(path) => {
            let full = existing(cfg, path, "dream.params")?;
            let t: Tensor<S> = read_tensor(&full)?;
            if t.numel() != model.param().point.numel() {
                return Err(invalid(
                    "dream.params",
                    format!(
                        "model has {} parameters, file holds {}",
                        model.param().point.numel(),
                        t.numel()
                    ),
                ));
            }
            t.reshape(model.param().point.clone())?
        }
        None => model.init_params(&mut SplitMix64::seed_from_u64(cfg.seed)),
    };

    let out = &cfg.output_dir;
    create_output(out)?;
    let objective = |a: &Tensor<S>| -> Result<f64, CliError> {
        let y = model.get(&p, a)?;
        Ok(y.data()
            .iter()
            .zip(target.data())
            .map(|(y, t)| y.to_f64() * t.to_f64())
            .sum())
    };
    let traj_path = out.join(DREAM_TRAJECTORY_FILE);
    let mut traj = csv::Writer::from_path(&traj_path).map_err(|e| output_error(&traj_path, e))?;
    let mut header = vec!["step".to_string(), "objective".to_string()];
    header.extend((0..a.numel()).map(|i| format!("a{i}")));
    traj.write_record(&header).map_err(|e| output_error(&traj_path, e))?;
    let mut metrics = MetricsWriter::create(out.join(METRICS_FILE))?;
    let mut s = plan.optimiser().initial_state();
    let mut record = |step: usize, a: &Tensor<S>| -> Result<f64, CliError> {
        let v = objective(a)?;
        if !v.is_finite() {
            return Err(CliError::Numeric(format!("objective is {v} at step {step}")));
        }
        let mut rec = vec![step.to_string(), v.to_string()];
        rec.extend(a.data().iter().map(|x| x.to_f64().to_string()));
        traj.write_record(&rec).map_err(|e| output_error(&traj_path, e))?;
        metrics.row(&MetricRow {
            epoch: 0,
            step: step as u64,
            loss: v,
            accuracy: None,
        })?;
        Ok(v)
    };
    let initial = record(0, &a)?;
    let mut last = initial;
    for step in 1..=dc.steps {
        let (s2, a2) = plan.step(&s, &a, &p, &target)?;
        s = s2;
        a = a2;
        last = record(step, &a)?;
    }
    traj.flush().map_err(|e| output_error(&traj_path, e))?;
    metrics.finish()?;
    write_tensor(&out.join(DREAM_INPUT_FILE), &a)?;
    write_tensor(&out.join(PARAMS_FILE), &p)?;
    let summary = DreamSummary {
        steps: dc.steps,
        initial_objective: initial,
        final_objective: last,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GanSummary {
    pub steps: usize,
    pub real_mean: f64,
    /// Mean generator output over 1000 fresh latent draws.
    pub generated_mean: f64,
}

pub fn gan(cfg: &ExperimentConfig) -> Result<GanSummary, CliError> {
    check_mode(cfg, Mode::Gan)?;
    if cfg.backend != BackendName::Smooth {
        return Err(invalid("backend", "GAN training needs the smooth backend"));
    }
    let gc = cfg
        .gan
        .as_ref()
        .ok_or_else(|| invalid("gan", "a `gan` section is required"))?;
    let g = build_chain(&gc.generator, "gan.generator")?;
    let d = build_chain(&gc.discriminator, "gan.discriminator")?;
    if !(gc.real_std >= 0.0) || !gc.real_std.is_finite() {
        return Err(invalid("gan.real_std", "must be a finite non-negative number"));
    }
    if !gc.alpha.is_finite() {
        return Err(invalid("gan.alpha", "must be finite"));
    }
    let plan = train::assemble_gan(&g, &d, gc.alpha).map_err(|e| invalid("gan", e.to_string()))?;

    let out = &cfg.output_dir;
    create_output(out)?;
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    let mut p = g.init_params(&mut rng);
    let mut q = d.init_params(&mut rng);
    let real = Normal::new(gc.real_mean, gc.real_std).expect("std checked");
    let (zs, xs) = (g.src().point.clone(), d.src().point.clone());
    let mut sample = |shape: &Shape, dist: &dyn Fn(&mut SplitMix64) -> f64| {
        let v = (0..shape.numel()).map(|_| dist(&mut rng)).collect();
        Tensor::new(shape.clone(), v).expect("length matches")
    };
    let latent = |r: &mut SplitMix64| StandardNormal.sample(r);
    let from_real = |r: &mut SplitMix64| real.sample(r);
    let mut metrics = MetricsWriter::create(out.join(METRICS_FILE))?;
    for step in 1..=gc.steps {
        let z = sample(&zs, &latent);
        let x_r = sample(&xs, &from_real);
        let fake = d.get(&q, &g.get(&p, &z)?)?.data()[0];
        let genuine = d.get(&q, &x_r)?.data()[0];
        let value = fake - genuine;
        let (p2, q2) = plan.step(&p, &q, &z, &x_r)?;
        if !value.is_finite()
            || p2.data().iter().chain(q2.data()).any(|v| !v.is_finite())
        {
            return Err(CliError::Numeric(format!("non-finite value at step {step}")));
        }
        p = p2;
        q = q2;
        metrics.row(&MetricRow {
            epoch: 0,
            step: step as u64,
            loss: value,
            accuracy: None,
        })?;
    }
    metrics.finish()?;
    write_tensor(&out.join(GENERATOR_FILE), &p)?;
    write_tensor(&out.join(DISCRIMINATOR_FILE), &q)?;
    let mut total = 0.0;
    let draws = 1000;
    for _ in 0..draws {
        let z = sample(&zs, &latent);
        let y = g.get(&p, &z)?;
        total += y.data().iter().sum::<f64>() / y.numel() as f64;
    }
    let summary = GanSummary {
        steps: gc.steps,
        real_mean: gc.real_mean,
        generated_mean: total / draws as f64,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// One line of the `check` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub instances: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub note: String,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub seed: u64,
    pub instances: usize,
    pub composites: usize,
    pub circuits: usize,
}

/// Finite-difference checks, reverse-derivative axioms on both backends,
/// the coherence law and the circuit oracle.
pub fn check_rows(o: &CheckOptions) -> Result<Vec<CheckRow>, CliError> {
    let mut rng = SplitMix64::seed_from_u64(o.seed);
    let mut rows = Vec::new();
    let grad_row = |name: String, r: paralens::Result<check::GradReport>, n: usize| match r {
        Ok(rep) => CheckRow {
            name,
            instances: n,
            deviation: rep.max_rel_err,
            tolerance: FD_TOLERANCE,
            note: format!("{} coordinates, {} skipped at kinks", rep.coordinates, rep.skipped),
        },
        Err(e) => CheckRow {
            name,
            instances: n,
            deviation: f64::INFINITY,
            tolerance: FD_TOLERANCE,
            note: e.to_string(),
        },
    };
    for lens in check::smooth_primitives()? {
        let probes = check::random_probes(&lens, 3, &mut rng);
        let r = check::grad_check(&lens, &probes, FD_STEP, FD_TOLERANCE);
        rows.push(grad_row(format!("finite differences: {}", lens.name()), r, 3));
    }
    let mut worst: Option<CheckRow> = None;
    for _ in 0..o.composites {
        let (_, f) = check::random_composite(&mut rng)?;
        let probes = check::random_probes(f.lens(), 2, &mut rng);
        let r = grad_row(
            String::new(),
            check::grad_check(f.lens(), &probes, FD_STEP, FD_TOLERANCE),
            1,
        );
        if worst.as_ref().is_none_or(|w| !(r.deviation <= w.deviation)) {
            worst = Some(CheckRow {
                note: format!("worst: {}; {}", f.name(), r.note),
                ..r
            });
        }
    }
    if let Some(w) = worst {
        rows.push(CheckRow {
            name: "finite differences: random composites".into(),
            instances: o.composites,
            ..w
        });
    }
    for (backend, laws, tol) in [
        ("real64", check::axiom_suite::<f64, _>(&mut rng, o.instances)?, REAL_AXIOM_TOLERANCE),
        ("z2", check::axiom_suite::<Z2, _>(&mut rng, o.instances)?, 0.0),
    ] {
        for l in laws {
            rows.push(CheckRow {
                name: format!("{backend}: {}", l.law),
                instances: l.instances,
                deviation: l.max_deviation,
                tolerance: tol,
                note: String::new(),
            });
        }
    }
    for (backend, l, tol) in [
        ("real64", check::coherence_suite::<f64, _>(&mut rng, o.instances)?, 1e-12),
        ("z2", check::coherence_suite::<Z2, _>(&mut rng, o.instances)?, 0.0),
    ] {
        rows.push(CheckRow {
            name: format!("{backend}: {}", l.law),
            instances: l.instances,
            deviation: l.max_deviation,
            tolerance: tol,
            note: String::new(),
        });
    }
    let (failing, entries) = check::z2_oracle_suite(&mut rng, o.circuits)?;
    rows.push(CheckRow {
        name: "z2: circuit backward vs formal partials".into(),
        instances: o.circuits,
        deviation: failing as f64,
        tolerance: 0.0,
        note: format!("{entries} mismatching entries"),
    });
    Ok(rows)
}

pub fn render_checks(rows: &[CheckRow]) -> String {
    let w = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(5);
    let mut s = format!(
        "{:<w$}  {:>9}  {:>10}  {:>9}  result\n",
        "check", "instances", "deviation", "tolerance"
    );
    for r in rows {
        s += &format!(
            "{:<w$}  {:>9}  {:>10.3e}  {:>9.1e}  {}{}\n",
            r.name,
            r.instances,
            r.deviation,
            r.tolerance,
            if r.passed() { "PASS" } else { "FAIL" },
            if r.note.is_empty() {
                String::new()
            } else {
                format!("  ({})", r.note)
            }
        );
    }
    s
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchReport {
    pub model: String,
    pub params: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub ms_per_step: f64,
    pub ms_per_example: f64,
}

/// Times training steps on seeded synthetic batches. Without a config the
/// model is a 784-128-10 ReLU network with softmax cross entropy and Adam.
pub fn bench(
    cfg: Option<&ExperimentConfig>,
    steps: usize,
    batch_size: usize,
    seed: u64,
) -> Result<BenchReport, CliError> {
    let (model, k) = match cfg {
        Some(c) => match build_model(c)? {
            Model::Smooth(m) => {
                let width = m.dst().point.numel();
                let k = kinds::<f64>(c, width, &m.param().point, None)?;
                (m, k)
            }
            Model::Boolean(_) => {
                return Err(invalid("backend", "bench times the smooth backend"))
            }
        },
        None => {
            let m = build_chain(
                &[
                    LayerConfig::Dense {
                        input: 784,
                        output: 128,
                        activation: crate::config::Activation::Relu,
                    },
                    LayerConfig::Dense {
                        input: 128,
                        output: 10,
                        activation: crate::config::Activation::Identity,
                    },
                ],
                "model.layers",
            )?;
            let k = Kinds {
                loss: LossKind::SoftmaxCrossEntropy,
                rate: RateKind::Constant(-1.0),
                optimiser: OptimiserKind::adam_default(),
            };
            (m, k)
        }
    };
    if batch_size == 0 {
        return Err(invalid("batch_size", "must be at least 1"));
    }
    let plan = train::assemble_supervised(&model, k.loss, k.rate, &k.optimiser, batch_size)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut st = plan.initial_state(model.init_params(&mut rng));
    let (a_n, b_n) = (model.src().point.numel(), model.dst().point.numel());
    let a = Tensor::from_vec(
        (0..a_n * batch_size)
            .map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0))
            .collect(),
    );
    // one-hot labels keep every loss kind well defined
    let b = Tensor::from_vec(
        (0..batch_size)
            .flat_map(|i| (0..b_n).map(move |j| if j == i % b_n { 1.0 } else { 0.0 }))
            .collect(),
    );
    st = plan.step(&st, &a, &b)?; // warm-up
    let started = Instant::now();
    for _ in 0..steps {
        st = plan.step(&st, &a, &b)?;
    }
    let ms = started.elapsed().as_secs_f64() * 1e3 / steps.max(1) as f64;
    Ok(BenchReport {
        model: model.name().to_string(),
        params: model.param().point.numel(),
        batch_size,
        steps,
        ms_per_step: ms,
        ms_per_example: ms / batch_size as f64,
    })
}
