//! Closed learning lenses and the loops that run them.
//!
//! A supervised learner is the composite `η ; model ; loss ; rate`, a
//! parametric lens from the unit to the unit whose parameter is
//! `(labels, model parameter, inputs)`. Reparameterising the parameter
//! block with an optimiser and the other two blocks with
//! [`Lens::discard_change`] turns its backward pass into the training step.
//! Deep dreaming moves the optimiser to the input block; the GAN learner
//! ties a discriminator over generated and real samples and uses
//! descent-ascent.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::backend::{Backend, OptimiserKind};
use crate::error::{Error, Result};
use crate::lens::{input_capture, Interface, Lens};
use crate::loss::{self, LossKind, RateKind};
use crate::optim::{gda, Optimiser};
use crate::para::{ParametricLens, ParametricMap};
use crate::smooth::{batch, weight_tie};
use crate::tensor::{Scalar, ScalarKind, Shape, Tensor};

/// Which optimiser polarity pairs with which learning-rate sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPreset {
    /// Gradient ascent with the constant rate `-ε`.
    PaperClassic,
    /// Gradient descent with the constant rate `+ε`.
    Modern,
}

impl SignPreset {
    pub fn basic(self, eps: f64) -> (OptimiserKind, RateKind) {
        match self {
            SignPreset::PaperClassic => (OptimiserKind::Ascent, RateKind::Constant(-eps)),
            SignPreset::Modern => (OptimiserKind::Descent, RateKind::Constant(eps)),
        }
    }
}

/// Parameters, optimiser state and the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState<S> {
    pub params: Tensor<S>,
    pub opt_state: Tensor<S>,
    pub t: u64,
}

#[derive(Debug, Clone)]
pub struct Dataset<S> {
    pub inputs: Vec<Tensor<S>>,
    pub labels: Vec<Tensor<S>>,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(inputs: Vec<Tensor<S>>, labels: Vec<Tensor<S>>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(Dataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> (Tensor<S>, Tensor<S>) {
        let a: Vec<&Tensor<S>> = idx.iter().map(|&i| &self.inputs[i]).collect();
        let b: Vec<&Tensor<S>> = idx.iter().map(|&i| &self.labels[i]).collect();
        (Tensor::concat(&a), Tensor::concat(&b))
    }
}

/// `η ; model ; loss ; rate` with parameter `(B, P, A)`.
fn close<S: Scalar>(
    model: &ParametricLens<S>,
    loss: &ParametricLens<S>,
    rate: &Lens<S>,
) -> Result<ParametricLens<S>> {
    if model.dst() != loss.src() {
        return Err(Error::interface(
            model.name(),
            loss.name(),
            format!(
                "model produces {}, loss expects {}",
                model.dst(),
                loss.src()
            ),
        ));
    }
    if loss.dst() != rate.src() {
        return Err(Error::interface(
            loss.name(),
            rate.name(),
            format!("loss produces {}, rate expects {}", loss.dst(), rate.src()),
        ));
    }
    input_capture(model.src().clone())
        .compose(model)?
        .compose(loss)?
        .compose(&ParametricLens::trivial(rate.clone()))
}

fn check_optimiser<S: Scalar>(opt: &Optimiser<S>, port: &Interface, what: &str) -> Result<()> {
    if &Interface::symmetric(opt.param_shape().clone()) != port {
        return Err(Error::interface(
            opt.name(),
            what,
            format!("optimiser acts on {}, port is {}", opt.param_shape(), port),
        ));
    }
    Ok(())
}

/// Supervised parameter learning over batches of `n` examples.
#[derive(Debug, Clone)]
pub struct Supervised<S> {
    model: ParametricLens<S>,
    batched: ParametricLens<S>,
    loss: ParametricLens<S>,
    optimiser: Optimiser<S>,
    batch: usize,
    step_lens: ParametricLens<S>,
}

impl<S: Scalar> Supervised<S> {
    pub fn assemble(
        model: &ParametricLens<S>,
        loss: &ParametricLens<S>,
        rate: &Lens<S>,
        optimiser: &Optimiser<S>,
        batch_size: usize,
    ) -> Result<Self> {
        check_optimiser(optimiser, model.param(), model.name())?;
        let batched = batch(model, batch_size)?;
        let losses = loss.tensor_power(batch_size)?;
        let rates = Lens::tensor_all(&vec![rate.clone(); batch_size]);
        let closed = close(&batched, &losses, &rates)?;
        let r = Lens::discard_change(losses.param().point.clone())
            .tensor(optimiser.lens())
            .tensor(&Lens::discard_change(batched.src().point.clone()));
        let step_lens = closed.reparameterise(&r)?;
        Ok(Supervised {
            model: model.clone(),
            batched,
            loss: loss.clone(),
            optimiser: optimiser.clone(),
            batch: batch_size,
            step_lens,
        })
    }

    pub fn model(&self) -> &ParametricLens<S> {
        &self.model
    }

    pub fn optimiser(&self) -> &Optimiser<S> {
        &self.optimiser
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn initial_state(&self, params: Tensor<S>) -> StepState<S> {
        StepState {
            params,
            opt_state: self.optimiser.initial_state(),
            t: 0,
        }
    }

    /// One update on a batch: `a` and `b_t` hold `n` examples each,
    /// concatenated.
    pub fn step(&self, st: &StepState<S>, a: &Tensor<S>, b_t: &Tensor<S>) -> Result<StepState<S>> {
        let full = Tensor::concat(&[b_t, &st.opt_state, &st.params, a]);
        let (sp, _) = self
            .step_lens
            .put(&full, &Tensor::unit(), &Tensor::unit())?;
        let (opt_state, params) =
            sp.split2(self.optimiser.state_shape(), self.optimiser.param_shape())?;
        Ok(StepState {
            params,
            opt_state,
            t: st.t + 1,
        })
    }

    /// Per-example losses of a batch at the parameter the optimiser
    /// exposes, with the batch predictions.
    pub fn batch_losses(
        &self,
        st: &StepState<S>,
        a: &Tensor<S>,
        b_t: &Tensor<S>,
    ) -> Result<(Vec<f64>, Tensor<S>)> {
        let p = self.optimiser.get(&st.opt_state, &st.params)?;
        let preds = self.batched.get(&p, a)?;
        let shapes = vec![&self.loss.src().point; self.batch];
        let ps = preds.split(&shapes)?;
        let ts = b_t.split(&shapes)?;
        let losses = ps
            .iter()
            .zip(&ts)
            .map(|(p, t)| Ok(self.loss.get(t, p)?.data().iter().map(|v| v.to_f64()).sum()))
            .collect::<Result<Vec<f64>>>()?;
        Ok((losses, preds))
    }

    /// The step as a parametric map from `(s, p)` to `(s, p)` whose
    /// parameter is one batch `(a, b_t)`.
    pub fn as_parametric_map(&self) -> ParametricMap<S> {
        let this = self.clone();
        let a = self.batched.src().point.clone();
        let b = self.batched.dst().point.clone();
        let sp = self
            .optimiser
            .state_shape()
            .product(self.optimiser.param_shape());
        let (a1, b1) = (a.clone(), b.clone());
        ParametricMap::new(a.product(&b), sp.clone(), sp, move |ab, sp| {
            let (a, b) = ab.split2(&a1, &b1)?;
            let (s, p) = sp.split2(this.optimiser.state_shape(), this.optimiser.param_shape())?;
            let next = this.step(
                &StepState {
                    params: p,
                    opt_state: s,
                    t: 0,
                },
                &a,
                &b,
            )?;
            Ok(Tensor::concat(&[&next.opt_state, &next.params]))
        })
    }
}

/// Deep dreaming: parameters frozen, the optimiser acts on the input.
#[derive(Debug, Clone)]
pub struct Dream<S> {
    model: ParametricLens<S>,
    optimiser: Optimiser<S>,
    step_lens: ParametricLens<S>,
}

impl<S: Scalar> Dream<S> {
    pub fn assemble(
        model: &ParametricLens<S>,
        loss: &ParametricLens<S>,
        rate: &Lens<S>,
        optimiser: &Optimiser<S>,
    ) -> Result<Self> {
        check_optimiser(optimiser, model.src(), "model input")?;
        let closed = close(model, loss, rate)?;
        let r = Lens::discard_change(loss.param().point.clone())
            .tensor(&Lens::discard_change(model.param().point.clone()))
            .tensor(optimiser.lens());
        let step_lens = closed.reparameterise(&r)?;
        Ok(Dream {
            model: model.clone(),
            optimiser: optimiser.clone(),
            step_lens,
        })
    }

    pub fn model(&self) -> &ParametricLens<S> {
        &self.model
    }

    pub fn optimiser(&self) -> &Optimiser<S> {
        &self.optimiser
    }

    /// Returns the new optimiser state and input.
    pub fn step(
        &self,
        s: &Tensor<S>,
        a: &Tensor<S>,
        p: &Tensor<S>,
        b_t: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        let full = Tensor::concat(&[b_t, p, s, a]);
        let (sa, _) = self
            .step_lens
            .put(&full, &Tensor::unit(), &Tensor::unit())?;
        sa.split2(self.optimiser.state_shape(), self.optimiser.param_shape())
    }
}

/// The model `(g ⊗ 1_X) ; tie(d, d)`: parameter `(q, p)`, input `(z, x_r)`,
/// output the two discriminator scores.
pub fn gan_model<S: Scalar>(
    generator: &ParametricLens<S>,
    discriminator: &ParametricLens<S>,
) -> Result<ParametricLens<S>> {
    let x = discriminator.src().clone();
    if generator.dst() != &x {
        return Err(Error::interface(
            generator.name(),
            discriminator.name(),
            format!(
                "generator produces {}, discriminator reads {}",
                generator.dst(),
                x
            ),
        ));
    }
    let g_x = generator.tensor(&ParametricLens::trivial(Lens::identity(x)));
    g_x.compose(&weight_tie(discriminator, discriminator)?)
}

/// Wasserstein GAN toy: dot loss against the labels `(1, -1)`, constant
/// rate `α`, descent on the generator and ascent on the discriminator.
#[derive(Debug, Clone)]
pub struct Gan {
    p: Shape,
    q: Shape,
    step_lens: ParametricLens<f64>,
}

pub const GAN_LABELS: [f64; 2] = [1.0, -1.0];

impl Gan {
    pub fn assemble(
        generator: &ParametricLens<f64>,
        discriminator: &ParametricLens<f64>,
        alpha: f64,
    ) -> Result<Self> {
        if discriminator.dst().point.numel() != 1 {
            return Err(Error::shape(
                "discriminator output",
                &Shape::scalar(),
                &discriminator.dst().point,
            ));
        }
        let model = gan_model(generator, discriminator)?;
        let two = model.dst().point.numel();
        let dot = loss::dot::<f64>(two)?;
        let rate = loss::rate::<f64>(RateKind::Constant(alpha), Shape::scalar())?;
        let closed = close(&model, &dot, &rate)?;
        let (p, q) = (
            generator.param().point.clone(),
            discriminator.param().point.clone(),
        );
        let opt = gda(p.clone(), q.clone()).swapped(&p, &q)?;
        let r = Lens::discard_change(dot.param().point.clone())
            .tensor(opt.lens())
            .tensor(&Lens::discard_change(model.src().point.clone()));
        Ok(Gan {
            p,
            q,
            step_lens: closed.reparameterise(&r)?,
        })
    }

    /// One update on a latent `z` and a real sample `x_r`.
    pub fn step(
        &self,
        p: &Tensor<f64>,
        q: &Tensor<f64>,
        z: &Tensor<f64>,
        x_r: &Tensor<f64>,
    ) -> Result<(Tensor<f64>, Tensor<f64>)> {
        let labels = Tensor::from_vec(GAN_LABELS.to_vec());
        let full = Tensor::concat(&[&labels, q, p, z, x_r]);
        let (qp, _) = self
            .step_lens
            .put(&full, &Tensor::unit(), &Tensor::unit())?;
        let (q, p) = qp.split2(&self.q, &self.p)?;
        Ok((p, q))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<S> {
    pub state: StepState<S>,
    pub trace: Vec<MetricRow>,
}

/// Fraction of examples whose prediction matches the label: argmax match
/// for real labels wider than one, exact match for Z2.
pub fn batch_accuracy<S: Scalar>(
    preds: &Tensor<S>,
    labels: &Tensor<S>,
    width: usize,
) -> Option<f64> {
    let n = labels.numel() / width.max(1);
    if n == 0 {
        return None;
    }
    let chunks = preds.data().chunks(width).zip(labels.data().chunks(width));
    let hits = match S::KIND {
        ScalarKind::Z2 => chunks.filter(|(p, t)| p == t).count(),
        ScalarKind::Real64 if width > 1 => chunks
            .filter(|(p, t)| {
                let am = |v: &[S]| {
                    let v: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();
                    Tensor::from_vec(v).argmax()
                };
                am(p) == am(t)
            })
            .count(),
        ScalarKind::Real64 => return None,
    };
    Some(hits as f64 / n as f64)
}

/// Folds the step over seeded, shuffled batches. The trailing partial batch
/// of each epoch is dropped. A non-finite loss or parameter aborts.
pub fn fit<S: Scalar>(
    plan: &Supervised<S>,
    data: &Dataset<S>,
    cfg: &FitConfig,
    init: StepState<S>,
    mut on_row: impl FnMut(&MetricRow),
) -> Result<FitOutcome<S>> {
    if data.is_empty() && cfg.epochs > 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let n = plan.batch_size();
    let width = plan.model.dst().point.numel();
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut st = init;
    let mut trace = Vec::new();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks_exact(n) {
            let (a, b) = data.subset(chunk);
            let (losses, preds) = plan.batch_losses(&st, &a, &b)?;
            let loss = losses.iter().sum::<f64>() / n as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss is {loss} at epoch {epoch}, step {}",
                    st.t + 1
                )));
            }
            st = plan.step(&st, &a, &b)?;
            if st.params.data().iter().any(|v| !v.to_f64().is_finite()) {
                return Err(Error::NonFinite(format!(
                    "parameters became non-finite at epoch {epoch}, step {}",
                    st.t
                )));
            }
            let row = MetricRow {
                epoch,
                step: st.t,
                loss,
                accuracy: batch_accuracy(&preds, &b, width),
            };
            on_row(&row);
            trace.push(row);
        }
    }
    Ok(FitOutcome { state: st, trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

/// Mean loss and accuracy of `model` at parameter `p` over `data`.
pub fn evaluate<S: Scalar>(
    model: &ParametricLens<S>,
    loss: &ParametricLens<S>,
    p: &Tensor<S>,
    data: &Dataset<S>,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let width = model.dst().point.numel();
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(data.len());
    for (a, b) in data.inputs.iter().zip(&data.labels) {
        let y = model.get(p, a)?;
        total += loss
            .get(b, &y)?
            .data()
            .iter()
            .map(|v| v.to_f64())
            .sum::<f64>();
        preds.push(y);
    }
    let pr: Vec<&Tensor<S>> = preds.iter().collect();
    let lr: Vec<&Tensor<S>> = data.labels.iter().collect();
    Ok(Evaluation {
        loss: total / data.len() as f64,
        accuracy: batch_accuracy(&Tensor::concat(&pr), &Tensor::concat(&lr), width),
    })
}

/// Builds a supervised learner from configuration kinds.
pub fn assemble_supervised<S: Backend>(
    model: &ParametricLens<S>,
    loss: LossKind,
    rate: RateKind,
    optimiser: &OptimiserKind,
    batch_size: usize,
) -> Result<Supervised<S>> {
    let width = model.dst().point.numel();
    let l = S::loss(loss, width)?;
    let r = S::rate(rate, &loss.output_shape(width))?;
    let o = S::optimiser(optimiser, &model.param().point)?;
    Supervised::assemble(model, &l, &r, &o, batch_size)
}

/// Builds a dreaming learner whose optimiser acts on the model input.
pub fn assemble_dream<S: Backend>(
    model: &ParametricLens<S>,
    loss: LossKind,
    rate: RateKind,
    optimiser: &OptimiserKind,
) -> Result<Dream<S>> {
    let width = model.dst().point.numel();
    let l = S::loss(loss, width)?;
    let r = S::rate(rate, &loss.output_shape(width))?;
    let o = S::optimiser(optimiser, &model.src().point)?;
    Dream::assemble(model, &l, &r, &o)
}

pub fn assemble_gan(
    generator: &ParametricLens<f64>,
    discriminator: &ParametricLens<f64>,
    alpha: f64,
) -> Result<Gan> {
    Gan::assemble(generator, discriminator, alpha)
}

/// Parameter dump: little-endian `u64` rank, `u64` dimensions, then `f64`
/// entries (Z2 bits as 0.0 / 1.0).
pub fn write_params<S: Scalar, W: Write>(w: &mut W, t: &Tensor<S>) -> Result<()> {
    let dims = t.shape().dims();
    w.write_all(&(dims.len() as u64).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<S: Scalar, R: Read>(r: &mut R) -> Result<Tensor<S>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let word = |i: usize| -> Result<[u8; 8]> {
        buf.get(8 * i..8 * i + 8)
            .map(|b| b.try_into().expect("eight bytes"))
            .ok_or_else(|| Error::ParamFormat(format!("file ends inside word {i}")))
    };
    let rank = u64::from_le_bytes(word(0)?) as usize;
    if rank > 16 {
        return Err(Error::ParamFormat(format!("implausible rank {rank}")));
    }
    let dims = (0..rank)
        .map(|i| Ok(u64::from_le_bytes(word(1 + i)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let shape = Shape::new(dims);
    let n = shape.numel();
    if buf.len() != 8 * (1 + rank + n) {
        return Err(Error::ParamFormat(format!(
            "expected {} payload values, file has {} bytes",
            n,
            buf.len()
        )));
    }
    let data = (0..n)
        .map(|i| Ok(S::from_f64(f64::from_le_bytes(word(1 + rank + i)?))))
        .collect::<Result<Vec<_>>>()?;
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{basic_update, nesterov, Polarity};
    use crate::para::{lift_primitive, pack_trajectory};
    use crate::smooth::{dense, linear};
    use crate::tensor::{Pointwise, Z2};

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec())
    }

    fn regression(preset: SignPreset, eps: f64) -> Supervised<f64> {
        let (o, r) = preset.basic(eps);
        assemble_supervised(&linear(1, 1).unwrap(), LossKind::Quadratic, r, &o, 1).unwrap()
    }

    #[test]
    fn one_dimensional_regression_step() {
        let plan = regression(SignPreset::PaperClassic, 0.1);
        let st = plan.initial_state(t(&[0.0]));
        let next = plan.step(&st, &t(&[1.0]), &t(&[1.0])).unwrap();
        assert!((next.params.data()[0] - 0.1).abs() < 1e-15);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn presets_agree_on_stateless_runs() {
        let a = regression(SignPreset::PaperClassic, 0.05);
        let b = regression(SignPreset::Modern, 0.05);
        let (mut sa, mut sb) = (a.initial_state(t(&[0.3])), b.initial_state(t(&[0.3])));
        for k in 0..20 {
            let x = t(&[0.1 * k as f64 - 0.7]);
            let y = t(&[2.0 * x.data()[0] + 0.5]);
            sa = a.step(&sa, &x, &y).unwrap();
            sb = b.step(&sb, &x, &y).unwrap();
            assert_eq!(sa.params, sb.params);
        }
    }

    #[test]
    fn two_point_regression_converges() {
        let model = dense(1, 1, Pointwise::Identity).unwrap();
        let (o, r) = SignPreset::Modern.basic(0.1);
        let plan = assemble_supervised(&model, LossKind::Quadratic, r, &o, 1).unwrap();
        let data = Dataset::new(vec![t(&[0.0]), t(&[1.0])], vec![t(&[1.0]), t(&[3.0])]).unwrap();
        let cfg = FitConfig {
            epochs: 500,
            seed: 3,
            shuffle: true,
        };
        let out = fit(
            &plan,
            &data,
            &cfg,
            plan.initial_state(t(&[0.0, 0.0])),
            |_| {},
        )
        .unwrap();
        assert!(out.trace.len() <= 1000);
        let ev = evaluate(
            &model,
            &<f64 as Backend>::loss(LossKind::Quadratic, 1).unwrap(),
            &out.state.params,
            &data,
        )
        .unwrap();
        assert!(ev.loss < 1e-6, "{}", ev.loss);
    }

    #[test]
    fn zero_epochs_leave_parameters() {
        let plan = regression(SignPreset::Modern, 0.1);
        let data = Dataset::new(vec![t(&[1.0])], vec![t(&[1.0])]).unwrap();
        let cfg = FitConfig {
            epochs: 0,
            seed: 0,
            shuffle: true,
        };
        let out = fit(&plan, &data, &cfg, plan.initial_state(t(&[0.4])), |_| {}).unwrap();
        assert_eq!(out.state.params.data(), &[0.4]);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn nan_aborts() {
        let plan = regression(SignPreset::Modern, 1e300);
        let data = Dataset::new(vec![t(&[1e200])], vec![t(&[1.0])]).unwrap();
        let cfg = FitConfig {
            epochs: 5,
            seed: 0,
            shuffle: false,
        };
        let err = fit(&plan, &data, &cfg, plan.initial_state(t(&[1.0])), |_| {}).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn nesterov_evaluates_at_lookahead() {
        let model = linear(1, 1).unwrap();
        let q = <f64 as Backend>::loss(LossKind::Quadratic, 1).unwrap();
        let r = loss::rate::<f64>(RateKind::Constant(-0.1), Shape::scalar()).unwrap();
        let plan = Supervised::assemble(&model, &q, &r, &nesterov(0.5, [1, 1]), 1).unwrap();
        let st = StepState {
            params: t(&[1.0]),
            opt_state: t(&[0.4]),
            t: 0,
        };
        let (a, b) = (2.0, 1.0);
        let next = plan.step(&st, &t(&[a]), &t(&[b])).unwrap();
        let pbar: f64 = 1.0 + 0.5 * 0.4;
        let dp = a * (-0.1 * (pbar * a - b));
        let s2 = -0.5 * 0.4 + dp;
        assert!((next.opt_state.data()[0] - s2).abs() < 1e-15);
        assert!((next.params.data()[0] - (1.0 + s2)).abs() < 1e-15);
        let (losses, _) = plan.batch_losses(&st, &t(&[a]), &t(&[b])).unwrap();
        assert!((losses[0] - 0.5 * (pbar * a - b).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn z2_step_is_xor_of_reverse_derivative() {
        let c =
            crate::boolean::Circuit::parse("param p\ninput x\ny = AND(p, x)\noutput y").unwrap();
        let model = c.build().unwrap();
        let plan = assemble_supervised(
            &model,
            LossKind::Xor,
            RateKind::Identity,
            &OptimiserKind::Ascent,
            1,
        )
        .unwrap();
        let z = |b: u8| Tensor::from_vec(vec![Z2::from(b)]);
        for (p, x, y) in [(0, 1, 1), (1, 1, 0), (1, 0, 1), (0, 0, 0)] {
            let st = plan.initial_state(z(p));
            let next = plan.step(&st, &z(x), &z(y)).unwrap();
            // R[f](p, x, f + y) on the parameter is x·(p·x + y)
            let expect = Z2::from(p) + Z2::from(x) * (Z2::from(p) * Z2::from(x) + Z2::from(y));
            assert_eq!(next.params.data(), &[expect]);
        }
    }

    #[test]
    fn dream_step_closed_form() {
        let model = linear(1, 1).unwrap();
        let dream = assemble_dream(
            &model,
            LossKind::Dot,
            RateKind::Constant(0.1),
            &OptimiserKind::Ascent,
        )
        .unwrap();
        let (s, a) = dream
            .step(&Tensor::unit(), &t(&[0.0]), &t(&[2.0]), &t(&[1.0]))
            .unwrap();
        assert!(s.numel() == 0);
        assert!((a.data()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gan_step_matches_unpacked_update() {
        // generator g(z, (c, a)) = a z + c ; discriminator d(x, (e, w)) = w x + e
        let g = dense(1, 1, Pointwise::Identity).unwrap();
        let d = dense(1, 1, Pointwise::Identity).unwrap();
        let alpha = 0.015625;
        let gan = assemble_gan(&g, &d, alpha).unwrap();
        let (p, q) = (t(&[0.3, 1.2]), t(&[-0.4, 0.8]));
        let (z, xr) = (t(&[0.7]), t(&[2.5]));
        let (p2, q2) = gan.step(&p, &q, &z, &xr).unwrap();
        let (c, a, e, w) = (0.3, 1.2, -0.4, 0.8);
        let xg_change = w; // R[d](g(z,p), q, 1) on x
        let (dq_g_bias, dq_g_w) = (1.0, a * 0.7 + c);
        let (dq_r_bias, dq_r_w) = (1.0, 2.5);
        let (dp_bias, dp_a) = (xg_change, xg_change * 0.7);
        assert_eq!(
            p2.data(),
            &[c - alpha * 1.0 * dp_bias, a - alpha * 1.0 * dp_a]
        );
        assert_eq!(
            q2.data(),
            &[
                e + alpha * (1.0 * dq_g_bias + -1.0 * dq_r_bias),
                w + alpha * (1.0 * dq_g_w + -1.0 * dq_r_w)
            ]
        );
    }

    #[test]
    fn fit_equals_iterated_step() {
        let model = lift_primitive::<f64>(
            "p·tanh(a)",
            [1],
            [1],
            [1],
            |p, a| Ok(t(&[p.data()[0] * a.data()[0].tanh()])),
            |p, a, d| {
                let (p, a, d) = (p.data()[0], a.data()[0], d.data()[0]);
                Ok((t(&[a.tanh() * d]), t(&[p * (1.0 - a.tanh().powi(2)) * d])))
            },
        );
        let q = <f64 as Backend>::loss(LossKind::Quadratic, 1).unwrap();
        let r = loss::rate::<f64>(RateKind::Constant(-0.3), Shape::scalar()).unwrap();
        let plan =
            Supervised::assemble(&model, &q, &r, &basic_update(Polarity::Ascent, [1]), 1).unwrap();
        let data = Dataset::new(vec![t(&[0.5]), t(&[-1.5])], vec![t(&[1.0]), t(&[2.0])]).unwrap();
        let cfg = FitConfig {
            epochs: 1,
            seed: 0,
            shuffle: false,
        };
        let out = fit(&plan, &data, &cfg, plan.initial_state(t(&[0.2])), |_| {}).unwrap();
        let it = plan.as_parametric_map().iterate(2).unwrap();
        let traj = pack_trajectory(&[t(&[0.5, 1.0]), t(&[-1.5, 2.0])]);
        let via_map = it.apply(&traj, &t(&[0.2])).unwrap();
        assert_eq!(via_map.data(), out.state.params.data());
        let swapped = pack_trajectory(&[t(&[-1.5, 2.0]), t(&[0.5, 1.0])]);
        assert_ne!(it.apply(&swapped, &t(&[0.2])).unwrap(), via_map);
    }

    #[test]
    fn params_round_trip() {
        let p = Tensor::new([2, 3], vec![0.5, -1.0, 2.0, 3.5, 1e-300, -0.0]).unwrap();
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        assert_eq!(buf.len(), 8 * (1 + 2 + 6));
        let back: Tensor<f64> = read_params(&mut buf.as_slice()).unwrap();
        assert_eq!(back, p);
        assert!(matches!(
            read_params::<f64, _>(&mut &buf[..buf.len() - 3]),
            Err(Error::ParamFormat(_))
        ));
    }
}
