//! Verification harnesses. Each compares the backward pass produced by lens
//! composition against an oracle that does not use it: central finite
//! differences, forward-mode dual numbers, or formal polynomial partials
//! over Z2. Harnesses report their largest deviation so callers can print
//! a table; tolerances are applied by the caller or by [`GradReport::ensure`].

use std::ops::{Add, Div, Mul, Sub};

use rand::Rng;

use crate::boolean::{random_circuit, Circuit, PolyZ2};
use crate::error::{Error, Result};
use crate::lens::{Interface, Lens};
use crate::optim::{basic_update, momentum, nesterov, Polarity};
use crate::para::ParametricLens;
use crate::smooth::{sequential, LayerSpec};
use crate::tensor::{Pointwise, Scalar, Shape, Tensor, Z2};

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;
/// Largest admissible Real64 deviation in the axiom and coherence suites.
pub const REAL_AXIOM_TOLERANCE: f64 = 1e-10;

/// `|a - n| / max(1, |a|, |n|)`: absolute near zero, relative elsewhere.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1f64.max(a.abs()).max(n.abs())
}

/// Largest [`rel_err`] between two buffers, computed on `to_f64` of the
/// difference so that a Z2 mismatch counts as 1. Length mismatches count
/// as infinite.
pub fn deviation<S: Scalar>(x: &Tensor<S>, y: &Tensor<S>) -> f64 {
    if x.numel() != y.numel() {
        return f64::INFINITY;
    }
    x.data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| {
            let d = (a - b).to_f64().abs();
            if d.is_nan() {
                return f64::INFINITY;
            }
            d / 1f64.max(a.to_f64().abs()).max(b.to_f64().abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub probes: usize,
    pub coordinates: usize,
    /// Coordinates whose difference stencil straddles a kink of the forward map.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub worst: Option<GradWorst>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradWorst {
    pub probe: usize,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }

    pub fn ensure(self, tol: f64) -> Result<GradReport> {
        if self.passed(tol) {
            return Ok(self);
        }
        let w = self
            .worst
            .as_ref()
            .expect("a failing report has a worst probe");
        Err(Error::ToleranceExceeded(format!(
            "{}: probe {} coordinate {}: backward {:e}, finite difference {:e}, rel err {:e} > {:e}",
            self.name, w.probe, w.coordinate, w.analytic, w.numeric, self.max_rel_err, tol
        )))
    }
}

/// Compares `lens.put(a, δ)` with central differences of `⟨δ, get(a)⟩` for
/// each probe `(a, δ)`, coordinate by coordinate. Coordinates where the
/// one-sided differences disagree by more than `1e-4` (a ReLU kink or a
/// max-pool tie inside the stencil) are skipped and counted. Fails with
/// `ToleranceExceeded` naming the worst probe.
pub fn grad_check(
    lens: &Lens<f64>,
    probes: &[(Tensor<f64>, Tensor<f64>)],
    h: f64,
    tol: f64,
) -> Result<GradReport> {
    if lens.src().point != lens.src().tangent || lens.dst().point != lens.dst().tangent {
        return Err(Error::InvalidArgument(format!(
            "finite differences need symmetric interfaces, got {} -> {}",
            lens.src(),
            lens.dst()
        )));
    }
    let mut report = GradReport {
        name: lens.name().to_string(),
        probes: probes.len(),
        coordinates: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    for (k, (a, d)) in probes.iter().enumerate() {
        let analytic = lens.put(a, d)?;
        let objective =
            |x: Vec<f64>| -> Result<f64> { lens.get(&Tensor::new(a.shape().clone(), x)?)?.dot(d) };
        let centre = objective(a.data().to_vec())?;
        for i in 0..a.numel() {
            let mut hi = a.data().to_vec();
            let mut lo = a.data().to_vec();
            hi[i] += h;
            lo[i] -= h;
            let (fh, fl) = (objective(hi)?, objective(lo)?);
            let numeric = (fh - fl) / (2.0 * h);
            let (right, left) = ((fh - centre) / h, (centre - fl) / h);
            if (right - left).abs() > 1e-4 * 1f64.max(numeric.abs()) {
                report.skipped += 1;
                continue;
            }
            report.coordinates += 1;
            let an = analytic.data()[i];
            let e = rel_err(an, numeric);
            if !(e <= report.max_rel_err) {
                report.max_rel_err = if e.is_nan() { f64::INFINITY } else { e };
                report.worst = Some(GradWorst {
                    probe: k,
                    coordinate: i,
                    analytic: an,
                    numeric,
                });
            }
        }
    }
    report.ensure(tol)
}

/// `n` probes with points and tangents drawn uniformly from `[-1, 1]`.
pub fn random_probes<R: Rng + ?Sized>(
    lens: &Lens<f64>,
    n: usize,
    rng: &mut R,
) -> Vec<(Tensor<f64>, Tensor<f64>)> {
    (0..n)
        .map(|_| {
            (
                uniform(rng, &lens.src().point),
                uniform(rng, &lens.dst().tangent),
            )
        })
        .collect()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: &Shape) -> Tensor<f64> {
    let data = (0..shape.numel())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    Tensor::new(shape.clone(), data).expect("length matches shape")
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, shape: &Shape) -> Tensor<Z2> {
    let data = (0..shape.numel()).map(|_| Z2::new(rng.gen())).collect();
    Tensor::new(shape.clone(), data).expect("length matches shape")
}

/// Fixes the parameter of `f` at `p`, leaving a plain lens `A → B`. Built
/// as the reparameterisation by a constant, so its backward is the input
/// component of `f`'s.
pub fn close_param<S: Scalar>(f: &ParametricLens<S>, p: Tensor<S>) -> Result<Lens<S>> {
    let constant = Lens::new(
        "const",
        Interface::unit(),
        f.param().clone(),
        move |_| Ok(p.clone()),
        |_, _| Ok(Tensor::unit()),
    );
    Ok(f.reparameterise(&constant)?.lens().clone())
}

/// Layer chain of `depth` units starting at a vector of `input` entries,
/// widths at most `max_dim`. A unit is one layer, or a reshape-wrapped
/// convolution or max-pool block when the width is 4 (a `2 × 2` image).
/// With `output` set, a final linear layer fixes the output width.
pub fn random_layer_chain<R: Rng + ?Sized>(
    rng: &mut R,
    input: usize,
    output: Option<usize>,
    depth: usize,
    max_dim: usize,
) -> Vec<LayerSpec> {
    let act = |rng: &mut R| match rng.gen_range(0..3) {
        0 => Pointwise::Sigmoid,
        1 => Pointwise::Relu,
        _ => Pointwise::Identity,
    };
    let mut w = input;
    let mut chain = Vec::new();
    for _ in 0..depth {
        let next = rng.gen_range(1..=max_dim);
        match rng.gen_range(0..7) {
            0 => {
                chain.push(LayerSpec::Linear {
                    input: w,
                    output: next,
                });
                w = next;
            }
            1 => chain.push(LayerSpec::Bias { width: w }),
            2 => chain.push(LayerSpec::Activation {
                kind: act(rng),
                width: w,
            }),
            3 => {
                chain.push(LayerSpec::Dense {
                    input: w,
                    output: next,
                    activation: act(rng),
                });
                w = next;
            }
            4 => chain.push(LayerSpec::Softmax { width: w }),
            5 if w == 4 => {
                let k = rng.gen_range(1..=2);
                let n = 3 - k;
                chain.push(LayerSpec::Reshape {
                    from: vec![4],
                    to: vec![2, 2],
                });
                chain.push(LayerSpec::Conv {
                    kernel: k,
                    image: 2,
                });
                chain.push(LayerSpec::Reshape {
                    from: vec![n, n],
                    to: vec![n * n],
                });
                w = n * n;
            }
            6 if w == 4 => {
                chain.push(LayerSpec::Reshape {
                    from: vec![4],
                    to: vec![2, 2],
                });
                chain.push(LayerSpec::MaxPool {
                    window: 2,
                    output: 1,
                });
                chain.push(LayerSpec::Reshape {
                    from: vec![1, 1],
                    to: vec![1],
                });
                w = 1;
            }
            _ => chain.push(LayerSpec::Activation {
                kind: Pointwise::Sigmoid,
                width: w,
            }),
        }
    }
    if let Some(out) = output {
        if w != out || chain.is_empty() {
            chain.push(LayerSpec::Linear {
                input: w,
                output: out,
            });
        }
    }
    chain
}

/// Every registered smooth primitive, layer and loss as a plain lens over
/// its whole input (parameter block first). Softmax cross entropy is
/// checked on the prediction port only, with a fixed label distribution,
/// since perturbing the label would leave the simplex.
pub fn smooth_primitives() -> Result<Vec<Lens<f64>>> {
    use crate::loss::{dot, quadratic, softmax_cross_entropy};
    use crate::smooth::{activation, bias, conv_layer, cpr, dense, linear, maxpool, softmax_layer};
    let mut out: Vec<Lens<f64>> = vec![
        linear(3, 2)?.lens().clone(),
        linear(1, 1)?.lens().clone(),
        bias(3)?.lens().clone(),
        activation(Pointwise::Identity, 3)?.lens().clone(),
        activation(Pointwise::Sigmoid, 4)?.lens().clone(),
        activation(Pointwise::Relu, 4)?.lens().clone(),
        softmax_layer(4)?.lens().clone(),
        dense(3, 2, Pointwise::Sigmoid)?.lens().clone(),
        dense(4, 3, Pointwise::Relu)?.lens().clone(),
        conv_layer(1, 3)?.lens().clone(),
        conv_layer(2, 4)?.lens().clone(),
        maxpool(2, 2)?.lens().clone(),
        cpr(2, 5, 2)?.lens().clone(),
        quadratic(3)?.lens().clone(),
        dot::<f64>(3)?.lens().clone(),
        Lens::copy([2]),
        Lens::add([2]),
        Lens::swap([2], [1]),
        Lens::proj0([2], [1]),
        Lens::proj1([2], [1]),
    ];
    let label = Tensor::from_vec(vec![0.2, 0.5, 0.3]);
    out.push(close_param(&softmax_cross_entropy(3)?, label)?.renamed("softmax_ce(3) prediction"));
    Ok(out)
}

/// Random smooth composite of depth 1 to 5 with widths at most 8.
pub fn random_composite<R: Rng + ?Sized>(
    rng: &mut R,
) -> Result<(Vec<LayerSpec>, ParametricLens<f64>)> {
    let input = rng.gen_range(1..=8);
    let depth = rng.gen_range(1..=5);
    let chain = random_layer_chain(rng, input, None, depth, 8);
    let lens = sequential(&chain)?;
    Ok((chain, lens))
}

/// Scalar arithmetic shared by plain evaluation and forward-mode duals.
pub trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
}

impl Field for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

/// `v + d·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual {
            v: self.v / o.v,
            d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
        }
    }
}

impl Field for Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual {
            v: e,
            d: self.d * e,
        }
    }
}

fn pointwise<T: Field>(kind: Pointwise, x: T) -> T {
    match kind {
        Pointwise::Identity | Pointwise::Not => x,
        Pointwise::Sigmoid => T::constant(1.0) / (T::constant(1.0) + (T::constant(0.0) - x).exp()),
        Pointwise::Relu => {
            if x.value() > 0.0 {
                x
            } else {
                T::constant(0.0)
            }
        }
    }
}

fn param_count(l: &LayerSpec) -> usize {
    match l {
        LayerSpec::Linear { input, output } => input * output,
        LayerSpec::Bias { width } => *width,
        LayerSpec::Dense { input, output, .. } => input * output + output,
        LayerSpec::Conv { kernel, .. } | LayerSpec::Cpr { kernel, .. } => kernel * kernel,
        _ => 0,
    }
}

fn matvec<T: Field>(m: &[T], x: &[T], rows: usize) -> Vec<T> {
    let cols = x.len();
    (0..rows)
        .map(|i| (0..cols).fold(T::constant(0.0), |acc, j| acc + m[i * cols + j] * x[j]))
        .collect()
}

fn conv<T: Field>(kernel: &[T], image: &[T], k: usize, m: usize) -> Vec<T> {
    let n = m - k + 1;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = T::constant(0.0);
            for u in 0..k {
                for v in 0..k {
                    acc = acc + kernel[u * k + v] * image[(i + u) * m + (j + v)];
                }
            }
            out.push(acc);
        }
    }
    out
}

fn pool<T: Field>(x: &[T], k: usize, n: usize) -> Vec<T> {
    let side = k * n;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut best = x[(i * k) * side + j * k];
            for u in 0..k {
                for v in 0..k {
                    let c = x[(i * k + u) * side + (j * k + v)];
                    if c.value() > best.value() {
                        best = c;
                    }
                }
            }
            out.push(best);
        }
    }
    out
}

fn softmax<T: Field>(x: &[T]) -> Vec<T> {
    let max = x
        .iter()
        .map(|v| v.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<T> = x.iter().map(|&v| (v - T::constant(max)).exp()).collect();
    let z = e.iter().fold(T::constant(0.0), |acc, &v| acc + v);
    e.into_iter().map(|v| v / z).collect()
}

/// Evaluates a layer chain directly from the layer formulas, without any
/// lens. Parameters are laid out last layer first, as Para composition
/// does; a dense layer's block is its bias followed by its weights.
pub fn eval_chain<T: Field>(chain: &[LayerSpec], params: &[T], input: &[T]) -> Vec<T> {
    let mut offset = params.len();
    let mut x = input.to_vec();
    for layer in chain {
        let n = param_count(layer);
        offset -= n;
        let p = &params[offset..offset + n];
        x = match layer {
            LayerSpec::Linear { output, .. } => matvec(p, &x, *output),
            LayerSpec::Bias { .. } => p.iter().zip(&x).map(|(&b, &v)| b + v).collect(),
            LayerSpec::Activation { kind, .. } => x.iter().map(|&v| pointwise(*kind, v)).collect(),
            LayerSpec::Dense {
                output, activation, ..
            } => {
                let (b, m) = p.split_at(*output);
                matvec(m, &x, *output)
                    .into_iter()
                    .zip(b)
                    .map(|(v, &b)| pointwise(*activation, v + b))
                    .collect()
            }
            LayerSpec::Conv { kernel, image } => conv(p, &x, *kernel, *image),
            LayerSpec::MaxPool { window, output } => pool(&x, *window, *output),
            LayerSpec::Cpr {
                kernel,
                image,
                window,
            } => {
                let c = conv(p, &x, *kernel, *image);
                let n = image - kernel + 1;
                pool(&c, *window, n / window)
                    .into_iter()
                    .map(|v| pointwise(Pointwise::Relu, v))
                    .collect()
            }
            LayerSpec::Softmax { .. } => softmax(&x),
            LayerSpec::Reshape { .. } => x,
        };
    }
    x
}

/// `Jᵀ·δ` of `x ↦ f(x)` at `x`, column by column with dual numbers.
pub fn dual_vjp(f: impl Fn(&[Dual]) -> Vec<Dual>, x: &[f64], delta: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let seeded: Vec<Dual> = x
                .iter()
                .enumerate()
                .map(|(j, &v)| Dual {
                    v,
                    d: if i == j { 1.0 } else { 0.0 },
                })
                .collect();
            f(&seeded).iter().zip(delta).map(|(y, &d)| y.d * d).sum()
        })
        .collect()
}

/// Reverse derivative of a circuit from its formal partials:
/// `R[f](x, δ)_i = Σ_j ∂f_j/∂x_i(x) · δ_j`.
pub fn symbolic_vjp(polys: &[PolyZ2], vars: usize, x: &[Z2], delta: &[Z2]) -> Vec<Z2> {
    (0..vars)
        .map(|i| {
            polys
                .iter()
                .zip(delta)
                .fold(Z2::ZERO, |acc, (f, &d)| acc + f.derivative(i).eval(x) * d)
        })
        .collect()
}

/// Largest deviation observed for one axiom.
#[derive(Debug, Clone, PartialEq)]
pub struct LawRow {
    pub law: &'static str,
    pub instances: usize,
    pub max_deviation: f64,
}

/// Random instance generator for the axiom suite: a pair of lenses with a
/// common interface, and a second-stage lens for the chain rule together
/// with the monolithic reverse derivative of the composite.
pub trait AxiomBackend: Scalar {
    fn pair<R: Rng + ?Sized>(rng: &mut R) -> Result<(Lens<Self>, Lens<Self>)>;
    fn point<R: Rng + ?Sized>(rng: &mut R, shape: &Shape) -> Tensor<Self>;
    /// `(f, g, oracle)` where `oracle(a, δ)` is `R[f ; g](a, δ)` computed
    /// without lens composition.
    #[allow(clippy::type_complexity)]
    fn chain<R: Rng + ?Sized>(
        rng: &mut R,
    ) -> Result<(
        Lens<Self>,
        Lens<Self>,
        Box<dyn Fn(&Tensor<Self>, &Tensor<Self>) -> Tensor<Self>>,
    )>;
}

impl AxiomBackend for f64 {
    fn pair<R: Rng + ?Sized>(rng: &mut R) -> Result<(Lens<f64>, Lens<f64>)> {
        let (a, b) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let mut side = || -> Result<Lens<f64>> {
            let depth = rng.gen_range(1..=3);
            let chain = random_layer_chain(rng, a, Some(b), depth, 6);
            let f = sequential(&chain)?;
            let p = uniform(rng, &f.param().point);
            close_param(&f, p)
        };
        Ok((side()?, side()?))
    }

    fn point<R: Rng + ?Sized>(rng: &mut R, shape: &Shape) -> Tensor<f64> {
        uniform(rng, shape)
    }

    fn chain<R: Rng + ?Sized>(
        rng: &mut R,
    ) -> Result<(
        Lens<f64>,
        Lens<f64>,
        Box<dyn Fn(&Tensor<f64>, &Tensor<f64>) -> Tensor<f64>>,
    )> {
        let a = rng.gen_range(1..=6);
        let b = rng.gen_range(1..=6);
        let c = rng.gen_range(1..=6);
        let (df, dg) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let cf = random_layer_chain(rng, a, Some(b), df, 6);
        let cg = random_layer_chain(rng, b, Some(c), dg, 6);
        let f = sequential(&cf)?;
        let g = sequential(&cg)?;
        let q = uniform(rng, &g.param().point);
        let qd = q.data().to_vec();
        let g_closed = close_param(&g, q)?;
        let np = f.param().point.numel();
        let oracle = move |x: &Tensor<f64>, d: &Tensor<f64>| {
            let run = |v: &[Dual]| {
                let (p, a) = v.split_at(np);
                let mid = eval_chain(&cf, p, a);
                let q: Vec<Dual> = qd.iter().map(|&v| Dual::constant(v)).collect();
                eval_chain(&cg, &q, &mid)
            };
            Tensor::from_vec(dual_vjp(run, x.data(), d.data()))
        };
        Ok((f.lens().clone(), g_closed, Box::new(oracle)))
    }
}

impl AxiomBackend for Z2 {
    fn pair<R: Rng + ?Sized>(rng: &mut R) -> Result<(Lens<Z2>, Lens<Z2>)> {
        let (a, b) = (rng.gen_range(1..=4), rng.gen_range(1..=3));
        let mut side = || -> Result<Lens<Z2>> {
            let gates = rng.gen_range(1..=8);
            Ok(random_circuit(rng, 0, a, gates, b).build()?.lens().clone())
        };
        Ok((side()?, side()?))
    }

    fn point<R: Rng + ?Sized>(rng: &mut R, shape: &Shape) -> Tensor<Z2> {
        random_bits(rng, shape)
    }

    fn chain<R: Rng + ?Sized>(
        rng: &mut R,
    ) -> Result<(
        Lens<Z2>,
        Lens<Z2>,
        Box<dyn Fn(&Tensor<Z2>, &Tensor<Z2>) -> Tensor<Z2>>,
    )> {
        let (a, b, c) = (
            rng.gen_range(1..=4),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
        );
        let gates = rng.gen_range(1..=6);
        let cf = random_circuit(rng, 0, a, gates, b);
        let gates = rng.gen_range(1..=6);
        let cg = random_circuit(rng, 0, b, gates, c);
        let inner = cf.polynomials()?;
        let composite: Vec<PolyZ2> = cg
            .polynomials()?
            .iter()
            .map(|p| p.substitute(&inner))
            .collect();
        let oracle = move |x: &Tensor<Z2>, d: &Tensor<Z2>| {
            Tensor::from_vec(symbolic_vjp(&composite, a, x.data(), d.data()))
        };
        Ok((
            cf.build()?.lens().clone(),
            cg.build()?.lens().clone(),
            Box::new(oracle),
        ))
    }
}

fn row(law: &'static str) -> LawRow {
    LawRow {
        law,
        instances: 0,
        max_deviation: 0.0,
    }
}

fn record(r: &mut LawRow, dev: f64) {
    r.instances += 1;
    r.max_deviation = r.max_deviation.max(dev);
}

/// Randomized instances of the reverse-derivative axioms RD.1 to RD.5:
/// additivity of `R` in the map, additivity of `R[f]` in its tangent,
/// identities and projections, tuplings, and the chain rule (checked
/// against a monolithic oracle as well as the unfolded formula).
pub fn axiom_suite<S: AxiomBackend, R: Rng + ?Sized>(
    rng: &mut R,
    instances: usize,
) -> Result<Vec<LawRow>> {
    let mut rows = [
        row("RD.1 R[f+g] = R[f]+R[g], R[0] = 0"),
        row("RD.2 R[f](a, δ1+δ2) additive, R[f](a, 0) = 0"),
        row("RD.3 identity and projections"),
        row("RD.4 tupling and products"),
        row("RD.5 chain rule"),
    ];
    for _ in 0..instances {
        let (f, g) = S::pair(rng)?;
        let (ai, bi) = (f.src().clone(), f.dst().clone());
        let a = S::point(rng, &ai.point);
        let (d1, d2) = (S::point(rng, &bi.tangent), S::point(rng, &bi.tangent));

        // RD.1: f + g as copy ; (f ⊗ g) ; add
        let sum = Lens::copy(ai.point.clone())
            .compose(&f.tensor(&g))?
            .compose(&Lens::add(bi.point.clone()))?;
        let lhs = sum.put(&a, &d1)?;
        let rhs = f.put(&a, &d1)?.add(&g.put(&a, &d1)?)?;
        let zero = Lens::<S>::zero(ai.point.clone(), bi.point.clone()).put(&a, &d1)?;
        record(
            &mut rows[0],
            deviation(&lhs, &rhs).max(deviation(&zero, &Tensor::zeros(ai.tangent.clone()))),
        );

        // RD.2
        let lhs = f.put(&a, &d1.add(&d2)?)?;
        let rhs = f.put(&a, &d1)?.add(&f.put(&a, &d2)?)?;
        let at_zero = f.put(&a, &Tensor::zeros(bi.tangent.clone()))?;
        record(
            &mut rows[1],
            deviation(&lhs, &rhs).max(deviation(&at_zero, &Tensor::zeros(ai.tangent.clone()))),
        );

        // RD.3: R[1] = π1, R[π0] = ι0, and (f ⊗ g) ; π0 pads the g side with 0
        let c = S::point(rng, &ai.point);
        let da = S::point(rng, &ai.tangent);
        let id_dev = deviation(&Lens::identity(ai.clone()).put(&a, &da)?, &da);
        let ac = Tensor::concat(&[&a, &c]);
        let p0 = Lens::proj0(ai.point.clone(), ai.point.clone()).put(&ac, &a)?;
        let p1 = Lens::proj1(ai.point.clone(), ai.point.clone()).put(&ac, &c)?;
        let z = Tensor::<S>::zeros(ai.tangent.clone());
        let proj = Lens::proj0(bi.point.clone(), bi.point.clone());
        let through = f.tensor(&g).compose(&proj)?.put(&ac, &d1)?;
        let expect = Tensor::concat(&[&f.put(&a, &d1)?, &z]);
        record(
            &mut rows[2],
            id_dev
                .max(deviation(&p0, &Tensor::concat(&[&a, &z])))
                .max(deviation(&p1, &Tensor::concat(&[&z, &c])))
                .max(deviation(&through, &expect)),
        );

        // RD.4: ⟨f, g⟩ = copy ; (f ⊗ g) and the componentwise product
        let tuple = Lens::copy(ai.point.clone()).compose(&f.tensor(&g))?;
        let dd = Tensor::concat(&[&d1, &d2]);
        let lhs = tuple.put(&a, &dd)?;
        let rhs = f.put(&a, &d1)?.add(&g.put(&a, &d2)?)?;
        let prod = f.tensor(&g).put(&ac, &dd)?;
        let split = Tensor::concat(&[&f.put(&a, &d1)?, &g.put(&c, &d2)?]);
        record(
            &mut rows[3],
            deviation(&lhs, &rhs).max(deviation(&prod, &split)),
        );

        // RD.5
        let (f, g, oracle) = S::chain(rng)?;
        let x = S::point(rng, &f.src().point);
        let d = S::point(rng, &g.dst().tangent);
        let composite = f.compose(&g)?.put(&x, &d)?;
        let unfolded = f.put(&x, &g.put(&f.get(&x)?, &d)?)?;
        record(
            &mut rows[4],
            deviation(&composite, &oracle(&x, &d)).max(deviation(&composite, &unfolded)),
        );
    }
    Ok(rows.to_vec())
}

/// Random instances of the coherence of reparameterisation with Para
/// composition: reparameterising `f` by `α` and `g` by `β` and then
/// composing agrees with composing and reparameterising by `β ⊗ α`.
pub trait CoherenceBackend: AxiomBackend {
    /// A parametric lens `A → B` and a reparameterisation into its parameter.
    #[allow(clippy::type_complexity)]
    fn layer<R: Rng + ?Sized>(
        rng: &mut R,
        input: usize,
    ) -> Result<(ParametricLens<Self>, Lens<Self>)>;
}

impl CoherenceBackend for f64 {
    fn layer<R: Rng + ?Sized>(
        rng: &mut R,
        input: usize,
    ) -> Result<(ParametricLens<f64>, Lens<f64>)> {
        let mut f;
        loop {
            let depth = rng.gen_range(1..=3);
            let chain = random_layer_chain(rng, input, None, depth, 6);
            f = sequential(&chain)?;
            if !f.param().point.is_unit() {
                break;
            }
        }
        let p = f.param().point.clone();
        let r = match rng.gen_range(0..4) {
            0 => momentum(rng.gen_range(0.0..1.0), p).lens().clone(),
            1 => nesterov(rng.gen_range(0.0..1.0), p).lens().clone(),
            2 => basic_update::<f64>(Polarity::Descent, p).lens().clone(),
            _ => {
                let q = rng.gen_range(1..=6);
                let depth = rng.gen_range(1..=2);
                let chain = random_layer_chain(rng, q, Some(p.numel()), depth, 6);
                let h = sequential(&chain)?;
                let hp = uniform(rng, &h.param().point);
                close_param(&h, hp)?.compose(&Lens::reshape([p.numel()], p)?)?
            }
        };
        Ok((f, r))
    }
}

impl CoherenceBackend for Z2 {
    fn layer<R: Rng + ?Sized>(rng: &mut R, input: usize) -> Result<(ParametricLens<Z2>, Lens<Z2>)> {
        let np = rng.gen_range(1..=3);
        let outputs = rng.gen_range(1..=3);
        let gates = rng.gen_range(1..=8);
        let f = random_circuit(rng, np, input, gates, outputs).build()?;
        let r = if rng.gen() {
            basic_update::<Z2>(Polarity::Ascent, [np]).lens().clone()
        } else {
            let q = rng.gen_range(1..=3);
            let gates = rng.gen_range(1..=6);
            random_circuit(rng, 0, q, gates, np).build()?.lens().clone()
        };
        Ok((f, r))
    }
}

/// Largest deviation over `instances` random coherence instances, on both
/// the forward and the backward map.
pub fn coherence_suite<S: CoherenceBackend, R: Rng + ?Sized>(
    rng: &mut R,
    instances: usize,
) -> Result<LawRow> {
    let mut r = row("reparameterise/compose coherence");
    for _ in 0..instances {
        let a = rng.gen_range(1..=4);
        let (f, alpha) = S::layer(rng, a)?;
        let b = f.dst().point.numel();
        let (g, beta) = S::layer(rng, b)?;
        let lhs = f
            .reparameterise(&alpha)?
            .compose(&g.reparameterise(&beta)?)?;
        let rhs = f.compose(&g)?.reparameterise(&beta.tensor(&alpha))?;
        let x = S::point(rng, &lhs.lens().src().point);
        let d = S::point(rng, &lhs.lens().dst().tangent);
        let dev = deviation(&lhs.lens().get(&x)?, &rhs.lens().get(&x)?).max(deviation(
            &lhs.lens().put(&x, &d)?,
            &rhs.lens().put(&x, &d)?,
        ));
        record(&mut r, dev);
    }
    Ok(r)
}

/// Number of circuits among `count` random ones (at most 6 variables and
/// 12 gates) whose compiled backward disagrees with the symbolic partials
/// somewhere on the full cube.
pub fn z2_oracle_suite<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<(usize, usize)> {
    let mut failing = 0;
    let mut entries = 0;
    for _ in 0..count {
        let params = rng.gen_range(0..=3);
        let inputs = rng.gen_range(1..=6 - params);
        let gates = rng.gen_range(1..=12);
        let outputs = rng.gen_range(1..=3);
        let c: Circuit = random_circuit(rng, params, inputs, gates, outputs);
        let bad = crate::boolean::oracle_mismatches(&c)?;
        entries += bad;
        if bad > 0 {
            failing += 1;
        }
    }
    Ok((failing, entries))
}
