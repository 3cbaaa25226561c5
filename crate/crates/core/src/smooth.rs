//! Layers and architectures over real tensors.
//!
//! Every constructor returns a [`ParametricLens`] built with
//! [`lift_primitive`] or by composing such lenses, so reverse derivatives of
//! architectures come from lens composition alone.

use crate::error::{Error, Result};
use crate::lens::{Interface, Lens};
use crate::para::{lift_primitive, Init, ParamBlock, ParametricLens};
use crate::tensor::{conv_output_side, sigmoid, Pointwise, Scalar, Shape, Tensor};

fn positive(what: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(format!("{what} must be at least 1")));
    }
    Ok(())
}

/// `x ↦ M·x` with `M` of shape `[b, a]`. The backward pass returns the
/// outer product `δ ⊗ x` for `M` and `Mᵀ·δ` for `x`.
pub fn linear(a: usize, b: usize) -> Result<ParametricLens<f64>> {
    positive("linear input width", a)?;
    positive("linear output width", b)?;
    let lens = lift_primitive(
        format!("linear({a},{b})"),
        [b, a],
        [a],
        [b],
        Tensor::matmul,
        |m, x, d| Ok((Tensor::outer(d, x), Tensor::matmul_transposed(m, d)?)),
    );
    lens.with_blocks(vec![ParamBlock::new(
        "weights",
        [b, a],
        Init::GlorotUniform {
            fan_in: a,
            fan_out: b,
        },
    )])
}

/// `x ↦ b + x`; reverse derivative of `+` is copy.
pub fn bias(n: usize) -> Result<ParametricLens<f64>> {
    positive("bias width", n)?;
    let lens = lift_primitive(
        format!("bias({n})"),
        [n],
        [n],
        [n],
        |b, x| b.add(x),
        |_, _, d| Ok((d.clone(), d.clone())),
    );
    lens.with_blocks(vec![ParamBlock::new("bias", [n], Init::Zeros)])
}

/// Trivially parameterised pointwise activation on `[n]`.
pub fn activation(kind: Pointwise, n: usize) -> Result<ParametricLens<f64>> {
    activation_on(kind, Shape::vector(n))
}

pub fn activation_on(kind: Pointwise, shape: Shape) -> Result<ParametricLens<f64>> {
    let name = format!("{}{}", kind.name(), shape);
    let (src, dst) = (shape.clone(), shape);
    let lens = match kind {
        Pointwise::Identity => lift_primitive(
            name,
            Shape::unit(),
            src,
            dst,
            |_, x| Ok(x.clone()),
            |_, _, d| Ok((Tensor::unit(), d.clone())),
        ),
        Pointwise::Sigmoid => lift_primitive(
            name,
            Shape::unit(),
            src,
            dst,
            |_, x| Ok(x.map(sigmoid)),
            |_, x, d| {
                let s = x.map(|v| {
                    let s = sigmoid(v);
                    s * (1.0 - s)
                });
                Ok((Tensor::unit(), s.hadamard(d)?))
            },
        ),
        Pointwise::Relu => lift_primitive(
            name,
            Shape::unit(),
            src,
            dst,
            |_, x| Ok(x.map(|v| if v > 0.0 { v } else { 0.0 })),
            |_, x, d| {
                let mask = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                Ok((Tensor::unit(), mask.hadamard(d)?))
            },
        ),
        Pointwise::Not => {
            return Err(Error::kind("activation", kind.name(), f64::KIND));
        }
    };
    Ok(lens)
}

/// Softargmax on `[n]`, stabilised by subtracting the maximum.
pub fn softmax_layer(n: usize) -> Result<ParametricLens<f64>> {
    positive("softmax width", n)?;
    Ok(lift_primitive(
        format!("softmax({n})"),
        Shape::unit(),
        [n],
        [n],
        |_, x| Ok(softmax(x)),
        |_, x, d| {
            let s = softmax(x);
            let sd = s.dot(d)?;
            Ok((Tensor::unit(), s.hadamard(&d.map(|v| v - sd))?))
        },
    ))
}

pub fn softmax(x: &Tensor<f64>) -> Tensor<f64> {
    let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = x.map(|v| (v - max).exp());
    let z = e.sum();
    e.map(|v| v / z)
}

pub fn log_softmax(x: &Tensor<f64>) -> Tensor<f64> {
    let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.map(|v| v - lse)
}

/// `linear ; bias ; activation`. Parameter layout is the bias block
/// followed by the weight block.
pub fn dense(a: usize, b: usize, act: Pointwise) -> Result<ParametricLens<f64>> {
    let l = linear(a, b)?
        .compose(&bias(b)?)?
        .compose(&activation(act, b)?)?;
    Ok(l.renamed(format!("dense({a},{b},{})", act.name())))
}

/// `k × k` kernel cross-correlated over an `m × m` image.
pub fn conv_layer(k: usize, m: usize) -> Result<ParametricLens<f64>> {
    positive("kernel side", k)?;
    if k > m {
        return Err(Error::shape(
            "convolution kernel",
            &Shape::matrix(m, m),
            &Shape::matrix(k, k),
        ));
    }
    let n = conv_output_side(k, m);
    let lens = lift_primitive(
        format!("conv({k},{m})"),
        [k, k],
        [m, m],
        [n, n],
        Tensor::conv2d_valid,
        move |kernel, image, d| {
            let (kd, xd, dd) = (kernel.data(), image.data(), d.data());
            let mut dk = vec![0.0; k * k];
            let mut dx = vec![0.0; m * m];
            for i in 0..n {
                for j in 0..n {
                    let g = dd[i * n + j];
                    for u in 0..k {
                        for v in 0..k {
                            let px = (i + u) * m + (j + v);
                            dk[u * k + v] += g * xd[px];
                            dx[px] += g * kd[u * k + v];
                        }
                    }
                }
            }
            Ok((Tensor::new([k, k], dk)?, Tensor::new([m, m], dx)?))
        },
    );
    lens.with_blocks(vec![ParamBlock::new(
        "kernel",
        [k, k],
        Init::GlorotUniform {
            fan_in: k * k,
            fan_out: k * k,
        },
    )])
}

/// Maximum over each `k × k` window of a `(k·n) × (k·n)` image. Ties
/// route the change to the first maximum in row-major order.
pub fn maxpool(k: usize, n: usize) -> Result<ParametricLens<f64>> {
    positive("pool window", k)?;
    positive("pool output side", n)?;
    let side = k * n;
    let argmax = move |x: &Tensor<f64>| -> Vec<usize> {
        let xd = x.data();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut best = (i * k) * side + j * k;
                for u in 0..k {
                    for v in 0..k {
                        let px = (i * k + u) * side + (j * k + v);
                        if xd[px] > xd[best] {
                            best = px;
                        }
                    }
                }
                out.push(best);
            }
        }
        out
    };
    Ok(lift_primitive(
        format!("maxpool({k},{n})"),
        Shape::unit(),
        [side, side],
        [n, n],
        move |_, x| Tensor::new([n, n], argmax(x).iter().map(|&i| x.data()[i]).collect()),
        move |_, x, d| {
            let mut dx = vec![0.0; side * side];
            for (&px, &g) in argmax(x).iter().zip(d.data()) {
                dx[px] += g;
            }
            Ok((Tensor::unit(), Tensor::new([side, side], dx)?))
        },
    ))
}

/// Trivially parameterised change of declared shape.
pub fn reshape(from: impl Into<Shape>, to: impl Into<Shape>) -> Result<ParametricLens<f64>> {
    Ok(ParametricLens::trivial(Lens::reshape(from, to)?))
}

/// Two layers sharing one parameter port: the parameter is copied into
/// both, so the backward pass sums the two parameter changes.
pub fn weight_tie<S: Scalar>(
    f: &ParametricLens<S>,
    g: &ParametricLens<S>,
) -> Result<ParametricLens<S>> {
    if f.param() != g.param() {
        return Err(Error::interface(
            f.name(),
            g.name(),
            format!("tied parameters differ: {} vs {}", f.param(), g.param()),
        ));
    }
    let copy = shared_copy(f.param(), 2)?;
    f.tensor(g)
        .reparameterise(&copy)?
        .with_blocks(f.blocks().to_vec())
        .map(|l| l.renamed(format!("tie({}, {})", f.name(), g.name())))
}

/// Applies `f` to `n` inputs with a shared parameter; the parameter change
/// is the sum (not the mean) of the per-example changes.
pub fn batch<S: Scalar>(f: &ParametricLens<S>, n: usize) -> Result<ParametricLens<S>> {
    positive("batch size", n)?;
    if n == 1 {
        return Ok(f.clone());
    }
    let copy = shared_copy(f.param(), n)?;
    f.tensor_power(n)?
        .reparameterise(&copy)?
        .with_blocks(f.blocks().to_vec())
        .map(|l| l.renamed(format!("batch({}, {n})", f.name())))
}

fn shared_copy<S: Scalar>(param: &Interface, n: usize) -> Result<Lens<S>> {
    if param.point != param.tangent {
        return Err(Error::InvalidArgument(format!(
            "cannot share the asymmetric parameter port {param}"
        )));
    }
    Ok(Lens::copy_n(param.point.clone(), n))
}

/// Two dense layers `a → h → b`.
pub fn hidden_layer(
    a: usize,
    h: usize,
    b: usize,
    hidden_act: Pointwise,
    out_act: Pointwise,
) -> Result<ParametricLens<f64>> {
    dense(a, h, hidden_act)?.compose(&dense(h, b, out_act)?)
}

/// Convolution, max-pooling and ReLU: `m × m` image, `k × k` kernel,
/// `pool × pool` windows over the `n × n` convolution output.
pub fn cpr(k: usize, m: usize, pool: usize) -> Result<ParametricLens<f64>> {
    let conv = conv_layer(k, m)?;
    let n = conv_output_side(k, m);
    positive("pool window", pool)?;
    if !n.is_multiple_of(pool) {
        return Err(Error::InvalidArgument(format!(
            "pool window {pool} does not tile the {n}x{n} convolution output"
        )));
    }
    let out = n / pool;
    conv.compose(&maxpool(pool, out)?)?
        .compose(&activation_on(Pointwise::Relu, Shape::matrix(out, out))?)
        .map(|l| l.renamed(format!("cpr({k},{m},{pool})")))
}

/// Declarative description of one layer, used by configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Linear {
        input: usize,
        output: usize,
    },
    Bias {
        width: usize,
    },
    Activation {
        kind: Pointwise,
        width: usize,
    },
    Dense {
        input: usize,
        output: usize,
        activation: Pointwise,
    },
    Conv {
        kernel: usize,
        image: usize,
    },
    MaxPool {
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

impl LayerSpec {
    pub fn build(&self) -> Result<ParametricLens<f64>> {
        match self {
            LayerSpec::Linear { input, output } => linear(*input, *output),
            LayerSpec::Bias { width } => bias(*width),
            LayerSpec::Activation { kind, width } => activation(*kind, *width),
            LayerSpec::Dense {
                input,
                output,
                activation,
            } => dense(*input, *output, *activation),
            LayerSpec::Conv { kernel, image } => conv_layer(*kernel, *image),
            LayerSpec::MaxPool { window, output } => maxpool(*window, *output),
            LayerSpec::Cpr {
                kernel,
                image,
                window,
            } => cpr(*kernel, *image, *window),
            LayerSpec::Softmax { width } => softmax_layer(*width),
            LayerSpec::Reshape { from, to } => reshape(from.clone(), to.clone()),
        }
    }
}

/// Builds and composes a layer chain, rejecting shape-inconsistent chains
/// before any computation.
pub fn sequential(layers: &[LayerSpec]) -> Result<ParametricLens<f64>> {
    let built = layers
        .iter()
        .map(LayerSpec::build)
        .collect::<Result<Vec<_>>>()?;
    ParametricLens::compose_all(&built)
}
