//! Parametric maps and parametric lenses.
//!
//! A parametric lens from `A/A'` to `B/B'` is a parameter interface `P/P'`
//! together with a lens `P ⊗ A → B`. Composition tensors the parameter
//! spaces: composing `f` (parameter `P`) with `g` (parameter `Q`) gives a
//! lens with parameter `Q ⊗ P`, laid out as the `q` block followed by the
//! `p` block. Reparameterisation plugs a lens `Q → P` into the parameter
//! port; optimisers are exactly such lenses.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lens::{Interface, Lens};
use crate::tensor::{Scalar, Shape, Tensor};

/// How to initialise one block of a parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform on `±sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform {
        fan_in: usize,
        fan_out: usize,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Fair coin per element; used for boolean circuits.
    RandomBits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub label: String,
    pub shape: Shape,
    pub init: Init,
}

impl ParamBlock {
    pub fn new(label: impl Into<String>, shape: impl Into<Shape>, init: Init) -> Self {
        ParamBlock {
            label: label.into(),
            shape: shape.into(),
            init,
        }
    }
}

#[derive(Clone)]
pub struct ParametricLens<S> {
    param: Interface,
    src: Interface,
    dst: Interface,
    lens: Lens<S>,
    blocks: Vec<ParamBlock>,
}

impl<S> fmt::Debug for ParametricLens<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricLens")
            .field("param", &self.param)
            .field("src", &self.src)
            .field("dst", &self.dst)
            .field("lens", &self.lens)
            .finish()
    }
}

impl<S: Scalar> ParametricLens<S> {
    /// Wraps a lens `P ⊗ A → B`; the lens interfaces must agree.
    pub fn new(param: Interface, src: Interface, dst: Interface, lens: Lens<S>) -> Result<Self> {
        let expected = param.product(&src);
        if lens.src() != &expected || lens.dst() != &dst {
            return Err(Error::interface(
                lens.name(),
                "parametric lens",
                format!(
                    "lens is {} -> {}, declared {} -> {}",
                    lens.src(),
                    lens.dst(),
                    expected,
                    dst
                ),
            ));
        }
        let blocks = if param.point.is_unit() {
            Vec::new()
        } else {
            vec![ParamBlock::new(
                lens.name(),
                param.point.clone(),
                Init::Zeros,
            )]
        };
        Ok(ParametricLens {
            param,
            src,
            dst,
            lens,
            blocks,
        })
    }

    /// A lens with the trivial (unit) parameter.
    pub fn trivial(lens: Lens<S>) -> Self {
        let (src, dst) = (lens.src().clone(), lens.dst().clone());
        ParametricLens::new(Interface::unit(), src, dst, lens)
            .expect("unit parameter is absorbed by the product")
    }

    /// Replaces the block layout used by [`ParametricLens::init_params`].
    pub fn with_blocks(mut self, blocks: Vec<ParamBlock>) -> Result<Self> {
        let total: usize = blocks.iter().map(|b| b.shape.numel()).sum();
        if total != self.param.point.numel() {
            return Err(Error::shape(
                "parameter blocks",
                &self.param.point,
                &Shape::vector(total),
            ));
        }
        self.blocks = blocks;
        Ok(self)
    }

    pub fn param(&self) -> &Interface {
        &self.param
    }

    pub fn src(&self) -> &Interface {
        &self.src
    }

    pub fn dst(&self) -> &Interface {
        &self.dst
    }

    pub fn lens(&self) -> &Lens<S> {
        &self.lens
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn name(&self) -> &str {
        self.lens.name()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.lens = self.lens.renamed(name);
        self
    }

    pub fn get(&self, p: &Tensor<S>, a: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_param(p)?;
        self.lens.get(&Tensor::concat(&[p, a]))
    }

    /// Backward pass, split into the parameter change and the input change.
    pub fn put(
        &self,
        p: &Tensor<S>,
        a: &Tensor<S>,
        db: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        self.check_param(p)?;
        let pa = self.lens.put(&Tensor::concat(&[p, a]), db)?;
        pa.split2(&self.param.tangent, &self.src.tangent)
    }

    fn check_param(&self, p: &Tensor<S>) -> Result<()> {
        if p.numel() != self.param.point.numel() {
            return Err(Error::shape(
                format!("{} parameter", self.name()),
                &self.param.point,
                p.shape(),
            ));
        }
        Ok(())
    }

    /// Para composition `self ; g`: the underlying lens is `(1_Q ⊗ f) ; g`
    /// and the parameter is `Q ⊗ P`.
    pub fn compose(&self, g: &ParametricLens<S>) -> Result<ParametricLens<S>> {
        if self.dst != g.src {
            return Err(Error::interface(
                self.name(),
                g.name(),
                format!("{} does not match {}", self.dst, g.src),
            ));
        }
        let lens = Lens::identity(g.param.clone())
            .tensor(&self.lens)
            .compose(&g.lens)?
            .renamed(format!("{} ; {}", self.name(), g.name()));
        let mut blocks = g.blocks.clone();
        blocks.extend(self.blocks.iter().cloned());
        Ok(ParametricLens {
            param: g.param.product(&self.param),
            src: self.src.clone(),
            dst: g.dst.clone(),
            lens,
            blocks,
        })
    }

    pub fn compose_all(chain: &[ParametricLens<S>]) -> Result<ParametricLens<S>> {
        let (first, rest) = chain
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("compose_all of an empty chain".into()))?;
        rest.iter().try_fold(first.clone(), |acc, l| acc.compose(l))
    }

    /// Parallel composition. Parameters concatenate as `P ⊗ Q`, inputs as
    /// `A ⊗ C`.
    pub fn tensor(&self, g: &ParametricLens<S>) -> ParametricLens<S> {
        ParametricLens::tensor_all(&[self.clone(), g.clone()])
            .expect("a product of two factors is nonempty")
    }

    /// Parallel composition of a nonempty list. The parameter is
    /// `P_1 ⊗ … ⊗ P_n` and the input `A_1 ⊗ … ⊗ A_n`.
    pub fn tensor_all(fs: &[ParametricLens<S>]) -> Result<ParametricLens<S>> {
        match fs {
            [] => return Err(Error::InvalidArgument("tensor of no factors".into())),
            [one] => return Ok(one.clone()),
            _ => {}
        }
        let n = fs.len();
        // (P_1, …, P_n, A_1, …, A_n) -> (P_1, A_1, …, P_n, A_n)
        let blocks_in: Vec<Interface> = fs
            .iter()
            .map(|f| f.param.clone())
            .chain(fs.iter().map(|f| f.src.clone()))
            .collect();
        let order: Vec<usize> = (0..n).flat_map(|i| [i, n + i]).collect();
        let lenses: Vec<Lens<S>> = fs.iter().map(|f| f.lens.clone()).collect();
        let name = fs.iter().map(|f| f.name()).collect::<Vec<_>>().join(" ⊗ ");
        let lens = permute_blocks(&blocks_in, &order)
            .compose(&Lens::tensor_all(&lenses))
            .expect("interleaving matches the componentwise product")
            .renamed(format!("({name})"));
        let fold = |get: fn(&ParametricLens<S>) -> &Interface| {
            fs.iter()
                .fold(Interface::unit(), |acc, f| acc.product(get(f)))
        };
        Ok(ParametricLens {
            param: fold(|f| &f.param),
            src: fold(|f| &f.src),
            dst: fold(|f| &f.dst),
            lens,
            blocks: fs.iter().flat_map(|f| f.blocks.iter().cloned()).collect(),
        })
    }

    /// `n`-fold parallel composition with itself.
    pub fn tensor_power(&self, n: usize) -> Result<ParametricLens<S>> {
        if n == 0 {
            return Err(Error::InvalidArgument("tensor power of zero copies".into()));
        }
        ParametricLens::tensor_all(&vec![self.clone(); n])
    }

    /// Plugs `r: Q → P` into the parameter port: the new lens is
    /// `(r ⊗ 1_A) ; f` with parameter `Q`. The block layout becomes a
    /// single zero-initialised block; use [`ParametricLens::with_blocks`]
    /// to refine it.
    pub fn reparameterise(&self, r: &Lens<S>) -> Result<ParametricLens<S>> {
        if r.dst() != &self.param {
            return Err(Error::interface(
                r.name(),
                self.name(),
                format!(
                    "reparameterisation lands in {}, parameter is {}",
                    r.dst(),
                    self.param
                ),
            ));
        }
        let lens = r
            .tensor(&Lens::identity(self.src.clone()))
            .compose(&self.lens)?
            .renamed(format!("{} ▷ {}", r.name(), self.name()));
        ParametricLens::new(r.src().clone(), self.src.clone(), self.dst.clone(), lens)
    }

    /// Fresh parameter buffer drawn according to the block layout.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Tensor<S> {
        let mut data = Vec::with_capacity(self.param.point.numel());
        for b in &self.blocks {
            let n = b.shape.numel();
            match b.init {
                Init::Zeros => data.extend(std::iter::repeat_n(S::zero(), n)),
                Init::GlorotUniform { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    data.extend((0..n).map(|_| S::from_f64(rng.gen_range(-limit..=limit))));
                }
                Init::Uniform { low, high } => {
                    data.extend((0..n).map(|_| S::from_f64(rng.gen_range(low..=high))));
                }
                Init::RandomBits => {
                    data.extend((0..n).map(|_| {
                        if rng.gen::<bool>() {
                            S::one()
                        } else {
                            S::zero()
                        }
                    }));
                }
            }
        }
        Tensor::new(self.param.point.clone(), data).expect("blocks cover the parameter")
    }
}

/// Reorders a product of interfaces: output block `j` is input block
/// `order[j]`. Changes flow back through the inverse permutation.
fn permute_blocks<S: Scalar>(blocks: &[Interface], order: &[usize]) -> Lens<S> {
    let src = blocks
        .iter()
        .fold(Interface::unit(), |acc, b| acc.product(b));
    let dst = order
        .iter()
        .fold(Interface::unit(), |acc, &i| acc.product(&blocks[i]));
    let points: Vec<Shape> = blocks.iter().map(|b| b.point.clone()).collect();
    let tangents: Vec<Shape> = order.iter().map(|&i| blocks[i].tangent.clone()).collect();
    let mut inverse = vec![0; order.len()];
    for (j, &i) in order.iter().enumerate() {
        inverse[i] = j;
    }
    let order = order.to_vec();
    Lens::new(
        "interleave",
        src,
        dst,
        move |x| {
            let parts = x.split(&points.iter().collect::<Vec<_>>())?;
            Ok(Tensor::concat(
                &order.iter().map(|&i| &parts[i]).collect::<Vec<_>>(),
            ))
        },
        move |_, dy| {
            let parts = dy.split(&tangents.iter().collect::<Vec<_>>())?;
            Ok(Tensor::concat(
                &inverse.iter().map(|&j| &parts[j]).collect::<Vec<_>>(),
            ))
        },
    )
}

pub type ReverseFn<S> =
    dyn Fn(&Tensor<S>, &Tensor<S>, &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> + Send + Sync;

/// Registers a primitive `f: P × A → B` with its reverse derivative
/// `R[f]: P × A × B' → P' × A'` as the parametric lens `⟨f, R[f]⟩`.
/// Composites of lifted primitives obtain their reverse derivative from
/// lens composition alone.
pub fn lift_primitive<S: Scalar>(
    name: impl Into<String>,
    param: impl Into<Shape>,
    src: impl Into<Shape>,
    dst: impl Into<Shape>,
    forward: impl Fn(&Tensor<S>, &Tensor<S>) -> Result<Tensor<S>> + Send + Sync + 'static,
    reverse: impl Fn(&Tensor<S>, &Tensor<S>, &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)>
        + Send
        + Sync
        + 'static,
) -> ParametricLens<S> {
    let (param, src, dst) = (param.into(), src.into(), dst.into());
    let (p1, a1) = (param.clone(), src.clone());
    let (p2, a2) = (param.clone(), src.clone());
    let name = name.into();
    let lens = Lens::new(
        name,
        Interface::symmetric(param.product(&src)),
        Interface::symmetric(dst.clone()),
        move |pa| {
            let (p, a) = pa.split2(&p1, &a1)?;
            forward(&p, &a)
        },
        move |pa, db| {
            let (p, a) = pa.split2(&p2, &a2)?;
            let (dp, da) = reverse(&p, &a, db)?;
            Ok(Tensor::concat(&[&dp, &da]))
        },
    );
    ParametricLens::new(
        Interface::symmetric(param),
        Interface::symmetric(src),
        Interface::symmetric(dst),
        lens,
    )
    .expect("lifted interfaces are consistent by construction")
}

pub type ApplyFn<S> = dyn Fn(&Tensor<S>, &Tensor<S>) -> Result<Tensor<S>> + Send + Sync;

/// A parametric map `(P, f: P × A → B)` without a backward pass.
#[derive(Clone)]
pub struct ParametricMap<S> {
    param: Shape,
    src: Shape,
    dst: Shape,
    apply: Arc<ApplyFn<S>>,
}

impl<S: Scalar> ParametricMap<S> {
    pub fn new(
        param: impl Into<Shape>,
        src: impl Into<Shape>,
        dst: impl Into<Shape>,
        apply: impl Fn(&Tensor<S>, &Tensor<S>) -> Result<Tensor<S>> + Send + Sync + 'static,
    ) -> Self {
        ParametricMap {
            param: param.into(),
            src: src.into(),
            dst: dst.into(),
            apply: Arc::new(apply),
        }
    }

    pub fn param(&self) -> &Shape {
        &self.param
    }

    pub fn src(&self) -> &Shape {
        &self.src
    }

    pub fn dst(&self) -> &Shape {
        &self.dst
    }

    pub fn apply(&self, p: &Tensor<S>, a: &Tensor<S>) -> Result<Tensor<S>> {
        if p.numel() != self.param.numel() {
            return Err(Error::shape(
                "parametric map parameter",
                &self.param,
                p.shape(),
            ));
        }
        if a.numel() != self.src.numel() {
            return Err(Error::shape("parametric map input", &self.src, a.shape()));
        }
        (self.apply)(p, a)
    }

    /// `(Q ⊗ P, (1_Q ⊗ f) ; g)`.
    pub fn compose(&self, g: &ParametricMap<S>) -> Result<ParametricMap<S>> {
        if self.dst != g.src {
            return Err(Error::interface(
                "parametric map",
                "parametric map",
                format!("{} does not match {}", self.dst, g.src),
            ));
        }
        let (f, gf) = (self.apply.clone(), g.apply.clone());
        let (qs, ps) = (g.param.clone(), self.param.clone());
        Ok(ParametricMap {
            param: g.param.product(&self.param),
            src: self.src.clone(),
            dst: g.dst.clone(),
            apply: Arc::new(move |qp, a| {
                let (q, p) = qp.split2(&qs, &ps)?;
                gf(&q, &f(&p, a)?)
            }),
        })
    }

    /// `k`-fold self-composition of an endomap `P → P` parameterised by a
    /// data point `D`. The result takes `k` data points, laid out with the
    /// last-applied one first (the `Q ⊗ P` convention of composition); see
    /// [`pack_trajectory`].
    pub fn iterate(&self, k: usize) -> Result<ParametricMap<S>> {
        if k == 0 {
            return Err(Error::InvalidArgument("iterate needs k >= 1".into()));
        }
        if self.src != self.dst {
            return Err(Error::interface(
                "iterate",
                "iterate",
                format!("not an endomap: {} -> {}", self.src, self.dst),
            ));
        }
        (1..k).try_fold(self.clone(), |acc, _| acc.compose(self))
    }
}

/// Packs data points given in application order into the parameter layout
/// expected by [`ParametricMap::iterate`].
pub fn pack_trajectory<S: Scalar>(points_in_order: &[Tensor<S>]) -> Tensor<S> {
    let rev: Vec<&Tensor<S>> = points_in_order.iter().rev().collect();
    Tensor::concat(&rev)
}
