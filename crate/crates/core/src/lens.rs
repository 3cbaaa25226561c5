//! Bimorphic lenses: a forward (get) map `A → B` paired with a backward
//! (put) map `A × B' → A'`.
//!
//! Composition runs gets left to right and puts right to left. Internally
//! a lens also carries a vector-Jacobian map that returns the forward value
//! together with a pullback closure, so a composite's put runs every forward
//! once instead of once per layer. The pullback owns its captures, so a lens
//! stays an ordinary value that can be shared and evaluated reentrantly, and
//! `put` agrees with the recompute-on-backward definition.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::para::ParametricLens;
use crate::tensor::{Scalar, Shape, Tensor};

/// A pair of objects: points and the tangents (changes) that flow back.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interface {
    pub point: Shape,
    pub tangent: Shape,
}

impl Interface {
    pub fn new(point: Shape, tangent: Shape) -> Self {
        Interface { point, tangent }
    }

    /// `point = tangent`, as for every lens in the image of the reverse derivative.
    pub fn symmetric(shape: impl Into<Shape>) -> Self {
        let s = shape.into();
        Interface {
            point: s.clone(),
            tangent: s,
        }
    }

    pub fn unit() -> Self {
        Interface::symmetric(Shape::unit())
    }

    pub fn product(&self, other: &Interface) -> Interface {
        Interface {
            point: self.point.product(&other.point),
            tangent: self.tangent.product(&other.tangent),
        }
    }

    pub fn power(&self, n: usize) -> Interface {
        Interface {
            point: self.point.power(n),
            tangent: self.tangent.power(n),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.point.is_unit() && self.tangent.is_unit()
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}/{})", self.point, self.tangent)
    }
}

pub type ForwardFn<S> = dyn Fn(&Tensor<S>) -> Result<Tensor<S>> + Send + Sync;
/// Maps an output change back to an input change at a fixed point.
pub type Pullback<S> = Box<dyn FnOnce(&Tensor<S>) -> Result<Tensor<S>>>;
pub type VjpFn<S> = dyn Fn(&Tensor<S>) -> Result<(Tensor<S>, Pullback<S>)> + Send + Sync;

#[derive(Clone)]
pub struct Lens<S> {
    name: Arc<str>,
    src: Interface,
    dst: Interface,
    forward: Arc<ForwardFn<S>>,
    vjp: Arc<VjpFn<S>>,
}

impl<S> fmt::Debug for Lens<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lens({}: {} -> {})", self.name, self.src, self.dst)
    }
}

impl<S: Scalar> Lens<S> {
    pub fn new(
        name: impl Into<String>,
        src: Interface,
        dst: Interface,
        forward: impl Fn(&Tensor<S>) -> Result<Tensor<S>> + Send + Sync + 'static,
        backward: impl Fn(&Tensor<S>, &Tensor<S>) -> Result<Tensor<S>> + Send + Sync + 'static,
    ) -> Self {
        let forward: Arc<ForwardFn<S>> = Arc::new(forward);
        let backward = Arc::new(backward);
        let fwd = forward.clone();
        Lens {
            name: Arc::from(name.into()),
            src,
            dst,
            forward,
            vjp: Arc::new(move |a| {
                let b = fwd(a)?;
                let (a, bwd) = (a.clone(), backward.clone());
                Ok((
                    b,
                    Box::new(move |db: &Tensor<S>| bwd(&a, db)) as Pullback<S>,
                ))
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn src(&self) -> &Interface {
        &self.src
    }

    pub fn dst(&self) -> &Interface {
        &self.dst
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = Arc::from(name.into());
        self
    }

    /// Forward map. The argument is checked by element count and takes on
    /// the declared point shape.
    pub fn get(&self, a: &Tensor<S>) -> Result<Tensor<S>> {
        let a = conform(a, &self.src.point, &self.name, "get")?;
        (self.forward)(&a)
    }

    /// Backward map `(a, b') ↦ a'`.
    pub fn put(&self, a: &Tensor<S>, db: &Tensor<S>) -> Result<Tensor<S>> {
        let a = conform(a, &self.src.point, &self.name, "put point")?;
        let db = conform(db, &self.dst.tangent, &self.name, "put tangent")?;
        let (_, pullback) = (self.vjp)(&a)?;
        pullback(&db)
    }

    /// Forward value and a pullback at `a`, sharing one forward pass.
    pub fn vjp(&self, a: &Tensor<S>) -> Result<(Tensor<S>, Pullback<S>)> {
        let a = conform(a, &self.src.point, &self.name, "vjp")?;
        let (b, pullback) = (self.vjp)(&a)?;
        let (tangent, name) = (self.dst.tangent.clone(), self.name.clone());
        Ok((
            b,
            Box::new(move |db: &Tensor<S>| pullback(&conform(db, &tangent, &name, "put tangent")?)),
        ))
    }

    /// `⟨1_A, π₁⟩`.
    pub fn identity(i: Interface) -> Self {
        Lens::new(
            "id",
            i.clone(),
            i,
            |a| Ok(a.clone()),
            |_, db| Ok(db.clone()),
        )
    }

    /// Sequential composition `self ; g`.
    pub fn compose(&self, g: &Lens<S>) -> Result<Lens<S>> {
        if self.dst != g.src {
            return Err(Error::interface(
                &self.name,
                &g.name,
                format!("{} does not match {}", self.dst, g.src),
            ));
        }
        let (f1, f2) = (self.forward.clone(), g.forward.clone());
        let (v1, v2) = (self.vjp.clone(), g.vjp.clone());
        Ok(Lens {
            name: Arc::from(format!("{} ; {}", self.name, g.name)),
            src: self.src.clone(),
            dst: g.dst.clone(),
            forward: Arc::new(move |a| f2(&f1(a)?)),
            vjp: Arc::new(move |a| {
                let (b, p1) = v1(a)?;
                let (c, p2) = v2(&b)?;
                Ok((
                    c,
                    Box::new(move |dc: &Tensor<S>| p1(&p2(dc)?)) as Pullback<S>,
                ))
            }),
        })
    }

    /// Monoidal product: acts componentwise on `self.src ⊗ g.src`.
    pub fn tensor(&self, g: &Lens<S>) -> Lens<S> {
        Lens::tensor_all(&[self.clone(), g.clone()])
    }

    /// Left-to-right composite of a nonempty chain.
    pub fn compose_all(lenses: &[Lens<S>]) -> Result<Lens<S>> {
        let (first, rest) = lenses
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("compose_all of an empty chain".into()))?;
        rest.iter().try_fold(first.clone(), |acc, l| acc.compose(l))
    }

    /// Monoidal product of a list; the empty list is the identity on the unit.
    /// The input is split once and the factors' outputs concatenated once.
    pub fn tensor_all(lenses: &[Lens<S>]) -> Lens<S> {
        match lenses {
            [] => return Lens::identity(Interface::unit()),
            [one] => return one.clone(),
            _ => {}
        }
        let name = lenses
            .iter()
            .map(|l| &*l.name)
            .collect::<Vec<_>>()
            .join(" ⊗ ");
        let src = lenses
            .iter()
            .fold(Interface::unit(), |acc, l| acc.product(&l.src));
        let dst = lenses
            .iter()
            .fold(Interface::unit(), |acc, l| acc.product(&l.dst));
        let points: Arc<Vec<Shape>> =
            Arc::new(lenses.iter().map(|l| l.src.point.clone()).collect());
        let tangents: Arc<Vec<Shape>> =
            Arc::new(lenses.iter().map(|l| l.dst.tangent.clone()).collect());
        let forwards: Vec<_> = lenses.iter().map(|l| l.forward.clone()).collect();
        let vjps: Vec<_> = lenses.iter().map(|l| l.vjp.clone()).collect();
        let fpoints = points.clone();
        Lens {
            name: Arc::from(format!("({name})")),
            src,
            dst,
            forward: Arc::new(move |a| {
                let parts = a.split(&fpoints.iter().collect::<Vec<_>>())?;
                let outs = forwards
                    .iter()
                    .zip(&parts)
                    .map(|(f, x)| f(x))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tensor::concat(&outs.iter().collect::<Vec<_>>()))
            }),
            vjp: Arc::new(move |a| {
                let parts = a.split(&points.iter().collect::<Vec<_>>())?;
                let mut outs = Vec::with_capacity(parts.len());
                let mut pulls = Vec::with_capacity(parts.len());
                for (v, x) in vjps.iter().zip(&parts) {
                    let (b, p) = v(x)?;
                    outs.push(b);
                    pulls.push(p);
                }
                let tangents = tangents.clone();
                Ok((
                    Tensor::concat(&outs.iter().collect::<Vec<_>>()),
                    Box::new(move |db: &Tensor<S>| {
                        let dparts = db.split(&tangents.iter().collect::<Vec<_>>())?;
                        let das = pulls
                            .into_iter()
                            .zip(&dparts)
                            .map(|(p, d)| p(d))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Tensor::concat(&das.iter().collect::<Vec<_>>()))
                    }) as Pullback<S>,
                ))
            }),
        }
    }

    /// Copy (diagonal): forward duplicates, backward adds the two tangents.
    pub fn copy(shape: impl Into<Shape>) -> Self {
        Lens::copy_n(shape, 2)
    }

    /// `n`-fold copy; the backward sum is reduced left to right.
    pub fn copy_n(shape: impl Into<Shape>, n: usize) -> Self {
        let s = shape.into();
        let s2 = s.clone();
        Lens::new(
            format!("copy{n}"),
            Interface::symmetric(s.clone()),
            Interface::symmetric(s.power(n)),
            move |a| Ok(Tensor::concat(&vec![a; n])),
            move |_, dbs| {
                let parts = dbs.split(&vec![&s2; n])?;
                let mut acc = Tensor::zeros(s2.clone());
                for p in &parts {
                    acc = acc.add(p)?;
                }
                Ok(acc)
            },
        )
    }

    /// Addition `A × A → A`; its reverse derivative is copy.
    pub fn add(shape: impl Into<Shape>) -> Self {
        let s = shape.into();
        let s1 = s.clone();
        Lens::new(
            "add",
            Interface::symmetric(s.power(2)),
            Interface::symmetric(s),
            move |ab| {
                let (a, b) = ab.split2(&s1, &s1)?;
                a.add(&b)
            },
            |_, db| Ok(Tensor::concat(&[db, db])),
        )
    }

    /// Unique map to the unit; its reverse derivative is zero.
    pub fn delete(shape: impl Into<Shape>) -> Self {
        let s = shape.into();
        let s2 = s.clone();
        Lens::new(
            "delete",
            Interface::symmetric(s),
            Interface::unit(),
            |_| Ok(Tensor::unit()),
            move |_, _| Ok(Tensor::zeros(s2.clone())),
        )
    }

    /// The zero map between two objects.
    pub fn zero(src: impl Into<Shape>, dst: impl Into<Shape>) -> Self {
        let (s, d) = (src.into(), dst.into());
        let (s2, d2) = (s.clone(), d.clone());
        Lens::new(
            "0",
            Interface::symmetric(s),
            Interface::symmetric(d),
            move |_| Ok(Tensor::zeros(d2.clone())),
            move |_, _| Ok(Tensor::zeros(s2.clone())),
        )
    }

    /// Projection onto the first factor; backward pads with zero.
    pub fn proj0(left: impl Into<Shape>, right: impl Into<Shape>) -> Self {
        let (l, r) = (left.into(), right.into());
        let (l1, r1, r2) = (l.clone(), r.clone(), r.clone());
        Lens::new(
            "π0",
            Interface::symmetric(l.product(&r)),
            Interface::symmetric(l),
            move |ab| Ok(ab.split2(&l1, &r1)?.0),
            move |_, da| Ok(Tensor::concat(&[da, &Tensor::zeros(r2.clone())])),
        )
    }

    /// Projection onto the second factor; backward pads with zero.
    pub fn proj1(left: impl Into<Shape>, right: impl Into<Shape>) -> Self {
        let (l, r) = (left.into(), right.into());
        let (l1, r1, l2) = (l.clone(), r.clone(), l.clone());
        Lens::new(
            "π1",
            Interface::symmetric(l.product(&r)),
            Interface::symmetric(r),
            move |ab| Ok(ab.split2(&l1, &r1)?.1),
            move |_, db| Ok(Tensor::concat(&[&Tensor::zeros(l2.clone()), db])),
        )
    }

    /// Picks coordinates `indices` out of a flat `[width]` buffer. Repeated
    /// indices are allowed; the backward pass scatter-adds.
    pub fn select(width: usize, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= width) {
            return Err(Error::InvalidArgument(format!(
                "select index {bad} out of range for width {width}"
            )));
        }
        let idx = Arc::new(indices);
        let idx2 = idx.clone();
        let n = idx.len();
        Ok(Lens::new(
            format!("select{:?}", idx.as_slice()),
            Interface::symmetric(Shape::vector(width)),
            Interface::symmetric(Shape::vector(n)),
            move |a| Ok(Tensor::from_vec(idx.iter().map(|&i| a.data()[i]).collect())),
            move |_, db| {
                let mut out = vec![S::zero(); width];
                for (&i, &d) in idx2.iter().zip(db.data()) {
                    out[i] = out[i] + d;
                }
                Ok(Tensor::from_vec(out))
            },
        ))
    }

    /// Symmetry `A ⊗ B → B ⊗ A`.
    pub fn swap(a: impl Into<Shape>, b: impl Into<Shape>) -> Self {
        let (a, b) = (a.into(), b.into());
        let (a1, b1, a2, b2) = (a.clone(), b.clone(), a.clone(), b.clone());
        Lens::new(
            "swap",
            Interface::symmetric(a.product(&b)),
            Interface::symmetric(b.product(&a)),
            move |ab| {
                let (x, y) = ab.split2(&a1, &b1)?;
                Ok(Tensor::concat(&[&y, &x]))
            },
            move |_, dba| {
                let (dy, dx) = dba.split2(&b2, &a2)?;
                Ok(Tensor::concat(&[&dx, &dy]))
            },
        )
    }

    /// Changes the declared shape without touching the buffer.
    pub fn reshape(from: impl Into<Shape>, to: impl Into<Shape>) -> Result<Self> {
        let (from, to) = (from.into(), to.into());
        if from.numel() != to.numel() {
            return Err(Error::shape("reshape lens", &from, &to));
        }
        let (f1, t1) = (from.clone(), to.clone());
        Ok(Lens::new(
            format!("reshape{from}->{to}"),
            Interface::symmetric(from),
            Interface::symmetric(to),
            move |a| a.clone().reshape(t1.clone()),
            move |_, db| db.clone().reshape(f1.clone()),
        ))
    }

    /// Lens `(A/1) → (A/A')`: passes points through and discards the
    /// incoming change. Used to close off ports whose backward wire is
    /// dropped.
    pub fn discard_change(shape: impl Into<Shape>) -> Self {
        let s = shape.into();
        Lens::new(
            "discard",
            Interface::new(s.clone(), Shape::unit()),
            Interface::symmetric(s),
            |a| Ok(a.clone()),
            |_, _| Ok(Tensor::unit()),
        )
    }
}

/// The input-capture lens η: a parametric lens `1 → i` whose parameter
/// port is `i`. Get passes the parameter through, put returns the incoming
/// change, so closing a model with η turns its input into a parameter.
pub fn input_capture<S: Scalar>(i: Interface) -> ParametricLens<S> {
    let lens = Lens::identity(i.clone()).renamed("η");
    ParametricLens::new(i, Interface::unit(), lens.dst().clone(), lens)
        .expect("η interfaces are consistent by construction")
}

fn conform<S: Scalar>(t: &Tensor<S>, shape: &Shape, lens: &str, what: &str) -> Result<Tensor<S>> {
    if t.shape() == shape {
        return Ok(t.clone());
    }
    if t.numel() != shape.numel() {
        return Err(Error::shape(format!("{lens} {what}"), shape, t.shape()));
    }
    t.clone().reshape(shape.clone())
}
