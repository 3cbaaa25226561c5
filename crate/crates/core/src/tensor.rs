//! Shaped tensors over a pluggable scalar semiring.
//!
//! Two carriers are provided: IEEE-754 doubles with the usual `+` and `·`,
//! and [`Z2`], the two-element field where `+` is XOR and `·` is AND. Every
//! tensor stores its elements in a flat row-major buffer together with its
//! [`Shape`]. Shapes are validated once, when an operation (or a lens
//! composite) is built, not per element.
//!
//! Products of objects are flattened: the product of a `[2, 2]` object and
//! a `[3]` object is the flat object `[7]`, first factor first. The monoidal
//! unit is the empty object `[0]`, which is absorbed by products.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Real64,
    Z2,
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarKind::Real64 => f.write_str("Real64"),
            ScalarKind::Z2 => f.write_str("Z2"),
        }
    }
}

/// An element of the two-element field. Stored one bit per byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Z2(bool);

impl Z2 {
    pub const ZERO: Z2 = Z2(false);
    pub const ONE: Z2 = Z2(true);

    pub const fn new(bit: bool) -> Self {
        Z2(bit)
    }

    pub const fn bit(self) -> bool {
        self.0
    }
}

impl From<bool> for Z2 {
    fn from(b: bool) -> Self {
        Z2(b)
    }
}

impl From<u8> for Z2 {
    fn from(b: u8) -> Self {
        Z2(b & 1 == 1)
    }
}

impl fmt::Display for Z2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0 { "1" } else { "0" })
    }
}

impl Add for Z2 {
    type Output = Z2;
    fn add(self, rhs: Z2) -> Z2 {
        Z2(self.0 ^ rhs.0)
    }
}

impl Sub for Z2 {
    type Output = Z2;
    fn sub(self, rhs: Z2) -> Z2 {
        Z2(self.0 ^ rhs.0)
    }
}

impl Mul for Z2 {
    type Output = Z2;
    fn mul(self, rhs: Z2) -> Z2 {
        Z2(self.0 & rhs.0)
    }
}

impl Neg for Z2 {
    type Output = Z2;
    fn neg(self) -> Z2 {
        self
    }
}

/// Pointwise scalar maps that tensors know how to apply by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pointwise {
    Identity,
    Sigmoid,
    Relu,
    Not,
}

impl Pointwise {
    pub fn name(self) -> &'static str {
        match self {
            Pointwise::Identity => "identity",
            Pointwise::Sigmoid => "sigmoid",
            Pointwise::Relu => "relu",
            Pointwise::Not => "not",
        }
    }
}

/// A commutative semiring with additive inverses, usable as a tensor carrier.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    const KIND: ScalarKind;

    fn zero() -> Self;
    fn one() -> Self;
    fn to_f64(self) -> f64;
    /// Z2 maps every nonzero value to one.
    fn from_f64(v: f64) -> Self;
    /// `None` when the map is not defined over this carrier.
    fn pointwise(f: Pointwise, x: Self) -> Option<Self>;
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real64;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn pointwise(f: Pointwise, x: Self) -> Option<Self> {
        match f {
            Pointwise::Identity => Some(x),
            Pointwise::Sigmoid => Some(sigmoid(x)),
            Pointwise::Relu => Some(if x > 0.0 { x } else { 0.0 }),
            Pointwise::Not => None,
        }
    }
}

impl Scalar for Z2 {
    const KIND: ScalarKind = ScalarKind::Z2;

    fn zero() -> Self {
        Z2::ZERO
    }
    fn one() -> Self {
        Z2::ONE
    }
    fn to_f64(self) -> f64 {
        if self.0 {
            1.0
        } else {
            0.0
        }
    }
    fn from_f64(v: f64) -> Self {
        Z2(v != 0.0)
    }
    fn pointwise(f: Pointwise, x: Self) -> Option<Self> {
        match f {
            Pointwise::Identity => Some(x),
            Pointwise::Not => Some(x + Z2::ONE),
            Pointwise::Sigmoid | Pointwise::Relu => None,
        }
    }
}

/// `exp(x) / (exp(x) + 1)`, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (e + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Self {
        Shape(dims.into())
    }

    /// Zero-dimensional: one element.
    pub fn scalar() -> Self {
        Shape(Vec::new())
    }

    pub fn vector(n: usize) -> Self {
        Shape(vec![n])
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape(vec![rows, cols])
    }

    /// The monoidal unit: no elements.
    pub fn unit() -> Self {
        Shape(vec![0])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_unit(&self) -> bool {
        self.numel() == 0
    }

    /// Flattened product object. The unit is absorbed on either side.
    pub fn product(&self, other: &Shape) -> Shape {
        if self.is_unit() {
            other.clone()
        } else if other.is_unit() {
            self.clone()
        } else {
            Shape::vector(self.numel() + other.numel())
        }
    }

    pub fn product_all<'a>(shapes: impl IntoIterator<Item = &'a Shape>) -> Shape {
        shapes
            .into_iter()
            .fold(Shape::unit(), |acc, s| acc.product(s))
    }

    /// `n`-fold product of this object with itself.
    pub fn power(&self, n: usize) -> Shape {
        (0..n).fold(Shape::unit(), |acc, _| acc.product(self))
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

impl From<Vec<usize>> for Shape {
    fn from(v: Vec<usize>) -> Self {
        Shape(v)
    }
}

impl<const N: usize> From<[usize; N]> for Shape {
    fn from(v: [usize; N]) -> Self {
        Shape(v.to_vec())
    }
}

/// A shaped view into a shared flat buffer. Clones and splits share the
/// buffer; every operation that produces new values allocates.
#[derive(Clone)]
pub struct Tensor<S> {
    shape: Shape,
    buf: Arc<Vec<S>>,
    off: usize,
}

impl<S: fmt::Debug> fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.view())
            .finish()
    }
}

impl<S: PartialEq> PartialEq for Tensor<S> {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.view() == other.view()
    }
}

impl<S> Tensor<S> {
    fn raw(shape: Shape, data: Vec<S>) -> Self {
        Tensor {
            shape,
            buf: Arc::new(data),
            off: 0,
        }
    }

    fn view(&self) -> &[S] {
        &self.buf[self.off..self.off + self.shape.numel()]
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: impl Into<Shape>, data: Vec<S>) -> Result<Self> {
        let shape = shape.into();
        if shape.numel() != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                &shape,
                &Shape::vector(data.len()),
            ));
        }
        Ok(Tensor::raw(shape, data))
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        Tensor::raw(Shape::vector(data.len()), data)
    }

    pub fn scalar(v: S) -> Self {
        Tensor::raw(Shape::scalar(), vec![v])
    }

    pub fn unit() -> Self {
        Tensor::raw(Shape::unit(), Vec::new())
    }

    pub fn zeros(shape: impl Into<Shape>) -> Self {
        Self::filled(shape, S::zero())
    }

    pub fn filled(shape: impl Into<Shape>, v: S) -> Self {
        let shape = shape.into();
        let data = vec![v; shape.numel()];
        Tensor::raw(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        self.view()
    }

    pub fn into_data(self) -> Vec<S> {
        let n = self.shape.numel();
        if self.off == 0 && self.buf.len() == n {
            Arc::try_unwrap(self.buf).unwrap_or_else(|b| (*b).clone())
        } else {
            self.view().to_vec()
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.numel()
    }

    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        let shape = shape.into();
        if shape.numel() != self.data().len() {
            return Err(Error::shape("reshape", &shape, &self.shape));
        }
        Ok(Tensor {
            shape,
            buf: self.buf,
            off: self.off,
        })
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Tensor::raw(
            self.shape.clone(),
            self.data()
                .iter()
                .zip(other.data())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Elementwise semiring addition.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "tensor_add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "tensor_sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor::raw(
            self.shape.clone(),
            self.data().iter().map(|&x| f(x)).collect(),
        )
    }

    pub fn dot(&self, other: &Self) -> Result<S> {
        if self.numel() != other.numel() {
            return Err(Error::shape("dot", &self.shape, &other.shape));
        }
        Ok(self
            .data()
            .iter()
            .zip(other.data())
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn sum(&self) -> S {
        self.data().iter().fold(S::zero(), |acc, &x| acc + x)
    }

    /// Applies a named scalar map pointwise.
    pub fn elementwise(&self, f: Pointwise) -> Result<Self> {
        if S::pointwise(f, S::zero()).is_none() {
            return Err(Error::kind("elementwise", f.name(), S::KIND));
        }
        Ok(self.map(|x| S::pointwise(f, x).expect("checked above")))
    }

    /// Concatenates flat buffers; the result has the product shape.
    pub fn concat(parts: &[&Tensor<S>]) -> Self {
        let shape = Shape::product_all(parts.iter().map(|t| &t.shape));
        let mut data = Vec::with_capacity(shape.numel());
        for p in parts {
            data.extend_from_slice(p.data());
        }
        Tensor::raw(shape, data)
    }

    /// Splits a flat buffer into consecutive blocks of the given shapes.
    /// The blocks share storage with `self`.
    pub fn split(&self, shapes: &[&Shape]) -> Result<Vec<Tensor<S>>> {
        let total: usize = shapes.iter().map(|s| s.numel()).sum();
        if total != self.numel() {
            return Err(Error::shape(
                "split",
                &Shape::product_all(shapes.iter().copied()),
                &self.shape,
            ));
        }
        let mut out = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for s in shapes {
            let n = s.numel();
            out.push(Tensor {
                shape: (*s).clone(),
                buf: Arc::clone(&self.buf),
                off: self.off + offset,
            });
            offset += n;
        }
        Ok(out)
    }

    pub fn split2(&self, a: &Shape, b: &Shape) -> Result<(Tensor<S>, Tensor<S>)> {
        let mut parts = self.split(&[a, b])?.into_iter();
        Ok((parts.next().unwrap(), parts.next().unwrap()))
    }

    /// Matrix-vector product `M · x` with `M` of shape `[r, c]`.
    pub fn matmul(m: &Tensor<S>, x: &Tensor<S>) -> Result<Self> {
        let (r, c) = matrix_dims(m, "matmul")?;
        if x.numel() != c {
            return Err(Error::shape("matmul", &Shape::vector(c), &x.shape));
        }
        let data = m
            .data()
            .chunks_exact(c.max(1))
            .take(r)
            .map(|row| {
                row.iter()
                    .zip(x.data())
                    .fold(S::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        Ok(Tensor::raw(Shape::vector(r), data))
    }

    /// `Mᵀ · y` for `M` of shape `[r, c]` and `y` of length `r`.
    pub fn matmul_transposed(m: &Tensor<S>, y: &Tensor<S>) -> Result<Self> {
        let (r, c) = matrix_dims(m, "matmul_transposed")?;
        if y.numel() != r {
            return Err(Error::shape(
                "matmul_transposed",
                &Shape::vector(r),
                &y.shape,
            ));
        }
        let mut out = vec![S::zero(); c];
        for (row, &yi) in m.data().chunks_exact(c.max(1)).zip(y.data()) {
            for (o, &mij) in out.iter_mut().zip(row) {
                *o = *o + mij * yi;
            }
        }
        Ok(Tensor::raw(Shape::vector(c), out))
    }

    /// Outer product `u ⊗ v`, shape `[|u|, |v|]`.
    pub fn outer(u: &Tensor<S>, v: &Tensor<S>) -> Self {
        let mut data = Vec::with_capacity(u.numel() * v.numel());
        for &a in u.data() {
            data.extend(v.data().iter().map(|&b| a * b));
        }
        Tensor::raw(Shape::matrix(u.numel(), v.numel()), data)
    }

    /// Valid-mode 2D cross-correlation of a `k×k` kernel over an `m×m`
    /// image, producing an `n×n` image with `n = max(m,k) - min(m,k) + 1`.
    pub fn conv2d_valid(kernel: &Tensor<S>, image: &Tensor<S>) -> Result<Self> {
        let k = square_side(kernel, "conv2d_valid kernel")?;
        let m = square_side(image, "conv2d_valid image")?;
        if k > m {
            return Err(Error::shape(
                "conv2d_valid (kernel larger than image)",
                &Shape::matrix(m, m),
                &kernel.shape,
            ));
        }
        let n = conv_output_side(k, m);
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for u in 0..k {
                    for v in 0..k {
                        acc = acc + kernel.data()[u * k + v] * image.data()[(i + u) * m + (j + v)];
                    }
                }
                data.push(acc);
            }
        }
        Ok(Tensor::raw(Shape::matrix(n, n), data))
    }
}

impl Tensor<f64> {
    /// Index of the first maximal element.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &x) in self.data().iter().enumerate() {
            match best {
                Some((_, b)) if x <= b => {}
                _ => best = Some((i, x)),
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn is_finite(&self) -> bool {
        self.data().iter().all(|x| x.is_finite())
    }
}

/// Output side of a valid convolution.
pub fn conv_output_side(k: usize, m: usize) -> usize {
    m.max(k) - m.min(k) + 1
}

fn matrix_dims<S>(m: &Tensor<S>, op: &str) -> Result<(usize, usize)> {
    match m.shape.dims() {
        [r, c] => Ok((*r, *c)),
        _ => Err(Error::ShapeMismatch {
            context: format!("{op} (expected a matrix)"),
            expected: Shape::matrix(0, 0),
            found: m.shape.clone(),
        }),
    }
}

fn square_side<S>(t: &Tensor<S>, op: &str) -> Result<usize> {
    match t.shape.dims() {
        [a, b] if a == b => Ok(*a),
        _ => Err(Error::ShapeMismatch {
            context: format!("{op} (expected a square matrix)"),
            expected: Shape::matrix(0, 0),
            found: t.shape.clone(),
        }),
    }
}
