//! Loss maps and learning rates.
//!
//! A loss is a parametric lens whose parameter port carries the true label
//! `b_t` and whose input is the prediction `b_p`; `put` returns the label
//! change followed by the prediction change. A learning rate is a lens from
//! the loss object into the unit, whose backward map injects the change
//! that starts backpropagation.

use crate::error::{Error, Result};
use crate::lens::{Interface, Lens};
use crate::para::{lift_primitive, ParametricLens};
use crate::smooth::{log_softmax, softmax};
use crate::tensor::{Scalar, Shape, Tensor, Z2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Quadratic,
    SoftmaxCrossEntropy,
    Dot,
    Xor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateKind {
    /// `α*(l) = c`; the sign is part of `c`.
    Constant(f64),
    Identity,
    /// `α*(l) = -ε·l`.
    Proportional(f64),
}

fn positive(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "loss width must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `½ Σ (b_p - b_t)²`. Changes: `α·(b_t - b_p)` on the label,
/// `α·(b_p - b_t)` on the prediction.
pub fn quadratic(b: usize) -> Result<ParametricLens<f64>> {
    positive(b)?;
    Ok(lift_primitive::<f64>(
        format!("quadratic({b})"),
        [b],
        [b],
        Shape::scalar(),
        |t, p| {
            let d = p.sub(t)?;
            Ok(Tensor::scalar(0.5 * d.dot(&d)?))
        },
        |t, p, alpha| {
            let a = alpha.data()[0];
            let d = p.sub(t)?;
            Ok((d.scale(-a), d.scale(a)))
        },
    ))
}

/// Checks that `t` is a probability vector within `1e-6`.
pub fn check_distribution(t: &Tensor<f64>) -> Result<()> {
    if let Some(v) = t.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NotADistribution(format!("entry {v} is negative")));
    }
    let s = t.sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

/// `-Σ (b_t)_i log Softmax(b_p)_i` with `b_t` a distribution. The
/// prediction change is `α·(Softmax(b_p) - b_t)`; the label change is
/// `-α·log Softmax(b_p)`.
pub fn softmax_cross_entropy(b: usize) -> Result<ParametricLens<f64>> {
    positive(b)?;
    Ok(lift_primitive::<f64>(
        format!("softmax_ce({b})"),
        [b],
        [b],
        Shape::scalar(),
        |t, p| {
            check_distribution(t)?;
            Ok(Tensor::scalar(-t.dot(&log_softmax(p))?))
        },
        |t, p, alpha| {
            check_distribution(t)?;
            let a = alpha.data()[0];
            let dp = softmax(p).sub(t)?.scale(a);
            Ok((log_softmax(p).scale(-a), dp))
        },
    ))
}

/// Converts logits to a label distribution.
pub fn distribution_from_logits(logits: &Tensor<f64>) -> Tensor<f64> {
    softmax(logits)
}

/// `b_t · b_p`; changes `(α·b_p, α·b_t)`.
pub fn dot<S: Scalar>(b: usize) -> Result<ParametricLens<S>> {
    positive(b)?;
    Ok(lift_primitive(
        format!("dot({b})"),
        [b],
        [b],
        Shape::scalar(),
        |t, p| Ok(Tensor::scalar(t.dot(p)?)),
        |t, p, alpha| {
            let a = alpha.data()[0];
            Ok((p.scale(a), t.scale(a)))
        },
    ))
}

/// Boolean error `b_t + b_p` over Z2; changes `(α, α)`.
pub fn boolean_xor(b: usize) -> Result<ParametricLens<Z2>> {
    positive(b)?;
    Ok(lift_primitive(
        format!("xor({b})"),
        [b],
        [b],
        [b],
        |t, p| t.add(p),
        |_, _, alpha| Ok((alpha.clone(), alpha.clone())),
    ))
}

/// Learning-rate lens `L/L' → 1`.
pub fn rate<S: Scalar>(kind: RateKind, loss: impl Into<Shape>) -> Result<Lens<S>> {
    let l = loss.into();
    if S::KIND != f64::KIND && kind != RateKind::Identity {
        return Err(Error::kind("learning rate", rate_name(kind), S::KIND));
    }
    let backward: Box<dyn Fn(&Tensor<S>) -> Tensor<S> + Send + Sync> = match kind {
        RateKind::Identity => Box::new(|x| x.clone()),
        RateKind::Constant(c) => {
            let s = l.clone();
            Box::new(move |_| Tensor::filled(s.clone(), S::from_f64(c)))
        }
        RateKind::Proportional(eps) => Box::new(move |x| x.scale(S::from_f64(-eps))),
    };
    Ok(Lens::new(
        rate_name(kind),
        Interface::symmetric(l),
        Interface::unit(),
        |_| Ok(Tensor::unit()),
        move |x, _| Ok(backward(x)),
    ))
}

fn rate_name(kind: RateKind) -> String {
    match kind {
        RateKind::Constant(c) => format!("rate=const({c})"),
        RateKind::Identity => "rate=id".to_string(),
        RateKind::Proportional(e) => format!("rate=prop({e})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn quadratic_examples() {
        let q = quadratic(2).unwrap();
        let (bt, bp) = (t(&[1.0, 2.0]), t(&[3.0, 5.0]));
        assert_eq!(q.get(&bt, &bp).unwrap().data(), &[6.5]);
        let (dt, dp) = q.put(&bt, &bp, &t(&[1.0])).unwrap();
        assert_eq!(dp.data(), &[2.0, 3.0]);
        assert_eq!(dt.data(), &[-2.0, -3.0]);
        let (dt, dp) = q.put(&bt, &bt, &t(&[1.0])).unwrap();
        assert!(dt.data().iter().chain(dp.data()).all(|&v| v == 0.0));
        assert_eq!(q.get(&bt, &bt).unwrap().data(), &[0.0]);
    }

    #[test]
    fn softmax_ce_examples() {
        let l = softmax_cross_entropy(2).unwrap();
        let (_, dp) = l.put(&t(&[1.0, 0.0]), &t(&[0.0, 0.0]), &t(&[1.0])).unwrap();
        assert_eq!(dp.data(), &[-0.5, 0.5]);
        let bp = t(&[0.3, -1.2]);
        let (_, dp) = l.put(&softmax(&bp), &bp, &t(&[1.0])).unwrap();
        assert!(dp.data().iter().all(|v| v.abs() < 1e-15));
        assert!(matches!(
            l.get(&t(&[0.7, 0.7]), &bp),
            Err(Error::NotADistribution(_))
        ));
        assert!(matches!(
            l.get(&t(&[1.5, -0.5]), &bp),
            Err(Error::NotADistribution(_))
        ));
    }

    #[test]
    fn softmax_ce_prediction_change_matches_finite_differences() {
        let l = softmax_cross_entropy(3).unwrap();
        let bt = t(&[0.2, 0.5, 0.3]);
        let bp = t(&[0.4, -0.7, 1.1]);
        let (_, dp) = l.put(&bt, &bp, &t(&[1.0])).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut hi = bp.data().to_vec();
            let mut lo = bp.data().to_vec();
            hi[i] += h;
            lo[i] -= h;
            let f = |v: Vec<f64>| l.get(&bt, &t(&v)).unwrap().data()[0];
            let fd = (f(hi) - f(lo)) / (2.0 * h);
            assert!((fd - dp.data()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dot_examples() {
        let d = dot::<f64>(2).unwrap();
        let (dt, dp) = d.put(&t(&[0.0, 1.0]), &t(&[3.0, 4.0]), &t(&[1.0])).unwrap();
        assert_eq!((dt.data(), dp.data()), (&[3.0, 4.0][..], &[0.0, 1.0][..]));
        let (dt, dp) = d.put(&t(&[0.0, 1.0]), &t(&[3.0, 4.0]), &t(&[0.0])).unwrap();
        assert!(dt.data().iter().chain(dp.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn xor_loss() {
        let x = boolean_xor(1).unwrap();
        let one = Tensor::from_vec(vec![Z2::ONE]);
        let zero = Tensor::from_vec(vec![Z2::ZERO]);
        assert_eq!(x.get(&one, &one).unwrap(), zero);
        assert_eq!(x.get(&one, &zero).unwrap(), one);
        assert_eq!(x.put(&one, &zero, &one).unwrap(), (one.clone(), one));
    }

    #[test]
    fn rates() {
        let c = rate::<f64>(RateKind::Constant(-0.01), Shape::scalar()).unwrap();
        assert_eq!(
            c.put(&t(&[123.0]), &Tensor::unit()).unwrap().data(),
            &[-0.01]
        );
        let p = rate::<f64>(RateKind::Proportional(0.1), Shape::scalar()).unwrap();
        assert!((p.put(&t(&[2.0]), &Tensor::unit()).unwrap().data()[0] + 0.2).abs() < 1e-15);
        let i = rate::<Z2>(RateKind::Identity, [1]).unwrap();
        let one = Tensor::from_vec(vec![Z2::ONE]);
        assert_eq!(i.put(&one, &Tensor::unit()).unwrap(), one);
        assert!(matches!(
            rate::<Z2>(RateKind::Constant(1.0), [1]),
            Err(Error::KindMismatch { .. })
        ));
    }
}
