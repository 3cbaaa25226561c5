//! Per-backend construction of losses, rates, activations and optimisers
//! from configuration kinds. Unsupported combinations are `KindMismatch`.

use crate::error::{Error, Result};
use crate::lens::Lens;
use crate::loss::{self, LossKind, RateKind};
use crate::optim::{self, AdamVariant, Optimiser, Polarity};
use crate::para::{lift_primitive, ParametricLens};
use crate::smooth;
use crate::tensor::{Pointwise, Scalar, Shape, Tensor, Z2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimiserKind {
    Ascent,
    Descent,
    Momentum {
        gamma: f64,
    },
    Nesterov {
        gamma: f64,
    },
    Adagrad {
        eps: f64,
        delta: f64,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        delta: f64,
        variant: AdamVariant,
    },
}

impl OptimiserKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimiserKind::Ascent => "ascent",
            OptimiserKind::Descent => "descent",
            OptimiserKind::Momentum { .. } => "momentum",
            OptimiserKind::Nesterov { .. } => "nesterov",
            OptimiserKind::Adagrad { .. } => "adagrad",
            OptimiserKind::Adam { .. } => "adam",
        }
    }

    pub fn adam_default() -> Self {
        OptimiserKind::Adam {
            beta1: optim::DEFAULT_BETA1,
            beta2: optim::DEFAULT_BETA2,
            eps: optim::DEFAULT_ADAM_EPS,
            delta: optim::DEFAULT_ADAM_DELTA,
            variant: AdamVariant::Standard,
        }
    }
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Quadratic => "quadratic",
            LossKind::SoftmaxCrossEntropy => "softmax_ce",
            LossKind::Dot => "dot",
            LossKind::Xor => "xor",
        }
    }

    /// The loss object `L` for predictions of width `b`.
    pub fn output_shape(self, b: usize) -> Shape {
        match self {
            LossKind::Xor => Shape::vector(b),
            _ => Shape::scalar(),
        }
    }
}

pub trait Backend: Scalar {
    fn loss(kind: LossKind, width: usize) -> Result<ParametricLens<Self>>;

    fn activation(kind: Pointwise, width: usize) -> Result<ParametricLens<Self>>;

    fn optimiser(kind: &OptimiserKind, param: &Shape) -> Result<Optimiser<Self>>;

    fn rate(kind: RateKind, loss: &Shape) -> Result<Lens<Self>> {
        loss::rate(kind, loss.clone())
    }
}

impl Backend for f64 {
    fn loss(kind: LossKind, width: usize) -> Result<ParametricLens<f64>> {
        match kind {
            LossKind::Quadratic => loss::quadratic(width),
            LossKind::SoftmaxCrossEntropy => loss::softmax_cross_entropy(width),
            LossKind::Dot => loss::dot(width),
            LossKind::Xor => Err(Error::kind("loss", kind.name(), f64::KIND)),
        }
    }

    fn activation(kind: Pointwise, width: usize) -> Result<ParametricLens<f64>> {
        smooth::activation(kind, width)
    }

    fn optimiser(kind: &OptimiserKind, param: &Shape) -> Result<Optimiser<f64>> {
        let p = param.clone();
        Ok(match *kind {
            OptimiserKind::Ascent => optim::basic_update(Polarity::Ascent, p),
            OptimiserKind::Descent => optim::basic_update(Polarity::Descent, p),
            OptimiserKind::Momentum { gamma } => optim::momentum(gamma, p),
            OptimiserKind::Nesterov { gamma } => optim::nesterov(gamma, p),
            OptimiserKind::Adagrad { eps, delta } => optim::adagrad(eps, delta, p),
            OptimiserKind::Adam {
                beta1,
                beta2,
                eps,
                delta,
                variant,
            } => optim::adam(beta1, beta2, eps, delta, variant, p),
        })
    }
}

impl Backend for Z2 {
    fn loss(kind: LossKind, width: usize) -> Result<ParametricLens<Z2>> {
        match kind {
            LossKind::Xor => loss::boolean_xor(width),
            LossKind::Dot => loss::dot(width),
            _ => Err(Error::kind("loss", kind.name(), Z2::KIND)),
        }
    }

    fn activation(kind: Pointwise, width: usize) -> Result<ParametricLens<Z2>> {
        match kind {
            Pointwise::Identity => Ok(ParametricLens::trivial(Lens::identity(
                crate::lens::Interface::symmetric([width]),
            ))),
            Pointwise::Not => Ok(lift_primitive(
                format!("not({width})"),
                Shape::unit(),
                [width],
                [width],
                |_, x| Ok(x.map(|v| v + Z2::ONE)),
                |_, _, d| Ok((Tensor::unit(), d.clone())),
            )),
            _ => Err(Error::kind("activation", kind.name(), Z2::KIND)),
        }
    }

    fn optimiser(kind: &OptimiserKind, param: &Shape) -> Result<Optimiser<Z2>> {
        match kind {
            OptimiserKind::Ascent => Ok(optim::basic_update(Polarity::Ascent, param.clone())),
            OptimiserKind::Descent => Ok(optim::basic_update(Polarity::Descent, param.clone())),
            other => Err(Error::kind("optimiser", other.name(), Z2::KIND)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsupported_combinations_are_kind_mismatches() {
        assert!(matches!(
            <Z2 as Backend>::loss(LossKind::Quadratic, 2),
            Err(Error::KindMismatch { .. })
        ));
        assert!(matches!(
            <f64 as Backend>::loss(LossKind::Xor, 2),
            Err(Error::KindMismatch { .. })
        ));
        assert!(matches!(
            <Z2 as Backend>::activation(Pointwise::Sigmoid, 2),
            Err(Error::KindMismatch { .. })
        ));
        assert!(matches!(
            <Z2 as Backend>::optimiser(&OptimiserKind::adam_default(), &Shape::vector(2)),
            Err(Error::KindMismatch { .. })
        ));
        assert!(<Z2 as Backend>::rate(RateKind::Proportional(0.1), &Shape::vector(1)).is_err());
        assert!(<Z2 as Backend>::loss(LossKind::Xor, 2).is_ok());
    }

    #[test]
    fn z2_not_activation() {
        let n = <Z2 as Backend>::activation(Pointwise::Not, 2).unwrap();
        let x = Tensor::from_vec(vec![Z2::ONE, Z2::ZERO]);
        assert_eq!(
            n.get(&Tensor::unit(), &x).unwrap().data(),
            &[Z2::ZERO, Z2::ONE]
        );
    }
}
