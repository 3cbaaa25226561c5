//! Optimisers as lenses `(S ⊗ P)/(S ⊗ P) → P/P'`.
//!
//! `get` turns state and parameter into the parameter the model sees;
//! `put` receives the requested change `p'` and returns the new state and
//! parameter. Plugging an optimiser into a model's parameter port is a
//! reparameterisation.

use std::fmt;

use crate::error::{Error, Result};
use crate::lens::{Interface, Lens};
use crate::tensor::{Scalar, Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Ascent,
    Descent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdamVariant {
    /// Raw moments and a step counter in the state; bias correction is
    /// computed on the fly.
    Standard,
    /// Stores the bias-corrected moments in the state, as the unpacked
    /// update is sometimes written.
    CorrectedState,
}

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_ADAM_EPS: f64 = 1e-3;
pub const DEFAULT_ADAM_DELTA: f64 = 1e-8;
pub const DEFAULT_ADAGRAD_EPS: f64 = 0.01;
pub const DEFAULT_ADAGRAD_DELTA: f64 = 1e-7;

#[derive(Clone)]
pub struct Optimiser<S> {
    state: Shape,
    param: Shape,
    lens: Lens<S>,
}

impl<S> fmt::Debug for Optimiser<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Optimiser")
            .field("state", &self.state)
            .field("param", &self.param)
            .field("lens", &self.lens)
            .finish()
    }
}

impl<S: Scalar> Optimiser<S> {
    /// Builds an optimiser from its `get` and `put` maps.
    pub fn new(
        name: impl Into<String>,
        state: Shape,
        param: Shape,
        get: impl Fn(&Tensor<S>, &Tensor<S>) -> Result<Tensor<S>> + Send + Sync + 'static,
        put: impl Fn(&Tensor<S>, &Tensor<S>, &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        let (s1, p1, s2, p2) = (state.clone(), param.clone(), state.clone(), param.clone());
        let lens = Lens::new(
            name,
            Interface::symmetric(state.product(&param)),
            Interface::symmetric(param.clone()),
            move |sp| {
                let (s, p) = sp.split2(&s1, &p1)?;
                get(&s, &p)
            },
            move |sp, dp| {
                let (s, p) = sp.split2(&s2, &p2)?;
                let (s, p) = put(&s, &p, dp)?;
                Ok(Tensor::concat(&[&s, &p]))
            },
        );
        Optimiser { state, param, lens }
    }

    pub fn name(&self) -> &str {
        self.lens.name()
    }

    pub fn lens(&self) -> &Lens<S> {
        &self.lens
    }

    pub fn state_shape(&self) -> &Shape {
        &self.state
    }

    pub fn param_shape(&self) -> &Shape {
        &self.param
    }

    pub fn is_stateless(&self) -> bool {
        self.state.is_unit()
    }

    pub fn initial_state(&self) -> Tensor<S> {
        Tensor::zeros(self.state.clone())
    }

    /// The parameter the model is evaluated at.
    pub fn get(&self, s: &Tensor<S>, p: &Tensor<S>) -> Result<Tensor<S>> {
        self.lens.get(&Tensor::concat(&[s, p]))
    }

    /// New state and parameter after receiving the change `dp`.
    pub fn put(
        &self,
        s: &Tensor<S>,
        p: &Tensor<S>,
        dp: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        self.lens
            .put(&Tensor::concat(&[s, p]), dp)?
            .split2(&self.state, &self.param)
    }

    /// Parallel composition. State is `S₁ ⊗ S₂`, parameter `P₁ ⊗ P₂`.
    pub fn tensor(&self, other: &Optimiser<S>) -> Optimiser<S> {
        // (S1, S2, P1, P2) -> (S1, P1, S2, P2)
        let shuffle = Lens::identity(Interface::symmetric(self.state.clone()))
            .tensor(&Lens::swap(other.state.clone(), self.param.clone()))
            .tensor(&Lens::identity(Interface::symmetric(other.param.clone())));
        let lens = shuffle
            .compose(&self.lens.tensor(&other.lens))
            .expect("shuffle lands in the componentwise product")
            .renamed(format!("({} ⊗ {})", self.name(), other.name()));
        Optimiser {
            state: self.state.product(&other.state),
            param: self.param.product(&other.param),
            lens,
        }
    }

    /// For a stateless optimiser on `A ⊗ B`, the same optimiser acting on
    /// `B ⊗ A`.
    pub fn swapped(&self, a: &Shape, b: &Shape) -> Result<Optimiser<S>> {
        if !self.is_stateless() || a.product(b) != self.param {
            return Err(Error::InvalidArgument(format!(
                "cannot reorder {} over {a} ⊗ {b}",
                self.name()
            )));
        }
        let lens = Lens::compose_all(&[
            Lens::swap(b.clone(), a.clone()),
            self.lens.clone(),
            Lens::swap(a.clone(), b.clone()),
        ])?
        .renamed(format!("{}ᵀ", self.name()));
        Ok(Optimiser {
            state: Shape::unit(),
            param: b.product(a),
            lens,
        })
    }
}

/// Gradient ascent `p + p'` or descent `p - p'`. Over Z2 both are XOR.
pub fn basic_update<S: Scalar>(polarity: Polarity, param: impl Into<Shape>) -> Optimiser<S> {
    let name = match polarity {
        Polarity::Ascent => "ascent",
        Polarity::Descent => "descent",
    };
    Optimiser::new(
        name,
        Shape::unit(),
        param.into(),
        |_, p| Ok(p.clone()),
        move |s, p, dp| {
            let p = match polarity {
                Polarity::Ascent => p.add(dp)?,
                Polarity::Descent => p.sub(dp)?,
            };
            Ok((s.clone(), p))
        },
    )
}

/// `s' = -γs + p'`, parameter `p + s'`.
pub fn momentum(gamma: f64, param: impl Into<Shape>) -> Optimiser<f64> {
    momentum_like("momentum", gamma, param.into(), false)
}

/// Momentum whose `get` is the lookahead `p + γs`.
pub fn nesterov(gamma: f64, param: impl Into<Shape>) -> Optimiser<f64> {
    momentum_like("nesterov", gamma, param.into(), true)
}

fn momentum_like(name: &str, gamma: f64, param: Shape, lookahead: bool) -> Optimiser<f64> {
    Optimiser::new(
        format!("{name}({gamma})"),
        param.clone(),
        param,
        move |s, p| {
            if lookahead {
                p.add(&s.scale(gamma))
            } else {
                Ok(p.clone())
            }
        },
        move |s, p, dp| {
            let s = s.scale(-gamma).add(dp)?;
            let p = p.add(&s)?;
            Ok((s, p))
        },
    )
}

/// `g' = g + p'⊙p'`, parameter `p + ε/(δ + √g') ⊙ p'`.
pub fn adagrad(eps: f64, delta: f64, param: impl Into<Shape>) -> Optimiser<f64> {
    let param = param.into();
    Optimiser::<f64>::new(
        format!("adagrad({eps},{delta})"),
        param.clone(),
        param,
        |_, p| Ok(p.clone()),
        move |g, p, dp| {
            let g = g.add(&dp.hadamard(dp)?)?;
            let step: Vec<f64> = g
                .data()
                .iter()
                .zip(dp.data())
                .map(|(gi, di)| eps / (delta + gi.sqrt()) * di)
                .collect();
            let p = p.add(&Tensor::new(p.shape().clone(), step)?)?;
            Ok((g, p))
        },
    )
}

/// Adam. State is `m ⊗ v ⊗ t` with the step counter `t` stored as a real.
pub fn adam(
    beta1: f64,
    beta2: f64,
    eps: f64,
    delta: f64,
    variant: AdamVariant,
    param: impl Into<Shape>,
) -> Optimiser<f64> {
    let param = param.into();
    let n = param.numel();
    let state = Shape::vector(2 * n + 1);
    Optimiser::<f64>::new(
        format!("adam({beta1},{beta2},{eps},{delta})"),
        state,
        param,
        |_, p| Ok(p.clone()),
        move |s, p, dp| {
            let sd = s.data();
            let (m, v, t) = (&sd[..n], &sd[n..2 * n], sd[2 * n] + 1.0);
            let c1 = 1.0 - beta1.powf(t);
            let c2 = 1.0 - beta2.powf(t);
            let mut next = vec![0.0; 2 * n + 1];
            let mut p_new = p.data().to_vec();
            for i in 0..n {
                let g = dp.data()[i];
                let mi = beta1 * m[i] + (1.0 - beta1) * g;
                let vi = beta2 * v[i] + (1.0 - beta2) * g * g;
                let (mh, vh) = (mi / c1, vi / c2);
                p_new[i] += eps / (delta + vh.sqrt()) * mh;
                let (ms, vs) = match variant {
                    AdamVariant::Standard => (mi, vi),
                    AdamVariant::CorrectedState => (mh, vh),
                };
                next[i] = ms;
                next[n + i] = vs;
            }
            next[2 * n] = t;
            Ok((
                Tensor::new(s.shape().clone(), next)?,
                Tensor::new(p.shape().clone(), p_new)?,
            ))
        },
    )
}

/// Gradient descent-ascent on `P ⊗ Q`: descends on `P`, ascends on `Q`.
pub fn gda(p: impl Into<Shape>, q: impl Into<Shape>) -> Optimiser<f64> {
    let (p, q) = (p.into(), q.into());
    let (p1, q1) = (p.clone(), q.clone());
    Optimiser::new(
        "gda",
        Shape::unit(),
        p.product(&q),
        |_, pq| Ok(pq.clone()),
        move |s, pq, d| {
            let (pp, qq) = pq.split2(&p1, &q1)?;
            let (dp, dq) = d.split2(&p1, &q1)?;
            Ok((s.clone(), Tensor::concat(&[&pp.sub(&dp)?, &qq.add(&dq)?])))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Z2;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn basic_updates() {
        let a = basic_update::<f64>(Polarity::Ascent, [1]);
        let (_, p) = a.put(&Tensor::unit(), &t(&[1.0]), &t(&[0.1])).unwrap();
        assert_eq!(p.data(), &[1.1]);
        let d = basic_update::<f64>(Polarity::Descent, [1]);
        let (_, p) = d.put(&Tensor::unit(), &t(&[1.0]), &t(&[0.25])).unwrap();
        assert_eq!(p.data(), &[0.75]);
        assert_eq!(a.get(&Tensor::unit(), &t(&[3.0])).unwrap().data(), &[3.0]);

        let za = basic_update::<Z2>(Polarity::Ascent, [2]);
        let zd = basic_update::<Z2>(Polarity::Descent, [2]);
        let p = Tensor::from_vec(vec![Z2::ONE, Z2::ZERO]);
        let dp = Tensor::from_vec(vec![Z2::ONE, Z2::ONE]);
        let xor = Tensor::from_vec(vec![Z2::ZERO, Z2::ONE]);
        assert_eq!(za.put(&Tensor::unit(), &p, &dp).unwrap().1, xor);
        assert_eq!(zd.put(&Tensor::unit(), &p, &dp).unwrap().1, xor);
    }

    #[test]
    fn momentum_examples() {
        let m = momentum(0.9, [1]);
        let (s, p) = m.put(&t(&[0.0]), &t(&[1.0]), &t(&[0.1])).unwrap();
        assert_eq!((s.data(), p.data()), (&[0.1][..], &[1.1][..]));
        let (s2, _) = m.put(&s, &p, &t(&[0.1])).unwrap();
        assert!((s2.data()[0] - (-0.9 * 0.1 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn nesterov_lookahead() {
        let n = nesterov(0.9, [1]);
        assert!((n.get(&t(&[0.5]), &t(&[1.0])).unwrap().data()[0] - 1.45).abs() < 1e-15);
        let n0 = nesterov(0.0, [1]);
        assert_eq!(n0.get(&t(&[0.5]), &t(&[1.0])).unwrap().data(), &[1.0]);
    }

    #[test]
    fn adagrad_examples() {
        let a = adagrad(0.5, 1e-7, [1]);
        let (g, p) = a.put(&t(&[0.0]), &t(&[1.0]), &t(&[2.0])).unwrap();
        assert_eq!(g.data(), &[4.0]);
        assert!((p.data()[0] - 1.5).abs() < 1e-7);
        let (g, p) = a.put(&t(&[3.0]), &t(&[1.0]), &t(&[0.0])).unwrap();
        assert_eq!((g.data(), p.data()), (&[3.0][..], &[1.0][..]));
        let a = adagrad(0.5, 1e-7, [2]);
        let (_, p) = a
            .put(&t(&[0.0, 0.0]), &t(&[0.0, 0.0]), &t(&[2.0, -0.1]))
            .unwrap();
        // first step is ε·sign(p') for every coordinate
        assert!((p.data()[0] - 0.5).abs() < 1e-6 && (p.data()[1] + 0.5).abs() < 1e-5);
        let (_, p) = a
            .put(&t(&[1.0, 4.0]), &t(&[0.0, 0.0]), &t(&[1.0, 1.0]))
            .unwrap();
        assert!(p.data()[0] != p.data()[1]);
    }

    #[test]
    fn adam_first_step_is_eps() {
        let a = adam(0.9, 0.999, 1e-3, 1e-8, AdamVariant::Standard, [3]);
        let s0 = a.initial_state();
        assert_eq!(s0.numel(), 7);
        let (s, p) = a
            .put(&s0, &t(&[0.0, 0.0, 0.0]), &t(&[5.0, -0.01, 0.3]))
            .unwrap();
        for (v, sign) in p.data().iter().zip([1.0, -1.0, 1.0]) {
            assert!((v - sign * 1e-3).abs() < 1e-9, "{v}");
        }
        assert_eq!(s.data()[6], 1.0);
        let (_, p) = a
            .put(&s0, &t(&[0.7, 0.0, 0.0]), &t(&[0.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(p.data(), &[0.7, 0.0, 0.0]);
    }

    #[test]
    fn adam_without_decay_is_signed_step() {
        let a = adam(0.0, 0.0, 0.1, 1e-12, AdamVariant::Standard, [2]);
        let mut s = a.initial_state();
        let mut p = t(&[0.0, 0.0]);
        for k in 0..3 {
            let g = t(&[3.0 + k as f64, -0.2]);
            let (s2, p2) = a.put(&s, &p, &g).unwrap();
            assert!((p2.data()[0] - p.data()[0] - 0.1).abs() < 1e-9);
            assert!((p2.data()[1] - p.data()[1] + 0.1).abs() < 1e-9);
            s = s2;
            p = p2;
        }
    }

    #[test]
    fn gda_examples() {
        let g = gda([1], [1]);
        let (_, pq) = g
            .put(&Tensor::unit(), &t(&[1.0, 2.0]), &t(&[0.1, 0.2]))
            .unwrap();
        assert!((pq.data()[0] - 0.9).abs() < 1e-15 && (pq.data()[1] - 2.2).abs() < 1e-15);
        let split = basic_update::<f64>(Polarity::Descent, [2])
            .tensor(&basic_update(Polarity::Ascent, [3]));
        let whole = gda([2], [3]);
        let pq = t(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let d = t(&[1.0, -2.0, 3.0, -4.0, 5.0]);
        assert_eq!(
            split.put(&Tensor::unit(), &pq, &d).unwrap(),
            whole.put(&Tensor::unit(), &pq, &d).unwrap()
        );
    }

    #[test]
    fn tensor_of_stateful_optimisers_routes_state() {
        let a = momentum(0.5, [1]);
        let b = adagrad(0.1, 1e-7, [2]);
        let ab = a.tensor(&b);
        assert_eq!(ab.state_shape().numel(), 3);
        let (s, p, d) = (
            t(&[0.2, 1.0, 2.0]),
            t(&[1.0, 2.0, 3.0]),
            t(&[0.1, 0.2, 0.3]),
        );
        let (s2, p2) = ab.put(&s, &p, &d).unwrap();
        let (sa, pa) = a.put(&t(&[0.2]), &t(&[1.0]), &t(&[0.1])).unwrap();
        let (sb, pb) = b
            .put(&t(&[1.0, 2.0]), &t(&[2.0, 3.0]), &t(&[0.2, 0.3]))
            .unwrap();
        assert_eq!(s2, Tensor::concat(&[&sa, &sb]));
        assert_eq!(p2, Tensor::concat(&[&pa, &pb]));
    }

    #[test]
    fn swapped_gda_acts_on_reordered_blocks() {
        let g = gda([1], [2]);
        let qp = g.swapped(&Shape::vector(1), &Shape::vector(2)).unwrap();
        let (_, out) = qp
            .put(&Tensor::unit(), &t(&[1.0, 2.0, 3.0]), &t(&[0.5, 0.5, 0.5]))
            .unwrap();
        assert_eq!(out.data(), &[1.5, 2.5, 2.5]);
    }
}
