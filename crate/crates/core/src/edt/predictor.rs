use rand::Rng;

use crate::algebra::ElemId;
use crate::diffcore::{adam_step, loss_mse, loss_softmax_ce, Activation, AdamConfig, AdamState, Gradients, Layer, Network, Real, Tensor};
use crate::factors::{FactorTuple, ProductLabelSpace};

use super::maps::{MapContext, Step};
use super::EdtError;

/// Output form of one prediction head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Softmax over the factor's values.
    Classes(usize),
    /// Sigmoid scalar standing for `value / max`.
    Scalar { max: usize },
}

impl HeadKind {
    fn width(self) -> usize {
        match self {
            HeadKind::Classes(n) => n,
            HeadKind::Scalar { .. } => 1,
        }
    }
}

/// Shared trunk with one head per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor<T> {
    pub trunk: Network<T>,
    pub heads: Vec<Network<T>>,
    pub kinds: Vec<HeadKind>,
}

/// Gradients for a [`Predictor`], trunk first.
#[derive(Clone, Debug)]
pub struct PredictorGrads<T> {
    pub trunk: Gradients<T>,
    pub heads: Vec<Gradients<T>>,
}

impl<T: Real> PredictorGrads<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = self.trunk.slices();
        for h in &self.heads {
            out.extend(h.slices());
        }
        out
    }

    pub fn add_assign(&mut self, other: &PredictorGrads<T>) {
        self.trunk.add_assign(&other.trunk);
        for (a, b) in self.heads.iter_mut().zip(&other.heads) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: T) {
        self.trunk.scale(s);
        for h in &mut self.heads {
            h.scale(s);
        }
    }
}

/// Decoded prediction for one factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeadOutput {
    Class(usize),
    /// Predicted value normalized to `[0, 1]`.
    Scalar(f64),
}

impl<T: Real> Predictor<T> {
    /// `trunk_dims = [input, hidden..]`; relu throughout the trunk.
    pub fn new(space: &ProductLabelSpace, trunk_dims: &[usize], rng: &mut impl Rng) -> Self {
        let trunk = Network::mlp(trunk_dims, Activation::Relu, Activation::Relu, rng);
        let feat = *trunk_dims.last().expect("trunk dims");
        let kinds: Vec<HeadKind> = space
            .factors()
            .iter()
            .map(|f| if f.kind().is_classification() { HeadKind::Classes(f.cardinality()) } else { HeadKind::Scalar { max: f.cardinality() - 1 } })
            .collect();
        let heads = kinds
            .iter()
            .map(|k| {
                let act = if matches!(k, HeadKind::Scalar { .. }) { Activation::Sigmoid } else { Activation::Identity };
                Network::new(vec![Layer::init(feat, k.width(), act, rng)]).expect("single layer")
            })
            .collect();
        Self { trunk, heads, kinds }
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = self.trunk.params();
        for h in &self.heads {
            out.extend(h.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.trunk.params_mut();
        for h in &mut self.heads {
            out.extend(h.params_mut());
        }
        out
    }

    pub fn zero_grads(&self) -> PredictorGrads<T> {
        PredictorGrads { trunk: self.trunk.zero_grads(), heads: self.heads.iter().map(Network::zero_grads).collect() }
    }

    /// Raw head outputs.
    pub fn outputs(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>, EdtError> {
        let feat = self.trunk.predict(x)?;
        Ok(self.heads.iter().map(|h| h.predict(&feat)).collect::<Result<_, _>>()?)
    }

    /// Per-row, per-factor decoded predictions.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<Vec<HeadOutput>>, EdtError> {
        let outs = self.outputs(x)?;
        Ok((0..x.rows())
            .map(|r| {
                outs.iter()
                    .zip(&self.kinds)
                    .map(|(o, k)| match k {
                        HeadKind::Classes(_) => {
                            let row = o.row(r);
                            let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                            HeadOutput::Class(best)
                        }
                        HeadKind::Scalar { .. } => HeadOutput::Scalar(o.row(r)[0].f64()),
                    })
                    .collect()
            })
            .collect())
    }

    /// Summed per-head supervised loss (cross-entropy or mse) with gradients.
    pub fn supervised_loss(&self, x: &Tensor<T>, labels: &[FactorTuple]) -> Result<(f64, PredictorGrads<T>), EdtError> {
        if labels.len() != x.rows() || labels.is_empty() {
            return Err(EdtError::EmptyBatch);
        }
        let trunk_cache = self.trunk.forward(x)?;
        let feat = trunk_cache.output();
        let mut total = 0.0;
        let mut grads = self.zero_grads();
        let mut dfeat = Tensor::zeros(feat.shape().to_vec());
        for (i, (head, kind)) in self.heads.iter().zip(&self.kinds).enumerate() {
            let cache = head.forward(feat)?;
            let loss = match *kind {
                HeadKind::Classes(_) => {
                    let classes: Vec<usize> = labels.iter().map(|y| y[i]).collect();
                    loss_softmax_ce(cache.output(), &classes)?
                }
                HeadKind::Scalar { max } => {
                    let targets = labels.iter().map(|y| T::lit(normalize(y[i], max))).collect();
                    loss_mse(cache.output(), &Tensor::matrix(labels.len(), 1, targets))?
                }
            };
            total += loss.value;
            let d = head.backward_into(&cache, &loss.grad, &mut grads.heads[i])?;
            dfeat.add_assign(&d);
        }
        self.trunk.backward_into(&trunk_cache, &dfeat, &mut grads.trunk)?;
        Ok((total, grads))
    }
}

/// `value / max`, or 0 for a one-valued factor.
pub fn normalize(value: usize, max: usize) -> f64 {
    if max == 0 {
        0.0
    } else {
        value as f64 / max as f64
    }
}

/// Equivariance/invariance loss: the supervised loss on `aug(x)` against
/// labels moved by the action of `elem` on `factor`. Head `factor` must
/// follow the action; every other head must keep its label.
#[allow(clippy::too_many_arguments)]
pub fn loss_l3<T: Real>(
    predictor: &Predictor<T>,
    ctx: &MapContext<'_, T>,
    space: &ProductLabelSpace,
    aug: &[Step],
    factor: usize,
    elem: ElemId,
    x: &Tensor<T>,
    labels: &[FactorTuple],
) -> Result<(f64, PredictorGrads<T>), EdtError> {
    let moved = ctx.apply(aug, x)?;
    let targets = labels.iter().map(|y| space.act_factor(factor, elem, y)).collect::<Result<Vec<_>, _>>()?;
    predictor.supervised_loss(&moved, &targets)
}

/// Adam over every predictor parameter.
#[derive(Clone, Debug)]
pub struct PredictorOptim<T> {
    state: AdamState<T>,
}

impl<T: Real> PredictorOptim<T> {
    pub fn new(predictor: &Predictor<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = predictor.params().iter().map(|p| vec![T::zero(); p.len()]).collect();
        Self { state: AdamState { config, step: 0, m: zeros.clone(), v: zeros } }
    }

    pub fn step(&mut self, predictor: &mut Predictor<T>, grads: &PredictorGrads<T>) -> Result<(), EdtError> {
        Ok(adam_step(predictor.params_mut(), grads.slices(), &mut self.state)?)
    }
}
