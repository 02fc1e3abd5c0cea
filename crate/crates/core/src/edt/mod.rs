//! Learned single-factor augmentations and the predictor trained with them.
//!
//! Each factor generator gets one augmenter network `X → X`. Augmenters are
//! fit to pairs of training images that differ by that generator (ℓ0), and
//! regularized so that powers respect the factor monoid's relations (ℓ1) and
//! augmenters of different factors commute (ℓ2). The predictor is then
//! trained on augmented images with action-transformed labels (ℓ3).

mod io;
pub mod losses;
pub mod maps;
mod predictor;
pub mod report;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::ElemId;
use crate::diffcore::{Activation, DiffError, Network, Real, Tensor};
use crate::factors::{FactorError, ProductLabelSpace};
use crate::scenes::PIXELS;
use crate::splits::SplitError;

pub use io::{read_augmenters, read_predictor, write_augmenters, write_predictor, AugmentersWithState};
pub use losses::{loss_l0, loss_l1, loss_l2, two_path, GradSink};
pub use maps::{power, ImageOracle, MapContext, Path, Step};
pub use predictor::{loss_l3, normalize, HeadKind, HeadOutput, Predictor, PredictorGrads, PredictorOptim};
pub use report::{law_report, learned_maps, oracle_maps, LawResiduals, ReportMap, LEAK_THRESHOLD};
pub use train::{train_augmenters, train_predictor, AugSource, LogRecord, TrainedAugmenters, TrainedPredictor, LOG_EVERY};

#[derive(Debug, Error)]
pub enum EdtError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no augmenter in slot {0}")]
    Slot(usize),
    #[error("path uses the oracle but none was supplied")]
    NoOracle,
    #[error("oracle input is not a rendered image")]
    NotRendered,
    #[error("compositionality terms must all act on one factor")]
    FactorMismatch,
    #[error("commutativity needs augmentations of different factors")]
    SameFactor,
    #[error("no training pairs for any generator of factor {0:?}")]
    NoPairs(String),
    #[error("training set is empty")]
    NoTrainCells,
    #[error("malformed model file: {0}")]
    Format(String),
}

/// Pointwise distance between image batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelDistance {
    /// Mean squared error.
    Mse,
    /// Pixel-wise binary cross-entropy measured relative to the target's own
    /// entropy (the Bernoulli KL divergence), so it vanishes when both sides
    /// agree and stays differentiable in both arguments.
    Bce,
}

impl std::str::FromStr for PixelDistance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(PixelDistance::Mse),
            "bce" => Ok(PixelDistance::Bce),
            _ => Err(format!("unknown distance {s:?}")),
        }
    }
}

impl PixelDistance {
    /// Mean distance and its gradients w.r.t. `pred` and `target`.
    pub fn eval<T: Real>(self, pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>, Tensor<T>), EdtError> {
        if pred.shape() != target.shape() {
            return Err(DiffError::Shape { expected: target.len(), got: pred.len() }.into());
        }
        if pred.is_empty() {
            return Err(EdtError::EmptyBatch);
        }
        let n = pred.len() as f64;
        let mut sum = 0.0;
        let mut gp = Vec::with_capacity(pred.len());
        let mut gt = Vec::with_capacity(pred.len());
        match self {
            PixelDistance::Mse => {
                for (&p, &t) in pred.data().iter().zip(target.data()) {
                    let d = p.f64() - t.f64();
                    sum += d * d;
                    gp.push(T::lit(2.0 * d / n));
                    gt.push(T::lit(-2.0 * d / n));
                }
            }
            PixelDistance::Bce => {
                let eps = crate::diffcore::BCE_EPS;
                let clamp = |v: f64| (v.clamp(eps, 1.0 - eps), v > eps && v < 1.0 - eps);
                for (&p, &t) in pred.data().iter().zip(target.data()) {
                    let ((p, p_free), (t, t_free)) = (clamp(p.f64()), clamp(t.f64()));
                    sum += t * (t / p).ln() + (1.0 - t) * ((1.0 - t) / (1.0 - p)).ln();
                    gp.push(T::lit(if p_free { (p - t) / (p * (1.0 - p)) / n } else { 0.0 }));
                    let logit = |v: f64| (v / (1.0 - v)).ln();
                    gt.push(T::lit(if t_free { (logit(t) - logit(p)) / n } else { 0.0 }));
                }
            }
        }
        let shape = pred.shape().to_vec();
        Ok((sum / n, Tensor::new(shape.clone(), gp).expect("shape"), Tensor::new(shape, gt).expect("shape")))
    }
}

/// Learned approximation of one factor generator's action on images.
#[derive(Clone, Debug, PartialEq)]
pub struct Augmenter<T> {
    pub factor: usize,
    pub elem: ElemId,
    pub net: Network<T>,
}

impl<T: Real> Augmenter<T> {
    /// Dense `dim → hidden → dim`, relu then sigmoid.
    pub fn new(factor: usize, elem: ElemId, dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self { factor, elem, net: Network::mlp(&[dim, hidden, dim], Activation::Relu, Activation::Sigmoid, rng) }
    }
}

/// One augmenter per generator of every factor with more than one value, in
/// factor order.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmenterSet {
    pub augmenters: Vec<Augmenter<f32>>,
}

impl AugmenterSet {
    pub fn init(space: &ProductLabelSpace, hidden: usize, rng: &mut impl Rng) -> Self {
        let augmenters = space
            .factors()
            .iter()
            .enumerate()
            .flat_map(|(i, f)| f.generators().into_iter().map(move |g| (i, g)))
            .map(|(i, g)| Augmenter::new(i, g, PIXELS, hidden, rng))
            .collect();
        Self { augmenters }
    }

    pub fn len(&self) -> usize {
        self.augmenters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.augmenters.is_empty()
    }

    pub fn slot_for(&self, factor: usize) -> Option<usize> {
        self.augmenters.iter().position(|a| a.factor == factor)
    }

    pub fn context<'a>(&'a self, oracle: Option<&'a ImageOracle>) -> MapContext<'a, f32> {
        MapContext::new(&self.augmenters, oracle)
    }
}

/// Hyperparameters of augmenter and predictor training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdtConfig {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Distance used by ℓ0–ℓ2 during training.
    pub distance: PixelDistance,
    pub lr_aug: f64,
    pub lr_pred: f64,
    pub batch: usize,
    pub aug_iters: usize,
    pub pred_iters: usize,
    pub aug_hidden: usize,
    pub pred_hidden: Vec<usize>,
    /// Let ℓ3 draw any power of a generator instead of the generator alone.
    pub aug_powers: bool,
    pub seed: u64,
}

impl Default for EdtConfig {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            distance: PixelDistance::Bce,
            lr_aug: 1e-3,
            lr_pred: 1e-4,
            batch: 32,
            aug_iters: 10_000,
            pred_iters: 5_000,
            aug_hidden: 512,
            pred_hidden: vec![256, 64],
            aug_powers: true,
            seed: 0,
        }
    }
}
