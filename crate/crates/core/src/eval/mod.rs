//! Scoring predictors on one side of a split, and ablation tables over
//! seeds.

mod ablation;
#[cfg(test)]
mod tests;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::Tensor;
use crate::edt::{EdtError, HeadOutput, Predictor};
use crate::factors::{FactorKind, ProductLabelSpace};
use crate::scenes::{Dataset, PIXELS};
use crate::splits::SplitMask;

pub use ablation::{ablation, run_seed, AblationConfig, AblationResult, AblationTable, Arm, ArmOutcome, ArmRow, Ordering, SeedRun, Summary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no instances on the {0} side")]
    EmptySide(Side),
    #[error("predictor has {got} heads, label space has {expected} factors")]
    Heads { expected: usize, got: usize },
    #[error(transparent)]
    Edt(#[from] EdtError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Train => "train",
            Side::Test => "test",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Side::Train),
            "test" => Ok(Side::Test),
            _ => Err(format!("unknown side {s:?}")),
        }
    }
}

/// Anything that maps image batches to per-factor predictions.
pub trait Labeler {
    fn label(&self, images: &Tensor<f32>) -> Result<Vec<Vec<HeadOutput>>, EdtError>;
}

impl Labeler for Predictor<f32> {
    fn label(&self, images: &Tensor<f32>) -> Result<Vec<Vec<HeadOutput>>, EdtError> {
        self.predict(images)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Misclassification rate in percent.
    Error,
    /// Mean squared error ×100 on values normalized to `[0, 1]`.
    Mse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorScore {
    pub factor: String,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub arm: String,
    pub split: String,
    pub seed: u64,
    pub side: Side,
    pub scores: Vec<FactorScore>,
}

impl MetricsRecord {
    pub fn get(&self, factor: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.factor == factor).map(|s| s.value)
    }
}

const EVAL_BATCH: usize = 256;

/// Scores `labeler` on the instances of `dataset` that fall on `side` of
/// `mask`. The result does not depend on instance order.
pub fn evaluate(labeler: &impl Labeler, dataset: &Dataset, mask: &SplitMask, side: Side) -> Result<MetricsRecord, EvalError> {
    let space = dataset.space();
    let chosen: Vec<_> = dataset.instances().iter().filter(|(y, _)| mask.is_train(space.encode(y)) == (side == Side::Train)).collect();
    if chosen.is_empty() {
        return Err(EvalError::EmptySide(side));
    }
    let n = space.num_factors();
    let mut totals = vec![0.0f64; n];
    for chunk in chosen.chunks(EVAL_BATCH) {
        let data: Vec<f32> = chunk.iter().flat_map(|(_, img)| img.pixels().iter().copied()).collect();
        let preds = labeler.label(&Tensor::matrix(chunk.len(), PIXELS, data))?;
        for ((y, _), row) in chunk.iter().zip(&preds) {
            if row.len() != n {
                return Err(EvalError::Heads { expected: n, got: row.len() });
            }
            for (i, out) in row.iter().enumerate() {
                totals[i] += loss_of(space, i, y[i], *out);
            }
        }
    }
    let scores = space
        .factors()
        .iter()
        .zip(totals)
        .map(|(f, t)| FactorScore {
            factor: f.name().to_string(),
            metric: if f.kind().is_classification() { Metric::Error } else { Metric::Mse },
            value: 100.0 * t / chosen.len() as f64,
        })
        .collect();
    Ok(MetricsRecord { arm: String::new(), split: mask.scheme.to_string(), seed: mask.seed, side, scores })
}

fn loss_of(space: &ProductLabelSpace, i: usize, truth: usize, out: HeadOutput) -> f64 {
    let f = &space.factors()[i];
    match (f.kind(), out) {
        (FactorKind::Ordinal, HeadOutput::Scalar(v)) => {
            let d = v - crate::edt::normalize(truth, f.cardinality() - 1);
            d * d
        }
        (FactorKind::Ordinal, HeadOutput::Class(c)) => {
            let d = crate::edt::normalize(c, f.cardinality() - 1) - crate::edt::normalize(truth, f.cardinality() - 1);
            d * d
        }
        (_, HeadOutput::Class(c)) => f64::from(u8::from(c != truth)),
        (_, HeadOutput::Scalar(v)) => f64::from(u8::from((v * (f.cardinality() - 1) as f64).round() as usize != truth)),
    }
}
