//! Augmentation matching (ℓ0), compositionality (ℓ1) and commutativity (ℓ2)
//! losses over image paths.

use crate::diffcore::{Gradients, Real, Tensor};

use super::maps::{MapContext, Step};
use super::{EdtError, PixelDistance};

/// Gradient accumulator for augmenter parameters. `weight` scales every
/// gradient added by the next loss call.
pub struct GradSink<T> {
    pub grads: Vec<Gradients<T>>,
    pub weight: T,
}

impl<T: Real> GradSink<T> {
    pub fn new(ctx: &MapContext<'_, T>) -> Self {
        Self { grads: ctx.zero_grads(), weight: T::one() }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = T::lit(weight);
        self
    }
}

/// `d(α(x), x')` for a batch of pairs.
pub fn loss_l0<T: Real>(
    ctx: &MapContext<'_, T>,
    aug: &[Step],
    x: &Tensor<T>,
    target: &Tensor<T>,
    dist: PixelDistance,
    sink: &mut GradSink<T>,
) -> Result<f64, EdtError> {
    if x.rows() == 0 {
        return Err(EdtError::EmptyBatch);
    }
    let trace = ctx.forward(aug, x.clone())?;
    let (value, grad, _) = dist.eval(&trace.output, target)?;
    ctx.backward(&trace, scaled(grad, sink.weight), &mut sink.grads)?;
    Ok(value)
}

/// `d(αʲ(αᵏ(x)), αʲᵏ(x))`; every step must act on the same factor.
pub fn loss_l1<T: Real>(
    ctx: &MapContext<'_, T>,
    aug_j: &[Step],
    aug_k: &[Step],
    aug_jk: &[Step],
    x: &Tensor<T>,
    dist: PixelDistance,
    sink: &mut GradSink<T>,
) -> Result<f64, EdtError> {
    let mut factor = None;
    for &step in aug_j.iter().chain(aug_k).chain(aug_jk) {
        if let Some(f) = ctx.factor_of(step)? {
            if factor.is_some_and(|g| g != f) {
                return Err(EdtError::FactorMismatch);
            }
            factor = Some(f);
        }
    }
    let left: Vec<Step> = aug_k.iter().chain(aug_j).copied().collect();
    two_path(ctx, &left, aug_jk, x, dist, sink)
}

/// `d(αⱼ(αᵢ(x)), αᵢ(αⱼ(x)))` for augmentations of two different factors.
pub fn loss_l2<T: Real>(
    ctx: &MapContext<'_, T>,
    aug_a: &[Step],
    aug_b: &[Step],
    x: &Tensor<T>,
    dist: PixelDistance,
    sink: &mut GradSink<T>,
) -> Result<f64, EdtError> {
    let factors = |p: &[Step]| -> Result<Vec<usize>, EdtError> {
        Ok(p.iter().map(|&s| ctx.factor_of(s)).collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect())
    };
    let (fa, fb) = (factors(aug_a)?, factors(aug_b)?);
    if fa.iter().any(|f| fb.contains(f)) {
        return Err(EdtError::SameFactor);
    }
    let left: Vec<Step> = aug_a.iter().chain(aug_b).copied().collect();
    let right: Vec<Step> = aug_b.iter().chain(aug_a).copied().collect();
    two_path(ctx, &left, &right, x, dist, sink)
}

/// `d(left(x), right(x))` with gradients into both sides. A shared prefix
/// is evaluated once.
pub fn two_path<T: Real>(
    ctx: &MapContext<'_, T>,
    left: &[Step],
    right: &[Step],
    x: &Tensor<T>,
    dist: PixelDistance,
    sink: &mut GradSink<T>,
) -> Result<f64, EdtError> {
    if x.rows() == 0 {
        return Err(EdtError::EmptyBatch);
    }
    let shared = left.iter().zip(right).take_while(|(a, b)| a == b).count();
    let prefix = ctx.forward(&left[..shared], x.clone())?;
    let lt = ctx.forward(&left[shared..], prefix.output.clone())?;
    let rt = ctx.forward(&right[shared..], prefix.output.clone())?;
    let (value, gl, gr) = dist.eval(&lt.output, &rt.output)?;
    let dl = ctx.backward(&lt, scaled(gl, sink.weight), &mut sink.grads)?;
    let dr = ctx.backward(&rt, scaled(gr, sink.weight), &mut sink.grads)?;
    let merged = match (dl, dr) {
        (Some(mut a), Some(b)) => {
            a.add_assign(&b);
            Some(a)
        }
        (a, b) => a.or(b),
    };
    if let Some(g) = merged {
        ctx.backward(&prefix, g, &mut sink.grads)?;
    }
    Ok(value)
}

fn scaled<T: Real>(mut g: Tensor<T>, w: T) -> Tensor<T> {
    if w != T::one() {
        g.scale(w);
    }
    g
}
