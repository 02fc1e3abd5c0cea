use super::{DiffError, Real, Tensor};

/// Clamp applied to probabilities inside binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

/// Scalar loss with its gradient w.r.t. the prediction. Values are
/// accumulated in `f64`.
#[derive(Clone, Debug)]
pub struct Loss<T> {
    pub value: f64,
    pub grad: Tensor<T>,
}

fn same_shape<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(), DiffError> {
    if pred.shape() != target.shape() {
        return Err(DiffError::Shape { expected: target.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(DiffError::Empty);
    }
    Ok(())
}

/// Mean squared error over all elements.
pub fn loss_mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Loss<T>, DiffError> {
    same_shape(pred, target)?;
    let n = pred.len() as f64;
    let scale = T::lit(2.0 / n);
    let mut sum = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.f64() * d.f64();
            d * scale
        })
        .collect();
    Ok(Loss { value: sum / n, grad: Tensor::new(pred.shape().to_vec(), grad).expect("same shape") })
}

/// Mean binary cross-entropy with predictions clamped to `[ε, 1-ε]`.
pub fn loss_bce<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Loss<T>, DiffError> {
    same_shape(pred, target)?;
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let (p, t) = (p.f64().clamp(BCE_EPS, 1.0 - BCE_EPS), t.f64());
            sum -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            T::lit((p - t) / (p * (1.0 - p)) / n)
        })
        .collect();
    Ok(Loss { value: sum / n, grad: Tensor::new(pred.shape().to_vec(), grad).expect("same shape") })
}

/// Mean softmax cross-entropy of `batch × classes` logits.
pub fn loss_softmax_ce<T: Real>(logits: &Tensor<T>, classes: &[usize]) -> Result<Loss<T>, DiffError> {
    if logits.rows() != classes.len() {
        return Err(DiffError::Shape { expected: classes.len(), got: logits.rows() });
    }
    if classes.is_empty() {
        return Err(DiffError::Empty);
    }
    let c = logits.cols();
    if let Some(&bad) = classes.iter().find(|&&k| k >= c) {
        return Err(DiffError::Shape { expected: c, got: bad });
    }
    let b = classes.len() as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (r, &k) in classes.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x.f64() - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        sum += z.ln() + max - row[k].f64();
        grad.extend(exps.iter().enumerate().map(|(j, e)| T::lit((e / z - if j == k { 1.0 } else { 0.0 }) / b)));
    }
    Ok(Loss { value: sum / b, grad: Tensor::matrix(classes.len(), c, grad) })
}

/// Row-wise softmax.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = Vec::with_capacity(logits.len());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x.f64() - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| T::lit(e / z)));
    }
    Tensor::matrix(logits.rows(), logits.cols(), out)
}
