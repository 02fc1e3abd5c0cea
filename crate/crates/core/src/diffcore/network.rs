use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DiffError, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Tanh => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        [Activation::Identity, Activation::Relu, Activation::Sigmoid, Activation::Tanh].get(tag as usize).copied()
    }

    #[inline]
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output<T: Real>(self, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
            Activation::Tanh => T::one() - a * a,
        }
    }
}

/// Affine map followed by an elementwise activation; `y = act(x·W + b)` with
/// `W` stored `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    /// Glorot-uniform weights, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| T::lit(rng.gen_range(-limit..limit))).collect();
        Self { weights: Tensor::matrix(fan_in, fan_out, w), bias: Tensor::zeros(vec![fan_out]), activation }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (b, n_in, n_out) = (x.rows(), self.fan_in(), self.fan_out());
        let mut out = Vec::with_capacity(b * n_out);
        for _ in 0..b {
            out.extend_from_slice(self.bias.data());
        }
        T::gemm(b, n_in, n_out, T::one(), x.data(), n_in as isize, 1, self.weights.data(), n_out as isize, 1, T::one(), &mut out, n_out as isize, 1);
        for v in &mut out {
            *v = self.activation.apply(*v);
        }
        Tensor::matrix(b, n_out, out)
    }

    /// Returns the gradient w.r.t. the input; accumulates parameter gradients.
    fn backward(&self, input: &Tensor<T>, output: &Tensor<T>, upstream: &Tensor<T>, grads: &mut LayerGrads<T>) -> Tensor<T> {
        let (b, n_in, n_out) = (input.rows(), self.fan_in(), self.fan_out());
        let dz: Vec<T> = upstream.data().iter().zip(output.data()).map(|(&g, &a)| g * self.activation.derivative_from_output(a)).collect();
        // dW += xᵀ·dz
        T::gemm(n_in, b, n_out, T::one(), input.data(), 1, n_in as isize, &dz, n_out as isize, 1, T::one(), grads.weights.data_mut(), n_out as isize, 1);
        let db = grads.bias.data_mut();
        for row in dz.chunks_exact(n_out) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc = *acc + g;
            }
        }
        // dx = dz·Wᵀ
        let mut dx = vec![T::zero(); b * n_in];
        T::gemm(b, n_out, n_in, T::one(), &dz, n_out as isize, 1, self.weights.data(), 1, n_out as isize, T::zero(), &mut dx, n_in as isize, 1);
        Tensor::matrix(b, n_in, dx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Parameter gradients of a [`Network`], laid out like its layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.add_assign(&b.weights);
            a.bias.add_assign(&b.bias);
        }
    }

    pub fn scale(&mut self, s: T) {
        for l in &mut self.layers {
            l.weights.scale(s);
            l.bias.scale(s);
        }
    }

    /// Flat views in the same order as [`Network::params_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.weights.data(), l.bias.data()]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.bias.is_finite())
    }
}

/// Activations recorded by [`Network::forward`]: the input of every layer
/// followed by the final output.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    activations: Vec<Tensor<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("cache holds the input at least")
    }

    pub fn input(&self) -> &Tensor<T> {
        &self.activations[0]
    }
}

/// A chain of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self, DiffError> {
        if layers.is_empty() {
            return Err(DiffError::Empty);
        }
        for w in layers.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(DiffError::Shape { expected: w[1].fan_in(), got: w[0].fan_out() });
            }
        }
        Ok(Self { layers })
    }

    /// `dims = [in, hidden.., out]`, with `hidden` activation on every layer
    /// except the last, which uses `output`.
    pub fn mlp(dims: &[usize], hidden: Activation, output: Activation, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need input and output dims");
        let n = dims.len() - 1;
        let layers = (0..n).map(|i| Layer::init(dims[i], dims[i + 1], if i + 1 == n { output } else { hidden }, rng)).collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").fan_out()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.weights.data(), l.bias.data()]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.data_mut(), l.bias.data_mut()]).collect()
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads { weights: Tensor::zeros(l.weights.shape().to_vec()), bias: Tensor::zeros(l.bias.shape().to_vec()) })
                .collect(),
        }
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<(), DiffError> {
        if batch.shape().len() != 2 || batch.cols() != self.input_dim() {
            return Err(DiffError::Shape { expected: self.input_dim(), got: batch.cols() });
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Tensor<T>) -> Result<ForwardCache<T>, DiffError> {
        self.check_input(batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("nonempty"));
            activations.push(next);
        }
        let cache = ForwardCache { activations };
        if !cache.output().is_finite() {
            return Err(DiffError::NonFinite("forward output"));
        }
        Ok(cache)
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Tensor<T>, DiffError> {
        self.check_input(batch)?;
        let mut cur = self.layers[0].forward(batch);
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur);
        }
        if !cur.is_finite() {
            return Err(DiffError::NonFinite("forward output"));
        }
        Ok(cur)
    }

    /// Reverse pass: accumulates parameter gradients into `grads` and returns
    /// the gradient w.r.t. the network input.
    pub fn backward_into(&self, cache: &ForwardCache<T>, upstream: &Tensor<T>, grads: &mut Gradients<T>) -> Result<Tensor<T>, DiffError> {
        if cache.activations.len() != self.layers.len() + 1 || upstream.shape() != cache.output().shape() {
            return Err(DiffError::CacheMismatch);
        }
        if !upstream.is_finite() {
            return Err(DiffError::NonFinite("upstream gradient"));
        }
        let mut grad = upstream.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            grad = layer.backward(&cache.activations[k], &cache.activations[k + 1], &grad, &mut grads.layers[k]);
        }
        if !grad.is_finite() || !grads.is_finite() {
            return Err(DiffError::NonFinite("backward"));
        }
        Ok(grad)
    }

    /// Fresh parameter gradients plus the input gradient.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Tensor<T>) -> Result<(Gradients<T>, Tensor<T>), DiffError> {
        let mut grads = self.zero_grads();
        let dx = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, dx))
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network { layers: self.layers.iter().map(|l| Layer { weights: l.weights.cast(), bias: l.bias.cast(), activation: l.activation }).collect() }
    }
}
