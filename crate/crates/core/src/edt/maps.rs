//! Image endofunctions built from learned augmenters, the exact oracle
//! action, and composition, with reverse-mode gradients into the augmenter
//! parameters.

use std::collections::HashMap;

use crate::algebra::ElemId;
use crate::diffcore::{ForwardCache, Gradients, Network, Real, Tensor};
use crate::scenes::{Renderer, SceneImage};

use super::{Augmenter, EdtError};

/// Exact image action: decode an image back to its label by lookup, act on
/// the label, re-render.
#[derive(Clone, Debug)]
pub struct ImageOracle {
    renderer: Renderer,
    images: Vec<SceneImage>,
    lookup: HashMap<Vec<u32>, usize>,
    grid: Vec<f32>,
    norms: Vec<f64>,
}

impl ImageOracle {
    pub fn new(renderer: Renderer) -> Self {
        let images = renderer.render_grid();
        let lookup = images.iter().enumerate().map(|(id, img)| (img.bits().collect(), id)).collect();
        let grid: Vec<f32> = images.iter().flat_map(|img| img.pixels().iter().copied()).collect();
        let norms = images.iter().map(|img| img.pixels().iter().map(|&p| (p as f64) * (p as f64)).sum()).collect();
        Self { renderer, images, lookup, grid, norms }
    }

    /// Whether every combination has its own image.
    pub fn is_injective(&self) -> bool {
        self.lookup.len() == self.images.len()
    }

    /// Combination id of the grid image nearest to each row in squared
    /// distance; ties go to the lower id.
    pub fn nearest(&self, batch: &Tensor<f32>) -> Vec<usize> {
        let (n, g, d) = (batch.rows(), self.images.len(), batch.cols());
        let mut dots = vec![0f32; n * g];
        f32::gemm(n, d, g, 1.0, batch.data(), d as isize, 1, &self.grid, 1, d as isize, 0.0, &mut dots, g as isize, 1);
        (0..n)
            .map(|r| {
                let mut best = (f64::INFINITY, 0);
                for (id, &norm) in self.norms.iter().enumerate() {
                    let score = norm - 2.0 * dots[r * g + id] as f64;
                    if score < best.0 {
                        best = (score, id);
                    }
                }
                best.1
            })
            .collect()
    }

    pub fn renderer(&self) -> &Renderer {
        &self.renderer
    }

    /// Rendered grid, indexed by combination id.
    pub fn images(&self) -> &[SceneImage] {
        &self.images
    }

    /// Combination id of an exactly rendered image.
    pub fn decode<T: Real>(&self, pixels: &[T]) -> Option<usize> {
        let bits: Vec<u32> = pixels.iter().map(|p| (p.f64() as f32).to_bits()).collect();
        self.lookup.get(&bits).copied()
    }

    /// Combination id reached from `id` by acting with `elem` on `factor`.
    pub fn act_id(&self, factor: usize, elem: ElemId, id: usize) -> usize {
        let space = self.renderer.space();
        space.encode(&space.act_factor(factor, elem, &space.decode(id)).expect("valid factor element"))
    }

    fn apply<T: Real>(&self, factor: usize, elem: ElemId, batch: &Tensor<T>) -> Result<Tensor<T>, EdtError> {
        let mut out = Vec::with_capacity(batch.len());
        for r in 0..batch.rows() {
            let id = self.decode(batch.row(r)).ok_or(EdtError::NotRendered)?;
            out.extend(self.images[self.act_id(factor, elem, id)].pixels().iter().map(|&p| T::lit(p as f64)));
        }
        Ok(Tensor::matrix(batch.rows(), batch.cols(), out))
    }
}

/// One stage of an image path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// One application of the augmenter in this slot.
    Learned(usize),
    /// The exact action of `elem` on `factor`.
    Oracle {
        factor: usize,
        elem: ElemId,
    },
    Identity,
}

/// Stages applied first to last: `[f, g]` computes `g(f(x))`.
pub type Path = Vec<Step>;

/// `n` applications of the augmenter in `slot`.
pub fn power(slot: usize, n: usize) -> Path {
    vec![Step::Learned(slot); n]
}

/// Augmenters and the optional oracle that paths refer to.
pub struct MapContext<'a, T> {
    pub augmenters: &'a [Augmenter<T>],
    pub oracle: Option<&'a ImageOracle>,
}

impl<'a, T> Clone for MapContext<'a, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<'a, T> Copy for MapContext<'a, T> {}

impl<'a, T: Real> MapContext<'a, T> {
    pub fn new(augmenters: &'a [Augmenter<T>], oracle: Option<&'a ImageOracle>) -> Self {
        Self { augmenters, oracle }
    }

    /// The factor a step moves, if any.
    pub fn factor_of(&self, step: Step) -> Result<Option<usize>, EdtError> {
        match step {
            Step::Learned(slot) => Ok(Some(self.augmenter(slot)?.factor)),
            Step::Oracle { factor, .. } => Ok(Some(factor)),
            Step::Identity => Ok(None),
        }
    }

    fn augmenter(&self, slot: usize) -> Result<&'a Augmenter<T>, EdtError> {
        self.augmenters.get(slot).ok_or(EdtError::Slot(slot))
    }

    fn network(&self, slot: usize) -> Result<&'a Network<T>, EdtError> {
        Ok(&self.augmenter(slot)?.net)
    }

    /// Forward pass without gradient bookkeeping.
    pub fn apply(&self, path: &[Step], x: &Tensor<T>) -> Result<Tensor<T>, EdtError> {
        let mut cur = x.clone();
        for &step in path {
            cur = match step {
                Step::Learned(slot) => self.network(slot)?.predict(&cur)?,
                Step::Oracle { factor, elem } => self.oracle.ok_or(EdtError::NoOracle)?.apply(factor, elem, &cur)?,
                Step::Identity => cur,
            };
        }
        Ok(cur)
    }

    pub fn forward(&self, path: &[Step], x: Tensor<T>) -> Result<Trace<T>, EdtError> {
        let mut stages = Vec::with_capacity(path.len());
        let mut cur = x;
        for &step in path {
            match step {
                Step::Learned(slot) => {
                    let cache = self.network(slot)?.forward(&cur)?;
                    cur = cache.output().clone();
                    stages.push(Stage::Learned(slot, cache));
                }
                Step::Oracle { factor, elem } => {
                    cur = self.oracle.ok_or(EdtError::NoOracle)?.apply(factor, elem, &cur)?;
                    stages.push(Stage::Fixed);
                }
                Step::Identity => {}
            }
        }
        Ok(Trace { stages, output: cur })
    }

    /// Backpropagate `grad` through a trace, accumulating into `grads[slot]`.
    /// Returns the input gradient, or `None` past an oracle stage (the oracle
    /// is piecewise constant).
    pub fn backward(&self, trace: &Trace<T>, grad: Tensor<T>, grads: &mut [Gradients<T>]) -> Result<Option<Tensor<T>>, EdtError> {
        let mut cur = grad;
        for stage in trace.stages.iter().rev() {
            match stage {
                Stage::Learned(slot, cache) => {
                    let g = grads.get_mut(*slot).ok_or(EdtError::Slot(*slot))?;
                    cur = self.network(*slot)?.backward_into(cache, &cur, g)?;
                }
                Stage::Fixed => return Ok(None),
            }
        }
        Ok(Some(cur))
    }

    pub fn zero_grads(&self) -> Vec<Gradients<T>> {
        self.augmenters.iter().map(|a| a.net.zero_grads()).collect()
    }
}

enum Stage<T> {
    Learned(usize, ForwardCache<T>),
    Fixed,
}

/// Recorded forward pass of a path.
pub struct Trace<T> {
    stages: Vec<Stage<T>>,
    pub output: Tensor<T>,
}
