//! Procedural scenes: a deterministic renderer from factor tuples to small
//! RGB images, and the exact image-level action obtained by re-rendering.

mod dataset;

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{ElemId, LawReport, Verification};
use crate::factors::{FactorError, FactorTuple, ProductLabelSpace};

pub use dataset::{Dataset, DatasetError};

pub const CHANNELS: usize = 3;
pub const HEIGHT: usize = 16;
pub const WIDTH: usize = 16;
pub const PIXELS: usize = CHANNELS * HEIGHT * WIDTH;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("renderer has no meaning for factor {0:?}")]
    UnknownFactor(String),
    #[error("factor {name:?} has {cardinality} values but the renderer supports {supported}")]
    Unsupported { name: String, cardinality: usize, supported: usize },
    #[error("sprite can leave the canvas: offset {offset} + size {size} > {limit}")]
    OutOfCanvas { offset: usize, size: usize, limit: usize },
    #[error("image does not match the render of its label {0:?}")]
    Labeling(FactorTuple),
}

/// A 3×16×16 image stored channel-major, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneImage {
    pixels: Vec<f32>,
}

impl SceneImage {
    pub fn blank() -> Self {
        Self { pixels: vec![0.0; PIXELS] }
    }

    pub fn from_pixels(pixels: Vec<f32>) -> Option<Self> {
        (pixels.len() == PIXELS && pixels.iter().all(|p| (0.0..=1.0).contains(p))).then_some(Self { pixels })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f32 {
        self.pixels[(c * HEIGHT + row) * WIDTH + col]
    }

    /// Pixels lit in any channel, as (row, col).
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for row in 0..HEIGHT {
            for col in 0..WIDTH {
                if (0..CHANNELS).any(|c| self.get(c, row, col) > 0.0) {
                    out.push((row, col));
                }
            }
        }
        out
    }

    /// Bit pattern of the pixels, for exact hashing.
    pub fn bits(&self) -> impl Iterator<Item = u32> + '_ {
        self.pixels.iter().map(|p| p.to_bits())
    }

    /// SHA-256 of the little-endian f32 pixel bytes, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.pixels {
            h.update(p.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn fast_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for b in self.bits() {
            b.hash(&mut h);
        }
        h.finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeMask {
    Square,
    Plus,
    Triangle,
}

impl ShapeMask {
    pub const ALL: [ShapeMask; 3] = [ShapeMask::Square, ShapeMask::Plus, ShapeMask::Triangle];

    /// Whether cell (row, col) of a `size`×`size` box is filled.
    pub fn covers(self, size: usize, row: usize, col: usize) -> bool {
        match self {
            ShapeMask::Square => true,
            ShapeMask::Plus => {
                let (lo, hi) = (size / 4, size - size / 4);
                (lo..hi).contains(&row) || (lo..hi).contains(&col)
            }
            ShapeMask::Triangle => col <= row,
        }
    }
}

/// Appearance settings of the renderer.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderParams {
    pub palette: Vec<[f32; 3]>,
    pub shapes: Vec<ShapeMask>,
    /// Sprite edge length for each scale value.
    pub sizes: Vec<usize>,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            // red, yellow, green, blue, purple
            palette: vec![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.0, 0.5]],
            shapes: ShapeMask::ALL.to_vec(),
            sizes: vec![4, 6, 8],
        }
    }
}

/// Resolved binding of a label space to the renderer's visual attributes.
///
/// Recognized factor names are `color`, `shape`, `scale`, `pos_x` and
/// `pos_y`; absent ones take their first value.
#[derive(Clone, Debug)]
pub struct Renderer {
    space: ProductLabelSpace,
    params: RenderParams,
    slots: [Option<usize>; 5],
}

const NAMES: [&str; 5] = ["color", "shape", "scale", "pos_x", "pos_y"];

impl Renderer {
    pub fn new(space: ProductLabelSpace, params: RenderParams) -> Result<Self, SceneError> {
        if let Some(f) = space.factors().iter().find(|f| !NAMES.contains(&f.name())) {
            return Err(SceneError::UnknownFactor(f.name().to_string()));
        }
        let slots = NAMES.map(|n| space.index_of(n));
        let card = |slot: usize| slots[slot].map_or(1, |i| space.factors()[i].cardinality());
        for (slot, supported) in [(0, params.palette.len()), (1, params.shapes.len()), (2, params.sizes.len())] {
            if card(slot) > supported {
                return Err(SceneError::Unsupported { name: NAMES[slot].into(), cardinality: card(slot), supported });
            }
        }
        let max_size = params.sizes[..card(2)].iter().copied().max().unwrap_or(0);
        for (slot, limit) in [(3, WIDTH), (4, HEIGHT)] {
            let offset = card(slot) - 1;
            if offset + max_size > limit {
                return Err(SceneError::OutOfCanvas { offset, size: max_size, limit });
            }
        }
        Ok(Self { space, params, slots })
    }

    pub fn minisprites() -> Self {
        Self::new(ProductLabelSpace::minisprites(), RenderParams::default()).expect("default scene is valid")
    }

    pub fn space(&self) -> &ProductLabelSpace {
        &self.space
    }

    pub fn params(&self) -> &RenderParams {
        &self.params
    }

    fn value(&self, y: &FactorTuple, slot: usize) -> usize {
        self.slots[slot].map_or(0, |i| y[i])
    }

    /// Black background with one filled sprite.
    pub fn render(&self, y: &FactorTuple) -> Result<SceneImage, SceneError> {
        self.space.check(y)?;
        let color = self.params.palette[self.value(y, 0)];
        let shape = self.params.shapes[self.value(y, 1)];
        let size = self.params.sizes[self.value(y, 2)];
        let (x0, y0) = (self.value(y, 3), self.value(y, 4));
        let mut img = SceneImage::blank();
        for row in 0..size {
            for col in 0..size {
                if shape.covers(size, row, col) {
                    for (c, &v) in color.iter().enumerate() {
                        img.pixels[(c * HEIGHT + y0 + row) * WIDTH + x0 + col] = v;
                    }
                }
            }
        }
        Ok(img)
    }

    pub fn render_id(&self, id: usize) -> SceneImage {
        self.render(&self.space.decode(id)).expect("decoded ids are valid")
    }

    /// Every combination, indexed by combination id.
    pub fn render_grid(&self) -> Vec<SceneImage> {
        (0..self.space.grid_size()).map(|id| self.render_id(id)).collect()
    }

    /// Exact image-level action: re-render the acted-on label.
    pub fn oracle_augment(&self, elems: &[ElemId], y: &FactorTuple, image: &SceneImage) -> Result<SceneImage, SceneError> {
        if self.render(y)? != *image {
            return Err(SceneError::Labeling(y.clone()));
        }
        self.oracle_on_label(elems, y)
    }

    /// Oracle action given only the label.
    pub fn oracle_on_label(&self, elems: &[ElemId], y: &FactorTuple) -> Result<SceneImage, SceneError> {
        self.render(&self.space.act_tuple(elems, y)?)
    }

    /// Image-level laws of the oracle action at each tuple: identity
    /// elements fix the image, acting by `b` then `a` equals acting by
    /// `a·b`, and actions on different factors commute. Witnesses are
    /// `[combination id, factor, a, b]` or `[id, i, a, j, b]`.
    pub fn verify_oracle_laws(&self, tuples: &[FactorTuple]) -> Result<Verification, SceneError> {
        let space = &self.space;
        let mut identity = LawReport::new("oracle identity");
        let mut compose = LawReport::new("oracle composition");
        let mut commute = LawReport::new("oracle commutativity");
        let act = |i: usize, a: ElemId, img: &SceneImage, y: &FactorTuple| -> Result<(SceneImage, FactorTuple), SceneError> {
            let mut elems = space.identities();
            elems[i] = a;
            Ok((self.oracle_augment(&elems, y, img)?, space.act_tuple(&elems, y)?))
        };
        for y in tuples {
            let id = space.encode(y);
            let img = self.render(y)?;
            for (i, f) in space.factors().iter().enumerate() {
                let m = f.monoid();
                if act(i, m.identity(), &img, y)?.0 != img {
                    identity.record(vec![id, i, m.identity()]);
                }
                for a in m.elements() {
                    for b in m.elements() {
                        let (ib, yb) = act(i, b, &img, y)?;
                        if act(i, a, &ib, &yb)?.0 != act(i, m.op(a, b), &img, y)?.0 {
                            compose.record(vec![id, i, a, b]);
                        }
                    }
                }
                for (j, g) in space.factors().iter().enumerate().skip(i + 1) {
                    for a in m.elements() {
                        for b in g.monoid().elements() {
                            let (ia, ya) = act(i, a, &img, y)?;
                            let (jb, yb) = act(j, b, &img, y)?;
                            if act(j, b, &ia, &ya)?.0 != act(i, a, &jb, &yb)?.0 {
                                commute.record(vec![id, i, a, j, b]);
                            }
                        }
                    }
                }
            }
        }
        Ok(Verification::new(vec![identity, compose, commute]))
    }

    /// Whether all combinations render to pairwise distinct images.
    pub fn injectivity_check(&self) -> Injectivity {
        let mut buckets: HashMap<u64, Vec<(usize, SceneImage)>> = HashMap::new();
        for id in 0..self.space.grid_size() {
            let img = self.render_id(id);
            let bucket = buckets.entry(img.fast_hash()).or_default();
            if let Some((other, _)) = bucket.iter().find(|(_, seen)| *seen == img) {
                return Injectivity { injective: false, witness: Some((self.space.decode(*other), self.space.decode(id))) };
            }
            bucket.push((id, img));
        }
        Injectivity { injective: true, witness: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Injectivity {
    pub injective: bool,
    /// Two labels with identical renders.
    pub witness: Option<(FactorTuple, FactorTuple)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[usize]) -> FactorTuple {
        FactorTuple(v.to_vec())
    }

    #[test]
    fn oracle_action_obeys_laws_on_sampled_tuples() {
        let r = Renderer::minisprites();
        let tuples: Vec<_> = (0..r.space().grid_size()).step_by(29).map(|id| r.space().decode(id)).collect();
        assert!(tuples.len() >= 100);
        let v = r.verify_oracle_laws(&tuples).unwrap();
        assert!(v.is_exact(), "{v:?}");
        assert_eq!(v.reports.len(), 3);
    }

    #[test]
    fn render_is_deterministic() {
        let r = Renderer::minisprites();
        let y = t(&[3, 2, 1, 5, 6]);
        assert_eq!(r.render(&y).unwrap(), r.render(&y).unwrap());
    }

    #[test]
    fn zero_tuple_golden_digest() {
        let img = Renderer::minisprites().render(&t(&[0, 0, 0, 0, 0])).unwrap();
        // Red 4×4 square in the top-left corner.
        assert_eq!(img.support().len(), 16);
        assert_eq!(img.digest(), "76b36be0c13295128f8e8f1de453e2193217678276234758010e633bbb23aeee");
    }

    #[test]
    fn color_changes_only_channels() {
        let r = Renderer::minisprites();
        let a = r.render(&t(&[0, 1, 2, 3, 4])).unwrap();
        let b = r.render(&t(&[3, 1, 2, 3, 4])).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.support(), b.support());
    }

    #[test]
    fn mask_sizes() {
        let count = |s: ShapeMask, n: usize| (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).filter(|&(r, c)| s.covers(n, r, c)).count();
        let counts: Vec<usize> = [4, 6, 8].iter().flat_map(|&n| ShapeMask::ALL.map(|s| count(s, n))).collect();
        assert_eq!(counts, vec![16, 12, 10, 36, 32, 21, 64, 48, 36]);
    }

    #[test]
    fn default_scene_is_injective() {
        let inj = Renderer::minisprites().injectivity_check();
        assert!(inj.injective, "collision {:?}", inj.witness);
    }

    #[test]
    fn duplicate_palette_collides() {
        let mut params = RenderParams::default();
        params.palette[1] = params.palette[0];
        let inj = Renderer::new(ProductLabelSpace::minisprites(), params).unwrap().injectivity_check();
        assert!(!inj.injective);
        let (a, b) = inj.witness.unwrap();
        assert_eq!(a[0], 0);
        assert_eq!(b[0], 1);
        assert_eq!(a.values()[1..], b.values()[1..]);
    }

    #[test]
    fn single_tuple_space() {
        let space: ProductLabelSpace = "color:cyclic:1".parse().unwrap();
        assert!(Renderer::new(space, RenderParams::default()).unwrap().injectivity_check().injective);
    }

    #[test]
    fn rejects_unrenderable_rosters() {
        let p = RenderParams::default;
        assert!(matches!(Renderer::new("hue:cyclic:3".parse().unwrap(), p()), Err(SceneError::UnknownFactor(_))));
        assert!(matches!(Renderer::new("shape:cyclic:4".parse().unwrap(), p()), Err(SceneError::Unsupported { .. })));
        assert!(matches!(Renderer::new("scale:ordinal:3,pos_x:ordinal:10".parse().unwrap(), p()), Err(SceneError::OutOfCanvas { .. })));
        assert!(Renderer::new("color:cyclic:5,pos_x:cyclic:10".parse().unwrap(), p()).is_ok());
    }

    #[test]
    fn oracle_basics() {
        let r = Renderer::minisprites();
        let y = t(&[1, 2, 0, 7, 3]);
        let img = r.render(&y).unwrap();
        let id = r.space().identities();
        assert_eq!(r.oracle_augment(&id, &y, &img).unwrap(), img);
        // The position generator saturates at the right edge.
        assert_eq!(r.oracle_augment(&r.space().single(3, 1), &y, &img).unwrap(), img);
        // Color then position equals position then color.
        let color = r.space().single(0, 1);
        let pos = r.space().single(4, 1);
        let cp = r.oracle_on_label(&pos, &r.space().act_tuple(&color, &y).unwrap()).unwrap();
        let pc = r.oracle_on_label(&color, &r.space().act_tuple(&pos, &y).unwrap()).unwrap();
        assert_eq!(cp, pc);
    }

    #[test]
    fn oracle_rejects_mislabeled_image() {
        let r = Renderer::minisprites();
        let img = r.render(&t(&[1, 2, 0, 7, 3])).unwrap();
        let err = r.oracle_augment(&r.space().identities(), &t(&[0, 2, 0, 7, 3]), &img).unwrap_err();
        assert!(matches!(err, SceneError::Labeling(_)));
    }
}
