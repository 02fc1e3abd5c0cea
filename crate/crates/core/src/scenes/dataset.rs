//! `EDT1` dataset files.
//!
//! Little-endian layout:
//! magic `EDT1`; u32 factor count; per factor u32 name length, name bytes,
//! u8 kind tag, u32 cardinality; u32 instance count; per instance one u32
//! per factor value followed by 768 f32 pixels.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Renderer, SceneImage, PIXELS};
use crate::factors::{FactorError, FactorKind, FactorSpec, FactorTuple, ProductLabelSpace};

const MAGIC: &[u8; 4] = b"EDT1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an EDT1 dataset")]
    Magic,
    #[error("unknown factor kind tag {0}")]
    Kind(u8),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("pixel value outside [0, 1] in instance {0}")]
    Pixel(usize),
    #[error("factor name is not UTF-8")]
    Name,
}

/// Labeled images over a label space.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    space: ProductLabelSpace,
    instances: Vec<(FactorTuple, SceneImage)>,
    /// Instance index for each combination id, if present.
    by_id: Vec<Option<usize>>,
}

impl Dataset {
    pub fn new(space: ProductLabelSpace, instances: Vec<(FactorTuple, SceneImage)>) -> Result<Self, FactorError> {
        let mut by_id = vec![None; space.grid_size()];
        for (k, (y, _)) in instances.iter().enumerate() {
            space.check(y)?;
            by_id[space.encode(y)] = Some(k);
        }
        Ok(Self { space, instances, by_id })
    }

    /// One instance per combination, in combination-id order.
    pub fn generate(renderer: &Renderer) -> Self {
        let space = renderer.space().clone();
        let instances = space.tuples().zip(renderer.render_grid()).collect();
        Self::new(space, instances).expect("grid tuples are valid")
    }

    pub fn space(&self) -> &ProductLabelSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[(FactorTuple, SceneImage)] {
        &self.instances
    }

    /// Image of a combination id, if the dataset holds it.
    pub fn image(&self, id: usize) -> Option<&SceneImage> {
        self.by_id.get(id).copied().flatten().map(|k| &self.instances[k].1)
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.space.num_factors() as u32).to_le_bytes())?;
        for f in self.space.factors() {
            w.write_all(&(f.name().len() as u32).to_le_bytes())?;
            w.write_all(f.name().as_bytes())?;
            w.write_all(&[f.kind().tag()])?;
            w.write_all(&(f.cardinality() as u32).to_le_bytes())?;
        }
        w.write_all(&(self.instances.len() as u32).to_le_bytes())?;
        for (y, img) in &self.instances {
            for &v in y.values() {
                w.write_all(&(v as u32).to_le_bytes())?;
            }
            for p in img.pixels() {
                w.write_all(&p.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, DatasetError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DatasetError::Magic);
        }
        let n_factors = read_u32(&mut r)? as usize;
        let mut factors = Vec::with_capacity(n_factors);
        for _ in 0..n_factors {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| DatasetError::Name)?;
            let mut tag = [0u8];
            r.read_exact(&mut tag)?;
            let kind = FactorKind::from_tag(tag[0]).ok_or(DatasetError::Kind(tag[0]))?;
            let card = read_u32(&mut r)? as usize;
            factors.push(FactorSpec::new(name, kind, card)?);
        }
        let space = ProductLabelSpace::new(factors)?;
        let count = read_u32(&mut r)? as usize;
        let mut instances = Vec::with_capacity(count);
        let mut buf = vec![0u8; PIXELS * 4];
        for k in 0..count {
            let values = (0..n_factors).map(|_| read_u32(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
            r.read_exact(&mut buf)?;
            let pixels = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let img = SceneImage::from_pixels(pixels).ok_or(DatasetError::Pixel(k))?;
            instances.push((FactorTuple(values), img));
        }
        Ok(Self::new(space, instances)?)
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
