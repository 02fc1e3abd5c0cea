//! Model files: a small header followed by `EDTW` checkpoints.
//!
//! Augmenters (`EDTA`): u32 version, u32 count, then per augmenter u32
//! factor, u32 element and a checkpoint with Adam state when known.
//! Predictors (`EDTP`): u32 version, u32 head count, per head u8 kind
//! (0 classes, 1 scalar) and u32 width or max, then the trunk and head
//! checkpoints.

use std::io::{Read, Write};

use crate::diffcore::checkpoint::{read_checkpoint, write_checkpoint};
use crate::diffcore::{AdamState, DiffError};

use super::{Augmenter, AugmenterSet, EdtError, HeadKind, Predictor};

const AUG_MAGIC: &[u8; 4] = b"EDTA";
const PRED_MAGIC: &[u8; 4] = b"EDTP";
const VERSION: u32 = 1;

fn put(w: &mut impl Write, v: u32) -> Result<(), EdtError> {
    w.write_all(&v.to_le_bytes()).map_err(DiffError::from)?;
    Ok(())
}

fn get(r: &mut impl Read) -> Result<u32, EdtError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(DiffError::from)?;
    Ok(u32::from_le_bytes(b))
}

fn header(r: &mut impl Read, magic: &[u8; 4]) -> Result<(), EdtError> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(DiffError::from)?;
    if &m != magic {
        return Err(EdtError::Format(format!("expected {} header", String::from_utf8_lossy(magic))));
    }
    let version = get(r)?;
    if version != VERSION {
        return Err(DiffError::Version { found: version, expected: VERSION }.into());
    }
    Ok(())
}

pub fn write_augmenters(mut w: impl Write, set: &AugmenterSet, adam: Option<&[AdamState<f32>]>) -> Result<(), EdtError> {
    w.write_all(AUG_MAGIC).map_err(DiffError::from)?;
    put(&mut w, VERSION)?;
    put(&mut w, set.len() as u32)?;
    for (k, a) in set.augmenters.iter().enumerate() {
        put(&mut w, a.factor as u32)?;
        put(&mut w, a.elem as u32)?;
        write_checkpoint(&mut w, &a.net, adam.and_then(|s| s.get(k))).map_err(DiffError::from)?;
    }
    Ok(())
}

/// Augmenters with the optimizer state stored for each, if any.
pub type AugmentersWithState = (AugmenterSet, Vec<Option<AdamState<f32>>>);

pub fn read_augmenters(mut r: impl Read) -> Result<AugmentersWithState, EdtError> {
    header(&mut r, AUG_MAGIC)?;
    let n = get(&mut r)?;
    let mut augmenters = Vec::new();
    let mut states = Vec::new();
    for _ in 0..n {
        let factor = get(&mut r)? as usize;
        let elem = get(&mut r)? as usize;
        let (net, adam) = read_checkpoint(&mut r)?;
        augmenters.push(Augmenter { factor, elem, net });
        states.push(adam);
    }
    Ok((AugmenterSet { augmenters }, states))
}

pub fn write_predictor(mut w: impl Write, p: &Predictor<f32>) -> Result<(), EdtError> {
    w.write_all(PRED_MAGIC).map_err(DiffError::from)?;
    put(&mut w, VERSION)?;
    put(&mut w, p.kinds.len() as u32)?;
    for k in &p.kinds {
        let (tag, n) = match *k {
            HeadKind::Classes(n) => (0u8, n),
            HeadKind::Scalar { max } => (1u8, max),
        };
        w.write_all(&[tag]).map_err(DiffError::from)?;
        put(&mut w, n as u32)?;
    }
    write_checkpoint(&mut w, &p.trunk, None).map_err(DiffError::from)?;
    for h in &p.heads {
        write_checkpoint(&mut w, h, None).map_err(DiffError::from)?;
    }
    Ok(())
}

pub fn read_predictor(mut r: impl Read) -> Result<Predictor<f32>, EdtError> {
    header(&mut r, PRED_MAGIC)?;
    let n = get(&mut r)?;
    let mut kinds = Vec::new();
    for _ in 0..n {
        let mut tag = [0u8];
        r.read_exact(&mut tag).map_err(DiffError::from)?;
        let v = get(&mut r)? as usize;
        kinds.push(match tag[0] {
            0 => HeadKind::Classes(v),
            1 => HeadKind::Scalar { max: v },
            t => return Err(EdtError::Format(format!("unknown head kind {t}"))),
        });
    }
    let (trunk, _) = read_checkpoint(&mut r)?;
    let mut heads = Vec::new();
    for _ in 0..n {
        heads.push(read_checkpoint(&mut r)?.0);
    }
    Ok(Predictor { trunk, heads, kinds })
}
