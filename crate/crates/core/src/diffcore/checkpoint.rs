//! `EDTW` network checkpoints.
//!
//! Little-endian: magic `EDTW`, u32 version, u32 layer count, per layer u32
//! fan-in, u32 fan-out and u8 activation tag; then every layer's weights and
//! bias as f32 blobs; then u8 Adam flag, and when set the f64 hyperparameters
//! (lr, β₁, β₂, ε), u64 step, and the first- and second-moment blobs of each
//! parameter tensor.

use std::io::{self, Read, Write};

use super::{Activation, AdamConfig, AdamState, DiffError, Layer, Network, Tensor};

const MAGIC: &[u8; 4] = b"EDTW";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(mut w: impl Write, net: &Network<f32>, adam: Option<&AdamState<f32>>) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for l in net.layers() {
        w.write_all(&(l.fan_in() as u32).to_le_bytes())?;
        w.write_all(&(l.fan_out() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.tag()])?;
    }
    for p in net.params() {
        write_blob(&mut w, p)?;
    }
    match adam {
        None => w.write_all(&[0]),
        Some(s) => {
            w.write_all(&[1])?;
            for x in [s.config.lr, s.config.beta1, s.config.beta2, s.config.eps] {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(&s.step.to_le_bytes())?;
            for (m, v) in s.m.iter().zip(&s.v) {
                write_blob(&mut w, m)?;
                write_blob(&mut w, v)?;
            }
            Ok(())
        }
    }
}

fn write_blob(w: &mut impl Write, xs: &[f32]) -> io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<(Network<f32>, Option<AdamState<f32>>), DiffError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DiffError::Format("not an EDTW checkpoint".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(DiffError::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    let n = read_u32(&mut r)? as usize;
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let (fan_in, fan_out) = (read_u32(&mut r)? as usize, read_u32(&mut r)? as usize);
        let tag = read_u8(&mut r)?;
        let act = Activation::from_tag(tag).ok_or_else(|| DiffError::Format(format!("activation tag {tag}")))?;
        dims.push((fan_in, fan_out, act));
    }
    let mut layers = Vec::with_capacity(n);
    for &(fan_in, fan_out, activation) in &dims {
        let weights = Tensor::matrix(fan_in, fan_out, read_blob(&mut r, fan_in * fan_out)?);
        let bias = Tensor::new(vec![fan_out], read_blob(&mut r, fan_out)?).expect("length matches");
        layers.push(Layer { weights, bias, activation });
    }
    let net = Network::new(layers)?;
    let adam = match read_u8(&mut r)? {
        0 => None,
        1 => {
            let mut hp = [0f64; 4];
            for x in &mut hp {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                *x = f64::from_le_bytes(b);
            }
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            let step = u64::from_le_bytes(b);
            let mut state = AdamState::new(&net, AdamConfig { lr: hp[0], beta1: hp[1], beta2: hp[2], eps: hp[3] });
            state.step = step;
            for k in 0..state.m.len() {
                let len = state.m[k].len();
                state.m[k] = read_blob(&mut r, len)?;
                state.v[k] = read_blob(&mut r, len)?;
            }
            Some(state)
        }
        f => return Err(DiffError::Format(format!("adam flag {f}"))),
    };
    Ok((net, adam))
}

fn read_u8(r: &mut impl Read) -> io::Result<u8> {
    let mut b = [0u8];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_blob(r: &mut impl Read, len: usize) -> io::Result<Vec<f32>> {
    let mut buf = vec![0u8; len * 4];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}
