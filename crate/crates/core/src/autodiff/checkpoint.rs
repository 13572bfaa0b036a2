//! Binary tensor checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | field     | type                         |
//! |-----------|------------------------------|
//! | magic     | `b"FXCK"`                    |
//! | version   | `u32` (currently 1)          |
//! | count     | `u32` number of tensors      |
//! | per tensor: name length `u32`, UTF-8 name, ndim `u32`, dims `u32 x ndim`, data `f32 x numel` |

use std::io::{self, Read, Write};

use super::param::ParamStore;
use super::tensor::{Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub fn write_checkpoint<T: Real, W: Write>(store: &ParamStore<T>, mut w: W) -> Result<(), CheckpointError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        let t = store.value(id);
        w.write_all(&(t.ndim() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &x in t.data() {
            w.write_all(&(x.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<T: Real, R: Read>(mut r: R) -> Result<ParamStore<T>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut b = [0u8; 4];
        for _ in 0..numel {
            r.read_exact(&mut b)?;
            data.push(T::of(f32::from_le_bytes(b) as f64));
        }
        let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        store.add(name, t).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_values() {
        let mut store = ParamStore::<f32>::new();
        store.add("a.w", Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-3, 7.0]).unwrap()).unwrap();
        store.add("b", Tensor::scalar(0.25)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&store, &mut buf).unwrap();
        let back: ParamStore<f32> = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for id in store.ids() {
            let other = back.id(store.name(id)).unwrap();
            assert_eq!(back.value(other), store.value(id));
        }
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        assert!(matches!(read_checkpoint::<f32, _>(&b"NOPE\x01\0\0\0"[..]), Err(CheckpointError::BadMagic)));
        let mut buf = b"FXCK".to_vec();
        buf.extend_from_slice(&9u32.to_le_bytes());
        assert!(matches!(read_checkpoint::<f32, _>(&buf[..]), Err(CheckpointError::Version(9))));
    }
}
