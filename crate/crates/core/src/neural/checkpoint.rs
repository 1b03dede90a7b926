use std::fs;
use std::path::Path;

use super::{Mlp, NeuralError, Scalar};

const MAGIC: &[u8; 8] = b"PNETMLP\0";
pub const CHECKPOINT_VERSION: u32 = 1;

impl<T: Scalar> Mlp<T> {
    /// Header (magic, version, scalar width, dims, parameter count)
    /// followed by little-endian parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.param_count() * T::BYTES);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims().len() as u32).to_le_bytes());
        for &d in self.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.param_count() as u64).to_le_bytes());
        for &p in self.params() {
            p.write_le(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuralError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(NeuralError::Checkpoint("not a network checkpoint".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let width = r.u32()? as usize;
        if width != T::BYTES {
            return Err(NeuralError::Checkpoint(format!("checkpoint stores {width}-byte scalars, expected {}", T::BYTES)));
        }
        let n_dims = r.u32()? as usize;
        if n_dims > 64 {
            return Err(NeuralError::Checkpoint(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = r.u64()? as usize;
        let expected = Mlp::<T>::zeros(&dims).map_err(|e| NeuralError::Checkpoint(e.to_string()))?.param_count();
        if count != expected {
            return Err(NeuralError::Checkpoint(format!("parameter count {count} does not match dims {dims:?}")));
        }
        let data = r.take(count * width)?;
        if r.pos != bytes.len() {
            return Err(NeuralError::Checkpoint("trailing bytes after parameters".into()));
        }
        let params = data.chunks_exact(width).map(T::read_le).collect();
        Mlp::from_params(&dims, params)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_bytes()).map_err(|e| NeuralError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let bytes = fs::read(path).map_err(|e| NeuralError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            NeuralError::Checkpoint(m) => NeuralError::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NeuralError::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
