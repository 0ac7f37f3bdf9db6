//! Binary checkpoints: `OPQN`, a little-endian u32 version, the eight layer
//! widths as u32, a u64 value count, then every weight and bias as a
//! little-endian f64 in layer order (weights row-major before biases).

use std::fs;
use std::path::Path;

use super::{QNetwork, QNetworkSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OPQN";
const VERSION: u32 = 1;

/// `model_lambda{λ}_alpha{α}.ckpt`
pub fn checkpoint_file_name(lambda: f64, alpha: f64) -> String {
    format!("model_lambda{lambda}_alpha{alpha:.1}.ckpt")
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::CorruptCheckpoint("unexpected end of stream".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl QNetwork {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = self.spec;
        let widths = [s.picker_in, s.order_in, s.h_p, s.h_o, s.f1, s.f2, s.f3, s.out];
        let params = self.flat_params();
        let mut out = Vec::with_capacity(4 + 4 + 32 + 8 + 8 * params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for w in widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for v in params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
        }
        let mut w = [0usize; 8];
        for x in &mut w {
            *x = r.u32()? as usize;
        }
        let spec = QNetworkSpec {
            picker_in: w[0],
            order_in: w[1],
            h_p: w[2],
            h_o: w[3],
            f1: w[4],
            f2: w[5],
            f3: w[6],
            out: w[7],
        };
        let mut net = QNetwork::zeros(spec).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let count = r.u64()? as usize;
        if count != net.num_params() {
            return Err(Error::CorruptCheckpoint(format!(
                "header promises {count} values, layout needs {}",
                net.num_params()
            )));
        }
        let body = r.take(count * 8)?;
        if !r.buf.is_empty() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::CorruptCheckpoint("non-finite parameter".into()));
        }
        net.set_flat_params(&values)?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
