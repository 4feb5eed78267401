//! Binary checkpoints: an 8-byte magic, a little-endian `u32` version, a
//! `u64` header length, a JSON header describing the network and every
//! parameter, then all parameter values as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Network, PwiModel};
use crate::autodiff::{ParamStore, Tensor};
use crate::error::{PwiError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PWICKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    network: Network,
    params: Vec<ParamEntry>,
}

fn corrupt(msg: impl Into<String>) -> PwiError {
    PwiError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(model: &PwiModel, mut w: W) -> Result<()> {
    let header = Header {
        network: model.net.clone(),
        params: model
            .store
            .iter()
            .map(|(_, p)| ParamEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                frozen: p.frozen,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
    let io = |e| corrupt(format!("write failed: {e}"));
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    for (_, p) in model.store.iter() {
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<PwiModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| corrupt("file too short"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| corrupt("truncated version"))?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(|_| corrupt("truncated header length"))?;
    let len = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| corrupt("header too large"))?;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| corrupt(format!("bad header: {e}")))?;
    let mut store = ParamStore::new();
    for entry in header.params {
        let n: usize = entry.shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)
                .map_err(|_| corrupt(format!("truncated values for `{}`", entry.name)))?;
            data.push(f64::from_le_bytes(b8));
        }
        store.add(entry.name, Tensor::new(entry.shape, data)?, entry.frozen)?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| corrupt(e.to_string()))? != 0 {
        return Err(corrupt("trailing bytes after parameter values"));
    }
    Ok(PwiModel {
        net: header.network,
        store,
    })
}

pub fn save_checkpoint(model: &PwiModel, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| PwiError::io(path, e))?;
    write_checkpoint(model, BufWriter::new(f))
}

pub fn load_checkpoint(path: &Path) -> Result<PwiModel> {
    let f = File::open(path).map_err(|e| PwiError::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Aggregation, InputMode, ModelConfig};

    fn model() -> PwiModel {
        let c = ModelConfig {
            input: InputMode::SubwordC2w,
            word_dim: 5,
            hidden: 3,
            char_hidden: 2,
            subword_dim: 2,
            cnn_channels: 2,
            aggregation: Aggregation::DeepCnn { depth: 2 },
            lm_gamma: 0.3,
            lm_hidden: 2,
            lm_proj: 2,
            lm_min_freq: 1,
            alpha: 0.123456789012345,
            ..ModelConfig::default()
        };
        PwiModel::build(c, ["one", "two", "three", "two"], [], None).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.net, m.net);
        assert_eq!(back.store.len(), m.store.len());
        for ((_, a), (_, b)) in back.store.iter().zip(m.store.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.frozen, b.frozen);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        let s = ["two", "one"];
        assert_eq!(m.predict(&s, &s).unwrap(), back.predict(&s, &s).unwrap());
    }

    #[test]
    fn corruption_is_reported() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), &mut buf).unwrap();
        assert!(matches!(read_checkpoint(&buf[..buf.len() - 3]), Err(PwiError::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(PwiError::Checkpoint(_))));
        let mut long = buf;
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }
}
