//! Checkpoint files: a magic line, one JSON header line, then named tensors
//! in little-endian binary so values round-trip bit for bit.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, FactorScaler};
use super::network::Dgan;
use crate::error::{Error, Result};
use crate::stmap::MinMaxScaler;
use crate::tensor::layers::ParamStore;
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8] = b"DGAN-CHECKPOINT\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    arch: ArchSpec,
    scaler: MinMaxScaler,
    factor_scaler: FactorScaler,
    config_hash: String,
    tensors: usize,
}

/// A model together with the fingerprint of the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Dgan,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn expect_grid(&self, rows: usize, cols: usize) -> Result<()> {
        let a = &self.model.arch;
        if (a.rows, a.cols) != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "checkpoint grid is {}×{}, data grid is {rows}×{cols}",
                a.rows, a.cols
            )));
        }
        Ok(())
    }

    pub fn expect_fingerprint(&self, hash: &str) -> Result<()> {
        if self.config_hash != hash {
            return Err(Error::Checkpoint(format!(
                "config fingerprint {} does not match expected {hash}",
                self.config_hash
            )));
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

pub fn save_checkpoint(model: &Dgan, config_hash: &str, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(model, config_hash, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_checkpoint(model: &Dgan, config_hash: &str, w: &mut impl Write) -> std::io::Result<()> {
    let tensors: Vec<(u8, &String, &Tensor)> = model
        .params
        .params()
        .map(|(n, t)| (0u8, n, t))
        .chain(model.params.buffers().map(|(n, t)| (1u8, n, t)))
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        arch: model.arch.clone(),
        scaler: model.scaler,
        factor_scaler: model.factor_scaler.clone(),
        config_hash: config_hash.to_string(),
        tensors: tensors.len(),
    };
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for (kind, name, t) in tensors {
        w.write_all(&[kind])?;
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_checkpoint(&mut BufReader::new(file))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn read_n<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|_| bad("truncated checkpoint"))?;
    Ok(b)
}

pub fn read_checkpoint(r: &mut impl BufRead) -> Result<Checkpoint> {
    let mut magic = vec![0u8; MAGIC.len()];
    r.read_exact(&mut magic).map_err(|_| bad("not a checkpoint file"))?;
    if magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut line = String::new();
    r.read_line(&mut line).map_err(|_| bad("unreadable header"))?;
    let header: Header = serde_json::from_str(&line).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    header.arch.validate()?;

    let mut store = ParamStore::new();
    for _ in 0..header.tensors {
        let [kind] = read_n::<1>(r)?;
        let name_len = u32::from_le_bytes(read_n(r)?) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| bad("truncated checkpoint"))?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = u32::from_le_bytes(read_n(r)?) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_n(r)?) as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(read_n(r)?));
        }
        let t = Tensor::new(shape, data)?;
        match kind {
            0 => store.insert(name, t),
            1 => store.insert_buffer(name, t),
            k => return Err(bad(format!("unknown tensor kind {k}"))),
        }
    }

    // The stored tensors must be exactly what this architecture builds.
    let reference = Dgan::new(header.arch.clone(), 0)?;
    let same_layout = reference.params.params().count() == store.params().count()
        && reference
            .params
            .params()
            .zip(store.params())
            .all(|((na, ta), (nb, tb))| na == nb && ta.shape() == tb.shape());
    if !same_layout {
        return Err(bad("tensor layout does not match the stored architecture"));
    }

    Ok(Checkpoint {
        model: Dgan {
            arch: header.arch,
            params: store,
            scaler: header.scaler,
            factor_scaler: header.factor_scaler,
        },
        config_hash: header.config_hash,
    })
}
