//! `LGCK` checkpoint files.
//!
//! Little-endian layout: magic `LGCK`, version `u32`, the hyperparameter
//! block, a `u32` parameter count, then per parameter `u32` name length, UTF-8
//! name, `u32` rows, `u32` cols and `rows * cols` `f32` values row-major.
//!
//! Hyperparameter block: hidden `u32`, window `u32`, delta `f64`, dropout
//! `f64`, lambda `f64`, lr `f64`, weight decay `f64`, max epochs `u32`, eval
//! interval `u32`, entity min-sim `f64`, temperature `f64`, seed `u64`,
//! subgraph bitmask `u8` (1 morpheme, 2 pos, 4 entity), contrastive scope
//! `u8` (0 all, 1 labeled), gradient clip `f64` (0 when disabled).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ContrastiveScope, Hyperparams, ModelParameters, SubgraphSelection};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyper: Hyperparams,
    pub params: ModelParameters,
}

impl Checkpoint {
    /// Parameters rounded to the 32-bit storage precision of the file.
    pub fn rounded(hyper: Hyperparams, params: &ModelParameters) -> Self {
        let values = params
            .values()
            .iter()
            .map(|m| m.map(|v| v as f32 as f64))
            .collect();
        Self {
            hyper,
            params: ModelParameters::from_parts(params.names().to_vec(), values),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let h = &self.hyper;
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(h.hidden as u32).to_le_bytes());
        out.extend_from_slice(&(h.window as u32).to_le_bytes());
        for v in [h.delta, h.dropout, h.lambda, h.lr, h.weight_decay] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(h.max_epochs as u32).to_le_bytes());
        out.extend_from_slice(&(h.eval_every as u32).to_le_bytes());
        out.extend_from_slice(&h.entity_min_sim.to_le_bytes());
        out.extend_from_slice(&h.temperature.to_le_bytes());
        out.extend_from_slice(&h.seed.to_le_bytes());
        let mask = h.subgraphs.morpheme as u8 | (h.subgraphs.pos as u8) << 1 | (h.subgraphs.entity as u8) << 2;
        out.push(mask);
        out.push(match h.contrastive_scope {
            ContrastiveScope::All => 0,
            ContrastiveScope::Labeled => 1,
        });
        out.extend_from_slice(&h.grad_clip.unwrap_or(0.0).to_le_bytes());

        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, m) in self.params.names().iter().zip(self.params.values()) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for &v in m.as_slice() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hidden = r.u32()? as usize;
        let window = r.u32()? as usize;
        let delta = r.f64()?;
        let dropout = r.f64()?;
        let lambda = r.f64()?;
        let lr = r.f64()?;
        let weight_decay = r.f64()?;
        let max_epochs = r.u32()? as usize;
        let eval_every = r.u32()? as usize;
        let entity_min_sim = r.f64()?;
        let temperature = r.f64()?;
        let seed = r.u64()?;
        let mask = r.take(1)?[0];
        let contrastive_scope = match r.take(1)?[0] {
            0 => ContrastiveScope::All,
            1 => ContrastiveScope::Labeled,
            other => return Err(Error::Checkpoint(format!("unknown scope code {other}"))),
        };
        let clip = r.f64()?;
        let hyper = Hyperparams {
            hidden,
            window,
            delta,
            dropout,
            lambda,
            lr,
            weight_decay,
            max_epochs,
            eval_every,
            entity_min_sim,
            temperature,
            seed,
            subgraphs: SubgraphSelection {
                morpheme: mask & 1 != 0,
                pos: mask & 2 != 0,
                entity: mask & 4 != 0,
            },
            contrastive_scope,
            grad_clip: (clip > 0.0).then_some(clip),
        };

        let count = r.u32()? as usize;
        let mut names = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            names.push(name);
            values.push(Matrix::from_vec(rows, cols, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            hyper,
            params: ModelParameters::from_parts(names, values),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&self.to_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
