//! Token embedding tables and their `LGEM` binary file format.
//!
//! Layout (little-endian): magic `LGEM`, format version `u32`, row count
//! `u64`, dimension `u32`, then `rows * dim` `f32` values row-major. Token
//! labels live in a companion UTF-8 file with one token per line; line `i`
//! names row `i`. The companion path is the embedding path with its
//! extension replaced by `tokens`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"LGEM";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Adds or replaces the row for `token`.
    pub fn insert(&mut self, token: &str, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::EmbeddingDim {
                expected: self.dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmbeddingFormat {
                path: PathBuf::new(),
                message: format!("non-finite value in row for `{token}`"),
            });
        }
        match self.index.get(token) {
            Some(&i) => self.values[i * self.dim..(i + 1) * self.dim].copy_from_slice(row),
            None => {
                self.index.insert(token.to_string(), self.tokens.len());
                self.tokens.push(token.to_string());
                self.values.extend_from_slice(row);
            }
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    pub fn token_path(path: &Path) -> PathBuf {
        path.with_extension("tokens")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(EMBEDDING_MAGIC)?;
        out.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        out.write_all(&(self.tokens.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;

        let mut tok = BufWriter::new(File::create(Self::token_path(path))?);
        for t in &self.tokens {
            writeln!(tok, "{t}")?;
        }
        tok.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let fail = |message: String| Error::EmbeddingFormat {
            path: path.to_path_buf(),
            message,
        };
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| fail("truncated header".into()))?;
        if &magic != EMBEDDING_MAGIC {
            return Err(fail("bad magic bytes".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4).map_err(|_| fail("truncated header".into()))?;
        let version = u32::from_le_bytes(b4);
        if version != EMBEDDING_VERSION {
            return Err(fail(format!("unsupported format version {version}")));
        }
        input.read_exact(&mut b8).map_err(|_| fail("truncated header".into()))?;
        let rows = u64::from_le_bytes(b8) as usize;
        input.read_exact(&mut b4).map_err(|_| fail("truncated header".into()))?;
        let dim = u32::from_le_bytes(b4) as usize;
        if dim == 0 {
            return Err(fail("dimension must be positive".into()));
        }

        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        if raw.len() != rows * dim * 4 {
            return Err(fail(format!(
                "expected {} value bytes, found {}",
                rows * dim * 4,
                raw.len()
            )));
        }
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite embedding value".into()));
        }

        let token_path = Self::token_path(path);
        let tokens: Vec<String> = BufReader::new(File::open(&token_path)?)
            .lines()
            .collect::<std::io::Result<_>>()?;
        if tokens.len() != rows {
            return Err(fail(format!(
                "{} lists {} tokens for {rows} rows",
                token_path.display(),
                tokens.len()
            )));
        }
        let mut index = HashMap::with_capacity(rows);
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(fail(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self {
            dim,
            tokens,
            index,
            values,
        })
    }
}
