//! Model parameters as one flat `f64` vector with a fixed layout.
//!
//! Keeping every weight in a single vector lets the optimizer, the
//! finite-difference checks, and serialization all treat the model as a
//! plain point in R^n. Layout, in order:
//!
//! ```text
//! token embeddings   vocab_size × d
//! position embeddings max_positions × d
//! W_query            d × d   (row-major, rows = output)
//! W_key              d × d
//! W_value            d × d
//! W_output           d × d
//! w_start            d
//! w_end              d
//! W_type             5 × d
//! ```

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::SplitMix64;
use crate::instance::AnswerType;

/// Weights of the reference scorer. `data` follows the module-level layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub max_positions: usize,
    pub data: Vec<f64>,
}

impl ModelParams {
    /// Total parameter count for the given shape.
    pub fn param_count(vocab_size: usize, embed_dim: usize, max_positions: usize) -> usize {
        let d = embed_dim;
        (vocab_size + max_positions) * d + 4 * d * d + 2 * d + AnswerType::COUNT * d
    }

    /// Initialize every coordinate from uniform(−0.05, 0.05), drawn in
    /// layout order from a splitmix64 stream seeded with `seed`.
    pub fn init(vocab_size: usize, embed_dim: usize, max_positions: usize, seed: u64) -> ModelParams {
        let mut rng = SplitMix64::new(seed);
        let n = Self::param_count(vocab_size, embed_dim, max_positions);
        let data = (0..n).map(|_| rng.next_range(-0.05, 0.05)).collect();
        ModelParams {
            vocab_size,
            embed_dim,
            max_positions,
            data,
        }
    }

    pub fn zeros(vocab_size: usize, embed_dim: usize, max_positions: usize) -> ModelParams {
        ModelParams {
            vocab_size,
            embed_dim,
            max_positions,
            data: vec![0.0; Self::param_count(vocab_size, embed_dim, max_positions)],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    // Section offsets into `data`.
    pub fn tok_emb(&self, token: usize) -> usize {
        token * self.embed_dim
    }

    pub fn pos_emb(&self, position: usize) -> usize {
        (self.vocab_size + position) * self.embed_dim
    }

    fn blocks_base(&self) -> usize {
        (self.vocab_size + self.max_positions) * self.embed_dim
    }

    pub fn w_query(&self) -> usize {
        self.blocks_base()
    }

    pub fn w_key(&self) -> usize {
        self.blocks_base() + self.embed_dim * self.embed_dim
    }

    pub fn w_value(&self) -> usize {
        self.blocks_base() + 2 * self.embed_dim * self.embed_dim
    }

    pub fn w_output(&self) -> usize {
        self.blocks_base() + 3 * self.embed_dim * self.embed_dim
    }

    pub fn w_start(&self) -> usize {
        self.blocks_base() + 4 * self.embed_dim * self.embed_dim
    }

    pub fn w_end(&self) -> usize {
        self.w_start() + self.embed_dim
    }

    pub fn w_type(&self, class: usize) -> usize {
        self.w_end() + self.embed_dim + class * self.embed_dim
    }

    /// Verify shape consistency and finiteness, e.g. after loading.
    pub fn validate(&self) -> Result<()> {
        let expect = Self::param_count(self.vocab_size, self.embed_dim, self.max_positions);
        if self.data.len() != expect {
            return Err(Error::Config(format!(
                "params hold {} values but shape ({}, {}, {}) needs {}",
                self.data.len(),
                self.vocab_size,
                self.embed_dim,
                self.max_positions,
                expect
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite parameter at coordinate {i}"
            )));
        }
        Ok(())
    }

    /// Write to a single-line JSON file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::Input(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelParams> {
        let file = std::fs::File::open(path)?;
        let params: ModelParams = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Parse {
                line: None,
                message: format!("params file: {e}"),
            })?;
        params.validate()?;
        Ok(params)
    }
}
