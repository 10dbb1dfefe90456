//! Trainable reference scorer: forward pass, joint loss, gradients, Adam
//! training, and batch scoring into the logits wire format.
//!
//! The scorer exists to make the pipeline's math executable and testable at
//! desk scale — it is a real model with real gradients, just a small one.
//! Logits produced by any external full-scale model can enter the pipeline
//! through the same [`LogitsRecord`] file format.

mod model;
mod params;
mod train;

pub use model::{forward, grad, loss, softmax, Logits};
pub use params::ModelParams;
pub use train::{train, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::TrainingInstance;

/// One instance's logits on the wire: the bridge between scoring and
/// decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsRecord {
    pub example_id: i64,
    pub window_start: usize,
    pub start_logits: Vec<f64>,
    pub end_logits: Vec<f64>,
    /// Five entries, in answer-type wire order.
    pub type_logits: Vec<f64>,
}

impl LogitsRecord {
    pub fn new(instance: &TrainingInstance, logits: Logits) -> LogitsRecord {
        LogitsRecord {
            example_id: instance.example_id,
            window_start: instance.window_start,
            start_logits: logits.start,
            end_logits: logits.end,
            type_logits: logits.type_logits.to_vec(),
        }
    }
}

/// Score instances in order, one record per instance.
pub fn score_instances(
    params: &ModelParams,
    instances: &[TrainingInstance],
) -> Result<Vec<LogitsRecord>> {
    use rayon::prelude::*;
    instances
        .par_iter()
        .map(|inst| forward(params, &inst.input_ids).map(|l| LogitsRecord::new(inst, l)))
        .collect()
}

/// Read a logits file produced by `score` or by an external model.
pub fn read_logits(path: &std::path::Path) -> Result<Vec<LogitsRecord>> {
    let records = crate::jsonl::read_file::<LogitsRecord>(path)?;
    let mut out = Vec::new();
    for item in records {
        out.push(item?.1);
    }
    Ok(out)
}
