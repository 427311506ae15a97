//! Versioned JSON documents for programs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{Stage, StochasticProgram};

pub const MODEL_SCHEMA: &str = "cutplane-sp/1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema {found:?}, expected {expected:?}")]
    Schema { found: String, expected: &'static str },
    #[error("T is {declared} but {found} stages are listed")]
    StageCount { declared: usize, found: usize },
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema: String,
    #[serde(rename = "T")]
    horizon: usize,
    x0: Vec<f64>,
    stages: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminal_cost: Option<Vec<f64>>,
}

pub fn program_to_json(program: &StochasticProgram) -> String {
    let doc = ModelDocument {
        schema: MODEL_SCHEMA.to_string(),
        horizon: program.num_stages(),
        x0: program.x0.clone(),
        stages: program.stages.clone(),
        terminal_cost: program.terminal_cost.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("program serializes")
}

pub fn program_from_json(text: &str) -> Result<StochasticProgram, FormatError> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    if doc.schema != MODEL_SCHEMA {
        return Err(FormatError::Schema {
            found: doc.schema,
            expected: MODEL_SCHEMA,
        });
    }
    if doc.horizon != doc.stages.len() {
        return Err(FormatError::StageCount {
            declared: doc.horizon,
            found: doc.stages.len(),
        });
    }
    Ok(StochasticProgram {
        x0: doc.x0,
        stages: doc.stages,
        terminal_cost: doc.terminal_cost,
    })
}
