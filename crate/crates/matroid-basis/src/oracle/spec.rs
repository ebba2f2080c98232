//! JSON matroid spec files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::MatroidInstance;

/// On-disk description of a matroid instance.
///
/// ```json
/// {"family": "uniform", "n": 5, "r": 2}
/// {"family": "partition", "block_of": [0,0,1,1], "caps": [1,1]}
/// {"family": "graphic", "vertices": 3, "edges": [[0,1],[1,2],[2,0]]}
/// {"family": "linear", "modulus": 2, "rows": 2, "data": [1,0,1,1, 0,1,1,0]}
/// {"family": "direct_sum", "parts": [ ... ]}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MatroidSpec {
    Uniform { n: usize, r: usize },
    Partition { block_of: Vec<u32>, caps: Vec<u32> },
    Graphic { vertices: usize, edges: Vec<(u32, u32)> },
    Linear { modulus: u64, rows: usize, data: Vec<u64> },
    DirectSum { parts: Vec<MatroidSpec> },
}

impl MatroidSpec {
    pub fn build(&self) -> Result<MatroidInstance> {
        match self {
            MatroidSpec::Uniform { n, r } => {
                if r > n {
                    return Err(Error::Parse(format!("uniform rank {r} exceeds n {n}")));
                }
                Ok(MatroidInstance::uniform(*n, *r))
            }
            MatroidSpec::Partition { block_of, caps } => {
                MatroidInstance::partition(block_of.clone(), caps.clone())
            }
            MatroidSpec::Graphic { vertices, edges } => {
                MatroidInstance::graphic(*vertices, edges.clone())
            }
            MatroidSpec::Linear { modulus, rows, data } => {
                MatroidInstance::linear(*modulus, *rows, data)
            }
            MatroidSpec::DirectSum { parts } => {
                let built: Result<Vec<_>> = parts.iter().map(|p| p.build()).collect();
                Ok(MatroidInstance::direct_sum(built?))
            }
        }
    }

    pub fn from_json(text: &str) -> Result<MatroidSpec> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("matroid spec: {e}")))
    }
}
