//! Named head-placement schemes.
//!
//! `EveryN` spaces exits uniformly and always includes the last block.
//! The dense-sparse and sparse-dense layouts are fixed 8-exit patterns for
//! a 14-block backbone that concentrate exits early or late; they exist to
//! compare against the uniform layouts at matched exit counts.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementScheme {
    /// Exits after blocks `n, 2n, ...`, plus the last block.
    EveryN { n: usize },
    /// Exits after blocks 1-7 and 11 (14-block backbones only).
    DenseSparse,
    /// Exits after blocks 1, 4, and 8-14 (14-block backbones only).
    SparseDense,
}

impl PlacementScheme {
    /// Expands the scheme into explicit placements for an `L`-block
    /// backbone.
    pub fn placements(&self, blocks: usize) -> Result<Vec<usize>> {
        match *self {
            PlacementScheme::EveryN { n } => {
                if n == 0 || n > blocks {
                    return Err(Error::InvalidParameter(format!(
                        "every-{n} needs 1 <= n <= {blocks}"
                    )));
                }
                let mut v: Vec<usize> = (n..=blocks).step_by(n).collect();
                if *v.last().unwrap() != blocks {
                    v.push(blocks);
                }
                Ok(v)
            }
            PlacementScheme::DenseSparse => {
                if blocks != 14 {
                    return Err(Error::UnsupportedScheme(format!(
                        "dense-sparse is defined for 14 blocks, got {blocks}"
                    )));
                }
                Ok(vec![1, 2, 3, 4, 5, 6, 7, 11])
            }
            PlacementScheme::SparseDense => {
                if blocks != 14 {
                    return Err(Error::UnsupportedScheme(format!(
                        "sparse-dense is defined for 14 blocks, got {blocks}"
                    )));
                }
                Ok(vec![1, 4, 8, 9, 10, 11, 12, 13, 14])
            }
        }
    }
}

impl FromStr for PlacementScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-sparse" => Ok(PlacementScheme::DenseSparse),
            "sparse-dense" => Ok(PlacementScheme::SparseDense),
            _ => {
                if let Some(num) = s.strip_prefix("every-") {
                    let n = num.parse::<usize>().map_err(|_| {
                        Error::UnsupportedScheme(format!("bad exit spacing in {s:?}"))
                    })?;
                    Ok(PlacementScheme::EveryN { n })
                } else {
                    Err(Error::UnsupportedScheme(format!(
                        "unknown scheme {s:?} (expected every-N, dense-sparse, or sparse-dense)"
                    )))
                }
            }
        }
    }
}
