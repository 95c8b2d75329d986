//! Binary model checkpoints.
//!
//! Layout: 8-byte magic `MXCKPT01`, a little-endian u64 giving the length
//! of the UTF-8 JSON header, the header itself (format version, model
//! config, provenance metadata, and a parameter manifest), the raw
//! parameter arrays as little-endian f64 in manifest order, and finally a
//! little-endian CRC-32 of every preceding byte. The format is seekable,
//! language-neutral, and detects any single-byte corruption through the
//! checksum.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiexit::{HeadShape, ModelSpec, MultiExitModel};
use crate::numerics::params::Params;
use crate::numerics::tensor::Tensor;

/// File magic; the trailing digits version the container framing (the
/// JSON header carries its own format version for everything inside).
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MXCKPT01";
/// Current header format version.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance stored alongside the weights: enough to regenerate the run
/// and label downstream analyses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    /// Run seed (initialization and shuffling).
    pub seed: u64,
    /// Training regime name, e.g. "disjoint".
    pub regime: String,
    /// Loss-weighting scheme name, e.g. "uniform" or "sdn".
    pub scaling: String,
    /// Free-form note (dataset provenance, experiment tag).
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    spec: ModelSpec,
    meta: CheckpointMeta,
    manifest: Vec<ManifestEntry>,
}

const fn crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 {
                0xEDB8_8320 ^ (c >> 1)
            } else {
                c >> 1
            };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

static CRC_TABLE: [u32; 256] = crc_table();

/// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

/// Expected tensor shapes in canonical order, derived from the config.
fn expected_shapes(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let mut shapes = Vec::new();
    for i in 1..=spec.blocks {
        let [w, b] = spec.block_params(i);
        shapes.push((w, vec![spec.block_in_dim(i), spec.hidden_dim]));
        shapes.push((b, vec![spec.hidden_dim]));
    }
    let out = spec.task.output_dim();
    for k in 1..=spec.num_exits() {
        let names = spec.head_params(k);
        match spec.head {
            HeadShape::Linear => {
                shapes.push((names[0].clone(), vec![spec.hidden_dim, out]));
                shapes.push((names[1].clone(), vec![out]));
            }
            HeadShape::TwoLayer { hidden } => {
                shapes.push((names[0].clone(), vec![spec.hidden_dim, hidden]));
                shapes.push((names[1].clone(), vec![hidden]));
                shapes.push((names[2].clone(), vec![hidden, out]));
                shapes.push((names[3].clone(), vec![out]));
            }
        }
    }
    shapes
}

pub(crate) fn checkpoint_bytes(
    model: &MultiExitModel,
    meta: &CheckpointMeta,
    version: u32,
) -> Result<Vec<u8>> {
    let mut manifest = Vec::new();
    for (name, want_shape) in expected_shapes(&model.spec) {
        let t = model
            .params
            .get(&name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        if t.shape() != want_shape.as_slice() {
            return Err(Error::LayoutMismatch(format!(
                "parameter '{name}' has shape {:?}, config implies {:?}",
                t.shape(),
                want_shape
            )));
        }
        manifest.push(ManifestEntry {
            name,
            shape: want_shape,
        });
    }
    let header = Header {
        version,
        spec: model.spec.clone(),
        meta: meta.clone(),
        manifest,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Config(format!("header encoding: {e}")))?;

    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for entry in &header.manifest {
        for v in model.params[&entry.name].data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    Ok(bytes)
}

/// Serializes the model and its provenance to `path`.
pub fn save_checkpoint(model: &MultiExitModel, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(model, meta, CHECKPOINT_VERSION)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

fn corrupt(detail: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(detail.into())
}

/// Reads a checkpoint back: checks magic, framing, and checksum before
/// parsing the header, then rebuilds the model with every parameter
/// bit-identical to what was saved.
pub fn load_checkpoint(path: &Path) -> Result<(MultiExitModel, CheckpointMeta)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < CHECKPOINT_MAGIC.len() + 8 + 4 {
        return Err(corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic (not a checkpoint file)"));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().expect("split kept 4 bytes"));
    let computed = crc32(body);
    if stored_crc != computed {
        return Err(corrupt(format!(
            "checksum mismatch: stored {stored_crc:#010x}, computed {computed:#010x}"
        )));
    }

    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("fixed slice")) as usize;
    let params_at = 16usize
        .checked_add(header_len)
        .ok_or_else(|| corrupt("header length overflows"))?;
    if params_at > body.len() {
        return Err(corrupt(format!(
            "header length {header_len} exceeds file size"
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[16..params_at])
        .map_err(|e| corrupt(format!("unreadable header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(header.version));
    }
    header.spec.validate()?;

    // The manifest must agree exactly with what the config implies.
    let want = expected_shapes(&header.spec);
    if header.manifest.len() != want.len() {
        return Err(corrupt(format!(
            "manifest has {} entries, config implies {}",
            header.manifest.len(),
            want.len()
        )));
    }
    for (entry, (name, shape)) in header.manifest.iter().zip(&want) {
        if &entry.name != name || &entry.shape != shape {
            return Err(corrupt(format!(
                "manifest entry '{}' {:?} does not match config's '{}' {:?}",
                entry.name, entry.shape, name, shape
            )));
        }
    }

    let mut params = Params::new();
    let mut offset = params_at;
    for entry in &header.manifest {
        let numel: usize = entry.shape.iter().product();
        let end = offset + numel * 8;
        if end > body.len() {
            return Err(corrupt(format!(
                "parameter '{}' runs past the end of the file",
                entry.name
            )));
        }
        let data: Vec<f64> = bytes[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
            .collect();
        params.insert(entry.name.clone(), Tensor::new(entry.shape.clone(), data)?);
        offset = end;
    }
    if offset != body.len() {
        return Err(corrupt(format!(
            "{} trailing bytes after the last parameter",
            body.len() - offset
        )));
    }

    Ok((
        MultiExitModel {
            spec: header.spec,
            params,
        },
        header.meta,
    ))
}
