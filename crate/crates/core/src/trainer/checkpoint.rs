//! Checkpoint file layout:
//!
//! ```text
//! magic      8 bytes  "VVCKPT\r\n"
//! header_len u64 LE
//! header     JSON: format_version, config, views, ids, vocabularies,
//!            table headers and the shape of every matrix
//! payload    each matrix in header order, row-major f64 LE
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, OutputLayer, TrainConfig};
use crate::error::{Error, Result};
use crate::hash_embed::{HashEmbeddingTable, TableHeader};
use crate::matrix::Matrix;
use crate::vocab::Vocabulary;

pub const MAGIC: &[u8; 8] = b"VVCKPT\r\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: TrainConfig,
    views: Vec<String>,
    record_ids: Vec<String>,
    labels: Vec<String>,
    vocabularies: Vec<Vocabulary>,
    tables: Vec<TableHeader>,
    matrices: Vec<MatrixShape>,
}

fn shape(name: impl Into<String>, m: &Matrix) -> MatrixShape {
    MatrixShape {
        name: name.into(),
        rows: m.rows(),
        cols: m.cols(),
    }
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut matrices = vec![shape("records", &self.records), shape("labels", &self.label_rows)];
        let mut payload_sources = vec![&self.records, &self.label_rows];
        for (view, out) in self.views.iter().zip(&self.outputs) {
            matrices.push(shape(format!("{view}.components"), out.table.components()));
            matrices.push(shape(format!("{view}.importances"), out.table.importances()));
            payload_sources.push(out.table.components());
            payload_sources.push(out.table.importances());
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            views: self.views.clone(),
            record_ids: self.record_ids.clone(),
            labels: self.labels.clone(),
            vocabularies: self.outputs.iter().map(|o| o.vocab.clone()).collect(),
            tables: self.outputs.iter().map(|o| o.table.header()).collect(),
            matrices,
        };
        let json = serde_json::to_vec(&header).expect("header serialization cannot fail");
        let payload_len: usize = payload_sources.iter().map(|m| m.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + json.len() + payload_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for m in payload_sources {
            for x in m.to_vec() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() < header_len {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let views = header.views.len();
        if header.vocabularies.len() != views || header.tables.len() != views || header.matrices.len() != 2 + 2 * views {
            return Err(bad("header sections disagree on the number of views"));
        }
        let mut payload = &body[header_len..];
        let mut matrices = Vec::with_capacity(header.matrices.len());
        for m in &header.matrices {
            let len = m
                .rows
                .checked_mul(m.cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| bad("matrix too large"))?;
            if payload.len() < len {
                return Err(Error::Checkpoint(format!("truncated payload in {}", m.name)));
            }
            let (chunk, rest) = payload.split_at(len);
            let values = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            matrices.push(Matrix::from_vec(m.rows, m.cols, values));
            payload = rest;
        }
        if !payload.is_empty() {
            return Err(bad("trailing bytes after payload"));
        }
        let mut matrices = matrices.into_iter();
        let records = matrices.next().expect("records matrix");
        let label_rows = matrices.next().expect("labels matrix");
        if records.rows() != header.record_ids.len() || label_rows.rows() != header.labels.len() {
            return Err(bad("input layer shape disagrees with ids"));
        }
        let mut outputs = Vec::with_capacity(views);
        for (vocab, table) in header.vocabularies.into_iter().zip(header.tables) {
            let components = matrices.next().expect("components");
            let importances = matrices.next().expect("importances");
            let table = HashEmbeddingTable::from_parts(table, components, importances)?;
            outputs.push(OutputLayer { vocab, table });
        }
        Ok(Model::assemble(
            header.config,
            header.views,
            header.record_ids,
            header.labels,
            records,
            label_rows,
            outputs,
        ))
    }
}

pub fn write_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&model.to_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Model::from_bytes(&bytes)
}
