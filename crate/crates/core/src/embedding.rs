//! Record embeddings as consumed by the evaluation tasks, and their TSV form:
//! a `record_id\tv1\t...\tvN` header followed by one row per record.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::Eval(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Eval(format!("duplicate embedding id {dup}")));
        }
        if let Some(first) = vectors.first() {
            if vectors.iter().any(|v| v.len() != first.len()) {
                return Err(Error::Eval("embedding rows differ in width".into()));
            }
        }
        Ok(EmbeddingSet { ids, vectors })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.vectors[i].as_slice())
    }

    /// Rows of `self` followed by the columns of `other`, matched by id.
    pub fn concat(&self, other: &EmbeddingSet) -> Result<EmbeddingSet> {
        let vectors = self
            .ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| {
                let rest = other
                    .get(id)
                    .ok_or_else(|| Error::Eval(format!("id {id} missing from second set")))?;
                let mut row = v.clone();
                row.extend_from_slice(rest);
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        EmbeddingSet::new(self.ids.clone(), vectors)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_tsv_header(&mut w, self.dim())?;
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            write_tsv_row(&mut w, id, v)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.is_empty() || (i == 0 && line.starts_with("record_id\t")) {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().to_string();
            let row = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        message: format!("{f:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ids.push(id);
            vectors.push(row);
        }
        EmbeddingSet::new(ids, vectors)
    }
}

pub fn write_tsv_header<W: Write>(w: &mut W, dim: usize) -> std::io::Result<()> {
    write!(w, "record_id")?;
    for j in 1..=dim {
        write!(w, "\tv{j}")?;
    }
    writeln!(w)
}

/// Floats use the shortest representation that parses back exactly.
pub fn write_tsv_row<W: Write>(w: &mut W, id: &str, v: &[f64]) -> std::io::Result<()> {
    write!(w, "{id}")?;
    for x in v {
        write!(w, "\t{x}")?;
    }
    writeln!(w)
}
