//! Node-labeled dependency graphs, records and datasets.
//!
//! Datasets are stored as JSON Lines, one record per line:
//!
//! ```text
//! {"id": "app1", "labels": ["famA"], "graphs": {"api": {"labels": ["L1","L2"], "edges": [[0,1]]}}}
//! ```
//!
//! The node count of a graph is the length of its `labels` array.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Views used when none are configured.
pub const DEFAULT_VIEWS: [&str; 3] = ["api", "perm", "srcsink"];

pub fn default_views() -> Vec<String> {
    DEFAULT_VIEWS.iter().map(|v| v.to_string()).collect()
}

/// Directed graph whose nodes are `0..labels.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    pub view: String,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl DependencyGraph {
    pub fn new(view: impl Into<String>, labels: Vec<String>, edges: Vec<(usize, usize)>) -> Self {
        DependencyGraph {
            view: view.into(),
            labels,
            edges,
        }
    }

    pub fn empty(view: impl Into<String>) -> Self {
        Self::new(view, Vec::new(), Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Out-neighbor lists, in edge-list order.
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for &(src, dst) in &self.edges {
            adj[src].push(dst);
        }
        adj
    }
}

/// One embeddable unit: an id, one graph per view and zero or more labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub graphs: BTreeMap<String, DependencyGraph>,
    pub labels: BTreeSet<String>,
}

impl Record {
    pub fn graph(&self, view: &str) -> Option<&DependencyGraph> {
        self.graphs.get(view)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub views: Vec<String>,
    pub records: Vec<Record>,
    pub label_alphabet: BTreeSet<String>,
}

impl Dataset {
    /// Validates every record, substitutes empty graphs for omitted views and
    /// computes the label alphabet.
    pub fn new(views: Vec<String>, mut records: Vec<Record>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Config("dataset needs at least one view".into()));
        }
        let mut seen = HashSet::new();
        for record in &mut records {
            if !seen.insert(record.id.clone()) {
                return Err(Error::validation(&record.id, "id", "duplicate record id"));
            }
            let notes = validate(record, &views).map_err(|v| v.into_error(&record.id))?;
            for note in notes {
                log::warn!("record {}: {}", record.id, note);
            }
            for view in &views {
                record
                    .graphs
                    .entry(view.clone())
                    .or_insert_with(|| DependencyGraph::empty(view.clone()));
            }
        }
        let label_alphabet = records
            .iter()
            .flat_map(|r| r.labels.iter().cloned())
            .collect();
        Ok(Dataset {
            views,
            records,
            label_alphabet,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&record_to_line(record));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphLine {
    labels: Vec<String>,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    graphs: BTreeMap<String, GraphLine>,
}

fn record_to_line(record: &Record) -> String {
    let line = RecordLine {
        id: record.id.clone(),
        labels: record.labels.iter().cloned().collect(),
        graphs: record
            .graphs
            .iter()
            .map(|(view, g)| {
                (
                    view.clone(),
                    GraphLine {
                        labels: g.labels.clone(),
                        edges: g.edges.iter().map(|&(s, d)| [s, d]).collect(),
                    },
                )
            })
            .collect(),
    };
    serde_json::to_string(&line).expect("record serialization cannot fail")
}

/// Parses one JSONL line into a record without validating it.
pub fn parse_record(line: &str, line_no: usize) -> Result<Record> {
    let parsed: RecordLine = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(Record {
        id: parsed.id,
        labels: parsed.labels.into_iter().collect(),
        graphs: parsed
            .graphs
            .into_iter()
            .map(|(view, g)| {
                let graph = DependencyGraph::new(
                    view.clone(),
                    g.labels,
                    g.edges.into_iter().map(|[s, d]| (s, d)).collect(),
                );
                (view, graph)
            })
            .collect(),
    })
}

/// Reads records from any buffered reader, skipping blank lines.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 1)?);
    }
    Ok(records)
}

/// Loads and validates a JSONL dataset. Record order follows the file.
pub fn load_dataset(path: impl AsRef<Path>, views: &[String]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_records(BufReader::new(file))?;
    Dataset::new(views.to_vec(), records)
}

/// First violated invariant of a record, with the path to the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn into_error(self, record: &str) -> Error {
        Error::validation(record, self.path, self.message)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks a record against the declared view list.
///
/// On success returns non-fatal notes (self-loops, omitted views).
pub fn validate(record: &Record, views: &[String]) -> Result<Vec<String>, Violation> {
    if record.id.is_empty() {
        return Err(Violation::new("id", "empty record id"));
    }
    let mut notes = Vec::new();
    for (view, graph) in &record.graphs {
        if !views.contains(view) {
            return Err(Violation::new(
                format!("graphs.{view}"),
                format!("unknown view {view}"),
            ));
        }
        if graph.view != *view {
            return Err(Violation::new(
                format!("graphs.{view}"),
                format!("graph is tagged with view {}", graph.view),
            ));
        }
        let nodes = graph.node_count();
        let mut seen = HashSet::with_capacity(graph.edges.len());
        for (i, &(src, dst)) in graph.edges.iter().enumerate() {
            if src >= nodes || dst >= nodes {
                return Err(Violation::new(
                    format!("graphs.{view}.edges[{i}]"),
                    format!("edge ({src}, {dst}) references a node outside 0..{nodes}"),
                ));
            }
            if !seen.insert((src, dst)) {
                return Err(Violation::new(
                    format!("graphs.{view}.edges[{i}]"),
                    format!("duplicate edge ({src}, {dst})"),
                ));
            }
            if src == dst {
                notes.push(format!("graphs.{view}.edges[{i}]: self-loop on node {src}"));
            }
        }
    }
    for view in views {
        if !record.graphs.contains_key(view) {
            notes.push(format!("graphs.{view}: view omitted, using an empty graph"));
        }
    }
    Ok(notes)
}
