use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticConfig;
use crate::error::{Error, Result};
use crate::graph::io::{
    fmt_real, parse_field, read_graph_csv, read_signal_csv, write_graph_csv, write_signal_csv,
};
use crate::graph::{AttachmentVector, ExpandingGraph, GraphSignal};

pub const BASE_GRAPH_FILE: &str = "base_graph.csv";
pub const BASE_SIGNAL_FILE: &str = "base_signal.csv";
pub const STREAM_FILE: &str = "stream.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One arrival: attachment onto the `n0 + t − 1` existing nodes and the
/// revealed signal value.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub t: usize,
    pub attachment: AttachmentVector,
    pub value: f64,
}

/// Starting graph and signal followed by the ordered arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStream {
    base_graph: ExpandingGraph,
    base_signal: GraphSignal,
    records: Vec<StreamRecord>,
    split: usize,
}

impl NodeStream {
    /// `split` is the number of leading (training) records.
    pub fn new(
        base_graph: ExpandingGraph,
        base_signal: GraphSignal,
        records: Vec<StreamRecord>,
        split: usize,
    ) -> Result<Self> {
        let n0 = base_graph.n_nodes();
        if base_signal.len() != n0 {
            return Err(Error::Dimension {
                context: "stream: base signal length",
                expected: n0,
                found: base_signal.len(),
            });
        }
        for (i, r) in records.iter().enumerate() {
            if r.t != i + 1 || r.attachment.len() != n0 + i {
                return Err(Error::Invariant(format!(
                    "record {} (t = {}) has attachment length {}, expected {}",
                    i + 1,
                    r.t,
                    r.attachment.len(),
                    n0 + i
                )));
            }
        }
        if split > records.len() {
            return Err(Error::Config(format!(
                "split {split} beyond {} records",
                records.len()
            )));
        }
        Ok(Self {
            base_graph,
            base_signal,
            records,
            split,
        })
    }

    pub fn base_graph(&self) -> &ExpandingGraph {
        &self.base_graph
    }

    pub fn base_signal(&self) -> &GraphSignal {
        &self.base_signal
    }

    pub fn records(&self) -> &[StreamRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n0(&self) -> usize {
        self.base_graph.n_nodes()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn train(&self) -> &[StreamRecord] {
        &self.records[..self.split]
    }

    pub fn test(&self) -> &[StreamRecord] {
        &self.records[self.split..]
    }

    /// Keeps only the first `len` records; the split is clamped.
    pub fn truncated(&self, len: usize) -> NodeStream {
        let len = len.min(self.records.len());
        NodeStream {
            base_graph: self.base_graph.clone(),
            base_signal: self.base_signal.clone(),
            records: self.records[..len].to_vec(),
            split: self.split.min(len),
        }
    }
}

/// Stream metadata stored next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n0: usize,
    pub t_total: usize,
    pub split: usize,
    pub weight_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SyntheticConfig>,
}

/// Writes `base_graph.csv`, `base_signal.csv`, `stream.csv` and
/// `manifest.json` into `dir`.
pub fn save_stream(
    stream: &NodeStream,
    dir: impl AsRef<Path>,
    config: Option<&SyntheticConfig>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_graph_csv(&stream.base_graph, dir.join(BASE_GRAPH_FILE))?;
    write_signal_csv(&stream.base_signal, dir.join(BASE_SIGNAL_FILE))?;
    let mut writer = csv::Writer::from_path(dir.join(STREAM_FILE))?;
    writer.write_record(["t", "value", "attach_indices", "attach_weights"])?;
    for r in &stream.records {
        let entries = r.attachment.entries();
        let indices: Vec<String> = entries.iter().map(|(i, _)| i.to_string()).collect();
        let weights: Vec<String> = entries.iter().map(|(_, w)| fmt_real(*w)).collect();
        writer.write_record([
            r.t.to_string(),
            fmt_real(r.value),
            indices.join(";"),
            weights.join(";"),
        ])?;
    }
    writer.flush()?;
    let cap = stream.base_graph.weight_cap();
    let manifest = Manifest {
        n0: stream.n0(),
        t_total: stream.len(),
        split: stream.split,
        weight_cap: if cap.is_finite() {
            cap
        } else {
            stream.base_graph.max_weight().unwrap_or(1.0)
        },
        seed: config.map(|c| c.seed),
        config: config.cloned(),
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let text = std::fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a stream directory written by [`save_stream`].
pub fn load_stream(dir: impl AsRef<Path>) -> Result<NodeStream> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let base_signal = read_signal_csv(dir.join(BASE_SIGNAL_FILE))?;
    let n0 = base_signal.len();
    let base_graph =
        read_graph_csv(dir.join(BASE_GRAPH_FILE), n0)?.with_weight_cap(manifest.weight_cap)?;

    let path = dir.join(STREAM_FILE);
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(&path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["t", "value", "attach_indices", "attach_weights"] {
        return Err(Error::Schema {
            path: path.clone(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let schema = |message: String| Error::Schema {
        path: path.clone(),
        message,
    };
    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row?;
        if row.len() != 4 {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let t: usize = parse_field(&path, line, "t", &row[0])?;
        if t != records.len() + 1 {
            return Err(schema(format!(
                "line {line}: expected t = {}, found {t}",
                records.len() + 1
            )));
        }
        let value: f64 = parse_field(&path, line, "value", &row[1])?;
        let indices = split_list::<usize>(&path, line, "attach_indices", &row[2])?;
        let weights = split_list::<f64>(&path, line, "attach_weights", &row[3])?;
        if indices.len() != weights.len() {
            return Err(schema(format!(
                "line {line}: {} indices but {} weights",
                indices.len(),
                weights.len()
            )));
        }
        let len = n0 + t - 1;
        if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
            return Err(schema(format!(
                "line {line}: index {bad} outside the {len} existing nodes"
            )));
        }
        let attachment = AttachmentVector::new(len, indices.into_iter().zip(weights).collect())
            .map_err(|e| schema(format!("line {line}: {e}")))?;
        records.push(StreamRecord {
            t,
            attachment,
            value,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyStream(path));
    }
    if manifest.n0 != n0 || manifest.t_total != records.len() {
        return Err(schema(format!(
            "manifest declares n0 = {}, T = {} but files hold n0 = {n0}, T = {}",
            manifest.n0,
            manifest.t_total,
            records.len()
        )));
    }
    NodeStream::new(base_graph, base_signal, records, manifest.split)
}

fn split_list<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    raw: &str,
) -> Result<Vec<T>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(';')
        .map(|item| parse_field(path, line, name, item))
        .collect()
}
