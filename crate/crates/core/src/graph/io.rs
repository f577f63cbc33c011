//! CSV encodings for graphs (`src,dst,weight`) and signals (`node,value`).
//!
//! Reals are written in scientific notation with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::path::Path;

use super::{ExpandingGraph, GraphSignal};
use crate::error::{Error, Result};

/// Formats a real with 17 significant digits.
pub fn fmt_real(value: f64) -> String {
    format!("{value:.16e}")
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    raw: &str,
) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {name} from {raw:?}"),
    })
}

fn expect_header(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<()> {
    let headers = reader.headers()?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("expected header {expected:?}, found {found:?}"),
        });
    }
    Ok(())
}

fn expect_width(path: &Path, line: usize, record: &csv::StringRecord, width: usize) -> Result<()> {
    if record.len() != width {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {width} fields, found {}", record.len()),
        });
    }
    Ok(())
}

pub fn write_graph_csv(graph: &ExpandingGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["src", "dst", "weight"])?;
    for (src, dst, w) in graph.edges() {
        writer.write_record([src.to_string(), dst.to_string(), fmt_real(w)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a graph on `n_nodes` nodes from an edge list.
pub fn read_graph_csv(path: impl AsRef<Path>, n_nodes: usize) -> Result<ExpandingGraph> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    expect_header(path, &mut reader, &["src", "dst", "weight"])?;
    let mut edges = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        expect_width(path, line, &record, 3)?;
        let src: usize = parse_field(path, line, "src", &record[0])?;
        let dst: usize = parse_field(path, line, "dst", &record[1])?;
        let w: f64 = parse_field(path, line, "weight", &record[2])?;
        if src >= n_nodes || dst >= n_nodes {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("line {line}: edge ({src}, {dst}) outside {n_nodes} nodes"),
            });
        }
        edges.push((src, dst, w));
    }
    ExpandingGraph::from_edges(n_nodes, &edges)
}

pub fn write_signal_csv(signal: &GraphSignal, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["node", "value"])?;
    for (i, &v) in signal.values().iter().enumerate() {
        writer.write_record([i.to_string(), fmt_real(v)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a signal; node indices must be exactly `0..n` in order.
pub fn read_signal_csv(path: impl AsRef<Path>) -> Result<GraphSignal> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    expect_header(path, &mut reader, &["node", "value"])?;
    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        expect_width(path, line, &record, 2)?;
        let node: usize = parse_field(path, line, "node", &record[0])?;
        if node != values.len() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("line {line}: expected node {}, found {node}", values.len()),
            });
        }
        values.push(parse_field(path, line, "value", &record[1])?);
    }
    Ok(GraphSignal::new(values))
}
