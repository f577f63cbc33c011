use crate::datagen::{NodeStream, StreamRecord};
use crate::error::Result;
use crate::graph::{ExpandingGraph, GraphSignal, ShiftMatrix};

/// State visible to learners just before record `index` arrives.
pub struct StepContext<'a> {
    /// Zero-based record index; the paper's `t` is `index + 1`.
    pub index: usize,
    pub graph: &'a ExpandingGraph,
    /// One shift matrix per requested order, in request order.
    pub shifts: &'a [ShiftMatrix],
    pub record: &'a StreamRecord,
}

/// Replays a stream, maintaining the graph and one incrementally extended
/// shift matrix per filter order, and calls `visit` before each arrival.
pub fn replay<F>(stream: &NodeStream, orders: &[usize], mut visit: F) -> Result<()>
where
    F: FnMut(&StepContext<'_>) -> Result<()>,
{
    let mut graph = stream.base_graph().clone();
    let signal: &GraphSignal = stream.base_signal();
    let mut shifts = orders
        .iter()
        .map(|&k| ShiftMatrix::build(&graph, signal, k))
        .collect::<Result<Vec<_>>>()?;
    for (index, record) in stream.records().iter().enumerate() {
        visit(&StepContext {
            index,
            graph: &graph,
            shifts: &shifts,
            record,
        })?;
        graph.expand(&record.attachment)?;
        for sm in &mut shifts {
            sm.extend(&graph, &record.attachment, record.value)?;
        }
    }
    Ok(())
}
