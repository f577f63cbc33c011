//! Synthetic expanding-graph streams and the on-disk node-stream format.

mod stream;
mod synthetic;

pub use stream::{load_stream, save_stream, Manifest, NodeStream, StreamRecord};
pub use synthetic::{
    generate, generate_base, generate_stream, target_filter, AdjacencyScaling, FilterSource,
    SyntheticConfig, TargetKind,
};
