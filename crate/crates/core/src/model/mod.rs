//! The document classifier: per-subgraph GCN encoders, attention pooling,
//! the thresholded document graph and the document-level GCN.

mod checkpoint;
mod forward;
mod params;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{
    argmax_rows, build_document_graph, concat_document_embeddings, document_gcn_forward, forward_on_tape,
    full_forward, pool_documents, predict, subgraph_gcn_forward, ForwardOutputs, ForwardPass, Prediction,
};
pub use params::{ContrastiveScope, Hyperparams, ModelParameters, SubgraphSelection};
