//! Embedding files, clip-id sidecars and dataset manifests.

mod embeddings;
mod manifest;
pub mod npy;

pub use embeddings::{load_embeddings, sidecar_path, write_embeddings, EmbeddingSet};
pub use manifest::{load_manifest, parse_manifest, ClipRecord, DatasetManifest, MANIFEST_COLUMNS};
