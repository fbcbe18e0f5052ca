//! Supervised multi-topology network cross-diffusion for estimating
//! class-specific brain network atlases, plus the discriminative-edge
//! classification pipeline built on top of them.

pub mod clustering;
pub mod connectome;
pub mod diffusion;
pub mod discrimination;
pub mod error;
pub mod evaluation;
pub mod manifest;
pub mod mkl;
pub mod synth;
pub mod topology;

pub use clustering::{cluster, ClusterAssignment};
pub use connectome::{
    devectorize, load_connectome, vectorize, write_connectome, Connectome, FeatureVector, Population,
};
pub use diffusion::{estimate_atlas, Atlas, AtlasParams, KernelMode};
pub use discrimination::{run_cv, run_cv_populations, CvParams, CvReport, EdgeSelection, LinearClassifier, Metrics};
pub use error::{Error, Result};
pub use evaluation::{centeredness, compare_populations, compare_variants, frobenius_distance, VariantReport};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use mkl::{Bandwidth, SubjectWeights};
pub use synth::{generate, SynthData, SynthSpec};
pub use topology::{avg_topology, AvgTopologyMatrix, Centrality, TopoTensor};
