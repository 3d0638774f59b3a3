pub mod assignment;
pub mod clustering;
pub mod data;
pub mod error;
pub mod kmeans;
pub mod metric;
pub mod sampler;
pub mod summarize;
pub mod trace;

pub use clustering::{Clustering, ContingencyTable};
pub use data::{load_dataset, Dataset};
pub use error::{Error, Result};
pub use metric::{DistanceKind, DistanceMatrix, DistanceResult};
pub use sampler::{run_chain, ModelConfig, RunSettings};
pub use trace::{load_trace, save_trace, ClusteringTrace};
pub use summarize::{ModeReport, Posterior, RegionReport};
