pub mod categorical;
pub mod config;
pub mod gibbs;
pub mod normal_wishart;

pub use config::ModelConfig;
pub use gibbs::{run_chain, run_chain_with, update_alpha, GibbsSampler, RunSettings, SamplerState};
pub use normal_wishart::{Component, NormalWishart, SuffStats};
