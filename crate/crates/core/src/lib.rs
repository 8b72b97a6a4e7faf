//! Gene regulatory network inference from single-cell expression data.
//!
//! Every gene gets its own Kolmogorov-Arnold network that predicts the
//! gene's expression from all other genes. Input gradients of the trained
//! networks, z-scored per cell and voted across cells, give a signed and
//! directed adjacency matrix. The crate also ships a Hill/Langevin
//! expression simulator, a random-forest importance baseline and the
//! ranking metrics used to score inferred networks.

pub mod dbscan;
pub mod error;
pub mod forest;
pub mod grn;
pub mod io;
pub mod kan;
pub mod metrics;
pub mod ovr;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use error::{GrnError, Result};
pub use forest::{genie3_infer, ForestConfig, ImportanceMatrix};
pub use grn::{AdjacencyMatrix, CellSubset, ClusterConfig};
pub use kan::{KanConfig, KanNetwork};
pub use metrics::{EvaluationResult, GroundTruthNetwork, Sign};
pub use ovr::{ExpressionMatrix, GradientField};
pub use synth::{NetworkSpec, SimulationConfig};
pub use trainer::{TrainConfig, TrainReport};
