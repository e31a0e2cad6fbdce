//! Staged event tree models for categorical data, learned by hierarchical
//! clustering of conditional probability vectors on the simplex.
//!
//! ```
//! use sevt::{count_transitions, learn_hclust, rng_stream, sample, score_bic, GenConfig, GenMethod, LearnConfig};
//!
//! let truth = GenConfig { p: 4, levels: 2, method: GenMethod::Split { k0: 2 }, seed: 7 }.model().unwrap();
//! let data = sample(&truth, 2000, &mut rng_stream(7, 1)).unwrap();
//! let counts = count_transitions(&data, truth.tree()).unwrap();
//! let model = learn_hclust(&counts, truth.tree(), &LearnConfig::default()).unwrap();
//! let bic = score_bic(&model, &counts).unwrap().bic;
//! assert!(bic.is_finite());
//! ```

pub mod classify;
pub mod data;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod experiment;
pub mod hcluster;
pub mod learn;
pub mod metrics;
pub mod sim;
pub mod tree;

pub use classify::{evaluate, predict, train, ClassifierModel, EvalScores};
pub use data::{count_transitions, read_csv, CountTable, Dataset, SchemaFile};
pub use error::{Error, Result};
pub use estimate::{fit_saturated, log_likelihood, n_free_params, refit_pooled, score_bic, ModelScore, Smoothing};
pub use eval::{hamming_distance, median, relative_bic, relative_hd, ComparisonReport};
pub use experiment::{run_classification, run_grid, GridSpec, ResultRow, ScoreRow, SummaryRow};
pub use hcluster::{agglomerate, Dendrogram, Linkage, Merge};
pub use learn::{baseline_full, learn_bhc, learn_hclust, KChoice, KSpec, LearnConfig};
pub use metrics::{pairwise_matrix, DissimilarityMatrix, Metric, ProbVector};
pub use sim::{
    random_parameters, random_staging_join, random_staging_split, rng_stream, sample, GenConfig, GenMethod, SimRng,
};
pub use tree::{EventTree, FittedStagedTree, ModelDocument, Staging, VariableSpec};
