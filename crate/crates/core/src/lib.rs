//! Clustering when distances are expensive: spend a small budget of
//! one-versus-all queries on a set of landmark points, grow balls around
//! the landmarks until they form the requested number of components, then
//! hand every remaining point to the nearest component representative.
//!
//! The crate is split along the pipeline stages:
//!
//! - [`oracle`]: distance access, either point coordinates or an explicit
//!   matrix, metered through a [`model::QueryLedger`].
//! - [`selection`]: the landmark picking rule (uniform over the current
//!   farthest candidates).
//! - [`expand`]: the radius sweep that merges landmark balls into
//!   components.
//! - [`pipeline`]: the end-to-end runs, with parameters either derived
//!   from guarantee inputs or picked by rule of thumb.
//! - [`metrics`]: matching distance and f-measure between clusterings.
//! - [`baseline`]: a query-hungry embed-then-k-means comparison partner.
//! - [`synth`]: generators for datasets with known structure.
//! - [`reference`]: slow exhaustive checks used by the test suites.

pub mod baseline;
pub mod expand;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod reference;
pub mod selection;
pub mod synth;

pub use expand::{expand_landmarks, ExpandOutcome};
pub use metrics::{check_fmeasure_bound, clustering_dist, f_measure};
pub use model::{Clustering, Coverage, QueryLedger, TheoryParams};
pub use oracle::{DistanceOracle, EuclideanOracle, MatrixOracle};
pub use pipeline::{
    landmark_cluster_heuristic, landmark_cluster_theory, HeuristicOptions, PipelineOutcome,
    PipelineResult, RunReport,
};
pub use selection::select_landmarks;
