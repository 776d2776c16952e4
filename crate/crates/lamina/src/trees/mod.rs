//! Native CART decision trees, the multi-output wrapper, the FIFO refit
//! ensemble and the tree layer machine with hill-climbing target selection.

mod cart;
pub mod ensemble;
mod layer;
mod multi;

pub use cart::{fit_classification, fit_regression, CartConfig, CartTree, LeafValue, TreeNode};
pub use ensemble::{
    EnsembleTargets, EstimatorKind, EstimatorSpec, TemporalEnsemble, TreeEstimator,
};
pub use layer::TreeLayerLearner;
pub use multi::MultiOutputTrees;
