//! Single-stage permutation-invariant bipartite matching loss.

pub mod hungarian;
pub mod loss;
pub mod matrix;
pub mod permutations;

pub use hungarian::{hungarian_assign, AssignCost, Assignment};
pub use loss::{
    combined_matrix, cosine_penalty_matrix, focal_cost, focal_matrix, matched_loss, p2p_matrix,
    p2p_total, CosineMode, LabelSet, LossMatrices, LossWeights, MatchResult, PairLoss,
    PredictionSet,
};
pub use matrix::Matrix;
pub use permutations::{valid_permutations, PermutationSet};
