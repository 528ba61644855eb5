//! Candidate generation: Pareto search, boundary midpoints and UCB scoring.

pub mod candidates;
pub mod nsga2;
pub mod pareto;

pub use candidates::{
    argmax, boundary_midpoints, farthest_point_subset, nsga2_pareto, pareto_candidates, rank_midpoints,
    ucb_from_predictions, ucb_scores, Candidate, CandidateBatch, FrontMember, Midpoint, ModelObjective, ObjectiveFn,
    ParetoFront, ReviewStatus, Strategy, DEFAULT_KAPPA,
};
pub use nsga2::{nsga2, Nsga2Config, Nsga2Outcome, Problem};
pub use pareto::{crowding_distance, dominates, hypervolume_2d, non_dominated_sort};
