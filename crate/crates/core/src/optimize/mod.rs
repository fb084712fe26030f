//! Bounded maximization: projected L-BFGS, Boltzmann restart selection,
//! multi-start ascent, and the recommendation optimizers.

mod constrained;
pub mod lbfgsb;
mod multistart;
mod recommend;

pub use multistart::{
    boltzmann_indices, boltzmann_restarts, local_maximize, multistart_maximize, BoundedBox, FnObjective, Objective,
    OptimizeConfig, OptimizeOutcome,
};
pub use recommend::{raw_sample_size, recommend_fixed_design, recommend_policy, Recommender, Surface};
pub use constrained::{constrained_propose_supply_chain, round_supply_point, SupplyLayout, SupplyProposal};
