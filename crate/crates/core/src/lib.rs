//! Solver and simulators for zero-sum continuous-time games in which one
//! player knows the state of nature and the other only its prior.
//!
//! The value is computed by backward convexification on a lattice of the
//! simplex; the envelope facets give the informed player's splitting rules,
//! from which the optimal revelation martingale and the informed player's
//! random control are sampled.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod process;
pub mod scalar;
pub mod simplex;
pub mod strategy;
pub mod value;

pub use error::{Error, Result};
pub use scalar::{pairwise_sum, MeanSe, Real};
pub use simplex::{
    convex_envelope, fenchel_conjugate, min_tangent_second_difference, tangent_second_difference,
    DualField, DualLattice, Facet, LowerEnvelope, NodeId, NodeSplit, SimplexGrid, SimplexPoint,
    SplittingRule,
};

pub type SimplexPoint64 = SimplexPoint<f64>;
pub type SimplexGrid64 = SimplexGrid<f64>;
pub type LowerEnvelope64 = LowerEnvelope<f64>;
pub use game::{
    eval_hamiltonian, isaacs_gap_scan, lipschitz_estimate, load_builtin, ActionGrid, Band, Builtin,
    FixtureParams, GameKind, GameSpec, IsaacsScan, SaddleResult,
};

pub type GameSpec64 = GameSpec<f64>;
pub use value::{
    closed_form_value, conjugate_pde_residual, non_revealing_set, obstacle_residual,
    solve_backward, ConjugateResidual, NonRevealingSet, ObstacleResidual, TimeGrid, ValueTable,
};

pub type ValueTable64 = ValueTable<f64>;
pub use process::{
    azema_structure_residual, build_kernel, condition_kernel, dynamic_programming_check,
    estimate_value_mc, knot_means, path_diagnostics, perturb_kernel, posterior_consistency,
    sample_paths, stay_probability_estimate, ConditionalKernel, ExactPath, ExactSampler,
    MartingaleKernel, MartingalePath, PathSampler, Perturbation, SampleMode,
};

pub type MartingaleKernel64 = MartingaleKernel<f64>;
pub use strategy::{
    play_match, posterior_best_response, synthesize_informed, GameTranscript, InformedStrategy,
    MatchResult, UninformedStrategy,
};
