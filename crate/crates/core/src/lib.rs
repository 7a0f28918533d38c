//! Learning a near-optimal item sequence from sampled observations.
//!
//! The objective scores an ordered sequence `pi` of at most `k` distinct
//! items as `F(pi) = sum_j f_j(first j items of pi)` for monotone submodular
//! `f_1..f_k`. The learner never evaluates `F`: it sees only
//! `(sequence, observed utility)` pairs drawn by two-stage uniform sampling,
//! estimates how much each item adds at each slot, solves an assignment
//! problem over those estimates, and uses the curvature of the `f_j` to
//! decide whether to trust the matched sequence.
//!
//! Modules:
//! - [`problem`]: items, sequences, set functions, and `F`.
//! - [`functions`]: function families and seeded instance generators.
//! - [`sampling`]: two-stage sampling, observation models, datasets.
//! - [`estimation`]: bucketed averages and per-slot gain estimates.
//! - [`assignment`]: exact item-to-position assignment.
//! - [`algorithm`]: the full sequencing procedure.
//! - [`oracle`]: exhaustive ground truth for small instances.

pub mod algorithm;
pub mod assignment;
pub mod error;
pub mod estimation;
pub mod functions;
pub mod oracle;
pub mod problem;
pub mod sampling;

pub use algorithm::{
    compute_alpha, random_sequence, sequencing_from_samples, theorem_bound, AlgoConfig, AlgoMode,
    AlgoOutcome, Branch,
};
pub use assignment::{assignment_to_sequence, solve_assignment, Assignment};
pub use error::{Error, Result};
pub use estimation::{build_buckets, delta_tilde_matrix, BucketIndex, DeltaMatrix, EstimationMode};
pub use functions::{Family, InstanceRecord};
pub use problem::{marginal, GroundSet, Instance, ItemId, Sequence, SetFunction};
pub use sampling::{build_dataset, delta_bound, draw_two_stage, Dataset, ObservationModel, SampleRecord};
