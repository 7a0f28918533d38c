//! Sequencing from samples: estimate per-slot gains, solve the assignment,
//! then decide between the matched sequence and a random one using the
//! curvature threshold test.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::{assignment_to_sequence, solve_assignment};
use crate::error::{Error, Result};
use crate::estimation::{
    avg_full, build_buckets, delta_tilde_matrix, min_bucket_size, DeltaMatrix, EstimationMode,
};
use crate::problem::Sequence;
use crate::sampling::{random_ordered, Dataset};

/// Probability that a uniformly random ordered `k`-sequence over `n` items
/// avoids a fixed set of `k` items:
/// `prod_{j=0..k-1} (n-k-j)/(n-j)`, which is 0 when `n < 2k`.
pub fn compute_alpha(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "alpha needs 1 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    if n < 2 * k {
        return Ok(0.0);
    }
    Ok((0..k).map(|j| (n - k - j) as f64 / (n - j) as f64).product())
}

/// `(1-c)^2`, the guarantee of the matched sequence alone.
pub fn matching_bound(c: f64) -> f64 {
    (1.0 - c) * (1.0 - c)
}

/// `alpha (1-c) / (1 + c - c^2)`, the guarantee of the comparison branch.
pub fn comparison_bound(c: f64, alpha: f64) -> f64 {
    alpha * (1.0 - c) / (1.0 + c - c * c)
}

/// The larger of the two guarantees.
pub fn theorem_bound(c: f64, alpha: f64) -> f64 {
    matching_bound(c).max(comparison_bound(c, alpha))
}

/// A uniformly random ordered sequence of `k` distinct items.
pub fn random_sequence<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Sequence> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    Ok(random_ordered(rng, n, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlgoMode {
    /// The full case split; needs the curvature.
    #[default]
    Full,
    /// Always return the matched sequence; curvature may be unknown.
    MatchingOnly,
}

impl FromStr for AlgoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AlgoMode::Full),
            "matching-only" => Ok(AlgoMode::MatchingOnly),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlgoConfig {
    pub curvature: Option<f64>,
    pub mode: AlgoMode,
    /// Seeds the fallback draw.
    pub seed: u64,
    pub estimation: EstimationMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `(1-c)^2 >= alpha (1-c)/(1+c-c^2)`: matched sequence returned.
    CaseA,
    /// Threshold failed but `(1-c) * matched weight >= avg over full-length
    /// samples`: matched sequence returned.
    CaseB,
    /// Neither held: a uniformly random sequence returned.
    RandomFallback,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::CaseA => "CaseA",
            Branch::CaseB => "CaseB",
            Branch::RandomFallback => "RandomFallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub alpha: f64,
    pub curvature: Option<f64>,
    /// `(1-c)^2`.
    pub threshold_lhs: Option<f64>,
    /// `alpha (1-c)/(1+c-c^2)`.
    pub threshold_rhs: Option<f64>,
    /// Sum of estimated weights along the matched sequence.
    pub matched_weight: f64,
    /// `(1-c)` times `matched_weight`.
    pub scaled_matched_weight: Option<f64>,
    /// Mean observed utility of full-length samples, when available.
    pub avg_full: Option<f64>,
    pub min_bucket_size: usize,
    pub any_flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoOutcome {
    pub sequence: Sequence,
    /// The assignment-derived sequence, whatever the branch.
    pub matched: Sequence,
    pub branch: Branch,
    pub diagnostics: Diagnostics,
    pub weights: DeltaMatrix,
}

/// Runs the algorithm with the fallback stream seeded from `cfg.seed`.
pub fn sequencing_from_samples(
    ds: &Dataset,
    n: usize,
    k: usize,
    cfg: &AlgoConfig,
) -> Result<AlgoOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sequencing_from_samples_with_rng(ds, n, k, cfg, &mut rng)
}

pub fn sequencing_from_samples_with_rng<R: Rng + ?Sized>(
    ds: &Dataset,
    n: usize,
    k: usize,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<AlgoOutcome> {
    if ds.n() != n || ds.k() != k {
        return Err(Error::Config(format!(
            "dataset is for n = {}, k = {} but n = {n}, k = {k} was requested",
            ds.n(),
            ds.k()
        )));
    }
    if let Some(c) = cfg.curvature {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Config(format!("curvature {c} outside [0, 1]")));
        }
    }
    if cfg.mode == AlgoMode::Full && cfg.curvature.is_none() {
        return Err(Error::Config(
            "curvature is required unless running matching-only".into(),
        ));
    }

    let buckets = build_buckets(ds);
    let weights = delta_tilde_matrix(&buckets, cfg.estimation)?;
    let assignment = solve_assignment(&weights)?;
    let matched = assignment_to_sequence(&assignment);
    let alpha = compute_alpha(n, k)?;

    let mut diagnostics = Diagnostics {
        alpha,
        curvature: cfg.curvature,
        threshold_lhs: cfg.curvature.map(matching_bound),
        threshold_rhs: cfg.curvature.map(|c| comparison_bound(c, alpha)),
        matched_weight: assignment.total_weight,
        scaled_matched_weight: cfg.curvature.map(|c| (1.0 - c) * assignment.total_weight),
        avg_full: avg_full(&buckets, cfg.estimation).ok(),
        min_bucket_size: min_bucket_size(&buckets),
        any_flagged: weights.any_flagged(),
    };
    if cfg.estimation == EstimationMode::Lenient && buckets.full_bucket().is_empty() {
        diagnostics.any_flagged = true;
    }

    let finish = |sequence, branch, diagnostics| AlgoOutcome {
        sequence,
        matched: matched.clone(),
        branch,
        diagnostics,
        weights: weights.clone(),
    };

    if cfg.mode == AlgoMode::MatchingOnly {
        return Ok(finish(matched.clone(), Branch::CaseA, diagnostics));
    }

    let lhs = diagnostics.threshold_lhs.expect("curvature checked above");
    let rhs = diagnostics.threshold_rhs.expect("curvature checked above");
    if lhs >= rhs {
        return Ok(finish(matched.clone(), Branch::CaseA, diagnostics));
    }

    let scaled = diagnostics.scaled_matched_weight.expect("curvature checked above");
    let baseline = avg_full(&buckets, cfg.estimation)?;
    if scaled >= baseline {
        Ok(finish(matched.clone(), Branch::CaseB, diagnostics))
    } else {
        let sequence = random_sequence(n, k, rng)?;
        Ok(finish(sequence, Branch::RandomFallback, diagnostics))
    }
}
