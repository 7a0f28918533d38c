use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use subseq::algorithm::matching_bound;
use subseq::oracle::brute_force_optimal;
use subseq::sampling::format_decimal;
use subseq::{random_sequence, theorem_bound, AlgoMode, AlgoOutcome, Error, Instance};

/// One algorithm run, scored against the oracle when it is available.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub seed: u64,
    pub branch: String,
    /// `F` of the returned sequence.
    pub value: Option<f64>,
    /// `F` of the best sequence.
    pub optimum: Option<f64>,
    pub ratio: Option<f64>,
    /// Mean ratio of random sequences; filled for fallback outcomes.
    pub fallback_mean_ratio: Option<f64>,
    pub bound: Option<f64>,
    pub alpha: f64,
    pub curvature: Option<f64>,
    pub m: usize,
    pub min_bucket_size: usize,
    pub threshold_lhs: Option<f64>,
    pub threshold_rhs: Option<f64>,
    pub matched_weight: f64,
    pub avg_full: Option<f64>,
    pub any_flagged: bool,
    pub sequence: String,
}

impl ResultRow {
    /// The ratio compared against the bound: fallback outcomes are judged
    /// by the expected quality of a random draw.
    pub fn scored_ratio(&self) -> Option<f64> {
        self.fallback_mean_ratio.or(self.ratio)
    }
}

/// Bound guaranteed by the chosen mode at curvature `c`.
pub fn mode_bound(mode: AlgoMode, c: f64, alpha: f64) -> f64 {
    match mode {
        AlgoMode::Full => theorem_bound(c, alpha),
        AlgoMode::MatchingOnly => matching_bound(c),
    }
}

/// Exact optimum, or `None` when the instance is too large to enumerate.
pub fn optimum_if_small(inst: &Instance) -> anyhow::Result<Option<f64>> {
    match brute_force_optimal(inst) {
        Ok(r) => Ok(Some(r.optimum_value)),
        Err(Error::TooLarge { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub struct RowInput<'a> {
    pub seed: u64,
    pub m: usize,
    pub mode: AlgoMode,
    pub instance: Option<&'a Instance>,
    pub optimum: Option<f64>,
    pub fallback_draws: usize,
}

pub fn make_row(input: &RowInput<'_>, out: &AlgoOutcome) -> anyhow::Result<ResultRow> {
    let d = &out.diagnostics;
    let value = match input.instance {
        Some(inst) => Some(inst.evaluate(out.sequence.as_slice())?),
        None => None,
    };
    let ratio = match (value, input.optimum) {
        (Some(v), Some(opt)) if opt > 0.0 => Some(v / opt),
        (Some(_), Some(_)) => Some(1.0),
        _ => None,
    };
    let fallback_mean_ratio = match (out.branch, input.instance, input.optimum) {
        (subseq::Branch::RandomFallback, Some(inst), Some(opt)) if opt > 0.0 => {
            // separate stream from the one that drew the returned sequence
            let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
            rng.set_stream(1);
            let mut total = 0.0;
            for _ in 0..input.fallback_draws {
                let s = random_sequence(inst.n(), inst.k(), &mut rng)?;
                total += inst.evaluate(s.as_slice())? / opt;
            }
            Some(total / input.fallback_draws as f64)
        }
        _ => None,
    };
    Ok(ResultRow {
        seed: input.seed,
        branch: out.branch.to_string(),
        value,
        optimum: input.optimum,
        ratio,
        fallback_mean_ratio,
        bound: d.curvature.map(|c| mode_bound(input.mode, c, d.alpha)),
        alpha: d.alpha,
        curvature: d.curvature,
        m: input.m,
        min_bucket_size: d.min_bucket_size,
        threshold_lhs: d.threshold_lhs,
        threshold_rhs: d.threshold_rhs,
        matched_weight: d.matched_weight,
        avg_full: d.avg_full,
        any_flagged: d.any_flagged,
        sequence: out.sequence.to_string(),
    })
}

pub fn write_rows<W: Write>(rows: &[ResultRow], sink: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub seeds: usize,
    pub min_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub bound: Option<f64>,
    pub tolerance: f64,
    /// `None` when some row could not be scored.
    pub pass: Option<bool>,
}

impl Summary {
    pub fn from_rows(rows: &[ResultRow], tolerance: f64) -> Self {
        let scored: Option<Vec<f64>> = rows.iter().map(ResultRow::scored_ratio).collect();
        let bounds: Option<Vec<f64>> = rows.iter().map(|r| r.bound).collect();
        let (min_ratio, mean_ratio) = match &scored {
            Some(s) if !s.is_empty() => (
                Some(s.iter().copied().fold(f64::INFINITY, f64::min)),
                Some(s.iter().sum::<f64>() / s.len() as f64),
            ),
            _ => (None, None),
        };
        let pass = match (&scored, &bounds) {
            (Some(s), Some(b)) => Some(s.iter().zip(b).all(|(r, b)| *r >= b - tolerance)),
            _ => None,
        };
        let bound = bounds.and_then(|b| b.into_iter().reduce(f64::max));
        Summary { seeds: rows.len(), min_ratio, mean_ratio, bound, tolerance, pass }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |x: Option<f64>| x.map(format_decimal).unwrap_or_else(|| "n/a".into());
        let verdict = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "UNSCORED",
        };
        write!(
            f,
            "summary: seeds={} min_ratio={} mean_ratio={} bound={} tolerance={} result={verdict}",
            self.seeds,
            num(self.min_ratio),
            num(self.mean_ratio),
            num(self.bound),
            format_decimal(self.tolerance),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ratio: Option<f64>, fallback: Option<f64>, bound: Option<f64>) -> ResultRow {
        ResultRow {
            seed: 0,
            branch: "CaseA".into(),
            value: None,
            optimum: None,
            ratio,
            fallback_mean_ratio: fallback,
            bound,
            alpha: 0.4,
            curvature: Some(0.0),
            m: 10,
            min_bucket_size: 1,
            threshold_lhs: None,
            threshold_rhs: None,
            matched_weight: 0.0,
            avg_full: None,
            any_flagged: false,
            sequence: "0 1".into(),
        }
    }

    #[test]
    fn single_row_summary_is_that_row() {
        let s = Summary::from_rows(&[row(Some(0.9), None, Some(0.8))], 0.05);
        assert_eq!(s.min_ratio, Some(0.9));
        assert_eq!(s.mean_ratio, Some(0.9));
        assert_eq!(s.pass, Some(true));
    }

    #[test]
    fn fallback_rows_use_mean_ratio() {
        let rows = [row(Some(0.1), Some(0.7), Some(0.8)), row(Some(1.0), None, Some(0.8))];
        let s = Summary::from_rows(&rows, 0.05);
        assert_eq!(s.min_ratio, Some(0.7));
        assert_eq!(s.pass, Some(false));
        assert_eq!(Summary::from_rows(&rows, 0.15).pass, Some(true));
    }

    #[test]
    fn missing_oracle_is_unscored() {
        let s = Summary::from_rows(&[row(None, None, Some(0.5))], 0.05);
        assert_eq!(s.pass, None);
        assert!(s.to_string().ends_with("result=UNSCORED"));
    }
}
