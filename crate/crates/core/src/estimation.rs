//! Bucketed averages of observed utilities and the marginal-contribution
//! estimates built from them.
//!
//! For item `i` and slot `t`, the estimate is the mean utility of records of
//! length `t + 1` ending in `i`, minus the mean utility of records of length
//! `t` that avoid `i`. Slot 0 uses the empty sequence as baseline, whose
//! value is zero.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::problem::ItemId;
use crate::sampling::{format_decimal, Dataset};

/// Observed utilities grouped by the events the estimator needs.
#[derive(Debug, Clone)]
pub struct BucketIndex {
    n: usize,
    k: usize,
    // [length - 1][item]
    last: Vec<Vec<Vec<f64>>>,
    excl: Vec<Vec<Vec<f64>>>,
    full: Vec<f64>,
}

impl BucketIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Utilities of records of length `len` whose last item is `item`.
    pub fn last_bucket(&self, item: ItemId, len: usize) -> &[f64] {
        if len == 0 || len > self.k {
            return &[];
        }
        &self.last[len - 1][item]
    }

    /// Utilities of records of length `len` that do not contain `item`.
    pub fn excl_bucket(&self, item: ItemId, len: usize) -> &[f64] {
        if len == 0 || len > self.k {
            return &[];
        }
        &self.excl[len - 1][item]
    }

    /// Utilities of records of length `k`.
    pub fn full_bucket(&self) -> &[f64] {
        &self.full
    }
}

/// Single pass over the records.
pub fn build_buckets(ds: &Dataset) -> BucketIndex {
    let (n, k) = (ds.n(), ds.k());
    let mut last = vec![vec![Vec::new(); n]; k];
    let mut excl = vec![vec![Vec::new(); n]; k];
    let mut full = Vec::new();
    let mut present = vec![false; n];

    for rec in ds.records() {
        let len = rec.sequence.len();
        let items = rec.sequence.as_slice();
        let tail = *items.last().expect("records are nonempty");
        last[len - 1][tail].push(rec.phi);
        for &i in items {
            present[i] = true;
        }
        for (i, bucket) in excl[len - 1].iter_mut().enumerate() {
            if !present[i] {
                bucket.push(rec.phi);
            }
        }
        for &i in items {
            present[i] = false;
        }
        if len == k {
            full.push(rec.phi);
        }
    }
    BucketIndex { n, k, last, excl, full }
}

/// Mean that does not depend on the order of `values`.
fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Some(sorted.iter().sum::<f64>() / sorted.len() as f64)
}

/// What to do when a bucket an estimate needs is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimationMode {
    /// Fail with [`Error::InsufficientSamples`].
    #[default]
    Strict,
    /// Use 0 for the missing average and flag the entry.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEntry {
    pub value: f64,
    pub n_last: usize,
    pub n_excl: usize,
    /// Set when a needed bucket was empty and replaced by zero.
    pub flagged: bool,
}

/// Estimated gain of appending `item` at slot `slot` (0-based), i.e. as the
/// `slot + 1`-th element.
pub fn delta_tilde(
    bi: &BucketIndex,
    item: ItemId,
    slot: usize,
    mode: EstimationMode,
) -> Result<DeltaEntry> {
    if item >= bi.n || slot >= bi.k {
        return Err(Error::InvalidParameter(format!(
            "no estimate for item {item}, slot {slot} with n = {}, k = {}",
            bi.n, bi.k
        )));
    }
    let last = bi.last_bucket(item, slot + 1);
    let mut flagged = false;
    let with_item = match (mean(last), mode) {
        (Some(v), _) => v,
        (None, EstimationMode::Lenient) => {
            flagged = true;
            0.0
        }
        (None, EstimationMode::Strict) => {
            return Err(Error::InsufficientSamples {
                bucket: format!("last(item={item}, len={})", slot + 1),
            })
        }
    };
    let (without_item, n_excl) = if slot == 0 {
        (0.0, 0)
    } else {
        let excl = bi.excl_bucket(item, slot);
        match (mean(excl), mode) {
            (Some(v), _) => (v, excl.len()),
            (None, EstimationMode::Lenient) => {
                flagged = true;
                (0.0, 0)
            }
            (None, EstimationMode::Strict) => {
                return Err(Error::InsufficientSamples {
                    bucket: format!("excl(item={item}, len={slot})"),
                })
            }
        }
    };
    Ok(DeltaEntry {
        value: with_item - without_item,
        n_last: last.len(),
        n_excl,
        flagged,
    })
}

/// Per-(item, slot) weights, row-major by item.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    n: usize,
    k: usize,
    entries: Vec<DeltaEntry>,
}

impl DeltaMatrix {
    /// A matrix with plain values and no support information; `rows[i][t]`
    /// is the weight of item `i` at slot `t`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if n == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("weight matrix must be a nonempty rectangle".into()));
        }
        let entries = rows
            .iter()
            .flatten()
            .map(|&value| DeltaEntry { value, n_last: 0, n_excl: 0, flagged: false })
            .collect();
        Ok(Self { n, k, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, item: ItemId, slot: usize) -> f64 {
        self.entry(item, slot).value
    }

    pub fn entry(&self, item: ItemId, slot: usize) -> &DeltaEntry {
        &self.entries[item * self.k + slot]
    }

    pub fn any_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(|c| c.iter().map(|e| e.value).collect()).collect()
    }

    /// CSV with columns `item,slot,delta_tilde,n_last_bucket,n_excl_bucket,flagged`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item,slot,delta_tilde,n_last_bucket,n_excl_bucket,flagged\n");
        for item in 0..self.n {
            for slot in 0..self.k {
                let e = self.entry(item, slot);
                let _ = writeln!(
                    out,
                    "{item},{slot},{},{},{},{}",
                    format_decimal(e.value),
                    e.n_last,
                    e.n_excl,
                    e.flagged
                );
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, usize, DeltaEntry)> = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: idx + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            let item = f[0].parse().map_err(|_| bad("bad item"))?;
            let slot = f[1].parse().map_err(|_| bad("bad slot"))?;
            let value = f[2].parse().map_err(|_| bad("bad delta_tilde"))?;
            let n_last = f[3].parse().map_err(|_| bad("bad n_last_bucket"))?;
            let n_excl = f[4].parse().map_err(|_| bad("bad n_excl_bucket"))?;
            let flagged = f[5].parse().map_err(|_| bad("bad flagged"))?;
            rows.push((item, slot, DeltaEntry { value, n_last, n_excl, flagged }));
        }
        let n = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let k = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if n == 0 || rows.len() != n * k {
            return Err(Error::Parse { line: 1, msg: "matrix is empty or incomplete".into() });
        }
        let mut entries: Vec<Option<DeltaEntry>> = vec![None; n * k];
        for (item, slot, e) in rows {
            let cell = &mut entries[item * k + slot];
            if cell.is_some() {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("duplicate entry for item {item}, slot {slot}"),
                });
            }
            *cell = Some(e);
        }
        Ok(Self { n, k, entries: entries.into_iter().map(|e| e.expect("all cells filled")).collect() })
    }
}

/// Estimates for every item and slot.
pub fn delta_tilde_matrix(bi: &BucketIndex, mode: EstimationMode) -> Result<DeltaMatrix> {
    let mut entries = Vec::with_capacity(bi.n * bi.k);
    for item in 0..bi.n {
        for slot in 0..bi.k {
            entries.push(delta_tilde(bi, item, slot, mode)?);
        }
    }
    Ok(DeltaMatrix { n: bi.n, k: bi.k, entries })
}

/// Mean utility of the length-`k` records. Lenient mode returns 0 when
/// there are none.
pub fn avg_full(bi: &BucketIndex, mode: EstimationMode) -> Result<f64> {
    match (mean(&bi.full), mode) {
        (Some(v), _) => Ok(v),
        (None, EstimationMode::Lenient) => Ok(0.0),
        (None, EstimationMode::Strict) => Err(Error::InsufficientSamples {
            bucket: format!("full(len={})", bi.k),
        }),
    }
}

/// `2 exp(-2 N eps^2 / width^2)`, Hoeffding's bound on
/// `P(|mean - E| >= eps)` for `N` samples with range `width`.
pub fn hoeffding_failure_bound(size: usize, epsilon: f64, width: f64) -> f64 {
    if size == 0 {
        return 2.0;
    }
    if width <= 0.0 {
        return 0.0;
    }
    2.0 * (-2.0 * size as f64 * epsilon * epsilon / (width * width)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketKind {
    Last,
    Excl,
    Full,
}

impl fmt::Display for BucketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BucketKind::Last => "last",
            BucketKind::Excl => "excl",
            BucketKind::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketBound {
    pub kind: BucketKind,
    /// `None` for the full bucket.
    pub item: Option<ItemId>,
    pub len: usize,
    pub size: usize,
    pub failure_bound: f64,
    /// No data: the bound is vacuous.
    pub empty: bool,
}

/// Hoeffding accounting for every bucket the estimator reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    /// Deviation `delta / (2 n^2)` each bucket mean is bounded against.
    pub epsilon: f64,
    /// Value range `[low, high]` used in the bound.
    pub range: (f64, f64),
    pub buckets: Vec<BucketBound>,
    pub min_bucket_size: usize,
    pub target: f64,
    /// Every bucket's failure bound is at most `target`.
    pub meets_target: bool,
}

/// Builds the report for deviation `delta / (2 n^2)` over the value range
/// `[floor, delta]`; `floor` is 0 unless observations carry additive noise.
pub fn concentration_report(
    bi: &BucketIndex,
    delta: f64,
    floor: f64,
    target: f64,
) -> ConcentrationReport {
    let n = bi.n as f64;
    let epsilon = delta / (2.0 * n * n);
    let width = delta - floor;
    let mut buckets = Vec::new();
    let mut push = |kind, item, len, size: usize| {
        buckets.push(BucketBound {
            kind,
            item,
            len,
            size,
            failure_bound: hoeffding_failure_bound(size, epsilon, width),
            empty: size == 0,
        });
    };
    for len in 1..=bi.k {
        for item in 0..bi.n {
            push(BucketKind::Last, Some(item), len, bi.last_bucket(item, len).len());
        }
    }
    for len in 1..bi.k {
        for item in 0..bi.n {
            push(BucketKind::Excl, Some(item), len, bi.excl_bucket(item, len).len());
        }
    }
    push(BucketKind::Full, None, bi.k, bi.full.len());

    let min_bucket_size = buckets.iter().map(|b| b.size).min().unwrap_or(0);
    let meets_target = buckets.iter().all(|b| b.failure_bound <= target);
    ConcentrationReport {
        epsilon,
        range: (floor, delta),
        buckets,
        min_bucket_size,
        target,
        meets_target,
    }
}

/// Smallest bucket behind any estimate or the full-length average.
pub fn min_bucket_size(bi: &BucketIndex) -> usize {
    concentration_report(bi, 1.0, 0.0, 1.0).min_bucket_size
}
