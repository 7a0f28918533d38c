//! Items, sequences, set functions, and the prefix-sum sequence objective.
//!
//! A sequence `pi` of distinct items is scored as
//! `F(pi) = sum_{j=1..k} f_j(pi[..min(j, |pi|)])`: function `f_j` sees the
//! first `j` items, and when the sequence is shorter than `j` it sees all of
//! them. For `|pi| = k` this is the plain prefix sum.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functions::InstanceRecord;

/// Dense item identifier in `0..n`.
pub type ItemId = usize;

/// The ground set `{0, .., n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundSet {
    n: usize,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ground set must be nonempty".into()));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn items(&self) -> std::ops::Range<ItemId> {
        0..self.n
    }

    pub fn contains(&self, item: ItemId) -> bool {
        item < self.n
    }
}

/// An ordered list of distinct items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Sequence(Vec<ItemId>);

impl Sequence {
    /// Builds a sequence over a ground set of `n` items, rejecting duplicates
    /// and out-of-range ids.
    pub fn new(items: Vec<ItemId>, n: usize) -> Result<Self> {
        check_distinct(&items, n)?;
        Ok(Self(items))
    }

    /// Wraps items the caller has already validated.
    pub(crate) fn from_trusted(items: Vec<ItemId>) -> Self {
        debug_assert!(check_distinct(&items, usize::MAX).is_ok());
        Self(items)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First `min(t, len)` items.
    pub fn prefix(&self, t: usize) -> &[ItemId] {
        &self.0[..t.min(self.0.len())]
    }

    pub fn last(&self) -> Option<ItemId> {
        self.0.last().copied()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.0.contains(&item)
    }

    pub fn as_slice(&self) -> &[ItemId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<ItemId> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for item in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{item}")?;
            first = false;
        }
        Ok(())
    }
}

impl AsRef<[ItemId]> for Sequence {
    fn as_ref(&self) -> &[ItemId] {
        &self.0
    }
}

fn check_distinct(items: &[ItemId], n: usize) -> Result<()> {
    for (pos, &item) in items.iter().enumerate() {
        if item >= n {
            return Err(Error::InvalidSequence(format!(
                "item {item} out of range for ground set of size {n}"
            )));
        }
        if items[..pos].contains(&item) {
            return Err(Error::InvalidSequence(format!("item {item} appears twice")));
        }
    }
    Ok(())
}

/// A nonnegative set function over item ids.
///
/// Sets are passed as slices of distinct ids; order within the slice carries
/// no meaning. Implementations must return 0 for the empty set. The families
/// in [`crate::functions`] are also monotone and submodular, which the
/// oracle can verify by enumeration for small ground sets.
pub trait SetFunction: Send + Sync + fmt::Debug {
    fn eval(&self, items: &[ItemId]) -> f64;
}

impl<F: SetFunction + ?Sized> SetFunction for Arc<F> {
    fn eval(&self, items: &[ItemId]) -> f64 {
        (**self).eval(items)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for &F {
    fn eval(&self, items: &[ItemId]) -> f64 {
        (**self).eval(items)
    }
}

/// Marginal gain `f(S + i) - f(S)`. Fails if `i` is already in `S`.
pub fn marginal<F: SetFunction + ?Sized>(f: &F, item: ItemId, set: &[ItemId]) -> Result<f64> {
    if set.contains(&item) {
        return Err(Error::Precondition(format!(
            "item {item} is already in the base set"
        )));
    }
    Ok(marginal_unchecked(f, item, set))
}

pub(crate) fn marginal_unchecked<F: SetFunction + ?Sized>(
    f: &F,
    item: ItemId,
    set: &[ItemId],
) -> f64 {
    let mut with = Vec::with_capacity(set.len() + 1);
    with.extend_from_slice(set);
    with.push(item);
    f.eval(&with) - f.eval(set)
}

/// A problem instance: `k` set functions over `n` items.
#[derive(Debug, Clone)]
pub struct Instance {
    ground: GroundSet,
    functions: Vec<Arc<dyn SetFunction>>,
    curvature_hint: Option<f64>,
    bernoulli_compatible: bool,
    record: Option<InstanceRecord>,
}

impl Instance {
    /// `functions[j]` is applied to the first `j + 1` items.
    pub fn new(n: usize, functions: Vec<Arc<dyn SetFunction>>) -> Result<Self> {
        let ground = GroundSet::new(n)?;
        let k = functions.len();
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if k > n {
            return Err(Error::InvalidParameter(format!(
                "k = {k} exceeds n = {n}"
            )));
        }
        Ok(Self {
            ground,
            functions,
            curvature_hint: None,
            bernoulli_compatible: false,
            record: None,
        })
    }

    pub fn with_curvature_hint(mut self, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!(
                "curvature {c} outside [0, 1]"
            )));
        }
        self.curvature_hint = Some(c);
        Ok(self)
    }

    /// Marks every sequence value as lying in `[0, 1]`, which permits
    /// Bernoulli observations.
    pub fn with_bernoulli_compatible(mut self, flag: bool) -> Self {
        self.bernoulli_compatible = flag;
        self
    }

    pub(crate) fn with_record(mut self, record: InstanceRecord) -> Self {
        self.record = Some(record);
        self
    }

    pub fn n(&self) -> usize {
        self.ground.len()
    }

    pub fn k(&self) -> usize {
        self.functions.len()
    }

    pub fn ground(&self) -> GroundSet {
        self.ground
    }

    pub fn functions(&self) -> &[Arc<dyn SetFunction>] {
        &self.functions
    }

    /// `f_j` for `j` in `1..=k`.
    pub fn function(&self, j: usize) -> &dyn SetFunction {
        self.functions[j - 1].as_ref()
    }

    pub fn curvature_hint(&self) -> Option<f64> {
        self.curvature_hint
    }

    pub fn bernoulli_compatible(&self) -> bool {
        self.bernoulli_compatible
    }

    /// The generator record this instance was built from, if any.
    pub fn record(&self) -> Option<&InstanceRecord> {
        self.record.as_ref()
    }

    /// `F(pi)`, with validation of distinctness, range and length.
    pub fn evaluate(&self, pi: &[ItemId]) -> Result<f64> {
        check_distinct(pi, self.n())?;
        if pi.len() > self.k() {
            return Err(Error::InvalidSequence(format!(
                "length {} exceeds k = {}",
                pi.len(),
                self.k()
            )));
        }
        Ok(self.evaluate_unchecked(pi))
    }

    pub(crate) fn evaluate_unchecked(&self, pi: &[ItemId]) -> f64 {
        if pi.is_empty() {
            return 0.0;
        }
        self.functions
            .iter()
            .enumerate()
            .map(|(j, f)| f.eval(&pi[..(j + 1).min(pi.len())]))
            .sum()
    }

    /// `sum_j f_j(Omega)`, an upper bound on `F` for monotone functions.
    pub fn value_upper_bound(&self) -> f64 {
        let all: Vec<ItemId> = self.ground.items().collect();
        self.functions.iter().map(|f| f.eval(&all)).sum()
    }
}
