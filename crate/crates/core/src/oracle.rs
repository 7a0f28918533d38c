//! Exhaustive ground truth for small instances.
//!
//! Everything here enumerates exactly and refuses instances past an explicit
//! size limit; nothing is approximated by sampling.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::algorithm::compute_alpha;
use crate::error::{Error, Result};
use crate::problem::{marginal_unchecked, Instance, ItemId, Sequence, SetFunction};

/// Largest number of ordered sequences any enumeration may visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

pub const CURVATURE_SNAP: f64 = 1e-12;

/// Largest ground set for subset enumeration (curvature, inequality checks).
pub const SUBSET_MAX_N: usize = 10;

/// `n! / (n - k)!`, saturating.
pub fn count_ordered(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, j| acc.saturating_mul((n - j) as u128))
}

fn guard_ordered(what: &str, n: usize, k: usize) -> Result<()> {
    let size = count_ordered(n, k);
    if size > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { what: what.into(), size, limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

fn guard_subsets(what: &str, n: usize) -> Result<()> {
    if n > SUBSET_MAX_N {
        return Err(Error::TooLarge {
            what: what.into(),
            size: 1u128 << n.min(127),
            limit: 1u128 << SUBSET_MAX_N,
        });
    }
    Ok(())
}

/// Calls `visit` on every ordered `len`-sequence of distinct items from
/// `pool`, in lexicographic order of pool positions.
pub fn for_each_ordered(pool: &[ItemId], len: usize, mut visit: impl FnMut(&[ItemId])) {
    fn go(
        pool: &[ItemId],
        len: usize,
        used: &mut [bool],
        cur: &mut Vec<ItemId>,
        visit: &mut dyn FnMut(&[ItemId]),
    ) {
        if cur.len() == len {
            visit(cur);
            return;
        }
        for p in 0..pool.len() {
            if !used[p] {
                used[p] = true;
                cur.push(pool[p]);
                go(pool, len, used, cur, visit);
                cur.pop();
                used[p] = false;
            }
        }
    }
    if len > pool.len() {
        return;
    }
    let mut used = vec![false; pool.len()];
    go(pool, len, &mut used, &mut Vec::with_capacity(len), &mut visit);
}

/// Calls `visit` on every `size`-subset of `pool`.
pub fn for_each_subset(pool: &[ItemId], size: usize, mut visit: impl FnMut(&[ItemId])) {
    fn go(
        pool: &[ItemId],
        start: usize,
        size: usize,
        cur: &mut Vec<ItemId>,
        visit: &mut dyn FnMut(&[ItemId]),
    ) {
        if cur.len() == size {
            visit(cur);
            return;
        }
        let need = size - cur.len();
        for p in start..=pool.len() - need {
            cur.push(pool[p]);
            go(pool, p + 1, size, cur, visit);
            cur.pop();
        }
    }
    if size > pool.len() {
        return;
    }
    go(pool, 0, size, &mut Vec::with_capacity(size), &mut visit);
}

fn mean_over_ordered(pool: &[ItemId], len: usize, mut value: impl FnMut(&[ItemId]) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for_each_ordered(pool, len, |s| {
        sum += value(s);
        count += 1;
    });
    sum / count as f64
}

fn mean_over_subsets(pool: &[ItemId], size: usize, mut value: impl FnMut(&[ItemId]) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for_each_subset(pool, size, |s| {
        sum += value(s);
        count += 1;
    });
    sum / count as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimum_sequence: Sequence,
    pub optimum_value: f64,
}

/// Best length-`k` sequence; ties go to the lexicographically smallest.
pub fn brute_force_optimal(inst: &Instance) -> Result<OracleResult> {
    let (n, k) = (inst.n(), inst.k());
    guard_ordered("optimal sequence", n, k)?;
    let pool: Vec<ItemId> = (0..n).collect();
    let mut best: Option<(Vec<ItemId>, f64)> = None;
    for_each_ordered(&pool, k, |s| {
        let v = inst.evaluate_unchecked(s);
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((s.to_vec(), v));
        }
    });
    let (seq, value) = best.expect("k <= n so at least one sequence exists");
    Ok(OracleResult { optimum_sequence: Sequence::from_trusted(seq), optimum_value: value })
}

fn check_item_slot(inst: &Instance, item: ItemId, slot: usize) -> Result<()> {
    if item >= inst.n() || slot >= inst.k() {
        return Err(Error::InvalidParameter(format!(
            "item {item}, slot {slot} out of range for n = {}, k = {}",
            inst.n(),
            inst.k()
        )));
    }
    Ok(())
}

/// Expected gain of appending `item` to a uniformly random length-`slot`
/// sequence avoiding it: `E[F(random t-seq + item)] - E[F(random t-seq)]`,
/// each expectation enumerated separately.
pub fn exact_delta(inst: &Instance, item: ItemId, slot: usize) -> Result<f64> {
    check_item_slot(inst, item, slot)?;
    guard_ordered("exact delta", inst.n() - 1, slot)?;
    let pool: Vec<ItemId> = (0..inst.n()).filter(|&i| i != item).collect();
    let with_item = mean_over_ordered(&pool, slot, |s| {
        let mut ext = s.to_vec();
        ext.push(item);
        inst.evaluate_unchecked(&ext)
    });
    let without = mean_over_ordered(&pool, slot, |s| inst.evaluate_unchecked(s));
    Ok(with_item - without)
}

/// The same quantity as [`exact_delta`] through the telescoped form
/// `sum_{j > slot} E_R[f_j(item | R)]`, with `R` a uniformly random
/// `slot`-subset avoiding `item`.
pub fn exact_delta_marginal_form(inst: &Instance, item: ItemId, slot: usize) -> Result<f64> {
    check_item_slot(inst, item, slot)?;
    guard_ordered("exact delta", inst.n() - 1, slot)?;
    let pool: Vec<ItemId> = (0..inst.n()).filter(|&i| i != item).collect();
    Ok((slot + 1..=inst.k())
        .map(|j| {
            let f = inst.function(j);
            mean_over_subsets(&pool, slot, |r| marginal_unchecked(f, item, r))
        })
        .sum())
}

/// Mean of `F` over all ordered length-`k` sequences from `pool`
/// (all items when `None`).
pub fn exact_expected_value(inst: &Instance, pool: Option<&[ItemId]>) -> Result<f64> {
    let all: Vec<ItemId>;
    let pool = match pool {
        Some(p) => {
            Sequence::new(p.to_vec(), inst.n())?;
            p
        }
        None => {
            all = (0..inst.n()).collect();
            &all
        }
    };
    if pool.len() < inst.k() {
        return Err(Error::InvalidParameter(format!(
            "pool of {} items cannot fill k = {}",
            pool.len(),
            inst.k()
        )));
    }
    guard_ordered("expected value", pool.len(), inst.k())?;
    Ok(mean_over_ordered(pool, inst.k(), |s| inst.evaluate_unchecked(s)))
}

/// Smallest `c` with `f(i | S) >= (1 - c) f({i})` for all `S` and `i` not in
/// `S`. Pairs with `f({i}) = 0` impose nothing and are skipped. Results
/// within [`CURVATURE_SNAP`] of 0 or 1 are snapped to the endpoint, since
/// `f(S + i) - f(S)` carries rounding error.
pub fn measure_curvature<F: SetFunction + ?Sized>(f: &F, n: usize) -> Result<f64> {
    guard_subsets("curvature", n)?;
    let singles: Vec<f64> = (0..n).map(|i| f.eval(&[i])).collect();
    let mut worst = 1.0f64;
    let mut set = Vec::with_capacity(n);
    for mask in 0u32..(1 << n) {
        set.clear();
        set.extend((0..n).filter(|&i| mask >> i & 1 == 1));
        let base = f.eval(&set);
        for (i, &single) in singles.iter().enumerate() {
            if mask >> i & 1 == 1 || single <= 0.0 {
                continue;
            }
            set.push(i);
            let gain = f.eval(&set) - base;
            set.pop();
            worst = worst.min(gain / single);
        }
    }
    let c = (1.0 - worst).clamp(0.0, 1.0);
    Ok(if c < CURVATURE_SNAP {
        0.0
    } else if c > 1.0 - CURVATURE_SNAP {
        1.0
    } else {
        c
    })
}

/// Largest per-function curvature, which is a valid common curvature for
/// every `f_t`.
pub fn instance_curvature(inst: &Instance) -> Result<f64> {
    inst.functions()
        .iter()
        .map(|f| measure_curvature(f.as_ref(), inst.n()))
        .try_fold(0.0f64, |acc, c| c.map(|c| acc.max(c)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionChecks {
    pub normalized: bool,
    pub monotone: bool,
    pub submodular: bool,
}

/// Exhaustive check of `f(empty) = 0`, monotonicity and submodularity, with
/// absolute tolerance `tol`.
pub fn check_function<F: SetFunction + ?Sized>(f: &F, n: usize, tol: f64) -> Result<FunctionChecks> {
    guard_subsets("function checks", n)?;
    let size = 1usize << n;
    let values: Vec<f64> = (0..size)
        .map(|mask| {
            let set: Vec<ItemId> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            f.eval(&set)
        })
        .collect();
    let mut out = FunctionChecks { normalized: values[0].abs() <= tol, monotone: true, submodular: true };
    for mask in 0..size {
        for i in (0..n).filter(|&i| mask >> i & 1 == 0) {
            let gain = values[mask | 1 << i] - values[mask];
            if gain < -tol {
                out.monotone = false;
            }
            // f(i | X) >= f(i | X + j) covers every X subset of Y by chaining
            for j in (0..n).filter(|&j| j != i && mask >> j & 1 == 0) {
                let bigger = mask | 1 << j;
                let gain_bigger = values[bigger | 1 << i] - values[bigger];
                if gain + tol < gain_bigger {
                    out.submodular = false;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureGainCheck {
    pub curvature: f64,
    /// `E_R[f(R | S)]`.
    pub lhs: f64,
    /// `(1 - c) E_R[f(R)]`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Slack allowed in exact inequality checks.
pub const EXACT_SLACK: f64 = 1e-12;

/// Checks `E_R[f(R | S)] >= (1 - c) E_R[f(R)]` for `R` uniform over
/// `t`-subsets of the complement of `S`, with `c` the measured curvature.
pub fn check_curvature_gain<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
    set: &[ItemId],
    t: usize,
) -> Result<CurvatureGainCheck> {
    Sequence::new(set.to_vec(), n)?;
    if t > n - set.len() {
        return Err(Error::Precondition(format!(
            "t = {t} exceeds the {} items outside S",
            n - set.len()
        )));
    }
    let curvature = measure_curvature(f, n)?;
    let pool: Vec<ItemId> = (0..n).filter(|i| !set.contains(i)).collect();
    let base = f.eval(set);
    let lhs = mean_over_subsets(&pool, t, |r| {
        let mut union = set.to_vec();
        union.extend_from_slice(r);
        f.eval(&union) - base
    });
    let rhs = (1.0 - curvature) * mean_over_subsets(&pool, t, |r| f.eval(r));
    let slack = lhs - rhs;
    Ok(CurvatureGainCheck { curvature, lhs, rhs, slack, holds: slack >= -EXACT_SLACK })
}

/// `sum_t f_t(pi[..t] + other[..t])`: both sequences placed side by side.
pub fn virtual_union_value(inst: &Instance, pi: &[ItemId], other: &[ItemId]) -> f64 {
    let mut union = Vec::with_capacity(pi.len() + other.len());
    (1..=inst.k())
        .map(|t| {
            union.clear();
            union.extend_from_slice(&pi[..t.min(pi.len())]);
            for &i in &other[..t.min(other.len())] {
                if !union.contains(&i) {
                    union.push(i);
                }
            }
            inst.function(t).eval(&union)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AvoidanceCheck {
    Checked {
        optimum: Sequence,
        alpha: f64,
        /// `sum_t Delta(e*_{t+1}, t)`.
        lhs: f64,
        /// `alpha E[F(P u opt) - F(P)]`, `P` uniform over length-`k`
        /// sequences avoiding the optimum.
        rhs: f64,
        holds: bool,
    },
    /// Fewer than `k` items remain outside the optimum.
    Skipped { reason: String },
}

/// Checks the avoidance inequality linking the exact deltas along the
/// optimum to sequences drawn outside it.
pub fn check_avoidance(inst: &Instance) -> Result<AvoidanceCheck> {
    let (n, k) = (inst.n(), inst.k());
    if n < 2 * k {
        return Ok(AvoidanceCheck::Skipped {
            reason: format!("n = {n} < 2k = {}: no length-k sequence avoids the optimum", 2 * k),
        });
    }
    let opt = brute_force_optimal(inst)?;
    let star = opt.optimum_sequence.as_slice();
    let lhs = star
        .iter()
        .enumerate()
        .map(|(slot, &item)| exact_delta(inst, item, slot))
        .sum::<Result<f64>>()?;
    let alpha = compute_alpha(n, k)?;
    let pool: Vec<ItemId> = (0..n).filter(|i| !star.contains(i)).collect();
    guard_ordered("avoidance expectation", pool.len(), k)?;
    let gap = mean_over_ordered(&pool, k, |p| {
        virtual_union_value(inst, p, star) - inst.evaluate_unchecked(p)
    });
    let rhs = alpha * gap;
    Ok(AvoidanceCheck::Checked {
        optimum: opt.optimum_sequence,
        alpha,
        lhs,
        rhs,
        holds: lhs - rhs >= -EXACT_SLACK,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Query {
    Optimum,
    Delta(ItemId, usize),
    Expected(Option<Vec<ItemId>>),
}

/// Caches oracle answers for one instance.
#[derive(Debug)]
pub struct Oracle<'a> {
    inst: &'a Instance,
    optimum: Mutex<Option<OracleResult>>,
    values: Mutex<HashMap<Query, f64>>,
}

impl<'a> Oracle<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        Self { inst, optimum: Mutex::new(None), values: Mutex::new(HashMap::new()) }
    }

    pub fn instance(&self) -> &Instance {
        self.inst
    }

    pub fn optimum(&self) -> Result<OracleResult> {
        let mut slot = self.optimum.lock().expect("oracle cache poisoned");
        if let Some(r) = slot.as_ref() {
            return Ok(r.clone());
        }
        let r = brute_force_optimal(self.inst)?;
        self.values.lock().expect("oracle cache poisoned").insert(Query::Optimum, r.optimum_value);
        *slot = Some(r.clone());
        Ok(r)
    }

    pub fn delta(&self, item: ItemId, slot: usize) -> Result<f64> {
        self.cached(Query::Delta(item, slot), || exact_delta(self.inst, item, slot))
    }

    pub fn expected_value(&self, pool: Option<&[ItemId]>) -> Result<f64> {
        self.cached(Query::Expected(pool.map(<[ItemId]>::to_vec)), || {
            exact_expected_value(self.inst, pool)
        })
    }

    /// All exact deltas, `rows[item][slot]`.
    pub fn delta_table(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.inst.n())
            .map(|i| (0..self.inst.k()).map(|t| self.delta(i, t)).collect())
            .collect()
    }

    fn cached(&self, query: Query, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(&v) = self.values.lock().expect("oracle cache poisoned").get(&query) {
            return Ok(v);
        }
        let v = compute()?;
        self.values.lock().expect("oracle cache poisoned").insert(query, v);
        Ok(v)
    }
}
