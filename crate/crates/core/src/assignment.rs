//! Exact maximum-weight assignment of items to positions.
//!
//! Every position `1..=k` receives exactly one item and every item is used
//! at most once. Weights may be negative; positions are never left empty.
//! Among optimal assignments the lexicographically smallest item list is
//! returned.

use crate::error::{Error, Result};
use crate::estimation::DeltaMatrix;
use crate::problem::{ItemId, Sequence};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `position_to_item[t]` fills position `t + 1`.
    pub position_to_item: Vec<ItemId>,
    pub total_weight: f64,
}

impl Assignment {
    /// Recomputes the total from `weights`, summing in position order.
    pub fn weight_under(&self, weights: &DeltaMatrix) -> f64 {
        self.position_to_item
            .iter()
            .enumerate()
            .map(|(slot, &item)| weights.get(item, slot))
            .sum()
    }

    pub fn from_sequence(seq: &Sequence, weights: &DeltaMatrix) -> Result<Self> {
        if seq.len() != weights.k() || seq.iter().any(|i| i >= weights.n()) {
            return Err(Error::InvalidSequence(format!(
                "sequence of length {} does not fit a {}x{} weight matrix",
                seq.len(),
                weights.n(),
                weights.k()
            )));
        }
        let mut a = Assignment { position_to_item: seq.as_slice().to_vec(), total_weight: 0.0 };
        a.total_weight = a.weight_under(weights);
        Ok(a)
    }
}

pub fn assignment_to_sequence(a: &Assignment) -> Sequence {
    Sequence::from_trusted(a.position_to_item.clone())
}

/// Minimum-cost assignment of every row to a distinct column for a
/// `rows x cols` matrix with `rows <= cols`, by shortest augmenting paths
/// with vertex potentials. Returns the column of each row.
fn hungarian_min(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    debug_assert!(rows <= cols);
    // 1-based; column 0 is the virtual source
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for row in 1..=rows {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] > 0 {
            col_of[owner[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Best total weight for `slots` using only `items`.
fn best_value(weights: &DeltaMatrix, slots: &[usize], items: &[ItemId]) -> f64 {
    if slots.is_empty() {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = slots
        .iter()
        .map(|&s| items.iter().map(|&i| -weights.get(i, s)).collect())
        .collect();
    hungarian_min(&cost, items.len())
        .into_iter()
        .zip(slots)
        .map(|(col, &s)| weights.get(items[col], s))
        .sum()
}

/// Solves the item-to-position problem exactly for a `n x k` weight matrix
/// (`weights.get(i, t)` is the weight of item `i` at position `t + 1`).
pub fn solve_assignment(weights: &DeltaMatrix) -> Result<Assignment> {
    let (n, k) = (weights.n(), weights.k());
    if k > n {
        return Err(Error::Infeasible { n, k });
    }
    let mut scale = 1.0f64;
    for item in 0..n {
        for slot in 0..k {
            let w = weights.get(item, slot);
            if !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "weight for item {item}, slot {slot} is not finite"
                )));
            }
            scale = scale.max(w.abs());
        }
    }
    let tol = 1e-10 * k as f64 * scale;

    let all_items: Vec<ItemId> = (0..n).collect();
    let all_slots: Vec<usize> = (0..k).collect();
    let optimum = best_value(weights, &all_slots, &all_items);

    // Fix positions left to right, taking the smallest item that still
    // admits an optimal completion.
    let mut chosen = Vec::with_capacity(k);
    let mut available = all_items;
    let mut partial = 0.0;
    for slot in 0..k {
        let rest_slots = &all_slots[slot + 1..];
        let mut pick = None;
        for (pos, &item) in available.iter().enumerate() {
            let mut rest_items = available.clone();
            rest_items.remove(pos);
            let value = partial + weights.get(item, slot) + best_value(weights, rest_slots, &rest_items);
            if value >= optimum - tol {
                pick = Some(pos);
                break;
            }
        }
        // the optimal assignment's own item always qualifies
        let pos = pick.expect("an optimal completion exists");
        let item = available.remove(pos);
        partial += weights.get(item, slot);
        chosen.push(item);
    }

    let mut a = Assignment { position_to_item: chosen, total_weight: 0.0 };
    a.total_weight = a.weight_under(weights);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive search over ordered k-tuples of distinct items; ties keep
    /// the lexicographically first.
    fn brute_force(weights: &DeltaMatrix) -> (Vec<usize>, f64) {
        fn rec(
            w: &DeltaMatrix,
            cur: &mut Vec<usize>,
            best: &mut Option<(Vec<usize>, f64)>,
        ) {
            if cur.len() == w.k() {
                let total: f64 = cur.iter().enumerate().map(|(s, &i)| w.get(i, s)).sum();
                if best.as_ref().is_none_or(|b| total > b.1) {
                    *best = Some((cur.clone(), total));
                }
                return;
            }
            for i in 0..w.n() {
                if !cur.contains(&i) {
                    cur.push(i);
                    rec(w, cur, best);
                    cur.pop();
                }
            }
        }
        let mut best = None;
        rec(weights, &mut Vec::new(), &mut best);
        best.unwrap()
    }

    #[test]
    fn modular_example() {
        let w = DeltaMatrix::from_rows(&[vec![6.0, 3.0], vec![4.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let a = solve_assignment(&w).unwrap();
        assert_eq!(a.position_to_item, vec![0, 1]);
        assert_eq!(a.total_weight, 8.0);
        assert_eq!(brute_force(&w).1, 8.0);
    }

    #[test]
    fn single_slot_is_argmax() {
        let w = DeltaMatrix::from_rows(&[vec![0.5], vec![2.5], vec![-1.0], vec![2.0]]).unwrap();
        assert_eq!(solve_assignment(&w).unwrap().position_to_item, vec![1]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let w = DeltaMatrix::from_rows(&vec![vec![1.5; 3]; 5]).unwrap();
        let a = solve_assignment(&w).unwrap();
        assert_eq!(a.position_to_item, vec![0, 1, 2]);
        assert_eq!(a.total_weight, 4.5);
    }

    #[test]
    fn negative_weights_still_fill_every_position() {
        let w = DeltaMatrix::from_rows(&[vec![-1.0, -5.0], vec![-2.0, -1.0], vec![-3.0, -3.0]]).unwrap();
        let a = solve_assignment(&w).unwrap();
        assert_eq!(a.position_to_item, vec![0, 1]);
        assert_eq!(a.total_weight, -2.0);
    }

    #[test]
    fn infeasible_and_nonfinite() {
        let w = DeltaMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(solve_assignment(&w), Err(Error::Infeasible { n: 1, k: 2 })));
        let w = DeltaMatrix::from_rows(&[vec![f64::NAN], vec![1.0]]).unwrap();
        assert!(solve_assignment(&w).is_err());
    }

    #[test]
    fn sequence_round_trip() {
        let w = DeltaMatrix::from_rows(&[vec![6.0, 3.0], vec![4.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let a = solve_assignment(&w).unwrap();
        let seq = assignment_to_sequence(&a);
        assert_eq!(seq.as_slice(), &[0, 1]);
        let back = Assignment::from_sequence(&seq, &w).unwrap();
        assert_eq!(back, a);
        assert_eq!(assignment_to_sequence(&back), seq);
    }

    #[test]
    fn matches_brute_force_and_is_shift_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 1..=3 {
            for n in k.max(2)..=6 {
                for _ in 0..100 {
                    let rows: Vec<Vec<f64>> = (0..n)
                        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect();
                    let w = DeltaMatrix::from_rows(&rows).unwrap();
                    let a = solve_assignment(&w).unwrap();
                    let (_, best) = brute_force(&w);
                    assert_eq!(a.total_weight, best);
                    let mut sorted = a.position_to_item.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    assert_eq!(sorted.len(), k);

                    let shift = 0.75;
                    let shifted: Vec<Vec<f64>> =
                        rows.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
                    let ws = DeltaMatrix::from_rows(&shifted).unwrap();
                    let (_, best_shifted) = brute_force(&ws);
                    let ours = a.weight_under(&ws);
                    assert!((ours - best_shifted).abs() < 1e-12);
                    assert!((best_shifted - best - k as f64 * shift).abs() < 1e-12);
                }
            }
        }
    }
}
