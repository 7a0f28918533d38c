//! Monotone submodular function families and seeded instance generators.
//!
//! Every generated instance carries the [`InstanceRecord`] it was built
//! from. The record is a small TOML document; rebuilding from it yields the
//! same instance.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Instance, ItemId, SetFunction};

/// Tolerance applied when checking that patience scales sum to at most one.
const SCALE_SUM_SLACK: f64 = 1e-12;

fn check_weight(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{what} must be finite and nonnegative, got {value}"
        )));
    }
    Ok(())
}

/// `f(S) = sum_{i in S} w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularFunction {
    weights: Vec<f64>,
}

impl ModularFunction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for &w in &weights {
            check_weight(w, "modular weight")?;
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SetFunction for ModularFunction {
    fn eval(&self, items: &[ItemId]) -> f64 {
        items.iter().map(|&i| self.weights[i]).sum()
    }
}

/// Total weight of universe elements covered by the union of the items'
/// cover sets.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoverageFunction {
    universe_weights: Vec<f64>,
    // one bitset per item, `words` u64 words each
    covers: Vec<Vec<u64>>,
    words: usize,
}

impl WeightedCoverageFunction {
    /// `cover_sets[i]` lists the universe elements item `i` covers.
    pub fn new(universe_weights: Vec<f64>, cover_sets: Vec<Vec<usize>>) -> Result<Self> {
        for &w in &universe_weights {
            check_weight(w, "element weight")?;
        }
        let words = universe_weights.len().div_ceil(64).max(1);
        let mut covers = Vec::with_capacity(cover_sets.len());
        for (item, set) in cover_sets.iter().enumerate() {
            let mut bits = vec![0u64; words];
            for &e in set {
                if e >= universe_weights.len() {
                    return Err(Error::InvalidParameter(format!(
                        "item {item} covers element {e} outside a universe of {}",
                        universe_weights.len()
                    )));
                }
                bits[e / 64] |= 1 << (e % 64);
            }
            covers.push(bits);
        }
        Ok(Self {
            universe_weights,
            covers,
            words,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_weights.len()
    }

    /// Elements covered by `item`, ascending.
    pub fn cover_set(&self, item: ItemId) -> Vec<usize> {
        (0..self.universe_weights.len())
            .filter(|&e| self.covers[item][e / 64] >> (e % 64) & 1 == 1)
            .collect()
    }
}

impl SetFunction for WeightedCoverageFunction {
    fn eval(&self, items: &[ItemId]) -> f64 {
        let mut union = [0u64; 4];
        let mut heap;
        let acc: &mut [u64] = if self.words <= union.len() {
            &mut union[..self.words]
        } else {
            heap = vec![0u64; self.words];
            &mut heap
        };
        for &i in items {
            for (a, c) in acc.iter_mut().zip(&self.covers[i]) {
                *a |= c;
            }
        }
        let mut total = 0.0;
        for (w, &word) in acc.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let e = w * 64 + bits.trailing_zeros() as usize;
                total += self.universe_weights[e];
                bits &= bits - 1;
            }
        }
        total
    }
}

/// `f(S) = sum_clients max_{i in S} affinity[client][i]`, zero on the empty set.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilityLocationFunction {
    affinity: Vec<Vec<f64>>,
}

impl FacilityLocationFunction {
    /// Rows are clients, columns are items.
    pub fn new(affinity: Vec<Vec<f64>>) -> Result<Self> {
        let width = affinity.first().map_or(0, Vec::len);
        for row in &affinity {
            if row.len() != width {
                return Err(Error::InvalidParameter("ragged affinity matrix".into()));
            }
            for &a in row {
                check_weight(a, "affinity")?;
            }
        }
        Ok(Self { affinity })
    }
}

impl SetFunction for FacilityLocationFunction {
    fn eval(&self, items: &[ItemId]) -> f64 {
        if items.is_empty() {
            return 0.0;
        }
        self.affinity
            .iter()
            .map(|row| items.iter().map(|&i| row[i]).fold(0.0, f64::max))
            .sum()
    }
}

/// `q * g` for a nonnegative scale `q`.
#[derive(Debug, Clone)]
pub struct ScaledFunction {
    scale: f64,
    base: Arc<dyn SetFunction>,
}

impl ScaledFunction {
    pub fn new(scale: f64, base: Arc<dyn SetFunction>) -> Result<Self> {
        check_weight(scale, "scale")?;
        Ok(Self { scale, base })
    }
}

impl SetFunction for ScaledFunction {
    fn eval(&self, items: &[ItemId]) -> f64 {
        self.scale * self.base.eval(items)
    }
}

/// Family tag plus family-specific generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// All `k` functions share one modular function. Weights are given
    /// explicitly or drawn uniformly from `[low, high)`.
    Modular {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default = "default_low")]
        low: f64,
        #[serde(default = "default_high")]
        high: f64,
    },
    /// `k` independent coverage functions over `universe` elements with
    /// element weights uniform in `[0, 1)`.
    Coverage { universe: usize, density: f64 },
    /// `k` independent facility-location functions with affinities uniform
    /// in `[0, 1)`.
    Facility { clients: usize },
    /// `f_t = q_t * g` where `g` is the first function of `base`, normalized
    /// so that `g(Omega) = 1`.
    PatienceScaled { scales: Vec<f64>, base: Box<Family> },
}

fn default_low() -> f64 {
    0.0
}

fn default_high() -> f64 {
    1.0
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Modular { .. } => "modular",
            Family::Coverage { .. } => "coverage",
            Family::Facility { .. } => "facility",
            Family::PatienceScaled { .. } => "patience-scaled",
        }
    }
}

/// Everything needed to regenerate an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub family: Family,
}

impl InstanceRecord {
    pub fn build(&self) -> Result<Instance> {
        let inst = match &self.family {
            Family::Modular { weights, low, high } => {
                modular_functions(self.n, self.k, weights.as_deref(), *low, *high, self.seed)
                    .and_then(|fs| Instance::new(self.n, fs))
                    .and_then(|inst| inst.with_curvature_hint(0.0))?
            }
            Family::Coverage { universe, density } => {
                let fs = coverage_functions(self.n, self.k, *universe, *density, self.seed)?;
                Instance::new(self.n, fs)?
            }
            Family::Facility { clients } => {
                let fs = facility_functions(self.n, self.k, *clients, self.seed)?;
                Instance::new(self.n, fs)?
            }
            Family::PatienceScaled { scales, base } => {
                patience_scaled(self.n, self.k, base, scales, self.seed)?
            }
        };
        Ok(inst.with_record(self.clone()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance record serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad instance record: {e}")))
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    Ok(())
}

fn modular_functions(
    n: usize,
    k: usize,
    weights: Option<&[f64]>,
    low: f64,
    high: f64,
    seed: u64,
) -> Result<Vec<Arc<dyn SetFunction>>> {
    check_nk(n, k)?;
    let weights = match weights {
        Some(w) if w.len() != n => {
            return Err(Error::InvalidParameter(format!(
                "{} weights supplied for n = {n}",
                w.len()
            )))
        }
        Some(w) => w.to_vec(),
        None => {
            check_weight(low, "low")?;
            check_weight(high, "high")?;
            if high < low {
                return Err(Error::InvalidParameter(format!("empty weight range [{low}, {high})")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| uniform(&mut rng, low, high)).collect()
        }
    };
    let f: Arc<dyn SetFunction> = Arc::new(ModularFunction::new(weights)?);
    Ok(vec![f; k])
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    if high > low {
        rng.random_range(low..high)
    } else {
        low
    }
}

fn coverage_functions(
    n: usize,
    k: usize,
    universe: usize,
    density: f64,
    seed: u64,
) -> Result<Vec<Arc<dyn SetFunction>>> {
    check_nk(n, k)?;
    if universe == 0 {
        return Err(Error::InvalidParameter("universe must be nonempty".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density {density} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let weights: Vec<f64> = (0..universe).map(|_| rng.random::<f64>()).collect();
            let covers: Vec<Vec<usize>> = (0..n)
                .map(|_| (0..universe).filter(|_| rng.random_bool(density)).collect())
                .collect();
            Ok(Arc::new(WeightedCoverageFunction::new(weights, covers)?) as Arc<dyn SetFunction>)
        })
        .collect()
}

fn facility_functions(
    n: usize,
    k: usize,
    clients: usize,
    seed: u64,
) -> Result<Vec<Arc<dyn SetFunction>>> {
    check_nk(n, k)?;
    if clients == 0 {
        return Err(Error::InvalidParameter("need at least one client".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let affinity: Vec<Vec<f64>> = (0..clients)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect();
            Ok(Arc::new(FacilityLocationFunction::new(affinity)?) as Arc<dyn SetFunction>)
        })
        .collect()
}

fn patience_scaled(
    n: usize,
    k: usize,
    base: &Family,
    scales: &[f64],
    seed: u64,
) -> Result<Instance> {
    check_nk(n, k)?;
    if matches!(base, Family::PatienceScaled { .. }) {
        return Err(Error::InvalidParameter("patience-scaled base cannot itself be scaled".into()));
    }
    let base_inst = InstanceRecord {
        n,
        k: 1,
        seed,
        family: base.clone(),
    }
    .build()?;
    let g = base_inst.functions()[0].clone();
    make_patience_scaled_instance(n, g, scales, base_inst.curvature_hint())
}

/// Builds `f_t = q_t * g / g(Omega)` for `t = 1..=k`, where `k = scales.len()`.
///
/// Normalizing by `g(Omega)` puts every value of the base in `[0, 1]`, so with
/// `sum q_t <= 1` every sequence value lies in `[0, 1]` and the instance is
/// flagged Bernoulli-compatible.
pub fn make_patience_scaled_instance(
    n: usize,
    base: Arc<dyn SetFunction>,
    scales: &[f64],
    curvature_hint: Option<f64>,
) -> Result<Instance> {
    check_nk(n, scales.len())?;
    for &q in scales {
        check_weight(q, "scale")?;
    }
    let sum: f64 = scales.iter().sum();
    if sum > 1.0 + SCALE_SUM_SLACK {
        return Err(Error::Normalization { sum });
    }
    let all: Vec<ItemId> = (0..n).collect();
    let top = base.eval(&all);
    let norm = if top > 0.0 { 1.0 / top } else { 0.0 };
    let functions = scales
        .iter()
        .map(|&q| Ok(Arc::new(ScaledFunction::new(q * norm, base.clone())?) as Arc<dyn SetFunction>))
        .collect::<Result<Vec<_>>>()?;
    let inst = Instance::new(n, functions)?.with_bernoulli_compatible(true);
    match curvature_hint {
        Some(c) => inst.with_curvature_hint(c),
        None => Ok(inst),
    }
}

/// Modular instance whose `k` functions share weights drawn uniformly from
/// `[low, high)`.
pub fn make_modular_instance(n: usize, k: usize, low: f64, high: f64, seed: u64) -> Result<Instance> {
    InstanceRecord {
        n,
        k,
        seed,
        family: Family::Modular { weights: None, low, high },
    }
    .build()
}

/// Modular instance with explicit weights, one per item.
pub fn make_modular_instance_with_weights(weights: Vec<f64>, k: usize) -> Result<Instance> {
    InstanceRecord {
        n: weights.len(),
        k,
        seed: 0,
        family: Family::Modular { weights: Some(weights), low: 0.0, high: 1.0 },
    }
    .build()
}

pub fn make_coverage_instance(
    n: usize,
    k: usize,
    universe: usize,
    density: f64,
    seed: u64,
) -> Result<Instance> {
    InstanceRecord {
        n,
        k,
        seed,
        family: Family::Coverage { universe, density },
    }
    .build()
}

pub fn make_facility_instance(n: usize, k: usize, clients: usize, seed: u64) -> Result<Instance> {
    InstanceRecord {
        n,
        k,
        seed,
        family: Family::Facility { clients },
    }
    .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_generator_examples() {
        let inst = make_modular_instance_with_weights(vec![3.0, 2.0, 1.0], 2).unwrap();
        assert_eq!(inst.evaluate(&[0, 1]).unwrap(), 8.0);
        assert_eq!(inst.curvature_hint(), Some(0.0));

        let single = make_modular_instance_with_weights(vec![5.0], 1).unwrap();
        assert_eq!(single.evaluate(&[0]).unwrap(), 5.0);

        assert!(make_modular_instance(3, 4, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = make_modular_instance(6, 3, 0.0, 1.0, 17).unwrap();
        let b = make_modular_instance(6, 3, 0.0, 1.0, 17).unwrap();
        for s in [[0usize, 1, 2], [5, 3, 1], [2, 4, 0]] {
            assert_eq!(a.evaluate(&s).unwrap(), b.evaluate(&s).unwrap());
        }
        assert_eq!(a.record().unwrap().to_toml(), b.record().unwrap().to_toml());

        let c1 = make_coverage_instance(4, 2, 3, 0.5, 9).unwrap();
        let c2 = make_coverage_instance(4, 2, 3, 0.5, 9).unwrap();
        assert_eq!(format!("{:?}", c1.functions()), format!("{:?}", c2.functions()));
    }

    #[test]
    fn full_density_coverage_saturates_on_singletons() {
        let inst = make_coverage_instance(4, 2, 5, 1.0, 3).unwrap();
        for f in inst.functions() {
            let all = f.eval(&[0, 1, 2, 3]);
            for i in 0..4 {
                assert_eq!(f.eval(&[i]), all);
            }
        }
    }

    #[test]
    fn coverage_rejects_bad_density() {
        assert!(make_coverage_instance(4, 2, 3, 0.0, 1).is_err());
        assert!(make_coverage_instance(4, 2, 3, 1.5, 1).is_err());
    }

    #[test]
    fn coverage_eval_handles_wide_universe() {
        let weights = vec![1.0; 300];
        let f = WeightedCoverageFunction::new(weights, vec![(0..200).collect(), (100..300).collect()])
            .unwrap();
        assert_eq!(f.eval(&[0, 1]), 300.0);
        assert_eq!(f.eval(&[1]), 200.0);
        assert_eq!(f.cover_set(1).len(), 200);
    }

    #[test]
    fn facility_eval() {
        let f = FacilityLocationFunction::new(vec![vec![0.2, 0.9], vec![0.5, 0.1]]).unwrap();
        assert_eq!(f.eval(&[]), 0.0);
        assert_eq!(f.eval(&[0]), 0.7);
        assert_eq!(f.eval(&[0, 1]), 0.9 + 0.5);
    }

    #[test]
    fn patience_scaled_examples() {
        let g: Arc<dyn SetFunction> = Arc::new(ModularFunction::new(vec![0.6, 0.4, 0.2]).unwrap());
        let inst = make_patience_scaled_instance(3, g.clone(), &[0.5, 0.5], Some(0.0)).unwrap();
        assert!(inst.bernoulli_compatible());
        // 0.5 * 0.6/1.2 + 0.5 * 1.0/1.2
        let expected = 0.5 * (0.6 / 1.2) + 0.5 * ((0.6 + 0.4) / 1.2);
        assert!((inst.evaluate(&[0, 1]).unwrap() - expected).abs() < 1e-15);

        let single = make_patience_scaled_instance(3, g.clone(), &[1.0], None).unwrap();
        assert!((single.evaluate(&[1]).unwrap() - 0.4 / 1.2).abs() < 1e-15);

        assert!(matches!(
            make_patience_scaled_instance(3, g, &[0.7, 0.7], None),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn record_round_trips_through_toml() {
        let rec = InstanceRecord {
            n: 5,
            k: 2,
            seed: 4,
            family: Family::PatienceScaled {
                scales: vec![0.5, 0.5],
                base: Box::new(Family::Coverage { universe: 6, density: 0.4 }),
            },
        };
        let text = rec.to_toml();
        let back = InstanceRecord::from_toml(&text).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_toml(), text);
        let inst = back.build().unwrap();
        assert!(inst.bernoulli_compatible());
        assert!(inst.value_upper_bound() <= 1.0 + 1e-12);
    }
}
