//! Two-stage uniform sampling and observation models.
//!
//! A draw picks a length `t` uniformly from `1..=k`, then a uniformly random
//! ordered sequence of `t` distinct items, then an observed utility whose
//! expectation is `F` of that sequence.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{Instance, Sequence};

/// Records generated per independent randomness stream.
pub const SHARD_SIZE: usize = 4096;

/// Significant digits written for real values in text files.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// How an observed utility is realized from the true value `F(pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationModel {
    /// `phi = F(pi)`.
    Exact,
    /// `phi ~ Bernoulli(F(pi))`; needs every sequence value in `[0, 1]`.
    Bernoulli,
    /// `phi = F(pi) + U[-b, b]`, unclipped.
    BoundedNoise(f64),
}

impl ObservationModel {
    /// Rejects models the instance cannot support.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        match *self {
            ObservationModel::Exact => Ok(()),
            ObservationModel::Bernoulli if inst.bernoulli_compatible() => Ok(()),
            ObservationModel::Bernoulli => Err(Error::Config(
                "Bernoulli observations need a Bernoulli-compatible instance (values in [0, 1])"
                    .into(),
            )),
            ObservationModel::BoundedNoise(b) if b.is_finite() && b >= 0.0 => Ok(()),
            ObservationModel::BoundedNoise(b) => {
                Err(Error::Config(format!("noise bound {b} must be finite and nonnegative")))
            }
        }
    }

    /// Largest value an observation can take on this instance.
    pub fn value_bound(&self, inst: &Instance) -> f64 {
        match *self {
            ObservationModel::Exact => inst.value_upper_bound(),
            ObservationModel::Bernoulli => 1.0,
            ObservationModel::BoundedNoise(b) => inst.value_upper_bound() + b,
        }
    }

    /// Smallest value an observation can take.
    pub fn value_floor(&self) -> f64 {
        match *self {
            ObservationModel::Exact | ObservationModel::Bernoulli => 0.0,
            ObservationModel::BoundedNoise(b) => -b,
        }
    }

    pub fn observe<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> f64 {
        match *self {
            ObservationModel::Exact => value,
            ObservationModel::Bernoulli => {
                if rng.random::<f64>() < value {
                    1.0
                } else {
                    0.0
                }
            }
            ObservationModel::BoundedNoise(b) => {
                if b > 0.0 {
                    value + rng.random_range(-b..=b)
                } else {
                    value
                }
            }
        }
    }
}

/// One observed `(sequence, utility)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sequence: Sequence,
    pub phi: f64,
}

/// The learner's only view of the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    k: usize,
    delta: f64,
    records: Vec<SampleRecord>,
}

impl Dataset {
    /// Validates every record against the metadata. `delta` is the declared
    /// bound on observed values.
    pub fn new(n: usize, k: usize, delta: f64, records: Vec<SampleRecord>) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= n, got n = {n}, k = {k}"
            )));
        }
        if records.is_empty() {
            return Err(Error::InvalidParameter("dataset must contain at least one record".into()));
        }
        for (idx, rec) in records.iter().enumerate() {
            let len = rec.sequence.len();
            if len == 0 || len > k {
                return Err(Error::InvalidSequence(format!(
                    "record {idx} has length {len}, expected 1..={k}"
                )));
            }
            if rec.sequence.iter().any(|i| i >= n) {
                return Err(Error::InvalidSequence(format!("record {idx} has an item >= {n}")));
            }
            if !rec.phi.is_finite() || rec.phi > delta {
                return Err(Error::InvalidParameter(format!(
                    "record {idx} has phi = {} above the bound {delta}",
                    rec.phi
                )));
            }
        }
        Ok(Self { n, k, delta, records })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    /// Serializes to the line format: a `n,k,delta,m` header, then one
    /// `t,id_1 id_2 ... id_t,phi` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 24);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            self.n,
            self.k,
            format_decimal(self.delta),
            self.records.len()
        );
        for rec in &self.records {
            let _ = writeln!(out, "{},{},{}", rec.sequence.len(), rec.sequence, format_decimal(rec.phi));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line: 1, msg: "header must be n,k,delta,m".into() });
        }
        let n: usize = parse_field(fields[0], 1, "n")?;
        let k: usize = parse_field(fields[1], 1, "k")?;
        let delta: f64 = parse_field(fields[2], 1, "delta")?;
        let m: usize = parse_field(fields[3], 1, "m")?;

        let mut records = Vec::with_capacity(m);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Parse { line: lineno, msg: "expected t,ids,phi".into() });
            }
            let t: usize = parse_field(parts[0], lineno, "t")?;
            let items = parts[1]
                .split_whitespace()
                .map(|s| parse_field::<usize>(s, lineno, "item id"))
                .collect::<Result<Vec<_>>>()?;
            if items.len() != t {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("length field {t} but {} ids", items.len()),
                });
            }
            let sequence = Sequence::new(items, n).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            let phi: f64 = parse_field(parts[2], lineno, "phi")?;
            records.push(SampleRecord { sequence, phi });
        }
        if records.len() != m {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {m} records, found {}", records.len()),
            });
        }
        Self::new(n, k, delta, records)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what}: {s:?}"),
    })
}

/// Plain decimal notation rounded to [`SIGNIFICANT_DIGITS`] significant
/// digits, trailing zeros trimmed.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(&digits);
    } else if point as usize >= digits.len() {
        out.push_str(&digits);
        out.extend(std::iter::repeat_n('0', point as usize - digits.len()));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    if out.contains('.') {
        let trimmed = out.trim_end_matches('0').trim_end_matches('.').len();
        out.truncate(trimmed);
    }
    out
}

/// A uniformly random ordered sequence of `t` distinct items out of `n`.
pub fn random_ordered<R: Rng + ?Sized>(rng: &mut R, n: usize, t: usize) -> Sequence {
    // `index::sample` returns its picks fully shuffled.
    Sequence::from_trusted(index::sample(rng, n, t).into_vec())
}

/// One two-stage uniform draw with its observation.
pub fn draw_two_stage<R: Rng + ?Sized>(
    inst: &Instance,
    model: &ObservationModel,
    rng: &mut R,
) -> SampleRecord {
    let t = rng.random_range(1..=inst.k());
    let sequence = random_ordered(rng, inst.n(), t);
    let value = inst.evaluate_unchecked(sequence.as_slice());
    let phi = model.observe(value, rng);
    SampleRecord { sequence, phi }
}

/// The randomness stream for shard `shard` of a dataset built from `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// `m` i.i.d. two-stage draws.
///
/// Records are produced in shards of [`SHARD_SIZE`], each with its own
/// stream derived from `seed`, and concatenated in shard order, so the
/// result does not depend on the thread count.
pub fn build_dataset(
    inst: &Instance,
    model: &ObservationModel,
    m: usize,
    seed: u64,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidParameter("sample count m must be at least 1".into()));
    }
    model.validate(inst)?;
    let shards = m.div_ceil(SHARD_SIZE);
    let records: Vec<SampleRecord> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(seed, shard as u64);
            let count = SHARD_SIZE.min(m - shard * SHARD_SIZE);
            (0..count)
                .map(|_| draw_two_stage(inst, model, &mut rng))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    Dataset::new(inst.n(), inst.k(), model.value_bound(inst), records)
}

/// The `delta` used in concentration tolerances: the override if given,
/// otherwise the largest observed value.
pub fn delta_bound(ds: &Dataset, override_value: Option<f64>) -> f64 {
    override_value.unwrap_or_else(|| {
        ds.records()
            .iter()
            .map(|r| r.phi)
            .fold(f64::NEG_INFINITY, f64::max)
    })
}
