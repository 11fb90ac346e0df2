//! Finite-support entry distributions and reproducible matrix sampling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::modarith::{check_prime, IntMatrix, ModArithError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("bad distribution parameters: {0}")]
    BadParams(String),
    #[error("distribution is degenerate: all mass on one residue class mod {p}")]
    DegenerateDistribution { p: u64 },
    #[error(transparent)]
    Ring(#[from] ModArithError),
}

/// Walker/Vose alias table with 64-bit fixed-point acceptance thresholds.
#[derive(Clone, Debug, PartialEq)]
struct AliasTable {
    /// `None` means the column always accepts.
    threshold: Vec<Option<u64>>,
    alias: Vec<usize>,
}

impl AliasTable {
    fn new(weights: &[u128]) -> Self {
        let k = weights.len();
        let total: u128 = weights.iter().sum();
        let mut scaled: Vec<u128> = weights.iter().map(|&w| w * k as u128).collect();
        let mut threshold = vec![None; k];
        let mut alias: Vec<usize> = (0..k).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| scaled[i] < total);
        while let (Some(&l), Some(&g)) = (small.last(), large.last()) {
            small.pop();
            // floor(scaled[l] / total * 2^64), computed without overflow
            let t = (num_bigint::BigUint::from(scaled[l]) << 64u32) / num_bigint::BigUint::from(total);
            threshold[l] = Some(u64::try_from(t).expect("below 2^64"));
            alias[l] = g;
            scaled[g] = scaled[g] + scaled[l] - total;
            if scaled[g] < total {
                large.pop();
                small.push(g);
            }
        }
        AliasTable { threshold, alias }
    }

    fn draw<R: RngCore>(&self, rng: &mut R) -> usize {
        let col = rng.random_range(0..self.alias.len());
        match self.threshold[col] {
            None => col,
            Some(t) if rng.next_u64() < t => col,
            Some(_) => self.alias[col],
        }
    }
}

/// A probability law on finitely many integers with rational probabilities
/// `weights[i] / Σ weights`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryDistribution {
    name: String,
    support: Vec<i64>,
    weights: Vec<u128>,
    table: AliasTable,
}

impl EntryDistribution {
    /// Builds from integer weights; zero-weight points are dropped.
    pub fn from_weights(name: impl Into<String>, points: Vec<(i64, u128)>) -> Result<Self, SamplerError> {
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for (x, w) in points {
            if support.contains(&x) {
                return Err(SamplerError::BadParams(format!("support point {x} repeated")));
            }
            if w > 0 {
                support.push(x);
                weights.push(w);
            }
        }
        if support.is_empty() {
            return Err(SamplerError::BadParams("empty support".into()));
        }
        let g = weights.iter().fold(0u128, |a, &b| gcd(a, b));
        let weights: Vec<u128> = weights.into_iter().map(|w| w / g).collect();
        if weights.iter().sum::<u128>() > 1u128 << 100 {
            return Err(SamplerError::BadParams("weights too large".into()));
        }
        let table = AliasTable::new(&weights);
        Ok(EntryDistribution { name: name.into(), support, weights, table })
    }

    /// `P(1) = alpha`, `P(0) = 1 − alpha`, with `alpha` a decimal or fraction string.
    pub fn bernoulli(alpha: &str) -> Result<Self, SamplerError> {
        let (num, den) = parse_ratio(alpha)?;
        if num > den {
            return Err(SamplerError::BadParams(format!("bernoulli parameter {alpha} exceeds 1")));
        }
        Self::from_weights(format!("bernoulli:{alpha}"), vec![(0, den - num), (1, num)])
    }

    pub fn uniform_mod(m: u64) -> Result<Self, SamplerError> {
        if m == 0 || m > 1 << 20 {
            return Err(SamplerError::BadParams(format!("uniform_mod needs 1 <= M <= 2^20, got {m}")));
        }
        Self::from_weights(format!("uniform_mod:{m}"), (0..m as i64).map(|x| (x, 1)).collect())
    }

    pub fn signed_uniform(b: u64) -> Result<Self, SamplerError> {
        if b > 1 << 19 {
            return Err(SamplerError::BadParams(format!("signed_uniform bound {b} too large")));
        }
        let b = b as i64;
        Self::from_weights(format!("signed_uniform:{b}"), (-b..=b).map(|x| (x, 1)).collect())
    }

    /// `value=prob` pairs; probabilities must sum to 1 exactly.
    pub fn custom(pairs: &[(i64, &str)]) -> Result<Self, SamplerError> {
        let ratios = pairs.iter().map(|(_, s)| parse_ratio(s)).collect::<Result<Vec<_>, _>>()?;
        let mut den = 1u128;
        for &(_, d) in &ratios {
            den = lcm(den, d).ok_or_else(|| SamplerError::BadParams("denominators too large".into()))?;
        }
        let points: Vec<(i64, u128)> =
            pairs.iter().zip(&ratios).map(|(&(x, _), &(n, d))| (x, n * (den / d))).collect();
        if points.iter().map(|&(_, w)| w).sum::<u128>() != den {
            return Err(SamplerError::BadParams("custom probabilities must sum to 1".into()));
        }
        let body: Vec<String> = pairs.iter().map(|(x, s)| format!("{x}={s}")).collect();
        Self::from_weights(format!("custom:{}", body.join(",")), points)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn probs(&self) -> Vec<f64> {
        let total = self.total_weight() as f64;
        self.weights.iter().map(|&w| w as f64 / total).collect()
    }

    pub fn weights(&self) -> &[u128] {
        &self.weights
    }

    pub fn total_weight(&self) -> u128 {
        self.weights.iter().sum()
    }

    /// Exact weight of residue class `t mod m`, out of [`Self::total_weight`].
    pub fn residue_weight(&self, m: u64, t: u64) -> u128 {
        self.support
            .iter()
            .zip(&self.weights)
            .filter(|(&x, _)| x.rem_euclid(m as i64) as u64 == t % m)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn draw<R: RngCore>(&self, rng: &mut R) -> i64 {
        self.support[self.table.draw(rng)]
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for EntryDistribution {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SamplerError::BadParams(format!("unrecognised distribution spec {s:?}"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        let int = |a: &str| a.trim().parse::<u64>().map_err(|_| bad());
        match kind.trim() {
            "bernoulli" => Self::bernoulli(arg.trim()),
            "uniform_mod" => Self::uniform_mod(int(arg)?),
            "signed_uniform" => Self::signed_uniform(int(arg)?),
            "custom" => {
                let mut pairs = Vec::new();
                for item in arg.split(',') {
                    let (x, p) = item.split_once('=').ok_or_else(bad)?;
                    pairs.push((x.trim().parse::<i64>().map_err(|_| bad())?, p.trim()));
                }
                Self::custom(&pairs)
            }
            _ => Err(bad()),
        }
    }
}

/// `named_distribution("bernoulli", "0.3")` and friends.
pub fn named_distribution(kind: &str, params: &str) -> Result<EntryDistribution, SamplerError> {
    format!("{kind}:{params}").parse()
}

/// Parses "0.25", "3/8" or "1" into a reduced `(num, den)` pair in `[0, ∞)`.
fn parse_ratio(s: &str) -> Result<(u128, u128), SamplerError> {
    let bad = || SamplerError::BadParams(format!("cannot parse probability {s:?}"));
    let s = s.trim();
    let (num, den) = if let Some((a, b)) = s.split_once('/') {
        let a: u128 = a.trim().parse().map_err(|_| bad())?;
        let b: u128 = b.trim().parse().map_err(|_| bad())?;
        (a, b)
    } else {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 24 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u128.pow(frac.len() as u32);
        let int: u128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        (int.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?, den)
    };
    if den == 0 {
        return Err(bad());
    }
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u128, b: u128) -> Option<u128> {
    (a / gcd(a, b)).checked_mul(b)
}

/// `α = 1 − max_p max_t P(ξ ≡ t mod p)` over the listed primes.
pub fn min_entropy(xi: &EntryDistribution, primes: &[u64]) -> Result<f64, SamplerError> {
    if primes.is_empty() {
        return Err(SamplerError::BadParams("min-entropy needs at least one prime".into()));
    }
    let total = xi.total_weight();
    let mut worst = 0u128;
    for &p in primes {
        check_prime(p)?;
        let top = xi
            .support
            .iter()
            .map(|&x| xi.residue_weight(p, x.rem_euclid(p as i64) as u64))
            .max()
            .unwrap_or(0);
        if top == total {
            return Err(SamplerError::DegenerateDistribution { p });
        }
        worst = worst.max(top);
    }
    Ok((total - worst) as f64 / total as f64)
}

/// Generator for trial `index` under `seed`; independent of any other trial.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n × n` matrix with iid entries, filled row by row from the trial stream.
pub fn sample_matrix(xi: &EntryDistribution, n: usize, seed: u64, index: u64) -> IntMatrix {
    sample_rect(xi, n, n, seed, index)
}

pub fn sample_rect(xi: &EntryDistribution, rows: usize, cols: usize, seed: u64, index: u64) -> IntMatrix {
    let mut rng = trial_rng(seed, index);
    let data = (0..rows * cols).map(|_| xi.draw(&mut rng)).collect();
    IntMatrix::new(rows, cols, data).expect("dimensions match")
}

/// Vector of `n` iid entries for trial `index`.
pub fn sample_vector(xi: &EntryDistribution, n: usize, seed: u64, index: u64) -> Vec<i64> {
    let mut rng = trial_rng(seed, index);
    (0..n).map(|_| xi.draw(&mut rng)).collect()
}

/// The matrices of trials `0..trials`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub matrices: Vec<IntMatrix>,
    pub seed: u64,
    pub dist: String,
    pub n: usize,
    pub trials: u64,
}

impl SampleBatch {
    pub fn generate(xi: &EntryDistribution, n: usize, seed: u64, trials: u64) -> Self {
        let matrices = (0..trials).map(|i| sample_matrix(xi, n, seed, i)).collect();
        SampleBatch { matrices, seed, dist: xi.name().to_string(), n, trials }
    }
}
