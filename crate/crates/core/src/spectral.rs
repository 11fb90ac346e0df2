//! Fourier diagnostics of measures on `Z/MZ`, sumset checks and the numeric
//! bounds that control unsaturated submodules.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::modarith::{check_prime, factorize, IntMatrix, ModArithError};
use crate::sampler::{min_entropy, sample_vector, EntryDistribution, SamplerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("masses must be non-negative and sum to 1 (sum = {0})")]
    NotNormalised(f64),
    #[error("modulus must be at least 1")]
    EmptyGroup,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Ring(#[from] ModArithError),
}

/// Probability measure on `Z/MZ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteMeasure {
    modulus: usize,
    masses: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(masses: Vec<f64>) -> Result<Self, SpectralError> {
        if masses.is_empty() {
            return Err(SpectralError::EmptyGroup);
        }
        let sum: f64 = masses.iter().sum();
        if masses.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(SpectralError::NotNormalised(sum));
        }
        Ok(FiniteMeasure { modulus: masses.len(), masses })
    }

    pub fn point_mass(modulus: usize, at: usize) -> Result<Self, SpectralError> {
        if modulus == 0 {
            return Err(SpectralError::EmptyGroup);
        }
        let mut masses = vec![0.0; modulus];
        masses[at % modulus] = 1.0;
        Ok(FiniteMeasure { modulus, masses })
    }

    pub fn uniform(modulus: usize) -> Result<Self, SpectralError> {
        if modulus == 0 {
            return Err(SpectralError::EmptyGroup);
        }
        Ok(FiniteMeasure { modulus, masses: vec![1.0 / modulus as f64; modulus] })
    }

    /// Push-forward of an entry distribution to `Z/MZ`.
    pub fn from_distribution(xi: &EntryDistribution, modulus: usize) -> Result<Self, SpectralError> {
        if modulus == 0 {
            return Err(SpectralError::EmptyGroup);
        }
        let mut masses = vec![0.0; modulus];
        for (&x, p) in xi.support().iter().zip(xi.probs()) {
            masses[x.rem_euclid(modulus as i64) as usize] += p;
        }
        Ok(FiniteMeasure { modulus, masses })
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `1 − max_{p | M} max_t μ(≡ t mod p)`; 0 for a measure on one residue class.
    pub fn min_entropy(&self) -> Result<f64, SpectralError> {
        if self.modulus < 2 {
            return Err(SpectralError::OutOfRange("min-entropy needs M >= 2".into()));
        }
        let mut worst: f64 = 0.0;
        for (p, _) in factorize(self.modulus as u64) {
            let p = p as usize;
            let mut residues = vec![0.0; p];
            for (s, &x) in self.masses.iter().enumerate() {
                residues[s % p] += x;
            }
            worst = residues.into_iter().fold(worst, f64::max);
        }
        Ok((1.0 - worst).max(0.0))
    }
}

/// `e(st/M)` with the exponent reduced mod `M` first.
fn character(s: usize, t: usize, m: usize) -> Complex64 {
    let k = ((s as u128 * t as u128) % m as u128) as f64;
    Complex64::from_polar(1.0, TAU * k / m as f64)
}

/// `μ̂(t) = Σ_s μ(s) e(st/M)` for every `t`.
pub fn fourier(mu: &FiniteMeasure) -> Vec<Complex64> {
    let m = mu.modulus;
    (0..m)
        .map(|t| mu.masses.iter().enumerate().map(|(s, &x)| character(s, t, m) * x).sum())
        .collect()
}

/// `ψ(t) = 1 − |μ̂(t)|²`, clamped to `[0, 1]`.
pub fn psi(mu: &FiniteMeasure, t: usize) -> f64 {
    let m = mu.modulus;
    let c: Complex64 = mu.masses.iter().enumerate().map(|(s, &x)| character(s, t % m, m) * x).sum();
    (1.0 - c.norm_sqr()).clamp(0.0, 1.0)
}

/// Default laziness `γ` of the swap distribution.
pub const SWAP_GAMMA: f64 = 0.125;

/// `ν(t) = γ (μ * μ⁻)(t)` for `t ≠ 0`, with the remaining mass at 0.
pub fn swap_distribution(mu: &FiniteMeasure, gamma: f64) -> Result<FiniteMeasure, SpectralError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(SpectralError::OutOfRange(format!("gamma = {gamma}")));
    }
    let m = mu.modulus;
    let mut masses = vec![0.0; m];
    for t in 1..m {
        // (μ * μ⁻)(t) = Σ_u μ(u) μ(u − t)
        let conv: f64 = (0..m).map(|u| mu.masses[u] * mu.masses[(u + m - t) % m]).sum();
        masses[t] = gamma * conv;
    }
    masses[0] = 1.0 - masses[1..].iter().sum::<f64>();
    Ok(FiniteMeasure { modulus: m, masses })
}

/// `Spec_{1−ε} μ = {t : |μ̂(t)| ≥ 1 − ε}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSet {
    pub modulus: usize,
    pub epsilon: f64,
    pub members: Vec<usize>,
}

/// Slack for floating-point round-off in `|μ̂(t)|` comparisons.
const SPEC_SLACK: f64 = 1e-12;

pub fn spec_set(mu: &FiniteMeasure, epsilon: f64) -> Result<SpectrumSet, SpectralError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SpectralError::OutOfRange(format!("epsilon = {epsilon}")));
    }
    let members = fourier(mu)
        .iter()
        .enumerate()
        .filter(|(t, c)| *t == 0 || c.norm() >= 1.0 - epsilon - SPEC_SLACK)
        .map(|(t, _)| t)
        .collect();
    Ok(SpectrumSet { modulus: mu.modulus, epsilon, members })
}

/// `A + B` in `Z/MZ`, sorted.
pub fn sumset(a: &[usize], b: &[usize], m: usize) -> Vec<usize> {
    let mut hit = vec![false; m];
    for &x in a {
        for &y in b {
            hit[(x + y) % m] = true;
        }
    }
    (0..m).filter(|&t| hit[t]).collect()
}

/// `Sym(A) = {h : A + h = A}`.
pub fn sym_group(a: &[usize], m: usize) -> Vec<usize> {
    let mut inside = vec![false; m];
    for &x in a {
        inside[x % m] = true;
    }
    (0..m).filter(|&h| a.iter().all(|&x| inside[(x + h) % m])).collect()
}

fn rotate(mask: u64, by: usize, m: usize) -> u64 {
    let full = (1u64 << m) - 1;
    if by == 0 {
        mask
    } else {
        ((mask << by) | (mask >> (m - by))) & full
    }
}

/// Checks `|A + B| + |Sym(A + B)| ≥ |A| + |B|` for every pair of non-empty
/// subsets of `Z/MZ`; returns the first counterexample as bitmasks.
pub fn kneser_exhaustive(m: usize) -> Result<Option<(u64, u64)>, SpectralError> {
    if m == 0 || m > 16 {
        return Err(SpectralError::OutOfRange(format!("exhaustive Kneser check needs 1 <= M <= 16, got {m}")));
    }
    let full = 1usize << m;
    let sym_size: Vec<u32> = (0..full as u64)
        .map(|c| (0..m).filter(|&h| rotate(c, h, m) == c).count() as u32)
        .collect();
    let shifts: Vec<Vec<u64>> =
        (0..full as u64).map(|b| (0..m).map(|s| rotate(b, s, m)).collect()).collect();
    for a in 1..full as u64 {
        let bits: Vec<usize> = (0..m).filter(|&i| a >> i & 1 == 1).collect();
        for b in 1..full as u64 {
            let c = bits.iter().fold(0u64, |acc, &s| acc | shifts[b as usize][s]);
            if c.count_ones() + sym_size[c as usize] < a.count_ones() + b.count_ones() {
                return Ok(Some((a, b)));
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionCheck {
    pub holds: bool,
    /// Summands from `Spec_{1−ε}` whose sum falls outside `Spec_{1−k²ε}`.
    pub witness: Option<(Vec<usize>, usize)>,
}

/// Verifies that the `k`-fold sumset of `Spec_{1−ε} μ` lies in `Spec_{1−k²ε} μ`.
pub fn spec_sum_inclusion_check(mu: &FiniteMeasure, epsilon: f64, k: u32) -> Result<InclusionCheck, SpectralError> {
    if k == 0 {
        return Err(SpectralError::OutOfRange("k must be at least 1".into()));
    }
    let m = mu.modulus;
    let small = spec_set(mu, epsilon)?.members;
    // for k²ε ≥ 1 the threshold is non-positive and every t qualifies
    let big = (k * k) as f64 * epsilon;
    let target = if big < 1.0 { spec_set(mu, big)?.members } else { (0..m).collect() };
    // one representation per reachable residue
    let mut reps: Vec<Option<Vec<usize>>> = vec![None; m];
    reps[0] = Some(Vec::new());
    for _ in 0..k {
        let mut next: Vec<Option<Vec<usize>>> = vec![None; m];
        for (x, rep) in reps.iter().enumerate() {
            if let Some(rep) = rep {
                for &s in &small {
                    let y = (x + s) % m;
                    if next[y].is_none() {
                        let mut r = rep.clone();
                        r.push(s);
                        next[y] = Some(r);
                    }
                }
            }
        }
        reps = next;
    }
    for (x, rep) in reps.into_iter().enumerate() {
        if let Some(rep) = rep {
            if target.binary_search(&x).is_err() {
                return Ok(InclusionCheck { holds: false, witness: Some((rep, x)) });
            }
        }
    }
    Ok(InclusionCheck { holds: true, witness: None })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LittlewoodOfford {
    pub probability: f64,
    pub gap: f64,
    /// `C / √(α m)`.
    pub bound: f64,
    pub alpha: f64,
    pub nonzero: usize,
}

/// Exact `P(X · w ≡ r mod q)` for iid coordinates of `X`, by convolving the
/// residue law of `ξ` once per coordinate.
pub fn littlewood_offord_gap(
    xi: &EntryDistribution,
    w: &[u64],
    q: u64,
    r: u64,
    c: f64,
) -> Result<LittlewoodOfford, SpectralError> {
    check_prime(q)?;
    let m = w.iter().filter(|&&x| x % q != 0).count();
    if m == 0 || m > 10_000 {
        return Err(SpectralError::OutOfRange(format!("need 1..=10^4 non-zero coordinates, got {m}")));
    }
    let qs = q as usize;
    let total = xi.total_weight() as f64;
    let residue: Vec<f64> = (0..q).map(|t| xi.residue_weight(q, t) as f64 / total).collect();
    let mut dist = vec![0.0; qs];
    dist[0] = 1.0;
    for &wi in w.iter().filter(|&&x| x % q != 0) {
        let mut next = vec![0.0; qs];
        for (s, &ps) in dist.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            for (x, &px) in residue.iter().enumerate() {
                next[(s + (wi % q) as usize * x) % qs] += ps * px;
            }
        }
        dist = next;
    }
    let alpha = min_entropy(xi, &[q])?;
    let probability = dist[(r % q) as usize];
    Ok(LittlewoodOfford {
        probability,
        gap: (probability - 1.0 / q as f64).abs(),
        bound: c / (alpha * m as f64).sqrt(),
        alpha,
        nonzero: m,
    })
}

/// `(1 − α)^codim`.
pub fn odlyzko_bound(alpha: f64, codim: u32) -> f64 {
    (1.0 - alpha).powi(codim as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubspaceCheck {
    pub trials: u64,
    pub hits: u64,
    pub frequency: f64,
    pub codim: u32,
    pub bound: f64,
    pub sigma: f64,
    pub passes: bool,
}

/// Samples `X ∈ F_q^n` with iid coordinates and counts how often `X ∈ V`,
/// `V` the row span of `v_rows` mod `q`.
pub fn empirical_subspace_check(
    xi: &EntryDistribution,
    v_rows: &IntMatrix,
    q: u64,
    trials: u64,
    seed: u64,
) -> Result<SubspaceCheck, SpectralError> {
    check_prime(q)?;
    if trials == 0 {
        return Err(SpectralError::OutOfRange("trials must be positive".into()));
    }
    let n = v_rows.cols();
    let base = crate::modarith::rank_mod_p(v_rows, q);
    let codim = (n - base) as u32;
    let alpha = min_entropy(xi, &[q])?;
    let mut hits = 0u64;
    for i in 0..trials {
        let x = sample_vector(xi, n, seed, i);
        let mut rows: Vec<Vec<i64>> = (0..v_rows.rows()).map(|r| v_rows.row(r).to_vec()).collect();
        rows.push(x);
        let stacked = IntMatrix::from_rows(&rows)?;
        if crate::modarith::rank_mod_p(&stacked, q) == base {
            hits += 1;
        }
    }
    let bound = odlyzko_bound(alpha, codim);
    let frequency = hits as f64 / trials as f64;
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    Ok(SubspaceCheck { trials, hits, frequency, codim, bound, sigma, passes: frequency <= bound + 4.0 * sigma })
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `Σ_{k=1}^{⌊δn⌋} C(n,k) C(n−ℓ,k−1) min(1−α, 1/q + C/√(αk))^{n−ℓ−k+1}`,
/// summed term by term in log space.
pub fn sparse_bound(n: u64, l: u64, alpha: f64, delta: f64, q: u64, c: f64) -> Result<f64, SpectralError> {
    if !(alpha > 0.0 && alpha < 1.0) || !(delta > 0.0 && delta < 1.0) || !(c > 0.0) || l > n || q < 2 {
        return Err(SpectralError::OutOfRange(format!(
            "sparse bound needs 0<alpha<1, 0<delta<1, C>0, l<=n, q>=2 (alpha={alpha}, delta={delta}, C={c}, l={l}, n={n}, q={q})"
        )));
    }
    let top = (delta * n as f64 + 1e-12).floor() as u64;
    let mut total = 0.0;
    for k in 1..=top {
        let base = (1.0 - alpha).min(1.0 / q as f64 + c / (alpha * k as f64).sqrt());
        let exponent = (n - l + 1).saturating_sub(k) as f64;
        let ln_term = ln_binomial(n, k) + ln_binomial(n - l, k - 1) + exponent * base.ln();
        total += ln_term.exp();
    }
    Ok(total)
}

/// Grid value `d/n` with `(1−α)^{(d+1)/n} ≤ prob ≤ (1−α)^{d/n}`; on a tie the
/// upper inequality is taken as the equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Codimension {
    pub numerator: u64,
    pub denominator: u64,
}

impl Codimension {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

pub fn combinatorial_codimension(prob: f64, alpha: f64, n: u64) -> Result<Codimension, SpectralError> {
    if !(prob > 0.0 && prob <= 1.0) || !(alpha > 0.0 && alpha < 1.0) || n == 0 {
        return Err(SpectralError::OutOfRange(format!("prob = {prob}, alpha = {alpha}, n = {n}")));
    }
    let x = n as f64 * prob.ln() / (1.0 - alpha).ln();
    Ok(Codimension { numerator: (x + 1e-9).floor().max(0.0) as u64, denominator: n })
}
