//! Exact reference distributions for cokernels of Haar / uniform matrices.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modarith::{check_prime, factorize, ModArithError};
use crate::partitions::{ModuleClass, Partition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Ring(#[from] ModArithError),
    #[error("partition {lambda} has more than n = {n} parts; the probability is 0")]
    TooManyParts { lambda: Partition, n: u32 },
    #[error("class {class} is not a module over Z/{modulus}Z")]
    InvalidClass { class: ModuleClass, modulus: u64 },
    #[error("tolerance must be positive (got {0})")]
    BadTolerance(f64),
}

/// `∏_{k=1}^{terms} (1 − p^{−k})`, `terms = None` meaning the infinite product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EulerProduct {
    pub p: u64,
    pub terms: Option<u32>,
    pub value: f64,
}

impl EulerProduct {
    pub fn finite(p: u64, terms: u32) -> Self {
        let q = 1.0 / p as f64;
        let value = (1..=terms).map(|k| 1.0 - q.powi(k as i32)).product();
        EulerProduct { p, terms: Some(terms), value }
    }

    /// Infinite product, truncated once the tail bound `p^{1−T}/(p−1)` is below `tol`.
    pub fn infinite(p: u64, tol: f64) -> Self {
        let pf = p as f64;
        let mut t = 1u32;
        while pf.powi(1 - t as i32) / (pf - 1.0) >= tol && t < 4096 {
            t += 1;
        }
        EulerProduct { p, terms: None, value: Self::finite(p, t).value }
    }
}

/// `|Aut(⊕ Z/p^{λ_i})| = p^{Σ (λ'_j)²} ∏_j ∏_{i=1}^{m_j} (1 − p^{−i})`.
pub fn aut_order(p: u64, lambda: &Partition) -> BigUint {
    let conj = lambda.conjugate();
    let sq: u64 = conj.parts().iter().map(|&c| u64::from(c) * u64::from(c)).sum();
    let mults = lambda.multiplicities();
    let removed: u64 = mults.iter().map(|&(_, m)| u64::from(m) * u64::from(m + 1) / 2).sum();
    let bp = BigUint::from(p);
    let mut out = bp.pow((sq - removed) as u32);
    for &(_, m) in &mults {
        for i in 1..=m {
            out *= bp.pow(i) - 1u32;
        }
    }
    out
}

fn inv_aut_f64(p: u64, lambda: &Partition) -> f64 {
    1.0 / aut_order(p, lambda).to_f64().unwrap_or(f64::INFINITY)
}

/// Cohen–Lenstra mass `μ_CL(G) = |Aut G|^{-1} ∏_{k≥1} (1 − p^{−k})`.
pub fn cl_measure(p: u64, lambda: &Partition, tol: f64) -> Result<f64, MeasureError> {
    check_prime(p)?;
    if !(tol > 0.0) {
        return Err(MeasureError::BadTolerance(tol));
    }
    Ok(EulerProduct::infinite(p, tol).value * inv_aut_f64(p, lambda))
}

/// Cokernel law of a Haar-uniform `n × n` matrix over `Z_p` (Friedman–Washington):
/// `|Aut G|^{-1} ∏_{k=1}^{n} (1−p^{−k}) ∏_{j=n−r+1}^{n} (1−p^{−j})`, `r` the number of parts.
pub fn fw_probability(p: u64, n: u32, lambda: &Partition) -> Result<f64, MeasureError> {
    check_prime(p)?;
    let r = lambda.len() as u32;
    if r > n {
        return Err(MeasureError::TooManyParts { lambda: lambda.clone(), n });
    }
    let q = 1.0 / p as f64;
    let head = EulerProduct::finite(p, n).value;
    let tail: f64 = (n - r + 1..=n).map(|j| 1.0 - q.powi(j as i32)).product();
    Ok(head * tail * inv_aut_f64(p, lambda))
}

/// [`fw_probability`] with 0 in place of the `TooManyParts` error.
pub fn fw_probability_or_zero(p: u64, n: u32, lambda: &Partition) -> Result<f64, MeasureError> {
    match fw_probability(p, n, lambda) {
        Err(MeasureError::TooManyParts { .. }) => Ok(0.0),
        other => other,
    }
}

/// Exact rational form of [`fw_probability`].
pub fn fw_probability_exact(p: u64, n: u32, lambda: &Partition) -> Result<BigRational, MeasureError> {
    check_prime(p)?;
    let r = lambda.len() as u32;
    if r > n {
        return Err(MeasureError::TooManyParts { lambda: lambda.clone(), n });
    }
    let bp = BigInt::from(p);
    let factor = |k: u32| BigRational::new(bp.pow(k) - 1, bp.pow(k));
    let mut out = BigRational::new(BigInt::one(), BigInt::from(aut_order(p, lambda)));
    for k in 1..=n {
        out *= factor(k);
    }
    for j in n - r + 1..=n {
        out *= factor(j);
    }
    Ok(out)
}

/// Limiting probability that a random `n × n` matrix over `F_p` has rank `n − k`:
/// `p^{−k²} ∏_{ℓ>k} (1−p^{−ℓ}) / ∏_{ℓ≤k} (1−p^{−ℓ})`.
pub fn corank_distribution(p: u64, k: u32, tol: f64) -> Result<f64, MeasureError> {
    check_prime(p)?;
    if !(tol > 0.0) {
        return Err(MeasureError::BadTolerance(tol));
    }
    let q = 1.0 / p as f64;
    let head = EulerProduct::finite(p, k).value;
    let all = EulerProduct::infinite(p, tol * head).value;
    // ∏_{ℓ>k} = all / head
    Ok(q.powi((k * k) as i32) * all / (head * head))
}

/// Tail bound for `Σ_{|λ| ≥ size} |Aut λ|^{-1}` using
/// `Σ_{|λ|=K} |Aut λ|^{-1} = p^{−K} / ∏_{i≤K}(1−p^{−i})`.
fn aut_tail_bound(p: u64, size: u32) -> f64 {
    let pf = p as f64;
    let euler = EulerProduct::finite(p, 200).value;
    pf.powi(-(size as i32)) / (euler * (1.0 - 1.0 / pf))
}

/// Partitions of `excess` into at most `slots` parts, zero-padded to `slots`.
fn bounded_partitions(excess: u32, slots: usize) -> Vec<Vec<u32>> {
    fn rec(rem: u32, max: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rem == 0 {
            let mut v = cur.clone();
            v.resize(slots, 0);
            out.push(v);
            return;
        }
        if cur.len() == slots {
            return;
        }
        for x in (1..=rem.min(max)).rev() {
            cur.push(x);
            rec(rem - x, x, slots, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(excess, excess, slots, &mut Vec::new(), &mut out);
    out
}

/// Probability that the cokernel of a uniform `n × n` matrix over `Z/p^e` has
/// `p`-diagram `capped`: the sum of `fw_probability(p, n, λ)` over all `λ`
/// with `cap(λ, e) = capped`, truncated once the tail is below `tol`.
pub fn uniform_reference_prime(
    p: u64,
    e: u32,
    capped: &Partition,
    n: u32,
    tol: f64,
) -> Result<f64, MeasureError> {
    check_prime(p)?;
    if capped.largest_part() > e {
        return Err(MeasureError::InvalidClass {
            class: ModuleClass::single(p, capped.clone()),
            modulus: p.pow(e),
        });
    }
    if capped.len() as u32 > n {
        return Ok(0.0);
    }
    let top = capped.parts().iter().take_while(|&&x| x == e).count();
    let rest = &capped.parts()[top..];
    if top == 0 {
        return fw_probability(p, n, capped);
    }
    let mut total = 0.0;
    let mut excess = 0u32;
    loop {
        for ys in bounded_partitions(excess, top) {
            let parts: Vec<u32> = ys.iter().map(|y| e + y).chain(rest.iter().copied()).collect();
            total += fw_probability(p, n, &Partition::new(parts).expect("decreasing"))?;
        }
        excess += 1;
        if aut_tail_bound(p, capped.size() + excess) < tol || excess > 10_000 {
            return Ok(total);
        }
    }
}

/// Probability that a uniform `n × n` matrix over `Z/NZ` has cokernel `G`.
/// By CRT this is the product of the per-prime capped sums.
pub fn uniform_reference(modulus: u64, class: &ModuleClass, n: u32, tol: f64) -> Result<f64, MeasureError> {
    if modulus < 2 {
        return Err(ModArithError::InvalidModulus(modulus).into());
    }
    if !(tol > 0.0) {
        return Err(MeasureError::BadTolerance(tol));
    }
    let factors = factorize(modulus);
    let invalid = || MeasureError::InvalidClass { class: class.clone(), modulus };
    for (p, _) in class.components() {
        if !factors.iter().any(|&(q, _)| q == p) {
            return Err(invalid());
        }
    }
    let omega = factors.len() as f64;
    let mut out = 1.0;
    for &(p, e) in &factors {
        let comp = class.component(p);
        if comp.largest_part() > e {
            return Err(invalid());
        }
        out *= uniform_reference_prime(p, e, comp, n, tol / omega)?;
    }
    Ok(out)
}

/// Which ring and matrix size a distribution over cokernel classes refers to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RingDescriptor {
    /// `n × n` matrices over `Z_p`.
    Padic { p: u64, n: u32 },
    /// `n × n` matrices over `Z/NZ`.
    Modular { modulus: u64, n: u32 },
    /// The `n → ∞` limit over `Z_p`.
    CohenLenstra { p: u64 },
}

impl RingDescriptor {
    /// Whether an empirical law on `self` can be compared with a reference on `other`.
    pub fn compatible(&self, other: &RingDescriptor) -> bool {
        use RingDescriptor::*;
        match (self, other) {
            (Padic { p, n }, Padic { p: q, n: m }) => p == q && n == m,
            (Padic { p, .. } | CohenLenstra { p }, CohenLenstra { p: q })
            | (CohenLenstra { p }, Padic { p: q, .. }) => p == q,
            (Modular { modulus, n }, Modular { modulus: m2, n: n2 }) => modulus == m2 && n == n2,
            _ => false,
        }
    }
}

/// Finitely many classes with probabilities, plus the mass of everything else.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceDistribution {
    pub ring: RingDescriptor,
    pub entries: Vec<(ModuleClass, f64)>,
    pub tail_mass: f64,
}

#[derive(Serialize)]
struct EntryJson {
    class: String,
    prob: f64,
}

#[derive(Serialize)]
struct ReferenceJson<'a> {
    ring: &'a RingDescriptor,
    entries: Vec<EntryJson>,
    tail_mass: f64,
}

impl ReferenceDistribution {
    pub fn probability(&self, class: &ModuleClass) -> Option<f64> {
        self.entries.iter().find(|(c, _)| c == class).map(|&(_, x)| x)
    }

    pub fn listed_mass(&self) -> f64 {
        self.entries.iter().map(|(_, x)| x).sum()
    }

    pub fn to_json(&self) -> String {
        let entries =
            self.entries.iter().map(|(c, x)| EntryJson { class: c.to_string(), prob: *x }).collect();
        serde_json::to_string_pretty(&ReferenceJson { ring: &self.ring, entries, tail_mass: self.tail_mass })
            .expect("reference serialises")
    }

    fn from_entries(ring: RingDescriptor, entries: Vec<(ModuleClass, f64)>) -> Self {
        let listed: f64 = entries.iter().map(|(_, x)| x).sum();
        ReferenceDistribution { ring, entries, tail_mass: (1.0 - listed).max(0.0) }
    }

    /// Friedman–Washington law at size `n`, listing every `λ` with `|λ| ≤ max_size`.
    pub fn friedman_washington(p: u64, n: u32, max_size: u32) -> Result<Self, MeasureError> {
        let mut entries = Vec::new();
        for lambda in Partition::all_up_to_size(max_size) {
            if lambda.len() as u32 <= n {
                let x = fw_probability(p, n, &lambda)?;
                entries.push((ModuleClass::single(p, lambda), x));
            }
        }
        Ok(Self::from_entries(RingDescriptor::Padic { p, n }, entries))
    }

    /// Cohen–Lenstra law, listing every `λ` with `|λ| ≤ max_size`.
    pub fn cohen_lenstra(p: u64, max_size: u32, tol: f64) -> Result<Self, MeasureError> {
        let mut entries = Vec::new();
        for lambda in Partition::all_up_to_size(max_size) {
            let x = cl_measure(p, &lambda, tol)?;
            entries.push((ModuleClass::single(p, lambda), x));
        }
        Ok(Self::from_entries(RingDescriptor::CohenLenstra { p }, entries))
    }

    /// Uniform-matrix law over `Z/NZ`, listing classes whose `p`-diagrams
    /// all have at most `max_size` boxes.
    pub fn uniform(modulus: u64, n: u32, max_size: u32, tol: f64) -> Result<Self, MeasureError> {
        if modulus < 2 {
            return Err(ModArithError::InvalidModulus(modulus).into());
        }
        let factors = factorize(modulus);
        let mut classes = vec![ModuleClass::trivial()];
        for &(p, e) in &factors {
            let options: Vec<Partition> = Partition::all_up_to_size(max_size)
                .into_iter()
                .filter(|l| l.largest_part() <= e && l.len() as u32 <= n)
                .collect();
            classes = classes
                .iter()
                .flat_map(|c| options.iter().map(move |l| c.combine(&ModuleClass::single(p, l.clone()))))
                .collect();
        }
        let mut entries = Vec::with_capacity(classes.len());
        for c in classes {
            let x = uniform_reference(modulus, &c, n, tol)?;
            entries.push((c, x));
        }
        Ok(Self::from_entries(RingDescriptor::Modular { modulus, n }, entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn part(v: &[u32]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn aut_order_examples() {
        assert_eq!(aut_order(5, &part(&[])), BigUint::one());
        assert_eq!(aut_order(2, &part(&[1])), BigUint::one());
        assert_eq!(aut_order(2, &part(&[1, 1])), BigUint::from(6u32));
        assert_eq!(aut_order(3, &part(&[2])), BigUint::from(6u32));
        // |GL_3(F_2)| = 168
        assert_eq!(aut_order(2, &part(&[1, 1, 1])), BigUint::from(168u32));
    }

    #[test]
    fn cl_measure_examples() {
        let t = 1e-12;
        assert!((cl_measure(2, &part(&[]), t).unwrap() - 0.288788095087).abs() < 1e-11);
        assert!((cl_measure(2, &part(&[1]), t).unwrap() - 0.288788095087).abs() < 1e-11);
        assert!((cl_measure(2, &part(&[1, 1]), t).unwrap() - 0.048131349181).abs() < 1e-11);
        assert!(cl_measure(2, &part(&[]), 0.0).is_err());
    }

    #[test]
    fn fw_examples() {
        assert!((fw_probability(2, 2, &part(&[])).unwrap() - 0.375).abs() < 1e-15);
        assert!((fw_probability(2, 1, &part(&[1])).unwrap() - 0.25).abs() < 1e-15);
        assert!((fw_probability(2, 10, &part(&[])).unwrap() - 0.289070).abs() < 1e-6);
        assert!(matches!(
            fw_probability(2, 1, &part(&[1, 1])),
            Err(MeasureError::TooManyParts { .. })
        ));
        assert_eq!(fw_probability_or_zero(2, 1, &part(&[1, 1])).unwrap(), 0.0);
        assert_eq!(
            fw_probability_exact(2, 2, &part(&[])).unwrap(),
            BigRational::new(BigInt::from(3), BigInt::from(8))
        );
    }

    #[test]
    fn corank_examples() {
        let t = 1e-9;
        assert!((corank_distribution(2, 0, t).unwrap() - 0.288788095).abs() < 1e-9);
        assert!((corank_distribution(2, 1, t).unwrap() - 0.577576190).abs() < 1e-9);
        assert!((corank_distribution(2, 2, t).unwrap() - 0.128350265).abs() < 1e-9);
        let total: f64 = (0..=25).map(|k| corank_distribution(2, k, t).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_reference_examples() {
        let t = 1e-9;
        assert!((uniform_reference(2, &ModuleClass::trivial(), 2, t).unwrap() - 0.375).abs() < 1e-9);
        let z2 = ModuleClass::single(2, part(&[1]));
        assert!((uniform_reference(4, &z2, 1, t).unwrap() - 0.25).abs() < 1e-9);
        assert!((uniform_reference(6, &ModuleClass::trivial(), 1, t).unwrap() - 1.0 / 3.0).abs() < 1e-9);
        let bad = ModuleClass::single(2, part(&[3]));
        assert!(matches!(uniform_reference(4, &bad, 3, t), Err(MeasureError::InvalidClass { .. })));
        let wrong_prime = ModuleClass::single(5, part(&[1]));
        assert!(matches!(uniform_reference(4, &wrong_prime, 3, t), Err(MeasureError::InvalidClass { .. })));
    }

    #[test]
    fn uniform_reference_scalar_mod_4() {
        // scalars mod 4: 0 -> Z/4, 2 -> Z/2, units -> trivial
        let t = 1e-12;
        let z4 = ModuleClass::single(2, part(&[2]));
        assert!((uniform_reference(4, &z4, 1, t).unwrap() - 0.25).abs() < 1e-10);
        assert!((uniform_reference(4, &ModuleClass::trivial(), 1, t).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reference_tables_are_normalised() {
        let fw = ReferenceDistribution::friedman_washington(2, 6, 6).unwrap();
        assert!(fw.tail_mass >= 0.0 && fw.tail_mass < 0.05);
        let uni = ReferenceDistribution::uniform(12, 4, 4, 1e-12).unwrap();
        assert!((uni.listed_mass() + uni.tail_mass - 1.0).abs() < 1e-9);
        assert!(uni.tail_mass < 0.05);
        let json = uni.to_json();
        assert!(json.contains("\"kind\": \"modular\""));
        assert!(json.contains("\"tail_mass\""));
    }

    #[test]
    fn bounded_partition_listing() {
        assert_eq!(bounded_partitions(0, 2), vec![vec![0, 0]]);
        assert_eq!(bounded_partitions(3, 2), vec![vec![3, 0], vec![2, 1]]);
        assert!(aut_tail_bound(2, 60) > 0.0 && !aut_tail_bound(2, 60).is_zero());
    }
}
