//! Exact linear algebra over `Z/p^E`, `Z/NZ` and (by precision escalation) `Z_p`.
//!
//! Matrices hold exact `i64` entries. Smith normal form runs over the chain
//! ring `Z/p^E`; positions that vanish mod `p^E` are "saturated" and are
//! resolved either by raising `E` or by an exact rank certificate over `Q`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partitions::{ModuleClass, Partition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModArithError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("modulus must be at least 2 (got {0})")]
    InvalidModulus(u64),
    #[error("saturation persists at precision p^{precision} for p = {p}")]
    PrecisionCeiling { p: u64, precision: u32 },
    #[error("desk-scale oracle limited to min(rows, cols) <= 5 (got {0})")]
    TooLarge(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix parse error: {0}")]
    Parse(String),
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub(crate) fn check_prime(p: u64) -> Result<(), ModArithError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(ModArithError::NotPrime(p))
    }
}

/// Prime factorisation `N = ∏ p^e` by trial division, primes increasing.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            let mut e = 0;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// p-adic valuation of a non-zero integer.
pub fn valuation_bigint(x: &BigInt, p: u64) -> Option<u32> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut v = 0;
    let mut y = x.clone();
    loop {
        let (q, r) = y.div_rem(&p);
        if !r.is_zero() {
            return Some(v);
        }
        y = q;
        v += 1;
    }
}

/// Dense integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<Vec<i64>>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self, ModArithError> {
        if data.len() != rows * cols {
            return Err(ModArithError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, ModArithError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ModArithError::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn diagonal(d: &[i64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> IntMatrix {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        IntMatrix { rows: self.rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<i64>]) -> Result<Self, ModArithError> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(ModArithError::Dimension("column length differs from row count".into()));
        }
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        Ok(m)
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Reduces every entry into `[0, modulus)`.
    pub fn reduce_mod(&self, modulus: u64) -> IntMatrix {
        let m = modulus as i128;
        let data = self.data.iter().map(|&x| (x as i128).rem_euclid(m) as i64).collect();
        IntMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn to_json(&self) -> String {
        let rows = (0..self.rows).map(|i| self.row(i).to_vec()).collect();
        serde_json::to_string(&MatrixJson { rows: self.rows, cols: self.cols, data: rows })
            .expect("matrix serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, ModArithError> {
        let m: MatrixJson = serde_json::from_str(s).map_err(|e| ModArithError::Parse(e.to_string()))?;
        if m.data.len() != m.rows {
            return Err(ModArithError::Dimension("row count does not match data".into()));
        }
        let out = Self::from_rows(&m.data)?;
        if m.rows > 0 && out.cols != m.cols {
            return Err(ModArithError::Dimension("column count does not match data".into()));
        }
        Ok(IntMatrix { rows: m.rows, cols: m.cols, data: out.data })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(s: &str) -> Result<Self, ModArithError> {
        let rows = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .map(|x| x.trim().parse::<i64>().map_err(|e| ModArithError::Parse(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(&rows)
    }

    fn to_bigint_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|&x| BigInt::from(x)).collect()).collect()
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            writeln!(f, "{:?}", self.row(i))?;
        }
        Ok(())
    }
}

/// The ring a cokernel is taken over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RingSpec {
    /// The p-adic integers, approximated by escalating `Z/p^E`.
    Padic { p: u64 },
    /// `Z/NZ` given by its factorisation.
    Modular { factors: Vec<(u64, u32)> },
}

impl RingSpec {
    pub fn padic(p: u64) -> Result<Self, ModArithError> {
        check_prime(p)?;
        Ok(RingSpec::Padic { p })
    }

    pub fn modular(n: u64) -> Result<Self, ModArithError> {
        if n < 2 {
            return Err(ModArithError::InvalidModulus(n));
        }
        Ok(RingSpec::Modular { factors: factorize(n) })
    }

    pub fn primes(&self) -> Vec<u64> {
        match self {
            RingSpec::Padic { p } => vec![*p],
            RingSpec::Modular { factors } => factors.iter().map(|&(p, _)| p).collect(),
        }
    }

    /// `N` for `Z/NZ`, `None` for `Z_p`.
    pub fn modulus(&self) -> Option<u64> {
        match self {
            RingSpec::Padic { .. } => None,
            RingSpec::Modular { factors } => Some(factors.iter().map(|&(p, e)| p.pow(e)).product()),
        }
    }
}

/// Working-precision schedule for `Z_p` computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionPolicy {
    pub start: u32,
    pub ceiling: u32,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy { start: 16, ceiling: 4096 }
    }
}

// ---------------------------------------------------------------------------
// Arithmetic in Z/p^E

pub(crate) trait ChainRing {
    type Elem: Clone + PartialEq;
    fn precision(&self) -> u32;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn from_i64(&self, x: i64) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    /// `v_p(a)`, or the precision when `a = 0`.
    fn valuation(&self, a: &Self::Elem) -> u32;
    /// `a / p^d` for `v_p(a) ≥ d`.
    fn shift_down(&self, a: &Self::Elem, d: u32) -> Self::Elem;
    fn unit_inverse(&self, a: &Self::Elem) -> Self::Elem;
    fn to_biguint(&self, a: &Self::Elem) -> BigUint;
}

/// `Z/p^E` with `p^E < 2^63`.
pub(crate) struct SmallChain {
    p: u64,
    e: u32,
    modulus: u64,
    mask: Option<u64>,
}

impl SmallChain {
    pub(crate) fn new(p: u64, e: u32) -> Option<Self> {
        let modulus = p.checked_pow(e)?;
        if modulus >= 1 << 63 {
            return None;
        }
        let mask = (p == 2).then(|| modulus - 1);
        Some(SmallChain { p, e, modulus, mask })
    }

    #[inline]
    fn reduce(&self, x: u128) -> u64 {
        match self.mask {
            Some(m) => (x as u64) & m,
            None => (x % self.modulus as u128) as u64,
        }
    }
}

impl ChainRing for SmallChain {
    type Elem = u64;

    fn precision(&self) -> u32 {
        self.e
    }
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.modulus
    }
    fn from_i64(&self, x: i64) -> u64 {
        (x as i128).rem_euclid(self.modulus as i128) as u64
    }
    #[inline]
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        self.reduce(*a as u128 + (self.modulus - *b) as u128)
    }
    #[inline]
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        match self.mask {
            Some(m) => a.wrapping_mul(*b) & m,
            None => ((*a as u128 * *b as u128) % self.modulus as u128) as u64,
        }
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    #[inline]
    fn valuation(&self, a: &u64) -> u32 {
        if *a == 0 {
            return self.e;
        }
        if self.p == 2 {
            return a.trailing_zeros();
        }
        let mut v = 0;
        let mut x = *a;
        while x.is_multiple_of(self.p) {
            x /= self.p;
            v += 1;
        }
        v
    }
    fn shift_down(&self, a: &u64, d: u32) -> u64 {
        a / self.p.pow(d)
    }
    fn unit_inverse(&self, a: &u64) -> u64 {
        let (g, x, _) = ext_gcd(*a as i128, self.modulus as i128);
        debug_assert_eq!(g, 1);
        x.rem_euclid(self.modulus as i128) as u64
    }
    fn to_biguint(&self, a: &u64) -> BigUint {
        BigUint::from(*a)
    }
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// `Z/p^E` for arbitrary `E`.
pub(crate) struct BigChain {
    p: BigUint,
    e: u32,
    modulus: BigUint,
}

impl BigChain {
    pub(crate) fn new(p: u64, e: u32) -> Self {
        let p = BigUint::from(p);
        let modulus = p.pow(e);
        BigChain { p, e, modulus }
    }
}

impl ChainRing for BigChain {
    type Elem = BigUint;

    fn precision(&self) -> u32 {
        self.e
    }
    fn zero(&self) -> BigUint {
        BigUint::zero()
    }
    fn one(&self) -> BigUint {
        BigUint::one() % &self.modulus
    }
    fn from_i64(&self, x: i64) -> BigUint {
        let m = BigInt::from(self.modulus.clone());
        BigInt::from(x).mod_floor(&m).to_biguint().expect("non-negative")
    }
    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + &self.modulus - b) % &self.modulus
    }
    fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.modulus
    }
    fn is_zero(&self, a: &BigUint) -> bool {
        a.is_zero()
    }
    fn valuation(&self, a: &BigUint) -> u32 {
        if a.is_zero() {
            return self.e;
        }
        let mut v = 0;
        let mut x = a.clone();
        loop {
            let (q, r) = x.div_rem(&self.p);
            if !r.is_zero() {
                return v;
            }
            x = q;
            v += 1;
        }
    }
    fn shift_down(&self, a: &BigUint, d: u32) -> BigUint {
        a / self.p.pow(d)
    }
    fn unit_inverse(&self, a: &BigUint) -> BigUint {
        let m = BigInt::from(self.modulus.clone());
        let ext = BigInt::from(a.clone()).extended_gcd(&m);
        debug_assert!(ext.gcd.is_one());
        ext.x.mod_floor(&m).to_biguint().expect("non-negative")
    }
    fn to_biguint(&self, a: &BigUint) -> BigUint {
        a.clone()
    }
}

/// A matrix of residues mod `modulus`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueMatrix {
    pub modulus: BigUint,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigUint>,
}

impl ResidueMatrix {
    pub fn get(&self, i: usize, j: usize) -> &BigUint {
        &self.data[i * self.cols + j]
    }

    /// `self · x mod modulus` for an integer vector `x`.
    pub fn apply(&self, x: &[i64]) -> Vec<BigUint> {
        let m = BigInt::from(self.modulus.clone());
        (0..self.rows)
            .map(|i| {
                let s: BigInt = (0..self.cols)
                    .map(|j| BigInt::from(self.get(i, j).clone()) * x[j])
                    .sum();
                s.mod_floor(&m).to_biguint().expect("non-negative")
            })
            .collect()
    }
}

/// Unimodular transforms with `U · A · V ≡ diag(p^{d_i}) (mod p^E)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnfTransforms {
    pub left: ResidueMatrix,
    pub right: ResidueMatrix,
}

/// Elementary-divisor exponents of a matrix over `Z/p^E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnfResult {
    pub p: u64,
    pub precision: u32,
    /// Weakly increasing, length `min(rows, cols)`; saturated entries equal `precision`.
    pub exponents: Vec<u32>,
    pub saturated: Vec<bool>,
    pub transforms: Option<SnfTransforms>,
}

impl SnfResult {
    pub fn saturated_count(&self) -> usize {
        self.saturated.iter().filter(|&&s| s).count()
    }

    /// Checks `U·A·V ≡ diag` mod `p^E` and that `U`, `V` are invertible mod `p`.
    pub fn verify_transforms(&self, a: &IntMatrix) -> bool {
        let Some(t) = &self.transforms else {
            return false;
        };
        let m = BigInt::from(t.left.modulus.clone());
        let (r, c) = (a.rows(), a.cols());
        let p = BigUint::from(self.p);
        for i in 0..r {
            for j in 0..c {
                let mut s = BigInt::zero();
                for k in 0..r {
                    let uk = BigInt::from(t.left.get(i, k).clone());
                    if uk.is_zero() {
                        continue;
                    }
                    let mut av = BigInt::zero();
                    for l in 0..c {
                        av += BigInt::from(a.get(k, l)) * BigInt::from(t.right.get(l, j).clone());
                    }
                    s += uk * av;
                }
                let s = s.mod_floor(&m);
                let want = if i == j && i < self.exponents.len() && !self.saturated[i] {
                    BigInt::from(p.pow(self.exponents[i])).mod_floor(&m)
                } else {
                    BigInt::zero()
                };
                if s != want {
                    return false;
                }
            }
        }
        let unit_det = |rm: &ResidueMatrix| {
            let reduced: Vec<i64> = rm.data.iter().map(|x| (x % &p).to_i64().unwrap()).collect();
            let im = IntMatrix::new(rm.rows, rm.cols, reduced).unwrap();
            rank_mod_p(&im, self.p) == rm.rows
        };
        unit_det(&t.left) && unit_det(&t.right)
    }
}

struct RawSnf<E> {
    exponents: Vec<u32>,
    left: Option<Vec<E>>,
    right: Option<Vec<E>>,
}

fn snf_generic<R: ChainRing>(ring: &R, a: &IntMatrix, transforms: bool) -> RawSnf<R::Elem> {
    let (r, c) = (a.rows(), a.cols());
    let e = ring.precision();
    let mut m: Vec<R::Elem> = a.data().iter().map(|&x| ring.from_i64(x)).collect();
    let ident = |n: usize| {
        let mut v = vec![ring.zero(); n * n];
        for i in 0..n {
            v[i * n + i] = ring.one();
        }
        v
    };
    let mut u = transforms.then(|| ident(r));
    let mut v = transforms.then(|| ident(c));
    let k_max = r.min(c);
    let mut exps = Vec::with_capacity(k_max);

    for k in 0..k_max {
        // minimal valuation, ties to the lexicographically smallest (row, col)
        let mut best = (e, k, k);
        'scan: for i in k..r {
            for j in k..c {
                let val = ring.valuation(&m[i * c + j]);
                if val < best.0 {
                    best = (val, i, j);
                    if val == 0 {
                        break 'scan;
                    }
                }
            }
        }
        let (d, pi, pj) = best;
        if d >= e {
            exps.extend(std::iter::repeat_n(e, k_max - k));
            break;
        }
        if pi != k {
            for j in 0..c {
                m.swap(k * c + j, pi * c + j);
            }
            if let Some(u) = u.as_mut() {
                for j in 0..r {
                    u.swap(k * r + j, pi * r + j);
                }
            }
        }
        if pj != k {
            for i in 0..r {
                m.swap(i * c + k, i * c + pj);
            }
            if let Some(v) = v.as_mut() {
                for i in 0..c {
                    v.swap(i * c + k, i * c + pj);
                }
            }
        }
        // normalise the pivot to p^d
        let unit = ring.shift_down(&m[k * c + k], d);
        let inv = ring.unit_inverse(&unit);
        if unit != ring.one() {
            for j in k..c {
                m[k * c + j] = ring.mul(&m[k * c + j], &inv);
            }
            if let Some(u) = u.as_mut() {
                for j in 0..r {
                    u[k * r + j] = ring.mul(&u[k * r + j], &inv);
                }
            }
        }
        for i in k + 1..r {
            if ring.is_zero(&m[i * c + k]) {
                continue;
            }
            let f = ring.shift_down(&m[i * c + k], d);
            for j in k..c {
                let t = ring.mul(&f, &m[k * c + j]);
                m[i * c + j] = ring.sub(&m[i * c + j], &t);
            }
            if let Some(u) = u.as_mut() {
                for j in 0..r {
                    let t = ring.mul(&f, &u[k * r + j]);
                    u[i * r + j] = ring.sub(&u[i * r + j], &t);
                }
            }
        }
        if let Some(v) = v.as_mut() {
            for j in k + 1..c {
                if ring.is_zero(&m[k * c + j]) {
                    continue;
                }
                let f = ring.shift_down(&m[k * c + j], d);
                m[k * c + j] = ring.zero();
                for i in 0..c {
                    let t = ring.mul(&f, &v[i * c + k]);
                    v[i * c + j] = ring.sub(&v[i * c + j], &t);
                }
            }
        }
        exps.push(d);
    }
    RawSnf { exponents: exps, left: u, right: v }
}

fn finish_snf<R: ChainRing>(ring: &R, p: u64, raw: RawSnf<R::Elem>, r: usize, c: usize) -> SnfResult {
    let e = ring.precision();
    let modulus = BigUint::from(p).pow(e);
    let to_res = |data: Vec<R::Elem>, n: usize| ResidueMatrix {
        modulus: modulus.clone(),
        rows: n,
        cols: n,
        data: data.iter().map(|x| ring.to_biguint(x)).collect(),
    };
    let transforms = match (raw.left, raw.right) {
        (Some(l), Some(rt)) => Some(SnfTransforms { left: to_res(l, r), right: to_res(rt, c) }),
        _ => None,
    };
    let saturated = raw.exponents.iter().map(|&d| d >= e).collect();
    SnfResult { p, precision: e, exponents: raw.exponents, saturated, transforms }
}

fn snf_dispatch(a: &IntMatrix, p: u64, e: u32, transforms: bool) -> SnfResult {
    let e = e.max(1);
    match SmallChain::new(p, e) {
        Some(ring) => {
            let raw = snf_generic(&ring, a, transforms);
            finish_snf(&ring, p, raw, a.rows(), a.cols())
        }
        None => {
            let ring = BigChain::new(p, e);
            let raw = snf_generic(&ring, a, transforms);
            finish_snf(&ring, p, raw, a.rows(), a.cols())
        }
    }
}

/// Smith normal form exponents over `Z/p^E`.
pub fn snf_mod_ppow(a: &IntMatrix, p: u64, precision: u32) -> Result<SnfResult, ModArithError> {
    check_prime(p)?;
    Ok(snf_dispatch(a, p, precision, false))
}

/// As [`snf_mod_ppow`], also returning the unimodular transforms.
pub fn snf_mod_ppow_with_transforms(
    a: &IntMatrix,
    p: u64,
    precision: u32,
) -> Result<SnfResult, ModArithError> {
    check_prime(p)?;
    Ok(snf_dispatch(a, p, precision, true))
}

// ---------------------------------------------------------------------------
// Exact rank and determinants over Z

fn bareiss_rank_i128(a: &IntMatrix) -> Option<usize> {
    let (r, c) = (a.rows(), a.cols());
    let mut m: Vec<i128> = a.data().iter().map(|&x| x as i128).collect();
    let mut prev: i128 = 1;
    let mut rank = 0;
    for col in 0..c {
        if rank == r {
            break;
        }
        let Some(piv) = (rank..r).find(|&i| m[i * c + col] != 0) else {
            continue;
        };
        if piv != rank {
            for j in 0..c {
                m.swap(piv * c + j, rank * c + j);
            }
        }
        let pv = m[rank * c + col];
        for i in rank + 1..r {
            let f = m[i * c + col];
            for j in col + 1..c {
                let x = pv.checked_mul(m[i * c + j])?.checked_sub(f.checked_mul(m[rank * c + j])?)?;
                m[i * c + j] = x / prev;
            }
            m[i * c + col] = 0;
        }
        prev = pv;
        rank += 1;
    }
    Some(rank)
}

fn bareiss_rank_big(a: &IntMatrix) -> usize {
    let (r, c) = (a.rows(), a.cols());
    let mut m = a.to_bigint_rows();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..c {
        if rank == r {
            break;
        }
        let Some(piv) = (rank..r).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(piv, rank);
        let pv = m[rank][col].clone();
        for i in rank + 1..r {
            let f = m[i][col].clone();
            for j in col + 1..c {
                let x = &pv * &m[i][j] - &f * &m[rank][j];
                m[i][j] = x / &prev;
            }
            m[i][col] = BigInt::zero();
        }
        prev = pv;
        rank += 1;
    }
    rank
}

/// Exact rank over `Q` (fraction-free elimination).
pub fn rank_over_q(a: &IntMatrix) -> usize {
    bareiss_rank_i128(a).unwrap_or_else(|| bareiss_rank_big(a))
}

/// Exact determinant of a square matrix.
pub fn determinant(a: &IntMatrix) -> Result<BigInt, ModArithError> {
    if a.rows() != a.cols() {
        return Err(ModArithError::Dimension("determinant of a non-square matrix".into()));
    }
    Ok(det_bigint(a.to_bigint_rows()))
}

fn det_bigint(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut prev = BigInt::one();
    let mut sign = 1;
    for k in 0..n {
        let Some(piv) = (k..n).find(|&i| !m[i][k].is_zero()) else {
            return BigInt::zero();
        };
        if piv != k {
            m.swap(piv, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let x = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                m[i][j] = x / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    prev * sign
}

/// Rank over `F_p`.
pub fn rank_mod_p(a: &IntMatrix, p: u64) -> usize {
    let (r, c) = (a.rows(), a.cols());
    let pm = p as i128;
    let mut m: Vec<u64> = a.data().iter().map(|&x| (x as i128).rem_euclid(pm) as u64).collect();
    let mulmod = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let mut rank = 0;
    for col in 0..c {
        if rank == r {
            break;
        }
        let Some(piv) = (rank..r).find(|&i| m[i * c + col] != 0) else {
            continue;
        };
        for j in 0..c {
            m.swap(piv * c + j, rank * c + j);
        }
        let (_, inv, _) = ext_gcd(m[rank * c + col] as i128, pm);
        let inv = inv.rem_euclid(pm) as u64;
        for i in rank + 1..r {
            let f = mulmod(m[i * c + col], inv);
            if f == 0 {
                continue;
            }
            for j in col..c {
                let t = mulmod(f, m[rank * c + j]);
                m[i * c + j] = (m[i * c + j] + p - t) % p;
            }
        }
        rank += 1;
    }
    rank
}

// ---------------------------------------------------------------------------
// Cokernels

/// The p-primary part of `coker A` over `Z_p`: `Z_p^free ⊕ ⊕ Z/p^{λ_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CokernelPartition {
    pub free_rank: usize,
    pub torsion: Partition,
}

/// Cokernel of a square or rectangular integer matrix over `Z_p`.
///
/// Escalates `E ← 2E` until every saturated position is certified free by
/// the exact rank over `Q`, or the policy ceiling is hit.
pub fn cokernel_partition(
    a: &IntMatrix,
    p: u64,
    policy: PrecisionPolicy,
) -> Result<CokernelPartition, ModArithError> {
    check_prime(p)?;
    let structural_free = a.rows().saturating_sub(a.cols());
    let min_dim = a.rows().min(a.cols());
    let mut e = policy.start.max(2);
    let mut rank_q: Option<usize> = None;
    loop {
        let snf = snf_dispatch(a, p, e, false);
        let s = snf.saturated_count();
        let certified = s == 0 || {
            let rq = *rank_q.get_or_insert_with(|| rank_over_q(a));
            min_dim - rq == s
        };
        if certified {
            let torsion = Partition::from_unsorted(
                snf.exponents.iter().zip(&snf.saturated).filter(|(_, &sat)| !sat).map(|(&d, _)| d),
            );
            return Ok(CokernelPartition { free_rank: structural_free + s, torsion });
        }
        if e >= policy.ceiling {
            return Err(ModArithError::PrecisionCeiling { p, precision: e });
        }
        e = (e * 2).min(policy.ceiling.max(e + 1));
    }
}

/// Cokernel isomorphism class, or `Infinite` when a `Z_p` cokernel has a free part.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cokernel {
    Finite(ModuleClass),
    Infinite,
}

/// `p`-part of the cokernel over `Z/p^e`: exponents clipped at `e`, with
/// every missing or vanishing diagonal position contributing a `Z/p^e`.
pub fn cokernel_partition_mod_ppow(a: &IntMatrix, p: u64, e: u32) -> Result<Partition, ModArithError> {
    check_prime(p)?;
    let snf = snf_dispatch(a, p, e, false);
    let extra = a.rows().saturating_sub(a.cols());
    Ok(Partition::from_unsorted(
        snf.exponents.iter().map(|&d| d.min(e)).chain(std::iter::repeat_n(e, extra)),
    ))
}

pub fn cokernel_class(a: &IntMatrix, ring: &RingSpec) -> Result<Cokernel, ModArithError> {
    cokernel_class_with(a, ring, PrecisionPolicy::default())
}

pub fn cokernel_class_with(
    a: &IntMatrix,
    ring: &RingSpec,
    policy: PrecisionPolicy,
) -> Result<Cokernel, ModArithError> {
    match ring {
        RingSpec::Padic { p } => {
            let cp = cokernel_partition(a, *p, policy)?;
            if cp.free_rank > 0 {
                Ok(Cokernel::Infinite)
            } else {
                Ok(Cokernel::Finite(ModuleClass::single(*p, cp.torsion)))
            }
        }
        RingSpec::Modular { factors } => {
            let mut class = ModuleClass::trivial();
            for &(p, e) in factors {
                class.insert(p, cokernel_partition_mod_ppow(a, p, e)?);
            }
            Ok(Cokernel::Finite(class))
        }
    }
}

// ---------------------------------------------------------------------------
// Saturation frames

/// A coordinate frame `u_1, …, u_n` of `Z_p^n` (rows of `frame`, acting as
/// `y = frame · x`) in which `W = span{p^{d_i} u_i}`.
///
/// `pivots[i] = Some(d_i)` for the rank-many pivot coordinates; `None` marks
/// coordinates where `W` has nothing, certified by the exact rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaturationFrame {
    pub p: u64,
    pub precision: u32,
    pub frame: ResidueMatrix,
    pub pivots: Vec<Option<u32>>,
}

impl SaturationFrame {
    pub fn max_pivot_exponent(&self) -> u32 {
        self.pivots.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Valuations of the frame coordinates of `x`, capped at the precision.
    pub fn coordinate_valuations(&self, x: &[i64]) -> Vec<u32> {
        let p = BigUint::from(self.p);
        self.frame
            .apply(x)
            .into_iter()
            .map(|y| {
                if y.is_zero() {
                    return self.precision;
                }
                let mut v = 0;
                let mut z = y;
                while (&z % &p).is_zero() {
                    z /= &p;
                    v += 1;
                }
                v
            })
            .collect()
    }
}

/// Frame of `W = column span of w_basis` over `Z_p`, with precision at least
/// `min_precision` and every pivot exponent exact.
pub fn saturation_profile(
    w_basis: &IntMatrix,
    p: u64,
    min_precision: u32,
    policy: PrecisionPolicy,
) -> Result<SaturationFrame, ModArithError> {
    check_prime(p)?;
    let n = w_basis.rows();
    let min_dim = n.min(w_basis.cols());
    let mut e = policy.start.max(min_precision).max(1);
    let mut rank_q: Option<usize> = None;
    loop {
        let snf = snf_dispatch(w_basis, p, e, true);
        let s = snf.saturated_count();
        let certified = s == 0 || {
            let rq = *rank_q.get_or_insert_with(|| rank_over_q(w_basis));
            min_dim - rq == s
        };
        if certified {
            let mut pivots = vec![None; n];
            for (i, (&d, &sat)) in snf.exponents.iter().zip(&snf.saturated).enumerate() {
                if !sat {
                    pivots[i] = Some(d);
                }
            }
            let frame = snf.transforms.expect("requested").left;
            return Ok(SaturationFrame { p, precision: e, frame, pivots });
        }
        if e >= policy.ceiling {
            return Err(ModArithError::PrecisionCeiling { p, precision: e });
        }
        e = (e * 2).min(policy.ceiling.max(e + 1));
    }
}

/// Elementary-divisor exponents from determinantal divisors:
/// `d_1 + … + d_k = v_p(gcd of k×k minors)`. `None` where the divisor is 0.
pub fn gcd_minors_snf_oracle(a: &IntMatrix, p: u64) -> Result<Vec<Option<u32>>, ModArithError> {
    check_prime(p)?;
    let k_max = a.rows().min(a.cols());
    if k_max > 5 {
        return Err(ModArithError::TooLarge(k_max));
    }
    let mut out = Vec::with_capacity(k_max);
    let mut prev_val: Option<u32> = Some(0);
    for k in 1..=k_max {
        let mut g = BigInt::zero();
        for rows in combinations(a.rows(), k) {
            for cols in combinations(a.cols(), k) {
                let sub: Vec<Vec<BigInt>> = rows
                    .iter()
                    .map(|&i| cols.iter().map(|&j| BigInt::from(a.get(i, j))).collect())
                    .collect();
                g = g.gcd(&det_bigint(sub));
            }
        }
        let val = valuation_bigint(&g.abs(), p);
        out.push(match (val, prev_val) {
            (Some(v), Some(pv)) => Some(v - pv),
            _ => None,
        });
        prev_val = val;
    }
    Ok(out)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}
