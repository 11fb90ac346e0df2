//! Young diagrams, semi-standard tableaux and module isomorphism classes.
//!
//! Tableaux here use the decreasing convention: labels weakly decrease along
//! rows and strictly decrease down columns. A label records the exposure
//! index at which a box first appeared, so large labels are early boxes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("parts must be positive and weakly decreasing: {0:?}")]
    NotAPartition(Vec<u32>),
    #[error("could not parse partition from {0:?}")]
    Parse(String),
    #[error("could not parse module class from {0:?}")]
    ParseClass(String),
    #[error("chain must end in the empty diagram at index n")]
    ChainStart,
    #[error("chain is not nested between steps {later} and {earlier}")]
    ChainNotNested { later: usize, earlier: usize },
    #[error("column {column} grows by {growth} boxes at step {step}")]
    ColumnJump { step: usize, column: usize, growth: u32 },
    #[error("enumeration limited to |shape| <= 12 and n <= 8 (got |shape| = {size}, n = {n})")]
    TooLarge { size: u32, n: u32 },
    #[error("tableau rows do not match shape {0}")]
    ShapeMismatch(Partition),
}

/// A partition `λ_1 ≥ λ_2 ≥ … ≥ λ_t > 0`, stored densely.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self, PartitionError> {
        let ok = parts.iter().all(|&x| x > 0) && parts.windows(2).all(|w| w[0] >= w[1]);
        if ok {
            Ok(Partition(parts))
        } else {
            Err(PartitionError::NotAPartition(parts))
        }
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    /// Sorts, drops zeros. Handy when collecting SNF exponents.
    pub fn from_unsorted<I: IntoIterator<Item = u32>>(parts: I) -> Self {
        let mut v: Vec<u32> = parts.into_iter().filter(|&x| x > 0).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        Partition(v)
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of boxes.
    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn largest_part(&self) -> u32 {
        self.0.first().copied().unwrap_or(0)
    }

    /// Length of row `i` (0-based), zero past the last row.
    pub fn row_length(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    /// Length of column `j` (1-based), i.e. the number of parts `≥ j`.
    /// This is the `j`-rank of the corresponding p-group.
    pub fn column_length(&self, j: u32) -> u32 {
        self.0.iter().take_while(|&&x| x >= j).count() as u32
    }

    pub fn conjugate(&self) -> Partition {
        Partition((1..=self.largest_part()).map(|j| self.column_length(j)).collect())
    }

    /// Entry sum of the minimal semi-standard tableau of this shape.
    pub fn weight(&self) -> u64 {
        self.conjugate()
            .0
            .iter()
            .map(|&c| u64::from(c) * u64::from(c + 1) / 2)
            .sum()
    }

    /// Clip every part at `e`.
    pub fn cap(&self, e: u32) -> Partition {
        Partition(self.0.iter().map(|&x| x.min(e)).collect())
    }

    /// `self ⊆ other` as Young diagrams.
    pub fn is_nested_in(&self, other: &Partition) -> bool {
        self.len() <= other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Multiplicity of each distinct part, in decreasing part order.
    pub fn multiplicities(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        for &x in &self.0 {
            match out.last_mut() {
                Some((v, m)) if *v == x => *m += 1,
                _ => out.push((x, 1)),
            }
        }
        out
    }

    /// All partitions with exactly `size` boxes, in reverse lexicographic order.
    pub fn all_of_size(size: u32) -> Vec<Partition> {
        fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
            if rem == 0 {
                out.push(Partition(cur.clone()));
                return;
            }
            for x in (1..=rem.min(max)).rev() {
                cur.push(x);
                rec(rem - x, x, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(size, size, &mut Vec::new(), &mut out);
        out
    }

    /// All partitions with at most `size` boxes.
    pub fn all_up_to_size(size: u32) -> Vec<Partition> {
        (0..=size).flat_map(Partition::all_of_size).collect()
    }
}

pub fn conjugate(lambda: &Partition) -> Partition {
    lambda.conjugate()
}

pub fn weight(lambda: &Partition) -> u64 {
    lambda.weight()
}

pub fn cap(lambda: &Partition, e: u32) -> Partition {
    lambda.cap(e)
}

/// True iff `mu ⊆ lambda`.
pub fn is_nested(mu: &Partition, lambda: &Partition) -> bool {
    mu.is_nested_in(lambda)
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let s: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        f.write_str(&s.join(","))
    }
}

impl FromStr for Partition {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() || t == "0" {
            return Ok(Partition::empty());
        }
        let parts = t
            .split(',')
            .map(|x| x.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PartitionError::Parse(s.to_string()))?;
        Partition::new(parts).map_err(|_| PartitionError::Parse(s.to_string()))
    }
}

/// A filling of a Young diagram, stored row by row.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tableau {
    shape: Partition,
    rows: Vec<Vec<u32>>,
}

impl Tableau {
    pub fn new(shape: Partition, rows: Vec<Vec<u32>>) -> Result<Self, PartitionError> {
        let fits = rows.len() == shape.len()
            && rows.iter().zip(shape.parts()).all(|(r, &l)| r.len() == l as usize);
        if !fits {
            return Err(PartitionError::ShapeMismatch(shape));
        }
        Ok(Tableau { shape, rows })
    }

    pub fn empty() -> Self {
        Tableau { shape: Partition::empty(), rows: Vec::new() }
    }

    pub fn shape(&self) -> &Partition {
        &self.shape
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Label of box `(row, col)`, both 0-based.
    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.rows.get(row).and_then(|r| r.get(col)).copied()
    }

    /// Weakly decreasing along rows, strictly decreasing down columns.
    pub fn is_semistandard(&self) -> bool {
        for (i, row) in self.rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0] < w[1]) {
                return false;
            }
            if i > 0 {
                let above = &self.rows[i - 1];
                if row.iter().zip(above).any(|(b, a)| b >= a) {
                    return false;
                }
            }
        }
        true
    }

    /// True iff every label lies in `lo..=hi`.
    pub fn labels_within(&self, lo: u32, hi: u32) -> bool {
        self.rows.iter().flatten().all(|&x| (lo..=hi).contains(&x))
    }

    pub fn entry_sum(&self) -> u64 {
        self.rows.iter().flatten().map(|&x| u64::from(x)).sum()
    }

    /// Diagram of boxes whose label is at least `level`.
    pub fn sub_diagram(&self, level: u32) -> Partition {
        Partition::from_unsorted(
            self.rows.iter().map(|r| r.iter().take_while(|&&x| x >= level).count() as u32),
        )
    }

    /// Inverse of [`tableau_from_chain`]: element `ℓ` of the result is the
    /// sub-diagram above `ℓ`, for `ℓ = 0..=n`.
    pub fn to_chain(&self, n: usize) -> Vec<Partition> {
        (0..=n).map(|l| self.sub_diagram(l as u32)).collect()
    }
}

/// The minimal semi-standard tableau of shape `λ` over letters `1..`:
/// a column of length `c` reads `c, c-1, …, 1` from top to bottom.
pub fn minimal_tableau(lambda: &Partition) -> Tableau {
    let cols = lambda.conjugate();
    let rows = lambda
        .parts()
        .iter()
        .enumerate()
        .map(|(i, &len)| (0..len).map(|j| cols.parts()[j as usize] - i as u32).collect())
        .collect();
    Tableau { shape: lambda.clone(), rows }
}

/// Builds the tableau recording when each box of a nested chain appeared.
///
/// `chain[ℓ]` is the diagram `T_ℓ` for `ℓ = 0..=n`, with `chain[n]` empty.
/// A box gets label `ℓ` when it lies in `chain[ℓ]` but not in `chain[ℓ+1]`.
pub fn tableau_from_chain(chain: &[Partition]) -> Result<Tableau, PartitionError> {
    let n = chain.len().checked_sub(1).ok_or(PartitionError::ChainStart)?;
    if !chain[n].is_empty() {
        return Err(PartitionError::ChainStart);
    }
    for l in (1..=n).rev() {
        let (later, earlier) = (&chain[l], &chain[l - 1]);
        if !later.is_nested_in(earlier) {
            return Err(PartitionError::ChainNotNested { later: l, earlier: l - 1 });
        }
        for j in 1..=earlier.largest_part() {
            let growth = earlier.column_length(j) - later.column_length(j);
            if growth > 1 {
                return Err(PartitionError::ColumnJump { step: l, column: j as usize, growth });
            }
        }
    }
    let shape = chain[0].clone();
    let mut rows: Vec<Vec<u32>> = shape.parts().iter().map(|&len| vec![0; len as usize]).collect();
    for l in (0..n).rev() {
        let (prev, cur) = (&chain[l + 1], &chain[l]);
        for (i, row) in rows.iter_mut().enumerate() {
            for cell in row.iter_mut().take(cur.row_length(i) as usize).skip(prev.row_length(i) as usize) {
                *cell = l as u32;
            }
        }
    }
    Ok(Tableau { shape, rows })
}

/// Number of semi-standard tableaux of shape `λ` with letters from `[n]`,
/// via the hook-content formula `∏ (n + j − i) / hook(i, j)`.
pub fn count_ssyt(lambda: &Partition, n: u32) -> BigUint {
    let cols = lambda.conjugate();
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for (i, &len) in lambda.parts().iter().enumerate() {
        for j in 0..len as usize {
            let content = n as i64 + j as i64 - i as i64;
            if content <= 0 {
                return BigUint::zero();
            }
            let hook = (len as usize - j) + (cols.parts()[j] as usize - i) - 1;
            num *= content as u64;
            den *= hook as u64;
        }
    }
    num / den
}

/// Lists every semi-standard tableau of shape `λ` over `[n]` (brute force).
pub fn enumerate_ssyt(lambda: &Partition, n: u32) -> Result<Vec<Tableau>, PartitionError> {
    if lambda.size() > 12 || n > 8 {
        return Err(PartitionError::TooLarge { size: lambda.size(), n });
    }
    let cells: Vec<(usize, usize)> = lambda
        .parts()
        .iter()
        .enumerate()
        .flat_map(|(i, &len)| (0..len as usize).map(move |j| (i, j)))
        .collect();
    let mut rows: Vec<Vec<u32>> = lambda.parts().iter().map(|&l| vec![0; l as usize]).collect();
    let mut out = Vec::new();

    fn fill(
        k: usize,
        cells: &[(usize, usize)],
        rows: &mut Vec<Vec<u32>>,
        n: u32,
        shape: &Partition,
        out: &mut Vec<Tableau>,
    ) {
        if k == cells.len() {
            out.push(Tableau { shape: shape.clone(), rows: rows.clone() });
            return;
        }
        let (i, j) = cells[k];
        let mut hi = n;
        if j > 0 {
            hi = hi.min(rows[i][j - 1]);
        }
        if i > 0 {
            hi = hi.min(rows[i - 1][j] - 1);
        }
        for v in 1..=hi {
            rows[i][j] = v;
            fill(k + 1, cells, rows, n, shape, out);
        }
    }

    fill(0, &cells, &mut rows, n, lambda, &mut out);
    Ok(out)
}

/// Isomorphism class of a finite module over `Z/NZ` or a finite `Z_p`-module:
/// one diagram per prime. Empty diagrams are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModuleClass {
    components: BTreeMap<u64, Partition>,
}

static EMPTY_PARTITION: Partition = Partition(Vec::new());

impl ModuleClass {
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn single(p: u64, lambda: Partition) -> Self {
        let mut c = Self::default();
        c.insert(p, lambda);
        c
    }

    pub fn insert(&mut self, p: u64, lambda: Partition) {
        if lambda.is_empty() {
            self.components.remove(&p);
        } else {
            self.components.insert(p, lambda);
        }
    }

    pub fn component(&self, p: u64) -> &Partition {
        self.components.get(&p).unwrap_or(&EMPTY_PARTITION)
    }

    pub fn is_trivial(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (u64, &Partition)> {
        self.components.iter().map(|(&p, l)| (p, l))
    }

    /// Union of classes supported on disjoint primes (CRT recombination).
    /// Components for a prime present in both are taken from `other`.
    pub fn combine(&self, other: &ModuleClass) -> ModuleClass {
        let mut out = self.clone();
        for (p, l) in other.components() {
            out.insert(p, l.clone());
        }
        out
    }

    /// Group order `∏ p^{|λ_p|}`.
    pub fn order(&self) -> BigUint {
        self.components
            .iter()
            .fold(BigUint::one(), |acc, (&p, l)| acc * BigUint::from(p).pow(l.size()))
    }
}

impl fmt::Display for ModuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("0");
        }
        let items: Vec<String> = self.components.iter().map(|(p, l)| format!("{p}:{l}")).collect();
        f.write_str(&items.join(";"))
    }
}

impl FromStr for ModuleClass {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let mut out = ModuleClass::trivial();
        if t.is_empty() || t == "0" {
            return Ok(out);
        }
        for item in t.split(';') {
            let (p, parts) = item.split_once(':').ok_or_else(|| PartitionError::ParseClass(s.to_string()))?;
            let p: u64 = p.trim().parse().map_err(|_| PartitionError::ParseClass(s.to_string()))?;
            if p < 2 || out.components.contains_key(&p) {
                return Err(PartitionError::ParseClass(s.to_string()));
            }
            out.insert(p, parts.parse()?);
        }
        Ok(out)
    }
}
