//! Column exposure: partial cokernels `T_ℓ` of `Z_p^n / ⟨X_{ℓ+1}, …, X_n⟩`,
//! the tableau they trace out, and the membership events `G_{a,b}`, `E_{j,t}`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::modarith::{
    cokernel_partition, saturation_profile, IntMatrix, ModArithError, PrecisionPolicy, SaturationFrame,
};
use crate::partitions::{tableau_from_chain, Partition, PartitionError, Tableau};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExposureError {
    #[error(transparent)]
    Ring(#[from] ModArithError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("precision p^{available} cannot decide membership (need p^{needed})")]
    PrecisionTooLow { needed: u32, available: u32 },
    #[error("invalid index set: {0}")]
    BadIndexSet(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Exponent `b` of `W[p^b]`; `Infinite` is the full saturation `W[∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(b) => write!(f, "{b}"),
            Bound::Infinite => f.write_str("inf"),
        }
    }
}

/// Index pairs `(a, b)` of `φ_F(W) = ⋂ p^a R^n + W[p^b]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnlargedIndexSet {
    pairs: Vec<(u32, Bound)>,
}

impl EnlargedIndexSet {
    pub fn new(mut pairs: Vec<(u32, Bound)>) -> Result<Self, ExposureError> {
        if pairs.is_empty() {
            return Err(ExposureError::BadIndexSet("empty".into()));
        }
        if pairs.iter().any(|&(a, _)| a == 0) {
            return Err(ExposureError::BadIndexSet("a must be at least 1".into()));
        }
        pairs.sort();
        pairs.dedup();
        Ok(EnlargedIndexSet { pairs })
    }

    pub fn pairs(&self) -> &[(u32, Bound)] {
        &self.pairs
    }

    /// Largest `a + b` over pairs with finite `b`, or `a` alone for `b = ∞`.
    fn demand(&self) -> u32 {
        self.pairs
            .iter()
            .map(|&(a, b)| match b {
                Bound::Finite(b) => a + b,
                Bound::Infinite => a,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Frame coordinates of one vector `x` relative to one submodule `W`,
/// answering `x ∈ p^a R^n + W[p^b]` for `a + b` up to the frame's budget.
#[derive(Clone, Debug)]
pub struct MembershipOracle {
    frame: SaturationFrame,
    vals: Vec<u32>,
}

impl MembershipOracle {
    /// `demand` bounds the `a + b` (or `a` for `b = ∞`) that will be queried.
    pub fn new(
        x: &[i64],
        w_basis: &IntMatrix,
        p: u64,
        demand: u32,
        policy: PrecisionPolicy,
    ) -> Result<Self, ExposureError> {
        if x.len() != w_basis.rows() {
            return Err(ExposureError::Dimension(format!(
                "vector of length {} against W in Z^{}",
                x.len(),
                w_basis.rows()
            )));
        }
        let mut frame = saturation_profile(w_basis, p, demand.max(1), policy)?;
        let needed = demand + frame.max_pivot_exponent();
        if frame.precision < needed {
            frame = saturation_profile(w_basis, p, needed, policy)?;
        }
        let vals = frame.coordinate_valuations(x);
        Ok(MembershipOracle { frame, vals })
    }

    pub fn frame(&self) -> &SaturationFrame {
        &self.frame
    }

    /// `G_{a,b}`: is `x ∈ p^a R^n + W[p^b]`?
    pub fn g(&self, a: u32, b: Bound) -> Result<bool, ExposureError> {
        let needed = match b {
            Bound::Finite(b) => a + b,
            Bound::Infinite => a,
        } + self.frame.max_pivot_exponent();
        if needed > self.frame.precision {
            return Err(ExposureError::PrecisionTooLow { needed, available: self.frame.precision });
        }
        Ok(self.frame.pivots.iter().zip(&self.vals).all(|(pivot, &v)| {
            let threshold = match (pivot, b) {
                (None, _) => a,
                (Some(_), Bound::Infinite) => 0,
                (Some(d), Bound::Finite(b)) => a.min(d.saturating_sub(b)),
            };
            v >= threshold
        }))
    }

    /// `E_{j,0} = G_{j,0}` and `E_{j,t} = G_{j−t,t} ∖ G_{j−t,t−1}` for `1 ≤ t < j`.
    pub fn event(&self, j: u32, t: u32) -> Result<bool, ExposureError> {
        if t == 0 {
            return self.g(j, Bound::Finite(0));
        }
        if t >= j {
            return Ok(false);
        }
        Ok(self.g(j - t, Bound::Finite(t))? && !self.g(j - t, Bound::Finite(t - 1))?)
    }

    pub fn contains(&self, f: &EnlargedIndexSet) -> Result<bool, ExposureError> {
        for &(a, b) in f.pairs() {
            if !self.g(a, b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All `(j, t)` with `E_{j,t}`, `j ≤ jmax`.
    pub fn events(&self, jmax: u32) -> Result<Vec<(u32, u32)>, ExposureError> {
        let mut out = Vec::new();
        for j in 1..=jmax {
            for t in 0..j {
                if self.event(j, t)? {
                    out.push((j, t));
                }
            }
        }
        Ok(out)
    }
}

/// Is `x ∈ φ_F(W)`, with `W` the column span of `w_basis` over `Z_p`?
pub fn membership_enlarged(
    x: &[i64],
    w_basis: &IntMatrix,
    f: &EnlargedIndexSet,
    p: u64,
    policy: PrecisionPolicy,
) -> Result<bool, ExposureError> {
    MembershipOracle::new(x, w_basis, p, f.demand(), policy)?.contains(f)
}

/// Partial cokernels of one matrix, indexed by `ℓ = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureTrace {
    pub p: u64,
    pub n: usize,
    /// `partitions[ℓ]` is the torsion diagram `T_ℓ`; `partitions[n]` is empty.
    pub partitions: Vec<Partition>,
    /// Free rank of `Z_p^n / W_ℓ`.
    pub free_ranks: Vec<usize>,
    /// `torsion_events[ℓ]` for `ℓ ≥ 1` flags `X_ℓ ∈ W_ℓ[∞]`; entry 0 is unused.
    pub torsion_events: Vec<bool>,
    /// Recording tableau; `None` only if a torsion event broke the chain.
    pub tableau: Option<Tableau>,
    pub matrix: IntMatrix,
    pub policy: PrecisionPolicy,
}

/// Exposes `X_n, X_{n−1}, …, X_1` and records the torsion of each quotient.
pub fn run_exposure(a: &IntMatrix, p: u64, policy: PrecisionPolicy) -> Result<ExposureTrace, ExposureError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(ExposureError::Dimension(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let mut partitions = Vec::with_capacity(n + 1);
    let mut free_ranks = Vec::with_capacity(n + 1);
    for l in 0..=n {
        let cp = cokernel_partition(&a.column_block(l, n), p, policy)?;
        partitions.push(cp.torsion);
        free_ranks.push(cp.free_rank);
    }
    let mut torsion_events = vec![false; n + 1];
    for l in 1..=n {
        torsion_events[l] = free_ranks[l - 1] == free_ranks[l];
    }
    let tableau = if torsion_events.iter().any(|&t| t) {
        tableau_from_chain(&partitions).ok()
    } else {
        Some(tableau_from_chain(&partitions)?)
    };
    Ok(ExposureTrace { p, n, partitions, free_ranks, torsion_events, tableau, matrix: a.clone(), policy })
}

impl ExposureTrace {
    pub fn has_torsion_event(&self) -> bool {
        self.torsion_events.iter().any(|&t| t)
    }

    /// Default `jmax`: largest part of `T_0` plus 2.
    pub fn default_jmax(&self) -> u32 {
        self.partitions[0].largest_part() + 2
    }

    /// `X_ℓ` as a vector, `1 ≤ ℓ ≤ n`.
    pub fn column(&self, l: usize) -> Vec<i64> {
        self.matrix.column(l - 1)
    }

    /// Basis of `W_ℓ = ⟨X_{ℓ+1}, …, X_n⟩`.
    pub fn w_basis(&self, l: usize) -> IntMatrix {
        self.matrix.column_block(l, self.n)
    }

    pub fn oracle(&self, l: usize, demand: u32) -> Result<MembershipOracle, ExposureError> {
        if l == 0 || l > self.n {
            return Err(ExposureError::Dimension(format!("step {l} outside 1..={}", self.n)));
        }
        MembershipOracle::new(&self.column(l), &self.w_basis(l), self.p, demand, self.policy)
    }

    /// Structural checks on steps without a torsion event: nesting, column
    /// growth at most one, and a semi-standard tableau whose sub-diagrams
    /// reproduce the chain. Returns human-readable violations.
    pub fn structural_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in 1..=self.n {
            if self.torsion_events[l] {
                continue;
            }
            let (later, earlier) = (&self.partitions[l], &self.partitions[l - 1]);
            if !later.is_nested_in(earlier) {
                out.push(format!("step {l}: T_{l} = {later} not inside T_{} = {earlier}", l - 1));
            }
            for j in 1..=earlier.largest_part() {
                if earlier.column_length(j) > later.column_length(j) + 1 {
                    out.push(format!("step {l}: column {j} grew by more than one"));
                }
            }
        }
        if !self.has_torsion_event() {
            match &self.tableau {
                None => out.push("no tableau".into()),
                Some(t) => {
                    if !t.is_semistandard() {
                        out.push("tableau not semi-standard".into());
                    }
                    for l in 0..=self.n {
                        if t.sub_diagram(l as u32) != self.partitions[l] {
                            out.push(format!("sub-diagram at {l} differs from T_{l}"));
                        }
                    }
                }
            }
        }
        out
    }
}

/// `(j, t)` pairs with `E_{j,t}` at step `ℓ` of the trace.
pub fn detect_events(trace: &ExposureTrace, l: usize, jmax: u32) -> Result<Vec<(u32, u32)>, ExposureError> {
    if jmax == 0 {
        return Err(ExposureError::BadIndexSet("jmax must be at least 1".into()));
    }
    trace.oracle(l, jmax)?.events(jmax)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EventViolation {
    pub step: usize,
    pub column: u32,
    pub grew: bool,
    /// The `t` with `E_{column,t}`; more than one breaks disjointness.
    pub fired: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub checked_steps: usize,
    pub skipped_torsion_steps: Vec<usize>,
    pub violations: Vec<EventViolation>,
}

/// Column `j` grows at step `ℓ` iff some `E_{j,t}` holds, checked for `j ≤ jmax`
/// on every step without a torsion event.
pub fn verify_rank_event_equivalence(trace: &ExposureTrace, jmax: u32) -> Result<EquivalenceReport, ExposureError> {
    let mut report = EquivalenceReport::default();
    for l in 1..=trace.n {
        if trace.torsion_events[l] {
            report.skipped_torsion_steps.push(l);
            continue;
        }
        report.checked_steps += 1;
        let events = detect_events(trace, l, jmax)?;
        for j in 1..=jmax {
            let grew = trace.partitions[l - 1].column_length(j) == trace.partitions[l].column_length(j) + 1;
            let fired: Vec<u32> = events.iter().filter(|e| e.0 == j).map(|e| e.1).collect();
            if grew == fired.is_empty() || fired.len() > 1 {
                report.violations.push(EventViolation { step: l, column: j, grew, fired });
            }
        }
    }
    Ok(report)
}

/// Evaluates `¬G_{|S|+1,∞} ∩ ⋂_k E_{η(k), η(k)−k}` at step `ℓ`, where `η`
/// enumerates the columns `S` in which `H` gains a box between levels `ℓ` and `ℓ−1`.
pub fn condition_class(trace: &ExposureTrace, h: &Tableau, l: usize) -> Result<bool, ExposureError> {
    let upper = h.sub_diagram(l as u32);
    let lower = h.sub_diagram(l as u32 - 1);
    let s: Vec<u32> = (1..=lower.largest_part())
        .filter(|&k| lower.column_length(k) == upper.column_length(k) + 1)
        .collect();
    let size = s.len() as u32;
    let demand = s.iter().copied().max().unwrap_or(0).max(size + 1);
    let oracle = trace.oracle(l, demand)?;
    if oracle.g(size + 1, Bound::Infinite)? {
        return Ok(false);
    }
    for (k, &eta) in (1..).zip(&s) {
        if !oracle.event(eta, eta - k)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub checked_steps: usize,
    pub disagreements: Vec<usize>,
}

/// On steps with `T_ℓ = H_ℓ` and no torsion event, compares [`condition_class`]
/// with the direct test `T_{ℓ−1} = H_{ℓ−1}`.
pub fn verify_condition_class(trace: &ExposureTrace, h: &Tableau) -> Result<ConditionReport, ExposureError> {
    let mut report = ConditionReport::default();
    for l in 1..=trace.n {
        if trace.torsion_events[l] || trace.partitions[l] != h.sub_diagram(l as u32) {
            continue;
        }
        report.checked_steps += 1;
        let direct = trace.partitions[l - 1] == h.sub_diagram(l as u32 - 1);
        if condition_class(trace, h, l)? != direct {
            report.disagreements.push(l);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableauJson {
    pub shape: String,
    pub labels: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepJson {
    pub step: usize,
    pub torsion: bool,
    pub events: Vec<(u32, u32)>,
}

/// Serializable view of a trace; the chain runs from `T_n` down to `T_0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceDocument {
    pub p: u64,
    pub n: usize,
    pub chain: Vec<String>,
    pub tableau: Option<TableauJson>,
    pub events: Vec<StepJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceReport>,
}

pub fn trace_document(trace: &ExposureTrace, jmax: u32) -> Result<TraceDocument, ExposureError> {
    let mut events = Vec::with_capacity(trace.n);
    for l in (1..=trace.n).rev() {
        events.push(StepJson { step: l, torsion: trace.torsion_events[l], events: detect_events(trace, l, jmax)? });
    }
    Ok(TraceDocument {
        p: trace.p,
        n: trace.n,
        chain: trace.partitions.iter().rev().map(|t| t.to_string()).collect(),
        tableau: trace
            .tableau
            .as_ref()
            .map(|t| TableauJson { shape: t.shape().to_string(), labels: t.rows().to_vec() }),
        events,
        equivalence: None,
    })
}

pub fn trace_json(trace: &ExposureTrace, jmax: u32) -> Result<String, ExposureError> {
    Ok(serde_json::to_string_pretty(&trace_document(trace, jmax)?).expect("trace serialises"))
}
