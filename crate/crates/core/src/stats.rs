//! Empirical cokernel distributions, comparison with reference laws, and
//! the parallel Monte Carlo driver that produces them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::measures::{ReferenceDistribution, RingDescriptor};
use crate::modarith::{cokernel_class_with, Cokernel, ModArithError, PrecisionPolicy, RingSpec};
use crate::partitions::ModuleClass;
use crate::sampler::{min_entropy, sample_matrix, EntryDistribution, SamplerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("rings differ: {left:?} vs {right:?}")]
    RingMismatch { left: RingDescriptor, right: RingDescriptor },
    #[error("need at least 3 points with positive distance, got {0}")]
    NonPositiveTV(usize),
    #[error("trial {index}: {source}")]
    Simulation { index: u64, source: ModArithError },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Counts of cokernel classes over a batch of trials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    pub trials: u64,
    pub counts: BTreeMap<ModuleClass, u64>,
    pub infinite_count: u64,
    pub ring: Option<RingDescriptor>,
    pub dist: Option<String>,
    pub seed: Option<u64>,
}

impl EmpiricalDistribution {
    pub fn record(&mut self, result: &Cokernel) {
        self.trials += 1;
        match result {
            Cokernel::Finite(c) => *self.counts.entry(c.clone()).or_insert(0) += 1,
            Cokernel::Infinite => self.infinite_count += 1,
        }
    }

    /// Adds the counts of `other`; metadata must agree where both set it.
    pub fn merge(&mut self, other: &EmpiricalDistribution) -> Result<(), StatsError> {
        if let (Some(a), Some(b)) = (&self.ring, &other.ring) {
            if a != b {
                return Err(StatsError::RingMismatch { left: a.clone(), right: b.clone() });
            }
        }
        self.trials += other.trials;
        self.infinite_count += other.infinite_count;
        for (c, k) in &other.counts {
            *self.counts.entry(c.clone()).or_insert(0) += k;
        }
        if self.ring.is_none() {
            self.ring.clone_from(&other.ring);
        }
        Ok(())
    }

    pub fn count(&self, class: &ModuleClass) -> u64 {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn probability(&self, class: &ModuleClass) -> f64 {
        self.count(class) as f64 / self.trials as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("tally serialises")
    }

    pub fn document(&self) -> EmpiricalJson {
        EmpiricalJson {
            ring: self.ring.clone(),
            dist: self.dist.clone(),
            seed: self.seed,
            trials: self.trials,
            infinite: self.infinite_count,
            counts: self
                .counts
                .iter()
                .map(|(c, &k)| CountJson { class: c.to_string(), count: k, prob: k as f64 / self.trials as f64 })
                .collect(),
        }
    }

    /// `class,count,prob` rows, infinite cokernels last as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count,prob\n");
        for row in self.document().counts {
            out.push_str(&format!("{},{},{}\n", row.class, row.count, row.prob));
        }
        if self.infinite_count > 0 {
            out.push_str(&format!("inf,{},{}\n", self.infinite_count, self.infinite_count as f64 / self.trials as f64));
        }
        out
    }
}

#[derive(Serialize)]
pub struct CountJson {
    pub class: String,
    pub count: u64,
    pub prob: f64,
}

#[derive(Serialize)]
pub struct EmpiricalJson {
    pub ring: Option<RingDescriptor>,
    pub dist: Option<String>,
    pub seed: Option<u64>,
    pub trials: u64,
    pub infinite: u64,
    pub counts: Vec<CountJson>,
}

pub fn tally(results: &[Cokernel]) -> Result<EmpiricalDistribution, StatsError> {
    if results.is_empty() {
        return Err(StatsError::EmptyBatch);
    }
    let mut out = EmpiricalDistribution::default();
    for r in results {
        out.record(r);
    }
    Ok(out)
}

/// `½ [Σ_listed |p̂ − p_ref| + |p̂_unlisted − tail|]`; infinite cokernels are unlisted.
pub fn tv_distance(emp: &EmpiricalDistribution, reference: &ReferenceDistribution) -> Result<f64, StatsError> {
    if let Some(ring) = &emp.ring {
        if !ring.compatible(&reference.ring) {
            return Err(StatsError::RingMismatch { left: ring.clone(), right: reference.ring.clone() });
        }
    }
    if emp.trials == 0 {
        return Err(StatsError::EmptyBatch);
    }
    let mut listed_emp = 0.0;
    let mut sum = 0.0;
    for (class, p_ref) in &reference.entries {
        let p_hat = emp.probability(class);
        listed_emp += p_hat;
        sum += (p_hat - p_ref).abs();
    }
    sum += ((1.0 - listed_emp).max(0.0) - reference.tail_mass).abs();
    Ok((sum / 2.0).clamp(0.0, 1.0))
}

/// Wilson score interval for `count` successes out of `trials`.
pub fn wilson_interval(count: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the exact interval always contains p; clamping only absorbs round-off
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// z = 1.96: two-sided 95%.
pub const Z95: f64 = 1.959963984540054;
/// z = 2.5758: two-sided 99%.
pub const Z99: f64 = 2.5758293035489004;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points with `tv ≤ 0`, left out of the fit.
    pub dropped: Vec<f64>,
}

/// Least-squares line through `(n, ln tv)`.
pub fn decay_fit(points: &[(f64, f64)]) -> Result<DecayFit, StatsError> {
    let dropped: Vec<f64> = points.iter().filter(|p| !(p.1 > 0.0)).map(|p| p.0).collect();
    let kept: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(n, tv)| (n, tv.ln())).collect();
    if kept.len() < 3 {
        return Err(StatsError::NonPositiveTV(kept.len()));
    }
    let k = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / k;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Invalid("all points share the same n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = kept.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = kept.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { slope, intercept, r2, dropped })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassRow {
    pub class: String,
    pub count: u64,
    pub emp_prob: f64,
    pub ref_prob: f64,
    pub lo: f64,
    pub hi: f64,
    /// `None` when the reference probability is 0 or 1.
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ring: RingDescriptor,
    pub dist: Option<String>,
    pub seed: Option<u64>,
    pub trials: u64,
    pub interval_z: f64,
    pub rows: Vec<ClassRow>,
    /// Everything outside the listed classes, including infinite cokernels,
    /// set against the reference tail mass.
    pub unlisted: ClassRow,
    pub tv_distance: f64,
    pub tail_note: String,
}

fn row(class: String, count: u64, trials: u64, ref_prob: f64, z: f64) -> ClassRow {
    let emp_prob = count as f64 / trials as f64;
    let (lo, hi) = wilson_interval(count, trials, z);
    let sd = (ref_prob * (1.0 - ref_prob) / trials as f64).sqrt();
    ClassRow { class, count, emp_prob, ref_prob, lo, hi, z: (sd > 0.0).then(|| (emp_prob - ref_prob) / sd) }
}

pub fn compare(
    emp: &EmpiricalDistribution,
    reference: &ReferenceDistribution,
    z: f64,
) -> Result<ComparisonReport, StatsError> {
    let tv = tv_distance(emp, reference)?;
    let mut listed = 0u64;
    let rows: Vec<ClassRow> = reference
        .entries
        .iter()
        .map(|(c, p)| {
            let k = emp.count(c);
            listed += k;
            row(c.to_string(), k, emp.trials, *p, z)
        })
        .collect();
    let unlisted = row("other".into(), emp.trials - listed, emp.trials, reference.tail_mass, z);
    Ok(ComparisonReport {
        ring: reference.ring.clone(),
        dist: emp.dist.clone(),
        seed: emp.seed,
        trials: emp.trials,
        interval_z: z,
        rows,
        unlisted,
        tv_distance: tv,
        tail_note: format!(
            "classes outside the {} listed ones are pooled; reference tail mass {:.3e}",
            reference.entries.len(),
            reference.tail_mass
        ),
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub const CSV_HEADER: &'static str = "class,count,emp_prob,ref_prob,lo,hi,z";

    /// Body rows (no header), the pooled row last.
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .chain(std::iter::once(&self.unlisted))
            .map(|r| {
                let z = r.z.map(|z| z.to_string()).unwrap_or_default();
                format!("{},{},{},{},{},{},{}", r.class, r.count, r.emp_prob, r.ref_prob, r.lo, r.hi, z)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in self.csv_rows() {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }
}

pub fn ring_descriptor(ring: &RingSpec, n: usize) -> RingDescriptor {
    match ring {
        RingSpec::Padic { p } => RingDescriptor::Padic { p: *p, n: n as u32 },
        RingSpec::Modular { .. } => {
            RingDescriptor::Modular { modulus: ring.modulus().expect("modular ring"), n: n as u32 }
        }
    }
}

/// Cokernels of `trials` sampled `n × n` matrices, in parallel on the
/// current rayon pool. Counts do not depend on the thread count; on failure
/// the lowest failing trial index is reported.
pub fn simulate(
    xi: &EntryDistribution,
    ring: &RingSpec,
    n: usize,
    trials: u64,
    seed: u64,
    policy: PrecisionPolicy,
) -> Result<EmpiricalDistribution, StatsError> {
    if trials == 0 {
        return Err(StatsError::EmptyBatch);
    }
    if n == 0 {
        return Err(StatsError::Invalid("n must be positive".into()));
    }
    min_entropy(xi, &ring.primes())?;
    type Shard = Result<EmpiricalDistribution, (u64, ModArithError)>;
    let join = |a: Shard, b: Shard| -> Shard {
        match (a, b) {
            (Ok(mut x), Ok(y)) => {
                x.merge(&y).expect("shards share no ring");
                Ok(x)
            }
            (Err(e), Err(f)) => Err(if e.0 <= f.0 { e } else { f }),
            (Err(e), _) | (_, Err(e)) => Err(e),
        }
    };
    let shard = (0..trials)
        .into_par_iter()
        .fold(
            || Ok(EmpiricalDistribution::default()),
            |acc: Shard, i| {
                let result = cokernel_class_with(&sample_matrix(xi, n, seed, i), ring, policy);
                match (acc, result) {
                    (Ok(mut t), Ok(c)) => {
                        t.record(&c);
                        Ok(t)
                    }
                    (Err(e), _) => Err(e),
                    (Ok(_), Err(e)) => Err((i, e)),
                }
            },
        )
        .reduce(|| Ok(EmpiricalDistribution::default()), join);
    let mut out = shard.map_err(|(index, source)| StatsError::Simulation { index, source })?;
    out.ring = Some(ring_descriptor(ring, n));
    out.dist = Some(xi.name().to_string());
    out.seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cl_measure;
    use crate::partitions::Partition;

    fn class(s: &str) -> ModuleClass {
        s.parse().unwrap()
    }

    #[test]
    fn tally_examples() {
        let t = tally(&[
            Cokernel::Finite(ModuleClass::trivial()),
            Cokernel::Finite(ModuleClass::trivial()),
            Cokernel::Finite(class("2:1")),
        ])
        .unwrap();
        assert_eq!(t.count(&ModuleClass::trivial()), 2);
        assert_eq!(t.count(&class("2:1")), 1);
        assert_eq!(tally(&[]), Err(StatsError::EmptyBatch));
        let many = vec![Cokernel::Finite(ModuleClass::trivial()); 10_000];
        let t = tally(&many).unwrap();
        assert_eq!(t.counts.len(), 1);
        assert_eq!(t.count(&ModuleClass::trivial()), 10_000);
    }

    #[test]
    fn tv_examples() {
        let p = 2;
        let reference = ReferenceDistribution::cohen_lenstra(p, 8, 1e-12).unwrap();
        let mut emp = tally(&[Cokernel::Finite(ModuleClass::trivial())]).unwrap();
        emp.ring = Some(RingDescriptor::Padic { p, n: 10 });
        let tv = tv_distance(&emp, &reference).unwrap();
        let expected = 1.0 - cl_measure(p, &Partition::empty(), 1e-12).unwrap();
        assert!((tv - expected).abs() < 1e-12, "{tv}");

        let a = ReferenceDistribution {
            ring: RingDescriptor::Padic { p, n: 10 },
            entries: vec![(class("2:1"), 1.0)],
            tail_mass: 0.0,
        };
        assert_eq!(tv_distance(&emp, &a).unwrap(), 1.0);

        let mut wrong = emp.clone();
        wrong.ring = Some(RingDescriptor::Modular { modulus: 4, n: 10 });
        assert!(matches!(tv_distance(&wrong, &reference), Err(StatsError::RingMismatch { .. })));
    }

    #[test]
    fn wilson_examples() {
        assert_eq!(wilson_interval(0, 100, 1.96).0, 0.0);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.404).abs() < 5e-4 && (hi - 0.596).abs() < 5e-4);
        assert_eq!(wilson_interval(100, 100, 1.96).1, 1.0);
    }

    #[test]
    fn decay_examples() {
        let geo: Vec<(f64, f64)> = [4.0, 6.0, 8.0].iter().map(|&n: &f64| (n, 2f64.powf(-n))).collect();
        let fit = decay_fit(&geo).unwrap();
        assert!((fit.slope + 2f64.ln()).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let flat = decay_fit(&[(1.0, 0.3), (2.0, 0.3), (3.0, 0.3)]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(matches!(decay_fit(&[(1.0, 0.3), (2.0, 0.0), (3.0, 0.1)]), Err(StatsError::NonPositiveTV(2))));
        let fit = decay_fit(&[(1.0, 0.5), (2.0, 0.0), (3.0, 0.1), (4.0, 0.05)]).unwrap();
        assert_eq!(fit.dropped, vec![2.0]);
    }

    #[test]
    fn simulation_is_thread_count_independent() {
        let xi: EntryDistribution = "bernoulli:0.5".parse().unwrap();
        let ring = RingSpec::modular(4).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&xi, &ring, 5, 400, 42, PrecisionPolicy::default()).unwrap())
        };
        let one = run(1);
        assert_eq!(one.trials, 400);
        assert_eq!(one, run(3));
        assert_eq!(one.to_json(), run(4).to_json());
    }

    #[test]
    fn simulation_rejects_degenerate_entries() {
        let xi: EntryDistribution = "custom:0=1/2,2=1/2".parse().unwrap();
        let err = simulate(&xi, &RingSpec::padic(2).unwrap(), 3, 10, 0, PrecisionPolicy::default());
        assert!(matches!(err, Err(StatsError::Sampler(SamplerError::DegenerateDistribution { p: 2 }))));
    }

    #[test]
    fn comparison_report_rows() {
        // uniform residues mod 2^6 stand in for Haar entries
        let xi: EntryDistribution = "uniform_mod:64".parse().unwrap();
        let emp = simulate(&xi, &RingSpec::padic(2).unwrap(), 3, 2000, 1, PrecisionPolicy::default()).unwrap();
        let reference = ReferenceDistribution::friedman_washington(2, 3, 3).unwrap();
        let report = compare(&emp, &reference, Z95).unwrap();
        assert_eq!(report.rows.len(), reference.entries.len());
        assert!(report.rows.iter().all(|r| r.lo <= r.emp_prob && r.emp_prob <= r.hi));
        assert!(report.tv_distance < 0.06, "{}", report.tv_distance);
        let csv = report.to_csv();
        assert!(csv.starts_with("class,count,emp_prob,ref_prob,lo,hi,z\n"));
        assert_eq!(csv.lines().count(), reference.entries.len() + 2);
    }
}
