//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cokernel_lab::exposure::{run_exposure, verify_condition_class, verify_rank_event_equivalence};
use cokernel_lab::measures::{cl_measure, corank_distribution, fw_probability, fw_probability_exact, ReferenceDistribution};
use cokernel_lab::modarith::{cokernel_partition, snf_mod_ppow, IntMatrix, PrecisionPolicy, RingSpec};
use cokernel_lab::partitions::{count_ssyt, ModuleClass, Partition, Tableau};
use cokernel_lab::sampler::{sample_matrix, EntryDistribution};
use cokernel_lab::spectral::{
    fourier, kneser_exhaustive, littlewood_offord_gap, spec_sum_inclusion_check, swap_distribution,
    FiniteMeasure, SWAP_GAMMA,
};
use cokernel_lab::stats::{compare, decay_fit, simulate, tv_distance, wilson_interval, Z99};

/// Outcome of one criterion: pass flag plus a one-line summary.
type Outcome = (bool, String);

const POLICY: PrecisionPolicy = PrecisionPolicy { start: 16, ceiling: 4096 };

fn dist(s: &str) -> EntryDistribution {
    s.parse().unwrap()
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let (ok, msg) = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let msg = if in_time {
        format!("{msg}; {:.2}s", took.as_secs_f64())
    } else {
        format!("{msg}; {:.2}s exceeds {:.0}s", took.as_secs_f64(), limit.as_secs_f64())
    };
    (ok && in_time, msg)
}

// ---------------------------------------------------------------- oracles

fn euler_partial(p: f64, from: u32, to: u32) -> f64 {
    (from..=to).map(|i| 1.0 - p.powi(-(i as i32))).product()
}

/// Haar `n×n` over `Z_p`: `|Aut|^{-1} ∏_{i≤n}(1−p^{-i}) ∏_{n−r<i≤n}(1−p^{-i})`, `|Aut| = 1` for
/// the trivial group and `p − 1` for `Z/p`.
fn fw_oracle_small(p: u64, n: u32, lambda: &[u32]) -> f64 {
    let pf = p as f64;
    match lambda {
        [] => euler_partial(pf, 1, n),
        [1] => euler_partial(pf, 1, n) * (1.0 - pf.powi(-(n as i32))) / (pf - 1.0),
        _ => unreachable!(),
    }
}

fn det_i128(rows: &[Vec<i64>]) -> i128 {
    let k = rows.len();
    if k == 0 {
        return 1;
    }
    if k == 1 {
        return rows[0][0] as i128;
    }
    (0..k)
        .map(|j| {
            let minor: Vec<Vec<i64>> = rows[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &x)| x).collect())
                .collect();
            let sign = if j % 2 == 0 { 1 } else { -1 };
            sign * rows[0][j] as i128 * det_i128(&minor)
        })
        .sum()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn vp(mut x: i128, p: i128) -> u32 {
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

/// Elementary divisor exponents from the determinantal divisors, `None` where
/// every k×k minor vanishes.
fn minors_oracle(a: &[Vec<i64>], p: u64) -> Vec<Option<u32>> {
    let n = a.len();
    let mut prev = 0u32;
    let mut out = Vec::new();
    for k in 1..=n {
        let mut g = 0i128;
        for rs in subsets(n, k) {
            for cs in subsets(n, k) {
                let m: Vec<Vec<i64>> = rs.iter().map(|&r| cs.iter().map(|&c| a[r][c]).collect()).collect();
                g = gcd(g, det_i128(&m));
            }
        }
        if g == 0 {
            out.extend(std::iter::repeat_n(None, n - k + 1));
            return out;
        }
        let v = vp(g, p as i128);
        out.push(Some(v - prev));
        prev = v;
    }
    out
}

/// Brute-force semi-standard fillings (rows weakly decreasing, columns strictly
/// decreasing) with letters `1..=n`, reporting count and minimum entry sum.
fn brute_ssyt(lambda: &[u32], n: u32) -> (u64, Option<u64>) {
    let cells: Vec<(usize, usize)> =
        lambda.iter().enumerate().flat_map(|(i, &l)| (0..l as usize).map(move |j| (i, j))).collect();
    let mut grid: Vec<Vec<u32>> = lambda.iter().map(|&l| vec![0; l as usize]).collect();
    let mut count = 0u64;
    let mut best: Option<u64> = None;
    fn go(
        idx: usize,
        cells: &[(usize, usize)],
        grid: &mut Vec<Vec<u32>>,
        n: u32,
        sum: u64,
        count: &mut u64,
        best: &mut Option<u64>,
    ) {
        if idx == cells.len() {
            *count += 1;
            *best = Some(best.map_or(sum, |b| b.min(sum)));
            return;
        }
        let (i, j) = cells[idx];
        for v in 1..=n {
            if j > 0 && v > grid[i][j - 1] {
                continue;
            }
            if i > 0 && v >= grid[i - 1][j] {
                continue;
            }
            grid[i][j] = v;
            go(idx + 1, cells, grid, n, sum + v as u64, count, best);
        }
    }
    go(0, &cells, &mut grid, n, 0, &mut count, &mut best);
    (count, best)
}

fn all_partitions(size: u32, max: u32) -> Vec<Vec<u32>> {
    if size == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in (1..=size.min(max)).rev() {
        for mut rest in all_partitions(size - first, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn dft(masses: &[f64]) -> Vec<(f64, f64)> {
    let m = masses.len();
    (0..m)
        .map(|t| {
            masses.iter().enumerate().fold((0.0, 0.0), |(re, im), (s, &x)| {
                let th = std::f64::consts::TAU * ((s * t) % m) as f64 / m as f64;
                (re + x * th.cos(), im + x * th.sin())
            })
        })
        .collect()
}

fn min_entropy_oracle(masses: &[f64]) -> f64 {
    let m = masses.len();
    let mut worst: f64 = 0.0;
    for p in (2..=m).filter(|&p| m.is_multiple_of(p) && (2..p).all(|d| p % d != 0)) {
        for t in 0..p {
            worst = worst.max(masses.iter().enumerate().filter(|(s, _)| s % p == t).map(|(_, x)| x).sum());
        }
    }
    1.0 - worst
}

/// Random measures on Z/M for M in the fixed grid, some with sparse support.
fn measure_grid() -> Vec<Vec<f64>> {
    let mods = [2usize, 3, 4, 5, 6, 8, 9];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50)
        .map(|i| {
            let m = mods[i % mods.len()];
            let mut w: Vec<f64> = (0..m)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                w[rng.random_range(0..m)] = 1.0;
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        })
        .collect()
}

// --------------------------------------------------------------- criteria

fn criterion_1() -> Outcome {
    timed(Duration::from_secs(1), || {
        let empty = Partition::empty();
        let cl = cl_measure(2, &empty, 1e-15).unwrap();
        let fw = fw_probability_exact(2, 2, &empty).unwrap();
        let fw_ok = fw == BigRational::new(3.into(), 8.into());
        let ranks: Vec<f64> = (0..=25).map(|k| corank_distribution(2, k, 1e-15).unwrap()).collect();
        let expect = [0.288788, 0.577576, 0.128350];
        let ranks_ok = expect.iter().zip(&ranks).all(|(e, r)| (e - r).abs() < 1e-6);
        let total: f64 = ranks.iter().sum();
        let ok = (cl - 0.288788095).abs() < 1e-8 && fw_ok && ranks_ok && (total - 1.0).abs() < 1e-9;
        (ok, format!("cl={cl:.10} fw(2,2,0)={fw} rank0..2={:.6?} sum={total:.12}", &ranks[..3]))
    })
}

fn criterion_2() -> Outcome {
    timed(Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut mismatches = 0;
        for _ in 0..500 {
            let rows: Vec<Vec<i64>> =
                (0..4).map(|_| (0..4).map(|_| rng.random_range(-9..=9)).collect()).collect();
            let a = IntMatrix::from_rows(&rows).unwrap();
            for p in [2u64, 3, 5] {
                let snf = snf_mod_ppow(&a, p, 40).unwrap();
                let got: Vec<Option<u32>> =
                    snf.exponents.iter().zip(&snf.saturated).map(|(&d, &s)| (!s).then_some(d)).collect();
                if got != minors_oracle(&rows, p) {
                    mismatches += 1;
                }
            }
        }
        let mut det_failures = 0;
        let mut done = 0;
        while done < 100 {
            let rows: Vec<Vec<i64>> =
                (0..3).map(|_| (0..3).map(|_| rng.random_range(-9..=9)).collect()).collect();
            let det = det_i128(&rows).abs();
            if det == 0 {
                continue;
            }
            done += 1;
            let a = IntMatrix::from_rows(&rows).unwrap();
            let mut product: i128 = 1;
            for p in (2..=det as u64).filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)) {
                if det % p as i128 != 0 {
                    continue;
                }
                let c = cokernel_partition(&a, p, POLICY).unwrap();
                product *= (p as i128).pow(c.torsion.size());
            }
            if product != det {
                det_failures += 1;
            }
        }
        (
            mismatches == 0 && det_failures == 0,
            format!("snf/minors mismatches {mismatches}/1500, det product failures {det_failures}/100"),
        )
    })
}

/// Comparison reports for criterion 3, serialised, plus the pass summary.
fn run_criterion_3() -> (Outcome, Vec<String>) {
    let dists = ["bernoulli:0.3", "bernoulli:0.5", "signed_uniform:1", "uniform_mod:2"];
    let ring = RingSpec::padic(2).unwrap();
    let trivial = ModuleClass::trivial();
    let one = ModuleClass::single(2, Partition::new(vec![1]).unwrap());
    let ref0 = fw_oracle_small(2, 12, &[]);
    let ref1 = fw_oracle_small(2, 12, &[1]);
    let mut ok = (ref0 - fw_probability(2, 12, &Partition::empty()).unwrap()).abs() < 1e-12
        && (ref1 - fw_probability(2, 12, &Partition::new(vec![1]).unwrap()).unwrap()).abs() < 1e-12;
    let mut notes = Vec::new();
    let mut artifacts = Vec::new();
    for d in dists {
        let emp = simulate(&dist(d), &ring, 12, 100_000, 42, POLICY).unwrap();
        artifacts.push(emp.to_json());
        let mut cell = Vec::new();
        for (class, r) in [(&trivial, ref0), (&one, ref1)] {
            let (lo, hi) = wilson_interval(emp.count(class), emp.trials, Z99);
            let inside = lo <= r && r <= hi;
            ok &= inside;
            cell.push(format!("{}={:.4}[{:.4},{:.4}]{}", class, emp.probability(class), lo, hi, if inside { "" } else { "!" }));
        }
        notes.push(format!("{d}: {}", cell.join(" ")));
    }
    ((ok, format!("ref 0={ref0:.6} [1]={ref1:.6}; {}", notes.join("; "))), artifacts)
}

fn run_criterion_4() -> (Outcome, Vec<String>) {
    let ring = RingSpec::modular(4).unwrap();
    let reference = ReferenceDistribution::uniform(4, 10, 10, 1e-12).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    let mut artifacts = Vec::new();
    for (d, limit) in [("uniform_mod:4", 0.01), ("bernoulli:0.3", 0.02)] {
        let emp = simulate(&dist(d), &ring, 10, 100_000, 42, POLICY).unwrap();
        let tv = tv_distance(&emp, &reference).unwrap();
        artifacts.push(compare(&emp, &reference, Z99).unwrap().to_json());
        ok &= tv <= limit;
        notes.push(format!("{d}: tv={tv:.4} (limit {limit})"));
    }
    ((ok, notes.join("; ")), artifacts)
}

fn run_criterion_5() -> (Outcome, Vec<String>) {
    let ring = RingSpec::padic(2).unwrap();
    let xi = dist("bernoulli:0.3");
    let mut points = Vec::new();
    let mut artifacts = Vec::new();
    for n in [4usize, 6, 8, 10, 12] {
        let emp = simulate(&xi, &ring, n, 200_000, 42, POLICY).unwrap();
        let reference = ReferenceDistribution::friedman_washington(2, n as u32, 4).unwrap();
        let tv = tv_distance(&emp, &reference).unwrap();
        artifacts.push(compare(&emp, &reference, Z99).unwrap().to_json());
        points.push((n as f64, tv));
    }
    let decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    let fit = decay_fit(&points).unwrap();
    let ok = decreasing && fit.slope < -0.15;
    let tvs: Vec<String> = points.iter().map(|(n, tv)| format!("{n}:{tv:.4}")).collect();
    ((ok, format!("tv {} decreasing={decreasing} slope={:.4} (need < -0.15)", tvs.join(" "), fit.slope)), artifacts)
}

fn criterion_6() -> Outcome {
    timed(Duration::from_secs(60), || {
        let mut traces = 0;
        let mut violations = Vec::new();
        let mut checked_steps = 0;
        for (n, p) in [(5usize, 2u64), (5, 3), (6, 2), (6, 3)] {
            let dists = [dist("signed_uniform:4"), dist(&format!("custom:0=1/4,1=1/4,{p}=1/4,{}=1/4", 2 * p))];
            for i in 0..500u64 {
                let a = sample_matrix(&dists[(i % 2) as usize], n, 600 + p, i);
                let t = run_exposure(&a, p, POLICY).unwrap();
                traces += 1;
                let mut bad = |what: String| violations.push(format!("n={n} p={p} #{i}: {what}"));
                // partial cokernels recomputed from scratch
                for l in 0..n {
                    let tail = a.column_block(l, n);
                    let c = cokernel_partition(&tail, p, POLICY).unwrap();
                    if c.torsion != t.partitions[l] || c.free_rank != t.free_ranks[l] {
                        bad(format!("T_{l} = {} but direct cokernel gives {:?}", t.partitions[l], c));
                    }
                }
                for l in 1..=n {
                    if t.torsion_events[l] {
                        continue;
                    }
                    let (later, earlier) = (t.partitions[l].parts(), t.partitions[l - 1].parts());
                    if later.len() > earlier.len() || later.iter().zip(earlier).any(|(x, y)| x > y) {
                        bad(format!("nesting at step {l}"));
                    }
                    let col = |lam: &[u32], j: u32| lam.iter().filter(|&&x| x >= j).count();
                    for j in 1..=earlier.first().copied().unwrap_or(0) {
                        if col(earlier, j) > col(later, j) + 1 {
                            bad(format!("column {j} grew twice at step {l}"));
                        }
                    }
                }
                if !t.has_torsion_event() {
                    let h = t.tableau.clone().expect("tableau without torsion events");
                    let rows = h.rows();
                    let ssyt = rows.iter().all(|r| r.windows(2).all(|w| w[0] >= w[1]))
                        && rows.windows(2).all(|w| w[1].iter().zip(&w[0]).all(|(lo, hi)| lo < hi));
                    if !ssyt {
                        bad("tableau not semi-standard".into());
                    }
                    for l in 0..=n {
                        let shape = Partition::from_unsorted(
                            rows.iter().map(|r| r.iter().filter(|&&x| x >= l as u32).count() as u32),
                        );
                        if shape != t.partitions[l] {
                            bad(format!("sub-diagram at level {l} is {shape}, T_{l} = {}", t.partitions[l]));
                        }
                    }
                    let cond = verify_condition_class(&t, &h).unwrap();
                    if !cond.disagreements.is_empty() {
                        bad(format!("condition class disagrees at {:?}", cond.disagreements));
                    }
                }
                let flat = Tableau::new(
                    Partition::new(vec![2]).unwrap(),
                    vec![vec![(n - 1) as u32, (n - 1) as u32]],
                )
                .unwrap();
                let cond = verify_condition_class(&t, &flat).unwrap();
                if !cond.disagreements.is_empty() {
                    bad(format!("condition class for a fixed tableau disagrees at {:?}", cond.disagreements));
                }
                let eq = verify_rank_event_equivalence(&t, t.default_jmax().max(3)).unwrap();
                checked_steps += eq.checked_steps;
                if !eq.violations.is_empty() {
                    bad(format!("event/rank: {:?}", eq.violations));
                }
                violations.extend(t.structural_violations().into_iter().map(|v| format!("n={n} p={p} #{i}: {v}")));
            }
        }
        let first = violations.first().cloned().unwrap_or_default();
        (
            violations.is_empty(),
            format!("{traces} traces, {checked_steps} checked steps, {} violations {first}", violations.len()),
        )
    })
}

fn criterion_7() -> Outcome {
    timed(Duration::from_secs(30), || {
        let mut checked = 0;
        let mut failures = Vec::new();
        for size in 0..=8 {
            for lam in all_partitions(size, size) {
                let lambda = Partition::new(lam.clone()).unwrap();
                for n in 0..=6 {
                    let (count, _) = brute_ssyt(&lam, n);
                    checked += 1;
                    if count_ssyt(&lambda, n) != BigUint::from(count) {
                        failures.push(format!("count {lambda} n={n}"));
                    }
                }
                let (_, best) = brute_ssyt(&lam, lam.len() as u32 + 1);
                if lambda.weight() != best.unwrap_or(0) {
                    failures.push(format!("weight {lambda}"));
                }
            }
        }
        let example = count_ssyt(&Partition::new(vec![2, 1]).unwrap(), 3);
        let ok = failures.is_empty() && example == BigUint::from(8u32);
        (ok, format!("{checked} (λ, n) pairs, count([2,1],3)={example}, failures {failures:?}"))
    })
}

fn criterion_8() -> Outcome {
    timed(Duration::from_secs(60), || {
        let mut problems: Vec<String> = Vec::new();
        let grid = measure_grid();
        let mut inclusion_checks = 0;
        for (i, masses) in grid.iter().enumerate() {
            let m = masses.len();
            let mu = FiniteMeasure::new(masses.clone()).unwrap();
            let nu = swap_distribution(&mu, SWAP_GAMMA).unwrap();
            let mu_hat = dft(masses);
            let nu_hat = dft(nu.masses());
            // ν built from scratch as a cross-check of the library convolution
            for t in 1..m {
                let conv: f64 = (0..m).map(|u| masses[u] * masses[(u + m - t) % m]).sum();
                if (nu.masses()[t] - SWAP_GAMMA * conv).abs() > 1e-12 {
                    problems.push(format!("measure {i}: ν({t})"));
                }
            }
            for t in 0..m {
                let abs2 = mu_hat[t].0.powi(2) + mu_hat[t].1.powi(2);
                let identity = 1.0 - SWAP_GAMMA + SWAP_GAMMA * abs2;
                if (nu_hat[t].0 - identity).abs() > 1e-12 || nu_hat[t].1.abs() > 1e-12 {
                    problems.push(format!("measure {i}: swap identity at t={t}"));
                }
                if abs2.sqrt() > nu_hat[t].0.powi(4) + 1e-12 {
                    problems.push(format!("measure {i}: |μ̂| > ν̂^4 at t={t}"));
                }
                let lib = fourier(&mu)[t];
                if (lib.re - mu_hat[t].0).abs() > 1e-12 || (lib.im - mu_hat[t].1).abs() > 1e-12 {
                    problems.push(format!("measure {i}: fourier at t={t}"));
                }
            }
            let alpha = min_entropy_oracle(masses);
            if min_entropy_oracle(nu.masses()) < alpha / 8.0 - 1e-12 {
                problems.push(format!("measure {i}: min-entropy of ν below α/8"));
            }
            for eps in [0.01, 0.05, 0.1, 0.2, 0.3, 0.5] {
                for k in 1..=3 {
                    inclusion_checks += 1;
                    if !spec_sum_inclusion_check(&mu, eps, k).unwrap().holds {
                        problems.push(format!("measure {i}: inclusion ε={eps} k={k}"));
                    }
                }
            }
        }
        for m in 1..=12 {
            if let Some(c) = kneser_exhaustive(m).unwrap() {
                problems.push(format!("Kneser fails on Z/{m}: {c:?}"));
            }
        }
        let names = [
            "bernoulli:0.1",
            "bernoulli:0.3",
            "bernoulli:0.5",
            "bernoulli:0.9",
            "signed_uniform:1",
            "signed_uniform:2",
            "uniform_mod:2",
            "uniform_mod:3",
            "uniform_mod:8",
        ];
        let mut lo_cases = 0;
        let mut worst_ratio: f64 = 0.0;
        for name in names {
            let xi = dist(name);
            for q in [2u64, 3, 5] {
                for m in 1..=200usize {
                    let w: Vec<u64> = (0..m as u64).map(|i| 1 + i % (q - 1)).collect();
                    for r in 0..q {
                        let Ok(lo) = littlewood_offord_gap(&xi, &w, q, r, 2.0) else { continue };
                        lo_cases += 1;
                        worst_ratio = worst_ratio.max(lo.gap / lo.bound);
                        if lo.gap > lo.bound {
                            problems.push(format!("LO {name} q={q} m={m} r={r}: gap {} > {}", lo.gap, lo.bound));
                        }
                    }
                }
            }
        }
        for a in [0.1f64, 0.3, 0.5] {
            let xi = EntryDistribution::bernoulli(&a.to_string()).unwrap();
            for m in 1..=200usize {
                let lo = littlewood_offord_gap(&xi, &vec![1; m], 2, 0, 1.0).unwrap();
                let closed = (1.0 + (1.0 - 2.0 * a).powi(m as i32)) / 2.0;
                if (lo.probability - closed).abs() > 1e-12 {
                    problems.push(format!("LO F_2 closed form α={a} m={m}"));
                }
            }
        }
        let first = problems.first().cloned().unwrap_or_default();
        (
            problems.is_empty(),
            format!(
                "50 measures, {inclusion_checks} inclusion checks, Kneser M<=12, {lo_cases} LO cases (max gap/bound {worst_ratio:.3}); {} problems {first}",
                problems.len()
            ),
        )
    })
}

fn criterion_9() -> Outcome {
    timed(Duration::from_secs(60), || {
        let xi = dist("bernoulli:0.3");
        let n = 10;
        let trials = 100_000u64;
        let mut zero_cols = 0u64;
        let mut any_zero = 0u64;
        for i in 0..trials {
            let a = sample_matrix(&xi, n, 9, i);
            let z = (0..n).filter(|&j| a.column(j).iter().all(|&x| x == 0)).count() as u64;
            zero_cols += z;
            any_zero += u64::from(z > 0);
        }
        let q = 0.7f64.powi(10);
        let cols = (trials * n as u64) as f64;
        let rate = zero_cols as f64 / cols;
        let sigma = (q * (1.0 - q) / cols).sqrt();
        let q_any = 1.0 - (1.0 - q).powi(n as i32);
        let rate_any = any_zero as f64 / trials as f64;
        let sigma_any = (q_any * (1.0 - q_any) / trials as f64).sqrt();
        let ok = (rate - q).abs() <= 4.0 * sigma && (rate_any - q_any).abs() <= 4.0 * sigma_any;
        (
            ok,
            format!(
                "column zero rate {rate:.5} vs {q:.5} ({:.2}σ); matrices with a zero column {rate_any:.5} vs {q_any:.5} ({:.2}σ)",
                (rate - q) / sigma,
                (rate_any - q_any) / sigma_any
            ),
        )
    })
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn main() {
    let mut results: BTreeMap<u32, Outcome> = BTreeMap::new();
    let guard = |f: &dyn Fn() -> Outcome| -> Outcome {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        }
    };
    results.insert(1, guard(&criterion_1));
    results.insert(2, guard(&criterion_2));

    let mut first_artifacts = Vec::new();
    let limits = [(3, 120), (4, 180), (5, 600)];
    type Run = fn() -> (Outcome, Vec<String>);
    let runs: [Run; 3] = [run_criterion_3, run_criterion_4, run_criterion_5];
    for ((id, secs), run) in limits.into_iter().zip(runs) {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| in_pool(1, run)));
        let took = start.elapsed().as_secs_f64();
        let outcome = match out {
            Ok(((ok, msg), artifacts)) => {
                first_artifacts.push(Some(artifacts));
                (ok && took <= secs as f64, format!("{msg}; {took:.2}s"))
            }
            Err(_) => {
                first_artifacts.push(None);
                (false, "panicked".into())
            }
        };
        results.insert(id, outcome);
    }

    results.insert(6, guard(&criterion_6));
    results.insert(7, guard(&criterion_7));
    results.insert(8, guard(&criterion_8));
    results.insert(9, guard(&criterion_9));

    let c10 = guard(&|| {
        let start = Instant::now();
        let mut same = 0;
        let mut differ = Vec::new();
        for (id, (run, first)) in [3, 4, 5].into_iter().zip(runs.iter().zip(&first_artifacts)) {
            let Some(first) = first else {
                differ.push(format!("criterion {id} did not produce artifacts"));
                continue;
            };
            let (_, again) = in_pool(4, run);
            for (a, b) in first.iter().zip(&again) {
                if a == b {
                    same += 1;
                } else {
                    differ.push(format!("criterion {id}"));
                }
            }
        }
        let ok = differ.is_empty() && same > 0;
        (
            ok,
            format!(
                "{same} artifacts byte-identical between 1 and 4 threads, differing: {differ:?}; {:.2}s",
                start.elapsed().as_secs_f64()
            ),
        )
    });
    results.insert(10, c10);

    let mut failed = 0;
    for (id, (ok, msg)) in &results {
        if !ok {
            failed += 1;
        }
        println!("criterion {id:>2}: {} {msg}", if *ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
