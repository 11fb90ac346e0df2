//! Python bindings. Classes are passed as strings ("2:2,1;3:1"), partitions
//! as lists of parts and matrices as lists of rows.

use num_bigint::{BigInt, BigUint};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cokernel_lab::exposure::{run_exposure, trace_document, verify_rank_event_equivalence};
use cokernel_lab::measures::{self, ReferenceDistribution};
use cokernel_lab::modarith::{self, Cokernel, IntMatrix, PrecisionPolicy, RingSpec};
use cokernel_lab::partitions::{self, ModuleClass};
use cokernel_lab::sampler::{self, EntryDistribution};
use cokernel_lab::spectral::{self, FiniteMeasure};
use cokernel_lab::stats::{self, EmpiricalDistribution};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn partition(parts: Vec<u32>) -> PyResult<partitions::Partition> {
    partitions::Partition::new(parts).map_err(err)
}

fn class(s: &str) -> PyResult<ModuleClass> {
    s.parse().map_err(err)
}

fn matrix(rows: Vec<Vec<i64>>) -> PyResult<IntMatrix> {
    IntMatrix::from_rows(&rows).map_err(err)
}

fn ring(p: Option<u64>, modulus: Option<u64>) -> PyResult<RingSpec> {
    match (p, modulus) {
        (Some(p), None) => RingSpec::padic(p).map_err(err),
        (None, Some(m)) => RingSpec::modular(m).map_err(err),
        _ => Err(PyValueError::new_err("give exactly one of p or modulus")),
    }
}

fn json_value<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Entry distribution parsed from strings such as "bernoulli:0.3".
#[pyclass(name = "EntryDistribution", module = "cokernel_lab")]
struct PyEntryDistribution {
    inner: EntryDistribution,
}

#[pymethods]
impl PyEntryDistribution {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(err)? })
    }

    #[getter]
    fn support(&self) -> Vec<i64> {
        self.inner.support().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs()
    }

    fn min_entropy(&self, primes: Vec<u64>) -> PyResult<f64> {
        sampler::min_entropy(&self.inner, &primes).map_err(err)
    }

    #[pyo3(signature = (n, seed = 0, index = 0))]
    fn sample_matrix(&self, n: usize, seed: u64, index: u64) -> Vec<Vec<i64>> {
        let a = sampler::sample_matrix(&self.inner, n, seed, index);
        (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("EntryDistribution('{}')", self.inner)
    }
}

/// Tallied cokernel classes of a simulation.
#[pyclass(name = "EmpiricalDistribution", module = "cokernel_lab")]
struct PyEmpirical {
    inner: EmpiricalDistribution,
}

#[pymethods]
impl PyEmpirical {
    #[getter]
    fn trials(&self) -> u64 {
        self.inner.trials
    }

    #[getter]
    fn infinite(&self) -> u64 {
        self.inner.infinite_count
    }

    #[getter]
    fn counts(&self) -> Vec<(String, u64)> {
        self.inner.counts.iter().map(|(c, k)| (c.to_string(), *k)).collect()
    }

    fn probability(&self, class_str: &str) -> PyResult<f64> {
        Ok(self.inner.probability(&class(class_str)?))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.counts.len()
    }
}

/// Exact reference law over classes up to a size cut-off.
#[pyclass(name = "ReferenceDistribution", module = "cokernel_lab")]
struct PyReference {
    inner: ReferenceDistribution,
}

#[pymethods]
impl PyReference {
    #[staticmethod]
    #[pyo3(signature = (p, n, max_size = 4))]
    fn friedman_washington(p: u64, n: u32, max_size: u32) -> PyResult<Self> {
        Ok(Self { inner: ReferenceDistribution::friedman_washington(p, n, max_size).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (p, max_size = 4, tol = 1e-12))]
    fn cohen_lenstra(p: u64, max_size: u32, tol: f64) -> PyResult<Self> {
        Ok(Self { inner: ReferenceDistribution::cohen_lenstra(p, max_size, tol).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (modulus, n, max_size = 4, tol = 1e-12))]
    fn uniform(modulus: u64, n: u32, max_size: u32, tol: f64) -> PyResult<Self> {
        Ok(Self { inner: ReferenceDistribution::uniform(modulus, n, max_size, tol).map_err(err)? })
    }

    #[getter]
    fn entries(&self) -> Vec<(String, f64)> {
        self.inner.entries.iter().map(|(c, p)| (c.to_string(), *p)).collect()
    }

    #[getter]
    fn tail_mass(&self) -> f64 {
        self.inner.tail_mass
    }

    fn probability(&self, class_str: &str) -> PyResult<Option<f64>> {
        Ok(self.inner.probability(&class(class_str)?))
    }

    fn tv_distance(&self, emp: PyRef<'_, PyEmpirical>) -> PyResult<f64> {
        stats::tv_distance(&emp.inner, &self.inner).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

#[pyfunction]
fn aut_order(p: u64, parts: Vec<u32>) -> PyResult<BigUint> {
    Ok(measures::aut_order(p, &partition(parts)?))
}

#[pyfunction]
#[pyo3(signature = (p, parts, tol = 1e-12))]
fn cl_measure(p: u64, parts: Vec<u32>, tol: f64) -> PyResult<f64> {
    measures::cl_measure(p, &partition(parts)?, tol).map_err(err)
}

#[pyfunction]
fn fw_probability(p: u64, n: u32, parts: Vec<u32>) -> PyResult<f64> {
    measures::fw_probability_or_zero(p, n, &partition(parts)?).map_err(err)
}

/// Numerator and denominator of the exact value.
#[pyfunction]
fn fw_probability_exact(p: u64, n: u32, parts: Vec<u32>) -> PyResult<(BigInt, BigInt)> {
    let r = measures::fw_probability_exact(p, n, &partition(parts)?).map_err(err)?;
    Ok((r.numer().clone(), r.denom().clone()))
}

#[pyfunction]
#[pyo3(signature = (p, k, tol = 1e-12))]
fn corank_distribution(p: u64, k: u32, tol: f64) -> PyResult<f64> {
    measures::corank_distribution(p, k, tol).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (modulus, class_str, n, tol = 1e-12))]
fn uniform_reference(modulus: u64, class_str: &str, n: u32, tol: f64) -> PyResult<f64> {
    measures::uniform_reference(modulus, &class(class_str)?, n, tol).map_err(err)
}

#[pyfunction]
fn count_ssyt(parts: Vec<u32>, n: u32) -> PyResult<BigUint> {
    Ok(partitions::count_ssyt(&partition(parts)?, n))
}

/// Elementary divisor exponents mod `p^precision`, `None` where saturated.
#[pyfunction]
#[pyo3(signature = (rows, p, precision = 32))]
fn snf_exponents(rows: Vec<Vec<i64>>, p: u64, precision: u32) -> PyResult<Vec<Option<u32>>> {
    let snf = modarith::snf_mod_ppow(&matrix(rows)?, p, precision).map_err(err)?;
    Ok(snf.exponents.iter().zip(&snf.saturated).map(|(&d, &s)| (!s).then_some(d)).collect())
}

/// Cokernel class as a string, or `None` when it is infinite.
#[pyfunction]
#[pyo3(signature = (rows, p = None, modulus = None))]
fn cokernel(rows: Vec<Vec<i64>>, p: Option<u64>, modulus: Option<u64>) -> PyResult<Option<String>> {
    match modarith::cokernel_class(&matrix(rows)?, &ring(p, modulus)?).map_err(err)? {
        Cokernel::Finite(c) => Ok(Some(c.to_string())),
        Cokernel::Infinite => Ok(None),
    }
}

#[pyfunction]
#[pyo3(signature = (dist, n, trials, seed = 0, p = None, modulus = None))]
fn simulate(
    py: Python<'_>,
    dist: PyRef<'_, PyEntryDistribution>,
    n: usize,
    trials: u64,
    seed: u64,
    p: Option<u64>,
    modulus: Option<u64>,
) -> PyResult<PyEmpirical> {
    let ring = ring(p, modulus)?;
    let xi = dist.inner.clone();
    let inner = py
        .detach(|| stats::simulate(&xi, &ring, n, trials, seed, PrecisionPolicy::default()))
        .map_err(err)?;
    Ok(PyEmpirical { inner })
}

/// Comparison report as a dict.
#[pyfunction]
#[pyo3(signature = (emp, reference, z = stats::Z95))]
fn compare<'py>(
    py: Python<'py>,
    emp: PyRef<'_, PyEmpirical>,
    reference: PyRef<'_, PyReference>,
    z: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let report = stats::compare(&emp.inner, &reference.inner, z).map_err(err)?;
    json_value(py, &report.to_json())
}

/// Column exposure trace of a square matrix as a dict.
#[pyfunction]
#[pyo3(signature = (rows, p, jmax = None))]
fn trace<'py>(py: Python<'py>, rows: Vec<Vec<i64>>, p: u64, jmax: Option<u32>) -> PyResult<Bound<'py, PyAny>> {
    let t = run_exposure(&matrix(rows)?, p, PrecisionPolicy::default()).map_err(err)?;
    let jmax = jmax.unwrap_or_else(|| t.default_jmax());
    let mut doc = trace_document(&t, jmax).map_err(err)?;
    doc.equivalence = Some(verify_rank_event_equivalence(&t, jmax).map_err(err)?);
    json_value(py, &serde_json::to_string(&doc).map_err(err)?)
}

/// Fourier coefficients of the push-forward of `dist` to `Z/modulus`.
#[pyfunction]
fn fourier(dist: PyRef<'_, PyEntryDistribution>, modulus: usize) -> PyResult<Vec<(f64, f64)>> {
    let mu = FiniteMeasure::from_distribution(&dist.inner, modulus).map_err(err)?;
    Ok(spectral::fourier(&mu).into_iter().map(|c| (c.re, c.im)).collect())
}

#[pyfunction]
#[pyo3(signature = (masses, gamma = spectral::SWAP_GAMMA))]
fn swap_distribution(masses: Vec<f64>, gamma: f64) -> PyResult<Vec<f64>> {
    let mu = FiniteMeasure::new(masses).map_err(err)?;
    Ok(spectral::swap_distribution(&mu, gamma).map_err(err)?.masses().to_vec())
}

#[pyfunction]
#[pyo3(signature = (count, trials, z = stats::Z95))]
fn wilson_interval(count: u64, trials: u64, z: f64) -> (f64, f64) {
    stats::wilson_interval(count, trials, z)
}

#[pymodule]
#[pyo3(name = "cokernel_lab")]
pub fn cokernel_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEntryDistribution>()?;
    m.add_class::<PyEmpirical>()?;
    m.add_class::<PyReference>()?;
    m.add_function(wrap_pyfunction!(aut_order, m)?)?;
    m.add_function(wrap_pyfunction!(cl_measure, m)?)?;
    m.add_function(wrap_pyfunction!(fw_probability, m)?)?;
    m.add_function(wrap_pyfunction!(fw_probability_exact, m)?)?;
    m.add_function(wrap_pyfunction!(corank_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_reference, m)?)?;
    m.add_function(wrap_pyfunction!(count_ssyt, m)?)?;
    m.add_function(wrap_pyfunction!(snf_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(cokernel, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(fourier, m)?)?;
    m.add_function(wrap_pyfunction!(swap_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
