//! Python bindings: `import adregret`.

use std::path::PathBuf;

use adregret::graph::{load_graph, NodeId};
use adregret::harness::{
    evaluate as mc_evaluate, gen_campaign, gen_topical, gen_weighted_cascade, in_pool,
    run_allocator, AllocOptions, AllocatorKind, CampaignSpec,
};
use adregret::model::{self, load_attention, load_campaign, Attention};
use adregret::oracle::{self, allocation_revenues, regret_total, SpreadOracle};
use adregret::sampling::SampleParams;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: adregret::Error) -> PyErr {
    match e {
        adregret::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_config_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A graph, a campaign and the attention/penalty constraints.
#[pyclass(frozen, module = "adregret")]
struct Instance {
    inner: model::Instance,
}

#[pymethods]
impl Instance {
    /// Loads a graph file and a campaign JSON file.
    #[staticmethod]
    #[pyo3(signature = (graph, campaign, kappa = 1, attention = None, lam = 0.0))]
    fn load(
        graph: PathBuf,
        campaign: PathBuf,
        kappa: u32,
        attention: Option<PathBuf>,
        lam: f64,
    ) -> PyResult<Self> {
        let g = load_graph(graph).map_err(to_py)?;
        let ads = load_campaign(campaign).map_err(to_py)?;
        let att = match attention {
            Some(p) => load_attention(p, g.node_count(), kappa).map_err(to_py)?,
            None => Attention::Uniform(kappa),
        };
        let inner = model::Instance::new(g, ads, att, lam).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Random graph plus campaign. `kind` is "topical" or "weighted-cascade".
    #[staticmethod]
    #[pyo3(signature = (kind, nodes, arcs, topics = 1, ads = 5, budget = (20.0, 30.0), cpe = (1.0, 1.0),
        ctp = (0.01, 0.03), seed = 0, kappa = 1, lam = 0.0, mean = 1.0 / 30.0))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        kind: &str,
        nodes: usize,
        arcs: usize,
        topics: usize,
        ads: usize,
        budget: (f64, f64),
        cpe: (f64, f64),
        ctp: (f64, f64),
        seed: u64,
        kappa: u32,
        lam: f64,
        mean: f64,
    ) -> PyResult<Self> {
        let graph = match kind {
            "topical" => gen_topical(nodes, arcs, topics, mean, seed),
            "weighted-cascade" => gen_weighted_cascade(nodes, arcs, topics, seed),
            _ => {
                return Err(PyValueError::new_err(format!(
                    "unknown graph kind '{kind}'"
                )))
            }
        }
        .map_err(to_py)?;
        let spec = CampaignSpec {
            ads,
            budget,
            cpe,
            ctp,
            focus: 0.7,
            boost_beta: 0.0,
        };
        let campaign = gen_campaign(&spec, topics, seed).map_err(to_py)?;
        let inner =
            model::Instance::new(graph, campaign, Attention::Uniform(kappa), lam).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Same graph and campaign under a uniform attention bound and penalty.
    fn with_constraints(&self, kappa: u32, lam: f64) -> PyResult<Self> {
        let inner = self
            .inner
            .with_constraints(Attention::Uniform(kappa), lam)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn ad_count(&self) -> usize {
        self.inner.ad_count()
    }

    #[getter]
    fn budgets(&self) -> Vec<f64> {
        self.inner.budgets().to_vec()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(nodes={}, arcs={}, ads={})",
            self.inner.node_count(),
            self.inner.graph().arc_count(),
            self.inner.ad_count()
        )
    }
}

/// Seed sets, one per ad (indexed by position in the campaign).
#[pyclass(frozen, module = "adregret")]
struct Allocation {
    inner: model::Allocation,
}

#[pymethods]
impl Allocation {
    #[new]
    fn new(instance: &Instance, sets: Vec<Vec<NodeId>>) -> PyResult<Self> {
        if sets.len() != instance.inner.ad_count() {
            return Err(PyValueError::new_err("one seed list per ad expected"));
        }
        let inner =
            model::Allocation::from_sets(instance.inner.node_count(), sets).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(instance: &Instance, path: PathBuf) -> PyResult<Self> {
        let inner = model::Allocation::load(&instance.inner, path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, instance: &Instance, path: PathBuf) -> PyResult<()> {
        self.inner.save(&instance.inner, path).map_err(to_py)
    }

    fn to_text(&self, instance: &Instance) -> String {
        self.inner.to_text(&instance.inner)
    }

    #[getter]
    fn sets(&self) -> Vec<Vec<NodeId>> {
        (0..self.inner.ad_count())
            .map(|i| self.inner.seeds(i).to_vec())
            .collect()
    }

    /// Human-readable constraint violations; empty when valid.
    fn violations(&self, instance: &Instance) -> Vec<String> {
        model::validate_allocation(&instance.inner, &self.inner)
            .iter()
            .map(|v| format!("{v:?}"))
            .collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Allocation(seeds={})", self.inner.total_seeds())
    }
}

/// Runs an allocator. Returns the allocation and a dict of run details.
#[pyfunction]
#[pyo3(signature = (instance, algo, epsilon = 0.1, ell = 1.0, seed = 0, greedy_runs = 1000, pilot_size = 10_000,
    workers = None))]
#[allow(clippy::too_many_arguments)]
fn allocate<'py>(
    py: Python<'py>,
    instance: &Instance,
    algo: &str,
    epsilon: f64,
    ell: f64,
    seed: u64,
    greedy_runs: u64,
    pilot_size: u64,
    workers: Option<usize>,
) -> PyResult<(Allocation, Bound<'py, PyDict>)> {
    let kind: AllocatorKind = algo.parse().map_err(to_py)?;
    let opts = AllocOptions {
        params: SampleParams::new(epsilon, ell).map_err(to_py)?,
        seed,
        greedy_runs,
        pilot_size,
    };
    let (result, ms) = py
        .detach(|| in_pool(workers, || run_allocator(kind, &instance.inner, &opts)))
        .map_err(to_py)?
        .map_err(to_py)?;
    let info = PyDict::new(py);
    info.set_item("revenues", result.revenues.clone())?;
    info.set_item("theta", result.theta.clone())?;
    info.set_item("termination", result.termination.as_str())?;
    info.set_item("steps", result.steps.len())?;
    info.set_item("wall_ms", ms)?;
    Ok((
        Allocation {
            inner: result.allocation,
        },
        info,
    ))
}

/// Exact expected clicks of `seeds` for ad `ad` (tiny graphs only).
#[pyfunction]
fn exact_spread(instance: &Instance, ad: usize, seeds: Vec<NodeId>) -> PyResult<f64> {
    check_ad(instance, ad)?;
    let inst = &instance.inner;
    oracle::exact_spread(inst.view(ad), inst.ctps(ad), &seeds)
        .map(|s| s.mean)
        .map_err(to_py)
}

/// Monte-Carlo expected clicks and standard error.
#[pyfunction]
#[pyo3(signature = (instance, ad, seeds, runs = 10_000, seed = 0))]
fn mc_spread(
    py: Python<'_>,
    instance: &Instance,
    ad: usize,
    seeds: Vec<NodeId>,
    runs: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    check_ad(instance, ad)?;
    let inst = &instance.inner;
    let s = py.detach(|| oracle::mc_spread(inst.view(ad), inst.ctps(ad), &seeds, runs, seed));
    Ok((s.mean, s.stderr))
}

/// Total regret of an allocation; exact when `runs` is None.
#[pyfunction]
#[pyo3(signature = (instance, allocation, runs = None, seed = 0))]
fn regret(
    py: Python<'_>,
    instance: &Instance,
    allocation: &Allocation,
    runs: Option<u64>,
    seed: u64,
) -> PyResult<f64> {
    let oracle = match runs {
        Some(runs) => SpreadOracle::MonteCarlo { runs, seed },
        None => SpreadOracle::Exact,
    };
    let rev = py
        .detach(|| allocation_revenues(&instance.inner, &allocation.inner, oracle))
        .map_err(to_py)?;
    Ok(regret_total(&instance.inner, &allocation.inner, &rev).total)
}

/// Per-ad Monte-Carlo report rows as dicts.
#[pyfunction]
#[pyo3(signature = (instance, allocation, runs = 10_000, seed = 0))]
fn evaluate<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    runs: u64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py
        .detach(|| mc_evaluate(&instance.inner, &allocation.inner, runs, seed))
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("ad", r.ad)?;
            d.set_item("budget", r.budget)?;
            d.set_item("revenue", r.revenue)?;
            d.set_item("stderr", r.stderr)?;
            d.set_item("budget_regret", r.budget_regret)?;
            d.set_item("seeds", r.seeds)?;
            Ok(d)
        })
        .collect()
}

fn check_ad(instance: &Instance, ad: usize) -> PyResult<()> {
    if ad >= instance.inner.ad_count() {
        return Err(PyValueError::new_err(format!("no ad at index {ad}")));
    }
    Ok(())
}

#[pymodule]
#[pyo3(name = "adregret")]
fn adregret_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Allocation>()?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_spread, m)?)?;
    m.add_function(wrap_pyfunction!(mc_spread, m)?)?;
    m.add_function(wrap_pyfunction!(regret, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
