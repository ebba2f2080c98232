//! Python bindings: load or generate matroid instances, query independence,
//! run the basis-finding algorithms, and inspect round ledgers from Python.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use matroid_basis::applications::random_feasible_sequence;
use matroid_basis::basis::{greedy_basis, run_algorithm, verify_basis, Algo};
use matroid_basis::bench::load_matroid;
use matroid_basis::decomposition::{remove_small_circuits, repeated_global_peeling};
use matroid_basis::oracle::MatroidView;
use matroid_basis::scheduler::RoundLedger;
use matroid_basis::AlgorithmConfig;

fn to_py_err(e: matroid_basis::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_config(config_json: Option<&str>) -> PyResult<AlgorithmConfig> {
    match config_json {
        None => Ok(AlgorithmConfig::default()),
        Some(text) => serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad config: {e}"))),
    }
}

/// A matroid instance with independence-oracle access.
#[pyclass]
struct Matroid {
    view: MatroidView,
    family: String,
}

#[pymethods]
impl Matroid {
    /// Build from a `gen:` generator string, inline spec JSON, or a spec
    /// file path.
    #[new]
    #[pyo3(signature = (source, n=256, instance_seed=0))]
    fn new(source: &str, n: usize, instance_seed: u64) -> PyResult<Self> {
        let (family, instance) = load_matroid(source, n, instance_seed).map_err(to_py_err)?;
        Ok(Matroid { view: MatroidView::of(instance), family })
    }

    #[getter]
    fn family(&self) -> String {
        self.family.clone()
    }

    #[getter]
    fn ground_size(&self) -> usize {
        self.view.ground_size()
    }

    /// Is the given element set independent?
    fn is_independent(&self, elements: Vec<u32>) -> PyResult<bool> {
        self.view.is_independent(&elements).map_err(to_py_err)
    }

    /// Rank of an element set (the whole ground set when omitted).
    #[pyo3(signature = (elements=None))]
    fn rank(&self, elements: Option<Vec<u32>>) -> usize {
        match elements {
            Some(set) => self.view.rank_of(&set),
            None => self.view.live_rank(),
        }
    }

    /// The sequential greedy basis (scan in id order).
    fn greedy_basis(&self) -> Vec<u32> {
        greedy_basis(&self.view)
    }

    /// Run a basis-finding algorithm ("greedy", "kuw", "kps49", "main37").
    /// Returns a dict with the basis, round/query accounting, and validity.
    #[pyo3(signature = (algo="main37", seed=0, config_json=None))]
    fn find_basis<'py>(
        &self,
        py: Python<'py>,
        algo: &str,
        seed: u64,
        config_json: Option<&str>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let algo = Algo::parse(algo).map_err(to_py_err)?;
        let cfg = parse_config(config_json)?;
        let run = run_algorithm(algo, &self.view, &cfg, seed).map_err(to_py_err)?;
        let valid = verify_basis(&self.view, &run.basis);
        let out = PyDict::new(py);
        out.set_item("basis", &run.basis)?;
        out.set_item("basis_size", run.basis.len())?;
        out.set_item("rounds", run.ledger.rounds)?;
        out.set_item("total_queries", run.ledger.total_queries)?;
        out.set_item("per_round", &run.ledger.per_round)?;
        out.set_item("seed", run.ledger.seed)?;
        out.set_item("valid", valid)?;
        out.set_item(
            "stop_reasons",
            run.stop_reasons.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>(),
        )?;
        Ok(out)
    }

    /// Run the small-circuit preprocessing plus iterative peeling and return
    /// the peel trace as a list of dicts.
    #[pyo3(signature = (seed=0, config_json=None))]
    fn decompose<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        config_json: Option<&str>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = parse_config(config_json)?;
        let mut ledger = RoundLedger::with_budget_cap(seed, cfg.budget_cap);
        let pre = remove_small_circuits(&self.view, cfg.c0, &mut ledger).map_err(to_py_err)?;
        let outcome = repeated_global_peeling(&pre, &cfg, &mut ledger);
        let mut rows = Vec::new();
        for r in &outcome.records {
            let d = PyDict::new(py);
            d.set_item("index", r.index)?;
            d.set_item("set", &r.set)?;
            d.set_item("alpha_hat", r.alpha_hat)?;
            d.set_item("size_bucket", r.size_bucket)?;
            d.set_item("good", r.good)?;
            rows.push(d);
        }
        Ok(rows)
    }

    /// Generate a random feasible sequence (every prefix independent).
    #[pyo3(signature = (seed=0, finder="kuw"))]
    fn feasible_sequence(&self, seed: u64, finder: &str) -> PyResult<Vec<u32>> {
        let algo = Algo::parse(finder).map_err(to_py_err)?;
        let cfg = AlgorithmConfig::default();
        let mut ledger = RoundLedger::with_budget_cap(seed, cfg.budget_cap);
        let seq = random_feasible_sequence(&self.view, &cfg, algo, &mut ledger, "py")
            .map_err(to_py_err)?;
        Ok(seq.elements)
    }

    fn __repr__(&self) -> String {
        format!("Matroid(family='{}', n={})", self.family, self.view.ground_size())
    }
}

#[pymodule]
fn matroid_basis_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Matroid>()?;
    Ok(())
}
