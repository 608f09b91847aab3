//! Python bindings: the model pair as a class, the rest as functions over
//! files and plain Python values. Structured results come back as dicts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use killmatrix_core::corpus::synth::{generate_synthetic_corpus, kill_rate, SynthConfig};
use killmatrix_core::corpus::{Corpus, SOURCE_DIR};
use killmatrix_core::evaluation::{evaluate as evaluate_matrices, KillMatrix};
use killmatrix_core::experiment::{outcomes, run_experiment, write_predicted_matrix, ExperimentConfig};
use killmatrix_core::extractor::{extract_rows, read_features, write_features, PairRow, Project};
use killmatrix_core::models::{combine as combine_probs, ModelConfig, TreeEnsemblePair};
use killmatrix_core::prioritization::{self, FaultMap, KillSets, Strategy};
use killmatrix_core::{thresholds, Error};

create_exception!(killmatrix, KillmatrixError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::InvalidParameter(_) | Error::NotAProbability(_) | Error::LengthMismatch(..) | Error::SingleClass => {
            PyValueError::new_err(e.to_string())
        }
        other => KillmatrixError::new_err(other.to_string()),
    }
}

/// Converts through JSON so nested reports become dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| KillmatrixError::new_err(e.to_string()))?;
    let json = PyModule::import(py, "json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

fn strategy(name: &str) -> PyResult<Strategy> {
    match name {
        "total" => Ok(Strategy::Total),
        "additional" => Ok(Strategy::Additional),
        _ => Err(PyValueError::new_err(format!(
            "strategy must be `total` or `additional`, got `{name}`"
        ))),
    }
}

fn rows_from(path: PathBuf) -> PyResult<Vec<PairRow>> {
    read_features(&path).map_err(err)
}

/// The trained forest/booster pair.
#[pyclass(module = "killmatrix", frozen)]
struct Model {
    inner: TreeEnsemblePair,
}

#[pymethods]
impl Model {
    /// Trains on a labelled features CSV.
    #[staticmethod]
    #[pyo3(signature = (features, seed = 0, trees = None, iterations = None))]
    fn train(
        py: Python<'_>,
        features: PathBuf,
        seed: u64,
        trees: Option<usize>,
        iterations: Option<usize>,
    ) -> PyResult<Model> {
        let rows = rows_from(features)?;
        let mut cfg = ModelConfig::default();
        if let Some(t) = trees {
            cfg.forest.trees = t;
        }
        if let Some(i) = iterations {
            cfg.booster.iterations = i;
        }
        let x: Vec<_> = rows.iter().map(|r| r.features.clone()).collect();
        let y: Vec<bool> = rows.iter().map(PairRow::killed).collect();
        let inner = py.detach(|| TreeEnsemblePair::train(&x, &y, &cfg, seed)).map_err(err)?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model {
            inner: TreeEnsemblePair::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    /// Combined kill probability per row of a features CSV, in file order.
    fn predict(&self, py: Python<'_>, features: PathBuf) -> PyResult<Vec<f64>> {
        let rows = rows_from(features)?;
        let x: Vec<_> = rows.iter().map(|r| r.features.clone()).collect();
        Ok(py.detach(|| self.inner.predict_all(&x)))
    }

    /// Writes `mutant_id,test_id,score,killed` for every row.
    fn predict_matrix(&self, py: Python<'_>, features: PathBuf, out: PathBuf, threshold: f64) -> PyResult<usize> {
        let rows = rows_from(features)?;
        let x: Vec<_> = rows.iter().map(|r| r.features.clone()).collect();
        let scores = py.detach(|| self.inner.predict_all(&x));
        write_predicted_matrix(&out, &rows, &scores, threshold).map_err(err)?;
        Ok(rows.len())
    }

    fn importance(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.importance())
    }

    #[getter]
    fn n_trees(&self) -> (usize, usize) {
        (self.inner.forest.trees.len(), self.inner.booster.trees.len())
    }

    fn __repr__(&self) -> String {
        let (f, b) = self.n_trees();
        format!("Model(forest_trees={f}, booster_trees={b}, seed={})", self.inner.seed)
    }
}

/// Writes a synthetic corpus directory; returns its size summary.
#[pyfunction]
#[pyo3(signature = (out, mutants = 2000, noise = 0.0, seed = 0))]
fn synth(py: Python<'_>, out: PathBuf, mutants: usize, noise: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = SynthConfig {
        mutants,
        noise_rate: noise,
        seed,
        ..SynthConfig::default()
    };
    let corpus = generate_synthetic_corpus(&cfg).map_err(err)?;
    corpus.write_dir(&out).map_err(err)?;
    let c = &corpus.corpus;
    let summary = serde_json::json!({
        "mutants": c.mutants.len(),
        "tests": c.tests.len(),
        "pairs": c.coverage.len(),
        "kill_rate": kill_rate(&c.coverage, &c.kills),
    });
    to_py(py, &summary)
}

/// Extracts features for a corpus directory into a CSV; returns the row count.
#[pyfunction]
fn extract(py: Python<'_>, corpus: PathBuf, out: PathBuf) -> PyResult<usize> {
    let rows = py
        .detach(|| {
            let c = Corpus::load_dir(&corpus)?;
            let project = Project::load_dir(&corpus.join(SOURCE_DIR))?;
            extract_rows(&project, &c)
        })
        .map_err(err)?;
    write_features(&out, &rows).map_err(err)?;
    Ok(rows.len())
}

#[pyfunction]
fn statement_diff(before: &str, after: &str) -> PyResult<String> {
    Ok(killmatrix_core::extractor::statement_diff(before, after)
        .map_err(err)?
        .to_string())
}

/// `(before, after)` abstractions, or None when the conditions match.
#[pyfunction]
fn skeleton_modification(before: &str, after: &str) -> PyResult<Option<(String, String)>> {
    Ok(killmatrix_core::extractor::skeleton_modification(before, after)
        .map_err(err)?
        .0)
}

#[pyfunction]
fn combine(p_forest: f64, p_booster: f64) -> PyResult<f64> {
    combine_probs(p_forest, p_booster).map_err(err)
}

#[pyfunction]
fn confusion(py: Python<'_>, scores: Vec<f64>, labels: Vec<bool>, threshold: f64) -> PyResult<Py<PyAny>> {
    let c = thresholds::confusion(&scores, &labels, threshold).map_err(err)?;
    let out = serde_json::json!({
        "tp": c.tp,
        "fp": c.fp,
        "fn": c.fn_,
        "tn": c.tn,
        "precision": c.precision(),
        "recall": c.recall(),
        "fpr": c.fpr(),
        "f1": c.f1(),
        "youden_j": c.youden_j(),
    });
    to_py(py, &out)
}

/// Full threshold report; the choice is under `"selected"`.
#[pyfunction]
fn optimize_threshold(py: Python<'_>, scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Py<PyAny>> {
    to_py(py, &thresholds::optimize_threshold(&scores, &labels).map_err(err)?)
}

/// Scores a predicted matrix CSV against a labelled features CSV.
#[pyfunction]
#[pyo3(signature = (predicted, actual, fewer_covered_ratio = 0.02))]
fn evaluate(py: Python<'_>, predicted: PathBuf, actual: PathBuf, fewer_covered_ratio: f64) -> PyResult<Py<PyAny>> {
    let pred = KillMatrix::read_csv(&predicted).map_err(err)?;
    let rows = rows_from(actual)?;
    let coverage = rows
        .iter()
        .map(|r| ((r.mutant_id, r.test_id), r.features.hits_number))
        .collect();
    let report = evaluate_matrices(
        &pred,
        &KillMatrix::from_rows(&rows),
        &outcomes(&rows),
        &coverage,
        fewer_covered_ratio,
    )
    .map_err(err)?;
    to_py(py, &report)
}

/// Orders tests from `{test_id: [killed mutant ids]}`.
#[pyfunction]
#[pyo3(signature = (kills, strategy = "additional", seed = 0))]
fn prioritize(kills: BTreeMap<u64, Vec<u64>>, strategy: &str, seed: u64) -> PyResult<Vec<u64>> {
    let sets: KillSets = kills.into_iter().map(|(t, ms)| (t, ms.into_iter().collect())).collect();
    let suite = match self::strategy(strategy)? {
        Strategy::Total => prioritization::prioritize_total_sets(&sets, seed),
        Strategy::Additional => prioritization::prioritize_additional_sets(&sets, seed),
    };
    Ok(suite.map_err(err)?.order)
}

/// APFD of `order` for `{fault: [detecting test ids]}`.
#[pyfunction]
fn apfd(order: Vec<u64>, faults: BTreeMap<String, Vec<u64>>) -> PyResult<f64> {
    let faults: FaultMap = faults
        .into_iter()
        .map(|(f, ts)| (f, ts.into_iter().collect()))
        .collect();
    Ok(prioritization::apfd(&order, &faults).map_err(err)?.apfd)
}

/// Runs an experiment config; returns the evaluation report.
#[pyfunction]
fn experiment(py: Python<'_>, config: PathBuf, out: PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_file(&config).map_err(err)?;
    let outcome = py.detach(|| run_experiment(&cfg, &out)).map_err(err)?;
    to_py(py, &outcome.eval)
}

#[pymodule]
fn killmatrix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("KillmatrixError", m.py().get_type::<KillmatrixError>())?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(statement_diff, m)?)?;
    m.add_function(wrap_pyfunction!(skeleton_modification, m)?)?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(prioritize, m)?)?;
    m.add_function(wrap_pyfunction!(apfd, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    Ok(())
}
