use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nambu::evaluator::evaluate_micrograph;
use nambu::micrograph::{self, MicroGraphEncoding};
use nambu::pipeline::{self, Verdict};

fn parse(s: &str) -> PyResult<MicroGraphEncoding> {
    s.parse()
        .map_err(|e: micrograph::MicroGraphError| PyValueError::new_err(e.to_string()))
}

fn parse_all(es: &[String]) -> PyResult<Vec<MicroGraphEncoding>> {
    es.iter().map(|e| parse(e)).collect()
}

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Encodings of a named graph set.
#[pyfunction]
fn preset(name: &str) -> PyResult<Vec<String>> {
    let list = micrograph::preset(name).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(list.iter().map(|e| e.to_string()).collect())
}

/// Descendants of one encoding, one dimension up.
#[pyfunction]
fn descendants(encoding: &str) -> PyResult<Vec<String>> {
    Ok(parse(encoding)?.descendants().iter().map(|e| e.to_string()).collect())
}

/// Canonical representative and the sign relating the two formulas.
#[pyfunction]
fn canonicalize(encoding: &str) -> PyResult<(String, i64)> {
    let c = parse(encoding)?.canonicalize();
    Ok((c.encoding.to_string(), c.sign))
}

/// The 1-vector formula of a micro-graph, in the textual superfunction format.
#[pyfunction]
fn evaluate(encoding: &str) -> PyResult<String> {
    evaluate_micrograph(&parse(encoding)?)
        .map(|f| f.render())
        .map_err(runtime)
}

/// Rank of the formula matrix and the 0-based pivot positions.
#[pyfunction]
#[pyo3(signature = (encodings, workers=1, cache=None))]
fn formula_rank(encodings: Vec<String>, workers: usize, cache: Option<PathBuf>) -> PyResult<(usize, Vec<usize>)> {
    let graphs = parse_all(&encodings)?;
    let (rank, pivots, _) = pipeline::formula_rank(&graphs, workers, cache.as_deref()).map_err(runtime)?;
    Ok((rank, pivots))
}

/// Solves the trivialization equation over the given graphs. Returns
/// (solvable, verified, nullity, coefficients as strings or None).
#[pyfunction]
#[pyo3(signature = (encodings, workers=1, cache=None))]
fn solve(
    encodings: Vec<String>,
    workers: usize,
    cache: Option<PathBuf>,
) -> PyResult<(bool, bool, usize, Option<Vec<String>>)> {
    let graphs = parse_all(&encodings)?;
    let d = graphs
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| PyValueError::new_err("no graphs"))?;
    let flow = pipeline::compute_flow_cached(d, cache.as_deref()).map_err(runtime)?;
    let r = pipeline::solve_trivialization(&flow, &graphs, workers, cache.as_deref()).map_err(runtime)?;
    Ok((r.verdict == Verdict::Solvable, r.verified, r.nullity, r.solution))
}

#[pymodule]
fn nambu_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(descendants, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(formula_rank, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
