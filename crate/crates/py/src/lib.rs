//! Python bindings: results come back as plain dicts and lists decoded from
//! the same canonical JSON the command line tool prints.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

use gdlab::acceptance::run_criterion as run_one;
use gdlab::conealg::{cone_dim, decompose_by_local_dimension};
use gdlab::dircone::gd_origin;
use gdlab::gditer::{iterate_to_stabilization, GdConfig};
use gdlab::oracle::oracle_table as table;
use gdlab::report::{canonical_json, envelope, stabilization_value, to_value};
use gdlab::sampler::sample_multiscale;
use gdlab::setdesc::{catalog_names as names, parse_set_description, SetDescription};
use gdlab::GdError;

fn py_err(e: GdError) -> PyErr {
    match e {
        GdError::Io(e) => PyOSError::new_err(e.to_string()),
        GdError::Syntax { .. }
        | GdError::DimensionMismatch(_)
        | GdError::SqrtInImplicit
        | GdError::Validation(_)
        | GdError::UnknownCatalog(_)
        | GdError::InadmissibleDimension { .. }
        | GdError::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    let text = canonical_json(v);
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn setup(text: &str, per_band: Option<usize>) -> PyResult<(SetDescription, GdConfig)> {
    let desc = parse_set_description(text).map_err(py_err)?;
    let mut config = GdConfig::default_for(desc.ambient_dim);
    if let Some(p) = per_band {
        config.schedule.per_band = p;
    }
    config.validate(desc.ambient_dim).map_err(py_err)?;
    Ok((desc, config))
}

/// Canonical text of a set description.
#[pyfunction]
fn parse(text: &str) -> PyResult<String> {
    Ok(parse_set_description(text).map_err(py_err)?.to_string())
}

#[pyfunction]
fn catalog_names() -> Vec<&'static str> {
    names().to_vec()
}

/// Rows of the oracle table.
#[pyfunction]
fn oracle_table(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &to_value(&table()).map_err(py_err)?)
}

/// Point counts per band of the multiscale cloud.
#[pyfunction]
#[pyo3(signature = (text, seed, per_band=None))]
fn sample(py: Python<'_>, text: &str, seed: u64, per_band: Option<usize>) -> PyResult<Py<PyAny>> {
    let (desc, config) = setup(text, per_band)?;
    let cloud = py.detach(|| sample_multiscale(&desc, &config.schedule, seed)).map_err(py_err)?;
    let bands: Vec<Value> = cloud.bands.iter().map(|b| json!({"scale": b.scale, "points": b.points.len()})).collect();
    let mut m = envelope("sample", &desc.to_string(), desc.ambient_dim, seed);
    m.insert("points".into(), json!(cloud.len()));
    m.insert("bands".into(), Value::Array(bands));
    to_py(py, &Value::Object(m))
}

/// Net of GD(A) at the origin with its estimated dimension.
#[pyfunction]
#[pyo3(signature = (text, seed, per_band=None))]
fn gd(py: Python<'_>, text: &str, seed: u64, per_band: Option<usize>) -> PyResult<Py<PyAny>> {
    let (desc, config) = setup(text, per_band)?;
    let d = py
        .detach(|| -> gdlab::Result<_> {
            if desc.is_point_germ() {
                return Ok(gdlab::sphere::DirectionSet::empty(desc.ambient_dim, config.dir.theta_net));
            }
            gd_origin(&sample_multiscale(&desc, &config.schedule, seed)?, &config.dir)
        })
        .map_err(py_err)?;
    let mut m = envelope("gd", &desc.to_string(), desc.ambient_dim, seed);
    m.insert("theta_net".into(), json!(d.theta_net()));
    m.insert("cone_dim".into(), json!(cone_dim(&d, &config.dim)));
    m.insert("directions".into(), json!(d.dirs()));
    to_py(py, &Value::Object(m))
}

/// Dimension classes, `Λ0` and `m0` of the sampled germ.
#[pyfunction]
#[pyo3(signature = (text, seed, per_band=None))]
fn decompose(py: Python<'_>, text: &str, seed: u64, per_band: Option<usize>) -> PyResult<Py<PyAny>> {
    let (desc, config) = setup(text, per_band)?;
    let mut m = envelope("decompose", &desc.to_string(), desc.ambient_dim, seed);
    if desc.is_point_germ() {
        m.insert("classes".into(), json!({}));
        m.insert("lambda0".into(), json!([]));
        m.insert("m0".into(), json!(0));
        return to_py(py, &Value::Object(m));
    }
    let dec = py
        .detach(|| decompose_by_local_dimension(&sample_multiscale(&desc, &config.schedule, seed)?, &config.dim))
        .map_err(py_err)?;
    let classes: serde_json::Map<String, Value> =
        dec.classes.iter().map(|(k, c)| (k.to_string(), json!(c.len()))).collect();
    m.insert("classes".into(), Value::Object(classes));
    m.insert("lambda0".into(), json!(dec.lambda0));
    m.insert("m0".into(), json!(dec.m0));
    to_py(py, &Value::Object(m))
}

/// Stabilization report of the chain `GD^m(A)`.
#[pyfunction]
#[pyo3(signature = (text, seed, max_degree=None, per_band=None))]
fn iterate(py: Python<'_>, text: &str, seed: u64, max_degree: Option<usize>, per_band: Option<usize>) -> PyResult<Py<PyAny>> {
    let (desc, config) = setup(text, per_band)?;
    let max_degree = max_degree.unwrap_or(desc.ambient_dim + 1);
    let report = py.detach(|| iterate_to_stabilization(&desc, max_degree, &config, seed)).map_err(py_err)?;
    to_py(py, &stabilization_value(&report, &desc.to_string(), false).map_err(py_err)?)
}

/// Runs one acceptance criterion.
#[pyfunction]
fn run_criterion(py: Python<'_>, id: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| run_one(id, seed));
    to_py(py, &json!({"id": r.id, "name": r.name, "pass": r.pass, "detail": r.detail}))
}

#[pymodule]
fn gdlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCHEMA", gdlab::report::SCHEMA)?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_table, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(gd, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    Ok(())
}
