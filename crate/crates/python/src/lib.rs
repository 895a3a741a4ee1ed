//! Python bindings: descriptor sizes, extractors, exact-kernel oracles,
//! synthetic data and the train/evaluate protocol.
//!
//! Sequences cross the boundary as `frames[s][joint] = [x, y, z]`.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use skeltensor::config::RunConfig;
use skeltensor::dck::{self, DckExtractor, DckParams, LagBandwidth, PairMode};
use skeltensor::preprocess::{JointSubset, Point3, Sequence, Stage};
use skeltensor::sck::{self, SckExtractor, SckParams};
use skeltensor::tensor::{self, SymMatrix};
use skeltensor::{pipeline, Error};

type Frames = Vec<Vec<Point3>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::NumericalFailure(_) | Error::SvdFailure { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sequence(frames: Frames, stage: Stage) -> PyResult<Sequence> {
    Ok(Sequence::new("py", 1, 1, frames)
        .map_err(py_err)?
        .assume_stage(stage))
}

#[pyfunction]
#[pyo3(signature = (joints, z2 = 5, z3 = 6))]
fn sck_size(joints: usize, z2: usize, z3: usize) -> usize {
    sck::sck_size(joints, z2, z3)
}

#[pyfunction]
#[pyo3(signature = (joints, z2 = 5, z3 = 6, pair_mode = "paper-size"))]
fn dck_size(joints: usize, z2: usize, z3: usize, pair_mode: &str) -> PyResult<usize> {
    Ok(dck::dck_size(
        joints,
        z2,
        z3,
        PairMode::parse(pair_mode).map_err(py_err)?,
    ))
}

/// Matrix power of a symmetric PSD matrix; negative eigenvalues clamp to zero.
#[pyfunction]
fn psd_power(matrix: Vec<Vec<f64>>, gamma: f64) -> PyResult<Vec<Vec<f64>>> {
    let n = matrix.len();
    if matrix.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let m = SymMatrix::from_fn(n, |i, j| matrix[i][j]);
    let out = tensor::psd_power(&m, gamma).map_err(py_err)?;
    Ok((0..n)
        .map(|i| (0..n).map(|j| out.get(i, j)).collect())
        .collect())
}

/// SCK descriptor of hip-centered, limb-normalized frames already scaled
/// into [-1, 1].
#[pyfunction]
#[pyo3(signature = (frames, sigma2 = 0.6, sigma3 = 0.5, z2 = 5, z3 = 6, beta1 = 0.5, gamma = 0.36))]
fn sck_descriptor(
    frames: Frames,
    sigma2: f64,
    sigma3: f64,
    z2: usize,
    z3: usize,
    beta1: f64,
    gamma: f64,
) -> PyResult<Vec<f64>> {
    let params = SckParams {
        sigma2,
        sigma3,
        z2,
        z3,
        beta1,
        beta2: 1.0 - beta1,
        gamma,
        ..SckParams::default()
    };
    let ex = SckExtractor::new(params).map_err(py_err)?;
    let seq = sequence(frames, Stage::LimbNormalized)?;
    Ok(ex.descriptor(&seq).map_err(py_err)?.values)
}

#[allow(clippy::too_many_arguments)]
fn dck_params(
    sigma2: f64,
    sigma3: f64,
    sigma4_fraction: f64,
    z2: usize,
    z3: usize,
    gamma: f64,
    gamma_star: f64,
    pair_mode: &str,
) -> PyResult<DckParams> {
    Ok(DckParams {
        sigma2,
        sigma3,
        sigma4: LagBandwidth::Fraction(sigma4_fraction),
        z2,
        z3,
        gamma,
        gamma_star,
        pair_mode: PairMode::parse(pair_mode).map_err(py_err)?,
        ..DckParams::default()
    })
}

/// DCK descriptor of raw frames whose pairwise displacements lie in [-1, 1].
#[pyfunction]
#[pyo3(signature = (frames, sigma2 = 0.6, sigma3 = 0.5, sigma4_fraction = 0.25, z2 = 5, z3 = 6, gamma = 0.85, gamma_star = 1.0, pair_mode = "paper-size"))]
#[allow(clippy::too_many_arguments)]
fn dck_descriptor(
    frames: Frames,
    sigma2: f64,
    sigma3: f64,
    sigma4_fraction: f64,
    z2: usize,
    z3: usize,
    gamma: f64,
    gamma_star: f64,
    pair_mode: &str,
) -> PyResult<Vec<f64>> {
    let params = dck_params(
        sigma2,
        sigma3,
        sigma4_fraction,
        z2,
        z3,
        gamma,
        gamma_star,
        pair_mode,
    )?;
    let ex = DckExtractor::new(params).map_err(py_err)?;
    let seq = sequence(frames, Stage::Raw)?;
    let all = JointSubset::all(seq.joint_count());
    Ok(ex.descriptor(&seq, &all).map_err(py_err)?.values)
}

#[pyfunction]
#[pyo3(signature = (a, b, sigma2 = 0.6, sigma3 = 0.5, beta1 = 0.5))]
fn sck_exact(a: Frames, b: Frames, sigma2: f64, sigma3: f64, beta1: f64) -> PyResult<f64> {
    let params = SckParams {
        sigma2,
        sigma3,
        beta1,
        beta2: 1.0 - beta1,
        ..SckParams::default()
    };
    sck::sck_exact(
        &sequence(a, Stage::Raw)?,
        &sequence(b, Stage::Raw)?,
        &params,
    )
    .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, sigma2 = 0.6, sigma3 = 0.5, sigma4_fraction = 0.25))]
fn dck_exact(
    a: Frames,
    b: Frames,
    sigma2: f64,
    sigma3: f64,
    sigma4_fraction: f64,
) -> PyResult<f64> {
    let params = dck_params(sigma2, sigma3, sigma4_fraction, 5, 6, 1.0, 1.0, "strict")?;
    let (a, b) = (sequence(a, Stage::Raw)?, sequence(b, Stage::Raw)?);
    let all = JointSubset::all(a.joint_count());
    dck::dck_exact(&a, &b, &all, &params).map_err(py_err)
}

/// `(id, label, subject, frames)` for every synthetic sequence.
#[pyfunction]
#[pyo3(signature = (classes, per_class, joints, frames, noise = 0.05, seed = 0))]
fn synth_actions(
    classes: usize,
    per_class: usize,
    joints: usize,
    frames: usize,
    noise: f64,
    seed: u64,
) -> PyResult<Vec<(String, u32, u32, Frames)>> {
    let ds = skeltensor::dataset::synth_actions(classes, per_class, joints, frames, noise, seed)
        .map_err(py_err)?;
    Ok(ds
        .sequences
        .into_iter()
        .map(|s| {
            let f = s.frames().map(<[Point3]>::to_vec).collect();
            (s.id, s.label, s.subject, f)
        })
        .collect())
}

/// Runs the train/evaluate protocol for a `key = value` config and returns
/// the report as JSON.
#[pyfunction]
fn train_eval(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = RunConfig::parse(config).map_err(py_err)?;
    let report = py
        .detach(|| {
            let data = pipeline::load_data(&cfg)?;
            pipeline::train_eval(&cfg, &data).map(|(r, _)| r)
        })
        .map_err(py_err)?;
    serde_json_string(&report)
}

fn serde_json_string(report: &pipeline::ProtocolReport) -> PyResult<String> {
    serde_json::to_string(report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Every config key with its default and description.
#[pyfunction]
fn config_reference() -> String {
    RunConfig::reference()
}

#[pymodule]
fn skeltensor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(sck_size, m)?)?;
    m.add_function(wrap_pyfunction!(dck_size, m)?)?;
    m.add_function(wrap_pyfunction!(psd_power, m)?)?;
    m.add_function(wrap_pyfunction!(sck_descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(dck_descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(sck_exact, m)?)?;
    m.add_function(wrap_pyfunction!(dck_exact, m)?)?;
    m.add_function(wrap_pyfunction!(synth_actions, m)?)?;
    m.add_function(wrap_pyfunction!(train_eval, m)?)?;
    m.add_function(wrap_pyfunction!(config_reference, m)?)?;
    Ok(())
}
