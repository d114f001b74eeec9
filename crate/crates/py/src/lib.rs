use mtms_core::protocol::Variant;
use mtms_core::sim::{self, ResultRow, RunOptions, ScenarioConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn parse_config(toml: Option<&str>) -> PyResult<ScenarioConfig> {
    match toml {
        Some(text) => ScenarioConfig::from_toml_str(text).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn row_dict<'py>(py: Python<'py>, row: &ResultRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("seed", row.seed)?;
    d.set_item("variant", row.variant.name())?;
    d.set_item("malicious_pct", row.malicious_pct)?;
    d.set_item("file_bits", row.file_bits)?;
    d.set_item("wasted_capacity_pct", row.wasted_capacity_pct)?;
    d.set_item("mean_noncorrupted_kbits", row.mean_noncorrupted_kbits)?;
    d.set_item("wasted_energy_frac", row.wasted_energy_frac)?;
    d.set_item("relay_sec_pct", row.relay_sec_pct)?;
    d.set_item("receiver_sec_pct", row.receiver_sec_pct)?;
    d.set_item("download_energy_j", row.download_energy_j)?;
    d.set_item("fallback_flag", row.fallback_flag)?;
    Ok(d)
}

/// Default configuration as TOML text.
#[pyfunction]
fn default_config() -> String {
    ScenarioConfig::default().to_toml()
}

/// Validates a TOML config and returns its hash.
#[pyfunction]
fn validate_config(toml: &str) -> PyResult<String> {
    Ok(parse_config(Some(toml))?.hash())
}

/// One run. Keyword overrides are applied on top of the TOML (or defaults).
#[pyfunction]
#[pyo3(signature = (toml=None, *, variant=None, seed=None, malicious_fraction=None, file_bits=None, devices=None))]
fn run<'py>(
    py: Python<'py>,
    toml: Option<&str>,
    variant: Option<&str>,
    seed: Option<u64>,
    malicious_fraction: Option<f64>,
    file_bits: Option<u64>,
    devices: Option<u32>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = parse_config(toml)?;
    if let Some(v) = variant {
        cfg.variant = v.parse::<Variant>().map_err(|e| PyValueError::new_err(e.to_string()))?;
    }
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.malicious_fraction = malicious_fraction.unwrap_or(cfg.malicious_fraction);
    cfg.file_bits = file_bits.unwrap_or(cfg.file_bits);
    cfg.devices = devices.unwrap_or(cfg.devices);
    let result = py
        .detach(|| sim::run_config(&cfg, RunOptions::default()))
        .map_err(|e| match e {
            sim::RunError::Config(c) => PyValueError::new_err(c.to_string()),
            other => PyRuntimeError::new_err(other.to_string()),
        })?;
    let d = row_dict(py, &result.row)?;
    d.set_item("config_hash", result.config_hash)?;
    d.set_item("edge_devices", result.edge_devices)?;
    d.set_item("relays", result.relays)?;
    Ok(d)
}

/// Runs the `[sweep]` grid of the config; returns one dict per row.
#[pyfunction]
#[pyo3(signature = (toml=None, parallel=true))]
fn sweep<'py>(py: Python<'py>, toml: Option<&str>, parallel: bool) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = parse_config(toml)?;
    let out = py.detach(|| sim::sweep(&cfg, &cfg.sweep, parallel));
    if let Some(f) = out.failures.first() {
        return Err(PyRuntimeError::new_err(format!(
            "{} sweep points failed, first: {}",
            out.failures.len(),
            f.error
        )));
    }
    out.results.iter().map(|r| row_dict(py, &r.row)).collect()
}

/// Rows as results CSV text.
#[pyfunction]
#[pyo3(signature = (toml=None, parallel=true))]
fn sweep_csv(py: Python<'_>, toml: Option<&str>, parallel: bool) -> PyResult<String> {
    let cfg = parse_config(toml)?;
    let out = py.detach(|| sim::sweep(&cfg, &cfg.sweep, parallel));
    let rows: Vec<ResultRow> = out.results.into_iter().map(|r| r.row).collect();
    Ok(sim::results_to_string(&rows))
}

#[pymodule]
fn mtms(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add("RESULT_COLUMNS", sim::RESULT_COLUMNS.to_vec())?;
    Ok(())
}
