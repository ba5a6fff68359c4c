use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<R>(f: impl FnOnce(&Bound<'_, PyModule>) -> R) -> R {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "softrbf_py").unwrap();
        softrbf_py::softrbf_py(&m).unwrap();
        f(&m)
    })
}

#[test]
fn scalar_functions_round_trip() {
    with_module(|m| {
        let l: Vec<f64> =
            m.getattr("softmax_lengths").unwrap().call1((vec![0.0, 3f64.ln()],)).unwrap().extract().unwrap();
        assert!((l[0] - 0.25).abs() < 1e-12);
        let ei: f64 = m.getattr("expected_improvement").unwrap().call1((0.0, 1.0, 0.0)).unwrap().extract().unwrap();
        assert!((ei - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    });
}

#[test]
fn invalid_input_raises_value_error() {
    with_module(|m| {
        let err = m.getattr("gauss_deriv_1d").unwrap().call1((0.0, 0.0, -1.0, 1u8)).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
        let err = m.getattr("default_settings").unwrap().call1(("tc9",)).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
    });
}

#[test]
fn run_case_returns_report() {
    with_module(|m| {
        let py = m.py();
        let json: String = m.getattr("default_settings").unwrap().call1(("tc2",)).unwrap().extract().unwrap();
        let r = m.getattr("run_case").unwrap().call1(("tc2", json)).unwrap();
        let passed: bool = r.getattr("passed").unwrap().extract().unwrap();
        let err: f64 = r.getattr("max_error").unwrap().extract().unwrap();
        assert!(passed && err <= 1e-4);
        let kwargs = PyDict::new(py);
        kwargs.set_item("settings_json", "{\"nope\": 1}").unwrap();
        assert!(m.getattr("run_case").unwrap().call(("tc2",), Some(&kwargs)).is_err());
    });
}
