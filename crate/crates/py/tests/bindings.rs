use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_runs_the_pendulum() {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "melnikov").unwrap();
        melnikov::melnikov(&m).unwrap();
        let sys = m.getattr("System").unwrap().call_method1("fixture", ("pendulum",)).unwrap();
        let kw = PyDict::new(py);
        kw.set_item("kmax", 3).unwrap();
        let doc = sys.call_method("run", (), Some(&kw)).unwrap();
        let zeros = doc.get_item("zeros").unwrap();
        assert_eq!(zeros.len().unwrap(), 2);
        let br = sys.call_method1("branch", ("1:-:0",)).unwrap();
        assert_eq!(br.getattr("pp").unwrap().extract::<usize>().unwrap(), 1);
        assert!(br.getattr("exact").unwrap().extract::<bool>().unwrap());
    });
}

#[test]
fn validation_errors_become_value_errors() {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "melnikov").unwrap();
        melnikov::melnikov(&m).unwrap();
        let e = m
            .getattr("System")
            .unwrap()
            .call_method1("from_json", (r#"{"omega": ["1", "-2", "1"], "A0": "1", "resonance": {"p": 0, "q": 1}}"#,))
            .unwrap_err();
        assert!(e.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
