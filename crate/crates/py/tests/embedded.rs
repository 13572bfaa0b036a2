use pyo3::ffi::c_str;
use pyo3::prelude::*;

use fragxsite_py::fragxsite_py as module;

#[test]
fn module_runs_in_embedded_interpreter() {
    pyo3::append_to_inittab!(module);
    Python::initialize();
    Python::attach(|py| {
        let code = c_str!(
            r#"
import fragxsite_py as fx
assert len(fx.cleavable_bonds("CC(=O)Nc1ccc(O)cc1")) == 2
assert len(fx.fragment("CC(=O)Nc1ccc(O)cc1")) == 6
cfg = fx.Config("[model]\ngnn_hidden = 8\nembed_dim = 8\nheads = 2\n[train]\nepochs = 2\nbatch_size = 8\n")
data = fx.Dataset.synthetic(cfg, n_samples=20, n_proteins=2)
model = fx.Model(cfg)
hist = model.train(data)
assert len(hist["epochs"]) == 2
for p in model.predict(data):
    assert 0.0 < p["probability"] < 1.0
    assert abs(sum(p["fragment_scores"]) - 1.0) < 1e-6
"#
        );
        py.run(code, None, None).unwrap();
    });
}
