use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_solves_and_reports_errors() {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(regretforge_py::regretforge_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("rf", m).unwrap();
        let code = c"
game = rf.Game.biased_shapley(0.25)
rows = rf.solve(game, 'pcfr+', 256)
assert [r['step'] for r in rows] == [1, 2, 4, 8, 16, 32, 64, 128, 256]
assert rows[-1]['nash_gap'] < rows[0]['nash_gap']
assert 'npcfr+' in rf.ALGORITHMS
try:
    rf.solve(game, 'nope', 4)
    raise AssertionError('accepted unknown algorithm')
except ValueError as e:
    assert 'nope' in str(e)
try:
    rf.solve(game, 'npcfr', 4)
    raise AssertionError('neural solve without predictor')
except RuntimeError:
    pass
";
        py.run(code, Some(&globals), None).unwrap();
    });
}
