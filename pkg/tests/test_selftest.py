import json

import pytest

from mzapprox import equispaced_torus_layer, frame_bounds, torus_degree
from mzapprox.mz import layer_to_json
from mzapprox.selftest import CHECKS, check_layer_file, selftest

MODULES = ["manifold-core", "mz-families", "approx-operators", "quadrature", "function-spaces", "experiments"]


def test_registry_covers_every_module():
    mods = {module for module, _name, _fn in CHECKS}
    assert mods == set(MODULES)


@pytest.mark.parametrize("module", ["quadrature", "function-spaces"])
def test_module_subsets_pass(module):
    report = selftest(only=module)
    assert report.results and report.passed, report.lines()


def test_good_layer_file(tmp_path):
    layer = equispaced_torus_layer(1, torus_degree(6))
    path = tmp_path / "ok.json"
    path.write_text(json.dumps(layer_to_json(layer.certified(frame_bounds(layer)))))
    checks = check_layer_file(path)
    assert all(c.passed for c in checks), [c.line() for c in checks]


def test_corrupted_layer_file_names_the_invariant(tmp_path):
    obj = layer_to_json(equispaced_torus_layer(1, torus_degree(6)))
    obj["weights"][3] = -0.5
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    failed = [c for c in check_layer_file(path) if not c.passed]
    assert any(c.name == "positive-weights" for c in failed)
    report = selftest(only="manifold-core/dimension", layer_files=[path])
    assert not report.passed
    assert any("positive-weights" in line and line.startswith("FAIL") for line in report.lines())


def test_unreadable_layer_file(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{")
    checks = check_layer_file(path)
    assert not checks[0].passed and checks[0].name == "readable"


def test_truncated_weights_fail_length_check(tmp_path):
    obj = layer_to_json(equispaced_torus_layer(1, torus_degree(6)))
    obj["weights"] = obj["weights"][:-2]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(obj))
    failed = {c.name for c in check_layer_file(path) if not c.passed}
    assert "length-match" in failed
