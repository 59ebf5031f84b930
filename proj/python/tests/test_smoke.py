import json
import math

import numpy as np
import pytest

import embedlab


def theta_a():
    return embedlab.Params.from_vector([1, 2, 1], np.array([1.0, 2.0, 0.0, 0.0, 1.0, -1.0, 0.5]))


def test_forward_matches_closed_form():
    x = 0.7
    y = embedlab.forward(theta_a(), np.array([x]))
    assert y[0] == pytest.approx(math.tanh(x) - math.tanh(2 * x) + 0.5, abs=1e-15)


def test_params_layout():
    t = theta_a()
    assert t.widths == [1, 2, 1]
    assert len(t) == 7
    np.testing.assert_array_equal(t.weight(2), [[1.0, -1.0]])
    np.testing.assert_array_equal(t.bias(2), [0.5])


def test_bad_vector_length_raises():
    with pytest.raises(Exception):
        embedlab.Params.from_vector([1, 2, 1], np.zeros(5))


def test_embeddings_preserve_outputs():
    t = embedlab.Params.random([2, 3, 1], 1.0, 4)
    xs = np.random.default_rng(0).uniform(-2, 2, size=(50, 2))
    for wide in (
        embedlab.null_embed(t, 1, 0.3),
        embedlab.split_embed(t, 1, 2, 0.25),
        embedlab.global_threefold(t),
    ):
        assert embedlab.output_residual(t, wide, xs) <= 1e-12
    wide, residual = embedlab.sampled_embedding(t, [[1, 2], [1, 2, 3, 3, 0], [1]], seed=2)
    assert wide.widths == [2, 5, 1]
    assert residual <= 1e-8
    assert embedlab.output_residual(t, wide, xs) <= 1e-10


def test_critical_point_stays_critical_after_threefold():
    x = np.array([[-1.0], [0.0], [1.0]])
    y = np.array([[0.0], [1.0], [0.0]])
    params, risk, grad = embedlab.find_critical([1, 1, 1], x, y, seed=0)
    assert grad <= 1e-8
    assert risk > 0.1
    wide = embedlab.global_threefold(params)
    assert np.max(np.abs(embedlab.gradient(wide, x, y))) <= 1e-6
    h, eigs = embedlab.hessian(wide, x, y)
    np.testing.assert_allclose(h, h.T, atol=0)
    assert eigs[0] < -1e-6


def test_cli_roundtrip(tmp_path):
    params = tmp_path / "theta.json"
    params.write_text(json.dumps({
        "widths": [1, 2, 1],
        "activation": "tanh",
        "layers": [{"W": [[1.0], [2.0]], "b": [0.0, 0.0]}, {"W": [[1.0, -1.0]], "b": [0.5]}],
    }))
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "threefold"}))
    code, out, _ = embedlab.run_cli(["embed", "--params", str(params), "--spec", str(spec), "--out", str(tmp_path / "o")])
    assert code == 0
    assert "(1,6,1)" in out
    wide = json.loads((tmp_path / "o" / "wide_params.json").read_text())
    assert wide["widths"] == [1, 6, 1]
    code, _, err = embedlab.run_cli(["embed", "--spec", str(spec)])
    assert code == 2
    assert "--params" in err
