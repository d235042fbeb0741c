import json

import numpy as np
import pytest

from pmdplearn import index_expressions, instantiate, parse_model, render
from pmdplearn.bench import FAMILIES, BenchmarkSpec, draw_true_params, generate, make_model
from pmdplearn.geometry import build_region
from pmdplearn.rvi import evaluate_policy, optimal_policy

from conftest import intervals_for


def test_chain3_reach_value():
    b = generate(BenchmarkSpec("chain", (3,), 0, true_params=[0.5]))
    pol, v = optimal_policy(b.truth, b.objective)
    assert v[b.model.initial] == pytest.approx(0.25, abs=1e-12)


def test_betting_has_two_params_and_base_win_expression():
    m = make_model("betting_game", (5,))
    idx = index_expressions(m)
    assert len(m.params) == 2
    names = {idx.exprs[i].to_string(m.params.names) for i in idx.unknown}
    assert "theta1" in names


def test_glider_needs_auxiliary_variables():
    m = make_model("glider", (5, 5))
    idx = index_expressions(m)
    assert any(f.degree() == 2 for f in idx.exprs)
    region = build_region(idx, intervals_for(idx, {}), m.params)
    assert region.dim > len(m.params) and region.products


def test_engagement_standing_constraint_respected():
    m = make_model("engagement", (5,))
    assert m.params.constraints
    for seed in range(20):
        v = draw_true_params(m.params, seed)
        assert v.sum() <= 1
        instantiate(m, v)


@pytest.mark.parametrize("family,size", [("chain", (4,)), ("betting_game", (3,)), ("parallel_betting", (2,)),
                                         ("glider", (3, 3)), ("engagement", (4,))])
def test_generate_is_deterministic_and_interior(family, size):
    a = generate(BenchmarkSpec(family, size, 3))
    b = generate(BenchmarkSpec(family, size, 3))
    assert np.array_equal(a.true_params, b.true_params) and render(a.model) == render(b.model)
    lo, hi = a.model.params.lower, a.model.params.upper
    assert np.all(a.true_params > lo) and np.all(a.true_params < hi)
    assert json.loads(a.truth_json())["params"].keys() == set(a.model.params.names)
    assert a.info["states"] == a.model.n_states


def test_values_are_finite_on_truth():
    for family, size in [("glider", (4, 4)), ("engagement", (5,)), ("betting_game", (4,))]:
        b = generate(BenchmarkSpec(family, size, 1))
        _, v = optimal_policy(b.truth, b.objective)
        assert np.isfinite(v[b.model.initial])


def test_size_validation():
    with pytest.raises(ValueError):
        make_model("chain", (1,))
    with pytest.raises(ValueError):
        make_model("glider", (5,))
    with pytest.raises(ValueError):
        make_model("tetris", (3,))
    assert set(FAMILIES) == {"chain", "betting_game", "parallel_betting", "glider", "engagement"}
