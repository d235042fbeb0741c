import numpy as np
import pytest

from pmdplearn import (
    ModelError,
    ModelSyntaxError,
    index_expressions,
    instantiate,
    parse_model,
    render,
)
from pmdplearn.bench import draw_true_params, make_model

from conftest import COIN

SMALL = {
    "chain": (4,),
    "betting_game": (3,),
    "parallel_betting": (2,),
    "glider": (3, 3),
    "engagement": (4,),
}


def test_minimal_two_state_model(coin):
    assert coin.n_states == 3
    assert len(index_expressions(coin).exprs) == 2


def test_duplicate_expression_rejected():
    text = "params: theta1 in [0,1];\nstate s0 { action a { -> s1 : theta1; -> s2 : theta1; } }\nstate s1 { }\nstate s2 { }"
    with pytest.raises(ModelError, match="duplicate expression within distribution"):
        parse_model(text)


def test_sum_not_one_rejected():
    text = "params: theta1 in [0,1];\nstate s0 { action a { -> s1 : 0.5*theta1; -> s2 : 0.5 - 0.5*theta1; } }\nstate s1 { }\nstate s2 { }"
    with pytest.raises(ModelError, match="sum to 1/2"):
        parse_model(text)


def test_expression_leaving_unit_interval_rejected():
    text = "params: theta1 in [0,1];\nstate s0 { action a { -> s1 : 2*theta1; -> s2 : 1 - 2*theta1; } }\nstate s1 { }\nstate s2 { }"
    with pytest.raises(ModelError, match="leaves"):
        parse_model(text)


@pytest.mark.parametrize("bad", [
    "params: theta1 in [0,1];\nstate s0 { action a { -> s1 : theta1 } }",
    "params: theta1 in [0,1];\nstate s0 { action a { -> s1 : theta9; } }",
    "params: theta1 in [0,1];\nstate s0 { action a { -> s1 : theta1 $ 2; } }",
])
def test_syntax_errors_carry_position(bad):
    with pytest.raises(ModelSyntaxError) as e:
        parse_model(bad)
    assert "line" in str(e.value)


def test_rewards_parsed():
    m = parse_model(COIN + "reward s0 a = 3/2;\n")
    assert m.rewards == {(m.states.index("s0"), 0): 1.5}
    with pytest.raises(ModelSyntaxError, match="duplicate reward"):
        parse_model(COIN + "reward s0 a = 1;\nreward s0 a = 2;\n")


def test_instantiate(coin):
    mdp = instantiate(coin, [0.25])
    s0 = coin.states.index("s0")
    assert [p for _, p in mdp.trans[(s0, 0)]] == [0.25, 0.75]
    with pytest.raises(ModelError, match="instantiation outside parameter space"):
        instantiate(coin, [1.5])


def test_instantiate_bilinear():
    text = "params: th in [0,1], tv in [0,1];\nstate s0 { action a { -> s1 : th*tv; -> s0 : 1 - th*tv; } }\nstate s1 { }"
    mdp = instantiate(parse_model(text), [0.2, 0.5])
    assert abs(mdp.trans[(0, 0)][0][1] - 0.1) < 1e-15


def test_index_pools_across_states():
    text = """params: theta1 in [0,1];
state s0 { action a { -> s1 : theta1; -> s3 : 1 - theta1; } }
state s1 { action a { -> s2 : theta1; -> s3 : 1 - theta1; } }
state s2 { action a { -> s3 : theta1; -> s0 : 1 - theta1; } }
state s3 { }"""
    idx = index_expressions(parse_model(text))
    assert len(idx.exprs) == 2
    assert len(idx.occ[0]) == 3


def test_index_linear_forms_with_complements():
    text = """params: t1 in [0,1], t2 in [0,1];
state s0 {
  action u { -> s1 : 0.5*t1 + 0.5*t2; -> s2 : 1 - 0.5*t1 - 0.5*t2; }
  action v { -> s1 : 0.3*t1 + 0.7*t2; -> s2 : 1 - 0.3*t1 - 0.7*t2; }
  action w { -> s1 : 0.9*t1 + 0.1*t2; -> s2 : 1 - 0.9*t1 - 0.1*t2; }
}
state s1 { }
state s2 { }"""
    assert len(index_expressions(parse_model(text)).exprs) == 6


def test_all_constant_model_has_no_unknowns():
    text = "params: t in [0,1];\nstate s0 { action a { -> s1 : 0.3; -> s0 : 0.7; } }\nstate s1 { }"
    assert index_expressions(parse_model(text)).unknown == []


@pytest.mark.parametrize("family", sorted(SMALL))
def test_render_parse_round_trip(family):
    m = make_model(family, SMALL[family])
    again = parse_model(render(m))
    assert again.canonical() == m.canonical()


@pytest.mark.parametrize("family", sorted(SMALL))
def test_random_instantiations_are_distributions(family):
    m = make_model(family, SMALL[family])
    for seed in range(20):
        v = draw_true_params(m.params, seed, margin=0.0)
        mdp = instantiate(m, v)
        for sa in mdp.sa_pairs:
            p = np.array([q for _, q in mdp.trans[sa]])
            assert p.min() >= -1e-12 and abs(p.sum() - 1) < 1e-9
