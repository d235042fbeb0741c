import numpy as np
import pytest

from pmdplearn import index_expressions, parse_model
from pmdplearn.bench import BenchmarkSpec, generate
from pmdplearn.sampling import CountTable, pool
from pmdplearn.stats import ConfidenceConfig, IntervalTable, learn_intervals

COIN = """
params: theta1 in [0,1];
target: s1;
state s0 { action a { -> s1 : theta1; -> s2 : 1 - theta1; } }
state s1 { }
state s2 { }
"""


def intervals_for(idx, bounds):
    """IntervalTable with given (lo, hi) per expression id; constants pinned."""
    n = len(idx.exprs)
    lo, hi = np.zeros(n), np.ones(n)
    const = np.array([idx.is_known(i) for i in range(n)])
    for i in range(n):
        if const[i]:
            lo[i] = hi[i] = float(idx.exprs[i].constant_value())
        elif i in bounds:
            lo[i], hi[i] = bounds[i]
    z = np.zeros(n, dtype=np.int64)
    return IntervalTable(list(idx.exprs), lo, hi, z, z.copy(), ~const & False, const)


def expr_id(idx, m, text):
    """Id of the expression whose printed form is ``text``."""
    for i, f in enumerate(idx.exprs):
        if f.to_string(m.params.names) == text:
            return i
    raise KeyError(text)


def learned(m, counts, delta=0.05):
    idx = index_expressions(m)
    return idx, learn_intervals(idx, pool(m, idx, counts), ConfidenceConfig(delta=delta))


@pytest.fixture
def coin():
    return parse_model(COIN)


@pytest.fixture(scope="session")
def chain5():
    return generate(BenchmarkSpec("chain", (5,), 0))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
