from fractions import Fraction as F

import pytest
from hypothesis import HealthCheck, settings

from robust_ftap.market import Market, PriorSet, ScenarioTree, StaticOption

settings.register_profile(
    "repo", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def one_period(prices: dict, priors: list, spot=1, options=()) -> Market:
    tree = ScenarioTree.build([("r", 0, None, [spot])] + [(k, 1, "r", [v]) for k, v in prices.items()])
    return Market(tree, PriorSet.from_flat(priors), tuple(options))


@pytest.fixture
def binomial():
    return one_period({"u": 2, "d": F(1, 2)}, [{"u": F(1, 2), "d": F(1, 2)}])


@pytest.fixture
def rising():
    return one_period({"u": 2, "d": F(3, 2)}, [{"u": F(1, 2), "d": F(1, 2)}])


@pytest.fixture
def three_state():
    """S_1 = 2, 1/2, 2 on a, b, c; P1 sees {a, b}, P2 only c."""
    return one_period(
        {"a": 2, "b": F(1, 2), "c": 2},
        [{"a": F(1, 2), "b": F(1, 2)}, {"c": 1}],
    )


@pytest.fixture
def trinomial():
    return one_period({"hi": 2, "mid": 1, "lo": F(1, 2)}, [{"hi": F(1, 3), "mid": F(1, 3), "lo": F(1, 3)}])


@pytest.fixture
def binomial_call(binomial):
    payoff = {"u": F(1), "d": F(0)}
    return binomial, payoff


def two_period_kernel() -> Market:
    """Node u's kernels never reach uu."""
    tree = ScenarioTree.build([
        ("r", 0, None, [4]),
        ("u", 1, "r", [6]), ("d", 1, "r", [2]),
        ("uu", 2, "u", [9]), ("um", 2, "u", [7]), ("ud", 2, "u", [3]),
        ("du", 2, "d", [3]), ("dd", 2, "d", [1]),
    ])
    kernel = {
        "r": [{"u": F(1, 2), "d": F(1, 2)}],
        "u": [{"um": 1}, {"um": F(1, 2), "ud": F(1, 2)}],
        "d": [{"du": F(1, 2), "dd": F(1, 2)}],
    }
    return Market(tree, PriorSet.from_kernel(kernel))


def option(label, payoff):
    return StaticOption(label, {k: F(v) for k, v in payoff.items()})
