from fractions import Fraction as F

import pytest
from conftest import one_period, option, two_period_kernel
from hypothesis import given
from hypothesis import strategies as st

from robust_ftap.arbitrage import (
    Verdict,
    approximate_class,
    check_na,
    check_sna,
    find_witness_measure,
    moment_errors,
    validate_approximate,
    validate_arbitrage,
    validate_martingale,
)
from robust_ftap.generate import GeneratorConfig, generate, suite_config
from robust_ftap.lp import vertex_enumerate
from robust_ftap.market import (
    Claim,
    Market,
    Measure,
    ModelError,
    PriorSet,
    ScenarioTree,
)
from robust_ftap.oracles import oracle_max_weight, oracle_na, oracle_sna

# Frozen from the vertex-enumeration oracle: the only vertex of the binomial
# martingale polytope, and the largest middle weight of the trinomial polytope
# (the point mass on the unmoved state is itself a martingale measure).
BINOMIAL_Q = {"u": F(1, 3), "d": F(2, 3)}
TRINOMIAL_MID_MAX = F(1)


def test_frozen_oracle_values(binomial, trinomial):
    verts = vertex_enumerate([([1, 0], ">=", 0), ([0, 1], ">=", 0), ([1, 1], "==", 1), ([1, F(-1, 2)], "==", 0)], 2)
    assert verts == [(BINOMIAL_Q["u"], BINOMIAL_Q["d"])]
    assert oracle_max_weight(trinomial, "mid") == TRINOMIAL_MID_MAX


def test_binomial_has_unique_measure(binomial):
    v = check_na(binomial)
    assert v.kind is Verdict.NO_ARBITRAGE
    for leaf, q, delta in v.measures:
        assert q.weights == BINOMIAL_Q and delta == BINOMIAL_Q[leaf]
    q, delta = find_witness_measure(binomial, "u")
    assert q.weights == BINOMIAL_Q and delta == F(1, 3)


def test_rising_market_is_arbitrage(rising):
    v = check_na(rising)
    assert v.kind is Verdict.ARBITRAGE
    assert validate_arbitrage(rising, v.witness)
    # every witness is a positive multiple of buying the asset
    (h,) = v.witness.dynamic["r"]
    assert h > 0


def test_three_state_na_holds(three_state):
    v = check_na(three_state)
    assert v.ok
    for _, q, delta in v.measures:
        assert delta > 0 and validate_martingale(three_state, q) == []


def test_trinomial_middle_weight(trinomial):
    q, delta = find_witness_measure(trinomial, "mid")
    assert delta == TRINOMIAL_MID_MAX
    assert q.weights == {"mid": 1}


def test_polar_leaf_request_refused():
    m = one_period({"a": 2, "b": F(1, 2), "c": 1}, [{"a": F(1, 2), "b": F(1, 2)}])
    with pytest.raises(ModelError):
        find_witness_measure(m, "c")


def test_witness_request_under_arbitrage_refused(rising):
    with pytest.raises(ModelError):
        find_witness_measure(rising, "d")


def test_vacuous_market_refused(binomial):
    # a kernel whose only child is polar cannot occur; emulate with an empty-support prior set
    with pytest.raises(ModelError):
        Market(binomial.tree, PriorSet.from_flat([{}]))


def test_option_creates_arbitrage(binomial):
    # call on u priced at 1/2 > 1/3: selling it and delta hedging is an arbitrage
    rich = Market(binomial.tree, binomial.priors, (option("call", {"u": F(1, 2), "d": F(-1, 2)}),))
    v = check_na(rich)
    assert v.kind is Verdict.ARBITRAGE and validate_arbitrage(rich, v.witness)
    assert v.witness.static != ()
    fair = Market(binomial.tree, binomial.priors, (option("call", {"u": F(2, 3), "d": F(-1, 3)}),))
    assert check_na(fair).ok


def test_infeasible_polytope_gives_strictly_positive_payoff(rising):
    from robust_ftap.market import portfolio_value

    v = check_na(rising)
    pay = portfolio_value(rising.tree, v.witness)
    assert all(x > 0 for x in pay.values.values())


def test_per_leaf_measures_maximise(three_state):
    v = check_na(three_state, per_leaf=True, threads=2)
    for leaf, q, delta in v.measures:
        assert q[leaf] == delta
        assert delta == find_witness_measure(three_state, leaf)[1]


def test_float_mode_matches(binomial, rising):
    assert check_na(binomial, tol=1e-9).ok
    v = check_na(rising, tol=1e-9)
    assert not v.ok and validate_arbitrage(rising, v.witness, tol=1e-9)


# -- sensitive arbitrage


def test_three_state_sna_fails(three_state):
    s = check_sna(three_state)
    assert s.na.ok and not s.ok
    assert s.claim.values == {"a": 0, "b": 0, "c": 1}
    assert s.hedges["P1"][0] <= 0 and s.hedges["P2"][0] <= 0


def test_single_prior_sna_matches_na(binomial, rising):
    assert check_sna(binomial).ok
    assert not check_sna(rising).ok


def test_kernel_prior_sna_matches_na():
    m = two_period_kernel()
    assert check_sna(m).ok == check_na(m).ok


def test_pure_kernel_selections_break_aggregation():
    """Without mixing kernels at a node, sNA can fail under NA.

    Children move by +1, 0, -1; one kernel sees {+1, 0}, the other {-1, 0}.
    Each pure selection superhedges the indicator of the up state at zero
    cost (buy the asset, or nothing), while the quasi-sure market cannot.
    Mixing kernels at the node restores the equivalence.
    """
    tree = ScenarioTree.build([("r", 0, None, [2]), ("u", 1, "r", [3]), ("m", 1, "r", [2]), ("d", 1, "r", [1])])
    m = Market(tree, PriorSet.from_kernel({"r": [{"u": F(1, 2), "m": F(1, 2)}, {"d": F(1, 2), "m": F(1, 2)}]}))
    assert check_na(m).ok
    assert check_sna(m).ok
    assert oracle_sna(m, convex=True)[0]
    holds, leaf = oracle_sna(m, convex=False)
    assert not holds and leaf == "u"


def test_sna_implies_na_on_generated():
    for seed in range(40):
        m = generate(suite_config(seed))
        s = check_sna(m, threads=1)
        if s.ok:
            assert s.na.ok


# -- approximate classes


def test_exact_witness_valid_for_every_n(binomial):
    ac = approximate_class(binomial, "u", 20)
    assert ac.dominating == "P1" and ac.delta == F(1, 3)
    for n, q in ac.members:
        assert validate_approximate(binomial, q, n, ac.dominating) == []
        assert all(v == 0 for v in moment_errors(binomial, q).values())


def test_threshold_arithmetic(binomial):
    # martingale error exactly 1/10: q(u) = 1/3 + 1/15
    q = Measure({"u": F(2, 5), "d": F(3, 5)})
    assert moment_errors(binomial, q)[("mtg", "r", 0)] == F(1, 10)
    assert validate_approximate(binomial, q, 10, "P1") == []
    assert validate_approximate(binomial, q, 11, "P1") != []


def test_absolute_continuity_enforced(three_state):
    q = Measure({"a": F(1, 3), "b": F(2, 3)})
    assert validate_approximate(three_state, q, 5, "P1") == []
    assert any("absolutely continuous" in p for p in validate_approximate(three_state, q, 5, "P2"))


def test_dominating_prior_must_carry_the_leaf(three_state):
    # c is charged only by P2, whose support admits no martingale measure
    with pytest.raises(ModelError):
        approximate_class(three_state, "c", 3)
    ac = approximate_class(three_state, "a", 3)
    assert ac.dominating == "P1"


@given(st.integers(0, 400), st.integers(1, 60))
def test_perturbed_members_respect_bounds(seed, n_max):
    m = generate(GeneratorConfig(seed=seed, horizon=2, branching=3, priors=1))
    if not check_na(m, threads=1).ok:
        return
    leaf = m.priors.flat[0].support and sorted(m.priors.flat[0].support)[0]
    try:
        ac = approximate_class(m, leaf, n_max, perturb=True)
    except ModelError:
        return
    for n, q in ac.members:
        assert validate_approximate(m, q, n, ac.dominating) == []
        assert q[leaf] >= ac.delta > 0


# -- randomized agreement and invariances


@given(st.integers(0, 10_000))
def test_verdict_matches_oracle(seed):
    m = generate(suite_config(seed))
    v = check_na(m, threads=1)
    assert v.ok == oracle_na(m).na
    if v.ok:
        for _, q, delta in v.measures:
            assert delta > 0 and validate_martingale(m, q) == []
    else:
        assert validate_arbitrage(m, v.witness)


@given(st.integers(0, 10_000), st.fractions(min_value=F(1, 9), max_value=10, max_denominator=9))
def test_scaling_invariance(seed, factor):
    m = generate(suite_config(seed))
    assert check_na(m, threads=1).ok == check_na(m.scaled(factor), threads=1).ok


def test_claim_indicator_helper(three_state):
    c = Claim.indicator(three_state.tree, ["a", "c"])
    assert c.values == {"a": 1, "b": 0, "c": 1}
