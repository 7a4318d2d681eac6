"""Fixed example suite for the command line: input files and invocations.

``write_inputs`` materialises tests/data; ``CASES`` lists each invocation
with its golden name and expected exit code.  Paths in argv are relative to
the data directory and are rewritten by the runner.
"""

import os
from fractions import Fraction as F

from conftest import one_period, option, two_period_kernel

from robust_ftap import jsonio
from robust_ftap.generate import GeneratorConfig, generate
from robust_ftap.market import Claim, PriorSet, ScenarioTree
from robust_ftap.mot import AssetQuotes, CallQuoteSheet, DiscreteMarginal

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "data")
GOLDEN = os.path.join(HERE, "golden")


def _inputs() -> dict:
    half = {"u": F(1, 2), "d": F(1, 2)}
    binomial = one_period({"u": 2, "d": F(1, 2)}, [half])
    three = one_period({"a": 2, "b": F(1, 2), "c": 2}, [{"a": F(1, 2), "b": F(1, 2)}, {"c": 1}])
    kernel = two_period_kernel()
    half_two_tree = ScenarioTree.build([("r", 0, None, [1]), ("u", 1, "r", [2]), ("d", 1, "r", [F(1, 2)])])
    docs = {
        "binomial.json": jsonio.market_to_json(binomial),
        "rising.json": jsonio.market_to_json(one_period({"u": 2, "d": F(3, 2)}, [half])),
        "three_state.json": jsonio.market_to_json(three),
        "kernel.json": jsonio.market_to_json(kernel),
        "binomial_call.json": jsonio.market_to_json(
            one_period({"u": 2, "d": F(1, 2)}, [half], options=[option("call", {"u": F(2, 3), "d": F(-1, 3)})])
        ),
        "suite_arbitrage.json": jsonio.market_to_json(
            generate(GeneratorConfig(seed=11, horizon=3, branching=3, assets=2, priors=3))
        ),
        "suite_fair.json": jsonio.market_to_json(
            generate(GeneratorConfig(seed=16, horizon=3, branching=3, assets=2, priors=3))
        ),
        "claim_call.json": jsonio.claim_to_json(Claim({"u": 1, "d": 0})),
        "claim_c.json": jsonio.claim_to_json(Claim({"a": 0, "b": 0, "c": 1})),
        "claim_kernel.json": jsonio.claim_to_json(Claim({w: F(i) for i, w in enumerate(kernel.tree.leaves)})),
        "quotes_worked.json": jsonio.quotes_to_json(
            CallQuoteSheet({"S": AssetQuotes(F(1), ((F(1), F(1, 4)), (F(2), F(0))))})
        ),
        "quotes_spread.json": jsonio.quotes_to_json(
            CallQuoteSheet({"S": AssetQuotes(F(1), ((F(1), F(3, 5)), (F(2), F(7, 10)), (F(3), F(0))))})
        ),
        "quotes_half_two.json": jsonio.quotes_to_json(
            CallQuoteSheet({"S": AssetQuotes(F(1), ((F(1, 2), F(1, 2)), (F(2), F(0))))})
        ),
        "tree_half_two.json": {"schema": jsonio.SCHEMA_VERSION, **jsonio.tree_to_json(half_two_tree)},
        "priors_uniform.json": {"schema": jsonio.SCHEMA_VERSION, **jsonio.priors_to_json(PriorSet.from_flat([half]))},
        "mu_point.json": jsonio.marginal_to_json(DiscreteMarginal(((1, 1),))),
        "nu_spread.json": jsonio.marginal_to_json(DiscreteMarginal(((0, F(1, 2)), (2, F(1, 2))))),
    }
    bad = jsonio.market_to_json(binomial)
    bad["nodes"][1]["prices"] = ["two"]
    docs["malformed.json"] = bad
    return docs


def write_inputs() -> None:
    os.makedirs(DATA, exist_ok=True)
    for name, doc in _inputs().items():
        with open(os.path.join(DATA, name), "w", encoding="utf-8") as fh:
            fh.write(jsonio.dumps(doc))


# (golden name, argv, expected exit code); "@name" marks a data file
CASES = [
    ("check_na_binomial", ["check-na", "--market", "@binomial.json"], 0),
    ("check_na_rising", ["check-na", "--market", "@rising.json"], 2),
    ("check_na_three_state_per_leaf", ["check-na", "--market", "@three_state.json", "--per-leaf"], 0),
    ("check_na_suite_arbitrage", ["check-na", "--market", "@suite_arbitrage.json"], 2),
    ("check_na_suite_fair", ["check-na", "--market", "@suite_fair.json", "--per-leaf"], 0),
    ("check_sna_suite_fair", ["check-sna", "--market", "@suite_fair.json"], 0),
    ("check_na_binomial_float", ["check-na", "--market", "@binomial.json", "--tol", "1e-9"], 0),
    ("check_sna_three_state", ["check-sna", "--market", "@three_state.json"], 2),
    ("check_sna_kernel", ["check-sna", "--market", "@kernel.json"], 0),
    ("superhedge_binomial", ["superhedge", "--market", "@binomial.json", "--claim", "@claim_call.json", "--dual"], 0),
    ("superhedge_three_state", [
        "superhedge", "--market", "@three_state.json", "--claim", "@claim_c.json", "--sensitivity", "--dual",
    ], 0),
    ("superhedge_three_state_capped", [
        "superhedge", "--market", "@three_state.json", "--claim", "@claim_c.json", "--prior", "P2", "--cap", "1",
    ], 0),
    ("superhedge_kernel", ["superhedge", "--market", "@kernel.json", "--claim", "@claim_kernel.json", "--sensitivity"], 0),
    ("superhedge_option", ["superhedge", "--market", "@binomial_call.json", "--claim", "@claim_call.json", "--dual"], 0),
    ("measures_binomial", ["measures", "--market", "@binomial.json", "--leaf", "u", "--n-max", "5"], 0),
    ("measures_binomial_perturb", ["measures", "--market", "@binomial.json", "--leaf", "d", "--n-max", "5", "--perturb"], 0),
    ("calibrate_worked", ["calibrate", "--quotes", "@quotes_worked.json"], 0),
    ("calibrate_spread", ["calibrate", "--quotes", "@quotes_spread.json"], 2),
    ("calibrate_emit", [
        "calibrate", "--quotes", "@quotes_half_two.json", "--tree", "@tree_half_two.json",
        "--priors", "@priors_uniform.json", "--emit-market", "+emitted_market.json",
    ], 0),
    ("convex_order_ordered", ["convex-order", "--mu", "@mu_point.json", "--nu", "@nu_spread.json"], 0),
    ("convex_order_reversed", ["convex-order", "--mu", "@nu_spread.json", "--nu", "@mu_point.json"], 2),
    ("generate_seed1", ["generate", "--seed", "1", "--horizon", "1", "--branching", "2"], 0),
]


def resolve(argv, outdir):
    """``@x`` becomes a data path, ``+x`` a path in ``outdir``."""
    out = []
    for a in argv:
        if a.startswith("@"):
            out.append(os.path.join(DATA, a[1:]))
        elif a.startswith("+"):
            out.append(os.path.join(outdir, a[1:]))
        else:
            out.append(a)
    return out


def extra_outputs(argv) -> list:
    return [a[1:] for a in argv if a.startswith("+")]
