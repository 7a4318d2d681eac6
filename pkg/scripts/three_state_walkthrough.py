"""Walk through the three-state market where NA holds but sNA fails.

One asset moves 1 -> {2, 1/2, 2} on states a, b, c.  Prior P1 sees a and b,
prior P2 sees only c.  Each prior alone superhedges the indicator of c more
cheaply than the quasi-sure market can.
"""

from fractions import Fraction as F

from robust_ftap.arbitrage import check_na, check_sna
from robust_ftap.market import Claim, Market, PriorSet, ScenarioTree
from robust_ftap.superhedge import sensitivity_report, superhedge_per_prior, superhedge_qs


def main():
    tree = ScenarioTree.build([("r", 0, None, [1]), ("a", 1, "r", [2]), ("b", 1, "r", [F(1, 2)]), ("c", 1, "r", [2])])
    m = Market(tree, PriorSet.from_flat([{"a": F(1, 2), "b": F(1, 2)}, {"c": 1}], ["P1", "P2"]))
    x = Claim({"a": 0, "b": 0, "c": 1})

    na = check_na(m)
    print("NA:", na.kind.value)
    for leaf, q, delta in na.measures:
        print(f"  leaf {leaf}: measure {dict((k, str(v)) for k, v in q.weights.items())}, weight {delta}")

    res = superhedge_qs(m, x, binding=True)
    print("quasi-sure price of 1_c:", res.price, "hedge", {n: [str(h) for h in v] for n, v in res.strategy.dynamic.items()})
    for p in ("P1", "P2"):
        print(f"price under {p}:", superhedge_per_prior(m, x, p).price)
    print("capped P2 price (lambda = 1):", superhedge_per_prior(m, x, "P2", cap=1).price)

    rep = sensitivity_report(m, x)
    print("gap:", rep.gap)
    s = check_sna(m)
    print("sNA:", s.kind.value, "claim", {k: str(v) for k, v in s.claim.values.items()})


if __name__ == "__main__":
    main()
