"""Brute-force referees for the arbitrage engine.

Two independent routes decide NA and must agree:

* measure side: vertices of martingale polytopes.  Without options the
  polytope factorises over nodes, so each node's one-step polytope (at most
  ``branching`` dimensions) is enumerated and viability propagates bottom-up.
  With options the global polytope on the support leaves is enumerated.
* strategy side: ``max sum z`` subject to ``payoff >= z`` and ``0 <= z <= 1``
  over all semi-static strategies; NA holds iff the optimum is 0.

Neither route uses the engine's interior-point program or its certificates.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import lp
from .market import (
    Claim,
    Market,
    ModelError,
    flat_expansion,
    polar_set,
)

MAX_LEAVES = 64
MAX_ASSETS = 2
MAX_GLOBAL_LEAVES = 12


class OracleDisagreement(AssertionError):
    pass


@dataclass(frozen=True)
class OracleVerdict:
    na: bool
    measure_side: bool
    strategy_side: bool
    uncharged: tuple = ()  # non-polar leaves no martingale measure charges


def _check_scale(market: Market) -> None:
    if len(market.tree.leaves) > MAX_LEAVES or market.tree.assets > MAX_ASSETS:
        raise ModelError(f"oracle scale is at most {MAX_LEAVES} leaves and {MAX_ASSETS} assets")


def _qs_nodes(market: Market) -> set:
    polar = polar_set(market.tree, market.priors)
    nodes = set()
    for w in polar.qs_support:
        nodes.update(market.tree.path(w))
    return nodes


def _local_vertices(market: Market, node: str, kids: list) -> list:
    """Vertices of ``{q >= 0, sum q = 1, sum q dS = 0}`` over ``kids``."""
    tree = market.tree
    dim = len(kids)
    cons = [([1 if i == k else 0 for i in range(dim)], ">=", 0) for k in range(dim)]
    cons.append(([1] * dim, "==", 1))
    for j in range(tree.assets):
        cons.append(([tree.delta(c)[j] for c in kids], "==", 0))
    return lp.vertex_enumerate(cons, dim)


def measure_side_local(market: Market) -> tuple:
    """Non-polar leaves that no martingale measure charges (option-free)."""
    tree = market.tree
    nodes = _qs_nodes(market)
    viable = {w: True for w in tree.leaves if w in nodes}
    chargeable: dict = {}
    for t in range(tree.horizon - 1, -1, -1):
        for n in tree.internal:
            if tree.nodes[n].time != t or n not in nodes:
                continue
            kids = [c for c in tree.nodes[n].children if c in nodes and viable[c]]
            verts = _local_vertices(market, n, kids) if kids else []
            viable[n] = bool(verts)
            chargeable[n] = {c for v in verts for c, q in zip(kids, v) if q > 0}
    bad = []
    for w in polar_set(tree, market.priors).qs_support:
        path = tree.path(w)
        if not all(viable[n] for n in path) or any(c not in chargeable[p] for p, c in zip(path, path[1:])):
            bad.append(w)
    return tuple(bad)


def _global_vertices(market: Market) -> tuple:
    """Support leaves and vertices of the calibrated martingale polytope on them."""
    tree = market.tree
    leaves = list(polar_set(tree, market.priors).qs_support)
    if len(leaves) > MAX_GLOBAL_LEAVES:
        raise ModelError(f"global vertex enumeration is limited to {MAX_GLOBAL_LEAVES} support leaves")
    dim = len(leaves)
    nodes = _qs_nodes(market)
    cons = [([1 if i == k else 0 for i in range(dim)], ">=", 0) for k in range(dim)]
    cons.append(([1] * dim, "==", 1))
    for n in tree.internal:
        if n not in nodes:
            continue
        t = tree.nodes[n].time
        for j in range(tree.assets):
            row = []
            for w in leaves:
                path = tree.path(w)
                row.append(tree.delta(path[t + 1])[j] if path[t] == n else 0)
            cons.append((row, "==", 0))
    for opt in market.options:
        cons.append(([opt.payoff[w] for w in leaves], "==", 0))
    return leaves, lp.vertex_enumerate(cons, dim)


def measure_side_global(market: Market) -> tuple:
    leaves, verts = _global_vertices(market)
    charged = {w for v in verts for w, q in zip(leaves, v) if q > 0}
    return tuple(w for w in leaves if w not in charged)


def strategy_side(market: Market) -> bool:
    """True iff no semi-static payoff is ``>= 0`` q.s. and nonzero."""
    tree = market.tree
    nodes = _qs_nodes(market)
    leaves = list(polar_set(tree, market.priors).qs_support)
    trade = [n for n in tree.internal if n in nodes]
    d = tree.assets
    nh = len(trade) * d + len(market.options)
    nz = len(leaves)
    rows = []
    for k, w in enumerate(leaves):
        path = tree.path(w)
        row = [Fraction(0)] * (nh + nz)
        for a, n in enumerate(trade):
            t = tree.nodes[n].time
            if path[t] == n:
                for j, v in enumerate(tree.delta(path[t + 1])):
                    row[a * d + j] = v
        for i, opt in enumerate(market.options):
            row[len(trade) * d + i] = opt.payoff[w]
        row[nh + k] = Fraction(-1)
        rows.append((row, ">=", 0))
    prog = lp.LinearProgram(
        [0] * nh + [1] * nz, "max", rows, bounds=[(None, None)] * nh + [(0, 1)] * nz
    )
    out = lp.solve(prog)
    return out.value == 0


def oracle_na(market: Market) -> OracleVerdict:
    """Decide NA by both routes; raises :class:`OracleDisagreement` if they differ."""
    _check_scale(market)
    if not polar_set(market.tree, market.priors).qs_support:
        raise ModelError("every leaf is polar; the market is vacuous")
    bad = measure_side_global(market) if market.options else measure_side_local(market)
    by_measure = not bad
    by_strategy = strategy_side(market)
    if by_measure != by_strategy:
        raise OracleDisagreement(f"measure side says {by_measure}, strategy side says {by_strategy}")
    return OracleVerdict(by_measure, by_measure, by_strategy, bad)


def _per_support_price(market: Market, claim: Claim, leaves) -> Fraction | None:
    """``min x`` with ``x + payoff >= claim`` on ``leaves``; None if unbounded."""
    tree = market.tree
    nodes = set()
    for w in leaves:
        nodes.update(tree.path(w))
    trade = [n for n in tree.internal if n in nodes]
    d = tree.assets
    nv = 1 + len(trade) * d + len(market.options)
    rows = []
    for w in leaves:
        path = tree.path(w)
        row = [Fraction(0)] * nv
        row[0] = Fraction(1)
        for a, n in enumerate(trade):
            t = tree.nodes[n].time
            if path[t] == n:
                for j, v in enumerate(tree.delta(path[t + 1])):
                    row[1 + a * d + j] = v
        for i, opt in enumerate(market.options):
            row[1 + len(trade) * d + i] = opt.payoff[w]
        rows.append((row, ">=", claim[w]))
    out = lp.solve(lp.LinearProgram([1] + [0] * (nv - 1), "min", rows, bounds=[(None, None)] * nv))
    return None if out.status is lp.Status.UNBOUNDED else out.value


def oracle_priors(market: Market, convex: bool = True) -> list:
    """``(label, support leaves)`` for every prior; kernel sets are expanded."""
    if market.priors.is_kernel:
        return [(label, sorted(m.support)) for label, m in flat_expansion(market, convex)]
    return [(name, sorted(m.support)) for name, m in market.priors.named().items()]


def oracle_sna(market: Market, convex: bool = True) -> tuple:
    """``(holds, violating leaf)`` by sweeping every prior's hedging program."""
    _check_scale(market)
    polar = polar_set(market.tree, market.priors)
    priors = oracle_priors(market, convex)
    for leaf in polar.qs_support:
        claim = Claim.indicator(market.tree, [leaf])
        if all(
            (p := _per_support_price(market, claim, leaves)) is None or p <= 0 for _, leaves in priors
        ):
            return False, leaf
    return True, None


def oracle_max_weight(market: Market, leaf: str) -> Fraction:
    """Largest weight a martingale measure puts on ``leaf`` (global vertex enumeration)."""
    leaves, verts = _global_vertices(market)
    k = leaves.index(leaf)
    return max((v[k] for v in verts), default=Fraction(0))
