"""Superhedging prices by backward one-step programs, and their duals."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from . import lp
from .arbitrage import (
    check_na,
    fan_out,
    martingale_system,
    selection_from_label,
)
from .market import (
    Claim,
    Market,
    Measure,
    ModelError,
    Strategy,
    kernel_selections,
    polar_set,
    selection_label,
    support_nodes,
    weight_W,
)

NEG_INF = float("-inf")
CONTINUATIONS = ("qs", "per_prior")
MAX_LISTED_SELECTIONS = 64


@dataclass(frozen=True)
class SuperhedgeResult:
    price: Fraction | float
    node_prices: Mapping = field(default_factory=dict)
    strategy: Strategy | None = None
    binding_measure: Measure | None = None


@dataclass(frozen=True)
class SensitivityReport:
    quasi_sure_price: Fraction
    per_prior_prices: Mapping
    gap: Fraction
    greedy_selection: str | None = None
    continuation: str = "qs"


@dataclass(frozen=True)
class DualityResult:
    primal: Fraction | float
    dual: Fraction | None
    gap: Fraction | None
    measure: Measure | None = None

    @property
    def status(self) -> str:
        return "ok" if self.dual is not None else "dual-infeasible"


def _check_claim(market: Market, claim: Claim) -> None:
    missing = set(market.tree.leaves) - set(claim.values)
    if missing:
        raise ModelError(f"claim undefined on leaves {sorted(missing)}")


def global_program(market: Market, claim: Claim, nodes, *, cap=None):
    """``min x`` s.t. ``x + payoff(w) >= X(w)`` for the leaves of ``nodes``.

    Variables are ``x`` followed by one free multiplier per row of the
    martingale system, i.e. the positions ``H`` and static weights ``h``.
    With ``cap`` the payoff must also stay above ``-cap * W`` on the whole
    q.s. support, so positions off ``nodes`` become relevant.
    """
    nodes = frozenset(nodes)
    var_nodes = nodes | support_nodes(market) if cap is not None else nodes
    system = martingale_system(market, var_nodes)
    k = len(system.rows)
    hedged = [w for w in system.leaves if w in nodes]
    by_leaf: dict = {w: {} for w in system.leaves}
    for r, (_, coeffs) in enumerate(system.rows):
        for w, v in coeffs.items():
            by_leaf[w][1 + r] = v
    rows = [({0: 1, **by_leaf[w]}, ">=", claim[w]) for w in hedged]
    if cap is not None:
        cap = Fraction(cap)
        if cap < 0:
            raise ModelError("admissibility cap must be nonnegative")
        weights = weight_W(market.tree, market.options)
        for w in polar_set(market.tree, market.priors).qs_support:
            rows.append((dict(by_leaf[w]) or {0: 0}, ">=", -cap * weights[w]))
    prog = lp.LinearProgram([1] + [0] * k, "min", rows, bounds=[(None, None)] * (k + 1))
    return prog, system, hedged


def superhedge_global(market: Market, claim: Claim, nodes=None, *, cap=None, tol=None) -> SuperhedgeResult:
    """One-shot program over the whole horizon; binding measure from its dual."""
    _check_claim(market, claim)
    nodes = support_nodes(market) if nodes is None else frozenset(nodes)
    if not any(w in nodes for w in market.tree.leaves):
        raise ModelError("support is empty")
    prog, system, hedged = global_program(market, claim, nodes, cap=cap)
    out = lp.solve(prog, tol=tol)
    if out.status is lp.Status.UNBOUNDED:
        return SuperhedgeResult(NEG_INF)
    if out.status is lp.Status.INFEASIBLE:
        raise ModelError("the admissibility cap excludes every strategy")
    strategy = system.strategy(out.x[1:])
    binding = None
    if cap is None:
        binding = Measure({w: v for w, v in zip(hedged, out.dual) if v})
    return SuperhedgeResult(out.value, {}, strategy, binding)


def _node_step(market: Market, node: str, values: Mapping, nodes, tol):
    """One-step program at ``node`` over its children in ``nodes``.

    Returns ``(price, H, kernel)``; children valued ``-inf`` impose nothing.
    """
    tree = market.tree
    d = tree.assets
    kids = [c for c in tree.nodes[node].children if c in nodes and values[c] != NEG_INF]
    if not kids:
        return NEG_INF, None, None
    rows = []
    for c in kids:
        rows.append(([1, *tree.delta(c)], ">=", values[c]))
    prog = lp.LinearProgram([1] + [0] * d, "min", rows, bounds=[(None, None)] * (d + 1))
    out = lp.solve(prog, tol=tol)
    if out.status is lp.Status.UNBOUNDED:
        return NEG_INF, None, None
    kernel = {c: y for c, y in zip(kids, out.dual) if y}
    return out.value, tuple(out.x[1:]), kernel


def _recursion(market: Market, terminal: Mapping, nodes, tol, threads=None):
    """Backward layers over ``nodes``; returns node values, positions, kernels."""
    tree = market.tree
    values = {w: terminal[w] for w in tree.leaves if w in nodes}
    positions, kernels = {}, {}
    for t in range(tree.horizon - 1, -1, -1):
        layer = [n for n in tree.internal if tree.nodes[n].time == t and n in nodes]
        results = fan_out(lambda n: _node_step(market, n, values, nodes, tol), layer, threads)
        for n, (v, h, k) in zip(layer, results):
            values[n] = v
            if h is not None and any(h):
                positions[n] = h
            if k is not None:
                kernels[n] = k
    return values, positions, kernels


def _product_measure(market: Market, kernels: Mapping, nodes) -> Measure | None:
    tree = market.tree
    weights = {}
    for w in tree.leaves:
        if w not in nodes:
            continue
        p = Fraction(1)
        path = tree.path(w)
        for parent, child in zip(path, path[1:]):
            k = kernels.get(parent)
            if k is None:
                return None
            p *= k.get(child, 0)
            if not p:
                break
        if p:
            weights[w] = p
    try:
        return Measure(weights)
    except ModelError:
        return None


def _hedge_on(market: Market, claim: Claim, nodes, *, cap, tol, threads, binding) -> SuperhedgeResult:
    _check_claim(market, claim)
    if market.tree.root not in nodes:
        raise ModelError("every leaf is polar under this prior")
    if cap is not None:
        res = superhedge_global(market, claim, nodes, cap=cap, tol=tol)
        return SuperhedgeResult(res.price, {}, res.strategy, None)
    static = ()
    target = dict(claim.values)
    glob = None
    if market.options:
        glob = superhedge_global(market, claim, nodes, tol=tol)
        if glob.price == NEG_INF:
            return glob
        static = glob.strategy.static
        for i, opt in enumerate(market.options):
            for w in target:
                target[w] -= static[i] * opt.payoff[w]
    values, positions, kernels = _recursion(market, target, nodes, tol, threads)
    price = values[market.tree.root]
    strategy = Strategy(positions, static)
    measure = None
    if binding and price != NEG_INF:
        measure = glob.binding_measure if glob is not None else _product_measure(market, kernels, nodes)
    return SuperhedgeResult(price, values, strategy, measure)


def superhedge_qs(market: Market, claim: Claim, *, cap=None, binding: bool = False, tol=None, threads=None) -> SuperhedgeResult:
    """Quasi-sure superhedging price by backward recursion.

    Static option weights are fixed by the one-shot program and the
    recursion then runs on the claim net of the options.  With an
    admissibility ``cap`` only the one-shot program is solved.
    """
    polar = polar_set(market.tree, market.priors)
    if not polar.qs_support:
        raise ModelError("every leaf is polar; the market is vacuous")
    return _hedge_on(market, claim, support_nodes(market), cap=cap, tol=tol, threads=threads, binding=binding)


def resolve_prior(market: Market, prior):
    """Node set of a flat prior name, a kernel selection, its label, or ``"max"``."""
    if market.priors.is_kernel and isinstance(prior, str):
        prior = selection_from_label(market, prior)
    return support_nodes(market, prior)


def superhedge_per_prior(
    market: Market,
    claim: Claim,
    prior,
    *,
    continuation: str = "qs",
    cap=None,
    tol=None,
    threads=None,
) -> SuperhedgeResult:
    """Superhedging price almost surely under one prior.

    ``continuation="per_prior"`` runs the whole recursion on the prior's
    support.  ``"qs"`` hedges, at each node of the prior's support, the
    quasi-sure continuation values on the prior's children; the reported
    strategy uses this prior's position at the root and the quasi-sure
    positions afterwards, which together superhedge the claim a.s.
    """
    if continuation not in CONTINUATIONS:
        raise ModelError(f"continuation must be one of {CONTINUATIONS}")
    nodes = resolve_prior(market, prior)
    if continuation == "per_prior" or cap is not None:
        return _hedge_on(market, claim, nodes, cap=cap, tol=tol, threads=threads, binding=False)
    if market.options:
        raise ModelError("the quasi-sure continuation needs an option-free market; use per_prior")
    _check_claim(market, claim)
    if market.tree.root not in nodes:
        raise ModelError("every leaf is polar under this prior")
    qs_nodes = support_nodes(market)
    qs_values, qs_positions, _ = _recursion(market, claim.values, qs_nodes, tol, threads)
    layer = [n for n in market.tree.internal if n in nodes]
    results = fan_out(lambda n: _node_step(market, n, qs_values, nodes, tol), layer, threads)
    local = {n: r[0] for n, r in zip(layer, results)}
    root = market.tree.root
    root_h = dict(zip(layer, results))[root][1]
    positions = {n: h for n, h in qs_positions.items() if n != root}
    if root_h is not None and any(root_h):
        positions[root] = root_h
    return SuperhedgeResult(local[root], local, Strategy(positions, ()), None)


def sensitivity_report(market: Market, claim: Claim, *, continuation: str | None = None, tol=None, threads=None) -> SensitivityReport:
    """Quasi-sure price against every per-prior price.

    For kernel priors the per-prior prices are listed for every selection
    of kernel mixtures when there are at most 64 of them, and always for
    the greedy selection that keeps, at each node, the mixture with the
    largest local price.
    """
    if not check_na(market, tol=tol, threads=threads).ok:
        raise ModelError("sensitivity report requires NA")
    if continuation is None:
        continuation = "per_prior" if market.options else "qs"
    qs = superhedge_qs(market, claim, tol=tol, threads=threads).price
    prices = {}
    greedy = None
    if market.priors.is_kernel:
        greedy_sel = _greedy_selection(market, claim, tol, threads)
        greedy = selection_label(greedy_sel)
        try:
            sels = kernel_selections(market, convex=True, limit=MAX_LISTED_SELECTIONS)
        except ModelError:
            sels = []
        for sel in sels:
            prices[selection_label(sel)] = superhedge_per_prior(
                market, claim, sel, continuation=continuation, tol=tol, threads=threads
            ).price
        prices.setdefault(
            greedy, superhedge_per_prior(market, claim, greedy_sel, continuation=continuation, tol=tol, threads=threads).price
        )
    else:
        for name in market.priors.names:
            prices[name] = superhedge_per_prior(market, claim, name, continuation=continuation, tol=tol, threads=threads).price
    finite = [p for p in prices.values() if p != NEG_INF]
    top = max(finite) if finite else NEG_INF
    gap = qs - top
    return SensitivityReport(qs, prices, gap, greedy, continuation)


def _greedy_selection(market: Market, claim: Claim, tol, threads):
    """At each node, the kernel mixture whose charged children give the largest local price."""
    priors = market.priors
    qs_nodes = support_nodes(market)
    values, _, _ = _recursion(market, claim.values, qs_nodes, tol, threads)
    sel = {}
    for n in market.tree.internal:
        steps = priors.kernel[n]
        best, best_idx = None, None
        for idx in kernel_selections_at(len(steps)):
            kids = {c for i in idx for c, p in steps[i].items() if p > 0}
            if n in qs_nodes:
                v = _node_step(market, n, values, kids, tol)[0]
            else:
                v = NEG_INF
            # ties: the larger mixture, then the lexicographically first
            if best is None or v > best or (v == best and len(idx) > len(best_idx)):
                best, best_idx = v, idx
        sel[n] = best_idx
    return sel


def kernel_selections_at(k: int) -> list:
    import itertools

    return [c for r in range(1, k + 1) for c in itertools.combinations(range(k), r)]


def duality_check(market: Market, claim: Claim, *, tol=None, threads=None) -> DualityResult:
    """Recursion price against ``max E_Q[X]`` over calibrated martingale measures."""
    primal = superhedge_qs(market, claim, tol=tol, threads=threads).price
    system = martingale_system(market)
    obj = [claim[w] for w in system.leaves]
    out = lp.solve(lp.LinearProgram(obj, "max", system.lp_rows()), tol=tol)
    if out.status is not lp.Status.OPTIMAL:
        return DualityResult(primal, None, None)
    q = Measure({w: v for w, v in zip(system.leaves, out.x) if v}) if tol is None else None
    gap = None if primal == NEG_INF else primal - out.value
    return DualityResult(primal, out.value, gap, q)
