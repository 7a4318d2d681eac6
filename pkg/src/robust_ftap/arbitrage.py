"""No-arbitrage and sensitive no-arbitrage decisions with witnesses.

Every decision goes through the martingale system of a node-closed support:
one row per (trading node, asset) imposing a zero conditional increment, one
row per static option imposing a zero price, and the normalisation row.
Strategies are read off LP dual multipliers of those rows, so a witness
strategy's payoff is the dual combination of the rows.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from . import lp
from .market import (
    Claim,
    Market,
    Measure,
    ModelError,
    Strategy,
    polar_set,
    portfolio_value,
    selection_label,
    support_nodes,
)


class Verdict(str, enum.Enum):
    NO_ARBITRAGE = "NoArbitrage"
    ARBITRAGE = "Arbitrage"


@dataclass(frozen=True)
class ArbitrageVerdict:
    kind: Verdict
    witness: Strategy | None = None
    witness_leaf: str | None = None
    measures: tuple = ()  # (leaf, Measure, delta)

    @property
    def ok(self) -> bool:
        return self.kind is Verdict.NO_ARBITRAGE


@dataclass(frozen=True)
class SensitiveVerdict:
    kind: Verdict
    na: ArbitrageVerdict
    claim: Claim | None = None
    hedges: Mapping = field(default_factory=dict)  # prior label -> (price, Strategy | None)

    @property
    def ok(self) -> bool:
        return self.kind is Verdict.NO_ARBITRAGE


def thread_count() -> int:
    raw = os.environ.get("ROBUST_FTAP_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ModelError(f"ROBUST_FTAP_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def fan_out(fn, items, threads: int | None = None) -> list:
    """``[fn(i) for i in items]``, possibly on a pool; order is preserved."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# the martingale system


@dataclass(frozen=True)
class MartingaleSystem:
    """Linear constraints on leaf weights ``Q`` restricted to ``leaves``.

    ``rows[r] = (key, {leaf: coef})`` with key ``("mtg", node, j)`` or
    ``("cal", i)``; each row reads ``sum coef * Q = 0``.
    """

    market: Market
    nodes: frozenset
    leaves: tuple
    rows: tuple

    def lp_rows(self) -> list:
        col = {leaf: k for k, leaf in enumerate(self.leaves)}
        out = [({col[w]: v for w, v in coeffs.items()}, "==", 0) for _, coeffs in self.rows]
        out.append(([1] * len(self.leaves), "==", 1))
        return out

    def strategy(self, y) -> Strategy:
        """The semi-static strategy whose payoff is ``sum_r y_r * row_r``."""
        d = self.market.tree.assets
        dyn: dict = {}
        static = [Fraction(0)] * len(self.market.options)
        for (key, _), v in zip(self.rows, y):
            if key[0] == "mtg":
                _, node, j = key
                pos = dyn.setdefault(node, [Fraction(0)] * d)
                pos[j] = v
            else:
                static[key[1]] = v
        dyn = {n: tuple(h) for n, h in dyn.items() if any(h)}
        return Strategy(dyn, tuple(static) if self.market.options else ())

    def residuals(self, q: Measure) -> dict:
        """Row values ``sum coef * Q`` keyed by row key."""
        return {key: sum(v * q[w] for w, v in coeffs.items()) for key, coeffs in self.rows}


def martingale_system(market: Market, nodes=None) -> MartingaleSystem:
    """Constraints for martingale, calibrated measures on the node set ``nodes``.

    ``nodes`` must be closed under parents; ``None`` means the q.s. support.
    """
    tree = market.tree
    if nodes is None:
        nodes = support_nodes(market)
    nodes = frozenset(nodes)
    leaves = tuple(w for w in tree.leaves if w in nodes)
    rows = []
    for n in tree.internal:
        if n not in nodes:
            continue
        for j in range(tree.assets):
            coeffs = {}
            for c in tree.nodes[n].children:
                if c not in nodes:
                    continue
                dj = tree.delta(c)[j]
                if dj:
                    for w in tree.leaves_under(c):
                        if w in nodes:
                            coeffs[w] = dj
            rows.append((("mtg", n, j), coeffs))
    for i, opt in enumerate(market.options):
        rows.append((("cal", i), {w: opt.payoff[w] for w in leaves if opt.payoff[w]}))
    return MartingaleSystem(market, nodes, leaves, tuple(rows))


def _measure(leaves, x, tol) -> Measure:
    w = {leaf: v for leaf, v in zip(leaves, x) if v}
    if tol is not None:
        w = {k: v for k, v in w.items() if v > tol}
        total = sum(w.values())
        w = {k: v / total for k, v in w.items()}
    return Measure(w)


def _leaf_program(system: MartingaleSystem, leaf: str) -> lp.LinearProgram:
    obj = [1 if w == leaf else 0 for w in system.leaves]
    return lp.LinearProgram(obj, "max", system.lp_rows())


def _witness_from_leaf_lp(system: MartingaleSystem, out: lp.LpOutcome):
    """Arbitrage strategy from a failed ``max Q(a)`` program.

    Optimal with value 0: the multipliers of the martingale and calibration
    rows combine to a payoff ``>= 1_a``.  Infeasible: the Farkas ray yields a
    payoff bounded below by ``-y_norm > 0``.
    """
    y = out.dual
    return system.strategy(y[: len(system.rows)])


def _nonpolar(market: Market):
    polar = polar_set(market.tree, market.priors)
    if not polar.qs_support:
        raise ModelError("every leaf is polar; the market is vacuous")
    return polar


def find_witness_measure(market: Market, leaf: str, *, tol=None, system=None):
    """``(Q, delta)`` maximising ``Q(leaf)`` over calibrated martingale measures.

    Raises :class:`ModelError` for polar leaves or when ``delta`` would be 0.
    """
    polar = _nonpolar(market)
    if leaf not in market.tree.nodes or leaf not in market.tree.leaves:
        raise ModelError(f"unknown leaf {leaf!r}")
    if polar.is_polar(leaf):
        raise ModelError(f"leaf {leaf} is polar")
    system = system or martingale_system(market)
    out = lp.solve(_leaf_program(system, leaf), tol=tol)
    if out.status is not lp.Status.OPTIMAL or (out.value <= (tol or 0)):
        raise ModelError(f"no martingale measure charges leaf {leaf}: NA fails there")
    return _measure(system.leaves, out.x, tol), out.value


def check_na(market: Market, *, per_leaf: bool = False, tol=None, threads: int | None = None) -> ArbitrageVerdict:
    """Decide NA on the q.s. support.

    One program maximises the smallest leaf weight; a positive optimum gives
    a single martingale measure charging every non-polar leaf.  Otherwise the
    per-leaf programs locate a leaf no martingale measure can charge and the
    strategy is read off that program's certificate.  With ``per_leaf`` the
    measures reported are the per-leaf maximisers.
    """
    _nonpolar(market)
    system = martingale_system(market)
    leaves = system.leaves
    k = len(leaves)
    # variables: Q_1..Q_k, t (free)
    rows = [({**c, k: 0}, rel, rhs) if isinstance(c, dict) else (list(c) + [0], rel, rhs)
            for c, rel, rhs in system.lp_rows()]
    for i in range(k):
        rows.append(({i: 1, k: -1}, ">=", 0))
    prog = lp.LinearProgram([0] * k + [1], "max", rows, bounds=[(0, None)] * k + [(None, None)])
    out = lp.solve(prog, tol=tol)
    eps = tol or 0
    if out.status is lp.Status.OPTIMAL and out.value > eps:
        if not per_leaf:
            q = _measure(leaves, out.x[:k], tol)
            return ArbitrageVerdict(Verdict.NO_ARBITRAGE, measures=tuple((w, q, q[w]) for w in leaves))
        res = fan_out(lambda w: (w, *find_witness_measure(market, w, tol=tol, system=system)), leaves, threads)
        return ArbitrageVerdict(Verdict.NO_ARBITRAGE, measures=tuple(res))

    if out.status is lp.Status.OPTIMAL:
        # zero-weight leaves first: one of them cannot be charged
        order = [w for w, v in zip(leaves, out.x) if v <= eps] + [w for w, v in zip(leaves, out.x) if v > eps]
    else:
        order = list(leaves)
    for w in order:
        res = lp.solve(_leaf_program(system, w), tol=tol)
        if res.status is lp.Status.INFEASIBLE or res.value <= eps:
            return ArbitrageVerdict(Verdict.ARBITRAGE, witness=_witness_from_leaf_lp(system, res), witness_leaf=w)
    raise lp.LpError("interior program and per-leaf programs disagree")  # pragma: no cover


def validate_arbitrage(market: Market, strategy: Strategy, tol=None) -> bool:
    """Payoff ``>= 0`` q.s. and ``> 0`` on some non-polar leaf."""
    polar = polar_set(market.tree, market.priors)
    pay = portfolio_value(market.tree, strategy, market.options)
    eps = tol or 0
    vals = [pay[w] for w in polar.qs_support]
    return all(v >= -eps for v in vals) and any(v > eps for v in vals)


def validate_martingale(market: Market, q: Measure, tol=None) -> list[str]:
    """Exact martingale and calibration check on the q.s. support."""
    polar = polar_set(market.tree, market.priors)
    problems = []
    if not q.support <= set(polar.qs_support):
        problems.append(f"charges polar leaves {sorted(q.support - set(polar.qs_support))}")
    system = martingale_system(market, nodes=frozenset(market.tree.nodes))
    for key, v in system.residuals(q).items():
        if (abs(v) > tol) if tol is not None else v != 0:
            problems.append(f"row {key} has residual {v}")
    return problems


# ---------------------------------------------------------------------------
# sensitive arbitrage


def prior_labels(market: Market) -> list:
    """Priors consulted by the sensitive checks.

    Flat priors by name.  For kernel priors the all-kernels mixture
    (``"max"``) has the largest support of any product prior, and per-prior
    prices are monotone in the support, so it dominates the check.
    """
    if market.priors.is_kernel:
        return ["max"]
    return list(market.priors.names)


def global_hedge(market: Market, claim: Claim, nodes, *, tol=None, cap=None):
    """Least ``x`` with ``x + payoff >= claim`` on the leaves of ``nodes``.

    Returns ``(price, Strategy | None, dual leaf weights | None)``; the price
    is ``-inf`` when unbounded below.  ``cap = lambda`` adds the admissibility
    rows ``payoff >= -lambda * W`` on the q.s. support.
    """
    from .superhedge import NEG_INF, global_program

    prog, system, ncap = global_program(market, claim, nodes, cap=cap)
    out = lp.solve(prog, tol=tol)
    if out.status is lp.Status.UNBOUNDED:
        return NEG_INF, None, None
    if out.status is lp.Status.INFEASIBLE:
        raise ModelError("hedging program infeasible; the admissibility cap excludes every strategy")
    strategy = system.strategy(out.x[1:])
    dual = dict(zip(system.leaves, out.dual[: len(system.leaves)]))
    return out.value, strategy, dual


def check_sna(market: Market, *, tol=None, threads: int | None = None) -> SensitiveVerdict:
    """sNA fails iff some non-polar ``1_a`` is hedged at cost ``<= 0`` under every prior."""
    na = check_na(market, tol=tol, threads=threads)
    polar = polar_set(market.tree, market.priors)
    labels = prior_labels(market)
    supports = {p: support_nodes(market, p) for p in labels}
    eps = tol or 0

    def probe(leaf):
        claim = Claim.indicator(market.tree, [leaf])
        hedges = {}
        for p in labels:
            price, strat, _ = global_hedge(market, claim, supports[p], tol=tol)
            if price > eps:
                return None
            hedges[p] = (price, strat)
        return hedges

    for leaf, hedges in zip(polar.qs_support, fan_out(probe, polar.qs_support, threads)):
        if hedges is not None:
            return SensitiveVerdict(Verdict.ARBITRAGE, na, Claim.indicator(market.tree, [leaf]), hedges)
    return SensitiveVerdict(Verdict.NO_ARBITRAGE, na)


# ---------------------------------------------------------------------------
# approximate martingale measures


@dataclass(frozen=True)
class ApproximateClass:
    leaf: str
    dominating: str
    delta: Fraction
    members: tuple  # (n, Measure)


def moment_errors(market: Market, q: Measure) -> dict:
    """``E_Q[1_B dS^j]`` for every trading node ``B`` and ``E_Q[phi_i]``."""
    system = martingale_system(market, nodes=frozenset(market.tree.nodes))
    return system.residuals(q)


def dominating_candidates(market: Market) -> list:
    if market.priors.is_kernel:
        return [("max", support_nodes(market, "max"))]
    return [(p, support_nodes(market, p)) for p in market.priors.names]


def approximate_class(
    market: Market, leaf: str, n_max: int, *, perturb: bool = False, tol=None
) -> ApproximateClass:
    """Measures ``Q_1..Q_{n_max}`` dominated by one prior, charging ``leaf``.

    The dominating prior is the one whose support admits the largest
    ``Q(leaf)``.  Without ``perturb`` the exact witness is repeated;
    with it ``Q_n`` mixes in the dominating prior itself at weight
    ``eps_n`` chosen so every moment error is at most ``1/n``.
    """
    if n_max < 1:
        raise ModelError("n_max must be >= 1")
    polar = _nonpolar(market)
    if polar.is_polar(leaf) or leaf not in market.tree.leaves:
        raise ModelError(f"leaf {leaf!r} is polar or unknown")
    best = None
    for label, nodes in dominating_candidates(market):
        if leaf not in nodes:
            continue
        system = martingale_system(market, nodes)
        out = lp.solve(_leaf_program(system, leaf), tol=tol)
        if out.status is lp.Status.OPTIMAL and out.value > (tol or 0):
            if best is None or out.value > best[1]:
                best = (label, out.value, _measure(system.leaves, out.x, tol))
    if best is None:
        raise ModelError(f"no single prior supports a martingale measure charging {leaf}")
    label, delta, q = best
    if not perturb:
        return ApproximateClass(leaf, label, delta, tuple((n, q) for n in range(1, n_max + 1)))
    ref = _reference_measure(market, label)
    errs = moment_errors(market, ref)
    scale = max((abs(v) for v in errs.values()), default=Fraction(0))
    members = []
    for n in range(1, n_max + 1):
        eps = Fraction(1, 2) if scale == 0 else min(Fraction(1, 2), 1 / (n * scale))
        mix = {w: (1 - eps) * q[w] + eps * ref[w] for w in market.tree.leaves if q[w] or ref[w]}
        members.append((n, Measure(mix)))
    return ApproximateClass(leaf, label, min(m[leaf] for _, m in members), tuple(members))


def _reference_measure(market: Market, label: str) -> Measure:
    if market.priors.is_kernel:
        from .market import selection_measure

        sel = {n: tuple(range(len(market.priors.kernel[n]))) for n in market.tree.internal}
        return selection_measure(market, sel)
    return market.priors.named()[label]


def validate_approximate(market: Market, q: Measure, n: int, dominating: str) -> list[str]:
    """Reasons ``q`` is not an ``n``-th member dominated by ``dominating``; empty if valid."""
    problems = []
    nodes = support_nodes(market, dominating)
    off = sorted(w for w in q.support if w not in nodes)
    if off:
        problems.append(f"not absolutely continuous w.r.t. {dominating}: charges {off}")
    bound = Fraction(1, n)
    for key, v in moment_errors(market, q).items():
        if abs(v) > bound:
            problems.append(f"moment {key} = {v} exceeds 1/{n}")
    return problems


def selection_from_label(market: Market, label: str):
    """Inverse of :func:`selection_label`; ``"max"`` passes through."""
    if label == "max":
        return "max"
    if not (label.startswith("sel[") and label.endswith("]")):
        raise ModelError(f"unknown kernel selection {label!r}")
    out = {}
    body = label[4:-1]
    for part in filter(None, body.split(",")):
        node, _, idx = part.partition("=")
        out[node] = tuple(int(i) for i in idx.split("+"))
    if set(out) != set(market.tree.internal):
        raise ModelError("a selection must name every trading node")
    for node, idx in out.items():
        if not idx or any(not 0 <= i < len(market.priors.kernel[node]) for i in idx):
            raise ModelError(f"bad kernel indices at {node}")
    return out


__all__ = [
    "ApproximateClass",
    "ArbitrageVerdict",
    "MartingaleSystem",
    "SensitiveVerdict",
    "Verdict",
    "approximate_class",
    "check_na",
    "check_sna",
    "find_witness_measure",
    "global_hedge",
    "martingale_system",
    "moment_errors",
    "selection_from_label",
    "selection_label",
    "validate_approximate",
    "validate_arbitrage",
    "validate_martingale",
]
