"""Call-quote front end: support functions, implied marginals, quote
arbitrage, convex order and terminal-support enforcement.

Zero rates throughout.  A call with strike 0 is the asset itself, so each
asset's quote set is anchored at ``(0, spot)``.  Static portfolios are lists
of ``(weight, instrument)`` with instrument ``("call", k)`` (``k = 0`` is the
asset) or ``("cash",)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import lp
from .market import (
    Market,
    ModelError,
    PriorSet,
    ScenarioTree,
    StaticOption,
    Strategy,
    as_rational,
    polar_set,
    portfolio_value,
    support_nodes,
)


@dataclass(frozen=True)
class AssetQuotes:
    spot: Fraction
    quotes: tuple  # ((strike, price), ...) strictly increasing strikes

    def __post_init__(self):
        spot = as_rational(self.spot)
        quotes = tuple((as_rational(k), as_rational(c)) for k, c in self.quotes)
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "quotes", quotes)
        if spot <= 0:
            raise ModelError("spot must be positive")
        if not quotes:
            raise ModelError("at least one quote is required")
        ks = [k for k, _ in quotes]
        if ks[0] <= 0 or any(a >= b for a, b in zip(ks, ks[1:])):
            raise ModelError("strikes must be positive and strictly increasing")

    def price(self, k: Fraction) -> Fraction:
        if k == 0:
            return self.spot
        for kk, c in self.quotes:
            if kk == k:
                return c
        raise KeyError(k)


@dataclass(frozen=True)
class CallQuoteSheet:
    assets: Mapping[str, AssetQuotes]

    def names(self) -> list:
        return list(self.assets)


@dataclass(frozen=True)
class SupportFunction:
    """Piecewise-linear, convex and non-increasing on ``[0, inf)``.

    ``points`` are the breakpoints ``(x, R(x))`` starting at ``x = 0``; the
    function is constant after the last one.
    """

    points: tuple

    @property
    def slopes(self) -> list:
        return [(y2 - y1) / (x2 - x1) for (x1, y1), (x2, y2) in zip(self.points, self.points[1:])]

    @property
    def tail(self) -> Fraction:
        return self.points[-1][1]

    def __call__(self, x) -> Fraction:
        pts = self.points
        if x >= pts[-1][0]:
            return pts[-1][1]
        for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
            if x <= x2:
                return y1 + (y2 - y1) * (x - x1) / (x2 - x1)
        raise AssertionError("unreachable")  # pragma: no cover


@dataclass(frozen=True)
class DiscreteMarginal:
    atoms: tuple  # ((location, mass), ...)

    def __post_init__(self):
        atoms = tuple((as_rational(x), as_rational(m)) for x, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        xs = [x for x, _ in atoms]
        if not atoms:
            raise ModelError("a marginal needs at least one atom")
        if any(x < 0 for x in xs) or any(a >= b for a, b in zip(xs, xs[1:])):
            raise ModelError("atom locations must be nonnegative and strictly increasing")
        if any(m <= 0 for _, m in atoms):
            raise ModelError("atom masses must be positive")
        if sum(m for _, m in atoms) != 1:
            raise ModelError("atom masses must sum to 1")

    @property
    def locations(self) -> tuple:
        return tuple(x for x, _ in self.atoms)

    def mean(self) -> Fraction:
        return sum(x * m for x, m in self.atoms)

    def call(self, k) -> Fraction:
        return sum(m * max(x - k, 0) for x, m in self.atoms)


# ---------------------------------------------------------------------------
# support function and implied marginal


def _lower_hull(points: list) -> list:
    hull: list = []
    for p in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly below the chord
            if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def support_function(sheet: CallQuoteSheet | AssetQuotes, asset: str | None = None) -> SupportFunction:
    """Largest convex non-increasing function under the anchored quotes with slopes in ``[-1, 0]``."""
    aq = sheet if isinstance(sheet, AssetQuotes) else sheet.assets[asset]
    # non-increasing: a quote may be replaced by any smaller quote to its left
    running = aq.spot
    pts = []
    for k, c in aq.quotes:
        running = min(running, c)
        pts.append((k, running))
    # slope >= -1 from the origin: lower the anchor if a quote sits under spot - k
    anchor = min([aq.spot] + [c + k for k, c in pts])
    hull = _lower_hull([(Fraction(0), anchor)] + pts)
    # flat after the minimum
    low = min(range(len(hull)), key=lambda i: (hull[i][1], i))
    return SupportFunction(tuple(hull[: low + 1]))


def implied_marginal(R: SupportFunction, spot=None) -> DiscreteMarginal:
    """Atoms at the kinks of ``R`` with the slope jumps as masses (left slope ``-1`` at 0)."""
    if R.tail != 0:
        raise ModelError(f"support function does not vanish beyond the last strike (tail {R.tail})")
    slopes = [Fraction(-1)] + R.slopes + [Fraction(0)]
    atoms = []
    for (x, _), s0, s1 in zip(R.points, slopes, slopes[1:]):
        if s1 != s0:
            atoms.append((x, s1 - s0))
    mu = DiscreteMarginal(tuple(atoms))
    if spot is not None and mu.mean() != as_rational(spot):
        raise ModelError(f"implied mean {mu.mean()} differs from spot {spot}")
    return mu


# ---------------------------------------------------------------------------
# diagnostics


class QuoteVerdict(str, enum.Enum):
    CONSISTENT = "Consistent"
    ARBITRAGE = "Arbitrage"


@dataclass(frozen=True)
class Violation:
    type: str
    asset: str
    strikes: tuple
    portfolio: tuple  # ((weight, instrument), ...)
    cost: Fraction


@dataclass(frozen=True)
class QuoteDiagnostics:
    verdict: QuoteVerdict
    violations: tuple = ()
    non_binding: tuple = ()  # (asset, strike, quote, R(strike))


def portfolio_cost(aq: AssetQuotes, portfolio) -> Fraction:
    total = Fraction(0)
    for w, inst in portfolio:
        total += w * (aq.price(inst[1]) if inst[0] == "call" else 1)
    return total


def portfolio_payoff(portfolio, s) -> Fraction:
    total = Fraction(0)
    for w, inst in portfolio:
        total += w * (max(s - inst[1], 0) if inst[0] == "call" else 1)
    return total


def payoff_nonnegative(portfolio) -> bool:
    """Exact check of ``payoff >= 0`` on ``[0, inf)``: kinks, origin and final slope."""
    kinks = sorted({Fraction(0)} | {inst[1] for _, inst in portfolio if inst[0] == "call"})
    if any(portfolio_payoff(portfolio, k) < 0 for k in kinks):
        return False
    final_slope = sum(w for w, inst in portfolio if inst[0] == "call")
    return final_slope >= 0


def quote_diagnostics(sheet: CallQuoteSheet) -> QuoteDiagnostics:
    violations = []
    non_binding = []
    for name, aq in sheet.assets.items():
        pts = [(Fraction(0), aq.spot)] + list(aq.quotes)
        for k, c in aq.quotes:
            if c < 0:
                pf = ((Fraction(1), ("call", k)),)
                violations.append(Violation("negative-price", name, (k,), pf, portfolio_cost(aq, pf)))
        for (k0, c0), (k1, c1) in zip(pts, pts[1:]):
            if c1 > c0:
                pf = ((Fraction(1), ("call", k0)), (Fraction(-1), ("call", k1)))
                violations.append(Violation("call-spread", name, (k0, k1), pf, portfolio_cost(aq, pf)))
            if c0 - c1 > k1 - k0:
                pf = ((Fraction(-1), ("call", k0)), (Fraction(1), ("call", k1)), (k1 - k0, ("cash",)))
                violations.append(Violation("slope-bound", name, (k0, k1), pf, portfolio_cost(aq, pf)))
        for (k0, c0), (k1, c1), (k2, c2) in zip(pts, pts[1:], pts[2:]):
            w = (k2 - k1, -(k2 - k0), k1 - k0)
            if w[0] * c0 + w[1] * c1 + w[2] * c2 < 0:
                pf = ((w[0], ("call", k0)), (w[1], ("call", k1)), (w[2], ("call", k2)))
                violations.append(Violation("butterfly", name, (k0, k1, k2), pf, portfolio_cost(aq, pf)))
        R = support_function(aq)
        for k, c in aq.quotes:
            if c > R(k):
                non_binding.append((name, k, c, R(k)))
    verdict = QuoteVerdict.ARBITRAGE if violations else QuoteVerdict.CONSISTENT
    return QuoteDiagnostics(verdict, tuple(violations), tuple(non_binding))


def calibrate(sheet: CallQuoteSheet) -> dict:
    """Implied marginal per asset; the sheet must be consistent."""
    diag = quote_diagnostics(sheet)
    if diag.verdict is not QuoteVerdict.CONSISTENT:
        raise ModelError("quote sheet admits static arbitrage")
    return {name: implied_marginal(support_function(aq), aq.spot) for name, aq in sheet.assets.items()}


# ---------------------------------------------------------------------------
# convex order


class Order(str, enum.Enum):
    ORDERED = "Ordered"
    NOT_ORDERED = "NotOrdered"


@dataclass(frozen=True)
class ConvexOrderResult:
    verdict: Order
    reason: str | None = None
    strike: Fraction | None = None


def convex_order_check(mu: DiscreteMarginal, nu: DiscreteMarginal) -> ConvexOrderResult:
    """``mu <=_c nu``: equal means and dominated call prices on the union of atoms."""
    if mu.mean() != nu.mean():
        return ConvexOrderResult(Order.NOT_ORDERED, f"means differ: {mu.mean()} vs {nu.mean()}")
    for k in sorted(set(mu.locations) | set(nu.locations)):
        if mu.call(k) > nu.call(k):
            return ConvexOrderResult(Order.NOT_ORDERED, f"call price {mu.call(k)} > {nu.call(k)}", k)
    return ConvexOrderResult(Order.ORDERED)


def martingale_coupling(mu: DiscreteMarginal, nu: DiscreteMarginal, tol=None):
    """A coupling ``pi`` of ``(mu, nu)`` with ``E[Y | X] = X``, or None if none exists."""
    xs, ys = mu.atoms, nu.atoms
    m, n = len(xs), len(ys)
    col = lambda i, j: i * n + j  # noqa: E731
    rows = []
    for i, (x, p) in enumerate(xs):
        rows.append(({col(i, j): 1 for j in range(n)}, "==", p))
        rows.append(({col(i, j): y - x for j, (y, _) in enumerate(ys) if y != x}, "==", 0))
    for j, (_, q) in enumerate(ys):
        rows.append(({col(i, j): 1 for i in range(m)}, "==", q))
    out = lp.solve(lp.LinearProgram([0] * (m * n), "min", rows), tol=tol)
    if out.status is not lp.Status.OPTIMAL:
        return None
    return {(xs[i][0], ys[j][0]): out.x[col(i, j)] for i in range(m) for j in range(n) if out.x[col(i, j)]}


# ---------------------------------------------------------------------------
# support enforcement and market assembly


@dataclass(frozen=True)
class NodeViolation:
    node: str
    position: tuple
    strategy: Strategy


@dataclass(frozen=True)
class SupportReport:
    terminal: tuple = ()  # non-polar leaves with S_T outside K
    intermediate: tuple = ()  # NodeViolation per node outside conv(K)

    @property
    def clean(self) -> bool:
        return not self.terminal and not self.intermediate


def _marginal_list(market: Market, marginals) -> list:
    if isinstance(marginals, Mapping):
        marginals = list(marginals.values())
    if len(marginals) != market.tree.assets:
        raise ModelError("one marginal per asset is required")
    return list(marginals)


def support_enforcement(market: Market, marginals) -> SupportReport:
    """Terminal prices must lie in ``K``; intermediate prices in the box ``conv(K)``.

    A node outside the box is separated along one coordinate: holding
    ``H = -e_j / (S_j - max_j)`` (or ``e_j / (min_j - S_j)``) from that node
    to the horizon pays at least 1 wherever the terminal price lies in the box.
    """
    tree = market.tree
    mus = _marginal_list(market, marginals)
    grids = [set(mu.locations) for mu in mus]
    lows = [min(g) for g in grids]
    highs = [max(g) for g in grids]
    polar = polar_set(tree, market.priors)
    terminal = tuple(w for w in polar.qs_support if any(p not in g for p, g in zip(tree.nodes[w].prices, grids)))
    nodes = support_nodes(market)
    inter = []
    for n in tree.internal:
        node = tree.nodes[n]
        if node.time == 0 or n not in nodes:
            continue
        for j, s in enumerate(node.prices):
            if s > highs[j] or s < lows[j]:
                h = [Fraction(0)] * tree.assets
                h[j] = -1 / (s - highs[j]) if s > highs[j] else 1 / (lows[j] - s)
                h = tuple(h)
                held = {m: h for m in tree.internal if _descends(tree, m, n)}
                inter.append(NodeViolation(n, h, Strategy(held, ())))
                break
    return SupportReport(terminal, tuple(inter))


def _descends(tree: ScenarioTree, node: str, ancestor: str) -> bool:
    while node is not None:
        if node == ancestor:
            return True
        node = tree.nodes[node].parent
    return False


def call_options(tree: ScenarioTree, sheet: CallQuoteSheet) -> list:
    """``(S^j_T - k)_+ - c`` for every quote, asset ``j`` in sheet order."""
    out = []
    for j, (name, aq) in enumerate(sheet.assets.items()):
        for k, c in aq.quotes:
            payoff = {w: max(tree.nodes[w].prices[j] - k, Fraction(0)) - c for w in tree.leaves}
            out.append(StaticOption(f"{name}:call@{k}", payoff))
    return out


def assemble_market(sheet: CallQuoteSheet, tree: ScenarioTree, priors: PriorSet) -> Market:
    """Attach the quoted calls to ``tree`` after checking spots and terminal supports."""
    if len(sheet.assets) != tree.assets:
        raise ModelError(f"sheet has {len(sheet.assets)} assets, tree has {tree.assets}")
    marginals = calibrate(sheet)
    root = tree.nodes[tree.root]
    for j, aq in enumerate(sheet.assets.values()):
        if root.prices[j] != aq.spot:
            raise ModelError(f"asset {j}: tree spot {root.prices[j]} differs from quoted spot {aq.spot}")
    grid = [set(mu.locations) for mu in marginals.values()]
    bare = Market(tree, priors)
    checks = [("max", support_nodes(bare, "max"))] if priors.is_kernel else [
        (name, support_nodes(bare, name)) for name in priors.names
    ]
    full = _product(grid)
    for label, nodes in checks:
        leaves = [w for w in tree.leaves if w in nodes]
        outside = sorted(w for w in leaves if any(p not in g for p, g in zip(tree.nodes[w].prices, grid)))
        if outside:
            raise ModelError(f"prior {label} charges leaves outside the marginal support: {outside}")
        reached = {tree.nodes[w].prices for w in leaves}
        missing = sorted(full - reached)
        if missing:
            raise ModelError(f"prior {label} misses support points {[tuple(map(str, m)) for m in missing]}")
    return Market(tree, priors, tuple(call_options(tree, sheet)))


def _product(grids: Sequence[set]) -> set:
    out = {()}
    for g in grids:
        out = {p + (x,) for p in out for x in g}
    return out


def separation_pays(market: Market, violation: NodeViolation) -> bool:
    """Separating strategy pays ``>= 0`` q.s. and ``> 0`` on the node's non-polar leaves."""
    pay = portfolio_value(market.tree, violation.strategy)
    polar = polar_set(market.tree, market.priors)
    under = set(market.tree.leaves_under(violation.node))
    ok = all(pay[w] >= 0 for w in polar.qs_support)
    return ok and all(pay[w] > 0 for w in polar.qs_support if w in under)
