"""Scenario-tree markets: filtration, prices, static options, priors, polar sets."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

Number = Fraction | float


class ModelError(ValueError):
    """A market, prior set or claim that does not fit its tree."""


def as_rational(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise ModelError(f"refusing float {value!r} in exact mode; pass a string or Fraction")
    return Fraction(value)


@dataclass(frozen=True)
class Node:
    id: str
    time: int
    parent: str | None
    prices: tuple
    children: tuple = ()


@dataclass(frozen=True)
class ScenarioTree:
    """A finite filtration; leaves are the states, nodes the atoms of each F_t."""

    nodes: Mapping[str, Node]
    horizon: int
    assets: int

    @classmethod
    def build(cls, specs: Iterable, horizon: int | None = None, assets: int | None = None):
        """Build from ``(id, time, parent, prices)`` tuples in any order."""
        specs = [(str(i), int(t), None if p is None else str(p), tuple(as_rational(v) for v in pr))
                 for i, t, p, pr in specs]
        if not specs:
            raise ModelError("tree has no nodes")
        if horizon is None:
            horizon = max(t for _, t, _, _ in specs)
        if assets is None:
            assets = len(specs[0][3])
        children: dict[str, list[str]] = {i: [] for i, _, _, _ in specs}
        if len(children) != len(specs):
            raise ModelError("duplicate node id")
        for i, t, p, pr in specs:
            if p is not None:
                if p not in children:
                    raise ModelError(f"node {i}: unknown parent {p}")
                children[p].append(i)
        nodes = {i: Node(i, t, p, pr, tuple(children[i])) for i, t, p, pr in specs}
        tree = cls(nodes, horizon, assets)
        tree.validate()
        return tree

    def validate(self) -> None:
        if self.horizon < 1:
            raise ModelError("horizon must be >= 1")
        if self.assets < 1:
            raise ModelError("at least one risky asset is required")
        roots = [n for n in self.nodes.values() if n.parent is None]
        if len(roots) != 1 or roots[0].time != 0:
            raise ModelError("exactly one root at time 0 is required")
        for n in self.nodes.values():
            if len(n.prices) != self.assets:
                raise ModelError(f"node {n.id}: expected {self.assets} prices")
            if not 0 <= n.time <= self.horizon:
                raise ModelError(f"node {n.id}: time {n.time} outside 0..{self.horizon}")
            if n.parent is not None and self.nodes[n.parent].time != n.time - 1:
                raise ModelError(f"node {n.id}: parent is not at time {n.time - 1}")
            if n.time < self.horizon and not n.children:
                raise ModelError(f"node {n.id}: no children before the horizon")

    @cached_property
    def root(self) -> str:
        return next(n.id for n in self.nodes.values() if n.parent is None)

    @cached_property
    def leaves(self) -> tuple:
        return tuple(n.id for n in self.nodes.values() if n.time == self.horizon)

    @cached_property
    def internal(self) -> tuple:
        """Non-leaf nodes, ordered by time then insertion order."""
        inner = [n for n in self.nodes.values() if n.time < self.horizon]
        return tuple(n.id for n in sorted(inner, key=lambda n: n.time))

    @cached_property
    def _leaves_under(self) -> dict:
        out = {leaf: (leaf,) for leaf in self.leaves}
        for t in range(self.horizon - 1, -1, -1):
            for n in self.nodes.values():
                if n.time == t:
                    out[n.id] = tuple(itertools.chain.from_iterable(out[c] for c in n.children))
        return out

    def leaves_under(self, node: str) -> tuple:
        return self._leaves_under[node]

    @cached_property
    def _paths(self) -> dict:
        out = {}
        for leaf in self.leaves:
            path = [leaf]
            while self.nodes[path[-1]].parent is not None:
                path.append(self.nodes[path[-1]].parent)
            out[leaf] = tuple(reversed(path))
        return out

    def path(self, leaf: str) -> tuple:
        """Node ids from the root to ``leaf``; ``path(leaf)[t]`` is the time-t atom."""
        return self._paths[leaf]

    def delta(self, child: str) -> tuple:
        """Price increment from the parent of ``child`` to ``child``."""
        node = self.nodes[child]
        parent = self.nodes[node.parent]
        return tuple(a - b for a, b in zip(node.prices, parent.prices))

    def scaled(self, factor) -> "ScenarioTree":
        factor = as_rational(factor)
        nodes = {i: Node(n.id, n.time, n.parent, tuple(factor * p for p in n.prices), n.children)
                 for i, n in self.nodes.items()}
        return ScenarioTree(nodes, self.horizon, self.assets)


@dataclass(frozen=True)
class Measure:
    """A probability on leaves; zero weights are dropped."""

    weights: Mapping[str, Number]

    def __post_init__(self):
        w = {k: v for k, v in self.weights.items() if v != 0}
        object.__setattr__(self, "weights", w)
        if any(v < 0 for v in w.values()):
            raise ModelError("negative probability")
        total = sum(w.values())
        exact = all(isinstance(v, (int, Fraction)) for v in w.values())
        if exact and total != 1 or not exact and abs(total - 1) > 1e-7:
            raise ModelError(f"weights sum to {total}, not 1")

    def __getitem__(self, leaf: str):
        return self.weights.get(leaf, 0)

    @property
    def support(self) -> frozenset:
        return frozenset(self.weights)

    def expect(self, claim: "Claim | Mapping") -> Number:
        values = claim.values if isinstance(claim, Claim) else claim
        return sum(p * values[leaf] for leaf, p in self.weights.items())


@dataclass(frozen=True)
class StaticOption:
    label: str
    payoff: Mapping[str, Fraction]


@dataclass(frozen=True)
class Claim:
    values: Mapping[str, Number]

    def __post_init__(self):
        vals = {k: v if isinstance(v, (Fraction, float)) else as_rational(v) for k, v in self.values.items()}
        object.__setattr__(self, "values", vals)

    def __getitem__(self, leaf: str):
        return self.values[leaf]

    @classmethod
    def indicator(cls, tree: ScenarioTree, leaves: Iterable[str]) -> "Claim":
        chosen = set(leaves)
        return cls({leaf: Fraction(int(leaf in chosen)) for leaf in tree.leaves})

    @classmethod
    def constant(cls, tree: ScenarioTree, c) -> "Claim":
        c = as_rational(c)
        return cls({leaf: c for leaf in tree.leaves})

    def __add__(self, other: "Claim") -> "Claim":
        return Claim({k: v + other.values[k] for k, v in self.values.items()})

    def scale(self, c) -> "Claim":
        return Claim({k: c * v for k, v in self.values.items()})

    def shift(self, c) -> "Claim":
        return Claim({k: v + c for k, v in self.values.items()})


@dataclass(frozen=True)
class PriorSet:
    """Either a flat list of leaf measures or one-step kernels per non-leaf node.

    Kernel sets stand for their convex hulls at each node (the product
    structure requires convex local prior sets); only the supports of
    mixtures matter for null sets and a.s. hedging.
    """

    flat: tuple = ()
    kernel: Mapping[str, tuple] | None = None
    names: tuple = ()

    def __post_init__(self):
        if (not self.flat) == (self.kernel is None):
            raise ModelError("a prior set is either flat or kernel, and nonempty")
        if self.flat and not self.names:
            object.__setattr__(self, "names", tuple(f"P{i + 1}" for i in range(len(self.flat))))
        if self.flat and len(self.names) != len(self.flat):
            raise ModelError("one name per flat prior")

    @classmethod
    def from_flat(cls, measures: Sequence, names: Sequence[str] = ()) -> "PriorSet":
        ms = tuple(m if isinstance(m, Measure) else Measure({k: as_rational(v) for k, v in m.items()})
                   for m in measures)
        return cls(flat=ms, names=tuple(names))

    @classmethod
    def from_kernel(cls, kernel: Mapping[str, Sequence[Mapping]]) -> "PriorSet":
        kern = {}
        for node, steps in kernel.items():
            out = []
            for step in steps:
                step = {k: as_rational(v) for k, v in step.items() if as_rational(v) != 0}
                out.append(step)
            kern[str(node)] = tuple(out)
        return cls(kernel=kern)

    @property
    def is_kernel(self) -> bool:
        return self.kernel is not None

    def named(self) -> dict:
        return dict(zip(self.names, self.flat))

    def validate(self, tree: ScenarioTree) -> None:
        if self.flat:
            leaves = set(tree.leaves)
            for name, m in zip(self.names, self.flat):
                if not m.support <= leaves:
                    raise ModelError(f"prior {name} charges non-leaves {sorted(m.support - leaves)}")
            return
        for node in tree.internal:
            steps = self.kernel.get(node)
            if not steps:
                raise ModelError(f"kernel prior: node {node} has no one-step measures")
            kids = set(tree.nodes[node].children)
            for step in steps:
                if not set(step) <= kids:
                    raise ModelError(f"kernel prior at {node}: mass on non-children")
                if any(v < 0 for v in step.values()) or sum(step.values()) != 1:
                    raise ModelError(f"kernel prior at {node}: not a probability")
        extra = set(self.kernel) - set(tree.internal)
        if extra:
            raise ModelError(f"kernel prior on unknown or leaf nodes {sorted(extra)}")


@dataclass(frozen=True)
class Market:
    tree: ScenarioTree
    priors: PriorSet
    options: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        self.priors.validate(self.tree)
        leaves = set(self.tree.leaves)
        for opt in self.options:
            if set(opt.payoff) != leaves:
                raise ModelError(f"option {opt.label}: payoff must be defined on every leaf")

    def scaled(self, factor) -> "Market":
        """All prices (assets and option payoffs) multiplied by ``factor``."""
        factor = as_rational(factor)
        opts = tuple(StaticOption(o.label, {k: factor * v for k, v in o.payoff.items()}) for o in self.options)
        return Market(self.tree.scaled(factor), self.priors, opts)


# ---------------------------------------------------------------------------
# null sets and supports


@dataclass(frozen=True)
class PolarStructure:
    polar_leaves: frozenset
    qs_support: tuple

    def is_polar(self, leaf: str) -> bool:
        return leaf in self.polar_leaves


def _kernel_charged_children(priors: PriorSet, node: str, selection=None) -> set:
    steps = priors.kernel[node]
    idx = range(len(steps)) if selection is None else selection[node]
    return {c for i in idx for c, p in steps[i].items() if p > 0}


def polar_set(tree: ScenarioTree, priors: PriorSet) -> PolarStructure:
    """Leaves null under every prior."""
    priors.validate(tree)
    if priors.flat:
        charged = set()
        for m in priors.flat:
            charged |= m.support
    else:
        reach = {tree.root}
        for node in tree.internal:
            if node in reach:
                reach |= _kernel_charged_children(priors, node)
        charged = reach
    support = tuple(leaf for leaf in tree.leaves if leaf in charged)
    return PolarStructure(frozenset(tree.leaves) - set(support), support)


def support_nodes(market: Market, prior=None) -> frozenset:
    """Nodes charged by ``prior`` (all nodes above a charged leaf).

    ``prior`` is ``None`` for the quasi-sure support, a flat prior name, or
    for kernel priors a selection ``{node: tuple of kernel indices}`` whose
    mixtures are used; the string ``"max"`` selects every kernel everywhere.
    """
    tree, priors = market.tree, market.priors
    if prior is None or prior == "max":
        leaves = polar_set(tree, priors).qs_support
    elif priors.flat:
        named = priors.named()
        if prior not in named:
            raise ModelError(f"unknown prior {prior!r}")
        leaves = [leaf for leaf in tree.leaves if named[prior][leaf] > 0]
    else:
        reach = {tree.root}
        for node in tree.internal:
            if node in reach:
                reach |= _kernel_charged_children(priors, node, prior)
        leaves = [leaf for leaf in tree.leaves if leaf in reach]
    out = set()
    for leaf in leaves:
        out.update(tree.path(leaf))
    return frozenset(out)


def kernel_selections(market: Market, convex: bool = True, limit: int = 4096) -> list:
    """Enumerate kernel selections (the finite flat expansion, up to null sets).

    With ``convex`` each node picks a nonempty subset of its kernels (their
    mixture); otherwise a single kernel.  Refuses when more than ``limit``.
    """
    priors = market.priors
    if not priors.is_kernel:
        raise ModelError("not a kernel prior set")
    nodes = market.tree.internal
    choices = []
    for node in nodes:
        k = len(priors.kernel[node])
        if convex:
            opts = [c for r in range(1, k + 1) for c in itertools.combinations(range(k), r)]
        else:
            opts = [(i,) for i in range(k)]
        choices.append(opts)
    count = 1
    for c in choices:
        count *= len(c)
    if count > limit:
        raise ModelError(f"{count} kernel selections exceed the limit {limit}")
    return [dict(zip(nodes, combo)) for combo in itertools.product(*choices)]


def selection_measure(market: Market, selection) -> Measure:
    """Product measure of the uniform mixtures picked by ``selection``."""
    tree, priors = market.tree, market.priors
    weights = {}
    for leaf in tree.leaves:
        p = Fraction(1)
        path = tree.path(leaf)
        for parent, child in zip(path, path[1:]):
            idx = selection[parent]
            p *= sum(priors.kernel[parent][i].get(child, 0) for i in idx) / len(idx)
            if p == 0:
                break
        if p:
            weights[leaf] = p
    return Measure(weights)


def selection_label(selection) -> str:
    return "sel[" + ",".join(f"{n}={'+'.join(map(str, idx))}" for n, idx in selection.items()) + "]"


def flat_expansion(market: Market, convex: bool = True, limit: int = 4096) -> list:
    """``(label, Measure)`` for every kernel selection; oracle use only."""
    return [(selection_label(s), selection_measure(market, s))
            for s in kernel_selections(market, convex, limit)]


# ---------------------------------------------------------------------------
# claims, weights, order


def weight_W(tree: ScenarioTree, options: Sequence[StaticOption] = ()) -> Claim:
    """``1 + sum_t sum_j |S_t^j| + sum_i |phi_i|`` along each leaf's path."""
    out = {}
    for leaf in tree.leaves:
        w = Fraction(1)
        for node in tree.path(leaf)[1:]:
            w += sum(abs(p) for p in tree.nodes[node].prices)
        w += sum(abs(o.payoff[leaf]) for o in options)
        out[leaf] = w
    return Claim(out)


def weighted_norm(x: Claim, w: Claim, polar: PolarStructure) -> Fraction:
    return max((abs(x[leaf]) / w[leaf] for leaf in polar.qs_support), default=Fraction(0))


class Order(str, enum.Enum):
    LE = "LE"
    GE = "GE"
    EQ = "EQ"
    INCOMPARABLE = "INCOMPARABLE"


def qs_compare(x: Claim, y: Claim, polar: PolarStructure) -> Order:
    le = all(x[leaf] <= y[leaf] for leaf in polar.qs_support)
    ge = all(x[leaf] >= y[leaf] for leaf in polar.qs_support)
    if le and ge:
        return Order.EQ
    if le:
        return Order.LE
    if ge:
        return Order.GE
    return Order.INCOMPARABLE


@dataclass(frozen=True)
class Strategy:
    """Semi-static strategy; ``dynamic[n]`` is held over the step after node ``n``."""

    dynamic: Mapping[str, tuple] = field(default_factory=dict)
    static: tuple = ()

    def position(self, node: str, d: int) -> tuple:
        return self.dynamic.get(node, (0,) * d)


def portfolio_value(tree: ScenarioTree, strategy: Strategy, options: Sequence[StaticOption] = ()) -> Claim:
    """Terminal gain ``(H o S)_T + h . Phi`` per leaf."""
    if strategy.static and len(strategy.static) != len(options):
        raise ModelError("static weights and options differ in length")
    for node, h in strategy.dynamic.items():
        if node not in tree.nodes or tree.nodes[node].time >= tree.horizon:
            raise ModelError(f"strategy positioned at non-trading node {node}")
        if len(h) != tree.assets:
            raise ModelError(f"position at {node} has wrong dimension")
    out = {}
    for leaf in tree.leaves:
        path = tree.path(leaf)
        v = 0
        for parent, child in zip(path, path[1:]):
            h = strategy.dynamic.get(parent)
            if h is not None:
                v += sum(a * b for a, b in zip(h, tree.delta(child)))
        for hi, opt in zip(strategy.static, options):
            v += hi * opt.payoff[leaf]
        out[leaf] = v
    return Claim(out)
