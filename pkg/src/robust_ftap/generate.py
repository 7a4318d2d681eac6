"""Seeded random markets within oracle scale."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .market import Market, ModelError, PriorSet, ScenarioTree, StaticOption

FACTORS = tuple(Fraction(f) for f in ("1/2", "2/3", "3/4", "1", "5/4", "4/3", "3/2", "2"))
ORACLE_LIMITS = {"horizon": 3, "branching": 4, "assets": 2, "priors": 3}


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    horizon: int = 2
    branching: int = 3
    min_branching: int = 2
    assets: int = 1
    priors: int = 2
    kernel: bool = False
    options: int = 0
    # probability that a node is built locally arbitrage-free
    balance: float = 0.85
    spot: Fraction = Fraction(1)

    def check(self) -> None:
        for name, limit in ORACLE_LIMITS.items():
            value = getattr(self, name)
            if not 1 <= value <= limit:
                raise ModelError(f"{name}={value} outside oracle scale 1..{limit}")
        if not 1 <= self.min_branching <= self.branching:
            raise ModelError("min_branching must lie in 1..branching")
        if self.options < 0 or self.options > 3:
            raise ModelError("options must lie in 0..3")


def suite_config(seed: int, *, kernel: bool = False, options: int = 0) -> GeneratorConfig:
    """A config with shape drawn from ``seed`` (horizon, branching, assets, priors)."""
    rng = random.Random(f"suite-{seed}")
    return GeneratorConfig(
        seed=seed,
        horizon=rng.randint(1, 3),
        branching=rng.randint(2, 4),
        assets=rng.randint(1, 2),
        priors=rng.randint(1, 3),
        kernel=kernel,
        options=options,
    )


def _weights(rng: random.Random, items) -> dict:
    raw = {i: rng.randint(1, 4) for i in items}
    total = sum(raw.values())
    return {i: Fraction(v, total) for i, v in raw.items()}


def _nonempty_subset(rng: random.Random, items, keep: float = 0.75) -> list:
    items = list(items)
    while True:
        pick = [i for i in items if rng.random() < keep]
        if pick:
            return pick


def _child_prices(rng: random.Random, cfg: GeneratorConfig, parent: tuple, count: int) -> list:
    out = [tuple(p * rng.choice(FACTORS) for p in parent) for _ in range(count)]
    if count >= 2 and rng.random() < cfg.balance:
        # last increment = -1/2 * mean of the others: zero is then a strictly
        # positive mix of all increments, so the node is locally arbitrage-free
        k = count - 1
        out[-1] = tuple(p - sum(c[j] - p for c in out[:-1]) / (2 * k) for j, p in enumerate(parent))
    return out


def generate(cfg: GeneratorConfig) -> Market:
    cfg.check()
    rng = random.Random(cfg.seed)
    specs = [("r", 0, None, (cfg.spot,) * cfg.assets)]
    frontier = [("r", (cfg.spot,) * cfg.assets)]
    for t in range(1, cfg.horizon + 1):
        nxt = []
        for nid, prices in frontier:
            count = rng.randint(cfg.min_branching, cfg.branching)
            for i, cp in enumerate(_child_prices(rng, cfg, prices, count)):
                cid = f"{nid}{i}"
                specs.append((cid, t, nid, cp))
                nxt.append((cid, cp))
        frontier = nxt
    tree = ScenarioTree.build(specs, cfg.horizon, cfg.assets)

    if cfg.kernel:
        kernel = {}
        for n in tree.internal:
            kids = tree.nodes[n].children
            k = rng.randint(1, cfg.priors)
            kernel[n] = [
                _weights(rng, kids if rng.random() < 0.4 else _nonempty_subset(rng, kids)) for _ in range(k)
            ]
        priors = PriorSet.from_kernel(kernel)
    else:
        count = rng.randint(1, cfg.priors)
        measures = []
        for _ in range(count):
            if rng.random() < 0.5:
                support = tree.leaves
            else:
                support = _nonempty_subset(rng, tree.leaves)
            measures.append(_weights(rng, support))
        priors = PriorSet.from_flat(measures)

    options = []
    for i in range(cfg.options):
        j = rng.randrange(cfg.assets)
        terminal = sorted({tree.nodes[w].prices[j] for w in tree.leaves})
        strike = rng.choice(terminal)
        payoff = {w: max(tree.nodes[w].prices[j] - strike, Fraction(0)) for w in tree.leaves}
        top = max(payoff.values())
        price = top * Fraction(rng.randint(0, 4), 4)
        options.append(StaticOption(f"call{i}", {w: v - price for w, v in payoff.items()}))
    return Market(tree, priors, tuple(options))


# ---------------------------------------------------------------------------
# quote sheets and marginals

CORRUPTIONS = ("call-spread", "butterfly", "negative-price", "slope-bound")


def random_marginal(rng: random.Random, atoms: int, top: int = 12):
    from .mot import DiscreteMarginal

    locs = sorted(rng.sample(range(0, top + 1), atoms))
    raw = [rng.randint(1, 5) for _ in locs]
    total = sum(raw)
    return DiscreteMarginal(tuple((Fraction(x, 4), Fraction(m, total)) for x, m in zip(locs, raw)))


def random_quote_sheet(seed: int, max_strikes: int = 8, assets: int = 1):
    """A consistent sheet: call prices of a random marginal at some of its atoms."""
    from .mot import AssetQuotes, CallQuoteSheet

    rng = random.Random(f"sheet-{seed}")
    sheet = {}
    for j in range(assets):
        mu = random_marginal(rng, rng.randint(2, max_strikes))
        positive = [x for x in mu.locations if x > 0]
        top = positive[-1]
        picks = sorted(set(rng.sample(positive, rng.randint(1, len(positive))) + [top]))
        sheet[str(j)] = AssetQuotes(mu.mean(), tuple((k, mu.call(k)) for k in picks[:max_strikes]))
    return CallQuoteSheet(sheet)


def corrupt_sheet(sheet, kind: str, seed: int):
    """Inject one static-arbitrage pattern of type ``kind`` into asset "0"."""
    from .mot import AssetQuotes, CallQuoteSheet

    if kind not in CORRUPTIONS:
        raise ModelError(f"unknown corruption {kind!r}")
    rng = random.Random(f"corrupt-{kind}-{seed}")
    aq = sheet.assets["0"]
    pts = [(Fraction(0), aq.spot)] + list(aq.quotes)
    bump = Fraction(rng.randint(1, 4), 8)
    q = list(aq.quotes)
    if kind == "negative-price":
        i = rng.randrange(len(q))
        q[i] = (q[i][0], -bump)
    elif kind == "call-spread":
        i = rng.randrange(len(q))
        # quote i priced above its left neighbour (the anchor when i = 0)
        q[i] = (q[i][0], pts[i][1] + bump)
    elif kind == "slope-bound":
        i = rng.randrange(len(q))
        left_k, left_c = pts[i]
        q[i] = (q[i][0], left_c - (q[i][0] - left_k) - bump)
    else:
        if len(q) < 2:
            k = q[0][0]
            q = [(k / 2, q[0][1]), q[0]]
            pts = [(Fraction(0), aq.spot)] + q
        i = rng.randrange(len(q) - 1)
        (k0, c0), (k1, _), (k2, c2) = pts[i], pts[i + 1], pts[i + 2]
        chord = c0 + (c2 - c0) * (k1 - k0) / (k2 - k0)
        q[i] = (k1, chord + bump)
    out = dict(sheet.assets)
    out["0"] = AssetQuotes(aq.spot, tuple(q))
    return CallQuoteSheet(out)


def random_marginal_pair(seed: int, max_atoms: int = 8):
    """``(mu, nu)`` with about half the pairs in convex order by construction."""
    from .mot import DiscreteMarginal

    rng = random.Random(f"pair-{seed}")
    mu = random_marginal(rng, rng.randint(1, max(1, max_atoms // 2)))
    if rng.random() < 0.5:
        # spread each atom into two with the same conditional mean
        mass: dict = {}
        for x, m in mu.atoms:
            lo = x - Fraction(rng.randint(0, 4), 4)
            hi = x + Fraction(rng.randint(0, 4), 4)
            lo = max(lo, Fraction(0))
            if lo == x or hi == x:
                mass[x] = mass.get(x, 0) + m
                continue
            p_hi = (x - lo) / (hi - lo)
            mass[lo] = mass.get(lo, 0) + m * (1 - p_hi)
            mass[hi] = mass.get(hi, 0) + m * p_hi
        nu = DiscreteMarginal(tuple(sorted(mass.items())))
    else:
        nu = random_marginal(rng, rng.randint(1, max_atoms))
        if rng.random() < 0.7:
            # shift onto mu's mean so only the call comparison decides
            shift = mu.mean() - nu.mean()
            if all(x + shift >= 0 for x in nu.locations):
                nu = DiscreteMarginal(tuple((x + shift, m) for x, m in nu.atoms))
    return mu, nu
