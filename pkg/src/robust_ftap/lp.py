"""Exact linear programming kernel.

A two-phase primal simplex with Bland's rule.  In exact mode every tableau
row is kept as a vector of Python integers (a row may be scaled by any
positive constant without changing the equation it encodes), which avoids
``Fraction`` overhead inside the pivot loop.  Floating mode runs the same
pivoting code on floats with an explicit tolerance.

Certificates use a single convention.  Every constraint row is read in its
``<=`` normalisation (``>=`` rows are negated) and the problem in its
minimisation form (the objective is negated for ``max``).  Multipliers ``y``
are nonnegative on inequality rows and free on equality rows.

* Optimal: ``d = c + A'y`` is the reduced-cost vector; ``d_j > 0`` forces
  ``x_j`` to its lower bound and ``d_j < 0`` to its upper bound, and
  ``-b'y + min_box d.x`` equals the optimal value.
* Infeasible: ``min_box (A'y).x > b'y`` (a Farkas ray).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, TextIO

DEFAULT_MAX_BITS = 2**16
DEFAULT_TOL = 1e-9

RELATIONS = ("<=", "==", ">=")


class LpError(Exception):
    """Malformed program or pathological coefficient growth."""


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple
    rel: str
    rhs: Fraction


@dataclass
class LinearProgram:
    """``objective`` has one entry per variable.

    ``bounds`` holds one ``(lo, hi)`` pair per variable, ``None`` meaning
    infinite; omitted bounds default to ``(0, None)``.
    """

    objective: Sequence
    sense: str = "min"
    constraints: list = field(default_factory=list)
    bounds: list | None = None

    def __post_init__(self):
        self.objective = tuple(self.objective)
        if self.sense not in ("min", "max"):
            raise LpError(f"unknown sense {self.sense!r}")
        if self.bounds is None:
            self.bounds = [(0, None)] * len(self.objective)
        else:
            self.bounds = [(_finite_or_none(lo), _finite_or_none(hi)) for lo, hi in self.bounds]
        if len(self.bounds) != len(self.objective):
            raise LpError("bounds and objective differ in length")
        rows = []
        for con in self.constraints:
            if not isinstance(con, Constraint):
                con = Constraint(*con)
            rows.append(self._normalise(con))
        self.constraints = rows

    @property
    def n(self) -> int:
        return len(self.objective)

    def _normalise(self, con: Constraint) -> Constraint:
        coeffs = con.coeffs
        if isinstance(coeffs, Mapping):
            dense = [0] * self.n
            for j, v in coeffs.items():
                if not 0 <= j < self.n:
                    raise LpError(f"column {j} out of range")
                dense[j] = v
            coeffs = dense
        coeffs = tuple(coeffs)
        if len(coeffs) != self.n:
            raise LpError(f"row arity {len(coeffs)} != {self.n}")
        if con.rel not in RELATIONS:
            raise LpError(f"unknown relation {con.rel!r}")
        return Constraint(coeffs, con.rel, con.rhs)

    def add(self, coeffs, rel: str, rhs) -> int:
        """Append a row (dense sequence or sparse ``{col: coef}``); return its index."""
        self.constraints.append(self._normalise(Constraint(coeffs, rel, rhs)))
        return len(self.constraints) - 1


@dataclass(frozen=True)
class LpOutcome:
    status: Status
    value: Fraction | float | None = None
    x: tuple | None = None
    dual: tuple | None = None
    ray: tuple | None = None


def _finite_or_none(v):
    if v is None:
        return None
    if isinstance(v, float) and math.isinf(v):
        return None
    return v


def _lcm_den(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        d = v.denominator
        if d != 1:
            out = out * d // math.gcd(out, d)
    return out


class _Tableau:
    """Dense simplex tableau; one list per row with the rhs stored last."""

    def __init__(self, rows, basis, objectives, exact, tol, max_bits, debug):
        self.rows = rows
        self.basis = basis
        # each objective is [int-or-float row, scale]; reduced costs = row / scale
        self.objectives = objectives
        self.exact = exact
        self.tol = tol
        self.max_bits = max_bits
        self.debug = debug
        self.npivots = 0

    def neg(self, v) -> bool:
        return v < 0 if self.exact else v < -self.tol

    def pos(self, v) -> bool:
        return v > 0 if self.exact else v > self.tol

    def nonzero(self, v) -> bool:
        return v != 0 if self.exact else abs(v) > self.tol

    def pivot(self, r: int, q: int) -> None:
        rows = self.rows
        pr = rows[r]
        p = pr[q]
        if self.exact:
            if p < 0:
                pr = [-v for v in pr]
                p = -p
                rows[r] = pr
            limit = self.max_bits
            for k, row in enumerate(rows):
                if k == r:
                    continue
                a = row[q]
                if a:
                    new = [p * x - a * y for x, y in zip(row, pr)]
                    g = math.gcd(*new)
                    if g > 1:
                        new = [v // g for v in new]
                    if max(map(abs, new)).bit_length() > limit:
                        raise LpError(f"coefficient growth exceeded {limit} bits")
                    rows[k] = new
            for obj in self.objectives:
                z, scale = obj
                a = z[q]
                if a:
                    new = [p * x - a * y for x, y in zip(z, pr)]
                    scale = p * scale
                    g = math.gcd(math.gcd(*new), scale)
                    if g > 1:
                        new = [v // g for v in new]
                        scale //= g
                    obj[0], obj[1] = new, scale
        else:
            pr = [v / p for v in pr]
            rows[r] = pr
            for k, row in enumerate(rows):
                if k == r:
                    continue
                a = row[q]
                if a:
                    rows[k] = [x - a * y for x, y in zip(row, pr)]
            for obj in self.objectives:
                z = obj[0]
                a = z[q]
                if a:
                    obj[0] = [x - a * y for x, y in zip(z, pr)]
        self.basis[r] = q
        self.npivots += 1
        if self.debug is not None:
            self.dump(f"pivot {self.npivots}: row {r}, column {q}")

    def dump(self, title: str) -> None:
        out = self.debug
        out.write(f"-- {title}\n")
        for obj in self.objectives:
            out.write("obj  " + " ".join(str(v) for v in obj[0]) + f"  / {obj[1]}\n")
        for b, row in zip(self.basis, self.rows):
            out.write(f"x{b:<4}" + " ".join(str(v) for v in row) + "\n")

    def entering(self, obj, allowed: int):
        z = obj[0]
        for j in range(allowed):
            if self.neg(z[j]) and j not in self._basic_set:
                return j
        return None

    def leaving(self, q: int):
        best = None
        for i, row in enumerate(self.rows):
            a = row[q]
            if not self.pos(a):
                continue
            if best is None:
                best = i
                continue
            rb = self.rows[best]
            # compare row[-1]/a with rb[-1]/rb[q]; both denominators positive
            lhs = row[-1] * rb[q]
            rhs = rb[-1] * a
            if self.exact:
                if lhs < rhs or (lhs == rhs and self.basis[i] < self.basis[best]):
                    best = i
            else:
                ratio_i = row[-1] / a
                ratio_b = rb[-1] / rb[q]
                if ratio_i < ratio_b - self.tol or (
                    abs(ratio_i - ratio_b) <= self.tol and self.basis[i] < self.basis[best]
                ):
                    best = i
        return best

    def run(self, obj, allowed: int):
        """Bland's rule on ``obj``; return ``None`` at optimum or the unbounded column."""
        while True:
            self._basic_set = set(self.basis)
            q = self.entering(obj, allowed)
            if q is None:
                return None
            r = self.leaving(q)
            if r is None:
                return q
            self.pivot(r, q)

    def value_of(self, i: int):
        row = self.rows[i]
        b = self.basis[i]
        if self.exact:
            return Fraction(row[-1], row[b])
        return row[-1] / row[b]

    def reduced_cost(self, obj, j: int):
        z, scale = obj
        if self.exact:
            return Fraction(z[j], scale)
        return z[j] / scale


def solve(
    lp: LinearProgram,
    *,
    tol: float | None = None,
    max_bits: int = DEFAULT_MAX_BITS,
    debug: TextIO | None = None,
) -> LpOutcome:
    """Solve ``lp``; exact when ``tol`` is None, floating with tolerance ``tol`` otherwise."""
    if lp.n == 0:
        raise LpError("empty program (no variables)")
    exact = tol is None
    conv = Fraction if exact else float
    sign_obj = 1 if lp.sense == "min" else -1
    cost = [conv(sign_obj * conv(c)) for c in lp.objective]

    # -- variable substitution to x' >= 0
    ncols = 0
    colmap = []  # per original variable: list of (column, sign)
    offset = []
    bound_rows = []  # (column, upper bound on x')
    for lo, hi in lp.bounds:
        lo = None if lo is None else conv(lo)
        hi = None if hi is None else conv(hi)
        if lo is not None:
            colmap.append([(ncols, 1)])
            offset.append(lo)
            if hi is not None:
                bound_rows.append((ncols, hi - lo))
            ncols += 1
        elif hi is not None:
            colmap.append([(ncols, -1)])
            offset.append(hi)
            ncols += 1
        else:
            colmap.append([(ncols, 1), (ncols + 1, -1)])
            offset.append(conv(0))
            ncols += 2
    nstruct = ncols

    # -- standard rows: (coeff dict, rhs, slack sign or 0, user index or None)
    std = []
    for i, con in enumerate(lp.constraints):
        coeffs = {}
        rhs = conv(con.rhs)
        for j, a in enumerate(con.coeffs):
            if not a:
                continue
            a = conv(a)
            rhs -= a * offset[j]
            for col, s in colmap[j]:
                coeffs[col] = coeffs.get(col, 0) + s * a
        slack = {"<=": 1, ">=": -1, "==": 0}[con.rel]
        std.append((coeffs, rhs, slack, i))
    for col, ub in bound_rows:
        std.append(({col: conv(1)}, ub, 1, None))

    m = len(std)
    nslack = sum(1 for r in std if r[2])
    width = nstruct + nslack  # artificial columns appended after this
    rows = []
    flips = []
    scales = []
    ident = []
    art_rows = []
    slack_col = nstruct
    for r, (coeffs, rhs, slack, _) in enumerate(std):
        flip = -1 if rhs < 0 else 1
        flips.append(flip)
        if exact:
            scale = _lcm_den(list(coeffs.values()) + [rhs])
        else:
            scale = 1
        scales.append(scale)
        row = [0] * width
        for col, a in coeffs.items():
            v = flip * a * scale
            row[col] = int(v) if exact else v
        scol = None
        if slack:
            scol = slack_col
            row[scol] = flip * slack
            slack_col += 1
        rhs_v = flip * rhs * scale
        row.append(int(rhs_v) if exact else rhs_v)
        rows.append(row)
        if scol is not None and flip * slack == 1:
            ident.append(scol)
        else:
            ident.append(None)
            art_rows.append(r)
    nart = len(art_rows)
    total = width + nart
    for row in rows:
        rhs_v = row.pop()
        row.extend([0] * nart)
        row.append(rhs_v)
    for k, r in enumerate(art_rows):
        rows[r][width + k] = 1
        ident[r] = width + k
    basis = list(ident)

    zero = 0 if exact else 0.0
    # phase II objective on the x' columns; artificial columns cost 0 and never enter
    cscale = _lcm_den(cost) if exact else 1.0
    z2 = [zero] * (total + 1)
    for j, cols in enumerate(colmap):
        cj = int(cost[j] * cscale) if exact else cost[j]
        for col, s in cols:
            z2[col] += cj * s
    obj2 = [z2, cscale]
    # phase I objective: sum of artificials, expressed in nonbasic terms
    z1 = [zero] * (total + 1)
    for k, r in enumerate(art_rows):
        z1[width + k] = 1 if exact else 1.0
    for r in art_rows:
        z1 = [a - b for a, b in zip(z1, rows[r])]
    obj1 = [z1, 1 if exact else 1.0]

    tab = _Tableau(rows, basis, [obj1, obj2], exact, tol or 0.0, max_bits, debug)
    if debug is not None:
        tab.dump("initial tableau")

    def duals(obj, art_cost):
        out = []
        y_std = []
        for r in range(m):
            col = ident[r]
            c_e = art_cost if col >= width else 0
            y_std.append(c_e - tab.reduced_cost(obj, col))
        for r, (_, _, slack, user) in enumerate(std):
            if user is None:
                continue
            y = y_std[r] * scales[r] * flips[r]
            rel = lp.constraints[user].rel
            out.append(y if rel == ">=" else -y)
        return tuple(out)

    def primal():
        xs = [Fraction(0) if exact else 0.0] * total
        for i, b in enumerate(tab.basis):
            xs[b] = tab.value_of(i)
        return tuple(
            offset[j] + sum(s * xs[col] for col, s in cols) for j, cols in enumerate(colmap)
        )

    if nart:
        tab.run(obj1, width)
        phase1 = -tab.reduced_cost(obj1, total)
        if tab.pos(phase1):
            return LpOutcome(Status.INFEASIBLE, dual=duals(obj1, 1))
        # drive artificials out of the basis; rows with no eligible column are redundant
        for i in range(m):
            if tab.basis[i] < width:
                continue
            row = tab.rows[i]
            for j in range(width):
                if tab.nonzero(row[j]) and j not in tab.basis:
                    tab.pivot(i, j)
                    break
    obj1[0] = None  # phase I row no longer maintained
    tab.objectives = [obj2]
    q = tab.run(obj2, width)
    x = primal()
    if q is not None:
        dirs = [Fraction(0) if exact else 0.0] * total
        dirs[q] = Fraction(1) if exact else 1.0
        for i, b in enumerate(tab.basis):
            row = tab.rows[i]
            if exact:
                dirs[b] = -Fraction(row[q], row[b])
            else:
                dirs[b] = -row[q] / row[b]
        ray = tuple(sum(s * dirs[col] for col, s in cols) for cols in colmap)
        return LpOutcome(Status.UNBOUNDED, x=x, ray=ray)
    value = sum(conv(c) * v for c, v in zip(lp.objective, x))
    return LpOutcome(Status.OPTIMAL, value=value, x=x, dual=duals(obj2, 0))


# ---------------------------------------------------------------------------
# certificate checking


def _normalised_rows(lp: LinearProgram, conv):
    for con in lp.constraints:
        a = [conv(v) for v in con.coeffs]
        b = conv(con.rhs)
        if con.rel == ">=":
            a = [-v for v in a]
            b = -b
        yield a, b, con.rel


def _box_min(coef, bounds, conv, tol):
    """Minimum of ``coef . x`` over the box; ``None`` when unbounded below."""
    total = conv(0)
    for c, (lo, hi) in zip(coef, bounds):
        if c > tol:
            if lo is None:
                return None
            total += c * conv(lo)
        elif c < -tol:
            if hi is None:
                return None
            total += c * conv(hi)
    return total


def verify(lp: LinearProgram, outcome: LpOutcome, *, tol: float | None = None) -> list[str]:
    """Check an outcome's certificate by substitution; return the list of problems."""
    conv = Fraction if tol is None else float
    eps = 0 if tol is None else tol
    problems = []
    rows = list(_normalised_rows(lp, conv))
    if outcome.status is Status.INFEASIBLE:
        y = outcome.dual
        if any(lo is not None and hi is not None and conv(lo) > conv(hi) for lo, hi in lp.bounds):
            return problems
        if y is None or len(y) != len(rows):
            return ["missing Farkas ray"]
        for yi, (_, _, rel) in zip(y, rows):
            if rel != "==" and yi < -eps:
                problems.append("negative multiplier on inequality row")
        coef = [sum(yi * a[j] for yi, (a, _, _) in zip(y, rows)) for j in range(lp.n)]
        bmin = _box_min(coef, lp.bounds, conv, eps)
        yb = sum(yi * b for yi, (_, b, _) in zip(y, rows))
        if bmin is None or not bmin > yb + eps:
            problems.append("Farkas inequality fails")
        return problems
    x = outcome.x
    for (a, b, rel), con in zip(rows, lp.constraints):
        lhs = sum(ai * xi for ai, xi in zip(a, x))
        if rel == "==" and abs(lhs - b) > eps:
            problems.append(f"equality violated by {lhs - b}")
        elif rel != "==" and lhs > b + eps:
            problems.append(f"inequality violated by {lhs - b}")
    for xi, (lo, hi) in zip(x, lp.bounds):
        if lo is not None and xi < conv(lo) - eps or hi is not None and xi > conv(hi) + eps:
            problems.append("bound violated")
    if outcome.status is Status.UNBOUNDED:
        ray = outcome.ray
        c = [conv(v) * (1 if lp.sense == "min" else -1) for v in lp.objective]
        if sum(ci * ri for ci, ri in zip(c, ray)) >= -eps:
            problems.append("ray does not improve the objective")
        for a, _, rel in rows:
            s = sum(ai * ri for ai, ri in zip(a, ray))
            if rel == "==" and abs(s) > eps or rel != "==" and s > eps:
                problems.append("ray leaves the feasible region")
        for ri, (lo, hi) in zip(ray, lp.bounds):
            if lo is not None and ri < -eps or hi is not None and ri > eps:
                problems.append("ray violates a bound")
        return problems
    y = outcome.dual
    c = [conv(v) * (1 if lp.sense == "min" else -1) for v in lp.objective]
    for yi, (a, b, rel) in zip(y, rows):
        if rel != "==" and yi < -eps:
            problems.append("negative multiplier on inequality row")
        slack = b - sum(ai * xi for ai, xi in zip(a, x))
        if abs(yi * slack) > eps:
            problems.append("row complementary slackness fails")
    d = [c[j] + sum(yi * a[j] for yi, (a, _, _) in zip(y, rows)) for j in range(lp.n)]
    for dj, xj, (lo, hi) in zip(d, x, lp.bounds):
        if dj > eps and (lo is None or abs(xj - conv(lo)) > eps):
            problems.append("positive reduced cost off the lower bound")
        if dj < -eps and (hi is None or abs(xj - conv(hi)) > eps):
            problems.append("negative reduced cost off the upper bound")
    dual_value = -sum(yi * b for yi, (_, b, _) in zip(y, rows))
    box = _box_min(d, lp.bounds, conv, eps)
    primal_value = sum(ci * xi for ci, xi in zip(c, x))
    if box is None or abs(dual_value + box - primal_value) > eps * (1 + abs(primal_value)):
        problems.append("duality gap")
    return problems


# ---------------------------------------------------------------------------
# vertex enumeration (brute force, oracle scale)

MAX_VERTEX_DIM = 12
MAX_BASES = 500_000


def _rank_solve(matrix, rhs):
    """Gaussian elimination; return the unique solution or None."""
    n = len(matrix[0]) if matrix else 0
    aug = [list(r) + [b] for r, b in zip(matrix, rhs)]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((i for i in range(row, len(aug)) if aug[i][col] != 0), None)
        if piv is None:
            continue
        aug[row], aug[piv] = aug[piv], aug[row]
        pv = aug[row][col]
        aug[row] = [v / pv for v in aug[row]]
        for i in range(len(aug)):
            if i != row and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[row])]
        pivots.append(col)
        row += 1
    for i in range(row, len(aug)):
        if aug[i][-1] != 0:
            return None
    if row < n:
        return None
    sol = [Fraction(0)] * n
    for i, col in enumerate(pivots):
        sol[col] = aug[i][-1]
    return sol


def _rank(matrix) -> int:
    if not matrix:
        return 0
    n = len(matrix[0])
    rows = [list(r) for r in matrix]
    rank = 0
    for col in range(n):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pv = rows[rank][col]
        for i in range(rank + 1, len(rows)):
            if rows[i][col] != 0:
                f = rows[i][col] / pv
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def vertex_enumerate(constraints: Sequence, dim: int) -> list[tuple[Fraction, ...]]:
    """All vertices of ``{x in R^dim : constraints}``, exact and deduplicated.

    Each constraint is a :class:`Constraint` or ``(coeffs, rel, rhs)`` triple.
    Vertices are found by solving every square system of active constraints,
    so this is only meant for oracle-scale inputs (``dim <= 12``).
    Raises :class:`LpError` when the polyhedron is nonempty but unbounded.
    """
    if dim > MAX_VERTEX_DIM:
        raise LpError(f"vertex enumeration limited to {MAX_VERTEX_DIM} dimensions")
    cons = []
    for con in constraints:
        coeffs, rel, rhs = con if not isinstance(con, Constraint) else (con.coeffs, con.rel, con.rhs)
        coeffs = [Fraction(v) for v in coeffs]
        if len(coeffs) != dim:
            raise LpError("constraint arity mismatch")
        rhs = Fraction(rhs)
        if rel == ">=":
            coeffs, rhs, rel = [-v for v in coeffs], -rhs, "<="
        cons.append((coeffs, rel, rhs))
    eqs = [c for c in cons if c[1] == "=="]
    ineqs = [c for c in cons if c[1] == "<="]
    eq_rank = _rank([c[0] for c in eqs])
    k = dim - eq_rank
    if k < 0:
        k = 0
    if math.comb(len(ineqs), k) > MAX_BASES:
        raise LpError("too many candidate bases for brute-force enumeration")

    def feasible(x):
        for a, rel, b in cons:
            s = sum(ai * xi for ai, xi in zip(a, x))
            if rel == "==" and s != b or rel == "<=" and s > b:
                return False
        return True

    found = set()
    for subset in itertools.combinations(range(len(ineqs)), k):
        mat = [c[0] for c in eqs] + [ineqs[i][0] for i in subset]
        rhs = [c[2] for c in eqs] + [ineqs[i][2] for i in subset]
        if not mat:
            continue
        sol = _rank_solve(mat, rhs)
        if sol is not None and feasible(sol):
            found.add(tuple(sol))

    # boundedness: the recession cone must be {0}
    rec = LinearProgram(
        objective=[0] * dim,
        constraints=[(a, "==" if rel == "==" else "<=", 0) for a, rel, _ in cons],
        bounds=[(-1, 1)] * dim,
    )
    if not found:
        probe = LinearProgram(
            objective=[0] * dim, constraints=[(a, rel, b) for a, rel, b in cons], bounds=[(None, None)] * dim
        )
        if solve(probe).status is Status.INFEASIBLE:
            return []
        raise LpError("polyhedron is unbounded (no vertices)")
    for j in range(dim):
        for s in (1, -1):
            obj = [0] * dim
            obj[j] = s
            rec.objective = tuple(obj)
            rec.sense = "max"
            out = solve(rec)
            if out.value > 0:
                raise LpError("polyhedron is unbounded")
    return sorted(found)
