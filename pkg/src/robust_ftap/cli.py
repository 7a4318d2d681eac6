"""Command line entry point.

Exit codes: 0 clean, 2 arbitrage or violation found, 1 usage or model error.
Reports are JSON on stdout (or ``--out``) and byte-identical for identical
inputs; wall-clock timing is included only with ``--timing``.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction

from . import jsonio
from .arbitrage import (
    approximate_class,
    thread_count,
    check_na,
    check_sna,
    moment_errors,
    validate_approximate,
)
from .generate import GeneratorConfig, generate
from .jsonio import SCHEMA_VERSION, dumps, enc, load_json
from .lp import LpError
from .market import Claim, ModelError, polar_set, portfolio_value
from .mot import (
    QuoteVerdict,
    assemble_market,
    calibrate,
    convex_order_check,
    implied_marginal,
    martingale_coupling,
    quote_diagnostics,
    support_enforcement,
    support_function,
)
from .mot import Order as CxOrder
from .oracles import oracle_na, oracle_sna
from .superhedge import (
    duality_check,
    sensitivity_report,
    superhedge_per_prior,
    superhedge_qs,
)

EXIT_OK, EXIT_ERROR, EXIT_FOUND = 0, 1, 2
FILE_FLAGS = {"market", "claim", "quotes", "tree", "priors", "mu", "nu", "witness", "out", "emit_market"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _mode_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="exact rational arithmetic (default)")
    g.add_argument("--tol", type=float, help="floating mode with this tolerance")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds in the report")


def build_parser() -> Parser:
    parser = Parser(prog="robust-ftap", description="Arbitrage and superhedging on scenario trees under many priors.")
    public = "check-na,check-sna,superhedge,measures,calibrate,convex-order,generate"
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser, metavar="{" + public + "}")

    p = sub.add_parser("check-na", help="decide no-arbitrage")
    p.add_argument("--market", required=True)
    p.add_argument("--witness", help="write the witness (strategy or measures) here")
    p.add_argument("--per-leaf", action="store_true", help="report the max-weight measure for each leaf")
    _mode_args(p)

    p = sub.add_parser("check-sna", help="decide sensitive no-arbitrage")
    p.add_argument("--market", required=True)
    _mode_args(p)

    p = sub.add_parser("superhedge", help="superhedging price of a claim")
    p.add_argument("--market", required=True)
    p.add_argument("--claim", required=True)
    p.add_argument("--prior", help="price under one prior (flat name, kernel selection label or 'max')")
    p.add_argument("--continuation", choices=("qs", "per_prior"), default="qs")
    p.add_argument("--sensitivity", action="store_true")
    p.add_argument("--dual", action="store_true")
    p.add_argument("--cap", help="admissibility bound lambda (payoff >= -lambda W q.s.)")
    _mode_args(p)

    p = sub.add_parser("measures", help="approximate martingale measures charging a leaf")
    p.add_argument("--market", required=True)
    p.add_argument("--leaf", required=True)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--perturb", action="store_true", help="emit strictly approximate members")
    _mode_args(p)

    p = sub.add_parser("calibrate", help="support functions, implied marginals and quote diagnostics")
    p.add_argument("--quotes", required=True)
    p.add_argument("--emit-market")
    p.add_argument("--tree")
    p.add_argument("--priors")
    _mode_args(p)

    p = sub.add_parser("convex-order", help="convex order of two marginals")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    _mode_args(p)

    p = sub.add_parser("generate", help="seeded random market")
    for name, default in (("seed", 0), ("horizon", 2), ("branching", 3), ("min-branching", 2),
                          ("assets", 1), ("priors", 2), ("options", 0)):
        p.add_argument(f"--{name}", type=int, default=default)
    p.add_argument("--kernel", action="store_true")
    p.add_argument("--balance", type=float, default=GeneratorConfig.balance)
    p.add_argument("--out")

    # test-only; no help entry keeps it out of the listing
    p = sub.add_parser("oracle")
    p.add_argument("--market", required=True)
    p.add_argument("--sna", action="store_true")
    p.add_argument("--out")
    p.add_argument("--timing", action="store_true")
    return parser


def _echo(args: argparse.Namespace) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("command", "out", "timing", "exact") or v is None or v is False:
            continue
        out[k] = os.path.basename(v) if k in FILE_FLAGS and isinstance(v, str) else v
    return out


def _report(args, body: dict) -> dict:
    tol = getattr(args, "tol", None)
    doc = {
        "schema": SCHEMA_VERSION,
        "command": args.command,
        "arguments": _echo(args),
        "config": {"mode": "float" if tol is not None else "exact", "tol": tol},
    }
    doc.update(body)
    return doc


def _write(path: str | None, doc) -> None:
    text = dumps(doc)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _market(args):
    return jsonio.parse_market(load_json(args.market))


def _na_body(market, verdict, tol) -> dict:
    body = {
        "verdict": verdict.kind.value,
        "polar_leaves": sorted(polar_set(market.tree, market.priors).polar_leaves),
    }
    if verdict.ok:
        body["measures"] = [
            {"leaf": w, "delta": enc(d), "measure": jsonio.measure_to_json(q)} for w, q, d in verdict.measures
        ]
    else:
        pay = portfolio_value(market.tree, verdict.witness, market.options)
        body["witness"] = {
            "leaf": verdict.witness_leaf,
            "strategy": jsonio.strategy_to_json(verdict.witness),
            "payoff": {w: enc(v) for w, v in pay.values.items()},
        }
    return body


# -- commands


def cmd_check_na(args):
    market = _market(args)
    v = check_na(market, per_leaf=args.per_leaf, tol=args.tol)
    body = _na_body(market, v, args.tol)
    if args.witness:
        _write(args.witness, {"schema": SCHEMA_VERSION, **{k: body[k] for k in ("measures", "witness") if k in body}})
    return body, EXIT_OK if v.ok else EXIT_FOUND


def cmd_check_sna(args):
    market = _market(args)
    v = check_sna(market, tol=args.tol)
    body = {"verdict": v.kind.value, "na": _na_body(market, v.na, args.tol)}
    if not v.ok:
        body["claim"] = {w: enc(x) for w, x in v.claim.values.items()}
        body["hedges"] = {
            p: {"price": enc(price), "strategy": jsonio.strategy_to_json(s)} for p, (price, s) in v.hedges.items()
        }
    return body, EXIT_OK if v.ok else EXIT_FOUND


def _result_json(res) -> dict:
    return {
        "price": enc(res.price),
        "node_prices": {n: enc(v) for n, v in res.node_prices.items()},
        "strategy": jsonio.strategy_to_json(res.strategy),
        "binding_measure": jsonio.measure_to_json(res.binding_measure),
    }


def cmd_superhedge(args):
    market = _market(args)
    claim = jsonio.parse_claim(load_json(args.claim))
    cap = Fraction(args.cap) if args.cap is not None else None
    tol = args.tol
    if args.prior is not None:
        res = superhedge_per_prior(market, claim, args.prior, continuation=args.continuation, cap=cap, tol=tol)
        body = {"prior": args.prior, "continuation": args.continuation, **_result_json(res)}
    else:
        res = superhedge_qs(market, claim, cap=cap, binding=True, tol=tol)
        body = _result_json(res)
    if args.sensitivity:
        rep = sensitivity_report(market, claim, tol=tol)
        body["sensitivity"] = {
            "quasi_sure_price": enc(rep.quasi_sure_price),
            "per_prior_prices": {p: enc(v) for p, v in rep.per_prior_prices.items()},
            "gap": enc(rep.gap),
            "greedy_selection": rep.greedy_selection,
            "continuation": rep.continuation,
        }
    if args.dual:
        d = duality_check(market, claim, tol=tol)
        body["duality"] = {
            "status": d.status,
            "primal": enc(d.primal),
            "dual": enc(d.dual),
            "gap": enc(d.gap),
            "measure": jsonio.measure_to_json(d.measure),
        }
    return body, EXIT_OK


def cmd_measures(args):
    market = _market(args)
    na = check_na(market, tol=args.tol)
    if not na.ok:
        return {"verdict": na.kind.value, **_na_body(market, na, args.tol)}, EXIT_FOUND
    ac = approximate_class(market, args.leaf, args.n_max, perturb=args.perturb, tol=args.tol)
    members = []
    for n, q in ac.members:
        errs = moment_errors(market, q)
        members.append({
            "n": n,
            "measure": jsonio.measure_to_json(q),
            "max_moment_error": enc(max((abs(v) for v in errs.values()), default=Fraction(0))),
            "valid": not validate_approximate(market, q, n, ac.dominating),
        })
    body = {
        "verdict": na.kind.value,
        "leaf": ac.leaf,
        "dominating_prior": ac.dominating,
        "delta": enc(ac.delta),
        "members": members,
    }
    return body, EXIT_OK


def cmd_calibrate(args):
    sheet = jsonio.parse_quotes(load_json(args.quotes))
    diag = quote_diagnostics(sheet)
    assets = {}
    for name, aq in sheet.assets.items():
        R = support_function(aq)
        entry = {"support_function": [[enc(x), enc(y)] for x, y in R.points]}
        try:
            entry["marginal"] = jsonio.marginal_to_json(implied_marginal(R, aq.spot))["atoms"]
        except ModelError as exc:
            entry["marginal"] = None
            entry["marginal_error"] = str(exc)
        assets[name] = entry
    body = {
        "verdict": diag.verdict.value,
        "assets": assets,
        "violations": [
            {
                "type": v.type,
                "asset": v.asset,
                "strikes": [enc(k) for k in v.strikes],
                "portfolio": [[enc(w), [inst[0], *map(enc, inst[1:])]] for w, inst in v.portfolio],
                "cost": enc(v.cost),
            }
            for v in diag.violations
        ],
        "non_binding": [
            {"asset": a, "strike": enc(k), "quote": enc(c), "support_value": enc(r)} for a, k, c, r in diag.non_binding
        ],
    }
    code = EXIT_OK if diag.verdict is QuoteVerdict.CONSISTENT else EXIT_FOUND
    if args.emit_market:
        if not (args.tree and args.priors):
            raise UsageError("--emit-market needs --tree and --priors")
        if code != EXIT_OK:
            raise ModelError("cannot assemble a market from an arbitrageable quote sheet")
        tree = jsonio.parse_tree(load_json(args.tree))
        priors = jsonio.parse_priors(load_json(args.priors))
        market = assemble_market(sheet, tree, priors)
        rep = support_enforcement(market, calibrate(sheet))
        body["support"] = {
            "terminal_violations": list(rep.terminal),
            "intermediate_violations": [
                {"node": v.node, "position": [enc(h) for h in v.position],
                 "strategy": jsonio.strategy_to_json(v.strategy)}
                for v in rep.intermediate
            ],
        }
        _write(args.emit_market, jsonio.market_to_json(market))
        if not rep.clean:
            code = EXIT_FOUND
    return body, code


def cmd_convex_order(args):
    mu = jsonio.parse_marginal(load_json(args.mu))
    nu = jsonio.parse_marginal(load_json(args.nu))
    res = convex_order_check(mu, nu)
    coupling = martingale_coupling(mu, nu, tol=args.tol)
    body = {
        "verdict": res.verdict.value,
        "reason": res.reason,
        "strike": enc(res.strike) if res.strike is not None else None,
        "coupling": None if coupling is None else [[enc(x), enc(y), enc(p)] for (x, y), p in coupling.items()],
    }
    return body, EXIT_OK if res.verdict is CxOrder.ORDERED else EXIT_FOUND


def cmd_generate(args):
    cfg = GeneratorConfig(
        seed=args.seed, horizon=args.horizon, branching=args.branching, min_branching=args.min_branching,
        assets=args.assets, priors=args.priors, kernel=args.kernel, options=args.options, balance=args.balance,
    )
    return jsonio.market_to_json(generate(cfg)), EXIT_OK


def cmd_oracle(args):
    market = _market(args)
    v = oracle_na(market)
    body = {"verdict": "NoArbitrage" if v.na else "Arbitrage", "uncharged_leaves": list(v.uncharged)}
    code = EXIT_OK if v.na else EXIT_FOUND
    if args.sna:
        holds, leaf = oracle_sna(market)
        body["sna"] = {"verdict": "NoArbitrage" if holds else "Arbitrage", "leaf": leaf}
        if not holds:
            code = EXIT_FOUND
    return body, code


COMMANDS = {
    "check-na": cmd_check_na,
    "check-sna": cmd_check_sna,
    "superhedge": cmd_superhedge,
    "measures": cmd_measures,
    "calibrate": cmd_calibrate,
    "convex-order": cmd_convex_order,
    "generate": cmd_generate,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_ERROR
    started = time.perf_counter()
    try:
        thread_count()
        body, code = COMMANDS[args.command](args)
    except jsonio.SchemaError as exc:
        sys.stderr.write(f"schema error at {exc.pointer}: {exc}\n")
        return EXIT_ERROR
    except (ModelError, LpError, UsageError, ValueError, ZeroDivisionError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    if args.command == "generate":
        doc = body
    else:
        doc = _report(args, body)
        if args.timing:
            doc["timing"] = {"seconds": round(time.perf_counter() - started, 6)}
    _write(args.out, doc)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
