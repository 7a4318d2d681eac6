"""JSON formats.  Rationals travel as strings ``"p/q"`` (or integers)."""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

import jsonschema

from .market import (
    Claim,
    Market,
    Measure,
    ModelError,
    PriorSet,
    ScenarioTree,
    StaticOption,
    Strategy,
)
from .mot import AssetQuotes, CallQuoteSheet, DiscreteMarginal

SCHEMA_VERSION = "robust-ftap/1"


class SchemaError(ModelError):
    def __init__(self, pointer: str, message: str):
        super().__init__(message)
        self.pointer = pointer or "/"


RATIONAL = {
    "oneOf": [
        {"type": "integer"},
        {"type": "string", "pattern": r"^-?[0-9]+((\.[0-9]+)|(/[0-9]*[1-9][0-9]*))?$"},
    ]
}
LEAF_MAP = {"type": "object", "additionalProperties": RATIONAL}
VERSION = {"const": SCHEMA_VERSION}

NODES = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "object",
        "required": ["id", "time", "prices"],
        "properties": {
            "id": {"type": "string", "minLength": 1},
            "time": {"type": "integer", "minimum": 0},
            "parent": {"type": ["string", "null"]},
            "prices": {"type": "array", "minItems": 1, "items": RATIONAL},
        },
        "additionalProperties": False,
    },
}

PRIORS = {
    "type": "object",
    "oneOf": [
        {
            "required": ["flat"],
            "properties": {
                "flat": {"type": "array", "minItems": 1, "items": LEAF_MAP},
                "names": {"type": "array", "items": {"type": "string"}},
            },
            "additionalProperties": False,
        },
        {
            "required": ["kernel"],
            "properties": {
                "kernel": {
                    "type": "object",
                    "additionalProperties": {"type": "array", "minItems": 1, "items": LEAF_MAP},
                }
            },
            "additionalProperties": False,
        },
    ],
}

TREE_PROPS = {
    "schema": VERSION,
    "horizon": {"type": "integer", "minimum": 1},
    "assets": {"type": "integer", "minimum": 1},
    "nodes": NODES,
}

MARKET = {
    "type": "object",
    "required": ["horizon", "assets", "nodes", "priors"],
    "properties": {
        **TREE_PROPS,
        "priors": PRIORS,
        "options": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "payoff"],
                "properties": {"label": {"type": "string"}, "payoff": LEAF_MAP},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

TREE = {
    "type": "object",
    "required": ["horizon", "assets", "nodes"],
    "properties": TREE_PROPS,
    "additionalProperties": False,
}

CLAIM = {
    "type": "object",
    "oneOf": [
        {
            "required": ["values"],
            "properties": {"schema": VERSION, "values": LEAF_MAP},
            "additionalProperties": False,
        },
        {"not": {"required": ["values"]}, "properties": {"schema": VERSION}, "additionalProperties": RATIONAL},
    ],
}

QUOTES = {
    "type": "object",
    "properties": {"schema": VERSION},
    "additionalProperties": {
        "type": "object",
        "required": ["spot", "quotes"],
        "properties": {
            "spot": RATIONAL,
            "quotes": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "array", "prefixItems": [RATIONAL, RATIONAL], "minItems": 2, "maxItems": 2},
            },
        },
        "additionalProperties": False,
    },
}

MARGINAL = {
    "type": "object",
    "required": ["atoms"],
    "properties": {
        "schema": VERSION,
        "atoms": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "prefixItems": [RATIONAL, RATIONAL], "minItems": 2, "maxItems": 2},
        },
    },
    "additionalProperties": False,
}


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate(doc: Any, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = max(errors, key=lambda e: len(e.absolute_path))
        # oneOf failures hide the real cause one level down
        while err.context and err.schema is not RATIONAL:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        message = err.message
        if err.schema is RATIONAL:
            message = f"expected an integer or a rational string such as \"3/4\", got {err.instance!r}"
        raise SchemaError(_pointer(err.absolute_path), message)


def load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ModelError(f"{path}: {exc.strerror}") from None


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def rat(v) -> Fraction:
    return Fraction(v)


def enc(v) -> Any:
    """Rational to ``"p/q"``; floats and infinities to strings too, for stable output."""
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if v == float("-inf"):
            return "-inf"
        if v == float("inf"):
            return "inf"
        return repr(v)
    return v


def _leaf_map(doc: dict) -> dict:
    return {k: rat(v) for k, v in doc.items()}


# -- trees, priors, markets


def tree_from_json(doc: dict) -> ScenarioTree:
    specs = [(n["id"], n["time"], n.get("parent"), [rat(p) for p in n["prices"]]) for n in doc["nodes"]]
    return ScenarioTree.build(specs, doc["horizon"], doc["assets"])


def priors_from_json(doc: dict) -> PriorSet:
    if "flat" in doc:
        return PriorSet.from_flat([_leaf_map(m) for m in doc["flat"]], doc.get("names", ()))
    return PriorSet.from_kernel({n: [_leaf_map(s) for s in steps] for n, steps in doc["kernel"].items()})


def parse_market(doc: Any) -> Market:
    validate(doc, MARKET)
    tree = tree_from_json(doc)
    priors = priors_from_json(doc["priors"])
    options = tuple(StaticOption(o["label"], _leaf_map(o["payoff"])) for o in doc.get("options", []))
    return Market(tree, priors, options)


def parse_tree(doc: Any) -> ScenarioTree:
    validate(doc, TREE)
    return tree_from_json(doc)


def parse_priors(doc: Any) -> PriorSet:
    body = {k: v for k, v in doc.items() if k != "schema"} if isinstance(doc, dict) else doc
    if isinstance(doc, dict) and "schema" in doc:
        validate({"schema": doc["schema"]}, {"properties": {"schema": VERSION}})
    validate(body, PRIORS)
    return priors_from_json(body)


def tree_to_json(tree: ScenarioTree) -> dict:
    return {
        "horizon": tree.horizon,
        "assets": tree.assets,
        "nodes": [
            {"id": n.id, "time": n.time, "parent": n.parent, "prices": [enc(p) for p in n.prices]}
            for n in tree.nodes.values()
        ],
    }


def priors_to_json(priors: PriorSet) -> dict:
    if priors.is_kernel:
        return {"kernel": {n: [{c: enc(p) for c, p in s.items()} for s in steps] for n, steps in priors.kernel.items()}}
    return {
        "flat": [{k: enc(v) for k, v in m.weights.items()} for m in priors.flat],
        "names": list(priors.names),
    }


def market_to_json(market: Market) -> dict:
    doc = {"schema": SCHEMA_VERSION, **tree_to_json(market.tree), "priors": priors_to_json(market.priors)}
    if market.options:
        doc["options"] = [
            {"label": o.label, "payoff": {k: enc(v) for k, v in o.payoff.items()}} for o in market.options
        ]
    return doc


# -- claims, measures, strategies


def parse_claim(doc: Any) -> Claim:
    validate(doc, CLAIM)
    values = doc["values"] if "values" in doc else {k: v for k, v in doc.items() if k != "schema"}
    return Claim(_leaf_map(values))


def claim_to_json(claim: Claim) -> dict:
    return {"schema": SCHEMA_VERSION, "values": {k: enc(v) for k, v in claim.values.items()}}


def measure_to_json(q: Measure | None):
    return None if q is None else {k: enc(v) for k, v in q.weights.items()}


def strategy_to_json(s: Strategy | None):
    if s is None:
        return None
    return {
        "dynamic": {n: [enc(v) for v in h] for n, h in s.dynamic.items()},
        "static": [enc(v) for v in s.static],
    }


def parse_strategy(doc: dict) -> Strategy:
    return Strategy(
        {n: tuple(rat(v) for v in h) for n, h in doc.get("dynamic", {}).items()},
        tuple(rat(v) for v in doc.get("static", [])),
    )


# -- quotes and marginals


def parse_quotes(doc: Any) -> CallQuoteSheet:
    validate(doc, QUOTES)
    assets = {}
    for name, body in doc.items():
        if name == "schema":
            continue
        assets[name] = AssetQuotes(rat(body["spot"]), tuple((rat(k), rat(c)) for k, c in body["quotes"]))
    if not assets:
        raise SchemaError("", "quote sheet lists no assets")
    return CallQuoteSheet(assets)


def quotes_to_json(sheet: CallQuoteSheet) -> dict:
    doc: dict = {"schema": SCHEMA_VERSION}
    for name, aq in sheet.assets.items():
        doc[name] = {"spot": enc(aq.spot), "quotes": [[enc(k), enc(c)] for k, c in aq.quotes]}
    return doc


def parse_marginal(doc: Any) -> DiscreteMarginal:
    validate(doc, MARGINAL)
    return DiscreteMarginal(tuple((rat(x), rat(m)) for x, m in doc["atoms"]))


def marginal_to_json(mu: DiscreteMarginal) -> dict:
    return {"schema": SCHEMA_VERSION, "atoms": [[enc(x), enc(m)] for x, m in mu.atoms]}
