"""JSON scenario files: schema, loading, overrides.

Rational parameters accept a JSON number or a string such as ``"2/3"``;
decimals are read exactly (``0.9`` becomes 9/10).
"""

from __future__ import annotations

import copy
import json
from fractions import Fraction
from typing import Any, Dict, List, Sequence, Tuple

import jsonschema

from .errors import InvalidSchedule
from .oracles import Behavior
from .rewards import RewardSchedule
from .shard import CombinePolicy
from .sim import ClusterSpec, OracleSpec, Scenario

SCHEMA_VERSION = 1

_RATIONAL = {
    "anyOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*-?(\d+(/\d+)?|\d*\.\d+)\s*$"},
    ]
}
_COUNT = {"type": "integer", "minimum": 0}

SCHEMA: Dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "ticks": _COUNT,
        "clusters": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["size"],
                "properties": {
                    "size": _COUNT,
                    "dishonest": _COUNT,
                    "behavior": {"enum": ["always_flip", "random_flip"]},
                    "flip_p": _RATIONAL,
                    "deposit": _RATIONAL,
                    "endowment": _RATIONAL,
                    "offline": _COUNT,
                },
            },
        },
        "oracle_pool": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["count"],
                "properties": {
                    "count": _COUNT,
                    "q": _RATIONAL,
                    "behavior": {"enum": [b.value for b in Behavior]},
                    "deposit": _RATIONAL,
                    "endowment": _RATIONAL,
                    "delay": _COUNT,
                },
            },
        },
        "committee_size": _COUNT,
        "tx_rate": _RATIONAL,
        "claim_rate": _RATIONAL,
        "reward_schedule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["total_tx_reward", "portion_rewards"],
            "properties": {
                "total_tx_reward": _RATIONAL,
                "portion_rewards": {"type": "array", "items": _RATIONAL},
                "penalty_fraction": _RATIONAL,
                "oracle_reward": _RATIONAL,
                "reward_correct_only": {"type": "boolean"},
                "reward_invalid": {"type": "boolean"},
            },
        },
        "delta_t": _COUNT,
        "invalid_tx_fraction": _RATIONAL,
        "false_claim_fraction": _RATIONAL,
        "payload_size": _COUNT,
        "combine": {"enum": [p.value for p in CombinePolicy]},
        "waive_byzantine_bound": {"type": "boolean"},
    },
}

# Sweep/override shorthands that fan out over every list element.
ALIASES = {
    "dishonest": ("clusters", "dishonest"),
    "cluster_size": ("clusters", "size"),
    "flip_p": ("clusters", "flip_p"),
    "q": ("oracle_pool", "q"),
    "penalty_fraction": ("reward_schedule", "penalty_fraction"),
}


class ScenarioFileError(ValueError):
    """The document does not match the schema; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def rational(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip()) if isinstance(x, str) else Fraction(x)


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        parts += extra[:1]
    elif err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        parts += missing[:1]
    return ".".join(parts) or "<root>"


def check(doc) -> None:
    if not isinstance(doc, dict):
        raise ScenarioFileError("<root>", "scenario must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ScenarioFileError(_path(err), err.message)


def from_dict(doc: Dict[str, Any]) -> Scenario:
    """Build a Scenario from a schema-valid document.

    Raises ScenarioFileError for schema violations and for a reward schedule
    whose amounts do not add up.
    """
    check(doc)
    kw: Dict[str, Any] = {}
    for key in ("seed", "ticks", "committee_size", "delta_t", "payload_size", "waive_byzantine_bound"):
        if key in doc:
            kw[key] = doc[key]
    for key in ("tx_rate", "claim_rate", "invalid_tx_fraction", "false_claim_fraction"):
        if key in doc:
            kw[key] = rational(doc[key])
    if "combine" in doc:
        kw["combine"] = CombinePolicy(doc["combine"])
    if "clusters" in doc:
        specs = []
        for c in doc["clusters"]:
            c = dict(c)
            for key in ("flip_p", "deposit", "endowment"):
                if key in c:
                    c[key] = rational(c[key])
            specs.append(ClusterSpec(**c))
        kw["clusters"] = tuple(specs)
    if "oracle_pool" in doc:
        specs = []
        for o in doc["oracle_pool"]:
            o = dict(o)
            for key in ("q", "deposit", "endowment"):
                if key in o:
                    o[key] = rational(o[key])
            if "behavior" in o:
                o["behavior"] = Behavior(o["behavior"])
            specs.append(OracleSpec(**o))
        kw["oracle_pool"] = tuple(specs)
    if "reward_schedule" in doc:
        r = dict(doc["reward_schedule"])
        r["portion_rewards"] = tuple(rational(x) for x in r["portion_rewards"])
        for key in ("total_tx_reward", "penalty_fraction", "oracle_reward"):
            if key in r:
                r[key] = rational(r[key])
        try:
            kw["reward_schedule"] = RewardSchedule(**r)
        except (InvalidSchedule, ValueError) as exc:
            raise ScenarioFileError("reward_schedule", str(exc)) from exc
    return Scenario(**kw)


def _num(x: Fraction):
    return int(x) if x.denominator == 1 else str(x)


def to_dict(s: Scenario) -> Dict[str, Any]:
    """Inverse of :func:`from_dict` (rationals written as ints or "a/b")."""
    doc: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "seed": s.seed,
        "ticks": s.ticks,
        "clusters": [
            {
                "size": c.size,
                "dishonest": c.dishonest,
                "behavior": c.behavior,
                "flip_p": _num(Fraction(c.flip_p)),
                "deposit": _num(Fraction(c.deposit)),
                "endowment": _num(Fraction(c.endowment)),
                "offline": c.offline,
            }
            for c in s.clusters
        ],
        "oracle_pool": [
            {
                "count": o.count,
                "q": _num(Fraction(o.q)),
                "behavior": o.behavior.value,
                "deposit": _num(Fraction(o.deposit)),
                "endowment": _num(Fraction(o.endowment)),
                "delay": o.delay,
            }
            for o in s.oracle_pool
        ],
        "committee_size": s.committee_size,
        "tx_rate": _num(Fraction(s.tx_rate)),
        "claim_rate": _num(Fraction(s.claim_rate)),
        "delta_t": s.delta_t,
        "invalid_tx_fraction": _num(Fraction(s.invalid_tx_fraction)),
        "false_claim_fraction": _num(Fraction(s.false_claim_fraction)),
        "payload_size": s.payload_size,
        "combine": s.combine.value,
        "waive_byzantine_bound": s.waive_byzantine_bound,
    }
    if s.reward_schedule is not None:
        r = s.reward_schedule
        doc["reward_schedule"] = {
            "total_tx_reward": _num(r.total_tx_reward),
            "portion_rewards": [_num(x) for x in r.portion_rewards],
            "penalty_fraction": _num(r.penalty_fraction),
            "oracle_reward": _num(r.oracle_reward),
            "reward_correct_only": r.reward_correct_only,
            "reward_invalid": r.reward_invalid,
        }
    return doc


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def known_parameter(key: str) -> bool:
    if key in ALIASES:
        return True
    parts = key.split(".")
    schema = SCHEMA
    for part in parts:
        if schema.get("type") == "array":
            if not part.isdigit():
                return False
            schema = schema["items"]
        elif schema.get("type") == "object":
            props = schema.get("properties", {})
            if part not in props:
                return False
            schema = props[part]
        else:
            return False
    return "properties" not in schema and schema.get("type") != "array"


def apply_override(doc: Dict[str, Any], key: str, value) -> Dict[str, Any]:
    """Return a copy of ``doc`` with ``key`` (dotted path or alias) set to ``value``."""
    if not known_parameter(key):
        raise KeyError(key)
    doc = copy.deepcopy(doc)
    if key in ALIASES:
        container, attr = ALIASES[key]
        if container not in doc:
            if container == "reward_schedule":
                raise KeyError(f"{key} needs an explicit reward_schedule")
            doc[container] = to_dict(Scenario())[container]
        target = doc[container]
        for item in target if isinstance(target, list) else [target]:
            item[attr] = value
        return doc
    parts = key.split(".")
    node = doc
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            if part not in node:
                defaults = to_dict(Scenario())
                if part not in defaults:
                    raise KeyError(key)
                node[part] = defaults[part]
            node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return doc


def parse_overrides(items: Sequence[str]) -> List[Tuple[str, Any]]:
    out = []
    for item in items:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, _, text = item.partition("=")
        out.append((key.strip(), parse_value(text.strip())))
    return out


def load(path) -> Dict[str, Any]:
    """Read a scenario document; OSError propagates, bad JSON raises ScenarioFileError."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError("<root>", f"invalid JSON: {exc}") from exc
