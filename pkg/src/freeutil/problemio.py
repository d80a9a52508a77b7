"""Problem-file loading and serialization.

Files are JSON with a fixed schema: a version tag, a kind discriminator
("control", "two_stage", "tree"), the kind's payload, and an optional
temperatures block. Parsing is strict — unknown fields anywhere are
rejected, numbers must be numbers (booleans are not), and every structural
invariant is enforced at load time so downstream code never sees a
half-valid problem. Temperature limits are spelled as the strings "inf",
"-inf", and "zero" rather than non-portable float infinities.

dump() writes the canonical form (normalized probabilities, full-precision
floats), so load → dump → load is an identity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .model import (
    ControlProblem,
    DecisionTree,
    DomainError,
    FiniteDistribution,
    Temperature,
    TreeNode,
    TwoStageProblem,
    UtilityTable,
)

SCHEMA_VERSION = "1"

KINDS = ("control", "two_stage", "tree")


@dataclass(frozen=True)
class ProblemFile:
    """A parsed problem file: the problem plus any temperatures it declares.

    Control problems may carry alpha; two-stage and tree problems may carry
    lam and mu. Absent temperatures are None and fall back to CLI flags or
    defaults.
    """

    schema_version: str
    kind: str
    problem: ControlProblem | TwoStageProblem | DecisionTree
    alpha: Temperature | None = None
    lam: Temperature | None = None
    mu: Temperature | None = None


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise DomainError(f"{where} must be an object, got {type(obj).__name__}")
    for k in obj:
        if k not in allowed:
            raise DomainError(f"unknown field {k!r} in {where}")
    for k in required:
        if k not in obj:
            raise DomainError(f"missing field {k!r} in {where}")


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{where} must be a number, got {value!r}")
    return float(value)


def _as_number_list(value, where: str) -> list[float]:
    if not isinstance(value, list):
        raise DomainError(f"{where} must be an array of numbers")
    return [_as_number(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _as_label_list(value, where: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DomainError(f"{where} must be an array of strings")
    return list(value)


def _as_temperature(value, where: str) -> Temperature:
    if isinstance(value, str):
        return Temperature.parse(value)
    return Temperature.coerce(_as_number(value, where))


def _parse_control(payload: dict) -> ControlProblem:
    _require_keys(
        payload,
        {"outcomes", "prior", "utility"},
        {"outcomes", "prior", "utility"},
        "control payload",
    )
    outcomes = _as_label_list(payload["outcomes"], "outcomes")
    prior = FiniteDistribution(outcomes, _as_number_list(payload["prior"], "prior"))
    utility = UtilityTable(outcomes, _as_number_list(payload["utility"], "utility"))
    return ControlProblem(prior, utility)


def _parse_two_stage(payload: dict) -> TwoStageProblem:
    keys = {
        "actions",
        "outcomes",
        "prior_action",
        "channel",
        "action_utility",
        "outcome_utility",
    }
    _require_keys(payload, keys, keys, "two_stage payload")
    actions = _as_label_list(payload["actions"], "actions")
    outcomes = _as_label_list(payload["outcomes"], "outcomes")
    prior = FiniteDistribution(
        actions, _as_number_list(payload["prior_action"], "prior_action")
    )
    if not isinstance(payload["channel"], dict):
        raise DomainError("channel must be an object keyed by action")
    if not isinstance(payload["outcome_utility"], dict):
        raise DomainError("outcome_utility must be an object keyed by action")
    channel = {
        a: FiniteDistribution(outcomes, _as_number_list(row, f"channel[{a!r}]"))
        for a, row in payload["channel"].items()
    }
    action_utility = UtilityTable(
        actions, _as_number_list(payload["action_utility"], "action_utility")
    )
    outcome_utility = {
        a: UtilityTable(outcomes, _as_number_list(row, f"outcome_utility[{a!r}]"))
        for a, row in payload["outcome_utility"].items()
    }
    return TwoStageProblem(
        actions, outcomes, prior, channel, action_utility, outcome_utility
    )


def _parse_node(obj: dict, where: str) -> TreeNode:
    _require_keys(obj, {"name", "temperature_tag", "children"}, {"name"}, where)
    name = obj["name"]
    if not isinstance(name, str):
        raise DomainError(f"node name in {where} must be a string")
    tag = obj.get("temperature_tag", "lambda")
    if "children" not in obj:
        return TreeNode(name=name)
    children_spec = obj["children"]
    if not isinstance(children_spec, list) or not children_spec:
        raise DomainError(f"children of {where} must be a nonempty array")
    children = []
    priors = []
    utilities = []
    for i, entry in enumerate(children_spec):
        child_where = f"{where}/children[{i}]"
        _require_keys(
            entry, {"prior", "utility", "node"}, {"prior", "utility", "node"}, child_where
        )
        priors.append(_as_number(entry["prior"], f"{child_where}.prior"))
        utilities.append(_as_number(entry["utility"], f"{child_where}.utility"))
        children.append(_parse_node(entry["node"], f"{child_where}.node"))
    names = [c.name for c in children]
    return TreeNode(
        name=name,
        children=tuple(children),
        child_prior=FiniteDistribution(names, priors),
        child_utility=UtilityTable(names, utilities),
        temperature_tag=tag,
    )


def loads(text: str) -> ProblemFile:
    """Parse a problem document from its JSON text, rejecting anything the
    schema does not name."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise DomainError(f"not valid JSON: {e}") from None
    _require_keys(
        raw,
        {"schema_version", "kind", "payload", "temperatures"},
        {"schema_version", "kind", "payload"},
        "problem file",
    )
    if raw["schema_version"] != SCHEMA_VERSION:
        raise DomainError(
            f"unsupported schema_version {raw['schema_version']!r}; expected {SCHEMA_VERSION!r}"
        )
    kind = raw["kind"]
    if kind not in KINDS:
        raise DomainError(f"unknown kind {kind!r}; expected one of {KINDS}")

    if kind == "control":
        problem = _parse_control(raw["payload"])
    elif kind == "two_stage":
        problem = _parse_two_stage(raw["payload"])
    else:
        problem = DecisionTree(_parse_node(raw["payload"], "tree payload"))

    alpha = lam = mu = None
    if "temperatures" in raw:
        temps = raw["temperatures"]
        if kind == "control":
            _require_keys(temps, {"alpha"}, set(), "temperatures")
            if "alpha" in temps:
                alpha = _as_temperature(temps["alpha"], "alpha")
        else:
            _require_keys(temps, {"lambda", "mu"}, set(), "temperatures")
            if "lambda" in temps:
                lam = _as_temperature(temps["lambda"], "lambda")
            if "mu" in temps:
                mu = _as_temperature(temps["mu"], "mu")
    return ProblemFile(SCHEMA_VERSION, kind, problem, alpha=alpha, lam=lam, mu=mu)


def load(path: str) -> ProblemFile:
    """Read and parse a problem file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def _temp_to_json(t: Temperature):
    return t.value if t.is_finite else t.spell()


def _node_to_json(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"name": node.name}
    return {
        "name": node.name,
        "temperature_tag": node.temperature_tag,
        "children": [
            {
                "prior": p,
                "utility": u,
                "node": _node_to_json(child),
            }
            for child, p, u in zip(
                node.children, node.child_prior.probs, node.child_utility.values
            )
        ],
    }


def dumps(pf: ProblemFile) -> str:
    """Serialize to canonical JSON text: normalized probabilities,
    full-precision floats, limits as their string spellings."""
    if pf.kind == "control":
        problem = pf.problem
        payload = {
            "outcomes": list(problem.outcomes),
            "prior": list(problem.prior.probs),
            "utility": list(problem.utility.values),
        }
    elif pf.kind == "two_stage":
        problem = pf.problem
        payload = {
            "actions": list(problem.actions),
            "outcomes": list(problem.outcomes),
            "prior_action": list(problem.prior_action.probs),
            "channel": {a: list(problem.channel[a].probs) for a in problem.actions},
            "action_utility": list(problem.action_utility.values),
            "outcome_utility": {
                a: list(problem.outcome_utility[a].values) for a in problem.actions
            },
        }
    else:
        payload = _node_to_json(pf.problem.root)

    doc = {"schema_version": pf.schema_version, "kind": pf.kind, "payload": payload}
    temps = {}
    if pf.alpha is not None:
        temps["alpha"] = _temp_to_json(pf.alpha)
    if pf.lam is not None:
        temps["lambda"] = _temp_to_json(pf.lam)
    if pf.mu is not None:
        temps["mu"] = _temp_to_json(pf.mu)
    if temps:
        doc["temperatures"] = temps
    return json.dumps(doc, indent=2) + "\n"


def dump(pf: ProblemFile, path: str) -> None:
    """Write the canonical serialization to disk."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(pf))
