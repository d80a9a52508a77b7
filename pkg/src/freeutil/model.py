"""Finite probabilistic vocabulary shared by every solver in the package.

Distributions, utility tables, staged decision problems, decision trees and
temperature parameters, plus the three elementary information measures
(entropy, KL divergence, expectation). Everything is immutable after
construction and every operation is a pure function, so all of it is safe to
call from concurrent code without coordination.

All information quantities are in nats (natural log); the CLI offers a
display-only bits conversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

# Normalization tolerance applied once at ingestion; after construction a
# distribution is treated as exact.
NORMALIZATION_TOL = 1e-9

# Two utilities within this of the maximum count as tied when a limit
# concentrates mass on the maximal set.
ARGMAX_TIE_TOL = 1e-12


class FreeUtilError(Exception):
    """Base class for every error raised by this package."""


class NegativeProbability(FreeUtilError):
    pass


class NotNormalized(FreeUtilError):
    pass


class DuplicateLabel(FreeUtilError):
    pass


class SupportMismatch(FreeUtilError):
    pass


class LabelMismatch(FreeUtilError):
    pass


class DomainError(FreeUtilError):
    pass


class EmptySupport(FreeUtilError):
    pass


class UnknownAction(FreeUtilError):
    pass


class UnsupportedRegime(FreeUtilError):
    pass


class CyclicTree(FreeUtilError):
    pass


class UnknownTemperatureTag(FreeUtilError):
    pass


class TooManyOutcomes(FreeUtilError):
    pass


class TooLarge(FreeUtilError):
    pass


class TooManyPaths(FreeUtilError):
    pass


def _check_distribution(outcomes: Sequence[str], probs: Sequence[float]) -> None:
    if len(outcomes) != len(probs):
        raise LabelMismatch(
            f"{len(outcomes)} labels but {len(probs)} probabilities"
        )
    if len(outcomes) == 0:
        raise EmptySupport("a distribution needs at least one outcome")
    if len(set(outcomes)) != len(outcomes):
        seen: set[str] = set()
        for label in outcomes:
            if label in seen:
                raise DuplicateLabel(f"duplicate outcome label {label!r}")
            seen.add(label)
    for label, p in zip(outcomes, probs):
        if not math.isfinite(p):
            raise DomainError(f"probability of {label!r} is not finite: {p!r}")
        if p < 0.0:
            raise NegativeProbability(f"probability of {label!r} is {p}")
    total = math.fsum(probs)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"probabilities sum to {total!r}, expected 1")


@dataclass(frozen=True)
class FiniteDistribution:
    """Normalized probability vector over an ordered list of opaque labels.

    Probabilities are validated (nonnegative, summing to 1 within 1e-9,
    unique labels) and renormalized exactly once here; afterwards they are
    treated as exact. Label order is the ingestion order and is the
    deterministic tie-break order everywhere downstream.
    """

    outcomes: tuple[str, ...]
    probs: tuple[float, ...]

    def __init__(self, outcomes: Sequence[str], probs: Sequence[float]):
        outcomes = tuple(outcomes)
        probs_list = [float(p) for p in probs]
        _check_distribution(outcomes, probs_list)
        total = math.fsum(probs_list)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", tuple(p / total for p in probs_list))

    @classmethod
    def uniform(cls, outcomes: Sequence[str]) -> "FiniteDistribution":
        n = len(outcomes)
        return cls(outcomes, [1.0 / n] * n)

    @classmethod
    def point_mass(cls, outcomes: Sequence[str], label: str) -> "FiniteDistribution":
        if label not in outcomes:
            raise LabelMismatch(f"label {label!r} not among outcomes")
        return cls(outcomes, [1.0 if o == label else 0.0 for o in outcomes])

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "FiniteDistribution":
        return cls(tuple(mapping.keys()), tuple(mapping.values()))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def prob(self, label: str) -> float:
        try:
            return self.probs[self.outcomes.index(label)]
        except ValueError:
            raise LabelMismatch(f"unknown outcome label {label!r}") from None

    def support(self) -> tuple[str, ...]:
        return tuple(o for o, p in zip(self.outcomes, self.probs) if p > 0.0)

    def as_mapping(self) -> dict[str, float]:
        return dict(zip(self.outcomes, self.probs))

    def __len__(self) -> int:
        return len(self.outcomes)


def validate(dist: FiniteDistribution) -> None:
    """Re-check the distribution invariants, raising the specific violation.

    Construction already enforces them; this re-checks an instance that may
    have been produced by deserialization or test plumbing.
    """
    _check_distribution(dist.outcomes, dist.probs)


@dataclass(frozen=True)
class UtilityTable:
    """Real-valued utility per outcome label, on an arbitrary scale.

    Only differences of utilities carry meaning for the solvers (adding a
    constant never changes a policy), so no normalization is applied. Values
    must be finite; label order follows ingestion order.
    """

    outcomes: tuple[str, ...]
    values: tuple[float, ...]

    def __init__(self, outcomes: Sequence[str], values: Sequence[float]):
        outcomes = tuple(outcomes)
        vals = tuple(float(v) for v in values)
        if len(outcomes) != len(vals):
            raise LabelMismatch(f"{len(outcomes)} labels but {len(vals)} values")
        if len(set(outcomes)) != len(outcomes):
            raise DuplicateLabel("duplicate outcome label in utility table")
        for label, v in zip(outcomes, vals):
            if not math.isfinite(v):
                raise DomainError(f"utility of {label!r} is not finite: {v!r}")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "UtilityTable":
        return cls(tuple(mapping.keys()), tuple(mapping.values()))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def value(self, label: str) -> float:
        try:
            return self.values[self.outcomes.index(label)]
        except ValueError:
            raise LabelMismatch(f"unknown outcome label {label!r}") from None

    def aligned_to(self, outcomes: Sequence[str]) -> np.ndarray:
        """Values reordered to the given label order; label sets must agree."""
        if tuple(outcomes) == self.outcomes:
            return self.array
        if set(outcomes) != set(self.outcomes):
            raise LabelMismatch(
                f"utility labels {sorted(self.outcomes)} do not match "
                f"{sorted(set(outcomes))}"
            )
        index = {o: i for i, o in enumerate(self.outcomes)}
        return np.asarray([self.values[index[o]] for o in outcomes], dtype=float)

    def shifted(self, constant: float) -> "UtilityTable":
        return UtilityTable(self.outcomes, [v + constant for v in self.values])

    def __len__(self) -> int:
        return len(self.outcomes)


def _aligned_pair(
    p: FiniteDistribution, other_outcomes: Sequence[str], other_values: Sequence[float]
) -> np.ndarray:
    if tuple(other_outcomes) == p.outcomes:
        return np.asarray(other_values, dtype=float)
    if set(other_outcomes) != set(p.outcomes):
        raise LabelMismatch(
            f"label sets differ: {sorted(set(p.outcomes))} vs {sorted(set(other_outcomes))}"
        )
    index = {o: i for i, o in enumerate(other_outcomes)}
    return np.asarray([other_values[index[o]] for o in p.outcomes], dtype=float)


def kl_divergence(p: FiniteDistribution, q: FiniteDistribution) -> float:
    """Relative entropy sum(p log p/q) in nats, with 0 log(0/q) = 0.

    q may put mass outside support(p), but q(x) = 0 with p(x) > 0 is a
    support violation.
    """
    q_probs = _aligned_pair(p, q.outcomes, q.probs)
    terms = []
    for label, pi, qi in zip(p.outcomes, p.probs, q_probs):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise SupportMismatch(
                f"p({label!r}) = {pi} > 0 but q({label!r}) = 0"
            )
        terms.append(pi * math.log(pi / qi))
    return max(math.fsum(terms), 0.0) if terms else 0.0


def entropy(p: FiniteDistribution) -> float:
    """Shannon entropy -sum(p log p) in nats, with 0 log 0 = 0."""
    total = math.fsum(-pi * math.log(pi) for pi in p.probs if pi > 0.0)
    return max(total, 0.0)


def expectation(p: FiniteDistribution, u: UtilityTable) -> float:
    """Expected utility sum(p * u) under matching labels."""
    vals = _aligned_pair(p, u.outcomes, u.values)
    return float(math.fsum(pi * vi for pi, vi in zip(p.probs, vals)))


_FINITE = "finite"
_ZERO = "zero"
_POS_INF = "pos_inf"
_NEG_INF = "neg_inf"

_LIMIT_SPELLINGS = {"inf": _POS_INF, "-inf": _NEG_INF, "zero": _ZERO}
_SPELL_BACK = {_POS_INF: "inf", _NEG_INF: "-inf", _ZERO: "zero"}


@dataclass(frozen=True)
class Temperature:
    """A finite real parameter or one of the declared limits (0, +inf, -inf).

    Limits are explicit symbolic cases, never large or small floats, so limit
    semantics carry no tolerance ambiguity. ``zero`` always denotes the
    one-sided limit approached from the parameter's valid side.
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in (_FINITE, _ZERO, _POS_INF, _NEG_INF):
            raise DomainError(f"unknown temperature kind {self.kind!r}")
        if self.kind == _FINITE and (
            not math.isfinite(self.value) or self.value == 0.0
        ):
            raise DomainError(
                f"finite temperature must be a nonzero finite real, got {self.value!r}"
            )

    @classmethod
    def finite(cls, value: float) -> "Temperature":
        return cls(_FINITE, float(value))

    @classmethod
    def zero(cls) -> "Temperature":
        return cls(_ZERO)

    @classmethod
    def pos_inf(cls) -> "Temperature":
        return cls(_POS_INF)

    @classmethod
    def neg_inf(cls) -> "Temperature":
        return cls(_NEG_INF)

    @classmethod
    def coerce(cls, value) -> "Temperature":
        """Canonicalize a float / str / Temperature.

        Float 0.0 becomes the zero limit and float infinities become the
        signed infinite limits, so callers can pass plain numbers.
        """
        if isinstance(value, Temperature):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        v = float(value)
        if v == 0.0:
            return cls.zero()
        if math.isinf(v):
            return cls.pos_inf() if v > 0 else cls.neg_inf()
        if math.isnan(v):
            raise DomainError("temperature cannot be NaN")
        return cls.finite(v)

    @classmethod
    def parse(cls, text: str) -> "Temperature":
        """Parse the file spelling: a number, or 'inf' / '-inf' / 'zero'."""
        token = text.strip()
        if token in _LIMIT_SPELLINGS:
            return cls(_LIMIT_SPELLINGS[token])
        try:
            v = float(token)
        except ValueError:
            raise DomainError(
                f"temperature must be a number or one of 'inf', '-inf', 'zero'; got {text!r}"
            ) from None
        if math.isinf(v) or math.isnan(v):
            raise DomainError(
                f"numeric temperature must be finite; spell limits as 'inf'/'-inf'/'zero', got {text!r}"
            )
        return cls.coerce(v)

    @property
    def is_finite(self) -> bool:
        return self.kind == _FINITE

    @property
    def is_zero(self) -> bool:
        return self.kind == _ZERO

    @property
    def is_pos_inf(self) -> bool:
        return self.kind == _POS_INF

    @property
    def is_neg_inf(self) -> bool:
        return self.kind == _NEG_INF

    @property
    def finite_value(self) -> float:
        if not self.is_finite:
            raise DomainError(f"temperature {self.spell()} is not finite")
        return self.value

    def reciprocal(self) -> "Temperature":
        """1/t with the limit pairing zero <-> +inf (valid-side limits)."""
        if self.is_finite:
            return Temperature.finite(1.0 / self.value)
        if self.is_zero:
            return Temperature.pos_inf()
        if self.is_pos_inf:
            return Temperature.zero()
        raise DomainError("reciprocal of the -inf limit is not defined")

    def spell(self) -> str:
        if self.is_finite:
            return format(self.value, ".12g")
        return _SPELL_BACK[self.kind]


@dataclass(frozen=True)
class TemperatureSpec:
    """Inverse-temperature pair (lam, mu) governing a staged problem.

    ``lam`` controls the chooser's own stage and must be a positive finite
    real or the +inf limit; the zero limit is representable (files may spell
    it) but every solver rejects it as an unsupported regime. ``mu`` controls
    the environment stage; any sign is meaningful there, negative values
    model an adversarial environment, so all four cases (finite nonzero,
    zero, +inf, -inf) are accepted.
    """

    lam: Temperature
    mu: Temperature

    def __init__(self, lam, mu):
        lam = Temperature.coerce(lam)
        mu = Temperature.coerce(mu)
        if lam.is_neg_inf:
            raise DomainError("lambda cannot be the -inf limit")
        if lam.is_finite and lam.value < 0:
            raise DomainError(f"finite lambda must be positive, got {lam.value}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class ControlProblem:
    """Single-stage control instance: a default policy plus gain utilities."""

    prior: FiniteDistribution
    utility: UtilityTable

    def __post_init__(self):
        if self.utility.outcomes != self.prior.outcomes:
            # Permutations are resolved at ingestion, not here.
            if set(self.utility.outcomes) != set(self.prior.outcomes):
                raise LabelMismatch("utility labels do not match prior labels")
            raise LabelMismatch("utility label order must match prior label order")

    @property
    def outcomes(self) -> tuple[str, ...]:
        return self.prior.outcomes


@dataclass(frozen=True)
class TwoStageProblem:
    """An action stage followed by an outcome stage.

    The system emits an action with default probability prior_action, then
    sees an outcome drawn from the per-action channel row. Utilities attach
    to the action itself and to each (action, outcome) pair.
    """

    actions: tuple[str, ...]
    outcomes: tuple[str, ...]
    prior_action: FiniteDistribution
    channel: dict[str, FiniteDistribution]
    action_utility: UtilityTable
    outcome_utility: dict[str, UtilityTable]

    def __init__(
        self,
        actions: Sequence[str],
        outcomes: Sequence[str],
        prior_action: FiniteDistribution,
        channel: Mapping[str, FiniteDistribution],
        action_utility: UtilityTable,
        outcome_utility: Mapping[str, UtilityTable],
    ):
        actions = tuple(actions)
        outcomes = tuple(outcomes)
        if prior_action.outcomes != actions:
            raise LabelMismatch("prior_action labels must equal the action list")
        if action_utility.outcomes != actions:
            raise LabelMismatch("action_utility labels must equal the action list")
        channel = dict(channel)
        outcome_utility = dict(outcome_utility)
        if set(channel) != set(actions):
            raise LabelMismatch("channel must have exactly one row per action")
        if set(outcome_utility) != set(actions):
            raise LabelMismatch("outcome_utility must have exactly one row per action")
        for a in actions:
            if channel[a].outcomes != outcomes:
                raise LabelMismatch(f"channel row for {a!r} must cover the outcome list")
            if outcome_utility[a].outcomes != outcomes:
                raise LabelMismatch(
                    f"outcome_utility row for {a!r} must cover the outcome list"
                )
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "prior_action", prior_action)
        object.__setattr__(self, "channel", channel)
        object.__setattr__(self, "action_utility", action_utility)
        object.__setattr__(self, "outcome_utility", outcome_utility)

    def channel_row(self, action: str) -> FiniteDistribution:
        try:
            return self.channel[action]
        except KeyError:
            raise UnknownAction(f"unknown action {action!r}") from None

    def outcome_utility_row(self, action: str) -> UtilityTable:
        try:
            return self.outcome_utility[action]
        except KeyError:
            raise UnknownAction(f"unknown action {action!r}") from None


# Temperature tags a tree node may carry: which TemperatureSpec entry governs
# the node's backup.
LAMBDA_TAG = "lambda"
MU_TAG = "mu"
_VALID_TAGS = (LAMBDA_TAG, MU_TAG)


@dataclass(frozen=True)
class TreeNode:
    """One node of a decision tree.

    Internal nodes carry a distribution over their children (the default
    transition probabilities), a per-child utility gain for traversing each
    edge, and a temperature tag naming which TemperatureSpec entry governs
    the node. Leaves carry nothing.
    """

    name: str
    children: tuple["TreeNode", ...] = ()
    child_prior: FiniteDistribution | None = None
    child_utility: UtilityTable | None = None
    temperature_tag: str = LAMBDA_TAG

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class DecisionTree:
    """Finite rooted tree alternating chooser-tagged stages.

    Each internal node's child priors form a FiniteDistribution over the
    child names and each edge carries a utility gain. Node paths (root name,
    then child names joined by '/') identify nodes in results.
    """

    root: TreeNode

    def __post_init__(self):
        seen: set[int] = set()

        def walk(node: TreeNode) -> None:
            if id(node) in seen:
                raise CyclicTree(
                    f"node {node.name!r} is reachable twice; the structure is not a tree"
                )
            seen.add(id(node))
            if node.is_leaf:
                if node.child_prior is not None or node.child_utility is not None:
                    raise LabelMismatch(
                        f"leaf {node.name!r} must not carry child priors or utilities"
                    )
                return
            if node.temperature_tag not in _VALID_TAGS:
                raise UnknownTemperatureTag(
                    f"node {node.name!r} has temperature tag {node.temperature_tag!r}; "
                    f"expected one of {_VALID_TAGS}"
                )
            names = tuple(c.name for c in node.children)
            if node.child_prior is None or node.child_prior.outcomes != names:
                raise LabelMismatch(
                    f"child priors of {node.name!r} must cover the child names {names}"
                )
            if node.child_utility is None or node.child_utility.outcomes != names:
                raise LabelMismatch(
                    f"child utilities of {node.name!r} must cover the child names {names}"
                )
            for c in node.children:
                walk(c)

        walk(self.root)

    def iter_nodes(self) -> Iterable[tuple[str, TreeNode]]:
        """Yield (path, node) depth-first in child order; path starts at the root name."""

        def walk(node: TreeNode, path: str):
            yield path, node
            for c in node.children:
                yield from walk(c, f"{path}/{c.name}")

        yield from walk(self.root, self.root.name)

    def n_leaves(self) -> int:
        return sum(1 for _, node in self.iter_nodes() if node.is_leaf)
