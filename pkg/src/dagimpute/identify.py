"""Full-law identifiability decisions and decomposable-imputation orderings.

The full law of a missing-data DAG (no hidden variables) is identifiable
exactly when the graph is free of self-censoring edges and colluders, so the
decision procedure is a witness scan. Orderings that license decomposable
imputation are certified by a chain of d-separation checks and, when valid,
yield a chain factorization of the target law whose terms condition only on
observed-case rows.
"""

from __future__ import annotations

import itertools
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .mdgraph import MissingDataGraph, Role, d_separated

DEFAULT_WARN_VARS = 9
DEFAULT_MAX_VARS = 12
MAX_VARS_ENV = "DAGIMPUTE_MAX_ORDERING_VARS"


@dataclass(frozen=True)
class SelfCensoring:
    """A variable that is a parent of its own response indicator."""

    variable: str
    indicator: str

    def __str__(self) -> str:
        return f"self-censoring {self.variable} -> {self.indicator}"


@dataclass(frozen=True)
class Colluder:
    """A variable and its indicator sharing a child indicator."""

    variable: str
    indicator: str
    collider: str

    def __str__(self) -> str:
        return f"colluder {self.variable} -> {self.collider} <- {self.indicator}"


Witness = SelfCensoring | Colluder


@dataclass(frozen=True)
class FullLawDecision:
    identifiable: bool
    witnesses: tuple[Witness, ...]

    def __post_init__(self) -> None:
        if self.identifiable != (not self.witnesses):
            raise ValueError("identifiable must match the absence of witnesses")


def full_law_identifiable(g: MissingDataGraph) -> FullLawDecision:
    """Decide full-law identifiability by scanning for witnesses.

    A self-censoring edge X -> R_X or a colluder X -> R_W <- R_X makes the
    full law non-identifiable; with neither present it is identifiable.
    """
    witnesses: list[Witness] = []
    for var in g.partially_observed:
        ind = g.indicator_of(var)
        if var in g.parents(ind):
            witnesses.append(SelfCensoring(var, ind))
    for collider in g.response_indicators:
        parents = g.parents(collider)
        for var in g.partially_observed:
            if g.indicator_of(var) == collider:
                continue
            if var in parents and g.indicator_of(var) in parents:
                witnesses.append(Colluder(var, g.indicator_of(var), collider))
    witnesses.sort(key=lambda w: (w.__class__.__name__, str(w)))
    return FullLawDecision(identifiable=not witnesses, witnesses=tuple(witnesses))


@dataclass(frozen=True)
class IndependenceCheck:
    """One Theorem-style conditional independence requirement and its status."""

    left: tuple[str, ...]
    right: tuple[str, ...]
    given: tuple[str, ...]
    holds: bool

    def __str__(self) -> str:
        text = f"{', '.join(self.left)} _||_ {', '.join(self.right)}"
        if self.given:
            text += f" | {', '.join(self.given)}"
        return text


@dataclass(frozen=True)
class OrderingCertificate:
    """An ordering of the substantive variables plus its independence checks."""

    ordering: tuple[str, ...]
    checks: tuple[IndependenceCheck, ...]

    @property
    def valid(self) -> bool:
        return all(check.holds for check in self.checks)

    def failing(self) -> tuple[IndependenceCheck, ...]:
        return tuple(check for check in self.checks if not check.holds)


def _position_check(
    g: MissingDataGraph, ordering: Sequence[str], k: int
) -> IndependenceCheck | None:
    """The independence required at position k, or None when vacuous."""
    var = ordering[k]
    preceding = tuple(ordering[:k])
    indicators = []
    if g.role(var) is Role.PARTIAL:
        indicators.append(g.indicator_of(var))
    indicators.extend(
        g.indicator_of(u) for u in preceding if g.role(u) is Role.PARTIAL
    )
    if not indicators:
        return None
    holds = d_separated(g, {var}, set(indicators), set(preceding))
    return IndependenceCheck((var,), tuple(indicators), preceding, holds)


def verify_ordering(
    g: MissingDataGraph, ordering: Sequence[str]
) -> OrderingCertificate:
    """Check the chain conditions for ``ordering`` and record every check.

    Position k requires the k-th variable to be d-separated from its own
    indicator and the indicators of all earlier variables, given the earlier
    variables. Checks for fully observed variables drop the (nonexistent)
    own-indicator part; positions with no indicators to test are vacuous.
    """
    ordering = tuple(ordering)
    if sorted(ordering) != sorted(g.substantive):
        raise ValueError(
            "ordering must be a permutation of the substantive variables"
        )
    checks = []
    for k in range(len(ordering)):
        check = _position_check(g, ordering, k)
        if check is not None:
            checks.append(check)
    return OrderingCertificate(ordering, tuple(checks))


def _max_vars_cap(explicit: int | None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(MAX_VARS_ENV)
    return int(env) if env else DEFAULT_MAX_VARS


def find_decomposable_ordering(
    g: MissingDataGraph,
    *,
    warn_threshold: int = DEFAULT_WARN_VARS,
    max_vars: int | None = None,
    pruner: Callable[[tuple[str, ...], frozenset[str]], Iterable[str]] | None = None,
) -> OrderingCertificate | None:
    """Search for the lexicographically first valid ordering, or None.

    The search walks permutations in lexicographic order. Because the
    condition at position k depends only on the prefix, invalid prefixes are
    abandoned early; the result is identical to naive enumeration. ``pruner``
    may narrow the candidate extensions of a prefix (it must only ever drop
    candidates that cannot lead to a valid ordering).

    Raises ValueError when the number of substantive variables exceeds the
    hard cap (``max_vars``, default 12, overridable via the
    DAGIMPUTE_MAX_ORDERING_VARS environment variable).
    """
    variables = tuple(sorted(g.substantive))
    cap = _max_vars_cap(max_vars)
    if len(variables) > cap:
        raise ValueError(
            f"refusing to enumerate {len(variables)}! orderings "
            f"(cap {cap}); raise max_vars or set {MAX_VARS_ENV}"
        )
    if len(variables) > warn_threshold:
        warnings.warn(
            f"ordering search over {len(variables)} variables enumerates up to "
            f"{len(variables)}! permutations; this may be slow",
            stacklevel=2,
        )

    def extend(prefix: tuple[str, ...], remaining: frozenset[str]):
        if not remaining:
            return prefix
        candidates = sorted(remaining)
        if pruner is not None:
            allowed = set(pruner(prefix, remaining))
            candidates = [c for c in candidates if c in allowed]
        for candidate in candidates:
            trial = prefix + (candidate,)
            check = _position_check(g, trial, len(prefix))
            if check is not None and not check.holds:
                continue
            found = extend(trial, remaining - {candidate})
            if found is not None:
                return found
        return None

    ordering = extend((), frozenset(variables))
    if ordering is None:
        return None
    return verify_ordering(g, ordering)


@dataclass(frozen=True)
class FactorizationTerm:
    """One chain-factor p(target | conditioning, required indicators = 1)."""

    target: str
    conditioning: tuple[str, ...]
    required_indicators: frozenset[str]

    def __str__(self) -> str:
        given = list(self.conditioning)
        if self.required_indicators:
            given.append(" ".join(sorted(self.required_indicators)) + "=1")
        if given:
            return f"p({self.target} | {', '.join(given)})"
        return f"p({self.target})"


def target_law_factorization(
    g: MissingDataGraph,
    cert: OrderingCertificate,
    *,
    prune: bool = False,
) -> list[FactorizationTerm]:
    """Chain terms of the target law along a certified ordering.

    Term k is p(X_(k) | predecessors, indicators of the term's partially
    observed variables fixed to 1). With ``prune=True``, predecessors that
    are d-separated from the target (given the rest of the term's
    conditioning, with the required indicators held fixed) are dropped from
    the regressor set; the required-indicator set is left untouched so that
    the fitting rows are unchanged.
    """
    if not cert.valid:
        raise ValueError(
            "cannot factorize along an invalid ordering; failing checks: "
            + "; ".join(str(c) for c in cert.failing())
        )
    terms: list[FactorizationTerm] = []
    for k, target in enumerate(cert.ordering):
        conditioning = list(cert.ordering[:k])
        required = frozenset(
            g.indicator_of(u)
            for u in (target, *conditioning)
            if g.role(u) is Role.PARTIAL
        )
        if prune:
            for candidate in list(conditioning):
                rest = [u for u in conditioning if u != candidate]
                if d_separated(
                    g, {target}, {candidate}, set(rest) | set(required)
                ):
                    conditioning = rest
        terms.append(FactorizationTerm(target, tuple(conditioning), required))
    return terms
