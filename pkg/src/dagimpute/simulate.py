"""Data generation: linear-Gaussian structural models, logistic response
mechanisms, and the proxy mask that turns complete data into an observed
dataset with NA cells.

The four built-in examples (two-variable chains and a four-variable chain
with a colluder) are shipped as fixture files and wired up by
:func:`builtin_example`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

import numpy as np
import pandas as pd
import yaml
from scipy.special import expit

from ._seeds import as_generator, spawn
from .mdgraph import MissingDataGraph, Role, parse_graph, topological_order
from .stats import StatisticId, default_statistics


@dataclass(frozen=True)
class LinearEquation:
    """Structural equation: intercept + sum(coeff * parent) + N(0, sd^2)."""

    intercept: float = 0.0
    coeffs: tuple[tuple[str, float], ...] = ()
    sd: float = 1.0

    def __post_init__(self) -> None:
        if not self.sd > 0:
            raise ValueError("error sd must be strictly positive")

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "LinearEquation":
        coeffs = tuple(sorted((mapping.get("coeffs") or {}).items()))
        return cls(
            intercept=float(mapping.get("intercept", 0.0)),
            coeffs=coeffs,
            sd=float(mapping.get("sd", 1.0)),
        )


@dataclass(frozen=True)
class SemSpec:
    """One linear-Gaussian equation per substantive variable."""

    equations: tuple[tuple[str, LinearEquation], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "SemSpec":
        return cls(
            tuple((v, LinearEquation.from_mapping(eq)) for v, eq in mapping.items())
        )

    def equation(self, variable: str) -> LinearEquation:
        for name, eq in self.equations:
            if name == variable:
                return eq
        raise ValueError(f"no structural equation for {variable!r}")

    def validate_against(self, g: MissingDataGraph) -> None:
        declared = {name for name, _ in self.equations}
        substantive = set(g.substantive)
        if declared != substantive:
            raise ValueError(
                f"structural equations cover {sorted(declared)} but the graph "
                f"has substantive variables {sorted(substantive)}"
            )
        for name, eq in self.equations:
            parents = {p for p in g.parents(name) if g.role(p) is not Role.RESPONSE}
            extra = {p for p, _ in eq.coeffs} - parents
            if extra:
                raise ValueError(
                    f"equation for {name!r} references non-parents {sorted(extra)}"
                )


@dataclass(frozen=True)
class ConstantProb:
    """Indicator drawn Bernoulli(p) independently of everything."""

    p: float

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise ValueError("constant response probability must be in (0, 1)")


@dataclass(frozen=True)
class LogisticTerm:
    """One product term of a logistic linear predictor: coeff * prod(factors).

    An empty factor list is an intercept; indicator factors give affine
    transforms such as (2 R_X - 1) when paired with an intercept term.
    """

    coeff: float
    factors: tuple[str, ...] = ()


@dataclass(frozen=True)
class LogisticModel:
    """Indicator drawn Bernoulli(sigmoid(sum of terms))."""

    terms: tuple[LogisticTerm, ...]


@dataclass(frozen=True)
class ResponseSpec:
    """A response model per indicator node, keyed by indicator name."""

    models: tuple[tuple[str, ConstantProb | LogisticModel], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "ResponseSpec":
        models = []
        for name, spec in mapping.items():
            if "constant" in spec:
                models.append((name, ConstantProb(float(spec["constant"]))))
            elif "logistic" in spec:
                terms = tuple(
                    LogisticTerm(float(t["coeff"]), tuple(t.get("factors") or ()))
                    for t in spec["logistic"]
                )
                models.append((name, LogisticModel(terms)))
            else:
                raise ValueError(
                    f"response model for {name!r} needs 'constant' or 'logistic'"
                )
        return cls(tuple(models))

    def model(self, indicator: str) -> ConstantProb | LogisticModel:
        for name, model in self.models:
            if name == indicator:
                return model
        raise ValueError(f"no response model for {indicator!r}")

    def validate_against(self, g: MissingDataGraph) -> None:
        declared = {name for name, _ in self.models}
        indicators = set(g.response_indicators)
        if declared != indicators:
            raise ValueError(
                f"response models cover {sorted(declared)} but the graph has "
                f"indicators {sorted(indicators)}"
            )
        for name, model in self.models:
            if isinstance(model, LogisticModel):
                parents = g.parents(name)
                used = {f for term in model.terms for f in term.factors}
                extra = used - parents
                if extra:
                    raise ValueError(
                        f"response model for {name!r} references non-parents "
                        f"{sorted(extra)}"
                    )


@dataclass(frozen=True)
class Dataset:
    """Observed data: proxy columns (NaN marks missing) plus 0/1 indicators.

    ``proxies`` is keyed by variable, ``indicators`` by partially observed
    variable; ``indicator_names`` maps each partially observed variable to
    its indicator's node/column name. True values never live here — they stay
    in the simulation provenance.
    """

    proxies: dict[str, np.ndarray]
    indicators: dict[str, np.ndarray]
    indicator_names: dict[str, str]
    seed: int | None = None
    spec_hash: str | None = None

    def __post_init__(self) -> None:
        lengths = {len(col) for col in self.proxies.values()}
        lengths |= {len(col) for col in self.indicators.values()}
        if len(lengths) > 1:
            raise ValueError("columns have unequal lengths")
        for arr in (*self.proxies.values(), *self.indicators.values()):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return len(next(iter(self.proxies.values()))) if self.proxies else 0

    @property
    def variables(self) -> list[str]:
        return list(self.proxies)

    def column(self, name: str) -> np.ndarray:
        """Look up a proxy by variable name or an indicator by its node name."""
        if name in self.proxies:
            return self.proxies[name]
        for var, ind_name in self.indicator_names.items():
            if ind_name == name:
                return self.indicators[var]
        raise KeyError(f"no column {name!r}")

    def missing_mask(self, variable: str) -> np.ndarray:
        return np.isnan(self.proxies[variable])

    def to_frame(self) -> pd.DataFrame:
        """Interleaved proxy/indicator frame using the on-disk column names."""
        data: dict[str, np.ndarray] = {}
        for var in self.proxies:
            if var in self.indicators:
                data[f"{var}_star"] = self.proxies[var]
                data[self.indicator_names[var]] = self.indicators[var]
            else:
                data[var] = self.proxies[var]
        return pd.DataFrame(data)


def simulate_complete(
    sem: SemSpec, g: MissingDataGraph, n: int, seed
) -> dict[str, np.ndarray]:
    """Draw ``n`` rows of complete data, ancestors before descendants."""
    if n < 1:
        raise ValueError("n must be at least 1")
    sem.validate_against(g)
    rng = as_generator(seed)
    order = [v for v in topological_order(g) if g.role(v) is not Role.RESPONSE]
    values: dict[str, np.ndarray] = {}
    for var in order:
        eq = sem.equation(var)
        col = np.full(n, eq.intercept, dtype=float)
        for parent, coeff in eq.coeffs:
            col += coeff * values[parent]
        col += rng.normal(0.0, eq.sd, n)
        values[var] = col
    return values


def simulate_responses(
    resp: ResponseSpec,
    g: MissingDataGraph,
    values: Mapping[str, np.ndarray],
    seed,
) -> dict[str, np.ndarray]:
    """Draw the response indicators, in topological order over the R-nodes."""
    resp.validate_against(g)
    rng = as_generator(seed)
    n = len(next(iter(values.values())))
    indicators: dict[str, np.ndarray] = {}
    for name in (r for r in topological_order(g) if g.role(r) is Role.RESPONSE):
        model = resp.model(name)
        if isinstance(model, ConstantProb):
            prob = np.full(n, model.p)
        else:
            predictor = np.zeros(n)
            for term in model.terms:
                product = np.full(n, term.coeff)
                for factor in term.factors:
                    if factor in values:
                        product = product * values[factor]
                    elif factor in indicators:
                        product = product * indicators[factor]
                    else:
                        raise ValueError(
                            f"term for {name!r} references {factor!r}, which is "
                            "not yet generated"
                        )
                predictor += product
            prob = expit(predictor)
        indicators[name] = (rng.random(n) < prob).astype(np.int8)
    return indicators


def apply_mask(
    values: Mapping[str, np.ndarray],
    indicators: Mapping[str, np.ndarray],
    g: MissingDataGraph,
    *,
    seed: int | None = None,
    spec_hash: str | None = None,
) -> Dataset:
    """Build the observed dataset: proxy = value if indicator else NaN."""
    n = {len(col) for col in values.values()}
    n |= {len(col) for col in indicators.values()}
    if len(n) != 1:
        raise ValueError("value and indicator columns must share one length")
    proxies: dict[str, np.ndarray] = {}
    ind_cols: dict[str, np.ndarray] = {}
    ind_names: dict[str, str] = {}
    order = [v for v in topological_order(g) if g.role(v) is not Role.RESPONSE]
    for var in order:
        col = np.asarray(values[var], dtype=float)
        if g.role(var) is Role.PARTIAL:
            name = g.indicator_of(var)
            ind = np.asarray(indicators[name], dtype=np.int8)
            proxies[var] = np.where(ind == 1, col, np.nan)
            ind_cols[var] = ind.copy()
            ind_names[var] = name
        else:
            proxies[var] = col.copy()
    return Dataset(proxies, ind_cols, ind_names, seed=seed, spec_hash=spec_hash)


def implied_moments(
    sem: SemSpec, g: MissingDataGraph
) -> tuple[dict[str, float], dict[tuple[str, str], float]]:
    """Exact means and covariances implied by a linear-Gaussian model."""
    order = [v for v in topological_order(g) if g.role(v) is not Role.RESPONSE]
    means: dict[str, float] = {}
    cov: dict[tuple[str, str], float] = {}
    for var in order:
        eq = sem.equation(var)
        means[var] = eq.intercept + sum(c * means[p] for p, c in eq.coeffs)
        for other in order:
            if other == var:
                break
            cov_vo = sum(c * cov[tuple(sorted((p, other)))] for p, c in eq.coeffs)
            cov[tuple(sorted((var, other)))] = cov_vo
        var_v = eq.sd**2
        for p, cp in eq.coeffs:
            for q, cq in eq.coeffs:
                var_v += cp * cq * cov[tuple(sorted((p, q)))]
        cov[(var, var)] = var_v
    return means, cov


def truth_statistics(sem: SemSpec, g: MissingDataGraph) -> dict[StatisticId, float]:
    """Analytic values of the default statistic set for a structural model."""
    means, cov = implied_moments(sem, g)
    truth: dict[StatisticId, float] = {}
    for stat in default_statistics(g.substantive):
        if stat.kind == "mean":
            truth[stat] = means[stat.variables[0]]
        elif stat.kind == "sd":
            v = stat.variables[0]
            truth[stat] = float(np.sqrt(cov[(v, v)]))
        else:
            a, b = stat.variables
            truth[stat] = float(
                cov[tuple(sorted((a, b)))] / np.sqrt(cov[(a, a)] * cov[(b, b)])
            )
    return truth


# -- preset examples ----------------------------------------------------------


@dataclass(frozen=True)
class ExampleSpec:
    """A fully wired preset: graph + structural model + response models."""

    name: str
    graph: MissingDataGraph
    sem: SemSpec
    responses: ResponseSpec

    @property
    def spec_hash(self) -> str:
        return spec_fingerprint(self.graph, self.sem, self.responses)


def spec_fingerprint(
    g: MissingDataGraph, sem: SemSpec, resp: ResponseSpec
) -> str:
    """Stable hash of a simulation specification, for provenance metadata."""
    desc = {
        "nodes": sorted(
            (n, g.role(n).value, g.owner_of(n) if g.role(n) is Role.RESPONSE else "")
            for n in g.nodes
        ),
        "edges": sorted(g.edges),
        "sem": [
            (v, eq.intercept, list(eq.coeffs), eq.sd) for v, eq in sem.equations
        ],
        "responses": [
            (name, model.p)
            if isinstance(model, ConstantProb)
            else (name, [(t.coeff, list(t.factors)) for t in model.terms])
            for name, model in resp.models
        ],
    }
    blob = json.dumps(desc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _fixture_text(filename: str) -> str:
    return (resources.files("dagimpute") / "fixtures" / filename).read_text()


def load_example_spec(example_id: int) -> ExampleSpec:
    """Load one of the built-in presets (1-4) from its fixture files."""
    if example_id not in (1, 2, 3, 4):
        raise ValueError(f"unknown example id {example_id!r}; known: 1, 2, 3, 4")
    doc = yaml.safe_load(_fixture_text(f"example{example_id}.yaml"))
    graph = parse_graph(_fixture_text(doc["graph"]))
    sem = SemSpec.from_mapping(doc["sem"])
    resp = ResponseSpec.from_mapping(doc["responses"])
    sem.validate_against(graph)
    resp.validate_against(graph)
    return ExampleSpec(f"example{example_id}", graph, sem, resp)


def simulate_dataset(
    spec: ExampleSpec, n: int, seed: int
) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Simulate a preset; returns the masked dataset and the true columns."""
    value_rng, response_rng = spawn(seed, 2)
    values = simulate_complete(spec.sem, spec.graph, n, value_rng)
    indicators = simulate_responses(spec.responses, spec.graph, values, response_rng)
    dataset = apply_mask(
        values, indicators, spec.graph, seed=seed, spec_hash=spec.spec_hash
    )
    return dataset, values


def builtin_example(
    example_id: int, n: int, seed: int
) -> tuple[MissingDataGraph, Dataset, dict[StatisticId, float]]:
    """Graph, simulated dataset, and analytic truth for a built-in example."""
    spec = load_example_spec(example_id)
    dataset, _ = simulate_dataset(spec, n, seed)
    return spec.graph, dataset, truth_statistics(spec.sem, spec.graph)


# -- file formats ---------------------------------------------------------------


def write_dataset_csv(dataset: Dataset, path) -> None:
    dataset.to_frame().to_csv(path, index=False, na_rep="")


def read_dataset_csv(path, g: MissingDataGraph) -> Dataset:
    """Read an observed-data CSV back into a Dataset, enforcing the mask rule."""
    frame = pd.read_csv(path)
    proxies: dict[str, np.ndarray] = {}
    ind_cols: dict[str, np.ndarray] = {}
    ind_names: dict[str, str] = {}
    for var in (v for v in topological_order(g) if g.role(v) is not Role.RESPONSE):
        if g.role(var) is Role.PARTIAL:
            proxy_col, ind_name = f"{var}_star", g.indicator_of(var)
            for col in (proxy_col, ind_name):
                if col not in frame.columns:
                    raise ValueError(f"CSV is missing column {col!r}")
            proxy = frame[proxy_col].to_numpy(dtype=float)
            ind_raw = frame[ind_name].to_numpy()
            if not np.isin(ind_raw, (0, 1)).all():
                raise ValueError(f"indicator column {ind_name!r} must be 0/1")
            ind = ind_raw.astype(np.int8)
            if ((ind == 0) != np.isnan(proxy)).any():
                raise ValueError(
                    f"column {proxy_col!r} must be NA exactly where "
                    f"{ind_name!r} is 0"
                )
            proxies[var] = proxy
            ind_cols[var] = ind
            ind_names[var] = ind_name
        else:
            if var not in frame.columns:
                raise ValueError(f"CSV is missing column {var!r}")
            col = frame[var].to_numpy(dtype=float)
            if np.isnan(col).any():
                raise ValueError(f"fully observed column {var!r} contains NA")
            proxies[var] = col
    return Dataset(proxies, ind_cols, ind_names)


def write_truth_csv(values: Mapping[str, np.ndarray], path) -> None:
    pd.DataFrame(dict(values)).to_csv(path, index=False)
