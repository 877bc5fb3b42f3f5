"""Summary statistics, pooling across imputations, and bias tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

_KINDS = ("mean", "sd", "corr")


@dataclass(frozen=True)
class StatisticId:
    kind: str
    variables: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        expected = 2 if self.kind == "corr" else 1
        if len(self.variables) != expected:
            raise ValueError(f"{self.kind} takes exactly {expected} variable(s)")
        if self.kind == "corr" and self.variables[0] == self.variables[1]:
            raise ValueError("correlation requires two distinct variables")

    @classmethod
    def mean(cls, variable: str) -> "StatisticId":
        return cls("mean", (variable,))

    @classmethod
    def sd(cls, variable: str) -> "StatisticId":
        return cls("sd", (variable,))

    @classmethod
    def corr(cls, a: str, b: str) -> "StatisticId":
        return cls("corr", (a, b))

    def __str__(self) -> str:
        if self.kind == "mean":
            return f"E({self.variables[0]})"
        if self.kind == "sd":
            return f"sd({self.variables[0]})"
        return f"Cor({self.variables[0]},{self.variables[1]})"


def default_statistics(variables: Sequence[str]) -> list[StatisticId]:
    """Means, sds, then pairwise correlations, in the given variable order."""
    stats = [StatisticId.mean(v) for v in variables]
    stats += [StatisticId.sd(v) for v in variables]
    stats += [
        StatisticId.corr(variables[i], variables[j])
        for i in range(len(variables))
        for j in range(i + 1, len(variables))
    ]
    return stats


def summarize(
    columns: Mapping[str, np.ndarray], stats: Iterable[StatisticId]
) -> dict[StatisticId, float]:
    """Evaluate statistics on complete columns (sd uses divisor n-1)."""
    out: dict[StatisticId, float] = {}
    for stat in stats:
        cols = []
        for var in stat.variables:
            if var not in columns:
                raise ValueError(f"no column {var!r}")
            col = np.asarray(columns[var], dtype=float)
            if np.isnan(col).any():
                raise ValueError(f"column {var!r} contains NA")
            cols.append(col)
        if stat.kind == "mean":
            out[stat] = float(np.mean(cols[0]))
        elif stat.kind == "sd":
            if len(cols[0]) < 2:
                raise ValueError("sd needs at least two rows")
            out[stat] = float(np.std(cols[0], ddof=1))
        else:
            if len(cols[0]) < 2:
                raise ValueError("correlation needs at least two rows")
            out[stat] = float(np.corrcoef(cols[0], cols[1])[0, 1])
    return out


def pool(
    estimates: Sequence[Mapping[StatisticId, float]]
) -> dict[StatisticId, float]:
    """Average point estimates across completed datasets."""
    if not estimates:
        raise ValueError("nothing to pool")
    keys = list(estimates[0])
    for est in estimates[1:]:
        if list(est) != keys:
            raise ValueError("estimates cover different statistic sets")
    return {k: float(np.mean([est[k] for est in estimates])) for k in keys}


@dataclass
class EstimateTable:
    """Statistic-by-method grid of estimates with biases against truth."""

    statistics: list[StatisticId]
    methods: list[str]
    truth: dict[StatisticId, float]
    estimates: dict[str, dict[StatisticId, float]]

    def bias(self, method: str, stat: StatisticId) -> float:
        return self.estimates[method][stat] - self.truth[stat]

    def to_csv_text(self) -> str:
        header = ["statistic", "truth"]
        for method in self.methods:
            header += [f"{method}_estimate", f"{method}_bias"]
        lines = [",".join(header)]
        for stat in self.statistics:
            row = [str(stat), repr(self.truth[stat])]
            for method in self.methods:
                row += [
                    repr(self.estimates[method][stat]),
                    repr(self.bias(method, stat)),
                ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_markdown_text(self) -> str:
        header = ["Statistic", "Truth"] + self.methods
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ]
        for stat in self.statistics:
            cells = [str(stat), f"{self.truth[stat]:.2f}"]
            cells += [f"{self.bias(m, stat):.2f}" for m in self.methods]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def bias_table(
    truth: Mapping[StatisticId, float],
    estimates: Mapping[str, Mapping[StatisticId, float]],
    methods: Sequence[str] | None = None,
) -> EstimateTable:
    """Assemble the bias table; every method must cover every statistic."""
    statistics = list(truth)
    methods = list(methods) if methods is not None else list(estimates)
    table_estimates: dict[str, dict[StatisticId, float]] = {}
    for method in methods:
        if method not in estimates:
            raise ValueError(f"no estimates for method {method!r}")
        column = estimates[method]
        missing = [s for s in statistics if s not in column]
        if missing:
            raise ValueError(
                f"method {method!r} lacks statistics "
                f"{[str(s) for s in missing]}"
            )
        table_estimates[method] = {s: float(column[s]) for s in statistics}
    return EstimateTable(statistics, methods, dict(truth), table_estimates)
