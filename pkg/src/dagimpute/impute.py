"""Estimators under missing data: chained-equations multiple imputation (the
Bayesian "norm" draw), a variant with response indicators as predictors,
decomposable imputation along a certified ordering, plug-in sampling of the
factorized target law, and complete/available case row selection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._seeds import as_generator, spawn
from .identify import FactorizationTerm, OrderingCertificate
from .simulate import Dataset
from .stats import StatisticId

RIDGE_JITTER = 1e-8


@dataclass(frozen=True)
class RegressionDraw:
    """One posterior draw of a Bayesian linear regression (flat prior)."""

    coefficients: np.ndarray
    residual_sd: float


def bayes_linreg_draw(design, response, seed) -> RegressionDraw:
    """Draw regression parameters from the noninformative-prior posterior.

    The residual variance is sampled as RSS / chi2(n - q) (a scaled inverse
    chi-square with n - q degrees of freedom) and the coefficients from a
    Gaussian centered at the least-squares fit with covariance
    sigma^2 (X'X)^-1. A rank-deficient design falls back to a ridge jitter of
    1e-8 on the Gram diagonal, with a warning.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if x.ndim != 2:
        raise ValueError("design must be a 2-d matrix")
    n, q = x.shape
    if n < q + 2:
        raise ValueError(f"need at least {q + 2} rows to fit {q} coefficients")
    rng = as_generator(seed)

    gram = x.T @ x
    try:
        gram_chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        warnings.warn(
            f"rank-deficient design; adding ridge jitter {RIDGE_JITTER}",
            stacklevel=2,
        )
        gram = gram + RIDGE_JITTER * np.eye(q)
        gram_chol = np.linalg.cholesky(gram)

    xty = x.T @ y
    beta_hat = np.linalg.solve(gram_chol.T, np.linalg.solve(gram_chol, xty))
    resid = y - x @ beta_hat
    rss = float(resid @ resid)
    sigma2 = rss / rng.chisquare(n - q)
    cov_chol = np.linalg.cholesky(np.linalg.inv(gram))
    beta = beta_hat + np.sqrt(sigma2) * (cov_chol @ rng.standard_normal(q))
    return RegressionDraw(beta, float(np.sqrt(sigma2)))


@dataclass(frozen=True)
class CompletedDataset:
    """A dataset with every NA filled in; ``index`` is the imputation number."""

    columns: dict[str, np.ndarray]
    index: int

    def __post_init__(self) -> None:
        for name, col in self.columns.items():
            if np.isnan(col).any():
                raise ValueError(f"completed column {name!r} still contains NA")


PredictorMatrix = Mapping[str, Sequence[str]]


def default_predictor_matrix(d: Dataset) -> dict[str, tuple[str, ...]]:
    """Each incomplete variable regresses on all other variables' proxies."""
    return {
        var: tuple(other for other in d.variables if other != var)
        for var in d.indicators
    }


def miri_predictor_matrix(d: Dataset) -> dict[str, tuple[str, ...]]:
    """Default predictors plus every response indicator except the target's own."""
    pm = {}
    for var in d.indicators:
        predictors = [other for other in d.variables if other != var]
        predictors += [
            d.indicator_names[other] for other in d.indicators if other != var
        ]
        pm[var] = tuple(predictors)
    return pm


def _resolve_columns(
    d: Dataset, work: dict[str, np.ndarray], names: Sequence[str]
) -> list[np.ndarray]:
    cols = []
    for name in names:
        if name in work:
            cols.append(work[name])
        else:
            cols.append(d.column(name).astype(float))
    return cols


def impute_chained(
    d: Dataset,
    pm: PredictorMatrix | None = None,
    m: int = 5,
    iters: int = 5,
    seed=0,
) -> list[CompletedDataset]:
    """Multiple imputation by chained equations with Bayesian linear draws.

    Each of the ``m`` chains initializes missing cells by resampling the
    column's observed values, then sweeps ``iters`` times: every incomplete
    variable is refit on its observed rows (predictors at their current
    imputed values), parameters are drawn, and its missing cells are
    re-imputed. Observed cells are never touched.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if pm is None:
        pm = default_predictor_matrix(d)
    masks = {var: d.missing_mask(var) for var in d.indicators}
    targets = [var for var in d.variables if masks.get(var, False) is not False]
    targets = [var for var in targets if masks[var].any()]
    for var in targets:
        if var not in pm:
            raise ValueError(f"no predictor set for incomplete variable {var!r}")
        if masks[var].all():
            raise ValueError(f"column {var!r} has no observed values")

    completed: list[CompletedDataset] = []
    for chain_index, rng in enumerate(spawn(seed, m), start=1):
        work = {var: d.proxies[var].copy() for var in d.variables}
        for var in targets:
            mask = masks[var]
            observed_values = work[var][~mask]
            work[var][mask] = rng.choice(observed_values, mask.sum(), replace=True)
        for _ in range(iters):
            for var in targets:
                mask = masks[var]
                predictor_cols = _resolve_columns(d, work, pm[var])
                design = np.column_stack([np.ones(d.n), *predictor_cols])
                draw = bayes_linreg_draw(
                    design[~mask], d.proxies[var][~mask], rng
                )
                work[var][mask] = design[mask] @ draw.coefficients + (
                    draw.residual_sd * rng.standard_normal(int(mask.sum()))
                )
        completed.append(CompletedDataset(work, chain_index))
    return completed


def impute_miri(
    d: Dataset, m: int = 5, iters: int = 5, seed=0
) -> list[CompletedDataset]:
    """Chained equations with response indicators added as predictors."""
    return impute_chained(d, miri_predictor_matrix(d), m=m, iters=iters, seed=seed)


def _require_valid(cert: OrderingCertificate) -> None:
    if not cert.valid:
        raise ValueError(
            "ordering certificate is not valid; failing checks: "
            + "; ".join(str(c) for c in cert.failing())
        )


def _check_terms(cert: OrderingCertificate, terms: Sequence[FactorizationTerm]):
    if tuple(t.target for t in terms) != cert.ordering:
        raise ValueError("terms do not follow the certificate's ordering")


def _fit_rows(d: Dataset, term: FactorizationTerm) -> np.ndarray:
    """Rows where every indicator required by the term equals 1."""
    var_of = {name: var for var, name in d.indicator_names.items()}
    rows = np.ones(d.n, dtype=bool)
    for ind_name in term.required_indicators:
        rows &= d.indicators[var_of[ind_name]] == 1
    return rows


def forced_missing_masks(
    d: Dataset, ordering: Sequence[str]
) -> dict[str, np.ndarray]:
    """Monotone forcing: per row, NA every partially observed variable that
    follows the first missing one in the ordering (including originally
    observed cells)."""
    alive = np.ones(d.n, dtype=bool)
    forced: dict[str, np.ndarray] = {}
    for var in ordering:
        if var in d.indicators:
            observed = d.indicators[var] == 1
            forced[var] = ~(alive & observed)
            alive &= observed
    return forced


def impute_decomposable(
    d: Dataset,
    cert: OrderingCertificate,
    terms: Sequence[FactorizationTerm],
    m: int = 5,
    seed=0,
) -> list[CompletedDataset]:
    """Sequential imputation along a certified ordering.

    Stage 1 forces the missingness pattern to be monotone: in each row,
    every partially observed variable after the first missing one is nulled,
    discarding observed values where necessary. Stage 2 walks the ordering
    once; each term is fit (one Bayesian draw) on the rows where its required
    indicators are all 1 and then fills every nulled cell of its target from
    the already-completed predecessors. A single pass suffices because the
    forced pattern is monotone.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    _require_valid(cert)
    _check_terms(cert, terms)
    forced = forced_missing_masks(d, cert.ordering)

    completed: list[CompletedDataset] = []
    for chain_index, rng in enumerate(spawn(seed, m), start=1):
        work: dict[str, np.ndarray] = {}
        for term in terms:
            target = term.target
            if target not in d.indicators:  # fully observed: nothing to impute
                work[target] = d.proxies[target].copy()
                continue
            rows = _fit_rows(d, term)
            if not rows.any():
                raise ValueError(
                    f"empty fitting set for {term}; positivity fails in-sample"
                )
            fit_design = np.column_stack(
                [np.ones(int(rows.sum()))]
                + [d.proxies[u][rows] for u in term.conditioning]
            )
            draw = bayes_linreg_draw(fit_design, d.proxies[target][rows], rng)
            column = d.proxies[target].copy()
            mask = forced[target]
            if mask.any():
                impute_design = np.column_stack(
                    [np.ones(int(mask.sum()))]
                    + [work[u][mask] for u in term.conditioning]
                )
                column[mask] = impute_design @ draw.coefficients + (
                    draw.residual_sd * rng.standard_normal(int(mask.sum()))
                )
            work[target] = column
        ordered = {var: work[var] for var in d.variables}
        completed.append(CompletedDataset(ordered, chain_index))
    return completed


def plug_in_target_law(
    d: Dataset,
    terms: Sequence[FactorizationTerm],
    n_draws: int,
    seed=0,
) -> dict[str, np.ndarray]:
    """Sample a synthetic complete dataset from the factorized target law.

    The first term's variable is bootstrapped from its observed marginal;
    every later variable is drawn from its fitted linear-Gaussian conditional
    applied to the already-synthesized predecessors.
    """
    if n_draws < 0:
        raise ValueError("n_draws must be nonnegative")
    rng = as_generator(seed)
    synthetic: dict[str, np.ndarray] = {}
    for k, term in enumerate(terms):
        rows = _fit_rows(d, term)
        if not rows.any():
            raise ValueError(
                f"empty fitting set for {term}; positivity fails in-sample"
            )
        if k == 0:
            pool = d.proxies[term.target][rows]
            synthetic[term.target] = rng.choice(pool, n_draws, replace=True)
        else:
            fit_design = np.column_stack(
                [np.ones(int(rows.sum()))]
                + [d.proxies[u][rows] for u in term.conditioning]
            )
            draw = bayes_linreg_draw(fit_design, d.proxies[term.target][rows], rng)
            synth_design = np.column_stack(
                [np.ones(n_draws)] + [synthetic[u] for u in term.conditioning]
            )
            synthetic[term.target] = synth_design @ draw.coefficients + (
                draw.residual_sd * rng.standard_normal(n_draws)
            )
    return synthetic


def complete_cases(d: Dataset) -> dict[str, np.ndarray]:
    """Columns restricted to rows where every indicator is 1."""
    rows = np.ones(d.n, dtype=bool)
    for var in d.indicators:
        rows &= d.indicators[var] == 1
    return {var: d.proxies[var][rows] for var in d.variables}


def available_cases(
    d: Dataset, stats: Iterable[StatisticId]
) -> dict[StatisticId, dict[str, np.ndarray]]:
    """Per-statistic column subsets: rows where the statistic's variables are
    observed (pairwise deletion for correlations)."""
    subsets: dict[StatisticId, dict[str, np.ndarray]] = {}
    for stat in stats:
        rows = np.ones(d.n, dtype=bool)
        for var in stat.variables:
            rows &= ~np.isnan(d.proxies[var])
        subsets[stat] = {var: d.proxies[var][rows] for var in stat.variables}
    return subsets
