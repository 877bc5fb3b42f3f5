"""Toolkit for graphical missing-data models: full-law identifiability
checks, decomposable-imputation orderings, simulation of linear-Gaussian
data with logistic response mechanisms, and the estimator zoo (chained MI,
MI with response indicators, decomposable MI, target-law plug-in, CCA, ACA).
"""

from .identify import (
    Colluder,
    FactorizationTerm,
    FullLawDecision,
    IndependenceCheck,
    OrderingCertificate,
    SelfCensoring,
    find_decomposable_ordering,
    full_law_identifiable,
    target_law_factorization,
    verify_ordering,
)
from .impute import (
    CompletedDataset,
    RegressionDraw,
    available_cases,
    bayes_linreg_draw,
    complete_cases,
    impute_chained,
    impute_decomposable,
    impute_miri,
    plug_in_target_law,
)
from .mdgraph import (
    GraphParseError,
    MissingDataGraph,
    Node,
    Role,
    d_separated,
    parse_graph,
    row_pattern,
    topological_order,
)
from .simulate import (
    Dataset,
    ExampleSpec,
    LinearEquation,
    ResponseSpec,
    SemSpec,
    apply_mask,
    builtin_example,
    implied_moments,
    load_example_spec,
    read_dataset_csv,
    simulate_complete,
    simulate_dataset,
    simulate_responses,
    truth_statistics,
    write_dataset_csv,
)
from .stats import (
    EstimateTable,
    StatisticId,
    bias_table,
    default_statistics,
    pool,
    summarize,
)

__version__ = "0.1.0"
