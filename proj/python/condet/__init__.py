from ._condet import (
    DataError,
    Model,
    NumericalError,
    Thesaurus,
    UsageError,
    __version__,
    auroc,
    detectgpt_score,
    f1,
    gltr_scores,
    mmd,
    ntxent,
    run_cli,
    tokenize,
    transform,
)

__all__ = [
    "DataError",
    "Model",
    "NumericalError",
    "Thesaurus",
    "UsageError",
    "__version__",
    "auroc",
    "detectgpt_score",
    "f1",
    "gltr_scores",
    "mmd",
    "ntxent",
    "run_cli",
    "tokenize",
    "transform",
]
