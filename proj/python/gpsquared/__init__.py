"""Constrained Gaussian process models of rigid-body dynamics."""

from ._core import (
    DomainError,
    NumericalError,
    ParseError,
    Dataset,
    Model,
    System,
    __version__,
    families,
    fit,
    load_dataset,
    load_model,
    make_dataset,
    make_system,
    prediction_grid,
    projection_ops,
    rmse,
    run_cli,
    sample_inputs,
    save_dataset,
    system_names,
)

__all__ = [
    "DomainError",
    "NumericalError",
    "ParseError",
    "Dataset",
    "Model",
    "System",
    "__version__",
    "families",
    "fit",
    "load_dataset",
    "load_model",
    "make_dataset",
    "make_system",
    "prediction_grid",
    "projection_ops",
    "rmse",
    "run_cli",
    "sample_inputs",
    "save_dataset",
    "system_names",
]
