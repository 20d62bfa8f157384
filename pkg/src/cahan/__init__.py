"""Hierarchical attention networks with context-aware sentence encoders."""

from .errors import CahanError, ContractError, DegenerateInputError, DimensionError, NonFiniteError
from .model import ModelConfig, ModelParams, count_matmuls, encode_document, init_params, published_variants

__version__ = "0.1.0"

__all__ = [
    "CahanError",
    "ContractError",
    "DegenerateInputError",
    "DimensionError",
    "NonFiniteError",
    "ModelConfig",
    "ModelParams",
    "count_matmuls",
    "encode_document",
    "init_params",
    "published_variants",
]
