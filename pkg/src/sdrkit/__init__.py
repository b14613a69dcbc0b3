"""Toolkit for building desirability-matched graded forced-choice Big Five
inventories, administering them to language-model respondents, scoring with
Bayesian item response models, and quantifying socially desirable responding
against ground-truth recovery."""

__version__ = "0.1.0"

from .core import (
    AssemblyConfig,
    GfcBlock,
    InstructionCondition,
    Inventory,
    Item,
    ItemPool,
    ResponseFormat,
    ResponseSet,
    SdrkitError,
    TraitDomain,
    validate_inventory,
)

__all__ = [
    "AssemblyConfig",
    "GfcBlock",
    "InstructionCondition",
    "Inventory",
    "Item",
    "ItemPool",
    "ResponseFormat",
    "ResponseSet",
    "SdrkitError",
    "TraitDomain",
    "validate_inventory",
    "__version__",
]
