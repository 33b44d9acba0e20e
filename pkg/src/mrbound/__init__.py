"""Certified upper bounds for the Menchov-Rademacher constants."""
from .certificate import ENGINE_VERSION, CBound, Certificate, DerivationStep, RuleId, RuleTag, __version__
from .certifier import SearchBudget, best_bound, best_cbound, replay, verify
from .interval import BoundValue

__all__ = [
    "ENGINE_VERSION",
    "BoundValue",
    "CBound",
    "Certificate",
    "DerivationStep",
    "RuleId",
    "RuleTag",
    "SearchBudget",
    "__version__",
    "best_bound",
    "best_cbound",
    "replay",
    "verify",
]
