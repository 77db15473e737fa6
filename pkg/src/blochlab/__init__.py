"""Numerical toolkit for p-Bloch spaces on the unit polydisk and weighted
composition operators between them."""

__version__ = "0.1.0"

from .symbolic import ExprFunction, Jet, eval_jet, parse, unparse
from .sampling import Divergence, SampleBudget, SupEstimate, Thresholds, estimate_sup, shell_profile
from .bloch import DIVERGENT, BlochParams, NormReport, bloch_norm, check_growth_bound, check_holder
from .operators import (
    Boundedness,
    Classification,
    Compactness,
    Regime,
    SymbolPair,
    apply_wco,
    classify,
    classify_bounded,
    classify_compact,
    criterion_values,
)
from .testfn import FamilyKind, TestFamily, lower_bound_opnorm, make_test_function, verify_family_norms
