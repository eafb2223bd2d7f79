"""Principal fitted components: sufficient dimension reduction by inverse regression."""

from ._core import (
    Design,
    PfcredError,
    PfcFit,
    StructuredFit,
    Subspace,
    chi2_sf,
    design,
    fit,
    fit_structured,
    generate,
    principal_angles,
    reduce,
    select_d,
    test_predictors,
    test_structure,
)

__version__ = "0.1.0"
