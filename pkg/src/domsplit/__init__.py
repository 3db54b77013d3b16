"""Domination certificates for compact sets of invertible matrices.

Two independent detection routes: uniform exponential decay of
singular-value gap ratios over word products, and construction of strictly
invariant multicones in the Grassmannian.  A closed-form 4-dimensional
two-curve family ships as the worked example where every multicone fails
local semiconvexity.
"""

from .errors import (
    ConditioningError,
    DominationGateError,
    DomsplitError,
    IllDefinedSplittingError,
    MulticoneConstructionError,
    NumericalError,
    SingularMatrixError,
)
from .grassmann import ConeSample, Plane, ProjectiveLine, act, grass_distance, transverse
from .linalg import (
    SingularSpectrum,
    conorm,
    cross_ratio,
    cross_ratio_directions,
    exterior_norm,
    gap_ratio,
    operator_norm,
    principal_angles,
    singular_spectrum,
)
from .multicone import Multicone, MulticoneConfig, build_multicone, strictly_invariant
from .splitting import SplittingEstimate, splitting_from_window, verify_domination
from .words import (
    GapReport,
    LyapunovEstimate,
    MatrixFamily,
    SearchConfig,
    Verdict,
    enumerate_gaps,
    fit_decay,
    is_dominated,
    lyapunov_estimates,
)

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "ConeSample",
    "DominationGateError",
    "DomsplitError",
    "GapReport",
    "IllDefinedSplittingError",
    "LyapunovEstimate",
    "MatrixFamily",
    "Multicone",
    "MulticoneConfig",
    "MulticoneConstructionError",
    "NumericalError",
    "Plane",
    "ProjectiveLine",
    "SearchConfig",
    "SingularMatrixError",
    "SingularSpectrum",
    "SplittingEstimate",
    "Verdict",
    "act",
    "build_multicone",
    "conorm",
    "cross_ratio",
    "cross_ratio_directions",
    "enumerate_gaps",
    "exterior_norm",
    "fit_decay",
    "gap_ratio",
    "grass_distance",
    "is_dominated",
    "lyapunov_estimates",
    "operator_norm",
    "principal_angles",
    "singular_spectrum",
    "splitting_from_window",
    "strictly_invariant",
    "transverse",
    "verify_domination",
]
