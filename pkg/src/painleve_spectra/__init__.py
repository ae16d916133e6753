"""Bound-state spectra of superintegrable potentials built from the fourth
Painlevé transcendent: algebraic (cubic algebra), SUSY ladder and
finite-difference routes, each checkable against the others."""

__version__ = "0.1.0"

from .errors import PainleveSpectraError  # noqa: E402
from .potentials import ModelParams, PotentialSpec, case_params, g1, potential  # noqa: E402
from .special_functions import P4Params, P4Solution, catalogue, p4_integrate  # noqa: E402
