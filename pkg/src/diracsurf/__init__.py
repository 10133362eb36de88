"""Spinor representation of tori in R^3: surfaces, spectra, flows and theta functions."""

from .errors import (
    ComplexDrift,
    DiracSurfError,
    ConfigError,
    DegenerateChart,
    DegenerateGrid,
    Instability,
    NotClosed,
    NotConformal,
    NonPositiveMetric,
    NotPositiveDefinite,
    NumericalError,
    PoleOnSurface,
    RegularityLost,
    ThetaZeroDivision,
    ZeroPotential,
)
from .grid import GridField, Lattice
from .weierstrass import (
    PotentialField,
    Spinor,
    SurfaceImmersion,
    dirac_residual,
    immersion_from_spinor,
    periodicity_defects,
    spinor_from_immersion,
    willmore,
    willmore_of_potential,
)
from .surfaces import CLIFFORD, RevolutionTorusSpec, cylinder, moebius_invert, perturb, plane, torus_of_revolution
from .spectrum import GalerkinFamily, Quasimomentum, SpectralSlice, indicator, scan_slice, trace_zero_set
from .mnv import FlowState, evolve, mnv_rhs, solve_v
from .thetafun import PeriodMatrix, SpectralCoordinates, theta, theta_gradient
from .genus_one import EllipticCurveData

__version__ = "0.1.0"
