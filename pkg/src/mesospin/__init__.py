"""Micro-macro entanglement through a mesoscopic spin system.

Exact statevector simulation of qubit-to-ensemble magnification, collective
measurement and entanglement diagnostics, with binomial extrapolation to
larger systems.
"""
__version__ = "0.1.0"

from .lattice import CouplingMode, Lattice, build_lattice
from .states import (BranchState, DiagonalMixture, basis_state, dicke_state, mixed_polarized,
                     polarized_state)
from .hamiltonians import build_dipolar, build_grade_raising, build_xy
from .propagator import PropagatorConfig, evolve
from .magnification import magnify_gr, magnify_xy, gr_trajectory, transient_metric
from .spectra import Spectrum, spectrum_of, moments
from .measurement import PhasePOVM, JointOutcome, joint_pipeline, joint_pipeline_mixed
from .entanglement import lose_particle, log_negativity, negativity, ep_closed_form
from .largescale import BinomialModel, extrapolate_fidelity, population_surface

__all__ = [
    "CouplingMode", "Lattice", "build_lattice", "BranchState", "DiagonalMixture",
    "basis_state", "dicke_state", "mixed_polarized", "polarized_state", "build_dipolar",
    "build_grade_raising", "build_xy", "PropagatorConfig", "evolve", "magnify_gr",
    "magnify_xy", "gr_trajectory", "transient_metric", "Spectrum", "spectrum_of", "moments",
    "PhasePOVM", "JointOutcome", "joint_pipeline", "joint_pipeline_mixed", "lose_particle",
    "log_negativity", "negativity", "ep_closed_form", "BinomialModel", "extrapolate_fidelity",
    "population_surface",
]
