"""Binomial model spectra for system sizes beyond exact simulation.

Each half is described by two spectra: P_0 for the untouched branch, a
binomial over spins that are up with probability 1 - eps/2, and P_1 for the
magnified branch, binomial(n_half, 1/2) centred on m = 0. The two-qubit
state then follows from the same Gram-tensor assembly as the exact
pipeline, with the cross term P_0(a) P_1(c).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import PhasePOVM, model_gram, outcome_from_grams
from .spectra import Spectrum, binomial_spectrum

COHERENCE_ROUTE = "spectral factorization for U_0 = 1 with model P_1"


@dataclass(frozen=True)
class BinomialModel:
    n_half: int
    eps: float = 0.0

    def __post_init__(self):
        if self.n_half < 1:
            raise ValueError("n_half must be positive")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must be in [0, 1], got {self.eps}")

    @property
    def p0(self) -> Spectrum:
        return binomial_spectrum(self.n_half, 1.0 - self.eps / 2)

    @property
    def p1(self) -> Spectrum:
        return binomial_spectrum(self.n_half, 0.5)

    def gram(self) -> np.ndarray:
        return model_gram(self.p0.probs, self.p1.probs)


@dataclass
class ExtrapolationPoint:
    n_total: int
    eps: float
    slope: float
    population: float
    coherence_rel: float
    fidelity: float
    p_select: float

    def row(self) -> dict:
        return {"N": self.n_total, "eps": self.eps, "theta_slope": self.slope,
                "p_select": self.p_select, "population": self.population,
                "coherence_rel": self.coherence_rel, "fidelity": self.fidelity}


def resolve_slope(theta_slope, n_total: int, eps: float) -> float:
    """'auto' means 2 pi / (N (1 - eps)); anything else is taken as the slope."""
    if isinstance(theta_slope, str):
        if theta_slope != "auto":
            return float(theta_slope)
        if eps >= 1.0:
            raise ValueError("automatic slope is undefined at eps = 1; pass an explicit slope")
        return 2 * math.pi / (n_total * (1.0 - eps))
    return float(theta_slope)


def extrapolate_fidelity(n_total: int, eps: float = 0.0, theta_slope="auto") -> ExtrapolationPoint:
    if n_total < 8 or n_total % 2:
        raise ValueError(f"n_total must be even and >= 8, got {n_total}")
    slope = resolve_slope(theta_slope, n_total, eps)
    G = BinomialModel(n_total // 2, eps).gram()
    out = outcome_from_grams(G, G, PhasePOVM.linear(n_total, slope))
    return ExtrapolationPoint(n_total, eps, slope, out.population, out.coherence_rel,
                              out.fidelity, out.p_select)


def population_surface(n_grid, eps_grid, theta_slope="auto") -> list[ExtrapolationPoint]:
    """Model predictions on the (N, eps) grid, N varying slowest."""
    return [extrapolate_fidelity(int(n), float(e), theta_slope) for n in n_grid for e in eps_grid]
