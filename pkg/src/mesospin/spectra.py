"""Collective magnetization spectra and distinctness criteria.

A spectrum is stored by number of down spins k = 0..n, which is the
natural index for convolution; m_z = n/2 - k.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .states import popcounts, n_spins_of

DISTINGUISHABILITY_COEFF = 1.0 + math.sqrt(2.0)


@dataclass(frozen=True)
class Spectrum:
    n_spins: int
    probs: np.ndarray  # probs[k] = P(m_z = n/2 - k)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.n_spins + 1,):
            raise ValueError(f"expected {self.n_spins + 1} probabilities, got {p.shape}")
        if np.any(p < -1e-15):
            raise ValueError("negative probability in spectrum")
        object.__setattr__(self, "probs", p)

    @property
    def m_values(self) -> np.ndarray:
        return self.n_spins / 2 - np.arange(self.n_spins + 1)

    @property
    def weight(self) -> float:
        return float(self.probs.sum())

    def as_dict(self) -> dict:
        return {float(m): float(p) for m, p in zip(self.m_values, self.probs)}

    def __getitem__(self, m) -> float:
        k = self.n_spins / 2 - m
        if k != int(k) or not 0 <= k <= self.n_spins:
            return 0.0
        return float(self.probs[int(k)])

    def normalized(self) -> "Spectrum":
        w = self.weight
        if w <= 0:
            raise ValueError("spectrum has zero mass")
        return Spectrum(self.n_spins, self.probs / w)

    def support(self, atol=1e-12) -> np.ndarray:
        return self.m_values[self.probs > atol]

    def tv_distance(self, other: "Spectrum") -> float:
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


def delta(n: int, m: float) -> Spectrum:
    p = np.zeros(n + 1)
    p[int(round(n / 2 - m))] = 1.0
    return Spectrum(n, p)


def spectrum_of(v: np.ndarray) -> Spectrum:
    """Exact P(m_z) = <v|Pi(m_z)|v> by binning |v_b|^2 on popcount."""
    n = n_spins_of(v)
    probs = np.bincount(popcounts(n), weights=np.abs(v) ** 2, minlength=n + 1)
    return Spectrum(n, probs)


def spectrum_of_mixture(mix, evolved_map) -> Spectrum:
    """Probability-weighted average of per-term spectra.

    ``evolved_map`` maps each bitmask of the mixture to the spectrum of its
    evolved state (a dict or a callable).
    """
    get = evolved_map if callable(evolved_map) else evolved_map.__getitem__
    acc = np.zeros(mix.n_spins + 1)
    for b, p in mix:
        try:
            s = get(b)
        except KeyError:
            raise KeyError(f"no evolved spectrum for mixture term {b}") from None
        acc += p * s.probs
    return Spectrum(mix.n_spins, acc)


def moments(s: Spectrum):
    """(mean, sd) of the normalized distribution."""
    w = s.weight
    if w <= 0:
        raise ValueError("moments of a zero-mass spectrum")
    p = s.probs / w
    m = s.m_values
    mean = float(p @ m)
    var = float(p @ (m - mean) ** 2)
    return mean, math.sqrt(max(var, 0.0))


def convolve(a: Spectrum, b: Spectrum) -> Spectrum:
    """Spectrum of a product state over the union of the two registers."""
    return Spectrum(a.n_spins + b.n_spins, np.convolve(a.probs, b.probs))


def distinctness_ratio(s0: Spectrum, s1: Spectrum) -> float:
    """|mean0 - mean1| / max(sd0 + sd1, 1), with hbar = 1."""
    m0, d0 = moments(s0)
    m1, d1 = moments(s1)
    return abs(m0 - m1) / max(d0 + d1, 1.0)


def distinguishable_margin(s0: Spectrum, s1: Spectrum) -> float:
    """Mean gap over (1 + sqrt 2)(sd0 + sd1); > 1 is the two-half selection check."""
    m0, d0 = moments(s0)
    m1, d1 = moments(s1)
    return abs(m0 - m1) / max(DISTINGUISHABILITY_COEFF * (d0 + d1), 1.0)


def binomial_spectrum(n: int, p_up: float) -> Spectrum:
    """n independent spins, each up with probability p_up."""
    from scipy.stats import binom
    return Spectrum(n, binom.pmf(np.arange(n + 1), n, 1.0 - p_up))


def write_spectra_csv(path, spectra: dict, meta: dict | None = None) -> None:
    """One column per named spectrum, rows by m_z (descending)."""
    names = list(spectra)
    n = spectra[names[0]].n_spins
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(fh)
        w.writerow(["m_z"] + names)
        for k in range(n + 1):
            w.writerow([n / 2 - k] + [repr(float(spectra[s].probs[k])) for s in names])


def read_spectra_csv(path) -> dict:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    names = rows[0][1:]
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    n = len(data) - 1
    return {name: Spectrum(n, data[:, i + 1]) for i, name in enumerate(names)}
