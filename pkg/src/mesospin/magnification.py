"""Qubit-to-MSS magnification circuits.

Both circuits are simulated as two conditional MSS branches: the control
qubit is never acted on by a Hamiltonian, so (|0>U_0 + |1>U_1)|psi_in>
is represented exactly by the pair (U_0 psi_in, U_1 psi_in).

* repeated interaction: r rounds of [CNOT(q -> contact); exp(-i H_XY dt)]
* one-time interaction: exp(+i H_2GR t) CNOT exp(-i H_2GR t), so U_0 = 1
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .hamiltonians import build_grade_raising, build_xy
from .lattice import Lattice, build_lattice
from .propagator import DEFAULT_CONFIG, EvolveStats, PropagatorConfig, evolve
from .spectra import moments, spectrum_of
from .states import BranchState, flip, polarized_state

DEFAULT_GRID_POINTS = 64


@lru_cache(maxsize=16)
def _table(lattice: Lattice):
    return build_lattice(lattice.dims, lattice.coupling_mode, lattice.spacing)[1]


@dataclass
class Transcript:
    n_spins: int
    times: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def __len__(self):
        return len(self.times)


@dataclass
class MagnificationResult:
    branch: BranchState
    protocol: str
    params: dict
    transcript: Transcript | None = None
    stats: EvolveStats = field(default_factory=EvolveStats)


class GradeRaisingCircuit:
    """U_1 = exp(+iHt) X_s exp(-iHt) with H the grade-raising Hamiltonian.

    U_1 is Hermitian as well as unitary, so it is its own inverse.
    """

    def __init__(self, lattice: Lattice, t: float, cfg: PropagatorConfig = DEFAULT_CONFIG):
        self.lattice = lattice
        self.H = build_grade_raising(_table(lattice))
        self.t = float(t)
        self.cfg = cfg
        self.stats = EvolveStats()

    def u1(self, v):
        w = evolve(self.H, self.t, v, self.cfg, stats=self.stats)
        w = flip(w, self.lattice.contact)
        return evolve(self.H, -self.t, w, self.cfg, stats=self.stats)

    def undo(self, k, v):
        return v.copy() if k == 0 else self.u1(v)

    def branch(self, initial) -> BranchState:
        return BranchState(initial.copy(), self.u1(initial), undo=self.undo, identity_branch0=True)


class FlipFlopCircuit:
    """r rounds of CNOT then exp(-i H_XY dt); the CNOT acts on branch 1 only."""

    def __init__(self, lattice: Lattice, dt: float, r: int, cfg: PropagatorConfig = DEFAULT_CONFIG):
        if r < 0:
            raise ValueError("r must be >= 0")
        self.lattice = lattice
        self.H = build_xy(_table(lattice))
        self.dt = float(dt)
        self.r = int(r)
        self.cfg = cfg
        self.stats = EvolveStats()

    def step(self, k, v):
        if k == 1:
            v = flip(v, self.lattice.contact)
        return evolve(self.H, self.dt, v, self.cfg, stats=self.stats)

    def apply(self, k, v):
        if k == 0:
            return evolve(self.H, self.r * self.dt, v, self.cfg, stats=self.stats)
        for _ in range(self.r):
            v = self.step(1, v)
        return v

    def undo(self, k, v):
        if k == 0:
            return evolve(self.H, -self.r * self.dt, v, self.cfg, stats=self.stats)
        for _ in range(self.r):
            v = flip(evolve(self.H, -self.dt, v, self.cfg, stats=self.stats), self.lattice.contact)
        return v

    def branch(self, initial) -> BranchState:
        return BranchState(self.apply(0, initial), self.apply(1, initial), undo=self.undo)


def _as_lattice(lattice) -> Lattice:
    if isinstance(lattice, Lattice):
        return lattice
    if isinstance(lattice, tuple) and isinstance(lattice[0], Lattice):
        return lattice[0]
    raise TypeError("expected a Lattice")


def _check_initial(lattice, initial):
    if initial is None:
        return polarized_state(lattice.n_spins)
    if len(initial) != 1 << lattice.n_spins:
        raise ValueError("initial state does not match the lattice")
    if abs(np.linalg.norm(initial) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    return np.asarray(initial, dtype=complex)


def magnify_xy(lattice, dt: float, r: int, initial=None,
               cfg: PropagatorConfig = DEFAULT_CONFIG, record: bool = False) -> MagnificationResult:
    """Repeated-interaction magnification; ``record`` samples every round."""
    lattice = _as_lattice(lattice)
    initial = _check_initial(lattice, initial)
    circ = FlipFlopCircuit(lattice, dt, r, cfg)
    psi0 = circ.apply(0, initial)
    psi1 = initial.copy()
    times, means, sds = [0.0], [], []
    mu, sd = moments(spectrum_of(psi1))
    means.append(mu); sds.append(sd)
    for j in range(circ.r):
        psi1 = circ.step(1, psi1)
        if record:
            mu, sd = moments(spectrum_of(psi1))
            times.append((j + 1) * circ.dt); means.append(mu); sds.append(sd)
    transcript = (Transcript(lattice.n_spins, np.array(times), np.array(means), np.array(sds))
                  if record else None)
    branch = BranchState(psi0, psi1, undo=circ.undo)
    return MagnificationResult(branch, "xy", {"dt": circ.dt, "r": circ.r}, transcript, circ.stats)


def magnify_gr(lattice, t: float, initial=None,
               cfg: PropagatorConfig = DEFAULT_CONFIG) -> MagnificationResult:
    """One-time grade-raising magnification; branch 0 is the input itself."""
    lattice = _as_lattice(lattice)
    initial = _check_initial(lattice, initial)
    circ = GradeRaisingCircuit(lattice, t, cfg)
    return MagnificationResult(circ.branch(initial), "gr", {"t": circ.t}, None, circ.stats)


def gr_trajectory(lattice, t_max: float, n_points: int = DEFAULT_GRID_POINTS, initial=None,
                  cfg: PropagatorConfig = DEFAULT_CONFIG, stop_below: float | None = None,
                  t_stop: float | None = None, stats: EvolveStats | None = None) -> Transcript:
    """Mean and SD of spectrum(psi1(t)) on a uniform grid over [0, t_max].

    The forward leg is propagated incrementally along the grid; the reverse
    leg is recomputed at every point. With ``stop_below`` sampling ends at
    the first point whose mean falls below that value; with ``t_stop`` it
    ends at the first grid time >= t_stop. Neither changes the grid itself,
    so truncated transcripts stay comparable point by point.
    """
    lattice = _as_lattice(lattice)
    initial = _check_initial(lattice, initial)
    stats = EvolveStats() if stats is None else stats
    H = build_grade_raising(_table(lattice))
    grid = np.linspace(0.0, t_max, n_points)
    phi, t_prev = initial, 0.0
    times, means, sds = [], [], []
    for t in grid:
        phi = evolve(H, t - t_prev, phi, cfg, stats=stats)
        t_prev = t
        psi1 = evolve(H, -t, flip(phi, lattice.contact), cfg, stats=stats)
        mu, sd = moments(spectrum_of(psi1))
        times.append(t); means.append(mu); sds.append(sd)
        if stop_below is not None and mu < stop_below:
            break
        if t_stop is not None and t >= t_stop:
            break
    return Transcript(lattice.n_spins, np.array(times), np.array(means), np.array(sds))


def transient_order(first, second, t_max: float, n_points: int = DEFAULT_GRID_POINTS,
                    cfg: PropagatorConfig = DEFAULT_CONFIG, stats: EvolveStats | None = None):
    """Transient times of two lattices on one grid.

    The second lattice is only sampled up to the first one's crossing time,
    which is all that is needed to decide which crosses earlier; its value is
    inf when it has not crossed by then. Returns (t_first, t_second).
    """
    first, second = _as_lattice(first), _as_lattice(second)
    tr1 = gr_trajectory(first, t_max, n_points, cfg=cfg, stop_below=first.n_spins / 4, stats=stats)
    t1 = transient_metric(tr1)
    tr2 = gr_trajectory(second, t_max, n_points, cfg=cfg, stop_below=second.n_spins / 4,
                        t_stop=None if math.isinf(t1) else t1, stats=stats)
    return t1, transient_metric(tr2)


def transient_metric(transcript: Transcript) -> float:
    """Earliest sampled time at which the mean drops below N_h/4; inf if never."""
    if transcript is None or len(transcript) == 0:
        raise ValueError("empty transcript")
    below = np.flatnonzero(transcript.means < transcript.n_spins / 4)
    return float(transcript.times[below[0]]) if below.size else math.inf
