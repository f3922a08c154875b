"""Two-outcome collective measurement and the final two-qubit state.

The MSS is measured with M_1 = i sum_m sin(theta(m)) Pi(m), post-selected
on outcome 1, each half is disentangled with U_k^dagger and the MSS is
traced out. Everything is assembled from per-half Gram tensors

    G[k, a, i, c] = < U_k^dag Pi_a psi_k | U_i^dag Pi_c psi_i >

with a, c running over the number of down spins of the half. Because the
measurement operator is diagonal in (a_L, a_R), the 4x4 qubit matrix is
a pair of small matrix products per element:

    rho[(i j), (k l)] ~ sum_ab S_ab (G_L[k,:,i,:] S G_R[l,:,j,:]^T)_ab,
    S_ab = sin theta(m_L(a) + m_R(b)).

Qubit basis order is |00>, |01>, |10>, |11> with the left qubit first.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .propagator import DEFAULT_CONFIG, EvolveStats, PropagatorConfig
from .spectra import Spectrum, spectrum_of
from .states import BranchState, basis_state, n_spins_of, popcounts

P_SELECT_FLOOR = 1e-12
KEPT_MASS_WARN = 1.0 - 1e-6
M0 = np.array([0.0, 1.0, 1.0, 0.0]) / math.sqrt(2.0)


class PostSelectionError(ValueError):
    """Outcome 1 has (numerically) zero probability."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhasePOVM:
    """Outcome operators E_1 = sum_m sin^2 theta(m) Pi(m), E_0 = 1 - E_1."""
    n_total: int
    theta: Callable = field(repr=False)
    slope: float | None = None

    @classmethod
    def linear(cls, n_total: int, slope: float) -> "PhasePOVM":
        slope = float(slope)
        return cls(n_total, lambda m: slope * np.asarray(m, dtype=float), slope)

    @classmethod
    def canonical(cls, n_total: int, eps: float = 0.0) -> "PhasePOVM":
        """theta(m) = 2 pi m / (N (1 - eps))."""
        if not 0.0 <= eps < 1.0:
            raise ValueError(f"canonical slope needs eps in [0, 1), got {eps}")
        return cls.linear(n_total, 2 * math.pi / (n_total * (1.0 - eps)))

    @classmethod
    def constant(cls, n_total: int, value: float) -> "PhasePOVM":
        return cls(n_total, lambda m: np.full(np.shape(m), float(value)))

    def m_values(self) -> np.ndarray:
        return self.n_total / 2 - np.arange(self.n_total + 1)

    def sin(self, m) -> np.ndarray:
        return np.sin(self.theta(m))

    def a1(self, m) -> np.ndarray:
        """Outcome-1 weight sin^2 theta(m)."""
        return self.sin(m) ** 2

    def a0(self, m) -> np.ndarray:
        return np.cos(self.theta(m)) ** 2


def povm_apply(povm: PhasePOVM, state, m_left: float | None = None):
    """Apply M_1 and return (sub-normalized state, outcome-1 weight).

    ``state`` is either a vector on the whole MSS (``povm.n_total`` spins) or,
    when ``m_left`` is given, a vector on the right half while the left half
    sits in a J_z eigenstate with eigenvalue ``m_left``. A :class:`Spectrum`
    is accepted in place of a vector; then only the weight is meaningful and
    the returned state is None.
    """
    if isinstance(state, Spectrum):
        n = state.n_spins
        _check_dims(povm, n, m_left)
        shift = 0.0 if m_left is None else m_left
        w = float(povm.a1(state.m_values + shift) @ state.probs)
        return None, w
    v = np.asarray(state)
    n = n_spins_of(v)
    _check_dims(povm, n, m_left)
    shift = 0.0 if m_left is None else m_left
    m = (n - 2 * popcounts(n)) / 2 + shift
    out = 1j * povm.sin(m) * v
    return out, float(np.vdot(out, out).real)


def _check_dims(povm, n, m_left):
    if m_left is None and n != povm.n_total:
        raise ValueError(f"state has {n} spins, measurement acts on {povm.n_total}")
    if m_left is not None:
        n_left = povm.n_total - n
        if n_left < 0 or abs(m_left) > n_left / 2 or (n_left / 2 - m_left) % 1:
            raise ValueError(f"m_left={m_left} incompatible with {n_left} left spins")


def apparatus_apply(povm: PhasePOVM, v: np.ndarray):
    """Couple a two-level apparatus through U_M = sum_m Pi(m) exp(-i theta(m) sigma_y),
    project the apparatus on |1> and return (MSS state, probability).

    Independent of :func:`povm_apply`: U_M is built as an explicit sparse
    unitary on MSS (x) apparatus, the apparatus being the highest bit.
    """
    n = n_spins_of(v)
    if n != povm.n_total:
        raise ValueError(f"state has {n} spins, measurement acts on {povm.n_total}")
    d = 1 << n
    th = povm.theta((n - 2 * popcounts(n)) / 2)
    c, s = np.cos(th), np.sin(th)
    idx = np.arange(d)
    # exp(-i th sigma_y) = [[c, -s], [s, c]] on the apparatus bit
    rows = np.concatenate([idx, idx, idx + d, idx + d])
    cols = np.concatenate([idx, idx + d, idx, idx + d])
    vals = np.concatenate([c, -s, s, c])
    um = sp.csr_matrix((vals, (rows, cols)), shape=(2 * d, 2 * d))
    joint = np.concatenate([v, np.zeros(d, dtype=complex)])
    out = (um @ joint)[d:]
    return out, float(np.vdot(out, out).real)


# --------------------------------------------------------------------------
# Gram tensors

def branch_gram(branch: BranchState) -> np.ndarray:
    """Gram tensor of the disentangled, sector-projected branches.

    When branch 0 is untouched (U_0 = 1) and is a J_z eigenstate the tensor
    follows from the spectrum of psi_1 alone; otherwise the undo map of the
    branch is applied to every populated sector.
    """
    n = branch.n_spins
    pc = popcounts(n)
    s0 = spectrum_of(branch.psi0).probs
    if branch.identity_branch0 and np.count_nonzero(s0 > 1e-14) == 1:
        return spectral_gram(int(np.argmax(s0)), spectrum_of(branch.psi1).probs,
                             abs(s0.sum()))
    if branch.undo is None:
        raise ValueError("branch has no undo map and branch 0 is not a J_z eigenstate")
    psi = (branch.psi0, branch.psi1)
    S = n + 1
    vecs = np.zeros((2, S, 1 << n), dtype=complex)
    for k in range(2):
        for a in range(S):
            part = np.where(pc == a, psi[k], 0)
            if np.any(part):
                vecs[k, a] = branch.undo(k, part)
    flat = vecs.reshape(2 * S, -1)
    return (flat.conj() @ flat.T).reshape(2, S, 2, S)


def spectral_gram(k0: int, p1: np.ndarray, norm0: float = 1.0) -> np.ndarray:
    """Gram tensor for U_0 = 1 and psi_0 a J_z eigenstate with k0 down spins.

    U_1 Pi psi_1 collapses the cross terms to <Pi_a psi_0 | U_1^dag Pi_c psi_1>
    = delta(a, k0) P_1(c).
    """
    p1 = np.asarray(p1, dtype=float)
    S = p1.size
    G = np.zeros((2, S, 2, S), dtype=complex)
    G[0, k0, 0, k0] = norm0
    G[1, np.arange(S), 1, np.arange(S)] = p1
    G[0, k0, 1, :] = p1
    G[1, :, 0, k0] = p1
    return G


def model_gram(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Mixture-averaged Gram tensor with the cross term taken as P_0(a) P_1(c).

    Exact for a pure polarized branch 0; for a diagonal mixture it assumes the
    evolved spectrum of each term does not depend on which term it came from.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    S = p0.size
    G = np.zeros((2, S, 2, S), dtype=complex)
    G[0, np.arange(S), 0, np.arange(S)] = p0
    G[1, np.arange(S), 1, np.arange(S)] = p1
    G[0, :, 1, :] = np.outer(p0, p1)
    G[1, :, 0, :] = np.outer(p1, p0)
    return G


def joint_matrix(GL: np.ndarray, GR: np.ndarray, povm: PhasePOVM) -> np.ndarray:
    """Unnormalized post-selected two-qubit matrix; its trace is 4 p_select."""
    nL, nR = GL.shape[1] - 1, GR.shape[1] - 1
    if nL + nR != povm.n_total:
        raise ValueError(f"halves of {nL} + {nR} spins do not match N = {povm.n_total}")
    mL = nL / 2 - np.arange(nL + 1)
    mR = nR / 2 - np.arange(nR + 1)
    S = povm.sin(mL[:, None] + mR[None, :])
    rho = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    inner = GL[k, :, i, :] @ S @ GR[l, :, j, :].T
                    rho[2 * i + j, 2 * k + l] = np.sum(S * inner)
    return rho


@dataclass
class JointOutcome:
    p_select: float
    rho_q: np.ndarray
    kept_mass: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def c_0101(self) -> float:
        return float(self.rho_q[1, 1].real)

    @property
    def c_1010(self) -> float:
        return float(self.rho_q[2, 2].real)

    @property
    def c_0110(self) -> float:
        return float(self.rho_q[1, 2].real)

    @property
    def population(self) -> float:
        return self.c_0101 + self.c_1010

    @property
    def coherence_rel(self) -> float:
        return self.c_0110 / self.c_0101 if self.c_0101 > 0 else 0.0

    @property
    def fidelity(self) -> float:
        return float(np.real(M0 @ self.rho_q @ M0))

    def row(self) -> dict:
        return {"p_select": self.p_select, "population": self.population,
                "coherence_rel": self.coherence_rel, "fidelity": self.fidelity}


def outcome_from_grams(GL, GR, povm, kept_mass=1.0, meta=None) -> JointOutcome:
    rho = joint_matrix(GL, GR, povm)
    tr = float(np.trace(rho).real)
    p_select = tr / 4
    if p_select < P_SELECT_FLOOR:
        raise PostSelectionError(f"post-selection impossible: p_select = {p_select:.3g}")
    rho = rho / tr
    rho = (rho + rho.conj().T) / 2
    return JointOutcome(p_select, rho, kept_mass, dict(meta or {}))


def joint_pipeline(branchL: BranchState, branchR: BranchState, povm: PhasePOVM) -> JointOutcome:
    """Measure, post-select outcome 1, disentangle both halves and trace out the MSS."""
    if branchL.n_spins + branchR.n_spins != povm.n_total:
        raise ValueError("branch sizes do not add up to the measured register")
    return outcome_from_grams(branch_gram(branchL), branch_gram(branchR), povm)


def _term_gram(circuit, n, b):
    psi1 = circuit.u1(basis_state(n, b))
    return spectrum_of(psi1).probs


def mixture_gram(mix, circuit, threads: int = 1) -> np.ndarray:
    """Probability-weighted Gram tensor of a diagonal mixture under a U_0 = 1 circuit.

    The Gram tensor is linear in the input density operator, so averaging the
    per-term tensors is exact. Terms are evaluated in parallel when
    ``threads > 1``; the reduction runs in the mixture order regardless.
    """
    n = mix.n_spins
    pc = popcounts(n)
    terms = list(mix)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            p1s = list(ex.map(lambda t: _term_gram(circuit, n, t[0]), terms))
    else:
        p1s = [_term_gram(circuit, n, b) for b, _ in terms]
    G = np.zeros((2, n + 1, 2, n + 1), dtype=complex)
    for (b, p), p1 in zip(terms, p1s):
        G += p * spectral_gram(int(pc[b]), p1)
    return G


def _same_mixture(a, b) -> bool:
    return a is b or (a.n_spins == b.n_spins and np.array_equal(a.bitmasks, b.bitmasks)
                      and np.array_equal(a.probs, b.probs))


def joint_pipeline_mixed(mixL, mixR, lattice, t: float, povm: PhasePOVM,
                         cfg: PropagatorConfig = DEFAULT_CONFIG, threads: int = 1,
                         stats: EvolveStats | None = None) -> JointOutcome:
    """Grade-raising pipeline for diagonal-mixture halves.

    Each basis term is magnified as a pure branch; its branch 0 is the basis
    state itself, whose magnetization shifts the measured sector.
    """
    from .magnification import GradeRaisingCircuit
    kept = min(mixL.kept_mass, mixR.kept_mass)
    if kept < KEPT_MASS_WARN:
        warnings.warn(f"mixture truncated: kept mass {kept:.8f}", TruncationWarning, stacklevel=2)
    circ = GradeRaisingCircuit(lattice, t, cfg)
    GL = mixture_gram(mixL, circ, threads)
    GR = GL if _same_mixture(mixL, mixR) else mixture_gram(mixR, circ, threads)
    if stats is not None:
        stats.merge(circ.stats)
    meta = {"terms_left": len(mixL), "terms_right": len(mixR),
            "kept_mass_left": mixL.kept_mass, "kept_mass_right": mixR.kept_mass}
    return outcome_from_grams(GL, GR, povm, kept, meta)
