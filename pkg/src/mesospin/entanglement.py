"""Entanglement quantifiers and single-particle loss.

All logarithms are base 2. Dense eigensolves are capped at 2**12.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import M0
from .states import BranchState, n_spins_of, partial_transpose

DENSE_DIM_CAP = 1 << 12
EIG_FLOOR = 1e-9
P_FLOOR = 1e-15


def fidelity_m0(rho_q: np.ndarray) -> float:
    """Overlap with (|01> + |10>)/sqrt 2."""
    rho_q = np.asarray(rho_q)
    if rho_q.shape != (4, 4):
        raise ValueError("expected a two-qubit density matrix")
    return float(np.real(M0 @ rho_q @ M0))


def _check_dim(rho):
    if rho.shape[0] > DENSE_DIM_CAP:
        raise ValueError(f"dimension {rho.shape[0]} exceeds dense cap {DENSE_DIM_CAP}")


def negativity(rho: np.ndarray, split) -> float:
    """Sum of |negative eigenvalues| of the partial transpose over ``split``.

    ``split`` lists the qubit indices (bit positions) that are transposed.
    """
    rho = np.asarray(rho)
    _check_dim(rho)
    pt = partial_transpose(rho, split, n_spins_of(rho))
    lam = np.linalg.eigvalsh((pt + pt.conj().T) / 2)
    return float(-lam[lam < 0].sum())


def log_negativity(rho: np.ndarray, split) -> float:
    return math.log2(2 * negativity(rho, split) + 1)


def von_neumann_entropy(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    _check_dim(rho)
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    lam = np.where((lam < 0) & (lam > -EIG_FLOOR), 0.0, lam)
    if np.any(lam < 0):
        raise ValueError(f"density matrix has eigenvalue {lam.min():.3g}")
    lam = lam[lam > P_FLOOR]
    return float(-(lam * np.log2(lam)).sum())


def _entropy_2x2(rho) -> float:
    lam = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    lam = lam[lam > P_FLOOR]
    return float(-(lam * np.log2(lam)).sum())


def qubit_entropy(x0: np.ndarray, x1: np.ndarray) -> float:
    """Entanglement entropy of (|0>x0 + |1>x1) (normalized internally), qubit vs rest."""
    g = np.array([[np.vdot(x0, x0), np.vdot(x1, x0)],
                  [np.vdot(x0, x1), np.vdot(x1, x1)]])
    tr = g.trace().real
    if tr <= P_FLOOR:
        return 0.0
    return _entropy_2x2(g / tr)


def micro_macro_density(mix, apply_u1, n_spins: int) -> np.ndarray:
    """Qubit (x) MSS density matrix for a diagonal mixture under a U_0 = 1 circuit.

    rho = 1/2 sum_b p_b (|0>|b> + |1>U_1|b>)(...)^dagger; the qubit is the
    highest bit. ``apply_u1`` maps an MSS vector to U_1 times it.
    """
    d = 1 << n_spins
    if 2 * d > DENSE_DIM_CAP:
        raise ValueError(f"dimension {2 * d} exceeds dense cap {DENSE_DIM_CAP}")
    W = np.zeros((2 * d, len(mix)), dtype=complex)
    for col, (b, p) in enumerate(mix):
        e = np.zeros(d, dtype=complex)
        e[b] = 1.0
        amp = math.sqrt(p / 2)
        W[:d, col] = amp * e
        W[d:, col] = amp * apply_u1(e)
    return W @ W.conj().T


# --------------------------------------------------------------------------
# particle loss

@dataclass
class LossOutcome:
    lost_index: int
    p_up: float
    p_down: float
    e_up: float
    e_down: float

    @property
    def e_p(self) -> float:
        return self.p_up * self.e_up + self.p_down * self.e_down


def lose_particle(branch: BranchState, a: int) -> LossOutcome:
    """Condition the qubit (x) MSS state on spin ``a`` being up or down.

    The ensemble {(p_s, |psi_s>)} is the z-basis decomposition of the state
    left after spin ``a`` escapes; each conditional pure state contributes
    the entropy of its qubit marginal.
    """
    n = branch.n_spins
    if not 0 <= a < n:
        raise IndexError(f"spin {a} out of range for {n} spins")
    norm = (np.vdot(branch.psi0, branch.psi0) + np.vdot(branch.psi1, branch.psi1)).real / 2
    if abs(norm - 1) > 1e-8:
        raise ValueError("branch state is not normalized")
    down = (np.arange(1 << n) >> a) & 1 == 1
    probs, ents = [], []
    for sel in (~down, down):
        x0, x1 = branch.psi0[sel], branch.psi1[sel]
        probs.append(float((np.vdot(x0, x0) + np.vdot(x1, x1)).real / 2))
        ents.append(qubit_entropy(x0, x1))
    return LossOutcome(a, probs[0], probs[1], ents[0], ents[1])


def mean_loss_entropy(branch: BranchState) -> float:
    """e_p averaged uniformly over the lost spin."""
    return float(np.mean([lose_particle(branch, a).e_p for a in range(branch.n_spins)]))


def _h(p):
    return 0.0 if p <= 0.0 or p >= 1.0 else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def ep_closed_form(r_up: float) -> float:
    """E_p for psi_0 polarized and psi_1 a Dicke state with up fraction r_up.

    Losing an up spin (probability (1 + r)/2) leaves a qubit marginal with
    eigenvalue 1/(1 + r); a down spin leaves a product state.
    """
    if not 0.0 <= r_up <= 1.0:
        raise ValueError(f"r_up must be in [0, 1], got {r_up}")
    return (1 + r_up) / 2 * _h(1 / (1 + r_up))


def up_amplitudes(psi1: np.ndarray) -> np.ndarray:
    """|alpha_a|^2 = probability that spin a is up in psi_1."""
    n = n_spins_of(psi1)
    w = np.abs(psi1) ** 2
    idx = np.arange(1 << n)
    return np.array([w[((idx >> a) & 1) == 0].sum() for a in range(n)])


@dataclass
class LossBound:
    per_spin: np.ndarray    # (1 + |alpha_a|^2)/2 over all spins of both halves
    mean: float             # average of per_spin
    linear_form: float      # 1/2 + sum_a |alpha_a| / (2N)


def loss_fidelity_bound(branchL: BranchState, branchR: BranchState) -> LossBound:
    alpha2 = np.concatenate([up_amplitudes(branchL.psi1), up_amplitudes(branchR.psi1)])
    per = (1 + alpha2) / 2
    return LossBound(per, float(per.mean()),
                     float(0.5 + np.sqrt(alpha2).sum() / (2 * alpha2.size)))


def mean_zero_balance(psi1: np.ndarray) -> float:
    """sum_a |alpha_a|^2 - sum_a |beta_a|^2, which equals 2 <J_z>."""
    a2 = up_amplitudes(psi1)
    return float(a2.sum() - (1 - a2).sum())


__all__ = ["fidelity_m0", "negativity", "log_negativity", "von_neumann_entropy",
           "qubit_entropy", "micro_macro_density", "LossOutcome", "lose_particle",
           "mean_loss_entropy", "ep_closed_form", "up_amplitudes", "LossBound",
           "loss_fidelity_bound", "mean_zero_balance"]
