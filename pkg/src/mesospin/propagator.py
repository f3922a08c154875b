"""exp(-iHt) v by Lanczos projection with adaptive substeps.

Each substep builds an orthonormal Krylov basis of dimension ``krylov_dim``
(full reorthogonalization, two Gram-Schmidt passes), diagonalizes the
projected tridiagonal matrix, and takes the longest step tau whose
a posteriori residual estimate

    beta * h_{m+1,m} * |e_m^T exp(-i tau T_m) e_1|

stays under ``tol``. The basis does not depend on tau, so shrinking a
rejected step only costs a small exponential.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

DENSE_ORACLE_MAX_SPINS = 10


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropagatorConfig:
    krylov_dim: int = 30
    tol: float = 1e-10
    max_substeps: int = 10**6

    def __post_init__(self):
        if not 2 <= self.krylov_dim <= 100:
            raise ValueError("krylov_dim must be in [2, 100]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class EvolveStats:
    substeps: int = 0
    matvecs: int = 0
    error_estimate: float = 0.0

    def merge(self, other: "EvolveStats") -> "EvolveStats":
        self.substeps += other.substeps
        self.matvecs += other.matvecs
        self.error_estimate += other.error_estimate
        return self


DEFAULT_CONFIG = PropagatorConfig()


def _lanczos(matvec, v, m, stats):
    beta = np.linalg.norm(v)
    basis = np.empty((m + 1, v.size), dtype=complex)
    basis[0] = v / beta
    h = np.zeros((m + 1, m), dtype=complex)
    for j in range(m):
        w = matvec(basis[j])
        stats.matvecs += 1
        for _ in range(2):
            c = basis[:j + 1].conj() @ w
            w -= c @ basis[:j + 1]
            h[:j + 1, j] += c
        nrm = np.linalg.norm(w)
        h[j + 1, j] = nrm
        if nrm <= 1e-12 * max(1.0, abs(h[j, j])):
            return beta, basis[:j + 1], h[:j + 1, :j + 1], 0.0
        basis[j + 1] = w / nrm
    return beta, basis[:m], h[:m, :m], float(h[m, m - 1].real)


def _propagate(matvec, v, t, cfg, stats):
    """Evolve one block-local vector for time t (either sign)."""
    if t == 0.0 or not np.any(v):
        return v.copy()
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    m = min(cfg.krylov_dim, v.size)
    w = v.astype(complex, copy=True)
    while remaining > 0.0:
        if stats.substeps >= cfg.max_substeps:
            raise PropagationError(
                f"no convergence within {cfg.max_substeps} substeps; "
                f"{remaining:.3g} of {abs(t):.3g} time units left, "
                f"accumulated error {stats.error_estimate:.3g}")
        beta, basis, hm, h_next = _lanczos(matvec, w, m, stats)
        k = basis.shape[0]
        herm = (hm + hm.conj().T) / 2
        lam, q = la.eigh(herm)
        shift = 0.5 * (lam[0] + lam[-1])
        lam_c = lam - shift
        q0 = q[0].conj()

        def coeffs(tau):
            return q @ (np.exp(-1j * sign * tau * lam_c) * q0)

        if h_next == 0.0:
            tau, err = remaining, 0.0
        else:
            spread = max(lam_c[-1], 1e-300)
            tau = min(remaining, k / spread)
            while True:
                y = coeffs(tau)
                err = beta * h_next * abs(y[-1])
                if err <= cfg.tol:
                    break
                tau *= max(0.1, min(0.9, 0.9 * (cfg.tol / err) ** (1.0 / k)))
                if tau < 1e-14 * abs(t):
                    raise PropagationError(f"step size underflow at remaining={remaining:.3g}")
        y = coeffs(tau) * np.exp(-1j * sign * tau * shift)
        w = beta * (y @ basis)
        remaining -= tau
        if remaining < 1e-13 * abs(t):
            remaining = 0.0
        stats.substeps += 1
        stats.error_estimate += err
    return w


def evolve(H, t: float, v: np.ndarray, cfg: PropagatorConfig = DEFAULT_CONFIG,
           *, sectors: bool = True, stats: EvolveStats | None = None) -> np.ndarray:
    """Return exp(-i H t) v.

    With ``sectors`` (default) every symmetry block of ``H`` carrying weight
    is propagated separately; otherwise the full space is used.
    Pass an :class:`EvolveStats` to collect substep counts and the summed
    local error estimate.
    """
    v = np.asarray(v)
    if v.ndim != 1 or len(v) != H.dim:
        raise ValueError(f"dimension mismatch: operator {H.dim}, vector {v.shape}")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    stats = EvolveStats() if stats is None else stats
    if not sectors:
        return _propagate(H.full_matvec(), v, float(t), cfg, stats)
    out = np.zeros(v.size, dtype=complex)
    rows, _ = H.blocks()
    for blk, idx in enumerate(rows):
        part = v[idx]
        if not np.any(part):
            continue
        out[idx] = _propagate(H.block_matvec(blk), part, float(t), cfg, stats)
    return out


def evolve_dense_oracle(H, t: float, v: np.ndarray) -> np.ndarray:
    """Reference exp(-iHt) v from a full eigendecomposition (test use only)."""
    if H.n_spins > DENSE_ORACLE_MAX_SPINS:
        raise ValueError(f"dense oracle limited to {DENSE_ORACLE_MAX_SPINS} spins")
    if len(v) != H.dim:
        raise ValueError("dimension mismatch")
    lam, vecs = np.linalg.eigh(H.dense())
    return vecs @ (np.exp(-1j * lam * t) * (vecs.conj().T @ v))
