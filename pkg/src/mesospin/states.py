"""Computational-basis states, density operators and their bookkeeping.

Conventions: spin i lives in bit i of the basis index, bit value 1 means
spin down. Magnetization of a basis state b over n spins is
(n - 2 popcount(b)) / 2.

State vectors are plain complex numpy arrays of length 2**n.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import csv
import itertools
import math

import numpy as np

MAX_SPINS = 24
DENSE_MAX_SPINS = 11


def n_spins_of(v) -> int:
    n = int(np.log2(len(v)))
    if 1 << n != len(v):
        raise ValueError(f"length {len(v)} is not a power of two")
    return n


@lru_cache(maxsize=32)
def _popcounts(n: int) -> np.ndarray:
    pc = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        pc[1 << i:1 << (i + 1)] = pc[:1 << i] + 1
    pc.setflags(write=False)
    return pc


def popcounts(n: int) -> np.ndarray:
    """Number of down spins of every basis index (read-only)."""
    return _popcounts(int(n))


def magnetization(b, n: int):
    """J_z eigenvalue of basis index (or index array) b."""
    return (n - 2 * popcounts(n)[b]) / 2


def _check_n(n):
    if not 1 <= n <= MAX_SPINS:
        raise ValueError(f"n must be in [1, {MAX_SPINS}], got {n}")


def basis_state(n: int, b: int) -> np.ndarray:
    _check_n(n)
    v = np.zeros(1 << n, dtype=complex)
    v[b] = 1.0
    return v


def polarized_state(n: int) -> np.ndarray:
    """All spins up."""
    return basis_state(n, 0)


def dicke_state(n: int, k: int) -> np.ndarray:
    """Symmetric state with k spins down."""
    _check_n(n)
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    v = (popcounts(n) == k).astype(complex)
    return v / math.sqrt(math.comb(n, k))


def flip(v: np.ndarray, spin: int) -> np.ndarray:
    """Apply sigma_x to one spin."""
    n = n_spins_of(v)
    if not 0 <= spin < n:
        raise IndexError(f"spin {spin} out of range for {n} spins")
    return v[np.arange(v.size) ^ (1 << spin)]


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Tensor product with the first factor on the lowest bits."""
    out = np.ones(1, dtype=complex)
    for f in factors:
        out = np.kron(f, out)
    return out


def tensor_ops(*factors: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(f, out)
    return out


def projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


@dataclass
class BranchState:
    """Qubit-controlled MSS state (|0>|psi0> + |1>|psi1>)/sqrt(2).

    ``undo(k, v)`` applies the inverse of the conditional unitary U_k to an
    MSS vector; it is needed whenever the disentangling step cannot be
    reduced to spectral sums. ``identity_branch0`` marks circuits with
    U_0 = 1.
    """
    psi0: np.ndarray
    psi1: np.ndarray
    undo: object = field(default=None, repr=False)
    identity_branch0: bool = False

    def __post_init__(self):
        if self.psi0.shape != self.psi1.shape:
            raise ValueError("branches live on different registers")

    @property
    def n_spins(self) -> int:
        return n_spins_of(self.psi0)

    def joint(self) -> np.ndarray:
        """Full qubit (x) MSS vector; the qubit is the highest bit."""
        return np.concatenate([self.psi0, self.psi1]) / math.sqrt(2)


@dataclass
class DiagonalMixture:
    """sum_b p_b |b><b| stored as parallel arrays, highest weight first."""
    n_spins: int
    bitmasks: np.ndarray
    probs: np.ndarray
    kept_mass: float = 1.0

    @property
    def discarded_mass(self) -> float:
        return 1.0 - self.kept_mass

    def __len__(self):
        return len(self.probs)

    def __iter__(self):
        return zip(self.bitmasks.tolist(), self.probs.tolist())

    def dense(self) -> np.ndarray:
        if self.n_spins > DENSE_MAX_SPINS:
            raise ValueError("dense density operators are limited to 11 spins")
        rho = np.zeros((1 << self.n_spins,) * 2, dtype=complex)
        rho[self.bitmasks, self.bitmasks] = self.probs
        return rho


def mixed_polarized(n: int, eps: float, cutoff: float = 1e-6) -> DiagonalMixture:
    """Product state ((1-eps/2)|up><up| + eps/2 |dn><dn|)^{(x) n}.

    Terms are kept in order of decreasing probability (ties by bitmask)
    until the retained mass reaches 1 - cutoff; the kept terms are
    renormalized and the retained mass is recorded.
    """
    _check_n(n)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must be in [0, 1], got {eps}")
    p_up, p_dn = 1.0 - eps / 2, eps / 2
    class_p = np.array([p_up ** (n - k) * p_dn ** k for k in range(n + 1)])
    order = sorted(range(n + 1), key=lambda k: (-class_p[k], k))
    masks, probs = [], []
    mass = 0.0
    for k in order:
        if class_p[k] <= 0.0 or mass >= 1.0 - cutoff:
            break
        members = sorted(sum(1 << i for i in c) for c in itertools.combinations(range(n), k))
        need = 1.0 - cutoff - mass
        take = min(len(members), max(1, math.ceil(need / class_p[k] - 1e-9)))
        masks.extend(members[:take])
        probs.extend([class_p[k]] * take)
        mass += take * class_p[k]
    probs = np.array(probs)
    kept = float(probs.sum())
    return DiagonalMixture(n, np.array(masks, dtype=np.int64), probs / kept, min(kept, 1.0))


def _axes(n, spins):
    # numpy reshape puts bit n-1 on axis 0
    return [n - 1 - s for s in spins]


def _check_subset(n, idx):
    idx = sorted(set(int(i) for i in idx))
    if any(i < 0 or i >= n for i in idx):
        raise ValueError(f"index set {idx} invalid for {n} spins")
    return idx


def partial_trace(rho: np.ndarray, keep, n: int | None = None) -> np.ndarray:
    """Reduce an n-spin density matrix to the spins in ``keep``."""
    n = n_spins_of(rho) if n is None else n
    keep = _check_subset(n, keep)
    drop = [s for s in range(n) if s not in keep]
    t = rho.reshape([2] * (2 * n))
    # kept spins ordered so that the result follows the same bit convention
    keep_hi = sorted(keep, reverse=True)
    row_axes = _axes(n, keep_hi)
    drop_axes = _axes(n, drop)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for a in drop_axes:
        col[a] = row[a]
    out = [row[a] for a in row_axes] + [col[a] for a in row_axes]
    red = np.einsum("".join(row + col) + "->" + "".join(out), t)
    d = 1 << len(keep)
    return red.reshape(d, d)


def partial_transpose(rho: np.ndarray, subsystem, n: int | None = None) -> np.ndarray:
    n = n_spins_of(rho) if n is None else n
    subsystem = _check_subset(n, subsystem)
    t = rho.reshape([2] * (2 * n))
    perm = list(range(2 * n))
    for a in _axes(n, subsystem):
        perm[a], perm[a + n] = perm[a + n], perm[a]
    return t.transpose(perm).reshape(rho.shape)


def write_state_csv(path, v: np.ndarray) -> None:
    n = n_spins_of(v)
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_spins={n}\n")
        w = csv.writer(fh)
        w.writerow(["bitmask", "re", "im"])
        for b in np.flatnonzero(v):
            w.writerow([int(b), repr(float(v[b].real)), repr(float(v[b].imag))])


def read_state_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline()
        n = int(header.split("n_spins=")[1])
        rows = list(csv.DictReader(fh))
    v = np.zeros(1 << n, dtype=complex)
    for r in rows:
        v[int(r["bitmask"])] = float(r["re"]) + 1j * float(r["im"])
    return v
