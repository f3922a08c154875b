"""Sparse many-body Hamiltonians on a coupling table.

Operators are matrix-free: a numba kernel walks the rows of one symmetry
block and applies every pair term on the fly, so nothing of size nnz is
ever stored. Flip-flop and dipolar operators block-diagonalize over the
number of down spins; the grade-raising operator over its parity.

Pauli operators appear inside the Hamiltonians (eigenvalues +-1); sigma_+
clears a bit, sigma_- sets it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numba
import numpy as np
import scipy.sparse as sp

from .states import popcounts

XY, GR, DIP = 0, 1, 2
_KINDS = {"xy": XY, "gr": GR, "dip": DIP}
CSR_MAX_SPINS = 16


TILE = 2048


@numba.njit(cache=True, nogil=True)
def _apply_block(rows, local, x, masks, coefs, kind, scale, parity_local, out):
    # rows are processed in tiles with the pair loop inside, so the gathered
    # entries x[b ^ m] of one tile stay in cache
    n = rows.size
    for r in range(n):
        out[r] = 0.0
    for s in range(0, n, TILE):
        e = min(n, s + TILE)
        for p in range(masks.size):
            m = masks[p]
            a = coefs[p] * scale
            for r in range(s, e):
                b = rows[r]
                both = b & m
                aligned = both == 0 or both == m
                c = b ^ m
                if kind == GR:
                    # inside a parity block the local position of c is c >> 1
                    if aligned:
                        out[r] += a * x[(c >> 1) if parity_local else local[c]]
                elif kind == XY:
                    if not aligned:
                        out[r] += a * x[local[c]]
                elif aligned:
                    out[r] += 2.0 * a * x[r]
                else:
                    out[r] -= 2.0 * a * (x[r] + x[local[c]])


@dataclass(frozen=True)
class SparseOperator:
    n_spins: int
    kind: str
    masks: np.ndarray = field(repr=False)
    coefs: np.ndarray = field(repr=False)
    scale: float = 1.0

    def __neg__(self):
        return replace(self, scale=-self.scale)

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    @property
    def _code(self) -> int:
        return _KINDS[self.kind]

    def block_keys(self) -> np.ndarray:
        """Block label of every basis index."""
        pc = popcounts(self.n_spins)
        return pc & 1 if self.kind == "gr" else pc

    def blocks(self):
        """Sorted basis indices of each symmetry block, plus the local position map."""
        return _block_structure(self.n_spins, self.kind == "gr")

    def block_matvec(self, block: int):
        rows_list, local = self.blocks()
        rows = rows_list[block]
        code, masks, coefs, scale = self._code, self.masks, self.coefs, float(self.scale)

        def mv(x):
            out = np.empty(rows.size, dtype=complex)
            _apply_block(rows, local, np.ascontiguousarray(x, dtype=complex),
                         masks, coefs, code, scale, code == GR, out)
            return out
        return mv

    def full_matvec(self):
        """Matvec on the whole 2**n space, ignoring the block structure."""
        rows = np.arange(self.dim, dtype=np.int64)
        code, masks, coefs, scale = self._code, self.masks, self.coefs, float(self.scale)

        def mv(x):
            out = np.empty(rows.size, dtype=complex)
            _apply_block(rows, rows, np.ascontiguousarray(x, dtype=complex),
                         masks, coefs, code, scale, False, out)
            return out
        return mv

    def __matmul__(self, v):
        if len(v) != self.dim:
            raise ValueError(f"dimension mismatch: operator {self.dim}, vector {len(v)}")
        return self.full_matvec()(v)

    def nnz_bound(self) -> int:
        return len(self.coefs) * self.dim * 2 + self.dim

    def tocsr(self) -> sp.csr_matrix:
        if self.n_spins > CSR_MAX_SPINS:
            raise ValueError("explicit matrices are limited to 16 spins")
        n = self.n_spins
        states = np.arange(1 << n, dtype=np.int64)
        rows, cols, vals = [], [], []
        diag = np.zeros(1 << n)
        for m, a in zip(self.masks, self.coefs):
            both = states & m
            aligned = (both == 0) | (both == m)
            if self.kind == "gr":
                sel = states[aligned]
                rows.append(sel); cols.append(sel ^ m); vals.append(np.full(sel.size, a))
            elif self.kind == "xy":
                sel = states[~aligned]
                rows.append(sel); cols.append(sel ^ m); vals.append(np.full(sel.size, a))
            else:
                diag += np.where(aligned, 2.0 * a, -2.0 * a)
                sel = states[~aligned]
                rows.append(sel); cols.append(sel ^ m); vals.append(np.full(sel.size, -2.0 * a))
        rows.append(states); cols.append(states); vals.append(diag)
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(1 << n, 1 << n))
        mat.eliminate_zeros()
        return (self.scale * mat).astype(complex)

    def dense(self) -> np.ndarray:
        return self.tocsr().toarray()

    def dump_csv(self, path) -> None:
        """Upper triangle (col >= row) as (row, col, re, im)."""
        coo = sp.triu(self.tocsr()).tocoo()
        with open(path, "w", newline="") as fh:
            fh.write(f"# n_spins={self.n_spins} kind={self.kind}\n")
            w = csv.writer(fh)
            w.writerow(["row", "col", "re", "im"])
            for r, c, v in sorted(zip(coo.row, coo.col, coo.data)):
                w.writerow([int(r), int(c), repr(float(v.real)), repr(float(v.imag))])


_BLOCK_CACHE: dict = {}


def _block_structure(n: int, parity: bool):
    key = (n, parity)
    if key not in _BLOCK_CACHE:
        pc = popcounts(n)
        keys = pc & 1 if parity else pc
        order = np.argsort(keys, kind="stable")
        counts = np.bincount(keys, minlength=2 if parity else n + 1)
        rows = np.split(order, np.cumsum(counts)[:-1])
        local = np.empty(1 << n, dtype=np.int64)
        for r in rows:
            local[r] = np.arange(r.size)
        for r in rows:
            r.setflags(write=False)
        local.setflags(write=False)
        _BLOCK_CACHE[key] = (rows, local)
    return _BLOCK_CACHE[key]


def _as_table(obj):
    # accepts a CouplingTable, a Lattice, or the (Lattice, CouplingTable) pair
    from .lattice import Lattice, build_lattice
    if isinstance(obj, tuple):
        obj = obj[1]
    if isinstance(obj, Lattice):
        obj = build_lattice(obj.dims, obj.coupling_mode, obj.spacing)[1]
    return obj


def _build(kind, table) -> SparseOperator:
    table = _as_table(table)
    return SparseOperator(table.n_spins, kind,
                          np.ascontiguousarray(table.masks(), dtype=np.int64),
                          np.ascontiguousarray(table.strengths, dtype=float))


def build_dipolar(table) -> SparseOperator:
    """Secular dipolar coupling sum d_ij (2 Z_i Z_j - X_i X_j - Y_i Y_j)."""
    return _build("dip", table)


def build_xy(table) -> SparseOperator:
    """Flip-flop coupling sum a_ij (s+_i s-_j + s-_i s+_j)."""
    return _build("xy", table)


def build_grade_raising(table) -> SparseOperator:
    """Double-quantum coupling sum a_ij (s+_i s+_j + s-_i s-_j)."""
    return _build("gr", table)


def jz_diagonal(n: int) -> np.ndarray:
    return (n - 2 * popcounts(n)) / 2.0
