import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesospin.hamiltonians import build_dipolar, build_grade_raising, build_xy, jz_diagonal
from mesospin.lattice import build_lattice
from mesospin.states import basis_state, popcounts

from conftest import random_state

UPDN, DNUP, UPUP, DNDN = 0b10, 0b01, 0b00, 0b11  # spin 0 is bit 0


def two_spin(builder):
    return builder(build_lattice([2])[1]).dense()


def test_dipolar_elements():
    H = two_spin(build_dipolar)
    assert H[UPDN, DNUP] == pytest.approx(-2)
    assert H[UPUP, UPUP] == pytest.approx(2)
    assert H[UPDN, UPDN] == pytest.approx(-2)


def test_xy_elements():
    H = build_xy(build_lattice([2])[1])
    assert np.allclose(H @ basis_state(2, UPDN), basis_state(2, DNUP))
    assert np.allclose(H @ basis_state(2, UPUP), 0)
    H3 = build_xy(build_lattice([3])[1]).dense()
    # |up up dn> has spin 2 down; |dn up up> has spin 0 down
    assert H3[0b100, 0b001] == pytest.approx(1 / 8)


def test_grade_raising_elements():
    H = build_grade_raising(build_lattice([2])[1])
    assert np.allclose(H @ basis_state(2, UPUP), basis_state(2, DNDN))
    assert np.allclose(H @ basis_state(2, UPDN), 0)


def test_builders_accept_lattice_objects():
    lat, tab = build_lattice([2, 2])
    a = build_grade_raising(tab).dense()
    assert np.array_equal(a, build_grade_raising(lat).dense())
    assert np.array_equal(a, build_grade_raising((lat, tab)).dense())


@pytest.mark.parametrize("builder", [build_dipolar, build_xy, build_grade_raising])
@pytest.mark.parametrize("dims", [[5], [2, 3]])
def test_hermitian_and_nnz(builder, dims):
    H = builder(build_lattice(dims)[1])
    d = H.dense()
    assert np.abs(d - d.conj().T).max() < 1e-14
    assert np.count_nonzero(d) <= H.nnz_bound()


@pytest.mark.parametrize("builder", [build_dipolar, build_xy])
def test_magnetization_conserving(builder, rng):
    H = builder(build_lattice([6])[1])
    jz = jz_diagonal(6)
    v = random_state(rng, 6)
    assert np.abs(H @ (jz * v) - jz * (H @ v)).max() < 1e-10


def test_grade_raising_changes_m_by_two(rng):
    n = 6
    H = build_grade_raising(build_lattice([n])[1]).dense()
    pc = popcounts(n)
    r, c = np.nonzero(H)
    assert np.all(np.abs(pc[r] - pc[c]) == 2)


@given(st.integers(2, 7), st.integers(0, 10_000))
def test_matrix_free_matches_csr(n, seed):
    rng = np.random.default_rng(seed)
    tab = build_lattice([n])[1]
    v = random_state(rng, n)
    for builder in (build_dipolar, build_xy, build_grade_raising):
        H = builder(tab)
        assert np.abs(H @ v - H.tocsr() @ v).max() < 1e-12
        assert np.vdot(v, H @ v).imag == pytest.approx(0, abs=1e-12)


def test_negation_and_blocks(rng):
    H = build_grade_raising(build_lattice([5])[1])
    v = random_state(rng, 5)
    assert np.allclose((-H) @ v, -(H @ v))
    rows, _ = H.blocks()
    assert len(rows) == 2 and sum(r.size for r in rows) == 32
    X = build_xy(build_lattice([5])[1])
    assert len(X.blocks()[0]) == 6


def test_dump_csv(tmp_path):
    H = build_xy(build_lattice([2])[1])
    H.dump_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[1] == "row,col,re,im"
    assert lines[2].startswith("1,2,1.0")
