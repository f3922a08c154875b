import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesospin.lattice import CouplingMode, Lattice, build_lattice


def test_nearest_neighbour_normalization():
    _, tab = build_lattice([2])
    assert tab[(0, 1)] == pytest.approx(1.0)


def test_next_nearest_in_chain():
    _, tab = build_lattice([3])
    assert tab[(0, 2)] == pytest.approx(1 / 8)


def test_square_diagonal():
    lat, tab = build_lattice([2, 2])
    # corners (0,0) and (1,1) are spins 0 and 3 in C order
    assert tab[(0, 3)] == pytest.approx(1 / math.sqrt(2) ** 3, abs=1e-12)
    assert tab[(0, 3)] == pytest.approx(0.35355, abs=1e-5)


@pytest.mark.parametrize("L", [1, 2, 5, 12])
def test_pair_counts(L):
    assert len(build_lattice([L])[1]) == L * (L - 1) // 2
    assert len(build_lattice([L], CouplingMode.NN)[1]) == max(L - 1, 0)


def test_nn_entries_are_unit_and_adjacent():
    lat, tab = build_lattice([3, 4], "nn")
    pos = lat.positions
    for (i, j), a in tab.entries.items():
        assert a == 1.0
        assert np.linalg.norm(pos[i] - pos[j]) == pytest.approx(1.0)
    assert len(tab) == 3 * 3 + 2 * 4


@pytest.mark.parametrize("dims", [[], [0], [5, 5], [25]])
def test_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        build_lattice(dims)


def test_contact_is_corner():
    lat, _ = build_lattice([4, 5])
    assert lat.contact == 0
    assert np.all(lat.positions[0] == 0)
    assert lat.n_spins == 20


@given(st.lists(st.integers(1, 4), min_size=1, max_size=3).filter(lambda d: np.prod(d) <= 24))
def test_couplings_positive_and_inverse_cube(dims):
    lat, tab = build_lattice(dims)
    pos = lat.positions
    for (i, j), a in tab.entries.items():
        assert i < j and a > 0
        assert a == pytest.approx(np.linalg.norm(pos[i] - pos[j]) ** -3)


def test_translation_invariance():
    _, tab = build_lattice([6])
    assert tab[(0, 2)] == pytest.approx(tab[(3, 5)])
    _, tab2 = build_lattice([3, 3])
    assert tab2[(0, 4)] == pytest.approx(tab2[(4, 8)])


def test_spacing_only_sets_length_unit():
    lat, tab = build_lattice([3], spacing=2.0)
    assert lat.positions[1, 0] == 2.0
    assert tab[(0, 1)] == pytest.approx(1.0)
    assert tab[(0, 2)] == pytest.approx(1 / 8)
