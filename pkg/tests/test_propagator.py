import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesospin.hamiltonians import build_dipolar, build_grade_raising, build_xy
from mesospin.lattice import build_lattice
from mesospin.propagator import (EvolveStats, PropagationError, PropagatorConfig, evolve,
                                 evolve_dense_oracle)
from mesospin.spectra import spectrum_of
from mesospin.states import basis_state

from conftest import random_state

BUILDERS = [build_dipolar, build_xy, build_grade_raising]


def test_two_spin_rabi():
    H = build_xy(build_lattice([2])[1])
    v = basis_state(2, 0b10)
    t = 0.3
    out = evolve(H, t, v)
    assert out[0b10] == pytest.approx(math.cos(t), abs=1e-12)
    assert out[0b01] == pytest.approx(-1j * math.sin(t), abs=1e-12)
    out = evolve(H, math.pi / 2, v)
    assert np.allclose(out, -1j * basis_state(2, 0b01), atol=1e-12)


def test_zero_time_and_reversibility(rng):
    H = build_grade_raising(build_lattice([7])[1])
    v = random_state(rng, 7)
    assert np.array_equal(evolve(H, 0.0, v), v)
    back = evolve(H, 2.7, evolve(H, -2.7, v))
    assert np.abs(back - v).max() < 1e-8


@given(st.integers(0, 2), st.integers(2, 8), st.floats(-6.0, 6.0), st.integers(0, 10**6))
def test_oracle_agreement(kind, n, t, seed):
    rng = np.random.default_rng(seed)
    H = BUILDERS[kind](build_lattice([n])[1])
    v = random_state(rng, n)
    out = evolve(H, t, v)
    assert np.linalg.norm(out - evolve_dense_oracle(H, t, v)) < 1e-8
    assert abs(np.linalg.norm(out) - 1) < 1e-9


@pytest.mark.parametrize("builder", [build_dipolar, build_xy])
def test_spectrum_conserved(builder, rng):
    H = builder(build_lattice([3, 2])[1])
    v = random_state(rng, 6)
    assert spectrum_of(evolve(H, 4.0, v)).tv_distance(spectrum_of(v)) < 1e-10


@pytest.mark.parametrize("builder", BUILDERS)
def test_sector_matches_full_space(builder, rng):
    H = builder(build_lattice([7])[1])
    v = random_state(rng, 7)
    assert np.abs(evolve(H, 1.9, v) - evolve(H, 1.9, v, sectors=False)).max() < 1e-10


def test_diagonal_hamiltonian_oracle(rng):
    # a single dipolar pair is diagonal on aligned states
    H = build_dipolar(build_lattice([2])[1])
    v = basis_state(2, 0) * 0.6 + basis_state(2, 3) * 0.8
    out = evolve_dense_oracle(H, 0.7, v)
    assert np.allclose(out, np.exp(-1j * 2 * 0.7) * v)


def test_stats_and_determinism(rng):
    H = build_dipolar(build_lattice([8])[1])
    v = random_state(rng, 8)
    st1, st2 = EvolveStats(), EvolveStats()
    a = evolve(H, 5.0, v, stats=st1)
    b = evolve(H, 5.0, v, stats=st2)
    assert np.array_equal(a, b)
    assert st1.substeps > 0 and st1.matvecs > 0
    assert st1.error_estimate <= PropagatorConfig().tol * st1.substeps


def test_errors(rng):
    H = build_xy(build_lattice([4])[1])
    with pytest.raises(ValueError):
        evolve(H, 1.0, np.ones(8))
    with pytest.raises(ValueError):
        evolve(H, math.inf, random_state(rng, 4))
    with pytest.raises(PropagationError):
        evolve(H, 50.0, random_state(rng, 4), PropagatorConfig(krylov_dim=4, max_substeps=2))
    with pytest.raises(ValueError):
        PropagatorConfig(krylov_dim=1)
    with pytest.raises(ValueError):
        evolve_dense_oracle(build_xy(build_lattice([11])[1]), 1.0, np.ones(2048))
