import math

import numpy as np
import pytest

from mesospin.lattice import Lattice
from mesospin.magnification import (Transcript, gr_trajectory, magnify_gr, magnify_xy,
                                    transient_metric, transient_order)
from mesospin.spectra import distinctness_ratio, moments, spectrum_of
from mesospin.states import dicke_state, flip, polarized_state

from conftest import random_state


def test_xy_zero_rounds(rng):
    v = random_state(rng, 4)
    b = magnify_xy(Lattice((4,)), 0.3, 0, v).branch
    assert np.allclose(b.psi0, v) and np.allclose(b.psi1, v)


def test_xy_single_spin():
    b = magnify_xy(Lattice((1,)), 0.77, 1).branch
    assert np.allclose(b.psi0, [1, 0]) and np.allclose(np.abs(b.psi1), [0, 1])


def test_xy_branch0_stays_polarized():
    b = magnify_xy(Lattice((6,)), math.pi, 12).branch
    assert spectrum_of(b.psi0)[3] == pytest.approx(1.0)
    assert spectrum_of(b.psi1).weight == pytest.approx(1.0)


def test_xy_undo_inverts(rng):
    res = magnify_xy(Lattice((5,)), 0.9, 3)
    b = res.branch
    v = polarized_state(5)
    assert np.allclose(b.undo(0, b.psi0), v, atol=1e-9)
    assert np.allclose(b.undo(1, b.psi1), v, atol=1e-9)


def test_xy_transcript_length():
    res = magnify_xy(Lattice((4,)), 1.0, 5, record=True)
    assert len(res.transcript) == 6
    assert res.transcript.means[0] == 2.0


def test_gr_zero_time(rng):
    v = random_state(rng, 5)
    b = magnify_gr(Lattice((5,)), 0.0, v).branch
    assert np.allclose(b.psi1, flip(v, 0))


def test_gr_branch0_bitwise(rng):
    v = random_state(rng, 6)
    for t in (0.0, 1.3, 9.0):
        b = magnify_gr(Lattice((3, 2)), t, v).branch
        assert np.array_equal(b.psi0, v)
        assert b.identity_branch0


def test_gr_u1_self_inverse():
    res = magnify_gr(Lattice((6,)), 4.0)
    b = res.branch
    assert np.allclose(b.undo(1, b.psi1), polarized_state(6), atol=1e-9)


def test_gr_parity_of_spectrum():
    nh = 8
    s = spectrum_of(magnify_gr(Lattice((nh,)), 2 * math.pi * nh).branch.psi1)
    k = np.arange(nh + 1)
    assert np.all(s.probs[k % 2 == 0] < 1e-20)


@pytest.mark.slow
def test_gr_distinctness_grows():
    ratios = []
    for nh in (12, 16):
        b = magnify_gr(Lattice((nh,)), 2 * math.pi * nh).branch
        ratios.append(distinctness_ratio(spectrum_of(b.psi0), spectrum_of(b.psi1)))
    assert ratios[0] < ratios[-1]


def test_input_validation():
    with pytest.raises(ValueError):
        magnify_gr(Lattice((3,)), 1.0, np.ones(8))
    with pytest.raises(ValueError):
        magnify_xy(Lattice((3,)), 1.0, -1)
    with pytest.raises(ValueError):
        magnify_gr(Lattice((3,)), 1.0, polarized_state(4))


def test_transient_metric_sentinel_and_errors():
    tr = Transcript(8, np.linspace(0, 1, 5), np.full(5, 4.0), np.zeros(5))
    assert transient_metric(tr) == math.inf
    tr = Transcript(8, np.array([0.0, 0.5, 1.0]), np.array([4.0, 2.5, 1.0]), np.zeros(3))
    assert transient_metric(tr) == 1.0
    with pytest.raises(ValueError):
        transient_metric(Transcript(8, np.array([]), np.array([]), np.array([])))


def test_trajectory_consistent_with_magnify():
    lat = Lattice((6,))
    tr = gr_trajectory(lat, 3.0, 4)
    m, s = moments(spectrum_of(magnify_gr(lat, 3.0).branch.psi1))
    assert tr.means[-1] == pytest.approx(m, abs=1e-9) and tr.sds[-1] == pytest.approx(s, abs=1e-9)
    assert tr.means[0] == pytest.approx(2.0)


def test_trajectory_stops():
    lat = Lattice((3, 3))
    full = gr_trajectory(lat, 4.0, 17)
    cut = gr_trajectory(lat, 4.0, 17, stop_below=lat.n_spins / 4)
    assert len(cut) <= len(full)
    assert transient_metric(cut) == transient_metric(full)
    assert len(gr_trajectory(lat, 4.0, 17, t_stop=1.0)) == 5


def test_nn_chain_never_magnifies():
    # nearest-neighbour double-quantum chains are free-fermion: psi1 stays one flip away
    tr = gr_trajectory(Lattice((8,), 1.0, "nn"), 20.0, 9)
    assert np.allclose(tr.means, 3.0, atol=1e-9)


def test_transient_order_small():
    t2d, t1d = transient_order(Lattice((3, 3)), Lattice((9,)), 12.0, 25)
    assert t2d < t1d
