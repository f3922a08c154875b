import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesospin.spectra import (Spectrum, binomial_spectrum, convolve, delta, distinctness_ratio,
                              distinguishable_margin, moments, read_spectra_csv, spectrum_of,
                              spectrum_of_mixture, write_spectra_csv)
from mesospin.states import (basis_state, dicke_state, mixed_polarized, polarized_state,
                             popcounts, tensor)

from conftest import random_state


def test_spectrum_examples():
    assert spectrum_of(polarized_state(12))[6] == 1.0
    assert spectrum_of(dicke_state(12, 6))[0] == pytest.approx(1.0)
    ghz = (basis_state(2, 0) + basis_state(2, 3)) / math.sqrt(2)
    assert spectrum_of(ghz).as_dict() == pytest.approx({1.0: 0.5, 0.0: 0.0, -1.0: 0.5})


def test_spectrum_matches_dense_projectors(rng):
    n = 6
    v = random_state(rng, n)
    pc = popcounts(n)
    for k in range(n + 1):
        proj = np.diag((pc == k).astype(float))
        assert spectrum_of(v).probs[k] == pytest.approx(np.vdot(v, proj @ v).real, abs=1e-14)


def test_moments_examples():
    assert moments(delta(12, 6)) == (6.0, 0.0)
    m, s = moments(binomial_spectrum(12, 0.5))
    assert m == pytest.approx(0, abs=1e-12) and s == pytest.approx(math.sqrt(12) / 2)
    mix = mixed_polarized(12, 0.2, cutoff=0.0)
    s = spectrum_of_mixture(mix, lambda b: spectrum_of(basis_state(12, b)))
    m, sd = moments(s)
    assert m == pytest.approx(4.8) and sd == pytest.approx(math.sqrt(12 * 0.1 * 0.9), abs=1e-9)
    assert sd == pytest.approx(1.0392, abs=1e-4)
    with pytest.raises(ValueError):
        moments(Spectrum(2, np.zeros(3)))


def test_mixture_of_untouched_is_shifted_binomial():
    n, eps = 10, 0.3
    mix = mixed_polarized(n, eps, cutoff=0.0)
    s = spectrum_of_mixture(mix, {b: spectrum_of(basis_state(n, b)) for b, _ in mix})
    assert np.allclose(s.probs, binomial_spectrum(n, 1 - eps / 2).probs)
    assert moments(s)[0] == pytest.approx((1 - eps) * n / 2)


def test_mixture_eps0_and_missing_term():
    mix = mixed_polarized(4, 0.0)
    s = spectrum_of(dicke_state(4, 1))
    assert np.array_equal(spectrum_of_mixture(mix, {0: s}).probs, s.probs)
    with pytest.raises(KeyError):
        spectrum_of_mixture(mixed_polarized(2, 0.5), {0: delta(2, 1)})


def test_convolution_examples():
    assert np.array_equal(convolve(delta(3, 1.5), delta(5, -0.5)).probs, delta(8, 1).probs)
    s = binomial_spectrum(7, 0.3)
    m, sd = moments(s)
    m2, sd2 = moments(convolve(s, s))
    assert m2 == pytest.approx(2 * m, abs=1e-10) and sd2 == pytest.approx(math.sqrt(2) * sd, abs=1e-10)
    assert np.array_equal(convolve(delta(12, 6), delta(12, 6)).probs, delta(24, 12).probs)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10**6))
def test_convolution_is_tensor_spectrum(n1, n2, seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng, n1), random_state(rng, n2)
    lhs = spectrum_of(tensor(a, b)).probs
    rhs = convolve(spectrum_of(a), spectrum_of(b)).probs
    assert np.abs(lhs - rhs).max() < 1e-12


def test_distinctness_examples():
    assert distinctness_ratio(delta(12, 6), delta(12, 6)) == 0
    assert distinctness_ratio(delta(16, 8), binomial_spectrum(16, 0.5)) == pytest.approx(4.0)
    assert distinctness_ratio(delta(2, 1), delta(2, 0)) == 1.0
    assert distinguishable_margin(delta(16, 8), binomial_spectrum(16, 0.5)) == pytest.approx(
        8 / ((1 + math.sqrt(2)) * 2))


def test_csv_roundtrip(tmp_path):
    spectra = {"P_psi0": delta(4, 2), "P_psi1": binomial_spectrum(4, 0.5)}
    write_spectra_csv(tmp_path / "s.csv", spectra, {"n_spins": 4, "protocol": "gr"})
    back = read_spectra_csv(tmp_path / "s.csv")
    assert np.array_equal(back["P_psi1"].probs, spectra["P_psi1"].probs)
    assert (tmp_path / "s.csv").read_text().splitlines()[1] == "m_z,P_psi0,P_psi1"


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum(2, [0.5, 0.5])
    with pytest.raises(ValueError):
        Spectrum(1, [1.5, -0.5])
    assert Spectrum(2, [0.2, 0.0, 0.2]).normalized().probs[0] == pytest.approx(0.5)
