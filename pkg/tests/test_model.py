from fractions import Fraction

import numpy as np
import pytest

from fastslow.fields import Algebraic
from fastslow.model import (FrequencyVector, FullState, SlowHamiltonianSpec,
                            eval_full_hamiltonian, fast_energy_norm, from_complex, h_nu,
                            h_omega, to_complex)


@pytest.fixture
def freq():
    return FrequencyVector.from_omega([10, 14])


def test_h_omega_examples(freq):
    assert h_omega([1, 0], [0, 0], freq) == 0.5
    assert h_omega([0, 0], [0, 0], freq) == 0.0
    assert h_omega([0, 1], [0.1, 0], freq) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        h_omega([1, 0, 0], [0, 0], freq)


def test_frequency_vector_sorting_and_scaling():
    fv = FrequencyVector.from_omega(["100*sqrt(2)", "100"])
    assert fv.omega[0] == 100.0
    assert fv.epsilon == 0.01
    assert fv.nu_exact == (Fraction(1), Algebraic.sqrt(2))
    assert fv.nu.min() == 1.0 and np.all(fv.nu >= 1)
    fr = FrequencyVector.from_ratios(["3/2", "1"], 0.05)
    assert np.allclose(fr.omega, [20.0, 30.0])
    with pytest.raises(ValueError):
        FrequencyVector.from_omega([1.0, -2.0])


def test_complex_round_trip_and_energy_identity():
    rng = np.random.default_rng(1)
    for _ in range(100):
        fv = FrequencyVector.from_ratios([1.0, *rng.uniform(1, 3, size=2)], rng.uniform(0.01, 0.2))
        p = rng.normal(size=3)
        q = rng.normal(size=3) / fv.omega
        c = to_complex(p, q, fv)
        assert np.allclose(c.eta, np.conj(c.xi))
        p2, q2 = from_complex(c.xi, c.eta, fv)
        assert np.max(np.abs(p2 - p)) < 1e-12 and np.max(np.abs(q2 - q)) < 1e-12
        eh = fv.epsilon * h_omega(p, q, fv)
        assert abs(h_nu(c.xi, c.eta, fv) - eh) <= 1e-12 * eh
        assert fast_energy_norm(c.xi, c.eta, fv) == pytest.approx(2 * eh, rel=1e-12)


def test_zero_maps_to_zero(freq):
    c = to_complex([0, 0], [0, 0], freq)
    assert np.all(c.xi == 0) and np.all(c.eta == 0)
    assert fast_energy_norm(c.xi, c.eta, freq) == 0


def test_norm_homogeneity(freq):
    xi = np.array([0.3 + 0.1j, -0.2j])
    base = fast_energy_norm(xi, np.conj(xi), freq)
    assert fast_energy_norm(3 * xi, 3 * np.conj(xi), freq) == pytest.approx(9 * base)


def test_full_hamiltonian():
    fv = FrequencyVector.from_omega([10, 14])
    dec = SlowHamiltonianSpec(2, 1, (("1/2", (2,), (0, 0)),))
    s = FullState([0, 0], [0, 0], [0.4], [0.2])
    assert eval_full_hamiltonian(s, fv, dec) == pytest.approx(0.5 * 0.16 + 0.5 * 0.04)
    assert eval_full_hamiltonian(FullState([0, 0], [0, 0], [0], [0]), fv, dec) == 0.0
    spec = SlowHamiltonianSpec(2, 1, (("1/2", (2,), (0, 0)), ("-3/4", (1,), (2, 1)), (2, (0,), (0, 3))))
    rng = np.random.default_rng(5)
    for _ in range(20):
        p, q = rng.normal(size=2), rng.normal(size=2)
        P, Q = rng.normal(size=1), rng.normal(size=1)
        naive = (0.5 * np.sum(p ** 2 + fv.omega ** 2 * q ** 2) + 0.5 * P[0] ** 2
                 + 0.5 * Q[0] ** 2 - 0.75 * Q[0] * q[0] ** 2 * q[1] + 2 * q[1] ** 3)
        val = eval_full_hamiltonian(FullState(p, q, P, Q), fv, spec)
        assert val == pytest.approx(naive, rel=1e-14, abs=1e-14)


def test_gradients_match_finite_differences():
    spec = SlowHamiltonianSpec(2, 1, (("1/2", (2,), (1, 0)), ("1/3", (3,), (0, 2)), ("1", (1,), (0, 0))))
    Q, q = np.array([0.7]), np.array([0.2, -0.4])
    gQ, gq = spec.gradients(Q, q)
    h = 1e-6
    assert gQ[0] == pytest.approx((spec.potential(Q + h, q) - spec.potential(Q - h, q)) / (2 * h), rel=1e-8)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (spec.potential(Q, q + e) - spec.potential(Q, q - e)) / (2 * h)
        assert gq[j] == pytest.approx(fd, rel=1e-8, abs=1e-10)


def test_spec_validation():
    with pytest.raises(ValueError):
        SlowHamiltonianSpec(2, 1, ((1, (2,), (1,)),))
    with pytest.raises(ValueError):
        SlowHamiltonianSpec(1, 1, (("sqrt(2)", (2,), (1,)),))
    with pytest.raises(ValueError):
        FullState([np.nan], [0], [0], [0])
    assert SlowHamiltonianSpec(1, 1, ((1, (2,), (0,)),)).is_decoupled
