import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from fastslow.integrator import (SCHEMES, IntegratorConfig, TrajectorySample, convergence_slope,
                                 from_interaction, integrate, max_drift, step, step_map,
                                 to_interaction, write_csv)
from fastslow.model import FrequencyVector, FullState, SlowHamiltonianSpec, eval_full_hamiltonian, h_omega

DECOUPLED = SlowHamiltonianSpec(2, 1, ((Fraction(1, 2), (2,), (0, 0)),), E_star=10, E0_star=10)


@pytest.fixture
def freq():
    return FrequencyVector.from_ratios(["1", "sqrt(2)"], 0.1)


@pytest.fixture
def s0():
    return FullState([0.6, -0.4], [0.03, 0.02], [0.2], [0.25])


def test_fast_oscillator_returns_after_period():
    fv = FrequencyVector.from_ratios(["1", "2"], 0.1)
    spec = SlowHamiltonianSpec(2, 1, (), E_star=10, E0_star=10)
    s0 = FullState([1.0, 0.5], [0.0, 0.01], [0.0], [0.0])
    period = 2 * math.pi / fv.omega[0]
    n = 64
    s = s0
    for _ in range(n):
        s = step(s, fv, spec, period / n)
    assert np.max(np.abs(s.as_vector()[:4] - s0.as_vector()[:4])) < 1e-12


def test_reversibility(coupled_system, freq, s0):
    s = s0
    for _ in range(2000):
        s = step(s, freq, coupled_system.spec, 0.003)
    for _ in range(2000):
        s = step(s, freq, coupled_system.spec, -0.003)
    assert np.max(np.abs(s.as_vector() - s0.as_vector())) < 1e-12
    with pytest.raises(ValueError):
        step(s0, freq, coupled_system.spec, 0.0)


def test_second_order_convergence(coupled_system, freq, s0):
    slope, errs = convergence_slope(s0, freq, coupled_system.spec, 0.5, [0.02, 0.01, 0.005])
    assert abs(slope - 2) < 0.1
    assert errs == sorted(errs)


def test_linear_system_closed_form(freq, s0):
    """Decoupled oscillators: exact fast flow, discrete closed form for the slow leapfrog."""
    h, n = 0.01, 1000
    s = s0
    for _ in range(n):
        s = step(s, freq, DECOUPLED, h)
    T = h * n
    w = freq.omega
    q_ex = s0.q * np.cos(w * T) + s0.p / w * np.sin(w * T)
    p_ex = s0.p * np.cos(w * T) - s0.q * w * np.sin(w * T)
    assert np.max(np.abs(s.q - q_ex)) < 1e-8 and np.max(np.abs(s.p - p_ex)) < 1e-8
    kick = np.array([[1.0, 0.0], [-h / 2, 1.0]])
    drift = np.array([[1.0, h], [0.0, 1.0]])
    M = np.linalg.matrix_power(kick @ drift @ kick, n)
    QP = M @ np.array([s0.Q[0], s0.P[0]])
    assert abs(s.Q[0] - QP[0]) < 1e-8 and abs(s.P[0] - QP[1]) < 1e-8


def test_symplectic_jacobian(coupled_system, freq, s0):
    f = step_map(freq, coupled_system.spec, 0.01)
    y = s0.as_vector()
    dim = y.size
    J = np.empty((dim, dim))
    hstep = 1e-30
    for k in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[k] = 1j * hstep
        J[:, k] = f(y + e).imag / hstep
    n, d = 2, 1
    Om = np.zeros((dim, dim))
    for j in range(n):
        Om[n + j, j], Om[j, n + j] = 1, -1
    for k in range(d):
        a, b = 2 * n + k, 2 * n + d + k
        Om[b, a], Om[a, b] = 1, -1
    assert np.max(np.abs(J.T @ Om @ J - Om)) < 1e-10


def test_interaction_round_trip(freq, s0):
    w = to_interaction(s0, freq)
    back = from_interaction(w, s0.P, s0.Q, s0.t, freq)
    assert np.allclose(back.as_vector(), s0.as_vector(), atol=1e-15)


def test_decoupled_fast_energy_is_constant(freq, s0):
    traj = integrate(s0, freq, DECOUPLED, IntegratorConfig.default(freq, 50.0, sample_stride=10))
    assert traj.status == "ok"
    assert traj.max_abs_drift_fast == 0.0
    assert max_drift(traj) == (0.0, 0.0)


def test_full_energy_conserved(coupled_system, freq, s0):
    traj = integrate(s0, freq, coupled_system.spec, IntegratorConfig.default(freq, 100.0, sample_stride=100))
    H0 = eval_full_hamiltonian(s0, freq, coupled_system.spec)
    assert traj.max_abs_drift_total / H0 < 1e-4


def test_drift_insensitive_to_step(coupled_system):
    fv = FrequencyVector.from_ratios(["1", "sqrt(2)"], 0.05)
    s0 = FullState([0.6, -0.4], [0.01, 0.01], [0.2], [0.25])
    drifts = []
    for spp in (40, 80):
        cfg = IntegratorConfig.default(fv, 400.0, spp, sample_stride=50)
        drifts.append(max_drift(integrate(s0, fv, coupled_system.spec, cfg))[0])
    assert abs(drifts[0] - drifts[1]) / drifts[1] < 0.1


def test_snapshots_recompute_energy(coupled_system, freq, s0):
    cfg = IntegratorConfig.default(freq, 5.0, sample_stride=20)
    traj = integrate(s0, freq, coupled_system.spec, cfg, keep_states=True)
    assert len(traj.snapshots) == len(traj)
    for sample in traj:
        st = sample.state
        assert h_omega(st.p, st.q, freq) == pytest.approx(sample.h_fast, rel=1e-14)
        assert eval_full_hamiltonian(st, freq, coupled_system.spec) == pytest.approx(sample.h_total, rel=1e-12)
        assert st.t == pytest.approx(sample.t)


def test_kernel_matches_python_step(coupled_system, freq, s0):
    cfg = IntegratorConfig(0.01, 1.0, sample_stride=100)
    traj = integrate(s0, freq, coupled_system.spec, cfg)
    s = s0
    for _ in range(100):
        s = step(s, freq, coupled_system.spec, 0.01)
    assert np.max(np.abs(traj.final.as_vector() - s.as_vector())) < 1e-12


def test_blowup_detected(freq):
    spec = SlowHamiltonianSpec(2, 1, ((-1, (4,), (0, 0)),), E_star=10, E0_star=10)
    s0 = FullState([0.1, 0.1], [0.0, 0.0], [1.0], [1.0])
    traj = integrate(s0, freq, spec, IntegratorConfig(0.01, 100.0, sample_stride=10))
    assert traj.status == "blowup"
    assert traj.steps_done < 10000
    assert np.all(np.isfinite(traj.h_fast))


def test_energy_bound_warning(coupled_system, freq):
    hot = FullState([3.0, 0.0], [0.0, 0.0], [0.0], [0.0])
    with pytest.warns(RuntimeWarning, match="E_star"):
        integrate(hot, freq, coupled_system.spec, IntegratorConfig(0.01, 0.1))


def test_schemes_agree(coupled_system, freq, s0):
    out = []
    for scheme in SCHEMES:
        cfg = IntegratorConfig(2 * math.pi / (200 * freq.omega.max()), 2.0, 50, scheme)
        out.append(integrate(s0, freq, coupled_system.spec, cfg))
    assert np.max(np.abs(out[0].final.as_vector() - out[1].final.as_vector())) < 1e-3
    assert np.max(np.abs(out[0].h_fast - out[1].h_fast)) < 1e-3


def test_max_drift_examples():
    samples = [TrajectorySample(0.0, 1.0, 1.0), TrajectorySample(1.0, 1.1, 1.0), TrajectorySample(2.0, 0.95, 1.0)]
    drift, rel = max_drift(samples)
    assert drift == pytest.approx(0.1) and rel == pytest.approx(0.1)
    assert max_drift([TrajectorySample(0.0, 2.0, 2.0)]) == (0.0, 0.0)
    with pytest.raises(ValueError):
        max_drift([])


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(0.1, 0.01)
    with pytest.raises(ValueError):
        IntegratorConfig(0.1, 1.0, sample_stride=0)
    with pytest.raises(ValueError):
        IntegratorConfig(0.1, 1.0, scheme="euler")
    fv = FrequencyVector.from_ratios(["1", "3/2"], 0.01)
    cfg = IntegratorConfig.default(fv, 10.0)
    assert cfg.dt == pytest.approx(2 * math.pi / (40 * 150))


def test_csv_output(tmp_path, coupled_system, freq, s0):
    traj = integrate(s0, freq, coupled_system.spec, IntegratorConfig(0.01, 1.0, sample_stride=10))
    path = tmp_path / "traj.csv"
    write_csv(traj, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "h_fast", "h_total", "drift_fast", "drift_total"]
    assert len(rows) == len(traj) + 1
    assert float(rows[1][1]) == traj.h_fast[0]
    assert float(rows[2][0]) == pytest.approx(0.1)
