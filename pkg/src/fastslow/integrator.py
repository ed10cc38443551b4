"""Splitting integrator with exact fast rotation for ``h_omega + 1/2|P|^2 + V``.

One step is a half kick from ``V``, the exact flow of the harmonic part
(rotation of every ``(p_j, q_j)`` by ``omega_j*dt``) together with the free
drift ``Q += P*dt``, and a second half kick.

The compiled kernel stores the fast oscillators in the interaction picture
``w_j = exp(i omega_j t) (p_j - i omega_j q_j)``.  The rotation then leaves
``w`` untouched, so with a coupling independent of ``q`` the fast energy
``|w|^2/2`` is conserved to the last bit.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import FrequencyVector, FullState, SlowHamiltonianSpec, h_omega

SCHEMES = ("exact-fast-strang", "leapfrog-reference")
BLOWUP_THRESHOLD = 1e8
DEFAULT_STEPS_PER_PERIOD = 40

STATUS_OK = 0
STATUS_BLOWUP = 1


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    T: float
    sample_stride: int = 1
    scheme: str = "exact-fast-strang"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("T must be at least dt")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @classmethod
    def default(cls, freq: FrequencyVector, T: float, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                **kwargs) -> "IntegratorConfig":
        """``dt`` resolving the fastest oscillator with ``steps_per_period`` steps."""
        dt = 2 * math.pi / (steps_per_period * float(np.max(freq.omega)))
        return cls(dt=dt, T=max(T, dt), **kwargs)


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    h_fast: float
    h_total: float
    state: FullState | None = None


@dataclass
class Trajectory:
    """Sampled series of one run.

    ``max_abs_drift_fast``/``max_abs_drift_total`` are running maxima over
    every step, not only over the stored samples.
    """

    t: np.ndarray
    h_fast: np.ndarray
    h_total: np.ndarray
    final: FullState
    status: str
    steps_done: int
    max_abs_drift_fast: float
    max_abs_drift_total: float
    dt: float
    scheme: str
    message: str = ""
    snapshots: list = field(default_factory=list)

    def __len__(self):
        return self.t.size

    def __iter__(self):
        snaps = self.snapshots or [None] * len(self)
        for t, hf, ht, s in zip(self.t, self.h_fast, self.h_total, snaps):
            yield TrajectorySample(float(t), float(hf), float(ht), s)

    @property
    def samples(self) -> list:
        return list(self)

    @property
    def E(self) -> float:
        return float(self.h_fast[0])


# ---------------------------------------------------------------------------
# polynomial forces


@numba.njit(cache=True)
def _ipow(x, e):
    r = 1.0
    for _ in range(e):
        r *= x
    return r


@numba.njit(cache=True)
def _forces(Q, q, coef, eQ, eq, gQ, gq):
    """Fill ``gQ = dV/dQ`` and ``gq = dV/dq``; return ``V``."""
    d = Q.size
    n = q.size
    for k in range(d):
        gQ[k] = 0.0
    for j in range(n):
        gq[j] = 0.0
    V = 0.0
    for t in range(coef.size):
        c = coef[t]
        mono = c
        for k in range(d):
            mono *= _ipow(Q[k], eQ[t, k])
        for j in range(n):
            mono *= _ipow(q[j], eq[t, j])
        V += mono
        for k in range(d):
            e = eQ[t, k]
            if e == 0:
                continue
            g = c * e * _ipow(Q[k], e - 1)
            for kk in range(d):
                if kk != k:
                    g *= _ipow(Q[kk], eQ[t, kk])
            for j in range(n):
                g *= _ipow(q[j], eq[t, j])
            gQ[k] += g
        for j in range(n):
            e = eq[t, j]
            if e == 0:
                continue
            g = c * e * _ipow(q[j], e - 1)
            for jj in range(n):
                if jj != j:
                    g *= _ipow(q[jj], eq[t, jj])
            for k in range(d):
                g *= _ipow(Q[k], eQ[t, k])
            gq[j] += g
    return V


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True)
def _fast_q(w, omega, t, q):
    for j in range(w.size):
        ph = omega[j] * t
        # q = -Im(exp(-i omega t) w) / omega
        zi = math.cos(ph) * w[j].imag - math.sin(ph) * w[j].real
        q[j] = -zi / omega[j]


@numba.njit(cache=True)
def _kick_interaction(w, P, omega, t, h, gq, gQ):
    for j in range(w.size):
        ph = omega[j] * t
        w[j] += complex(math.cos(ph), math.sin(ph)) * (-gq[j] * h)
    for k in range(P.size):
        P[k] -= gQ[k] * h


@numba.njit(cache=True)
def _energies_interaction(w, P, V):
    hf = 0.0
    for j in range(w.size):
        hf += 0.5 * (w[j].real * w[j].real + w[j].imag * w[j].imag)
    hs = 0.0
    for k in range(P.size):
        hs += 0.5 * P[k] * P[k]
    return hf, hf + hs + V


@numba.njit(cache=True)
def _run_strang(w, P, Q, omega, t0, dt, nsteps, stride, coef, eQ, eq, threshold):
    n = w.size
    d = P.size
    q = np.empty(n)
    gq = np.empty(n)
    gQ = np.empty(d)
    nsamp = nsteps // stride + 1
    ts = np.empty(nsamp)
    hfs = np.empty(nsamp)
    hts = np.empty(nsamp)
    ys = np.empty((nsamp, 2 * n + 2 * d))
    _fast_q(w, omega, t0, q)
    V = _forces(Q, q, coef, eQ, eq, gQ, gq)
    hf0, ht0 = _energies_interaction(w, P, V)
    ts[0] = t0
    hfs[0] = hf0
    hts[0] = ht0
    _store_interaction(ys[0], w, P, Q)
    ns = 1
    mdf = 0.0
    mdt = 0.0
    half = 0.5 * dt
    for k in range(nsteps):
        t = t0 + k * dt
        _kick_interaction(w, P, omega, t, half, gq, gQ)
        for i in range(d):
            Q[i] += P[i] * dt
        t1 = t0 + (k + 1) * dt
        _fast_q(w, omega, t1, q)
        V = _forces(Q, q, coef, eQ, eq, gQ, gq)
        _kick_interaction(w, P, omega, t1, half, gq, gQ)
        hf, ht = _energies_interaction(w, P, V)
        df = abs(hf - hf0)
        dtot = abs(ht - ht0)
        if df > mdf:
            mdf = df
        if dtot > mdt:
            mdt = dtot
        bad = not (math.isfinite(hf) and math.isfinite(ht))
        for i in range(d):
            if not abs(Q[i]) <= threshold or not abs(P[i]) <= threshold:
                bad = True
        for j in range(n):
            if not abs(w[j]) <= threshold:
                bad = True
        if bad:
            return ts[:ns], hfs[:ns], hts[:ns], ys[:ns], k + 1, mdf, mdt, 1
        if (k + 1) % stride == 0:
            ts[ns] = t1
            hfs[ns] = hf
            hts[ns] = ht
            _store_interaction(ys[ns], w, P, Q)
            ns += 1
    return ts[:ns], hfs[:ns], hts[:ns], ys[:ns], nsteps, mdf, mdt, 0


@numba.njit(cache=True)
def _store_interaction(row, w, P, Q):
    # layout (Re w, Im w, P, Q); converted to (p, q) on the Python side
    n = w.size
    d = P.size
    for j in range(n):
        row[j] = w[j].real
        row[n + j] = w[j].imag
    for k in range(d):
        row[2 * n + k] = P[k]
        row[2 * n + d + k] = Q[k]


@numba.njit(cache=True)
def _store_real(row, p, q, P, Q):
    n = p.size
    d = P.size
    for j in range(n):
        row[j] = p[j]
        row[n + j] = q[j]
    for k in range(d):
        row[2 * n + k] = P[k]
        row[2 * n + d + k] = Q[k]


@numba.njit(cache=True)
def _run_leapfrog(p, q, P, Q, omega, t0, dt, nsteps, stride, coef, eQ, eq, threshold):
    n = p.size
    d = P.size
    gq = np.empty(n)
    gQ = np.empty(d)
    nsamp = nsteps // stride + 1
    ts = np.empty(nsamp)
    hfs = np.empty(nsamp)
    hts = np.empty(nsamp)
    ys = np.empty((nsamp, 2 * n + 2 * d))

    def energies(V):
        hf = 0.0
        for j in range(n):
            hf += 0.5 * (p[j] * p[j] + omega[j] * omega[j] * q[j] * q[j])
        hs = 0.0
        for k in range(d):
            hs += 0.5 * P[k] * P[k]
        return hf, hf + hs + V

    V = _forces(Q, q, coef, eQ, eq, gQ, gq)
    hf0, ht0 = energies(V)
    ts[0] = t0
    hfs[0] = hf0
    hts[0] = ht0
    _store_real(ys[0], p, q, P, Q)
    ns = 1
    mdf = 0.0
    mdt = 0.0
    half = 0.5 * dt
    for k in range(nsteps):
        for j in range(n):
            p[j] -= (omega[j] * omega[j] * q[j] + gq[j]) * half
        for i in range(d):
            P[i] -= gQ[i] * half
        for j in range(n):
            q[j] += p[j] * dt
        for i in range(d):
            Q[i] += P[i] * dt
        V = _forces(Q, q, coef, eQ, eq, gQ, gq)
        for j in range(n):
            p[j] -= (omega[j] * omega[j] * q[j] + gq[j]) * half
        for i in range(d):
            P[i] -= gQ[i] * half
        hf, ht = energies(V)
        df = abs(hf - hf0)
        dtot = abs(ht - ht0)
        if df > mdf:
            mdf = df
        if dtot > mdt:
            mdt = dtot
        bad = not (math.isfinite(hf) and math.isfinite(ht))
        for i in range(d):
            if not abs(Q[i]) <= threshold or not abs(P[i]) <= threshold:
                bad = True
        for j in range(n):
            if not abs(q[j]) <= threshold or not abs(p[j]) <= threshold:
                bad = True
        t1 = t0 + (k + 1) * dt
        if bad:
            return ts[:ns], hfs[:ns], hts[:ns], ys[:ns], k + 1, mdf, mdt, 1
        if (k + 1) % stride == 0:
            ts[ns] = t1
            hfs[ns] = hf
            hts[ns] = ht
            _store_real(ys[ns], p, q, P, Q)
            ns += 1
    return ts[:ns], hfs[:ns], hts[:ns], ys[:ns], nsteps, mdf, mdt, 0


# ---------------------------------------------------------------------------
# public API


def _check_state(state: FullState, freq: FrequencyVector, spec: SlowHamiltonianSpec):
    if state.p.size != freq.n or spec.n != freq.n or state.P.size != spec.d:
        raise ValueError("state, frequencies and system dimensions differ")


def _step_arrays(p, q, P, Q, omega, spec: SlowHamiltonianSpec, dt):
    """One Strang step on arrays; works for real and complex dtypes."""
    terms = spec.terms

    def grads(Q, q):
        gQ = [0 * Q[0]] * spec.d
        gq = [0 * q[0]] * spec.n
        for coeff, eQ, eq in terms:
            c = float(coeff)
            for k in range(spec.d):
                if eQ[k]:
                    g = c * eQ[k] * Q[k] ** (eQ[k] - 1)
                    for kk in range(spec.d):
                        if kk != k:
                            g = g * Q[kk] ** eQ[kk]
                    for j in range(spec.n):
                        g = g * q[j] ** eq[j]
                    gQ[k] = gQ[k] + g
            for j in range(spec.n):
                if eq[j]:
                    g = c * eq[j] * q[j] ** (eq[j] - 1)
                    for jj in range(spec.n):
                        if jj != j:
                            g = g * q[jj] ** eq[jj]
                    for k in range(spec.d):
                        g = g * Q[k] ** eQ[k]
                    gq[j] = gq[j] + g
        return np.array(gQ), np.array(gq)

    half = 0.5 * dt
    gQ, gq = grads(Q, q)
    p = p - gq * half
    P = P - gQ * half
    c = np.cos(omega * dt)
    s = np.sin(omega * dt)
    p, q = c * p - omega * s * q, s * p / omega + c * q
    Q = Q + P * dt
    gQ, gq = grads(Q, q)
    p = p - gq * half
    P = P - gQ * half
    return p, q, P, Q


def step(state: FullState, freq: FrequencyVector, spec: SlowHamiltonianSpec, dt: float) -> FullState:
    """One symmetric exact-fast splitting step (negative ``dt`` runs backwards)."""
    _check_state(state, freq, spec)
    if dt == 0:
        raise ValueError("dt must be nonzero")
    p, q, P, Q = _step_arrays(state.p, state.q, state.P, state.Q, freq.omega, spec, dt)
    return FullState(p, q, P, Q, state.t + dt)


def step_map(freq: FrequencyVector, spec: SlowHamiltonianSpec, dt: float):
    """The step as a map on the flat vector ``(p, q, P, Q)`` (any dtype)."""
    n, d = spec.n, spec.d

    def f(y):
        p, q, P, Q = _step_arrays(y[:n], y[n:2 * n], y[2 * n:2 * n + d], y[2 * n + d:],
                                  freq.omega, spec, dt)
        return np.concatenate([p, q, P, Q])
    return f


def to_interaction(state: FullState, freq: FrequencyVector) -> np.ndarray:
    w = freq.omega
    return np.exp(1j * w * state.t) * (state.p - 1j * w * state.q)


def from_interaction(wvec, P, Q, t, freq: FrequencyVector) -> FullState:
    w = freq.omega
    z = np.exp(-1j * w * t) * wvec
    return FullState(z.real, -z.imag / w, P, Q, t)


def integrate(state0: FullState, freq: FrequencyVector, spec: SlowHamiltonianSpec,
              cfg: IntegratorConfig, *, n_steps: int | None = None,
              keep_states: bool = False) -> Trajectory:
    """Integrate and sample every ``cfg.sample_stride`` steps.

    The run stops with status ``"blowup"`` when a coordinate exceeds
    ``BLOWUP_THRESHOLD`` (or becomes non-finite); samples up to that point are
    kept.  ``keep_states`` attaches a :class:`FullState` to every sample.
    """
    _check_state(state0, freq, spec)
    if spec.E_star and h_omega(state0.p, state0.q, freq) >= spec.E_star:
        warnings.warn("initial fast energy is not below E_star", RuntimeWarning, stacklevel=2)
    if spec.E0_star and spec.h0(state0.P, state0.Q, state0.q) >= spec.E0_star:
        warnings.warn("initial slow energy is not below E0_star", RuntimeWarning, stacklevel=2)
    nsteps = cfg.n_steps if n_steps is None else int(n_steps)
    coef, eQ, eq = spec.arrays()
    omega = np.ascontiguousarray(freq.omega, dtype=float)
    n, d = spec.n, spec.d
    P = state0.P.copy()
    Q = state0.Q.copy()
    interaction = cfg.scheme == "exact-fast-strang"
    if interaction:
        wv = to_interaction(state0, freq).astype(complex)
        ts, hf, ht, ys, done, mdf, mdt, code = _run_strang(
            wv, P, Q, omega, float(state0.t), float(cfg.dt), nsteps, int(cfg.sample_stride),
            coef, eQ, eq, BLOWUP_THRESHOLD)
        final = from_interaction(wv, P, Q, state0.t + done * cfg.dt, freq) if code == STATUS_OK else None
    else:
        p = state0.p.copy()
        q = state0.q.copy()
        ts, hf, ht, ys, done, mdf, mdt, code = _run_leapfrog(
            p, q, P, Q, omega, float(state0.t), float(cfg.dt), nsteps, int(cfg.sample_stride),
            coef, eQ, eq, BLOWUP_THRESHOLD)
        final = FullState(p, q, P, Q, state0.t + done * cfg.dt) if code == STATUS_OK else None
    snapshots = []
    if keep_states:
        for t, row in zip(ts, ys):
            if interaction:
                snapshots.append(from_interaction(row[:n] + 1j * row[n:2 * n], row[2 * n:2 * n + d],
                                                  row[2 * n + d:], t, freq))
            else:
                snapshots.append(FullState.from_vector(row, n, d, t))
    if final is None:
        # state at the last finite sample
        row = ys[-1]
        final = (from_interaction(row[:n] + 1j * row[n:2 * n], row[2 * n:2 * n + d], row[2 * n + d:],
                                  ts[-1], freq) if interaction else FullState.from_vector(row, n, d, ts[-1]))
    status = "ok" if code == STATUS_OK else "blowup"
    msg = "" if code == STATUS_OK else f"coordinate exceeded {BLOWUP_THRESHOLD:g} after {done} steps"
    return Trajectory(ts, hf, ht, final, status, int(done), float(mdf), float(mdt),
                      float(cfg.dt), cfg.scheme, msg, snapshots)


def max_drift(series) -> tuple[float, float]:
    """Return ``(max |h_fast(t) - h_fast(0)|, same divided by h_fast(0))``.

    Accepts a :class:`Trajectory` (using the running maximum over all steps)
    or any non-empty sequence of :class:`TrajectorySample`.
    """
    if isinstance(series, Trajectory):
        if len(series) == 0:
            raise ValueError("empty series")
        drift = max(series.max_abs_drift_fast,
                    float(np.max(np.abs(series.h_fast - series.h_fast[0]))))
        E = series.E
    else:
        series = list(series)
        if not series:
            raise ValueError("empty series")
        h = np.array([s.h_fast for s in series], dtype=float)
        drift = float(np.max(np.abs(h - h[0])))
        E = float(h[0])
    return drift, (drift / E if E else math.inf)


def write_csv(traj: Trajectory, path) -> None:
    """Columns ``t, h_fast, h_total, drift_fast, drift_total`` with 17 digits."""
    hf0 = traj.h_fast[0]
    ht0 = traj.h_total[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "h_fast", "h_total", "drift_fast", "drift_total"])
        for t, hf, ht in zip(traj.t, traj.h_fast, traj.h_total):
            w.writerow([f"{t:.17g}", f"{hf:.17g}", f"{ht:.17g}",
                        f"{hf - hf0:.17g}", f"{ht - ht0:.17g}"])


# ---------------------------------------------------------------------------
# reference solvers


def vector_field(freq: FrequencyVector, spec: SlowHamiltonianSpec):
    n, d = spec.n, spec.d
    w2 = freq.omega ** 2

    def f(y):
        p, q, P, Q = y[:n], y[n:2 * n], y[2 * n:2 * n + d], y[2 * n + d:]
        gQ, gq = spec.gradients(Q, q)
        return np.concatenate([-w2 * q - gq, p, -gQ, P])
    return f


def rk4_reference(state0: FullState, freq: FrequencyVector, spec: SlowHamiltonianSpec,
                  T: float, dt: float) -> FullState:
    """Classical fourth-order Runge-Kutta solution at time ``T``."""
    f = vector_field(freq, spec)
    y = state0.as_vector()
    nsteps = int(round(T / dt))
    for _ in range(nsteps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return FullState.from_vector(y, spec.n, spec.d, state0.t + nsteps * dt)


def convergence_slope(state0: FullState, freq: FrequencyVector, spec: SlowHamiltonianSpec,
                      T: float, dts, reference_divisor: int = 100) -> tuple[float, list]:
    """Log-log slope of the global error at ``T`` against ``dt``.

    The reference is RK4 at ``min(dts)/reference_divisor``.
    """
    dts = sorted(float(h) for h in dts)
    ref = rk4_reference(state0, freq, spec, T, dts[0] / reference_divisor).as_vector()
    errs = []
    for h in dts:
        s = state0
        for _ in range(int(round(T / h))):
            s = step(s, freq, spec, h)
        errs.append(float(np.max(np.abs(s.as_vector() - ref))))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return slope, errs
