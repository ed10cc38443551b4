"""Fast-slow oscillator system: frequencies, states, energies, complex coordinates.

The Hamiltonian is ``h_omega(p, q) + 1/2 |P|^2 + V(Q, q)`` with

    h_omega(p, q) = sum_j (p_j^2 + omega_j^2 q_j^2) / 2 .

Complex fast coordinates use the convention

    xi_j = (p_j - i omega_j q_j) / sqrt(2 omega_j),   eta_j = conj(xi_j),

so that ``sum_j nu_j xi_j eta_j == epsilon * h_omega`` and ``{xi_j, eta_j} = i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import flint
import numpy as np

from .fields import Algebraic, parse_real, real_to_float


def _exact_div(a, b):
    if isinstance(a, flint.arb) or isinstance(b, flint.arb):
        to_arb = lambda x: x if isinstance(x, flint.arb) else (
            x.to_acb().real if isinstance(x, Algebraic) else
            flint.arb(flint.fmpq(Fraction(x).numerator, Fraction(x).denominator)))
        return to_arb(a) / to_arb(b)
    if isinstance(a, Algebraic) or isinstance(b, Algebraic):
        return Algebraic.coerce(a) / Algebraic.coerce(b)
    return Fraction(a) / Fraction(b)


@dataclass(frozen=True)
class FrequencyVector:
    """Fast frequencies sorted ascending, with ``epsilon = 1/min(omega)``.

    ``nu_exact`` keeps the dimensionless frequencies ``nu = epsilon*omega`` in
    exact (or certified ball) form; ``nu_exact[0] == 1``.
    """

    omega: np.ndarray
    nu_exact: tuple = field(compare=False)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 1 or omega.size == 0:
            raise ValueError("omega must be a non-empty vector")
        if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
            raise ValueError("frequencies must be finite and positive")
        if np.any(np.diff(omega) < 0):
            raise ValueError("omega must be sorted ascending (use a constructor)")
        if len(self.nu_exact) != omega.size:
            raise ValueError("nu_exact length mismatch")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def from_omega(cls, omega: Sequence) -> "FrequencyVector":
        """Build from fast frequencies given as numbers or exact expressions."""
        exact = [parse_real(w) for w in omega]
        values = [real_to_float(w) for w in exact]
        order = sorted(range(len(values)), key=values.__getitem__)
        exact = [exact[k] for k in order]
        nu = [_exact_div(w, exact[0]) for w in exact]
        nu[0] = Fraction(1)
        return cls(np.array([values[k] for k in order]), tuple(nu))

    @classmethod
    def from_ratios(cls, ratios: Sequence, epsilon: float) -> "FrequencyVector":
        """Build ``omega = ratios/epsilon``; ratios are normalized so min is 1."""
        exact = [parse_real(r) for r in ratios]
        values = [real_to_float(r) for r in exact]
        order = sorted(range(len(values)), key=values.__getitem__)
        exact = [exact[k] for k in order]
        nu = [_exact_div(r, exact[0]) for r in exact]
        nu[0] = Fraction(1)
        nu_f = np.array([real_to_float(v) for v in nu])
        return cls(nu_f / epsilon, tuple(nu))

    @property
    def n(self) -> int:
        return self.omega.size

    @property
    def epsilon(self) -> float:
        return 1.0 / self.omega[0]

    @property
    def nu(self) -> np.ndarray:
        nu = self.omega * self.epsilon
        nu[0] = 1.0
        return nu


@dataclass
class FullState:
    p: np.ndarray
    q: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("p", "q", "P", "Q"):
            setattr(self, name, np.array(getattr(self, name), dtype=float))
        if self.p.shape != self.q.shape or self.P.shape != self.Q.shape:
            raise ValueError("conjugate variables must have equal dimensions")
        if not all(np.all(np.isfinite(getattr(self, k))) for k in ("p", "q", "P", "Q")):
            raise ValueError("state has non-finite entries")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.q, self.P, self.Q])

    @classmethod
    def from_vector(cls, y: np.ndarray, n: int, d: int, t: float = 0.0) -> "FullState":
        return cls(y[:n], y[n:2 * n], y[2 * n:2 * n + d], y[2 * n + d:], t)


@dataclass(frozen=True)
class ComplexFastState:
    xi: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class SlowHamiltonianSpec:
    """``H0 = 1/2 |P|^2 + V(Q, q)`` with polynomial ``V``.

    ``terms`` holds ``(coeff, Q_exponents, q_exponents)`` triples with exact
    rational coefficients.
    """

    n: int
    d: int
    terms: tuple
    E_star: float = 1.0
    E0_star: float = 1.0

    def __post_init__(self):
        clean = []
        for coeff, eQ, eq in self.terms:
            eQ = tuple(int(e) for e in eQ)
            eq = tuple(int(e) for e in eq)
            if len(eQ) != self.d or len(eq) != self.n:
                raise ValueError(f"term exponents {eQ}, {eq} do not match (d={self.d}, n={self.n})")
            if min(eQ + eq, default=0) < 0:
                raise ValueError("negative exponent")
            coeff = parse_real(coeff)
            if not isinstance(coeff, Fraction):
                raise ValueError("potential coefficients must be rational")
            if coeff != 0:
                clean.append((coeff, eQ, eq))
        object.__setattr__(self, "terms", tuple(clean))

    @property
    def is_decoupled(self) -> bool:
        return all(sum(eq) == 0 for _, _, eq in self.terms)

    def arrays(self):
        """Float coefficient vector and integer exponent matrices (for kernels)."""
        m = len(self.terms)
        coef = np.array([float(c) for c, _, _ in self.terms], dtype=float).reshape(m)
        eQ = np.array([e for _, e, _ in self.terms], dtype=np.int64).reshape(m, self.d)
        eq = np.array([e for _, _, e in self.terms], dtype=np.int64).reshape(m, self.n)
        return coef, eQ, eq

    def potential(self, Q, q) -> float:
        Q = np.asarray(Q, dtype=float)
        q = np.asarray(q, dtype=float)
        coef, eQ, eq = self.arrays()
        if coef.size == 0:
            return 0.0
        return float(np.sum(coef * np.prod(Q ** eQ, axis=1) * np.prod(q ** eq, axis=1)))

    def gradients(self, Q, q) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(dV/dQ, dV/dq)``."""
        Q = np.asarray(Q, dtype=float)
        q = np.asarray(q, dtype=float)
        gQ = np.zeros(self.d)
        gq = np.zeros(self.n)
        for coeff, eQ, eq in self.terms:
            c = float(coeff)
            for k in range(self.d):
                if eQ[k]:
                    e = list(eQ)
                    e[k] -= 1
                    gQ[k] += c * eQ[k] * np.prod(Q ** np.array(e)) * np.prod(q ** np.array(eq))
            for k in range(self.n):
                if eq[k]:
                    e = list(eq)
                    e[k] -= 1
                    gq[k] += c * eq[k] * np.prod(Q ** np.array(eQ)) * np.prod(q ** np.array(e))
        return gQ, gq

    def h0(self, P, Q, q) -> float:
        P = np.asarray(P, dtype=float)
        return 0.5 * float(P @ P) + self.potential(Q, q)


def _check_dims(p, q, freq: FrequencyVector):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (freq.n,) or q.shape != (freq.n,):
        raise ValueError(f"expected fast vectors of length {freq.n}, got {p.shape} and {q.shape}")
    return p, q


def h_omega(p, q, freq: FrequencyVector) -> float:
    p, q = _check_dims(p, q, freq)
    return 0.5 * float(np.sum(p * p + freq.omega ** 2 * q * q))


def to_complex(p, q, freq: FrequencyVector) -> ComplexFastState:
    p, q = _check_dims(p, q, freq)
    w = freq.omega
    xi = (p - 1j * w * q) / np.sqrt(2 * w)
    return ComplexFastState(xi, np.conj(xi))


def from_complex(xi, eta, freq: FrequencyVector) -> tuple[np.ndarray, np.ndarray]:
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    if xi.shape != (freq.n,) or eta.shape != (freq.n,):
        raise ValueError("dimension mismatch")
    w = freq.omega
    p = np.sqrt(w / 2) * (xi + eta)
    q = 1j * (xi - eta) / np.sqrt(2 * w)
    return p.real, q.real


def h_nu(xi, eta, freq: FrequencyVector) -> complex:
    """``sum_j nu_j xi_j eta_j`` (real for states coming from real ``(p, q)``)."""
    return complex(np.sum(freq.nu * np.asarray(xi) * np.asarray(eta)))


def fast_energy_norm(xi, eta, freq: FrequencyVector) -> float:
    """Squared norm ``sum_j nu_j (|xi_j|^2 + |eta_j|^2)``."""
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    return float(np.sum(freq.nu * (np.abs(xi) ** 2 + np.abs(eta) ** 2)))


def eval_full_hamiltonian(state: FullState, freq: FrequencyVector,
                          spec: SlowHamiltonianSpec) -> float:
    if state.p.size != spec.n or state.P.size != spec.d:
        raise ValueError("state dimensions do not match the system")
    return h_omega(state.p, state.q, freq) + spec.h0(state.P, state.Q, state.q)
