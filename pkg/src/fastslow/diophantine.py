"""Simultaneous Dirichlet approximation and alpha-resonance bookkeeping."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import flint
import numpy as np

from .fields import Algebraic, abs_exceeds, parse_real, real_sign, real_to_fraction
from .model import FrequencyVector

# Budget constant of the drift estimate; alpha <= b*N/ALPHA_BUDGET_CONSTANT.
ALPHA_BUDGET_CONSTANT = 21
DEFAULT_SCAN_LIMIT = 1_000_000
_FIXED_BITS = 192


class DirichletError(RuntimeError):
    """Exhaustive search failed where existence is guaranteed (a bug)."""


class SearchBudgetExceeded(RuntimeError):
    """No admissible denominator below the configured scan limit."""


class CertificationError(RuntimeError):
    """A resonance-model invariant was violated."""


@dataclass(frozen=True)
class RationalApprox:
    qden: int
    pnums: tuple
    errors: tuple

    def as_fractions(self) -> tuple:
        return tuple(Fraction(p, self.qden) for p in self.pnums)


@dataclass(frozen=True)
class ResonanceModel:
    """Commensurable frequency ``nu_tilde`` and threshold ``alpha`` for order ``N``."""

    nu: tuple
    nu_tilde: tuple
    alpha: Fraction
    N: int
    qden: int
    b: Fraction | None = None

    @property
    def nu_float(self) -> np.ndarray:
        return np.array([_to_float(v) for v in self.nu])

    def is_resonant(self, k) -> bool:
        """``|nu . k| <= alpha`` decided exactly (or with certified balls)."""
        return not abs_exceeds(_dot(self.nu, k), self.alpha)

    def tilde_dot(self, k) -> Fraction:
        return sum((t * int(kj) for t, kj in zip(self.nu_tilde, k)), Fraction(0))


# ---------------------------------------------------------------------------
# exact helpers


def _to_float(x) -> float:
    if isinstance(x, flint.arb):
        return float(x.mid())
    return float(x)


def _uniform(values):
    """Bring a list of exact reals to one common type."""
    values = [parse_real(v) for v in values]
    fields = {v.D for v in values if isinstance(v, Algebraic) and v.D != 1}
    if len(fields) > 1 or any(isinstance(v, flint.arb) for v in values):
        out = []
        for v in values:
            if isinstance(v, flint.arb):
                out.append(v)
            elif isinstance(v, Algebraic):
                out.append(v.to_acb().real)
            else:
                out.append(flint.arb(flint.fmpq(v.numerator, v.denominator)))
        return out
    if any(isinstance(v, Algebraic) for v in values):
        return [Algebraic.coerce(v) for v in values]
    return [Fraction(v) for v in values]


def _dot(nu, k):
    acc = None
    for v, kj in zip(nu, k):
        term = v * int(kj)
        acc = term if acc is None else acc + term
    return acc


def _capped_ok(x, q: int, p: int, m: int, Qcap: int, strict: bool) -> bool:
    """``|q x - p| <= Qcap**(-1/m)`` (or ``<`` when strict), decided exactly."""
    dev = x * q - p
    s = real_sign(dev)
    if s == 0:
        return True
    dev = dev if s > 0 else -dev
    sign = real_sign(1 - dev ** m * Qcap)
    return sign > 0 if strict else sign >= 0


def _sequence_ok(x, q: int, p: int, m: int) -> bool:
    """``|x - p/q| <= q**(-1 - 1/m)``, i.e. ``|q x - p|**m * q <= 1``."""
    dev = x * q - p
    s = real_sign(dev)
    if s == 0:
        return True
    dev = dev if s > 0 else -dev
    return real_sign(1 - dev ** m * q) >= 0


def _nearest(x: Fraction) -> int:
    # round() on Fraction breaks ties to even
    return round(x)


def _approx_error(x, q: int, p: int) -> float:
    return abs(_to_float(x) - p / q) if not isinstance(x, Fraction) else float(abs(x - Fraction(p, q)))


# ---------------------------------------------------------------------------
# Dirichlet, capped denominator


def check_capped(ratios: Sequence, approx: RationalApprox, Qcap: int) -> bool:
    xs = _uniform(ratios)
    m = len(xs)
    return approx.qden <= Qcap and all(
        _capped_ok(x, approx.qden, p, m, Qcap, strict=False) for x, p in zip(xs, approx.pnums))


def dirichlet_capped(ratios: Sequence, Qcap: int) -> RationalApprox:
    """Smallest ``q <= Qcap`` with ``|r_j - p_j/q| <= 1/(q Qcap^(1/m))`` for all ``j``.

    Denominators giving a strict inequality (or an exact hit) are preferred;
    only if none exists is the boundary case accepted.
    """
    if Qcap < 2:
        raise ValueError("Qcap must be at least 2")
    xs = _uniform(ratios)
    m = len(xs)
    if m == 0:
        return RationalApprox(1, (), ())
    approx = [real_to_fraction(x, _FIXED_BITS) for x in xs]
    for strict in (True, False):
        for q in range(1, Qcap + 1):
            ps = [_nearest(a * q) for a in approx]
            if all(_capped_ok(x, q, p, m, Qcap, strict) for x, p in zip(xs, ps)):
                errs = tuple(_approx_error(x, q, p) for x, p in zip(xs, ps))
                return RationalApprox(q, tuple(ps), errs)
    raise DirichletError(f"no Dirichlet approximant found for {ratios} with Qcap={Qcap}")


# ---------------------------------------------------------------------------
# Dirichlet, uncapped (infinitely many solutions)


def _convergents(x: Fraction) -> Iterator[tuple[int, int]]:
    """Continued-fraction convergents ``(p, q)`` of a rational number."""
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    num, den = x.numerator, x.denominator
    while den:
        a, r = divmod(num, den)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield h1, k1
        num, den = den, r


def iter_dirichlet(nu: Sequence, scan_limit: int = DEFAULT_SCAN_LIMIT,
                   start: int = 2) -> Iterator[RationalApprox]:
    """Increasing denominators ``q >= start`` satisfying the uncapped bound.

    For a single ratio the continued-fraction convergents are produced (after an
    exact rational ratio runs out of convergents, its multiples follow).  For
    several ratios every admissible ``q`` is found by exhaustive scan.
    """
    xs = _uniform(nu)
    m = len(xs)
    if m == 0:
        raise ValueError("need at least one ratio")
    if m == 1:
        x = xs[0]
        exact = isinstance(x, Fraction)
        approx = x if exact else real_to_fraction(x, 4 * _FIXED_BITS)
        last_q = 0
        for p, q in _convergents(approx):
            if q > scan_limit:
                raise SearchBudgetExceeded(f"convergent denominators exceed {scan_limit}")
            if not exact and q * q > (1 << (2 * _FIXED_BITS)):
                raise SearchBudgetExceeded("continued fraction beyond working precision")
            if q < start or q <= last_q:
                continue
            if not _sequence_ok(x, q, p, 1):
                # only possible past the working precision of the approximation
                raise SearchBudgetExceeded("continued fraction beyond working precision")
            last_q = q
            yield RationalApprox(q, (p,), (_approx_error(x, q, p),))
        if exact:
            base = x.denominator
            mult = last_q // base + 1
            while mult * base <= scan_limit:
                q = mult * base
                yield RationalApprox(q, (x.numerator * mult,), (0.0,))
                mult += 1
        raise SearchBudgetExceeded(f"no further denominators below {scan_limit}")
    fixed = [real_to_fraction(x, _FIXED_BITS) for x in xs]
    for q in range(start, scan_limit + 1):
        ps = [_nearest(a * q) for a in fixed]
        # quick float screen, then exact confirmation
        bound = q ** (-1.0 / m) * (1 + 1e-9)
        if any(abs(float(a * q - p)) > bound for a, p in zip(fixed, ps)):
            continue
        if all(_sequence_ok(x, q, p, m) for x, p in zip(xs, ps)):
            yield RationalApprox(q, tuple(ps), tuple(_approx_error(x, q, p) for x, p in zip(xs, ps)))
    raise SearchBudgetExceeded(f"no further denominators below {scan_limit}")


def dirichlet_sequence(nu: Sequence, count: int,
                       scan_limit: int = DEFAULT_SCAN_LIMIT) -> list[RationalApprox]:
    if count < 1:
        raise ValueError("count must be positive")
    return list(itertools.islice(iter_dirichlet(nu, scan_limit), count))


def check_sequence_element(nu: Sequence, approx: RationalApprox) -> bool:
    xs = _uniform(nu)
    m = len(xs)
    return all(_sequence_ok(x, approx.qden, p, m) for x, p in zip(xs, approx.pnums))


# ---------------------------------------------------------------------------
# resonant frequencies


def build_resonant_omega(freq: FrequencyVector, Qcap: int):
    """Commensurable ``omega_tilde`` near ``omega`` and the quadratic correction.

    Returns ``(omega_tilde, h1_coeffs)`` with ``h1_coeffs_j = (omega_j^2 -
    omega_tilde_j^2)/2``.  The flow of ``h_omega_tilde`` has period
    ``2*pi*epsilon*qden``.
    """
    approx = dirichlet_capped(freq.nu_exact[1:], Qcap)
    w1 = freq.omega[0]
    omega_tilde = np.empty(freq.n)
    omega_tilde[0] = w1
    for j, p in enumerate(approx.pnums, start=1):
        omega_tilde[j] = w1 * p / approx.qden
    h1 = (freq.omega ** 2 - omega_tilde ** 2) / 2
    return omega_tilde, h1


def _alpha_upper(N: int, q: int, m: int) -> Fraction:
    """Rational upper bound of ``N / q**(1 + 1/m)``, exact when ``q`` is an m-th power."""
    K = 1 << 64
    root = _iroot(q * K ** m, m)
    return Fraction(N * K, q * root)


def _iroot(x: int, m: int) -> int:
    """Floor of the integer m-th root."""
    if m == 1:
        return x
    r = int(round(x ** (1.0 / m))) if x < (1 << 1000) else 1 << (x.bit_length() // m)
    while r ** m > x:
        r -= 1
    while (r + 1) ** m <= x:
        r += 1
    return r


def build_resonance_model(nu: Sequence, N: int, b, *,
                          budget_constant: int = ALPHA_BUDGET_CONSTANT,
                          scan_limit: int = DEFAULT_SCAN_LIMIT) -> ResonanceModel:
    """Scan Dirichlet denominators until ``alpha_q = N/q^(1+1/(n-1))`` is admissible.

    Admissible means ``alpha_q <= 1/(2^n N^(n-1))`` (so every ``k`` with
    ``|k|_1 <= N`` and ``nu_tilde.k != 0`` has ``|nu.k| > alpha_q``) and
    ``alpha_q <= b N / budget_constant``.  Both model invariants are then
    verified by enumeration.
    """
    if N < 1:
        raise ValueError("N must be positive")
    b = Fraction(b) if not isinstance(b, str) else Fraction(b)
    if b <= 0:
        raise ValueError("b must be positive")
    xs = _uniform(nu)
    if real_sign(xs[0] - 1) != 0:
        raise ValueError("nu must be normalized with nu_1 = 1")
    n = len(xs)
    cap_budget = b * N / budget_constant
    if n == 1:
        alpha = min(Fraction(1, 2), cap_budget)
        model = ResonanceModel(tuple(xs), (Fraction(1),), alpha, N, 1, b)
        verify_resonance_model(model)
        return model
    m = n - 1
    cap_separation = Fraction(1, 2 ** n * N ** (n - 1))
    for approx in iter_dirichlet(xs[1:], scan_limit):
        alpha = _alpha_upper(N, approx.qden, m)
        if alpha <= cap_separation and alpha <= cap_budget:
            nu_tilde = (Fraction(1),) + approx.as_fractions()
            model = ResonanceModel(tuple(xs), nu_tilde, alpha, N, approx.qden, b)
            verify_resonance_model(model)
            return model
    raise SearchBudgetExceeded("unreachable")  # iter_dirichlet raises first


def integer_vectors(n: int, N: int) -> Iterator[tuple]:
    """All nonzero ``k`` in Z^n with ``|k|_1 <= N``."""
    for k in itertools.product(range(-N, N + 1), repeat=n):
        s = sum(abs(c) for c in k)
        if 0 < s <= N:
            yield k


def verify_resonance_model(model: ResonanceModel) -> None:
    """Raise :class:`CertificationError` unless both invariants hold exactly."""
    nu, N, alpha = model.nu, model.N, model.alpha
    for v, t in zip(nu, model.nu_tilde):
        if abs_exceeds(v - t if not isinstance(v, flint.arb) else v - flint.arb(
                flint.fmpq(t.numerator, t.denominator)), alpha / N):
            raise CertificationError(f"|nu_tilde - nu| exceeds alpha/N at {t}")
    for k in integer_vectors(len(nu), N):
        if model.tilde_dot(k) != 0 and not abs_exceeds(_dot(nu, k), alpha):
            raise CertificationError(f"k={k}: nu_tilde.k != 0 but |nu.k| <= alpha")


def is_alpha_resonant(l, m, nu, alpha) -> bool:
    """``|nu . (l - m)| <= alpha``; exact when ``nu`` and ``alpha`` are exact."""
    k = [int(a) - int(c) for a, c in zip(l, m)]
    if len(k) != len(nu):
        raise ValueError("dimension mismatch")
    if all(isinstance(v, float) or isinstance(v, np.floating) for v in nu) or isinstance(alpha, float):
        return abs(float(np.dot(np.asarray(nu, dtype=float), k))) <= float(alpha)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return not abs_exceeds(_dot(_uniform(nu), k), Fraction(alpha))
