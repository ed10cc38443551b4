"""Graded polynomials in (xi, eta, P, Q) with explicit sqrt(epsilon) powers.

A monomial is ``c * sqrt(eps)**a * xi**l * eta**m * P**u * Q**v``.  The stored
``a`` is the full power of ``sqrt(eps)``; the order of a monomial is

    s = (a - 2) + |l| + |m| ,

so the quadratic oscillator ``h_nu`` has order 0 and brackets obey

    {P_s1, P_s2} in P_{s1+s2} (+) P_{s1+s2+2}.

Keys are flat integer tuples ``(a, l..., m..., u..., v...)``; iteration and
serialization use their lexicographic order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import flint
import numpy as np

from .fields import Algebraic, BallField, ExactField, is_zero, to_complex


@dataclass(frozen=True, eq=False)
class Frame:
    """Variable layout and fast bracket constants ``{xi_j, eta_j} = brackets[j]``.

    ``xi_scale[j]`` converts physical complex coordinates into the frame's
    variables (``x_j = xi_scale[j] * xi_j``); it is 1 for the standard frame.
    """

    n: int
    d: int
    field: object
    brackets: tuple
    xi_scale: tuple

    @classmethod
    def standard(cls, n: int, d: int, field=None) -> "Frame":
        field = field or ExactField()
        return cls(n, d, field, (field.I,) * n, (1.0,) * n)

    @classmethod
    def scaled(cls, nu: Iterable, d: int, field) -> "Frame":
        """Frame with ``x_j = xi_j / sqrt(2 nu_j)``, so ``q_j = i sqrt(eps) (x_j - y_j)``.

        The bracket constants become ``{x_j, y_j} = i/(2 nu_j)``.
        """
        nu = [field(v) for v in nu]
        brackets = tuple(field.I / (2 * v) for v in nu)
        scale = tuple(1.0 / math.sqrt(2 * to_complex(v).real) for v in nu)
        return cls(len(nu), d, field, brackets, scale)

    def compatible(self, other: "Frame") -> bool:
        if self is other:
            return True
        return (self.n == other.n and self.d == other.d
                and [str(c) for c in self.brackets] == [str(c) for c in other.brackets])

    @property
    def key_length(self) -> int:
        return 1 + 2 * self.n + 2 * self.d

    def key(self, a, l=None, m=None, u=None, v=None) -> tuple:
        z_n = (0,) * self.n
        z_d = (0,) * self.d
        parts = (tuple(l or z_n), tuple(m or z_n), tuple(u or z_d), tuple(v or z_d))
        if [len(p) for p in parts] != [self.n, self.n, self.d, self.d]:
            raise ValueError("exponent vector length mismatch")
        return (int(a),) + parts[0] + parts[1] + parts[2] + parts[3]

    def split(self, key: tuple):
        n, d = self.n, self.d
        return (key[0], key[1:1 + n], key[1 + n:1 + 2 * n],
                key[1 + 2 * n:1 + 2 * n + d], key[1 + 2 * n + d:])

    def order(self, key: tuple) -> int:
        return key[0] - 2 + sum(key[1:1 + 2 * self.n])

    def lm_difference(self, key: tuple) -> tuple:
        n = self.n
        return tuple(key[1 + j] - key[1 + n + j] for j in range(n))


class GradedPolynomial:
    """Immutable polynomial stored as ``{key: coefficient}`` without zeros."""

    __slots__ = ("frame", "terms", "_orders")

    def __init__(self, frame: Frame, terms: dict | None = None):
        self.frame = frame
        clean = {}
        if terms:
            L = frame.key_length
            for k, c in terms.items():
                if len(k) != L or min(k) < 0:
                    raise ValueError(f"bad monomial key {k}")
                if not is_zero(c):
                    clean[k] = c
        self.terms = clean
        self._orders = None

    @classmethod
    def _raw(cls, frame: Frame, terms: dict) -> "GradedPolynomial":
        # terms already validated and zero-free
        obj = cls.__new__(cls)
        obj.frame = frame
        obj.terms = terms
        obj._orders = None
        return obj

    @classmethod
    def monomial(cls, frame: Frame, a, l=None, m=None, u=None, v=None, coeff=1):
        return cls(frame, {frame.key(a, l, m, u, v): frame.field(coeff)})

    @classmethod
    def zero(cls, frame: Frame) -> "GradedPolynomial":
        return cls._raw(frame, {})

    # -- inspection -------------------------------------------------------
    def __len__(self):
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple]:
        return iter(sorted(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def orders(self) -> set:
        if self._orders is None:
            self._orders = {self.frame.order(k) for k in self.terms}
        return self._orders

    def min_order(self):
        o = self.orders()
        return min(o) if o else None

    def max_order(self):
        o = self.orders()
        return max(o) if o else None

    def is_homogeneous(self, s: int) -> bool:
        return self.orders() <= {s}

    def coefficient(self, key):
        return self.terms.get(tuple(key), self.frame.field.zero)

    def __eq__(self, other):
        if not isinstance(other, GradedPolynomial):
            return NotImplemented
        if self.terms.keys() != other.terms.keys():
            return False
        return all(is_zero(c - other.terms[k]) for k, c in self.terms.items())

    def __hash__(self):
        return None

    def __repr__(self):
        return f"GradedPolynomial(n={self.frame.n}, d={self.frame.d}, terms={len(self.terms)}, orders={sorted(self.orders())})"

    # -- linear structure -----------------------------------------------------
    def _check(self, other: "GradedPolynomial"):
        if not self.frame.compatible(other.frame):
            raise ValueError("polynomials live in incompatible frames")

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            if k in out:
                s = out[k] + c
                if is_zero(s):
                    del out[k]
                else:
                    out[k] = s
            else:
                out[k] = c
        return GradedPolynomial._raw(self.frame, out)

    def __neg__(self):
        return GradedPolynomial._raw(self.frame, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor) -> "GradedPolynomial":
        factor = self.frame.field(factor) if not isinstance(factor, int) else factor
        if is_zero(factor):
            return GradedPolynomial.zero(self.frame)
        return GradedPolynomial._raw(self.frame, {k: c * factor for k, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, GradedPolynomial):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(x + y for x, y in zip(k1, k2))
                _accumulate(out, k, c1 * c2)
        return GradedPolynomial._raw(self.frame, _strip(out))

    __rmul__ = scale

    def map_coefficients(self, fn) -> "GradedPolynomial":
        """New polynomial with ``fn(key, coeff)`` as coefficients."""
        return GradedPolynomial(self.frame, {k: fn(k, c) for k, c in self.terms.items()})

    def select(self, predicate) -> "GradedPolynomial":
        return GradedPolynomial._raw(self.frame, {k: c for k, c in self.terms.items() if predicate(k)})

    # -- grading ---------------------------------------------------------------
    def project(self, s: int) -> "GradedPolynomial":
        order = self.frame.order
        return self.select(lambda k: order(k) == s)

    def truncate(self, max_order: int) -> "GradedPolynomial":
        order = self.frame.order
        return self.select(lambda k: order(k) <= max_order)

    def tail(self, min_order: int) -> "GradedPolynomial":
        order = self.frame.order
        return self.select(lambda k: order(k) >= min_order)

    # -- calculus --------------------------------------------------------------
    def derivative(self, kind: str, j: int) -> "GradedPolynomial":
        """Partial derivative with respect to ``xi``, ``eta``, ``P`` or ``Q`` (index ``j``)."""
        n, d = self.frame.n, self.frame.d
        offset = {"xi": 1, "eta": 1 + n, "P": 1 + 2 * n, "Q": 1 + 2 * n + d}[kind]
        pos = offset + j
        out = {}
        for k, c in self.terms.items():
            e = k[pos]
            if e:
                nk = k[:pos] + (e - 1,) + k[pos + 1:]
                out[nk] = c * e
        return GradedPolynomial._raw(self.frame, out)

    # -- numerics -----------------------------------------------------------------
    def evaluate(self, sqrt_eps, xi, eta, P, Q) -> complex:
        """Evaluate at numeric values of the frame variables."""
        if not self.terms:
            return 0j
        keys = np.array(list(self.terms.keys()), dtype=np.int64)
        coeffs = np.array([to_complex(c) for c in self.terms.values()], dtype=complex)
        base = np.concatenate([[sqrt_eps], np.asarray(xi, dtype=complex), np.asarray(eta, dtype=complex),
                               np.asarray(P, dtype=complex), np.asarray(Q, dtype=complex)])
        vals = np.prod(base[None, :] ** keys, axis=1)
        return complex(np.sum(coeffs * vals))

    def majorant(self, sqrt_eps: float, fast_bounds, slow_bound: float) -> float:
        """Upper bound of ``|self|`` when ``|x_j|, |y_j| <= fast_bounds[j]`` and
        ``|P_k|, |Q_k| <= slow_bound``."""
        n, d = self.frame.n, self.frame.d
        fb = np.asarray(fast_bounds, dtype=float)
        total = 0.0
        for k, c in self.terms.items():
            a, l, m, u, v = self.frame.split(k)
            w = abs(to_complex(c)) if not isinstance(c, flint.acb) else _ball_abs_upper(c)
            w *= sqrt_eps ** a
            w *= float(np.prod(fb ** (np.array(l) + np.array(m))))
            w *= slow_bound ** (sum(u) + sum(v))
            total += w
        return total

    def max_abs_coefficient(self) -> float:
        return max((abs(to_complex(c)) for c in self.terms.values()), default=0.0)

    # -- text format ----------------------------------------------------------------
    def serialize(self) -> str:
        lines = []
        for k, c in sorted(self.terms.items()):
            lines.append(" ".join([_coeff_token(c)] + [str(e) for e in k]))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def parse(cls, text: str, frame: Frame) -> "GradedPolynomial":
        terms = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok, *exps = line.split()
            key = tuple(int(e) for e in exps)
            if key in terms:
                raise ValueError(f"duplicate monomial {key}")
            terms[key] = frame.field(Algebraic.parse(tok))
        return cls(frame, terms)


def _ball_abs_upper(c: flint.acb) -> float:
    return float(abs(c).upper())


def _coeff_token(c) -> str:
    if isinstance(c, Algebraic):
        return c.token()
    if isinstance(c, flint.acb):
        return "ball:" + c.str(radius=True).replace(" ", "")
    return Algebraic.coerce(c).token()


def _accumulate(out: dict, key, value):
    if key in out:
        out[key] = out[key] + value
    else:
        out[key] = value


def _strip(out: dict) -> dict:
    return {k: c for k, c in out.items() if not is_zero(c)}


# ---------------------------------------------------------------------------
# brackets


def poisson_bracket(g1: GradedPolynomial, g2: GradedPolynomial,
                    max_order: int | None = None) -> GradedPolynomial:
    """``{g1, g2}`` with ``{xi_j, eta_j} = c_j`` and ``{P_k, Q_k} = 1``.

    Terms above ``max_order`` are skipped when it is given.
    """
    g1._check(g2)
    frame = g1.frame
    n, d = frame.n, frame.d
    c = frame.brackets
    order = frame.order
    out: dict = {}
    items2 = list(g2.terms.items())
    o2 = [order(k) for k, _ in items2]
    for k1, c1 in g1.terms.items():
        s1 = order(k1)
        for (k2, c2), s2 in zip(items2, o2):
            fast_ok = max_order is None or s1 + s2 <= max_order
            slow_ok = max_order is None or s1 + s2 + 2 <= max_order
            if not fast_ok:
                continue
            base = None
            if fast_ok:
                for j in range(n):
                    l1, m1 = k1[1 + j], k1[1 + n + j]
                    l2, m2 = k2[1 + j], k2[1 + n + j]
                    f = l1 * m2 - m1 * l2
                    if f == 0:
                        continue
                    if base is None:
                        base = [x + y for x, y in zip(k1, k2)]
                    nk = list(base)
                    nk[1 + j] -= 1
                    nk[1 + n + j] -= 1
                    _accumulate(out, tuple(nk), c1 * c2 * c[j] * f)
            if slow_ok:
                for q in range(d):
                    pu = 1 + 2 * n + q
                    pv = 1 + 2 * n + d + q
                    f = k1[pu] * k2[pv] - k1[pv] * k2[pu]
                    if f == 0:
                        continue
                    if base is None:
                        base = [x + y for x, y in zip(k1, k2)]
                    nk = list(base)
                    nk[pu] -= 1
                    nk[pv] -= 1
                    _accumulate(out, tuple(nk), c1 * c2 * f)
    return GradedPolynomial._raw(frame, _strip(out))


def h_diag(frame: Frame, lams) -> GradedPolynomial:
    """``sum_j lam_j xi_j eta_j`` written in the frame's variables.

    In a frame with ``{x_j, y_j} = c_j`` the coefficient of ``x_j y_j`` is
    ``lam_j * i / c_j``; in every frame ``{h, x^l y^m} = i lam.(m - l) x^l y^m``.
    """
    field = frame.field
    terms = {}
    for j, lam in enumerate(lams):
        l = [0] * frame.n
        l[j] = 1
        terms[frame.key(0, l, l)] = field(lam) * field.I / frame.brackets[j]
    return GradedPolynomial(frame, terms)


def bracket_with_hnu(g: GradedPolynomial, nu) -> GradedPolynomial:
    """``{h_nu, g}`` via the eigenvalue relation ``i nu.(m - l)`` per monomial."""
    frame = g.frame
    field = frame.field
    lams = [field(v) for v in nu]
    n = frame.n
    out = {}
    I = field.I
    cache = {}
    for k, c in g.terms.items():
        diff = tuple(k[1 + n + j] - k[1 + j] for j in range(n))
        if not any(diff):
            continue
        if diff not in cache:
            acc = field.zero
            for lam, dj in zip(lams, diff):
                if dj:
                    acc = acc + lam * dj
            cache[diff] = acc * I
        factor = cache[diff]
        if is_zero(factor):
            continue
        out[k] = c * factor
    return GradedPolynomial(frame, out)


def project(g: GradedPolynomial, s: int) -> GradedPolynomial:
    if s < 0:
        raise ValueError("order must be nonnegative")
    return g.project(s)


# ---------------------------------------------------------------------------
# Taylor expansion of the coupling


def taylor_expand_H0(spec, frame: Frame, N: int):
    """Expand ``eps * H0`` in the frame variables.

    Uses ``q_j = i sqrt(eps) (x_j - y_j)`` (the scaled frame).  Returns
    ``(f, remainder)`` where ``f[s]`` collects the terms of degree ``s`` in the
    fast variables (order ``2s``) for ``s = 0..N`` and ``remainder`` holds the
    higher-degree terms; the expansion is exact because ``H0`` is polynomial.
    """
    if spec.n != frame.n or spec.d != frame.d:
        raise ValueError("system and frame dimensions differ")
    field = frame.field
    n, d = frame.n, frame.d
    f = [dict() for _ in range(N + 1)]
    rem: dict = {}
    half = field(Fraction(1, 2))
    for kidx in range(d):
        u = [0] * d
        u[kidx] = 2
        _accumulate(f[0], frame.key(2, None, None, u, None), half)
    for coeff, eQ, eq in spec.terms:
        deg = sum(eq)
        target = f[deg] if deg <= N else rem
        prefactor = field(coeff) * (field.I ** deg if deg else field.one)
        # expand prod_j (x_j - y_j)^{k_j}
        factors = []
        for kj in eq:
            factors.append([(r, kj - r, math.comb(kj, r) * (-1) ** (kj - r)) for r in range(kj + 1)])
        for combo in _product(factors):
            l = tuple(t[0] for t in combo)
            m = tuple(t[1] for t in combo)
            mult = 1
            for t in combo:
                mult *= t[2]
            _accumulate(target, frame.key(2 + deg, l, m, None, eQ), prefactor * mult)
    return ([GradedPolynomial(frame, _strip(t)) for t in f],
            GradedPolynomial(frame, _strip(rem)))


def _product(lists):
    if not lists:
        yield ()
        return
    head, *rest = lists
    for item in head:
        for tail in _product(rest):
            yield (item,) + tail
