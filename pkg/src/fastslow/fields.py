"""Coefficient arithmetic for the exact normal-form pipeline.

Two coefficient families are supported:

* :class:`Algebraic` -- exact elements ``a + b*sqrt(D)`` with ``a, b`` Gaussian
  rationals.  With ``D == 1`` this is plain Q(i).  Quadratic irrational
  frequencies such as ``sqrt(2)`` or the golden mean live here.
* ``flint.acb`` balls (outward rounded, 512 bits by default) for frequencies
  that are not quadratic irrationals.  Zero tests and sign decisions on balls
  either succeed with certainty or raise :class:`UndecidedError`.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

import flint
import sympy as sp

DEFAULT_BALL_PREC = 512


class UndecidedError(ArithmeticError):
    """A ball comparison could not be decided at the working precision."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return ``(k, D)`` with ``n == k*k*D`` and ``D`` squarefree."""
    k, D = 1, n
    f = 2
    while f * f <= D:
        while D % (f * f) == 0:
            D //= f * f
            k *= f
        f += 1
    return k, D


class Algebraic:
    """Element ``(ar + i*ai) + (br + i*bi)*sqrt(D)`` of Q(i, sqrt(D))."""

    __slots__ = ("ar", "ai", "br", "bi", "D")

    def __init__(self, ar=0, ai=0, br=0, bi=0, D: int = 1):
        self.ar = _frac(ar)
        self.ai = _frac(ai)
        br = _frac(br)
        bi = _frac(bi)
        if D == 1:
            # sqrt(1) folds into the rational part
            self.ar += br
            self.ai += bi
            br = bi = Fraction(0)
        elif D < 1:
            raise ValueError("D must be a positive squarefree integer")
        if br == 0 and bi == 0:
            D = 1
        self.br = br
        self.bi = bi
        self.D = D

    # -- construction -------------------------------------------------
    @classmethod
    def coerce(cls, x) -> "Algebraic":
        if isinstance(x, Algebraic):
            return x
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        return cls(_frac(x))

    @classmethod
    def sqrt(cls, n: int) -> "Algebraic":
        k, D = _squarefree_split(int(n))
        if D == 1:
            return cls(k)
        return cls(0, 0, k, 0, D)

    # -- predicates -----------------------------------------------------
    def is_zero(self) -> bool:
        return self.ar == 0 and self.ai == 0 and self.br == 0 and self.bi == 0

    def is_real(self) -> bool:
        return self.ai == 0 and self.bi == 0

    def sign(self) -> int:
        """Exact sign of a real element."""
        if not self.is_real():
            raise ValueError("sign of a non-real element")
        a, b = self.ar, self.br
        sa = (a > 0) - (a < 0)
        sb = (b > 0) - (b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with D b^2
        lhs = a * a
        rhs = self.D * b * b
        if lhs > rhs:
            return sa
        if lhs < rhs:
            return sb
        return 0

    # -- arithmetic -------------------------------------------------------
    def _common_D(self, other: "Algebraic") -> int:
        if self.D == 1:
            return other.D
        if other.D == 1 or other.D == self.D:
            return self.D
        raise ValueError(f"incompatible quadratic fields sqrt({self.D}) and sqrt({other.D})")

    def __add__(self, other):
        try:
            o = Algebraic.coerce(other)
        except TypeError:
            return NotImplemented
        return Algebraic(self.ar + o.ar, self.ai + o.ai, self.br + o.br,
                         self.bi + o.bi, self._common_D(o))

    __radd__ = __add__

    def __neg__(self):
        return Algebraic(-self.ar, -self.ai, -self.br, -self.bi, self.D)

    def __sub__(self, other):
        try:
            o = Algebraic.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return Algebraic(self.ar * other, self.ai * other, self.br * other,
                             self.bi * other, self.D)
        try:
            o = Algebraic.coerce(other)
        except TypeError:
            return NotImplemented
        D = self._common_D(o)
        # (a + b s)(c + e s) = (ac + D be) + (ae + bc) s, with Gaussian a,b,c,e
        a_r, a_i, b_r, b_i = self.ar, self.ai, self.br, self.bi
        c_r, c_i, e_r, e_i = o.ar, o.ai, o.br, o.bi
        ac_r = a_r * c_r - a_i * c_i
        ac_i = a_r * c_i + a_i * c_r
        if b_r or b_i or e_r or e_i:
            be_r = b_r * e_r - b_i * e_i
            be_i = b_r * e_i + b_i * e_r
            ae_r = a_r * e_r - a_i * e_i
            ae_i = a_r * e_i + a_i * e_r
            bc_r = b_r * c_r - b_i * c_i
            bc_i = b_r * c_i + b_i * c_r
            return Algebraic(ac_r + D * be_r, ac_i + D * be_i,
                             ae_r + bc_r, ae_i + bc_i, D)
        return Algebraic(ac_r, ac_i)

    __rmul__ = __mul__

    def _gauss_inverse(self) -> "Algebraic":
        # 1/(x + iy) for an element with no sqrt part
        n = self.ar * self.ar + self.ai * self.ai
        if n == 0:
            raise ZeroDivisionError("division by zero")
        return Algebraic(self.ar / n, -self.ai / n)

    def inverse(self) -> "Algebraic":
        if self.br == 0 and self.bi == 0:
            return self._gauss_inverse()
        # (a + b s)^-1 = (a - b s) / (a^2 - D b^2)
        a = Algebraic(self.ar, self.ai)
        b = Algebraic(self.br, self.bi)
        norm = a * a - b * b * self.D
        return (a - b * Algebraic.sqrt(self.D)) * norm._gauss_inverse()

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return Algebraic(self.ar / other, self.ai / other, self.br / other,
                             self.bi / other, self.D)
        try:
            o = Algebraic.coerce(other)
        except TypeError:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return Algebraic.coerce(other) * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        result = Algebraic(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def conjugate(self) -> "Algebraic":
        return Algebraic(self.ar, -self.ai, self.br, -self.bi, self.D)

    # -- comparison / conversion -----------------------------------------
    def _key(self):
        return (self.ar, self.ai, self.br, self.bi, self.D)

    def __eq__(self, other):
        try:
            o = Algebraic.coerce(other)
        except TypeError:
            return NotImplemented
        return self._key() == o._key()

    def __hash__(self):
        if self.ai == 0 and self.br == 0 and self.bi == 0:
            return hash(self.ar)
        return hash(self._key())

    def __complex__(self):
        s = math.sqrt(self.D)
        return complex(float(self.ar) + float(self.br) * s,
                       float(self.ai) + float(self.bi) * s)

    def __float__(self):
        if not self.is_real():
            raise TypeError("non-real element")
        return float(self.ar) + float(self.br) * math.sqrt(self.D)

    def to_acb(self) -> flint.acb:
        a = flint.acb(_fmpq(self.ar), _fmpq(self.ai))
        if self.D == 1:
            return a
        b = flint.acb(_fmpq(self.br), _fmpq(self.bi))
        return a + b * flint.arb(self.D).sqrt()

    def token(self) -> str:
        """Whitespace-free serialization, parsed back by :meth:`parse`."""
        head = f"{self.ar}:{self.ai}"
        if self.D == 1:
            return head
        return f"{head}|{self.br}:{self.bi}|{self.D}"

    @classmethod
    def parse(cls, token: str) -> "Algebraic":
        parts = token.split("|")
        ar, ai = parts[0].split(":")
        if len(parts) == 1:
            return cls(Fraction(ar), Fraction(ai))
        br, bi = parts[1].split(":")
        return cls(Fraction(ar), Fraction(ai), Fraction(br), Fraction(bi), int(parts[2]))

    def __repr__(self):
        return f"Algebraic({self.token()})"


def _fmpq(x: Fraction) -> flint.arb:
    return flint.arb(flint.fmpq(x.numerator, x.denominator))


# ---------------------------------------------------------------------------
# type-dispatching helpers used by the polynomial algebra


def is_zero(c) -> bool:
    """Certain zero test. Balls count as zero only when exactly zero."""
    if isinstance(c, (flint.acb, flint.arb)):
        return c.is_zero()
    if isinstance(c, Algebraic):
        return c.is_zero()
    return c == 0


def to_complex(c) -> complex:
    if isinstance(c, flint.acb):
        return complex(float(c.real.mid()), float(c.imag.mid()))
    if isinstance(c, flint.arb):
        return complex(float(c.mid()))
    return complex(c)


def real_sign(x) -> int:
    """Certified sign of a real quantity (exact or ball)."""
    if isinstance(x, flint.acb):
        if not x.imag.is_zero():
            if x.imag > 0 or x.imag < 0:
                raise ValueError("sign of a non-real ball")
            raise UndecidedError(f"imaginary part of {x} not provably zero")
        x = x.real
    if isinstance(x, flint.arb):
        if x.is_zero():
            return 0
        if x > 0:
            return 1
        if x < 0:
            return -1
        raise UndecidedError(f"sign of {x} undecided")
    if isinstance(x, Algebraic):
        return x.sign()
    return (x > 0) - (x < 0)


def abs_exceeds(x, bound) -> bool:
    """Certified decision of ``|x| > bound`` for real ``x`` and rational ``bound``."""
    s = real_sign(x)
    ax = x if s >= 0 else -x
    return real_sign(ax - _as_like(ax, bound)) > 0


def _as_like(x, value):
    if isinstance(x, (flint.acb, flint.arb)):
        f = _frac(value)
        return _fmpq(f)
    return value


# ---------------------------------------------------------------------------
# fields


class ExactField:
    """Exact coefficients in Q(i, sqrt(D)); ``D=None`` accepts any single field."""

    kind = "exact"

    def __init__(self, D: int | None = None):
        self.D = D
        self.I = Algebraic(0, 1)
        self.one = Algebraic(1)
        self.zero = Algebraic(0)

    def __call__(self, x) -> Algebraic:
        if isinstance(x, (flint.acb, flint.arb)):
            raise TypeError("ball value in an exact field")
        a = Algebraic.coerce(x)
        if self.D is not None and a.D not in (1, self.D):
            raise ValueError(f"value outside Q(i, sqrt({self.D}))")
        return a

    def __repr__(self):
        return f"ExactField(D={self.D})"


class BallField:
    """Complex balls at a fixed working precision (bits)."""

    kind = "interval"

    def __init__(self, prec: int = DEFAULT_BALL_PREC):
        self.prec = prec
        if flint.ctx.prec < prec:
            flint.ctx.prec = prec
        self.I = flint.acb(0, 1)
        self.one = flint.acb(1)
        self.zero = flint.acb(0)

    def __call__(self, x) -> flint.acb:
        if isinstance(x, flint.acb):
            return x
        if isinstance(x, flint.arb):
            return flint.acb(x)
        if isinstance(x, Algebraic):
            return x.to_acb()
        if isinstance(x, complex):
            return flint.acb(x.real, x.imag)
        return flint.acb(_fmpq(_frac(x)))

    def __repr__(self):
        return f"BallField(prec={self.prec})"


# ---------------------------------------------------------------------------
# exact real inputs (frequency ratios)

def parse_real(text, prec: int = DEFAULT_BALL_PREC):
    """Parse a real number given as text or a Python number.

    Rationals become :class:`Fraction`, quadratic irrationals become real
    :class:`Algebraic` elements, anything else becomes a ``flint.arb`` ball.
    Floats are taken at their exact binary value.
    """
    if isinstance(text, (Fraction, Algebraic, flint.arb)):
        return text
    if isinstance(text, (int, float)):
        return Fraction(text)
    expr = sp.sympify(str(text), rational=True)
    if not expr.is_real:
        raise ValueError(f"{text!r} is not a real number")
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    x = sp.Symbol("x")
    try:
        poly = sp.Poly(sp.minimal_polynomial(expr, x), x)
    except (NotImplementedError, sp.polys.polyerrors.NotAlgebraic):
        poly = None
    if poly is not None and poly.degree() == 2:
        A, B, C = (sp.Rational(c) for c in poly.all_coeffs())
        disc = B * B - 4 * A * C
        # disc = num/den -> sqrt(disc) = sqrt(num*den)/den
        num, den = int(disc.p), int(disc.q)
        k, D = _squarefree_split(num * den)
        a = Fraction(int((-B).p), int((-B).q)) / (2 * Fraction(int(A.p), int(A.q)))
        b = Fraction(k, den) / (2 * Fraction(int(A.p), int(A.q)))
        value = float(sp.N(expr, 30))
        cand = Algebraic(a, 0, b, 0, D)
        if abs(float(cand) - value) > abs(float(Algebraic(a, 0, -b, 0, D)) - value):
            cand = Algebraic(a, 0, -b, 0, D)
        return cand
    old = flint.ctx.prec
    flint.ctx.prec = max(old, prec)
    digits = int(prec * 0.30103) + 20
    mid = sp.N(expr, digits)
    ball = flint.arb(str(mid)) + flint.arb(0, flint.arb(10) ** (-(digits - 5)))
    return ball


def real_to_float(x) -> float:
    if isinstance(x, flint.arb):
        return float(x.mid())
    return float(x)


def real_to_fraction(x, bits: int = 256) -> Fraction:
    """A rational within ``2**-bits`` (relative) of ``x``; exact for rationals."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, float)):
        return Fraction(x)
    if isinstance(x, Algebraic):
        if x.D == 1:
            return x.ar
        # integer square root gives a floor approximation of sqrt(D)*2^bits
        scale = 1 << bits
        root = math.isqrt(x.D * scale * scale)
        return x.ar + x.br * Fraction(root, scale)
    if isinstance(x, flint.arb):
        man, exp = (int(v) for v in x.mid().man_exp())
        exact = Fraction(man) * (Fraction(2) ** exp)
        scale = 1 << bits
        return Fraction(round(exact * scale), scale)
    raise TypeError(type(x).__name__)


def common_field(values, mode: str = "auto", prec: int = DEFAULT_BALL_PREC):
    """Pick the coefficient field able to hold ``values`` exactly.

    ``mode`` is ``"exact"``, ``"interval"`` or ``"auto"`` (exact when all values
    share one quadratic field, balls otherwise).
    """
    if mode == "interval":
        return BallField(prec)
    Ds = set()
    for v in values:
        if isinstance(v, flint.arb):
            if mode == "exact":
                raise ValueError("value is not exact; use interval mode")
            return BallField(prec)
        if isinstance(v, Algebraic) and v.D != 1:
            Ds.add(v.D)
    if len(Ds) > 1:
        if mode == "exact":
            raise ValueError(f"values span several quadratic fields {sorted(Ds)}")
        return BallField(prec)
    return ExactField(Ds.pop() if Ds else 1)
