"""Lie-transform normalization with an alpha cutoff on small denominators.

The Hamiltonian is carried as ``h_nu + K`` with ``h_nu = sum nu_j xi_j eta_j``
and ``K`` the expansion of ``eps*H0`` in the scaled frame
(``x_j = xi_j/sqrt(2 nu_j)``).  Stage ``r+1`` removes the non-resonant
monomials of order ``2(r+1)`` with a generator ``chi`` solving

    {chi, h_nu} + G_NR = 0 ,

and transforms ``K`` by the Lie series ``sum_k ad_chi^k / k!``.  The image of
``h_nu`` is obtained from the homological identity, so the normalized orders
are resonant by construction in exact and in ball arithmetic alike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .diophantine import ResonanceModel
from .fields import common_field, is_zero, real_to_float, to_complex
from .model import FrequencyVector, SlowHamiltonianSpec
from .poisson import (Frame, GradedPolynomial, bracket_with_hnu, h_diag,
                      poisson_bracket, taylor_expand_H0)


class NormalFormError(RuntimeError):
    """The certificate of a normal-form computation failed."""


@dataclass(frozen=True)
class Generator:
    chi: GradedPolynomial
    stage: int


@dataclass
class StageReport:
    stage: int
    order: int
    resonant: int
    nonresonant: int
    input_max_coeff: float
    generator_max_coeff: float


@dataclass
class NormalFormResult:
    generators: list
    normalized: GradedPolynomial
    remainder: GradedPolynomial
    residual: GradedPolynomial
    resonance: ResonanceModel
    residual_min_order: int | None
    frame: Frame
    N: int
    keep_order: int
    stages: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return not self.violations

    @property
    def hamiltonian(self) -> GradedPolynomial:
        """Transformed Hamiltonian through ``keep_order``."""
        return self.normalized + self.remainder


# ---------------------------------------------------------------------------
# frame / classification helpers


def scaled_frame(nu_exact, d: int, mode: str = "auto") -> Frame:
    field_ = common_field(nu_exact, mode)
    return Frame.scaled(nu_exact, d, field_)


def _k_of(frame: Frame, key) -> tuple:
    return frame.lm_difference(key)


def _nu_dot(frame: Frame, nu, k):
    acc = frame.field.zero
    for v, kj in zip(nu, k):
        if kj:
            acc = acc + v * kj
    return acc


def solve_homological(g: GradedPolynomial, model: ResonanceModel):
    """Split ``g`` into resonant and non-resonant parts and build ``chi``.

    Returns ``(Generator, resonant_part)``.  The generator satisfies
    ``poisson_bracket(chi, h_nu) + g_NR == 0``; equivalently
    ``bracket_with_hnu(chi, nu) == g_NR``.
    """
    frame = g.frame
    orders = g.orders()
    if len(orders) > 1:
        raise ValueError(f"g must be homogeneous, found orders {sorted(orders)}")
    if model.alpha <= 0:
        raise ValueError("alpha must be positive")
    s = next(iter(orders)) if orders else 0
    if s % 2:
        raise ValueError("g must have even order")
    fld = frame.field
    nu = [fld(v) for v in model.nu]
    resonant: dict = {}
    chi: dict = {}
    cache: dict = {}
    for key, c in g.terms.items():
        k = _k_of(frame, key)
        if k not in cache:
            if model.is_resonant(k):
                cache[k] = None
            else:
                cache[k] = fld.I / _nu_dot(frame, nu, k)
        factor = cache[k]
        if factor is None:
            resonant[key] = c
        else:
            chi[key] = c * factor
    return (Generator(GradedPolynomial(frame, chi), s // 2),
            GradedPolynomial(frame, resonant))


def nonresonant_part(g: GradedPolynomial, model: ResonanceModel) -> GradedPolynomial:
    frame = g.frame
    return g.select(lambda key: not model.is_resonant(_k_of(frame, key)))


def lie_transform(F: GradedPolynomial, chi, max_order: int) -> GradedPolynomial:
    """Truncation through ``max_order`` of ``F o phi_chi = sum_k ad_chi^k F / k!``."""
    chi = chi.chi if isinstance(chi, Generator) else chi
    if chi.is_zero():
        return F.truncate(max_order)
    if (chi.min_order() or 0) < 1:
        raise ValueError("generator must have order >= 1")
    result = F.truncate(max_order)
    term = result
    k = 1
    while not term.is_zero():
        term = poisson_bracket(chi, term, max_order).scale(Fraction(1, k))
        result = result + term
        k += 1
    return result


def _series_from_bracket(first: GradedPolynomial, chi: GradedPolynomial,
                         max_order: int) -> GradedPolynomial:
    """``sum_{k>=1} ad_chi^{k-1}(first) / k!`` given ``first = {chi, F}``."""
    result = first.truncate(max_order)
    term = result
    k = 2
    while not term.is_zero():
        term = poisson_bracket(chi, term, max_order).scale(Fraction(1, k))
        result = result + term
        k += 1
    return result


def _stage_update(K: GradedPolynomial, G_nr: GradedPolynomial, chi: GradedPolynomial,
                  max_order: int) -> GradedPolynomial:
    """``K o phi_chi - (h_nu o phi_chi - h_nu)`` with ``{chi, h_nu} = -G_nr``.

    ``G_nr`` is removed from ``K`` by dropping its keys rather than by
    subtraction, so ball coefficients do not leave zero-containing debris.
    """
    base = K.select(lambda key: key not in G_nr.terms).truncate(max_order)
    if chi.is_zero():
        return base
    # sum_{k>=1} ad^k K / k!
    out = base
    term = K
    k = 1
    while not term.is_zero():
        term = poisson_bracket(chi, term, max_order).scale(Fraction(1, k))
        out = out + term
        k += 1
    # minus sum_{k>=2} ad^{k-1} G_nr / k!
    term = G_nr
    k = 2
    while not term.is_zero():
        term = poisson_bracket(chi, term, max_order).scale(Fraction(1, k))
        out = out - term
        k += 1
    return out


def diagonal_image(chi: GradedPolynomial, lams, max_order: int) -> GradedPolynomial:
    """``h_lam o phi_chi - h_lam`` using ``{chi, h_lam} = -{h_lam, chi}``."""
    first = -bracket_with_hnu(chi, lams)
    return _series_from_bracket(first, chi, max_order)


def _indi_violations(poly: GradedPolynomial) -> list:
    frame = poly.frame
    bad = []
    for key in poly.terms:
        a = key[0]
        L = sum(key[1:1 + 2 * frame.n])
        if a - 2 < L:
            bad.append(key)
    return bad


# ---------------------------------------------------------------------------
# pipeline


def normalize(spec: SlowHamiltonianSpec, freq: FrequencyVector, model: ResonanceModel,
              N: int, *, mode: str = "auto", extra_orders: int = 2,
              check_deformation: bool = True) -> NormalFormResult:
    """Normalize ``h_nu + eps*H0`` through order ``2N``.

    The transformed Hamiltonian is carried through order ``2N + extra_orders``
    so the leading part of the residual bracket is retained.
    """
    if model.N != N:
        raise ValueError(f"resonance model built for N={model.N}, asked for N={N}")
    if spec.n != freq.n or len(model.nu) != freq.n:
        raise ValueError("dimension mismatch between system, frequencies and model")
    if not np.allclose(model.nu_float, freq.nu, rtol=1e-12):
        raise ValueError("resonance model built for different frequencies")
    frame = scaled_frame(freq.nu_exact, spec.d, mode)
    fld = frame.field
    nu = [fld(v) for v in freq.nu_exact]
    keep = 2 * N + extra_orders
    f, _ = taylor_expand_H0(spec, frame, keep // 2 + 1)
    K0 = GradedPolynomial.zero(frame)
    for part in f:
        K0 = K0 + part
    K0 = K0.truncate(keep)

    violations: list = []
    checks: dict = {}
    bad = _indi_violations(K0)
    if bad:
        violations.append(f"expansion monomials violate a-2 >= |l|+|m|: {bad[:3]}")

    K = K0
    generators: list = []
    stages: list = []
    h_nu = h_diag(frame, nu)
    exact = fld.kind == "exact"
    for r in range(N):
        s = 2 * (r + 1)
        G = K.project(s)
        gen, G_res = solve_homological(G, model)
        G_nr = G.select(lambda key: key not in G_res.terms)
        chi = gen.chi
        # homological identity, checked independently of its use below
        cancel = poisson_bracket(chi, h_nu) + G_nr
        if exact:
            if not cancel.is_zero():
                violations.append(f"stage {r + 1}: homological cancellation failed")
        elif not all(0 in c for c in cancel.terms.values()):
            violations.append(f"stage {r + 1}: homological cancellation not contained in balls")
        stages.append(StageReport(r + 1, s, len(G_res), len(G_nr),
                                  G.max_abs_coefficient(), chi.max_abs_coefficient()))
        generators.append(gen)
        K = _stage_update(K, G_nr, chi, keep)
        for j in range(1, r + 2):
            Pj = K.project(2 * j)
            bad_keys = [key for key in Pj.terms if not model.is_resonant(_k_of(frame, key))]
            if bad_keys:
                violations.append(f"stage {r + 1}: order {2 * j} has non-resonant monomial {bad_keys[0]}")
        odd = [o for o in K.orders() if o % 2]
        if odd:
            violations.append(f"stage {r + 1}: odd orders {sorted(odd)} appeared")
        bad = _indi_violations(K)
        if bad:
            violations.append(f"stage {r + 1}: a-2 >= |l|+|m| violated at {bad[0]}")

    normalized = (h_nu + K).truncate(2 * N)
    remainder = K.tail(2 * N + 1)
    residual = bracket_with_hnu(K, model.nu_tilde)
    low = residual.truncate(2 * N)
    if not low.is_zero():
        key = min(low.terms)
        violations.append(f"residual bracket has order {frame.order(key)} monomial {key}")
    for key in normalized.terms:
        if not model.is_resonant(_k_of(frame, key)):
            violations.append(f"normalized monomial {key} is not alpha-resonant")
            break

    if check_deformation and generators:
        tilde = [fld(t) for t in model.nu_tilde]
        D_tilde = GradedPolynomial.zero(frame)
        D_H0 = K0
        for gen in generators:
            D_tilde = lie_transform(D_tilde, gen.chi, keep) + diagonal_image(gen.chi, tilde, keep)
            D_H0 = lie_transform(D_H0, gen.chi, keep)
        D_H0 = D_H0 - K0
        checks["h_tilde_deformation_min_order"] = D_tilde.min_order()
        checks["eps_H0_deformation_min_order"] = D_H0.min_order()
        if D_tilde.min_order() is not None and D_tilde.min_order() < 2:
            violations.append("h_nu_tilde o T - h_nu_tilde has order below 2")
        if D_H0.min_order() is not None and D_H0.min_order() < 3:
            checks["eps_H0_deformation_warning"] = "min order below 3"
        checks["h_tilde_deformation"] = D_tilde
    checks["transformed_expansion_orders"] = sorted(K.orders())

    return NormalFormResult(generators=generators, normalized=normalized, remainder=remainder,
                            residual=residual, resonance=model,
                            residual_min_order=residual.min_order(), frame=frame, N=N,
                            keep_order=keep, stages=stages, violations=violations, checks=checks)


def residual_bracket(result: NormalFormResult) -> GradedPolynomial:
    """``{h_nu_tilde, H o T}`` through the retained orders."""
    return result.residual


# ---------------------------------------------------------------------------
# numeric helpers


def fast_bounds(frame: Frame, nu, radius: float) -> np.ndarray:
    """Bounds on ``|x_j|, |y_j|`` when ``sum nu_j(|xi_j|^2+|eta_j|^2) <= radius^2``."""
    nu = np.array([real_to_float(v) for v in nu])
    return radius / np.sqrt(nu) * np.asarray(frame.xi_scale)


def frame_point(frame: Frame, xi, eta):
    s = np.asarray(frame.xi_scale)
    return np.asarray(xi) * s, np.asarray(eta) * s


def generator_norms(result: NormalFormResult, sqrt_eps: float, radius: float,
                    slow_bound: float) -> list:
    nu = result.resonance.nu
    fb = fast_bounds(result.frame, nu, radius)
    return [g.chi.majorant(sqrt_eps, fb, slow_bound) for g in result.generators]


def certificate_lines(result: NormalFormResult) -> list:
    """Plain-text certificate summary."""
    m = result.resonance
    lines = [
        f"N = {m.N}",
        f"alpha = {m.alpha}",
        f"qden = {m.qden}",
        "nu_tilde = " + ", ".join(str(t) for t in m.nu_tilde),
        f"coefficient_field = {result.frame.field!r}",
        f"keep_order = {result.keep_order}",
    ]
    for st in result.stages:
        lines.append(f"stage {st.stage}: order {st.order} resonant {st.resonant} "
                     f"nonresonant {st.nonresonant} max_input_coeff {st.input_max_coeff:.6g} "
                     f"max_generator_coeff {st.generator_max_coeff:.6g}")
    lines.append(f"residual_min_order = {result.residual_min_order}")
    for key in ("h_tilde_deformation_min_order", "eps_H0_deformation_min_order"):
        if key in result.checks:
            lines.append(f"{key} = {result.checks[key]}")
    lines.append(f"certified = {result.certified}")
    for v in result.violations:
        lines.append(f"violation: {v}")
    return lines
