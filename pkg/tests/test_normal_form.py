import random
from fractions import Fraction

import numpy as np
import pytest

from fastslow.diophantine import build_resonance_model
from fastslow.fields import Algebraic, ExactField, to_complex
from fastslow.model import FrequencyVector, SlowHamiltonianSpec
from fastslow.normal_form import (diagonal_image, generator_norms, lie_transform, normalize,
                                  scaled_frame, solve_homological)
from fastslow.poisson import Frame, GradedPolynomial, bracket_with_hnu, h_diag, poisson_bracket


def _setup(ratios, terms, N, b="1/10", eps=0.01, d=1, mode="auto"):
    spec = SlowHamiltonianSpec(len(ratios), d, tuple(terms))
    freq = FrequencyVector.from_ratios(ratios, eps)
    model = build_resonance_model(freq.nu_exact, N, b)
    return spec, freq, model, normalize(spec, freq, model, N, mode=mode)


def test_solve_homological_examples():
    model = build_resonance_model(["1", "3/2"], 2, "1")
    fr = scaled_frame(model.nu, 1)
    I = fr.field.I
    g = (GradedPolynomial.monomial(fr, 3, [1, 0], coeff=1)
         + GradedPolynomial.monomial(fr, 2, [1, 0], [1, 0], v=[1], coeff=3))
    gen, res = solve_homological(g, model)
    assert res == GradedPolynomial.monomial(fr, 2, [1, 0], [1, 0], v=[1], coeff=3)
    # x_1 has nu.k = 1, so chi = i * x_1
    assert gen.chi == GradedPolynomial.monomial(fr, 3, [1, 0], coeff=I)
    assert gen.stage == 1
    assert bracket_with_hnu(gen.chi, model.nu) == g - res
    with pytest.raises(ValueError):
        solve_homological(g + GradedPolynomial.monomial(fr, 6, [1, 1]), model)
    with pytest.raises(ValueError):
        solve_homological(GradedPolynomial.monomial(fr, 3, [1, 1]), model)


def test_generator_is_nonresonant_and_bounded():
    rng = random.Random(2)
    model = build_resonance_model(["1", "sqrt(2)"], 3, "1")
    fr = scaled_frame(model.nu, 1)
    for _ in range(20):
        terms = {}
        for _ in range(6):
            l = [rng.randint(0, 2), rng.randint(0, 2)]
            m = [rng.randint(0, 2), rng.randint(0, 2)]
            a = 6 - sum(l) - sum(m)
            if a < 2 + sum(l) + sum(m):
                continue
            terms[fr.key(a, l, m, [rng.randint(0, 1)], [0])] = fr.field(Fraction(rng.randint(1, 9), 4))
        g = GradedPolynomial(fr, terms)
        gen, res = solve_homological(g, model)
        for key, c in gen.chi.terms.items():
            assert not model.is_resonant(fr.lm_difference(key))
            assert abs(to_complex(c)) <= abs(to_complex(g.terms[key])) / float(model.alpha) * (1 + 1e-12)
        assert res + (g - res) == g
        assert poisson_bracket(gen.chi, h_diag(fr, model.nu)) + (g - res) == GradedPolynomial.zero(fr)


def test_lie_transform_identities():
    fr = Frame.scaled([1, Fraction(3, 2)], 1, ExactField())
    F = GradedPolynomial.monomial(fr, 4, [1, 0], [0, 1], v=[1], coeff=2)
    assert lie_transform(F, GradedPolynomial.zero(fr), 10) == F
    chi = GradedPolynomial.monomial(fr, 3, [1, 0], coeff=fr.field.I)
    nu = [1, Fraction(3, 2)]
    h = h_diag(fr, nu)
    assert lie_transform(h, chi, 10) - h == diagonal_image(chi, nu, 10)
    with pytest.raises(ValueError):
        lie_transform(F, GradedPolynomial.monomial(fr, 2), 10)


def _flow(chi, fr, z, sqrt_eps, t=1.0, steps=1000):
    n, d = fr.n, fr.d
    c = [to_complex(b) for b in fr.brackets]
    dx = [chi.derivative("xi", j) for j in range(n)]
    dy = [chi.derivative("eta", j) for j in range(n)]
    dP = [chi.derivative("P", k) for k in range(d)]
    dQ = [chi.derivative("Q", k) for k in range(d)]

    def rhs(z):
        x, y, P, Q = z[:n], z[n:2 * n], z[2 * n:2 * n + d], z[2 * n + d:]
        args = (sqrt_eps, x, y, P, Q)
        return np.array([-c[j] * dy[j].evaluate(*args) for j in range(n)]
                        + [c[j] * dx[j].evaluate(*args) for j in range(n)]
                        + [-dQ[k].evaluate(*args) for k in range(d)]
                        + [dP[k].evaluate(*args) for k in range(d)])
    h = t / steps
    for _ in range(steps):
        k1 = rhs(z)
        k2 = rhs(z + h / 2 * k1)
        k3 = rhs(z + h / 2 * k2)
        k4 = rhs(z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


def test_lie_transform_matches_flow():
    fr = Frame.scaled([1, Fraction(3, 2)], 1, ExactField())
    I = fr.field.I
    chi = (GradedPolynomial.monomial(fr, 3, [1, 0], v=[1], coeff=I)
           + GradedPolynomial.monomial(fr, 4, [0, 1], [1, 0], coeff=Fraction(1, 2)))
    F = (GradedPolynomial.monomial(fr, 0, [1, 0], [1, 0], coeff=2)
         + GradedPolynomial.monomial(fr, 2, u=[2], coeff=Fraction(1, 2))
         + GradedPolynomial.monomial(fr, 3, [0, 1], v=[1], coeff=1))
    se = 0.3
    z0 = np.array([0.4 + 0.1j, 0.2 - 0.3j, 0.4 - 0.1j, 0.2 + 0.3j, 0.5, -0.3], dtype=complex)
    z1 = _flow(chi, fr, z0, se)
    direct = F.evaluate(se, z1[:2], z1[2:4], z1[4:5], z1[5:])
    series = lie_transform(F, chi, 40).evaluate(se, z0[:2], z0[2:4], z0[4:5], z0[5:])
    assert abs(direct - series) < 1e-10


def test_single_oscillator_oracle():
    spec, freq, model, res = _setup(["1"], [(1, (2,), (1,))], N=1, d=1)
    fr = res.frame
    assert res.certified
    chi = res.generators[0].chi
    expected = (GradedPolynomial.monomial(fr, 3, [1], v=[2], coeff=-1)
                + GradedPolynomial.monomial(fr, 3, None, [1], v=[2], coeff=-1))
    assert chi == expected
    norm = GradedPolynomial.monomial(fr, 0, [1], [1], coeff=2) + GradedPolynomial.monomial(fr, 2, u=[2], coeff=Fraction(1, 2))
    assert res.normalized == norm


def test_decoupled_system_is_already_normal():
    spec, freq, model, res = _setup(["1", "sqrt(2)"], [("1/2", (2,), (0, 0))], N=2)
    assert res.certified
    assert all(g.chi.is_zero() for g in res.generators)
    fr = res.frame
    half = Fraction(1, 2)
    expect = (h_diag(fr, freq.nu_exact) + GradedPolynomial.monomial(fr, 2, u=[2], coeff=half)
              + GradedPolynomial.monomial(fr, 2, v=[2], coeff=half))
    assert res.normalized == expect
    assert res.residual.is_zero()


def test_coupled_system(coupled_system):
    freq = coupled_system.frequencies(0.01)
    for N in (1, 2, 3):
        model = build_resonance_model(freq.nu_exact, N, "1/10")
        res = normalize(coupled_system.spec, freq, model, N)
        assert res.certified, res.violations
        assert res.residual_min_order > 2 * N
        assert res.checks["h_tilde_deformation_min_order"] >= 2
        for key in res.normalized.terms:
            assert model.is_resonant(fr_k := res.frame.lm_difference(key)), fr_k


def test_random_cubic_couplings():
    rng = random.Random(17)
    for trial in range(3):
        terms = [("1/2", (2,), (0, 0))]
        for _ in range(3):
            eq = [rng.randint(0, 2), rng.randint(0, 1)]
            if sum(eq) == 0:
                eq[0] = 1
            terms.append((f"{rng.randint(-3, 3) or 1}/{rng.randint(1, 4)}", (rng.randint(0, 2),), tuple(eq)))
        spec, freq, model, res = _setup(["1", "(1+sqrt(5))/2"], terms, N=3, b="1/2")
        assert res.certified, res.violations
        assert res.residual_min_order >= 7


def test_residual_scaling_in_epsilon(coupled_system):
    freq = coupled_system.frequencies(0.01)
    for N in (1, 2):
        model = build_resonance_model(freq.nu_exact, N, "1/10")
        res = normalize(coupled_system.spec, freq, model, N)
        amin = min(k[0] for k in res.residual.terms)
        assert amin >= N + 3
        fb = np.ones(2)
        eps = np.array([1e-4, 1e-5])
        vals = [res.residual.majorant(np.sqrt(e), fb, 0.5) for e in eps]
        slope = np.diff(np.log(vals))[0] / np.diff(np.log(eps))[0]
        assert abs(slope - amin / 2) < 0.05


def test_interval_mode_encloses_exact():
    terms = [("1/2", (2,), (0, 0)), ("1/2", (2,), (1, 0)), ("1/3", (1,), (1, 1))]
    _, _, _, ex = _setup(["1", "sqrt(2)"], terms, N=2, mode="exact")
    _, _, _, iv = _setup(["1", "sqrt(2)"], terms, N=2, mode="interval")
    assert ex.certified and iv.certified
    assert set(ex.normalized.terms) == set(iv.normalized.terms)
    for key, c in ex.normalized.terms.items():
        assert 0 in iv.normalized.terms[key] - iv.frame.field(c)


def test_model_mismatch_rejected(coupled_system):
    freq = coupled_system.frequencies(0.01)
    model = build_resonance_model(freq.nu_exact, 2, "1/10")
    with pytest.raises(ValueError):
        normalize(coupled_system.spec, freq, model, 3)
    other = build_resonance_model(["1", "3/2"], 2, "1/10")
    with pytest.raises(ValueError):
        normalize(coupled_system.spec, freq, other, 2)


def test_generator_norms_scale_with_radius(coupled_system):
    freq = coupled_system.frequencies(0.01)
    model = build_resonance_model(freq.nu_exact, 2, "1/10")
    res = normalize(coupled_system.spec, freq, model, 2)
    small = generator_norms(res, 0.1, 0.1, 0.4)
    big = generator_norms(res, 0.1, 0.2, 0.4)
    assert all(0 < s < b for s, b in zip(small, big))
