import random
from fractions import Fraction

import pytest

from fastslow.config import builtin_system_path, load_system
from fastslow.fields import Algebraic, ExactField
from fastslow.poisson import Frame, GradedPolynomial

ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)``; printed in the terminal summary."""
    results = request.config.stash[ACCEPTANCE_KEY]

    def record(criterion: int, passed: bool, detail: str):
        results[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def coupled_system():
    return load_system(builtin_system_path())


# ---------------------------------------------------------------------------
# random polynomials shared by the algebra tests


def random_coeff(rng: random.Random, field):
    re = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
    im = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
    if rng.random() < 0.3 and getattr(field, "D", None) not in (None, 1):
        return field(Algebraic(re, im, Fraction(rng.randint(-3, 3), 2), 0, field.D))
    return field(Algebraic(re, im))


def random_key(rng: random.Random, frame: Frame, order: int | None = None, max_deg: int = 2):
    n, d = frame.n, frame.d
    for _ in range(1000):
        l = [rng.randint(0, max_deg) for _ in range(n)]
        m = [rng.randint(0, max_deg) for _ in range(n)]
        u = [rng.randint(0, max_deg) for _ in range(d)]
        v = [rng.randint(0, max_deg) for _ in range(d)]
        L = sum(l) + sum(m)
        if order is None:
            a = rng.randint(0, 4)
        else:
            a = order + 2 - L
            if a < 0:
                continue
        return frame.key(a, l, m, u, v)
    raise RuntimeError("no key found")


def random_poly(rng: random.Random, frame: Frame, terms: int = 3, order: int | None = None):
    out = {}
    for _ in range(terms):
        out[random_key(rng, frame, order)] = random_coeff(rng, frame.field)
    return GradedPolynomial(frame, out)


@pytest.fixture
def frames():
    f2 = ExactField(2)
    return [
        Frame.standard(2, 1, ExactField()),
        Frame.scaled([Fraction(1), Fraction(3, 2)], 1, ExactField()),
        Frame.scaled([Fraction(1), Algebraic.sqrt(2)], 1, f2),
    ]
