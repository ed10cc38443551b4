"""Drift scans, exponent fits and the normal-form conservation budget."""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import FamilyMember, ScanConfig, SystemConfig
from .diophantine import ALPHA_BUDGET_CONSTANT, build_resonance_model
from .fields import real_to_float
from .integrator import IntegratorConfig, integrate
from .model import FrequencyVector, FullState
from .normal_form import certificate_lines, fast_bounds, generator_norms, normalize

STATUSES = ("ok", "blowup", "budget-exceeded")
CSV_COLUMNS = ("epsilon", "family", "member", "ratios", "omega", "T", "dt", "n_steps",
               "capped", "seed", "max_rel_drift_fast", "max_rel_drift_total", "status")


@dataclass
class DriftRecord:
    epsilon: float
    family: str
    member: int
    ratios: tuple
    omega: tuple
    T: float
    dt: float
    n_steps: int
    capped: bool
    seed: tuple
    max_rel_drift_fast: float
    max_rel_drift_total: float
    wall_time: float
    status: str

    def row(self) -> list:
        return [f"{self.epsilon:.17g}", self.family, str(self.member), ";".join(self.ratios),
                ";".join(f"{w:.17g}" for w in self.omega), f"{self.T:.17g}", f"{self.dt:.17g}",
                str(self.n_steps), str(int(self.capped)), "-".join(str(s) for s in self.seed),
                f"{self.max_rel_drift_fast:.17g}", f"{self.max_rel_drift_total:.17g}", self.status]


# ---------------------------------------------------------------------------
# initial data


def sample_initial_state(system: SystemConfig, freq: FrequencyVector, rng: np.random.Generator,
                         max_tries: int = 100_000) -> FullState:
    """Fast energy split evenly with random phases; slow state on ``H0(P, Q, 0) = E0*/2``.

    ``Q`` is drawn uniformly in the box ``|Q_k| <= slow_bound`` and rejected until
    ``V(Q, 0) <= E0*/2``; the remaining energy goes into ``P`` with a random
    direction.
    """
    spec = system.spec
    E = system.energy
    n, d = spec.n, spec.d
    w = freq.omega
    theta = rng.uniform(0.0, 2 * math.pi, size=n)
    amp = np.sqrt(2 * E / n)
    p = amp * np.cos(theta)
    q = amp * np.sin(theta) / w
    level = 0.5 * spec.E0_star
    zq = np.zeros(n)
    R = system.slow_bound
    for _ in range(max_tries):
        Q = rng.uniform(-R, R, size=d)
        V = spec.potential(Q, zq)
        if V <= level:
            break
    else:
        raise RuntimeError("could not sample a slow state on the requested level set")
    kin = 2 * (level - V)
    direction = rng.normal(size=d)
    norm = np.linalg.norm(direction)
    P = direction / norm * math.sqrt(kin) if d and norm > 0 else np.zeros(d)
    return FullState(p, q, P, Q, 0.0)


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class _Task:
    system: SystemConfig
    epsilon: float
    member: FamilyMember
    seed: tuple
    N: int
    b: float
    max_steps: int
    steps_per_period: int


def _run_task(task: _Task) -> DriftRecord:
    t_start = time.perf_counter()
    freq = FrequencyVector.from_ratios(task.member.ratios, task.epsilon)
    rng = np.random.default_rng(np.random.SeedSequence(list(task.seed)))
    state0 = sample_initial_state(task.system, freq, rng)
    dt = 2 * math.pi / (task.steps_per_period * float(np.max(freq.omega)))
    horizon = task.epsilon ** (-task.N)
    n_steps = max(1, math.ceil(horizon / dt))
    capped = n_steps > task.max_steps
    if capped:
        n_steps = task.max_steps
    cfg = IntegratorConfig(dt=dt, T=n_steps * dt, sample_stride=max(1, n_steps // 1000))
    traj = integrate(state0, freq, task.system.spec, cfg, n_steps=n_steps)
    E = traj.E
    H = abs(float(traj.h_total[0]))
    rel_fast = traj.max_abs_drift_fast / E
    rel_total = traj.max_abs_drift_total / H if H else math.inf
    if traj.status == "blowup":
        status = "blowup"
    elif rel_fast > task.b:
        status = "budget-exceeded"
    else:
        status = "ok"
    return DriftRecord(task.epsilon, task.member.tag, task.member.member, tuple(task.member.ratios),
                       tuple(float(w) for w in freq.omega), n_steps * dt, dt, n_steps, capped,
                       task.seed, rel_fast, rel_total, time.perf_counter() - t_start, status)


def scan_tasks(cfg: ScanConfig) -> list:
    members = cfg.family_members()
    tasks = []
    for ei, eps in enumerate(cfg.epsilons):
        for mi, member in enumerate(members):
            tasks.append(_Task(cfg.system, eps, member, (cfg.seed, ei, mi), cfg.N, cfg.b,
                               cfg.max_steps, cfg.steps_per_period))
    return tasks


def run_drift_scan(cfg: ScanConfig) -> list:
    """One record per (epsilon, family member), in config order."""
    tasks = scan_tasks(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    if cfg.output:
        write_records_csv(records, cfg.output)
    return records


def write_records_csv(records, path) -> None:
    """Write records; wall time is left out so equal seeds give identical files."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def fit_drift_exponent(records, family: str | None = None) -> tuple[float, float, float]:
    """Least-squares fit ``log(drift) = slope*log(eps) + intercept``.

    Uses records of ``family`` (all families when ``None``) whose run finished,
    i.e. status ``ok`` or ``budget-exceeded``.
    """
    pts = [(r.epsilon, r.max_rel_drift_fast) for r in records
           if (family is None or r.family == family) and r.status != "blowup"]
    pts = [(e, dft) for e, dft in pts if dft > 0 and math.isfinite(dft)]
    if len(pts) < 3 or len({e for e, _ in pts}) < 2:
        raise ValueError("insufficient data: need >= 3 finished records over >= 2 epsilons")
    x = np.log([e for e, _ in pts])
    y = np.log([dft for _, dft in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def uniformity_ratio(records, epsilon: float) -> tuple[float, float, float]:
    """``(max/min, max, min)`` of the fast drift over all records at ``epsilon``."""
    vals = [r.max_rel_drift_fast for r in records
            if r.epsilon == epsilon and r.status != "blowup"]
    if not vals:
        raise ValueError(f"no finished records at epsilon={epsilon}")
    hi, lo = max(vals), min(vals)
    return (hi / lo if lo > 0 else math.inf), hi, lo


def scan_report(records, cfg: ScanConfig) -> list:
    lines = [f"records = {len(records)}",
             f"horizon = eps^-{cfg.N} (capped at {cfg.max_steps} steps)"]
    for r in records:
        flag = " capped" if r.capped else ""
        lines.append(f"eps={r.epsilon:g} family={r.family}[{r.member}] "
                     f"drift_fast={r.max_rel_drift_fast:.4e} drift_total={r.max_rel_drift_total:.4e} "
                     f"status={r.status}{flag}")
    for fam in sorted({r.family for r in records}):
        try:
            slope, _, r2 = fit_drift_exponent(records, fam)
            lines.append(f"fit {fam}: slope={slope:.4f} r2={r2:.4f} (lower envelope 1/n = {1 / cfg.system.n:.3f})")
        except ValueError as exc:
            lines.append(f"fit {fam}: {exc}")
    for eps in cfg.epsilons:
        try:
            ratio, hi, lo = uniformity_ratio(records, eps)
            lines.append(f"uniformity eps={eps:g}: max/min={ratio:.3f} max={hi:.4e} min={lo:.4e}")
        except ValueError as exc:
            lines.append(f"uniformity eps={eps:g}: {exc}")
    lines.append("note: only the eps^(1/n) drift magnitude and boundedness up to the horizon "
                 "are measured; an exponentially long stability time cannot be told apart "
                 "from a large power law at these scales")
    return lines


# ---------------------------------------------------------------------------
# certification


@dataclass
class BudgetTerm:
    name: str
    value: float
    description: str


@dataclass
class CertificationReport:
    epsilon: float
    N: int
    b: float
    E: float
    result: object
    terms: list = field(default_factory=list)
    generator_norms: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(t.value for t in self.terms))

    @property
    def threshold(self) -> float:
        """``eps*E*b``: the bound ``E*b`` on ``h_omega`` in the rescaled units of ``h_nu``."""
        return self.epsilon * self.E * self.b

    @property
    def budget_ok(self) -> bool:
        return self.total <= self.threshold

    @property
    def certified(self) -> bool:
        return self.result.certified

    @property
    def passed(self) -> bool:
        return self.certified and self.budget_ok

    def lines(self) -> list:
        out = [f"epsilon = {self.epsilon:.17g}", f"E = {self.E:.17g}", f"b = {self.b:.17g}"]
        out += certificate_lines(self.result)
        for k, g in enumerate(self.generator_norms, 1):
            out.append(f"generator {k} norm = {g:.6e}")
        if self.generator_norms:
            out.append(f"generator norm product = {math.prod(self.generator_norms):.6e}")
        for t in self.terms:
            out.append(f"budget {t.name} = {t.value:.6e}  ({t.description})")
        out.append(f"budget total = {self.total:.6e}")
        out.append(f"threshold eps*E*b = {self.threshold:.6e}")
        out.append(f"conservation predicate holds = {self.budget_ok}")
        return out


def drift_budget(result, epsilon: float, E: float, slow_bound: float, N: int) -> list:
    """Five-term bound on ``|h_nu(t) - h_nu(0)|`` along a normalized orbit.

    With ``rho^2 = E*eps`` the terms are: the two frequency-replacement terms
    ``(alpha/N) * (2 rho)^2`` and ``(alpha/N) * (3 rho)^2``; the two
    transformation terms, majorants of ``h_nu_tilde o T - h_nu_tilde`` on the
    ball of radius ``3 rho``; and the residual bracket majorant on radius
    ``2 rho`` times ``|t| = eps^-N``.
    """
    model = result.resonance
    alpha = real_to_float(model.alpha)
    se = math.sqrt(epsilon)
    rho = math.sqrt(E * epsilon)
    nu = model.nu
    fb2 = fast_bounds(result.frame, nu, 2 * rho)
    fb3 = fast_bounds(result.frame, nu, 3 * rho)
    deform = result.checks.get("h_tilde_deformation")
    t_def = deform.majorant(se, fb3, slow_bound) if deform is not None else 0.0
    t_res = result.residual.majorant(se, fb2, slow_bound) * epsilon ** (-N)
    return [
        BudgetTerm("freq_replacement_initial", 4 * rho ** 2 * alpha / N,
                   "|h_nu - h_nu_tilde| at radius 2 rho"),
        BudgetTerm("transform_initial", t_def, "|h_nu_tilde o T - h_nu_tilde| at radius 3 rho"),
        BudgetTerm("residual_bracket", t_res, "|{h_nu_tilde, H o T}| at radius 2 rho times eps^-N"),
        BudgetTerm("transform_final", t_def, "|h_nu_tilde o T - h_nu_tilde| at radius 3 rho"),
        BudgetTerm("freq_replacement_final", 9 * rho ** 2 * alpha / N,
                   "|h_nu - h_nu_tilde| at radius 3 rho"),
    ]


def run_certification(system: SystemConfig, N: int, b: float, epsilon: float | None = None,
                      *, mode: str = "auto", budget_constant=ALPHA_BUDGET_CONSTANT) -> CertificationReport:
    """Resonance model, normal form and drift budget for one system."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    freq = system.frequencies(epsilon)
    model = build_resonance_model(freq.nu_exact, N, Fraction(str(b)), budget_constant=budget_constant)
    result = normalize(system.spec, freq, model, N, mode=mode)
    eps = freq.epsilon
    E = system.energy
    report = CertificationReport(eps, N, b, E, result)
    report.terms = drift_budget(result, eps, E, system.slow_bound, N)
    report.generator_norms = generator_norms(result, math.sqrt(eps), 3 * math.sqrt(E * eps),
                                             system.slow_bound)
    return report
