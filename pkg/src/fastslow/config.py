"""TOML configuration for systems and scans.

System file::

    n = 2
    d = 1
    ratios = ["1", "sqrt(2)"]      # or omega = ["100", "100*sqrt(2)"]
    E_star = 2.0
    E0_star = 0.1
    energy = 1.0                   # initial fast energy h_omega
    slow_radius = 0.45             # bound on |P|, |Q|; default sqrt(2*E0_star)
    potential = [                  # V = sum coeff * Q^eQ * q^eq
      ["1/2", [2], [0, 0]],
      ["1/2", [2], [1, 0]],
    ]

Scan file::

    system = "coupled.toml"        # relative to the scan file
    epsilons = [0.1, 0.05, 0.02, 0.01]
    N = 2                          # horizon T = eps^-N
    b = 0.1
    seed = 2024
    families = ["3/2", "sqrt2", "golden", "random:5"]
    max_steps = 20000000
    steps_per_period = 40
    workers = 1
    output = "drift.csv"
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .fields import parse_real, real_to_float
from .model import FrequencyVector, SlowHamiltonianSpec

NAMED_FAMILIES = {
    "3/2": ("1", "3/2"),
    "sqrt2": ("1", "sqrt(2)"),
    "golden": ("1", "(1+sqrt(5))/2"),
}


class ConfigError(ValueError):
    pass


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"{where}: missing key {key!r}")
    return data[key]


@dataclass(frozen=True)
class SystemConfig:
    spec: SlowHamiltonianSpec
    ratios: tuple
    energy: float = 1.0
    slow_radius: float | None = None
    epsilon: float | None = None
    source: str = ""

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def slow_bound(self) -> float:
        """Bound on ``|P_k|, |Q_k|``; defaults to ``sqrt(2 E0*)``, the kinetic bound on ``H0 <= E0*``."""
        if self.slow_radius is not None:
            return self.slow_radius
        return math.sqrt(2 * self.spec.E0_star)

    def frequencies(self, epsilon: float | None = None) -> FrequencyVector:
        eps = epsilon if epsilon is not None else self.epsilon
        if eps is None:
            raise ConfigError("no epsilon given and the system file has no omega")
        return FrequencyVector.from_ratios(self.ratios, eps)


def load_system_dict(data: dict, source: str = "<dict>") -> SystemConfig:
    n = int(_require(data, "n", source))
    d = int(_require(data, "d", source))
    if n < 1 or d < 0:
        raise ConfigError(f"{source}: need n >= 1 and d >= 0")
    terms = []
    for item in data.get("potential", []):
        if len(item) != 3:
            raise ConfigError(f"{source}: potential entries are [coeff, Q_exponents, q_exponents]")
        coeff, eQ, eq = item
        terms.append((str(coeff), tuple(eQ), tuple(eq)))
    try:
        spec = SlowHamiltonianSpec(n, d, tuple(terms), float(data.get("E_star", 1.0)),
                                   float(data.get("E0_star", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    epsilon = None
    if "ratios" in data and "omega" in data:
        raise ConfigError(f"{source}: give either ratios or omega, not both")
    if "omega" in data:
        omega = [str(w) for w in data["omega"]]
        fv = FrequencyVector.from_omega(omega)
        ratios = tuple(str(v) for v in _exact_strings(omega))
        epsilon = fv.epsilon
    else:
        ratios = tuple(str(r) for r in data.get("ratios", ["1"] * n))
    if len(ratios) != n:
        raise ConfigError(f"{source}: expected {n} frequencies, got {len(ratios)}")
    energy = float(data.get("energy", 1.0))
    if energy <= 0:
        raise ConfigError(f"{source}: energy must be positive")
    sr = data.get("slow_radius")
    return SystemConfig(spec, ratios, energy, None if sr is None else float(sr), epsilon, source)


def _exact_strings(omega: list) -> list:
    """Ratios ``omega/min(omega)`` as expression strings."""
    vals = [real_to_float(parse_real(w)) for w in omega]
    lo = omega[vals.index(min(vals))]
    return [f"({w})/({lo})" for w in omega]


def load_system(path) -> SystemConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return load_system_dict(data, str(path))


@dataclass(frozen=True)
class FamilyMember:
    tag: str
    member: int
    ratios: tuple


@dataclass(frozen=True)
class ScanConfig:
    system: SystemConfig
    epsilons: tuple
    N: int = 2
    b: float = 0.1
    seed: int = 0
    families: tuple = ("sqrt2",)
    max_steps: int = 20_000_000
    steps_per_period: int = 40
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ConfigError("epsilon grid is empty")
        if any(e <= 0 for e in eps):
            raise ConfigError("epsilons must be positive")
        if list(eps) != sorted(eps, reverse=True) or len(set(eps)) != len(eps):
            raise ConfigError("epsilon grid must be strictly decreasing")
        object.__setattr__(self, "epsilons", eps)
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if not 0 < self.b < 1:
            raise ConfigError("b must lie in (0, 1)")
        if self.max_steps < 1 or self.steps_per_period < 4 or self.workers < 1:
            raise ConfigError("max_steps, steps_per_period and workers must be positive")

    def family_members(self) -> list:
        """Expand the family list into concrete ratio vectors (deterministic)."""
        import numpy as np

        n = self.system.n
        out = []
        for fi, fam in enumerate(self.families):
            if isinstance(fam, (list, tuple)):
                ratios = tuple(str(r) for r in fam)
                if len(ratios) != n:
                    raise ConfigError(f"family {fam} has wrong length for n={n}")
                out.append(FamilyMember("explicit:" + ",".join(ratios), 0, ratios))
            elif fam in NAMED_FAMILIES:
                if n != 2:
                    raise ConfigError(f"named family {fam!r} needs n = 2")
                out.append(FamilyMember(fam, 0, NAMED_FAMILIES[fam]))
            elif isinstance(fam, str) and fam.startswith("random"):
                count = int(fam.split(":", 1)[1]) if ":" in fam else 1
                rng = np.random.default_rng(np.random.SeedSequence([self.seed, 7919, fi]))
                for k in range(count):
                    r = rng.uniform(1.0, 2.0, size=n - 1)
                    out.append(FamilyMember("random", k, ("1",) + tuple(repr(float(x)) for x in r)))
            else:
                raise ConfigError(f"unknown frequency family {fam!r}")
        return out


def load_scan_dict(data: dict, base: Path = Path("."), source: str = "<dict>") -> ScanConfig:
    sysval = _require(data, "system", source)
    if isinstance(sysval, dict):
        system = load_system_dict(sysval, source + ":system")
    else:
        system = load_system(_resolve(base, sysval))
    known = {"system", "epsilons", "N", "b", "seed", "families", "max_steps",
             "steps_per_period", "workers", "output"}
    extra = {k: v for k, v in data.items() if k not in known}
    if extra:
        raise ConfigError(f"{source}: unknown keys {sorted(extra)}")
    output = data.get("output")
    return ScanConfig(
        system=system,
        epsilons=tuple(_require(data, "epsilons", source)),
        N=int(data.get("N", 2)),
        b=float(data.get("b", 0.1)),
        seed=int(data.get("seed", 0)),
        families=tuple(tuple(f) if isinstance(f, list) else f for f in data.get("families", ["sqrt2"])),
        max_steps=int(data.get("max_steps", 20_000_000)),
        steps_per_period=int(data.get("steps_per_period", 40)),
        workers=int(data.get("workers", 1)),
        output=None if output is None else str(_resolve(base, output)),
    )


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def load_scan(path) -> ScanConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return load_scan_dict(data, path.parent, str(path))


def builtin_system_path(name: str = "coupled") -> Path:
    return Path(__file__).parent / "data" / f"{name}.toml"
