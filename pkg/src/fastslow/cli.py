"""Command line entry point: ``fastslow {simulate,scan,normalize,dirichlet,certify}``.

Every subcommand exits with status 0 only when all of its checks pass.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import ConfigError, builtin_system_path, load_scan, load_system
from .diophantine import (CertificationError, DirichletError, SearchBudgetExceeded,
                          build_resonance_model, check_capped, check_sequence_element,
                          dirichlet_capped, dirichlet_sequence, verify_resonance_model)
from .fields import parse_real
from .harness import run_certification, run_drift_scan, sample_initial_state, scan_report
from .integrator import SCHEMES, IntegratorConfig, integrate, max_drift, write_csv
from .normal_form import certificate_lines, normalize


def _system(args):
    return load_system(args.system) if args.system else load_system(builtin_system_path())


def cmd_simulate(args) -> int:
    system = _system(args)
    freq = system.frequencies(args.epsilon)
    rng = np.random.default_rng(args.seed)
    state0 = sample_initial_state(system, freq, rng)
    T = args.T if args.T is not None else freq.epsilon ** (-2)
    if args.dt is not None:
        cfg = IntegratorConfig(args.dt, T, args.stride, args.scheme)
    else:
        cfg = IntegratorConfig.default(freq, T, args.steps_per_period,
                                       sample_stride=args.stride, scheme=args.scheme)
    traj = integrate(state0, freq, system.spec, cfg)
    if args.output:
        write_csv(traj, args.output)
    drift, rel = max_drift(traj)
    print(f"epsilon = {freq.epsilon:.17g}")
    print(f"dt = {cfg.dt:.17g}")
    print(f"steps = {traj.steps_done}")
    print(f"status = {traj.status}")
    print(f"max_drift_fast = {drift:.6e}")
    print(f"max_rel_drift_fast = {rel:.6e}")
    print(f"max_abs_drift_total = {traj.max_abs_drift_total:.6e}")
    if traj.message:
        print(traj.message)
    return 0 if traj.status == "ok" else 1


def cmd_scan(args) -> int:
    cfg = load_scan(args.config)
    if args.output:
        cfg = replace(cfg, output=args.output)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    records = run_drift_scan(cfg)
    for line in scan_report(records, cfg):
        print(line)
    return 0 if all(r.status == "ok" for r in records) else 1


def cmd_normalize(args) -> int:
    system = _system(args)
    freq = system.frequencies(args.epsilon)
    model = build_resonance_model(freq.nu_exact, args.N, Fraction(args.b))
    result = normalize(system.spec, freq, model, args.N, mode=args.mode)
    for line in certificate_lines(result):
        print(line)
    if args.output:
        Path(args.output).write_text(
            "# normalized\n" + result.normalized.serialize()
            + "# remainder\n" + result.remainder.serialize()
            + "".join(f"# generator {g.stage}\n" + g.chi.serialize() for g in result.generators))
    return 0 if result.certified else 1


def cmd_dirichlet(args) -> int:
    nu = [parse_real(x) for x in args.values]
    out: dict = {"input": args.values}
    ok = True
    if args.qcap is not None:
        a = dirichlet_capped(nu, args.qcap)
        good = check_capped(nu, a, args.qcap)
        ok &= good
        out["capped"] = {"q": a.qden, "p": list(a.pnums), "errors": list(a.errors), "valid": good}
    if args.count:
        seq = dirichlet_sequence(nu, args.count)
        good = all(check_sequence_element(nu, a) for a in seq)
        ok &= good
        out["sequence"] = [{"q": a.qden, "p": list(a.pnums)} for a in seq]
        out["sequence_valid"] = good
    if args.N is not None:
        full = [Fraction(1)] + nu
        model = build_resonance_model(full, args.N, Fraction(args.b))
        try:
            verify_resonance_model(model)
            good = True
        except CertificationError:
            good = False
        ok &= good
        out["model"] = {"qden": model.qden, "nu_tilde": [str(t) for t in model.nu_tilde],
                        "alpha": str(model.alpha), "valid": good}
    print(json.dumps(out))
    return 0 if ok else 1


def cmd_certify(args) -> int:
    system = _system(args)
    report = run_certification(system, args.N, args.b, args.epsilon, mode=args.mode)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fastslow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def system_args(p):
        p.add_argument("--system", help="system TOML file (default: bundled coupled system)")
        p.add_argument("--epsilon", type=float, help="1/min(omega); required unless the file gives omega")

    p = sub.add_parser("simulate", help="integrate one trajectory and report the drift of h_omega")
    system_args(p)
    p.add_argument("--T", type=float, help="horizon (default eps^-2)")
    p.add_argument("--dt", type=float)
    p.add_argument("--steps-per-period", type=int, default=40)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--scheme", choices=SCHEMES, default=SCHEMES[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="CSV of samples")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="drift scan over an epsilon grid and frequency families")
    p.add_argument("config")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("normalize", help="normal form certificate")
    system_args(p)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--b", default="1/10")
    p.add_argument("--mode", choices=("auto", "exact", "interval"), default="auto")
    p.add_argument("--output", help="file for the serialized polynomials")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("dirichlet", help="Dirichlet approximations and resonance models (JSON)")
    p.add_argument("values", nargs="+", help="ratios nu_2..nu_n (nu_1 = 1), e.g. 'sqrt(2)'")
    p.add_argument("--qcap", type=int)
    p.add_argument("--count", type=int, default=0, help="length of the uncapped sequence")
    p.add_argument("--N", type=int, help="build the resonance model of order N")
    p.add_argument("--b", default="1")
    p.set_defaults(func=cmd_dirichlet)

    p = sub.add_parser("certify", help="normal form plus drift budget")
    system_args(p)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--b", type=float, default=0.1)
    p.add_argument("--mode", choices=("auto", "exact", "interval"), default="auto")
    p.set_defaults(func=cmd_certify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DirichletError, SearchBudgetExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
