"""Adiabatic invariants of fast-slow oscillator systems.

Exact Lie-transform normal forms with a small-denominator cutoff, simultaneous
Dirichlet approximation of the fast frequencies, and a splitting integrator
with exact fast rotation for measuring the drift of ``h_omega``.
"""
from .diophantine import (ResonanceModel, build_resonance_model, dirichlet_capped,
                          dirichlet_sequence, is_alpha_resonant, verify_resonance_model)
from .integrator import IntegratorConfig, integrate, max_drift, step
from .model import (FrequencyVector, FullState, SlowHamiltonianSpec, eval_full_hamiltonian,
                    from_complex, h_omega, to_complex)
from .normal_form import NormalFormResult, lie_transform, normalize, solve_homological
from .poisson import Frame, GradedPolynomial, bracket_with_hnu, poisson_bracket

__version__ = "0.1.0"

__all__ = [
    "Frame", "FrequencyVector", "FullState", "GradedPolynomial", "IntegratorConfig",
    "NormalFormResult", "ResonanceModel", "SlowHamiltonianSpec", "bracket_with_hnu",
    "build_resonance_model", "dirichlet_capped", "dirichlet_sequence", "eval_full_hamiltonian",
    "from_complex", "h_omega", "integrate", "is_alpha_resonant", "lie_transform", "max_drift",
    "normalize", "poisson_bracket", "solve_homological", "step", "to_complex",
    "verify_resonance_model",
]
