"""Hoelder regularity toolkit for Hamilton-Jacobi equations with superlinear gradient growth.

Modules:

* ``coeffs``: expression-defined coefficients and problem specs;
* ``exponents``: explicit constants, ``gamma``, ``theta`` and the Hoelder exponents;
* ``solver``: semi-Lagrangian DP value grid, trajectory extraction and refinement, Hopf-Lax oracle;
* ``revholder``: reverse-Hoelder checks, debiasing and the ``xi(tau)`` extremal problem;
* ``probe``: numerical certification of the trajectory lemmas and the regularity theorem.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .coeffs import CoefficientField, ProblemSpec, eval_field, parse_expression, parse_problem, validate_bounds
from .exponents import ExponentReport, build_report, build_report_from_bounds, solve_gamma, transform_a
from .revholder import SampledFunction, check_rh, debias, extremal, extremal_bruteforce, lemma_constant, xi_curve
from .solver import Trajectory, ValueGrid, action, extract_trajectory, hopf_lax, refine_trajectory, solve_dp
from .probe import ProbeReport, battery, run_probe

__all__ = [
    "CoefficientField",
    "ProblemSpec",
    "eval_field",
    "parse_expression",
    "parse_problem",
    "validate_bounds",
    "ExponentReport",
    "build_report",
    "build_report_from_bounds",
    "solve_gamma",
    "transform_a",
    "SampledFunction",
    "check_rh",
    "debias",
    "extremal",
    "extremal_bruteforce",
    "lemma_constant",
    "xi_curve",
    "Trajectory",
    "ValueGrid",
    "action",
    "extract_trajectory",
    "hopf_lax",
    "refine_trajectory",
    "solve_dp",
    "ProbeReport",
    "battery",
    "run_probe",
]
