from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjreg.coeffs import ProblemSpec
from hjreg.errors import AdmissibilityError, BracketError, RangeError
from hjreg.exponents import (
    admissible_dt,
    admissible_dx,
    build_report,
    build_report_from_bounds,
    chain_value,
    const_K,
    consts_AB,
    effective_bounds,
    legendre_constant,
    phi,
    required_margin,
    solve_gamma,
    space_bound,
    transform_a,
)

from conftest import cosine_doc


def legendre_scan(b, q, v, n=400_001):
    """``sup_xi (v xi - b |xi|^q)`` by brute force on a dense grid."""
    hi = 2.0 * (abs(v) / (q * b)) ** (1.0 / (q - 1.0)) + 1.0
    xi = np.linspace(-hi, hi, n)
    return float(np.max(v * xi - b * np.abs(xi) ** q))


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("b", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("v", [0.5, 1.0, 2.0])
def test_transform_matches_legendre_scan(q, b, v):
    p = q / (q - 1.0)
    assert transform_a(b, p) * v**p == pytest.approx(legendre_scan(b, q, v), rel=1e-6)


def test_transform_examples():
    assert transform_a(1.0, 2.0) == pytest.approx(0.25, abs=1e-15)
    assert transform_a(0.25, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert transform_a(1.0, 1.5) == pytest.approx(2.0 / (3.0 * math.sqrt(3.0)), abs=1e-15)


def test_transform_vectorised_and_errors():
    out = transform_a(np.array([1.0, 0.25]), 2.0)
    np.testing.assert_allclose(out, [0.25, 1.0])
    with pytest.raises(RangeError):
        transform_a(0.0, 2.0)
    with pytest.raises(RangeError):
        legendre_constant(1.0)


@pytest.mark.parametrize("args,expected", [((1, 1, 2, 1), 7.0), ((1, 2, 2, 1), 4.0), ((2, 1, 2, 1), 28.0)])
def test_const_K(args, expected):
    assert const_K(*args) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "args,expected", [((1, 1, 2), (4.0, 5.0)), ((1, 8, 2), (1.01, 2.01)), ((2, 1, 2), (8.0, 36.0))]
)
def test_consts_AB(args, expected):
    assert consts_AB(*args) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "A,p,gamma",
    [
        (2.0, 2.0, 2 - math.sqrt(2)),  # s^2 - 4s + 2
        (4.0, 2.0, 4 - 2 * math.sqrt(3)),  # s^2 - 8s + 4
        (8.0, 2.0, 8 - 2 * math.sqrt(14)),  # s^2 - 16s + 8
        (2.0, 3.0, math.sqrt(3) - 1),  # (s - 2)(s^2 + 2s - 2)
    ],
)
def test_gamma_closed_forms(A, p, gamma):
    g, theta = solve_gamma(A, p)
    assert g == pytest.approx(gamma, abs=1e-12)
    assert theta == pytest.approx(1.0 / (1.0 - gamma), rel=1e-12)


def test_gamma_theta_A2_p2():
    _, theta = solve_gamma(2.0, 2.0)
    assert theta == pytest.approx(1 + math.sqrt(2), abs=1e-10)
    _, theta = solve_gamma(2.0, 3.0)
    assert theta == pytest.approx(2 + math.sqrt(3), abs=1e-10)


def test_gamma_needs_A_above_one():
    with pytest.raises(BracketError):
        solve_gamma(1.0, 2.0)
    with pytest.raises(BracketError):
        solve_gamma(0.5, 2.0)


@given(st.floats(1.01, 200.0), st.floats(1.05, 6.0))
def test_gamma_is_smallest_root(A, p):
    g, theta = solve_gamma(A, p)
    lo, hi = 1 - 1 / p, A ** (1 / (p - 1))
    assert lo < g < hi
    assert abs(phi(g, A, p)) <= 1e-10 * max(1.0, A * p)
    assert theta > p
    below = np.linspace(lo, g, 200, endpoint=False)
    assert np.all(np.array([phi(s, A, p) for s in below]) > 0)


@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(1.1, 5.0), st.floats(0.1, 5.0))
def test_report_invariants(M, delta, q, T):
    rep = build_report_from_bounds(M, delta, q, T)
    assert rep.K > 0 and rep.A > 1 and rep.B > 0
    assert rep.A_rh == 2 * rep.A
    assert rep.phi_residual <= 1e-10 * max(1.0, rep.A_rh * rep.p)
    assert rep.theta > rep.p
    assert 0 < rep.ex_space < 1 and 0 < rep.ex_time < 1
    assert abs(1 / rep.p + 1 / rep.q - 1) <= 1e-12


def test_report_unit_bounds():
    rep = build_report_from_bounds(1.0, 1.0, 2.0, 1.0)
    assert rep.A == 4.0 and rep.K == 7.0 and rep.B == 5.0
    # the regularity exponent uses the doubled constant
    assert rep.gamma == pytest.approx(8 - 2 * math.sqrt(14), abs=1e-12)


def test_effective_bounds_fold_in_a():
    spec = ProblemSpec.from_dict(cosine_doc())
    assert effective_bounds(spec) == pytest.approx((1.0, 0.25))
    rep = build_report(spec)
    assert rep.delta_eff == 0.25 and rep.A == 16.0
    assert rep.K == pytest.approx(const_K(1.0, 0.25, 2.0, 1.0))
    assert required_margin(spec) == pytest.approx(5.0)


def _report_theta(theta, p=2.0, M=1.0):
    base = build_report_from_bounds(M, 1.0, p / (p - 1.0), 1.0)
    return dataclasses.replace(base, theta=theta, gamma=1 - 1 / theta)


def test_space_bound_zero():
    assert space_bound(_report_theta(1 + math.sqrt(2)), 1.0, 1.0, 0.0) == (0.0, 0.0)


def test_space_bound_h_minimises_chain():
    theta = 1 + math.sqrt(2)
    rep = _report_theta(theta)
    h, bound = space_bound(rep, 1.0, 1.0, 0.01)
    assert h == pytest.approx(((2 - 1) / (1 - 2 / theta) * 0.01) ** (theta / (theta - 1)), rel=1e-12)
    assert 0 < bound < math.inf
    hs = np.geomspace(h / 100, 1.0, 20001)
    # h is the exact minimiser of the detour term h^{1-p} (C0 h^{1-1/theta} + dx)^p
    lead = hs ** (1 - 2.0) * (hs ** (1 - 1 / theta) + 0.01) ** 2
    h_lead = hs[np.argmin(lead)]
    assert abs(h - h_lead) / h_lead <= 1e-3
    # the full chain (with the drift term M^p h) is within 1% of its own minimum there
    vals = np.array([chain_value(rep, 1.0, 1.0, 0.01, x) for x in hs])
    assert bound <= vals.min() * 1.01


def test_space_bound_monotone_in_dx():
    rep = _report_theta(1 + math.sqrt(2))
    assert space_bound(rep, 1.0, 1.0, 0.02)[1] > space_bound(rep, 1.0, 1.0, 0.01)[1]


def test_space_bound_rejects_inadmissible():
    rep = _report_theta(1 + math.sqrt(2))
    with pytest.raises(AdmissibilityError):
        space_bound(rep, 1.0, 1.0, 2.0)
    with pytest.raises(RangeError):
        space_bound(rep, 1.0, 0.0, 0.1)


def test_admissibility():
    rep = _report_theta(1 + math.sqrt(2))
    assert admissible_dx(rep, 1.0, 1.0, 0.0)
    assert not admissible_dx(rep, 100.0, 1.0, 2.0)  # capped at 1
    assert admissible_dx(rep, 100.0, 1.0, 1.0)
    assert admissible_dt(rep, 1.0, 1.0, 0.5, 1e-12)
    assert not admissible_dt(rep, 1.0, 1.0, 0.5, 0.5)
