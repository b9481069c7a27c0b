import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import KINDS, build, bumpy_flux
from lwrctl.audit import oracle_audit
from lwrctl.controller import (
    CONSTRAINT_TOL,
    OracleGrid,
    grid_scan_oracle,
    grid_scan_two_input,
    solve_left,
    solve_right,
    solve_two_input,
)
from lwrctl.flux import convexity_split, in_intervals
from lwrctl.functionals import rate_g, rate_k

TOL = CONSTRAINT_TOL


def sets(m, u_star):
    return convexity_split(m, 0.0).left_set, convexity_split(m, u_star).right_set


def check_certificate(dec, trace, C, D, m, u_star, intervals):
    v = dec.value
    s, z = (v, trace) if dec.side == "left" else (trace, v)
    assert in_intervals(v, intervals, tol=1e-12)
    assert rate_g(s, z, m, u_star) <= -C + TOL
    assert rate_k(s, z, m) <= D + TOL
    for c in dec.candidates:
        assert v * v <= c * c + 1e-15
        cs, cz = (c, trace) if dec.side == "left" else (trace, c)
        on_g = abs(rate_g(cs, cz, m, u_star) + C) <= 2 * TOL
        on_k = abs(rate_k(cs, cz, m) - D) <= 2 * TOL
        assert on_g or on_k


def test_left_zero_input_when_feasible(greenshields):
    m = greenshields
    I_a, _ = sets(m, 0.05)
    z = 0.5
    assert rate_g(0.0, z, m, 0.05) <= 0
    dec = solve_left(z, 0.0, 1.0, m, 0.05, I_a)
    assert dec.feasible and dec.value == 0.0 and dec.active == "interior_minimum"


def test_left_case_split_structure(greenshields):
    m = greenshields
    I_a, _ = sets(m, 1 / 3)
    assert I_a == ((0.0, pytest.approx(0.25, abs=1e-9)),)
    p = lambda s: rate_g(s, 1 / 3, m, 1 / 3)
    assert p(0.0) == pytest.approx(7 / 162, abs=1e-15)
    assert p(0.25) == pytest.approx(1.543e-3, abs=1e-6)
    s = np.linspace(0, 0.25, 1001)
    assert np.all(np.diff(p(s)) <= 0)
    # p stays positive, so no C >= 0 is reachable through a left input
    for C in (0.0, 1e-3, 0.02):
        dec = solve_left(1 / 3, C, 1.0, m, 1 / 3, I_a)
        ref = grid_scan_oracle("left", 1 / 3, C, 1.0, m, 1 / 3, I_a)
        assert not dec.feasible and not ref.feasible
        assert dec.violation > 0 and dec.active == "infeasible"


def test_right_returns_u1(greenshields):
    m = greenshields
    _, C_b = sets(m, 1 / 3)
    u1 = C_b[0][0]
    dec = solve_right(u1, 0.0, 0.1, m, 1 / 3, C_b)
    assert dec.feasible and dec.value == u1 == pytest.approx(5 / 12, abs=1e-9)


def test_right_split_parameters(greenshields):
    m = greenshields
    _, C_b = sets(m, 1 / 3)
    assert C_b[0][0] == pytest.approx(5 / 12, abs=1e-9) and C_b[-1][1] == 1.0
    assert max(1 / 3, m.u_hat) == 0.5 and min(1 / 3, m.u_hat) == pytest.approx(1 / 3)


@pytest.mark.parametrize("kind", KINDS)
def test_monotone_structure(kind):
    m = build(kind)
    I_a = convexity_split(m, 0.0).left_set
    u2 = I_a[0][1]
    z = 0.4
    s = np.concatenate([np.linspace(lo, hi, 500) for lo, hi in I_a])
    ell = rate_k(s, z, m)
    assert np.all(np.diff(ell) >= -1e-15)
    for u_star in np.linspace(u2, 1.0, 5):
        p = rate_g(s, z, m, u_star)
        assert np.all(np.diff(p) <= 1e-15)
    for u_star in (0.1, 0.25, 0.5):
        C_b = convexity_split(m, u_star).right_set
        if C_b[0][0] <= m.u_hat:
            zz = np.concatenate([np.linspace(lo, hi, 2001) for lo, hi in C_b])
            rho = rate_k(0.3, zz, m)
            assert abs(zz[np.argmin(rho)] - m.u_hat) <= 1e-3


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("side", ["left", "right"])
def test_oracle_equivalence_sample(kind, side):
    res = oracle_audit(build(kind), side, 300, seed=11, resolution=20_000)
    assert res.passed, res.mismatches[:3]
    assert res.feasible > 30


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    side=st.sampled_from(["left", "right"]),
    trace=st.floats(0.0, 1.0),
    u_star=st.floats(0.0, 1.0),
    c=st.floats(0.0, 0.05),
    d=st.floats(0.0, 0.1),
)
def test_feasible_decisions_are_certified(kind, side, trace, u_star, c, d):
    m = build(kind)
    I_a, C_b = sets(m, u_star)
    if side == "left":
        dec, ivs = solve_left(trace, c, d, m, u_star, I_a), I_a
    else:
        dec, ivs = solve_right(trace, c, d, m, u_star, C_b), C_b
    if dec.feasible:
        assert dec.violation == 0.0
        check_certificate(dec, trace, c, d, m, u_star, ivs)
    else:
        assert dec.violation > 0 and in_intervals(dec.value, ivs, tol=1e-12)


def test_minimality_against_grid(greenshields):
    m = greenshields
    rng = np.random.default_rng(5)
    I_a, _ = sets(m, 0.1)
    xs = np.linspace(0, I_a[0][1], 20001)
    hits = 0
    for _ in range(200):
        z, C, D = rng.uniform(0, 1), rng.uniform(0, 0.02), rng.uniform(0, 0.05)
        dec = solve_left(z, C, D, m, 0.1, I_a)
        ok = (rate_g(xs, z, m, 0.1) <= -C + TOL) & (rate_k(xs, z, m) <= D + TOL)
        if dec.feasible:
            hits += 1
            assert not np.any(ok & (xs * xs < dec.value**2 - 1e-9))
        else:
            assert not ok.any()
    assert hits > 20


def test_non_contiguous_admissible_set():
    m = bumpy_flux()
    I_a = convexity_split(m, 0.0).left_set
    assert len(I_a) == 2
    grid = OracleGrid(m, 50_000)
    rng = np.random.default_rng(2)
    later = 0
    for _ in range(400):
        z, u_star = rng.uniform(0, 1), rng.uniform(0, 1)
        scale = abs(rate_g(0.0, z, m, u_star)) + abs(rate_k(0.0, z, m)) + 1e-3
        C, D = rng.uniform() * scale * 0.5, rng.uniform() * scale * 0.5
        dec = solve_left(z, C, D, m, u_star, I_a)
        ref = grid_scan_oracle("left", z, C, D, m, u_star, I_a, 50_000, grid=grid)
        assert dec.feasible == ref.feasible
        if dec.feasible:
            assert dec.value == pytest.approx(ref.value, abs=1e-6)
            later += dec.value >= I_a[1][0]
    # pick a right trace for which only the second component is feasible
    assert later > 0


def test_oracle_sentinels(greenshields):
    m = greenshields
    I_a, C_b = sets(m, 1 / 3)
    assert grid_scan_oracle("left", 0.3, math.inf, math.inf, m, 1 / 3, I_a).value == 0.0
    right = grid_scan_oracle("right", 0.3, math.inf, math.inf, m, 1 / 3, C_b)
    assert right.feasible and right.value == pytest.approx(5 / 12, abs=1e-9)
    assert not grid_scan_oracle("left", 0.3, 0.0, 0.0, m, 1 / 3, []).feasible
    assert not solve_left(0.3, 0.0, 0.0, m, 1 / 3, []).feasible
    with pytest.raises(ValueError):
        grid_scan_oracle("left", 0.3, 0.0, 0.0, m, 1 / 3, I_a, resolution=10)


@pytest.mark.parametrize("bad", [dict(trace=1.5), dict(trace=-0.1), dict(C=-1.0), dict(D=-1.0)])
def test_input_errors(greenshields, bad):
    args = dict(trace=0.3, C=0.0, D=0.0) | bad
    I_a, C_b = sets(greenshields, 1 / 3)
    with pytest.raises(ValueError):
        solve_left(args["trace"], args["C"], args["D"], greenshields, 1 / 3, I_a)
    with pytest.raises(ValueError):
        solve_right(args["trace"], args["C"], args["D"], greenshields, 1 / 3, C_b)


def test_barrier_trace_only_moves_invariance(greenshields):
    m = greenshields
    I_a, _ = sets(m, 0.1)
    base = solve_left(0.6, 0.0, 0.01, m, 0.1, I_a)
    strict = solve_left(0.6, 0.0, 0.01, m, 0.1, I_a, z_barrier=0.1)
    # k(s, 0.1) >= k(s, 0.6) here, so the conservative trace can only tighten
    assert rate_k(0.0, 0.1, m) >= rate_k(0.0, 0.6, m)
    if strict.feasible:
        assert rate_k(strict.value, 0.1, m) <= 0.01 + TOL
        assert not base.feasible or base.value <= strict.value + 1e-12


# two-input baseline


def test_two_input_seed(greenshields):
    m = greenshields
    # u* = 0: u_1 = 1/4 and g(0, 1/4) = -K(1/4) = -1/48
    I_a, C_b = sets(m, 0.0)
    assert rate_g(0.0, 0.25, m, 0.0) == pytest.approx(-1 / 48)
    dec = solve_two_input(0.1, 0.1, 0.01, 1.0, m, 0.0, I_a, C_b)
    assert dec.feasible and dec.active == "interior_minimum"
    assert dec.value == (0.0, C_b[0][0])
    assert dec.omega_a == 0.0 and dec.omega_b == pytest.approx(0.25, abs=1e-9)


def _two_input_cases(m, n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        u_star = rng.uniform(0.05, 0.95)
        I_a, C_b = sets(m, u_star)
        C, D = rng.uniform(0, 0.02), rng.uniform(0, 0.05)
        yield u_star, I_a, C_b, C, D


@pytest.mark.parametrize("kind", KINDS)
def test_two_input_matches_dense_grid(kind):
    m = build(kind)
    for u_star, I_a, C_b, C, D in _two_input_cases(m, 6, 4):
        dec = solve_two_input(0.2, 0.6, C, D, m, u_star, I_a, C_b)
        ref = grid_scan_two_input(C, D, m, u_star, I_a, C_b, resolution=2000)
        assert dec.feasible == ref.feasible
        if dec.feasible:
            a, b = dec.value
            assert rate_g(a, b, m, u_star) <= -C + TOL and rate_k(a, b, m) <= D + TOL
            obj, ref_obj = a * a + b * b, ref.value[0] ** 2 + ref.value[1] ** 2
            assert obj <= ref_obj + 1e-4
            assert abs(obj - ref_obj) <= 1e-4


@pytest.mark.parametrize("kind", KINDS)
def test_two_input_dominates_single_slice(kind):
    m = build(kind)
    for u_star, I_a, C_b, C, D in _two_input_cases(m, 20, 8):
        two = solve_two_input(0.2, 0.6, C, D, m, u_star, I_a, C_b)
        for z in np.linspace(C_b[0][0], C_b[-1][1], 7):
            left = solve_left(float(z), C, D, m, u_star, I_a)
            if left.feasible:
                assert two.feasible
                a, b = two.value
                assert a * a + b * b <= left.value**2 + z * z + 1e-9


def test_two_input_custom_trace(greenshields):
    m = greenshields
    I_a, C_b = sets(m, 1 / 3)
    # the boundary admits only densities up to 0.2 whatever omega_b is
    trace = lambda b: (min(b, 0.2), min(b, 0.2))
    dec = solve_two_input(0.1, 0.1, 0.001, 0.05, m, 1 / 3, I_a, C_b, right_trace=trace)
    a, b = dec.value
    assert in_intervals(a, I_a) and in_intervals(b, C_b)
    if dec.feasible:
        assert rate_g(a, 0.2, m, 1 / 3) <= -0.001 + TOL and rate_k(a, 0.2, m) <= 0.05 + TOL
    else:
        assert dec.violation > 0
