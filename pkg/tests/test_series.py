"""Algebra tests for the sparse Taylor-Fourier series."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resnf.series import (
    DimensionMismatchError,
    MultiIndex,
    NormWeights,
    RationalComplex,
    TaylorFourierSeries,
    TruncationPolicy,
    dump_series,
    lie_derivative,
    lie_transform,
    load_series,
    poisson_bracket,
)

TFS = TaylorFourierSeries
N1, N2 = 2, 1
LOOSE = TruncationPolicy(max_grade=12, max_harmonic=12)


def rand_series(rng, n1=N1, n2=N2, n_terms=5, max_l=2, max_k=2, max_m=2,
                grade=None, policy=LOOSE):
    terms = {}
    while len(terms) < n_terms:
        l = tuple(int(rng.integers(0, max_l + 1)) for _ in range(n1))
        k = tuple(int(rng.integers(-max_k, max_k + 1)) for _ in range(n1))
        m1 = tuple(int(rng.integers(0, max_m + 1)) for _ in range(n2))
        m2 = tuple(int(rng.integers(0, max_m + 1)) for _ in range(n2))
        idx = MultiIndex(l, k, m1, m2)
        if grade is not None and idx.grade != grade:
            continue
        c = complex(rng.standard_normal(), rng.standard_normal())
        terms[idx] = c
    return TFS(n1, n2, terms, policy)


def series_allclose(a, b, tol=1e-12):
    return (a - b).max_abs_coeff() <= tol


# ---------------------------------------------------------------- add / mul


def test_additive_identity():
    rng = np.random.default_rng(0)
    f = rand_series(rng)
    assert f + TFS.zero(N1, N2, LOOSE) == f


def test_cancellation_purges_terms():
    c = TFS.cos_angle(N1, N2, (1, 0), 2.0)
    assert (c + c.scale(-1.0)).is_zero()


def test_symbolic_sum_hand_check():
    # (p1 + e^{i q2}) + (p1 - e^{i q2}) = 2 p1
    p1 = TFS.action(N1, N2, 0)
    e = TFS.angle_exp(N1, N2, (0, 1))
    out = (p1 + e) + (p1 - e)
    assert series_allclose(out, p1.scale(2.0))


def test_add_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        TFS.zero(2, 1) + TFS.zero(3, 1)


def test_multiplicative_identity():
    rng = np.random.default_rng(1)
    f = rand_series(rng)
    one = TFS.constant(N1, N2, 1.0, LOOSE)
    assert series_allclose(f * one, f)


def test_cos_squared_identity():
    # cos q1 * cos q1 = 1/2 + 1/2 cos 2 q1
    c = TFS.cos_angle(N1, N2, (1, 0))
    expect = TFS.constant(N1, N2, 0.5) + TFS.cos_angle(N1, N2, (2, 0), 0.5)
    assert series_allclose(c * c, expect)


def test_grading_of_product():
    p1 = TFS.action(N1, N2, 0)
    xe = TFS.xi(N1, N2, 0) * TFS.eta(N1, N2, 0)
    out = p1 * xe
    (idx, c), = out.terms.items()
    assert idx.grade == 4
    assert idx.l == (1, 0) and idx.m1 == (1,) and idx.m2 == (1,)


def test_truncation_drops_high_grade():
    tight = TruncationPolicy(max_grade=2, max_harmonic=4)
    p1 = TFS.action(N1, N2, 0, truncation=tight)
    assert (p1 * p1).is_zero()


# ---------------------------------------------------------------- brackets


def test_canonical_pairs():
    q1 = TFS.angle_exp(N1, N2, (0, 0))  # placeholder; use derivative definition
    # {q_j, p_j} = 1 probed through exp(i q1) since bare angles are not series:
    # {e^{i q1}, p1} = i e^{i q1}
    e = TFS.angle_exp(N1, N2, (1, 0))
    p1 = TFS.action(N1, N2, 0)
    out = poisson_bracket(e, p1)
    assert series_allclose(out, e.scale(1j))
    # transverse pair directly: {xi, eta} = 1
    xi = TFS.xi(N1, N2, 0)
    eta = TFS.eta(N1, N2, 0)
    assert series_allclose(poisson_bracket(xi, eta), TFS.constant(N1, N2, 1.0))


def test_bracket_symbolic_oracle():
    # {xi eta, xi} = -xi
    xi = TFS.xi(N1, N2, 0)
    eta = TFS.eta(N1, N2, 0)
    out = poisson_bracket(xi * eta, xi)
    assert series_allclose(out, xi.scale(-1.0))


@pytest.mark.parametrize("seed", range(4))
def test_grade_closure(seed):
    rng = np.random.default_rng(seed)
    f = rand_series(rng, n1=4, n2=2, grade=3, max_l=1, max_m=3)
    g = rand_series(rng, n1=4, n2=2, grade=2, max_l=1, max_m=2)
    out = poisson_bracket(f, g)
    assert all(idx.grade == 3 for idx in out.terms)


def test_antisymmetry_and_jacobi():
    rng = np.random.default_rng(7)
    f, g, h = (rand_series(rng, n_terms=4) for _ in range(3))
    assert series_allclose(poisson_bracket(f, g), poisson_bracket(g, f).scale(-1.0), 1e-12)
    jac = poisson_bracket(f, poisson_bracket(g, h)) \
        + poisson_bracket(g, poisson_bracket(h, f)) \
        + poisson_bracket(h, poisson_bracket(f, g))
    assert jac.max_abs_coeff() <= 1e-12 * max(1.0, f.max_abs_coeff())


def test_leibniz():
    rng = np.random.default_rng(8)
    f, g, h = (rand_series(rng, n_terms=4, max_l=1, max_k=1, max_m=1) for _ in range(3))
    lhs = poisson_bracket(f, g * h)
    rhs = poisson_bracket(f, g) * h + g * poisson_bracket(f, h)
    assert (lhs - rhs).max_abs_coeff() <= 1e-11


# ---------------------------------------------------------------- projections, norms


def test_average_fast_angle_examples():
    c = TFS.cos_angle(N1, N2, (1, 1))
    assert c.average_fast_angle().is_zero()
    f = TFS.cos_angle(N1, N2, (0, 1), 2.0)
    assert f.average_fast_angle() == f
    p1 = TFS.action(N1, N2, 0)
    mixed = p1 + p1 * TFS.cos_angle(N1, N2, (1, 0))
    assert series_allclose(mixed.average_fast_angle(), p1)


def test_average_is_projection_and_contracts_norm():
    rng = np.random.default_rng(3)
    w = NormWeights(0.7, 0.9, 1.3)
    for _ in range(50):
        f = rand_series(rng, n_terms=6)
        a = f.average_fast_angle()
        assert a.average_fast_angle() == a
        assert a.weighted_norm(w) <= f.weighted_norm(w) + 1e-15


def test_weighted_norm_single_term():
    w = NormWeights(rho=0.5, sigma=0.8, R=2.0)
    f = TFS.angle_exp(N1, N2, (3, 0), 2.5)
    assert math.isclose(f.weighted_norm(w), 2.5 * math.exp(3 * 0.8), rel_tol=1e-14)
    assert TFS.zero(N1, N2).weighted_norm(w) == 0.0


def test_norm_triangle_and_algebra_bound():
    rng = np.random.default_rng(4)
    w = NormWeights(0.9, 0.6, 1.1)
    for _ in range(50):
        f = rand_series(rng, n_terms=5)
        g = rand_series(rng, n_terms=5)
        assert (f + g).weighted_norm(w) <= f.weighted_norm(w) + g.weighted_norm(w) + 1e-12
        assert (f * g).weighted_norm(w) <= f.weighted_norm(w) * g.weighted_norm(w) * (1 + 1e-12)


def test_cauchy_derivative_estimates():
    rng = np.random.default_rng(5)
    w = NormWeights(0.8, 0.7, 1.2)
    for _ in range(50):
        f = rand_series(rng, n_terms=6)
        d = rng.uniform(0.05, 0.95)
        shrunk = w.shrunk(d)
        base = f.weighted_norm(w)
        for j in range(N1):
            assert f.dp(j).weighted_norm(shrunk) <= base / (d * w.rho) + 1e-12
            assert f.dq(j).weighted_norm(shrunk) <= base / (math.e * d * w.sigma) + 1e-12
        for j in range(N2):
            assert f.dxi(j).weighted_norm(shrunk) <= base / (d * w.R) + 1e-12
            assert f.deta(j).weighted_norm(shrunk) <= base / (d * w.R) + 1e-12


# ---------------------------------------------------------------- grade decomposition


def test_grade_decompose_basic():
    p1 = TFS.action(N1, N2, 0)
    xi = TFS.xi(N1, N2, 0)
    parts = (p1 + xi).grade_decompose()
    assert set(parts) == {1, 2}
    assert parts[2] == p1 and parts[1] == xi
    assert TFS.zero(N1, N2).grade_decompose() == {}


def test_grade_decompose_reassembles():
    rng = np.random.default_rng(6)
    f = rand_series(rng, n_terms=8)
    total = TFS.zero(N1, N2, LOOSE)
    for comp in f.grade_decompose().values():
        total = total + comp
    assert total == f


# ---------------------------------------------------------------- Lie machinery


def test_lie_transform_identity():
    rng = np.random.default_rng(9)
    f = rand_series(rng)
    out = lie_transform(f, TFS.zero(N1, N2, LOOSE), 1, 6)
    assert out == f


def test_lie_transform_translation_oracle():
    # exp(L_{<zeta, q>}) f = f with p -> p - zeta under L_chi f = {f, chi}
    rng = np.random.default_rng(10)
    zeta = [0.3, -0.7]
    f = rand_series(rng, n_terms=5, max_m=0)
    moved = lie_transform(f, TFS.zero(N1, N2, LOOSE), 1, 10, zeta=zeta)
    pts = rng.standard_normal((5, N1))
    for p in pts:
        q = rng.standard_normal(N1)
        direct = f.evaluate(p - np.array(zeta), q, [0], [0])
        via = moved.evaluate(p, q, [0], [0])
        assert abs(direct - via) < 1e-10


def test_lie_transform_canonicity():
    # exp(L_chi){f, g} = {exp(L_chi) f, exp(L_chi) g} through the grading order
    rng = np.random.default_rng(11)
    pol = TruncationPolicy(max_grade=10, max_harmonic=10)
    chi = rand_series(rng, n_terms=3, grade=3, max_l=1, max_m=2, policy=pol)
    f = rand_series(rng, n_terms=3, grade=2, max_l=1, max_m=1, policy=pol)
    g = rand_series(rng, n_terms=3, grade=2, max_l=1, max_m=1, policy=pol)
    # chi of formal order 1; everything exact through order 3
    order = 3
    lhs = lie_transform(poisson_bracket(f, g), chi, 1, order)
    rhs = poisson_bracket(lie_transform(f, chi, 1, order), lie_transform(g, chi, 1, order))
    # compare the contributions generated by at most `order` applications
    diff = lhs - rhs
    small = [abs(c) for idx, c in diff.terms.items()]
    # truncation-order tail only: the mismatch lives beyond 3 generator powers
    scale = max(1.0, f.max_abs_coeff() * g.max_abs_coeff() * chi.max_abs_coeff() ** 3)
    tol = 25 * scale
    exact_part = [abs(c) for idx, c in diff.terms.items() if idx.grade <= 2 + order]
    assert all(v <= tol for v in small)
    assert all(v <= 1e-9 * scale for v in exact_part) or diff.is_zero()


def test_lie_derivative_matches_bracket():
    rng = np.random.default_rng(12)
    f = rand_series(rng, n_terms=4)
    chi = rand_series(rng, n_terms=4)
    assert lie_derivative(f, chi) == poisson_bracket(f, chi)


# ---------------------------------------------------------------- evaluation, reality


def test_evaluate_trivial():
    one = TFS.constant(N1, N2, 1.0)
    assert one.evaluate([0, 0], [0, 0], [0], [0]) == 1.0
    om = 1.7
    f = TFS.action(N1, N2, 0, om)
    assert abs(f.evaluate([2.0, 0.0], [0, 0], [0], [0]) - 2 * om) < 1e-15


def test_reality_on_real_points():
    # series built from a real Hamiltonian evaluate real on real points
    from resnf import build_seagull
    from resnf.model import chart_state_to_cartesian
    model, chart, ham = build_seagull(1.0, 1.0)
    rng = np.random.default_rng(13)
    for _ in range(5):
        qhat = rng.uniform(0, 2 * np.pi, 4)
        p = rng.uniform(-1e-2, 1e-2, 4)
        xt, yt = rng.uniform(-1e-2, 1e-2, 2)
        xi = (xt - 1j * yt) / np.sqrt(2)
        eta = (yt - 1j * xt) / np.sqrt(2)
        val = ham.evaluate(1e-3, p, qhat, [xi], [eta])
        assert abs(val.imag) < 1e-12


# ---------------------------------------------------------------- exact mode


def test_exact_mode_arithmetic():
    half = Fraction(1, 2)
    a = TFS.monomial(N1, N2, RationalComplex(half), l=(1, 0))
    b = TFS.monomial(N1, N2, RationalComplex(half), l=(1, 0))
    out = a + b
    (idx, c), = out.terms.items()
    assert c == RationalComplex(1)
    prod = a * b
    (_, cp), = prod.terms.items()
    assert cp == RationalComplex(Fraction(1, 4))


def test_rational_complex_division():
    c = RationalComplex(1, 2)
    d = RationalComplex(0, 2)
    out = c / d
    assert out == RationalComplex(1, Fraction(-1, 2))


# ---------------------------------------------------------------- serialization


def test_series_round_trip():
    rng = np.random.default_rng(14)
    f = rand_series(rng, n_terms=7)
    text = dump_series(f, eps_order=2)
    back = load_series(text, truncation=LOOSE)
    assert set(back) == {2}
    assert series_allclose(back[2], f, 0.0)


def test_load_rejects_missing_header():
    with pytest.raises(ValueError):
        load_series("1 0 | 0 0 | 0 | 0 | 1.0 0.0 | 0")


# ---------------------------------------------------------------- hypothesis fuzz


coeffs = st.complex_numbers(min_magnitude=1e-3, max_magnitude=10, allow_nan=False,
                            allow_infinity=False)


@st.composite
def small_series(draw):
    n = draw(st.integers(1, 4))
    terms = {}
    for _ in range(n):
        l = tuple(draw(st.integers(0, 2)) for _ in range(N1))
        k = tuple(draw(st.integers(-2, 2)) for _ in range(N1))
        m1 = (draw(st.integers(0, 2)),)
        m2 = (draw(st.integers(0, 2)),)
        terms[MultiIndex(l, k, m1, m2)] = draw(coeffs)
    return TFS(N1, N2, terms, LOOSE)


@given(small_series(), small_series())
@settings(max_examples=60, deadline=None)
def test_hypothesis_antisymmetry(f, g):
    assert series_allclose(poisson_bracket(f, g),
                           poisson_bracket(g, f).scale(-1.0),
                           1e-9 * max(1.0, f.max_abs_coeff() * g.max_abs_coeff()))


@given(small_series(), small_series())
@settings(max_examples=60, deadline=None)
def test_hypothesis_norm_algebra_bound(f, g):
    w = NormWeights(0.8, 0.5, 1.5)
    assert (f * g).weighted_norm(w) <= f.weighted_norm(w) * g.weighted_norm(w) * (1 + 1e-9)
