"""Concrete lattice Hamiltonians and the resonant fast/slow chart.

The chain of weakly coupled anharmonic oscillators with fixed ends is lifted
to action-angle variables on the excited sites and complexified on the rest
sites; the resonant unimodular chart then produces the fast angle ``q_1``
advancing with the orbit frequency and slow phase differences ``q``.  The
expansion around the resonant torus yields the graded family ``f_{l}^{(s)}``
consumed by the normal form driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .series import (
    DEFAULT_POLICY,
    MultiIndex,
    NormWeights,
    RationalComplex,
    TaylorFourierSeries,
    TruncationPolicy,
)

ACTION_FLOOR = 1e-6


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeModel:
    """Nearest-neighbour chain with quartic on-site nonlinearity.

    ``excited_set`` lists interior sites carrying actions, ``rest_set`` the
    complexified ones; together they partition the interior sites.
    """

    n_sites: int
    gamma: float
    coupling: float = 1.0  # formal order-1 marker for the eps coupling
    fixed_ends: bool = True
    excited_set: tuple = ()
    rest_set: tuple = ()

    def __post_init__(self):
        if self.gamma == 0:
            raise ModelError("nonlinearity gamma must be nonzero")
        interior = set(self.excited_set) | set(self.rest_set)
        if len(interior) != len(self.excited_set) + len(self.rest_set):
            raise ModelError("excited and rest sets overlap")
        if len(interior) != self.n_sites:
            raise ModelError("excited/rest sets must partition the interior sites")

    @property
    def n1(self):
        return len(self.excited_set)

    @property
    def n2(self):
        return len(self.rest_set)


@dataclass(frozen=True)
class ResonantChart:
    """Unimodular change of angles q = A phi with contragredient action map
    p = A^{-T} J; the first row satisfies <row_1, k> pattern so that
    ``p_1 = <k, J>`` and ``q_1`` is the fast angle."""

    k: tuple
    A: tuple            # rows of the integer matrix, q = A phi
    A_inv: tuple        # rows of the exact integer inverse, phi = A_inv q
    Istar: tuple
    omega: float
    Omega: tuple

    def __post_init__(self):
        if self.k[0] != 1:
            raise ModelError("resonance vector must have k_1 = 1")
        d = _int_det([list(r) for r in self.A])
        if d not in (1, -1):
            raise ModelError(f"chart matrix is not unimodular (det={d})")

    @property
    def n1(self):
        return len(self.k)

    def angles_to_chart(self, phi):
        return np.asarray(self.A, dtype=float) @ np.asarray(phi, dtype=float)

    def chart_to_angles(self, qhat):
        return np.asarray(self.A_inv, dtype=float) @ np.asarray(qhat, dtype=float)

    def actions_to_chart(self, J):
        # p = A^{-T} J
        return np.asarray(self.A_inv, dtype=float).T @ np.asarray(J, dtype=float)

    def chart_to_actions(self, phat):
        # J = A^T p
        return np.asarray(self.A, dtype=float).T @ np.asarray(phat, dtype=float)


@dataclass
class GradedHamiltonian:
    """Hamiltonian organised as the double family ``(grade, eps order) -> series``
    together with the fixed frequencies.  Series hold the coefficient of
    ``eps^s``; the numeric small parameter is supplied at evaluation time.
    The linear frequency part ``omega p_1 + sum_j i Omega_j xi_j eta_j`` lives
    in the (2, 0) slot."""

    n1: int
    n2: int
    omega: float
    Omega: tuple
    terms: dict = field(default_factory=dict)   # (grade, s) -> TaylorFourierSeries
    truncation: TruncationPolicy = DEFAULT_POLICY
    order: int = 0                              # normalization order r
    s_max: int = 1
    exact: bool = False
    meta: dict = field(default_factory=dict)

    def f(self, grade, s) -> TaylorFourierSeries:
        out = self.terms.get((grade, s))
        if out is None:
            return TaylorFourierSeries.zero(self.n1, self.n2, self.truncation)
        return out

    def set_f(self, grade, s, series: TaylorFourierSeries):
        if series.is_zero():
            self.terms.pop((grade, s), None)
        else:
            self.terms[(grade, s)] = series

    def slots(self):
        return sorted(self.terms)

    def copy_shell(self, order=None):
        return GradedHamiltonian(
            self.n1, self.n2, self.omega, tuple(self.Omega), {},
            self.truncation, self.order if order is None else order,
            self.s_max, self.exact, dict(self.meta))

    def linear_part(self) -> TaylorFourierSeries:
        out = TaylorFourierSeries.zero(self.n1, self.n2, self.truncation)
        one = Fraction(1) if self.exact else 1.0
        l = [0] * self.n1
        l[0] = 1
        out = out + TaylorFourierSeries.monomial(
            self.n1, self.n2, self.omega * one, l=l, truncation=self.truncation)
        for j in range(self.n2):
            m = [0] * self.n2
            m[j] = 1
            c = RationalComplex(0, self.Omega[j]) if self.exact else 1j * self.Omega[j]
            out = out + TaylorFourierSeries.monomial(
                self.n1, self.n2, c, m1=m, m2=m, truncation=self.truncation)
        return out

    def evaluate(self, eps, p, q, xi=(), eta=()) -> complex:
        total = 0j
        for (grade, s), series in self.terms.items():
            total += (eps ** s) * series.evaluate(p, q, xi, eta)
        return total

    def series_with_orders(self):
        """List of (series, eps_order) pairs for compilation."""
        return [(series, s) for (grade, s), series in sorted(self.terms.items())]

    def truncated(self, s_keep: int) -> "GradedHamiltonian":
        out = self.copy_shell()
        out.s_max = s_keep
        for (grade, s), series in self.terms.items():
            if s <= s_keep:
                out.terms[(grade, s)] = series
        return out

    def decay_profile(self, weights: NormWeights) -> dict:
        """Norm table {(grade, s): ||f||} and the smallest constant making the
        2^{-grade} decay profile hold for the stored family."""
        table = {}
        E = 0.0
        for (grade, s), series in sorted(self.terms.items()):
            nrm = series.weighted_norm(weights)
            table[(grade, s)] = nrm
            E = max(E, nrm * 2 ** grade)
        return {"norms": table, "E": E}


# -- resonant chart ------------------------------------------------------------


def resonant_chart(k, Istar, omega, Omega) -> ResonantChart:
    """Build the unimodular fast/slow chart for resonance vector ``k``.

    For ``k = (1, ..., 1)`` the consecutive phase-difference pattern is used
    (``q_j = phi_j - phi_{j-1}``); otherwise the slow angles are
    ``q_j = k_j phi_1 - phi_j``.  Both choices are unimodular completions of
    the same fast row and keep ``p_1 = <k, J>``.
    """
    k = tuple(int(x) for x in k)
    n1 = len(k)
    if n1 == 0:
        raise ModelError("empty resonance vector")
    if k[0] != 1:
        raise ModelError("resonance vector must have k_1 = 1")
    A = [[0] * n1 for _ in range(n1)]
    A[0][0] = 1
    if all(kj == 1 for kj in k):
        for j in range(1, n1):
            A[j][j] = 1
            A[j][j - 1] = -1
    else:
        for j in range(1, n1):
            A[j][0] = k[j]
            A[j][j] = -1
    A_inv = _int_inverse(A)
    # p_1 = <k, J> requires the first column of A_inv to equal k
    first_col = [A_inv[i][0] for i in range(n1)]
    if first_col != list(k):
        raise ModelError("chart completion lost the resonant momentum row")
    return ResonantChart(
        k=k,
        A=tuple(tuple(r) for r in A),
        A_inv=tuple(tuple(r) for r in A_inv),
        Istar=tuple(Istar),
        omega=omega,
        Omega=tuple(Omega),
    )


def _int_det(M):
    n = len(M)
    M = [row[:] for row in M]
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        # fraction-free elimination on integer matrices of unit determinant
        for r in range(c + 1, n):
            while M[r][c] != 0:
                q = M[r][c] // M[c][c] if abs(M[r][c]) >= abs(M[c][c]) else 0
                if q == 0:
                    M[c], M[r] = M[r], M[c]
                    det = -det
                    continue
                M[r] = [a - q * b for a, b in zip(M[r], M[c])]
        det *= M[c][c]
    return det


def _int_inverse(M):
    """Exact inverse of a unimodular integer matrix via Fraction elimination."""
    n = len(M)
    aug = [[Fraction(M[r][c]) for c in range(n)] + [Fraction(int(r == c)) for c in range(n)]
           for r in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[piv] = aug[piv], aug[c]
        pv = aug[c][c]
        aug[c] = [x / pv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    inv = [[aug[r][n + c] for c in range(n)] for r in range(n)]
    out = []
    for row in inv:
        irow = []
        for x in row:
            if x.denominator != 1:
                raise ModelError("matrix inverse is not integer; chart not unimodular")
            irow.append(int(x))
        out.append(irow)
    return out


# -- action-angle description and expansion -------------------------------------


@dataclass(frozen=True)
class ActionAngleTerm:
    """One monomial of the pre-chart Hamiltonian:
    coeff * prod_j I_j^{ipow_j} * exp(i <kphi, phi>) * xi^m1 * eta^m2,
    with possibly half-integer action exponents (square-root factors)."""

    coeff: object
    ipow: tuple      # Fractions, exponents of the actions I_j
    kphi: tuple      # integer harmonics of the original angles phi
    m1: tuple
    m2: tuple
    s: int           # order in the coupling parameter


def expand_around_torus(terms, chart: ResonantChart, n2: int,
                        ell_max: int = 8, s_max: int = 2,
                        harmonic_max: int | None = None,
                        exact: bool = False,
                        resonance_tol: float = 1e-10,
                        h0_grad=None) -> GradedHamiltonian:
    """Expand a list of :class:`ActionAngleTerm` around ``I = I*`` in the
    resonant chart, producing the graded family.

    Square roots of actions are expanded binomially in ``J = I - I*`` up to
    the grade cutoff.  The result's (2, 0) slot carries the exact linear part
    ``omega p_1 + sum i Omega_j xi_j eta_j``; an inconsistent resonance
    condition (``h0_grad(I*) != omega k``) is rejected.
    """
    n1 = chart.n1
    if h0_grad is not None:
        ohat = np.asarray(h0_grad, dtype=float)
        defect = np.max(np.abs(ohat - float(chart.omega) * np.asarray(chart.k, dtype=float)))
        if defect > resonance_tol:
            raise ModelError(f"resonance condition violated by {defect:.3e}")
    K = harmonic_max if harmonic_max is not None else max(8, 4 * ell_max)
    policy = TruncationPolicy(max_grade=ell_max, max_harmonic=K,
                              drop_tol=0.0 if exact else 1e-14)
    ham = GradedHamiltonian(
        n1, n2, chart.omega, tuple(chart.Omega), {}, policy,
        order=0, s_max=s_max, exact=exact)

    # J_j as linear series in the chart actions: J = A^T p
    Jseries = []
    for j in range(n1):
        t = {}
        for i in range(n1):
            a = chart.A[i][j]
            if a:
                l = [0] * n1
                l[i] = 1
                c = Fraction(a) if exact else float(a)
                t[MultiIndex(tuple(l), (0,) * n1, (0,) * n2, (0,) * n2)] = c
        Jseries.append(TaylorFourierSeries(n1, n2, t, policy))

    accum: dict = {}
    for term in terms:
        if term.s > s_max:
            continue
        base = TaylorFourierSeries.constant(n1, n2, term.coeff, policy)
        for j, e in enumerate(term.ipow):
            e = Fraction(e)
            if e == 0:
                continue
            base = base * _power_series(chart.Istar[j], Jseries[j], e, ell_max, exact, policy)
            if base.is_zero():
                break
        if base.is_zero():
            continue
        if any(term.kphi):
            khat = _harmonic_to_chart(chart, term.kphi)
            base = base * TaylorFourierSeries.angle_exp(
                n1, n2, khat, Fraction(1) if exact else 1.0, policy)
        if any(term.m1) or any(term.m2):
            base = base * TaylorFourierSeries.monomial(
                n1, n2, Fraction(1) if exact else 1.0,
                m1=term.m1, m2=term.m2, truncation=policy)
        key = term.s
        accum[key] = base if key not in accum else accum[key] + base

    for s, series in accum.items():
        if s == 0:
            # drop the constant energy offset of the torus
            series = series.filter_terms(
                lambda idx: idx.grade > 0 or any(idx.k))
        for grade, comp in series.grade_decompose().items():
            ham.set_f(grade, s, ham.f(grade, s) + comp)

    # Verify and normalize the linear slot against the exact frequencies.
    lin = ham.f(2, 0)
    expect = ham.linear_part()
    defect = (lin - expect).max_abs_coeff()
    if defect > (0 if exact else 1e-12):
        raise ModelError(f"linear part of the expansion is off by {defect:.3e}")
    ham.set_f(2, 0, expect)
    return ham


def _harmonic_to_chart(chart: ResonantChart, kphi):
    """Map a harmonic on the original angles to the chart angles:
    <kphi, phi> = <A_inv^T kphi, q>."""
    n1 = chart.n1
    out = [0] * n1
    for j in range(n1):
        out[j] = sum(chart.A_inv[i][j] * kphi[i] for i in range(n1))
    return tuple(out)


def _power_series(Istar_j, Jj: TaylorFourierSeries, e: Fraction, ell_max, exact, policy):
    """(I*_j + J_j)^e expanded binomially in J_j up to the grade cutoff."""
    n_max = ell_max // 2
    if e.denominator == 1 and e >= 0:
        n_max = min(n_max, e.numerator)
    Istar_pow = _scalar_power(Istar_j, e, exact)
    out = TaylorFourierSeries.constant(Jj.n1, Jj.n2, Istar_pow, policy)
    coeff = Istar_pow
    Jpow = None
    inv_Istar = (Fraction(1) / Fraction(Istar_j)) if exact else 1.0 / float(Istar_j)
    for n in range(1, n_max + 1):
        coeff = coeff * _binom_factor(e, n, exact) * inv_Istar
        Jpow = Jj if Jpow is None else Jpow * Jj
        if Jpow.is_zero():
            break
        out = out + Jpow.scale(coeff)
    return out


def _binom_factor(e: Fraction, n: int, exact: bool):
    # ratio binom(e, n) / binom(e, n-1) = (e - n + 1) / n
    val = (e - n + 1) / n if exact else float(e - n + 1) / n
    return val


def _scalar_power(x, e: Fraction, exact: bool):
    if exact:
        x = Fraction(x)
        if e.denominator == 1:
            return x ** e.numerator
        if e.denominator == 2:
            root = _exact_sqrt(x)
            return root ** e.numerator
        raise ModelError(f"unsupported exact exponent {e}")
    return float(x) ** float(e)


def _exact_sqrt(x: Fraction) -> Fraction:
    num = math.isqrt(x.numerator)
    den = math.isqrt(x.denominator)
    if num * num != x.numerator or den * den != x.denominator:
        raise ModelError(f"sqrt({x}) is not rational; exact mode unavailable")
    return Fraction(num, den)


# -- the five-oscillator chain ---------------------------------------------------


def build_seagull(gamma, Istar, ell_max: int = 8, s_max: int = 3,
                  harmonic_max: int | None = None, exact: bool = False):
    """Five coupled quartic oscillators with fixed ends: four excited sites on
    a fully resonant torus, the central site at rest.

    Returns ``(model, chart, ham)`` with ``omega = 1 + 2 gamma I*`` and a
    single transverse frequency ``Omega = (1,)``.
    """
    if gamma == 0:
        raise ModelError("gamma must be nonzero")
    if not exact and float(Istar) < ACTION_FLOOR:
        raise ModelError(f"torus action below floor {ACTION_FLOOR}")
    if exact and Fraction(Istar) <= 0:
        raise ModelError("torus action must be positive")

    model = LatticeModel(
        n_sites=5, gamma=float(gamma), fixed_ends=True,
        excited_set=(-2, -1, 1, 2), rest_set=(0,))
    n1, n2 = 4, 1

    if exact:
        g = Fraction(gamma)
        Ist = Fraction(Istar)
        omega = 1 + 2 * g * Ist
        one = Fraction(1)
        iunit = RationalComplex(0, 1)
    else:
        g = float(gamma)
        Ist = float(Istar)
        omega = 1.0 + 2.0 * g * Ist
        one = 1.0
        iunit = 1j

    chart = resonant_chart((1, 1, 1, 1), (Ist,) * 4, omega, (one,))

    half = Fraction(1, 2)
    zero4 = (Fraction(0),) * 4
    terms = []
    # h0 = sum_j (I_j + gamma I_j^2), s = 0
    for j in range(4):
        ip = [Fraction(0)] * 4
        ip[j] = Fraction(1)
        terms.append(ActionAngleTerm(one, tuple(ip), (0,) * 4, (0,), (0,), 0))
        ip2 = [Fraction(0)] * 4
        ip2[j] = Fraction(2)
        terms.append(ActionAngleTerm(g, tuple(ip2), (0,) * 4, (0,), (0,), 0))
    # g0 elliptic part enters the linear slot; its quartic piece is -gamma xi^2 eta^2
    terms.append(ActionAngleTerm(iunit, zero4, (0,) * 4, (1,), (1,), 0))
    terms.append(ActionAngleTerm(-g, zero4, (0,) * 4, (2,), (2,), 0))
    # excited-excited couplings: 2 sqrt(I_a I_b) cos(phi_b - phi_a), s = 1
    for a, b in ((0, 1), (2, 3)):
        ip = [Fraction(0)] * 4
        ip[a] = half
        ip[b] = half
        for sign in (1, -1):
            kphi = [0] * 4
            kphi[b] = sign
            kphi[a] = -sign
            terms.append(ActionAngleTerm(one, tuple(ip), tuple(kphi), (0,), (0,), 1))
    # excited-rest couplings: sqrt(I_a) (xi e^{-i phi_a} + i eta e^{i phi_a}), s = 1
    for a in (1, 2):  # sites -1 and +1 neighbour the rest site
        ip = [Fraction(0)] * 4
        ip[a] = half
        kminus = [0] * 4
        kminus[a] = -1
        kplus = [0] * 4
        kplus[a] = 1
        terms.append(ActionAngleTerm(one, tuple(ip), tuple(kminus), (1,), (0,), 1))
        terms.append(ActionAngleTerm(iunit, tuple(ip), tuple(kplus), (0,), (1,), 1))

    h0_grad = None if exact else [1.0 + 2.0 * float(g) * float(Ist)] * 4
    ham = expand_around_torus(
        terms, chart, n2, ell_max=ell_max, s_max=s_max,
        harmonic_max=harmonic_max, exact=exact, h0_grad=h0_grad)
    ham.meta.update({"model": "seagull", "gamma": gamma, "Istar": Istar})
    return model, chart, ham


# -- Cartesian side of the seagull (oracle helpers) -------------------------------


def seagull_cartesian_rhs(z, gamma, eps):
    """Equations of motion in the original coordinates; ``z = (x(5), y(5))``
    for the interior sites ordered (-2, -1, 0, 1, 2) with fixed ends."""
    x, y = z[:5], z[5:]
    amp2 = x * x + y * y
    fac = 1.0 + gamma * amp2
    xn = np.concatenate(([0.0], x, [0.0]))
    yn = np.concatenate(([0.0], y, [0.0]))
    dx = fac * y + eps * (yn[:-2] + yn[2:])
    dy = -fac * x - eps * (xn[:-2] + xn[2:])
    return np.concatenate((dx, dy))


def seagull_cartesian_energy(z, gamma, eps):
    x, y = z[:5], z[5:]
    amp2 = (x * x + y * y) / 2.0
    h0 = np.sum(amp2 + gamma * amp2 ** 2)
    h1 = np.sum(x[1:] * x[:-1] + y[1:] * y[:-1])
    return h0 + eps * h1


def rk4_fixed_step(rhs, z0, t_final, n_steps):
    """Classical fixed-step integrator used as an independent oracle."""
    z = np.array(z0, dtype=float)
    h = t_final / n_steps
    t = 0.0
    for _ in range(n_steps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return z


def chart_state_to_cartesian(state, chart: ResonantChart):
    """Map a real chart state (qhat, x_t, p, y_t) to Cartesian (x(5), y(5))."""
    n1 = chart.n1
    qhat = state[:n1]
    xt = state[n1:n1 + 1]
    p = state[n1 + 1:2 * n1 + 1]
    yt = state[2 * n1 + 1:]
    J = chart.chart_to_actions(p)
    I = np.asarray(chart.Istar, dtype=float) + J
    if np.any(I <= 0):
        raise ModelError("action-angle chart left its domain (I <= 0)")
    phi = chart.chart_to_angles(qhat)
    xexc = np.sqrt(2 * I) * np.cos(phi)
    yexc = -np.sqrt(2 * I) * np.sin(phi)
    x = np.array([xexc[0], xexc[1], xt[0], xexc[2], xexc[3]])
    y = np.array([yexc[0], yexc[1], yt[0], yexc[2], yexc[3]])
    return np.concatenate((x, y))


def cartesian_to_chart_state(z, chart: ResonantChart, q_ref=None):
    """Inverse of :func:`chart_state_to_cartesian`; branch of each angle chosen
    nearest to ``q_ref`` (chart angles) when given."""
    x, y = z[:5], z[5:]
    xexc = np.array([x[0], x[1], x[3], x[4]])
    yexc = np.array([y[0], y[1], y[3], y[4]])
    I = (xexc ** 2 + yexc ** 2) / 2.0
    phi = np.arctan2(-yexc, xexc)
    J = I - np.asarray(chart.Istar, dtype=float)
    p = chart.actions_to_chart(J)
    qhat = chart.angles_to_chart(phi)
    if q_ref is not None:
        qhat = qhat + 2 * np.pi * np.round((np.asarray(q_ref) - qhat) / (2 * np.pi))
    return np.concatenate((qhat, [x[2]], p, [y[2]]))
