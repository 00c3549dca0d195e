"""Sparse Taylor-Fourier series algebra.

A series is a finite sum of monomials

    c * p^l * exp(i <k, q>) * xi^m1 * eta^m2

in ``n1`` action-angle pairs ``(p, q)`` and ``n2`` complex transverse pairs
``(xi, eta)``.  The grade of a monomial is ``2|l| + |m1| + |m2|``; Poisson
brackets of pure grades ``s1`` and ``s2`` land in grade ``s1 + s2 - 2``.

Coefficients are complex floats by default.  For regression fixtures with
closed-form rational data an exact mode is available through
:class:`RationalComplex` coefficients; both modes share the same code paths.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence


class RationalComplex:
    """Complex number with exact rational real/imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, other):
        other = _as_rc(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalComplex(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_rc(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalComplex(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        other = _as_rc(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = _as_rc(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalComplex(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_rc(other)
        if other is NotImplemented:
            return NotImplemented
        den = other.re * other.re + other.im * other.im
        if den == 0:
            raise ZeroDivisionError("division by exact zero")
        return RationalComplex(
            (self.re * other.re + self.im * other.im) / den,
            (self.im * other.re - self.re * other.im) / den,
        )

    def __neg__(self):
        return RationalComplex(-self.re, -self.im)

    def __eq__(self, other):
        other = _as_rc(other)
        if other is NotImplemented:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def __abs__(self):
        return math.hypot(float(self.re), float(self.im))

    def conjugate(self):
        return RationalComplex(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"RationalComplex({self.re!r}, {self.im!r})"


def _as_rc(x):
    if isinstance(x, RationalComplex):
        return x
    if isinstance(x, (int, Fraction)):
        return RationalComplex(x, 0)
    return NotImplemented


def _times_i(c):
    """Multiply a coefficient by the imaginary unit."""
    if isinstance(c, RationalComplex):
        return RationalComplex(-c.im, c.re)
    if isinstance(c, Fraction):
        return RationalComplex(0, c)
    return 1j * c


def _div_by_i_real(c, d):
    """Divide coefficient ``c`` by ``i*d`` with ``d`` real (float or Fraction)."""
    if isinstance(c, (RationalComplex, Fraction)):
        return _as_rc(c) / RationalComplex(0, d)
    return c / (1j * float(d))


def _is_zero(c, tol):
    if isinstance(c, RationalComplex):
        return not c
    return abs(c) <= tol


class MultiIndex(NamedTuple):
    """Exponent record of one monomial: actions ``l``, harmonics ``k``,
    transverse powers ``m1`` (xi) and ``m2`` (eta)."""

    l: tuple
    k: tuple
    m1: tuple
    m2: tuple

    @property
    def grade(self) -> int:
        return 2 * sum(self.l) + sum(self.m1) + sum(self.m2)

    @property
    def action_degree(self) -> int:
        return sum(self.l)

    @property
    def transverse_degree(self) -> int:
        return sum(self.m1) + sum(self.m2)

    def validate(self):
        if any(e < 0 for e in self.l) or any(e < 0 for e in self.m1) or any(e < 0 for e in self.m2):
            raise ValueError(f"negative exponent in {self}")


@dataclass(frozen=True)
class TruncationPolicy:
    """Two-dimensional truncation: total grade, per-component harmonic cutoff,
    plus a magnitude floor below which float coefficients are purged."""

    max_grade: int = 8
    max_harmonic: int = 8
    drop_tol: float = 1e-14

    def __post_init__(self):
        if self.max_grade < 0 or self.max_harmonic < 0 or self.drop_tol < 0:
            raise ValueError("truncation parameters must be non-negative")

    def admits(self, idx: MultiIndex) -> bool:
        if idx.grade > self.max_grade:
            return False
        return all(abs(kj) <= self.max_harmonic for kj in idx.k)

    def stricter(self, other: "TruncationPolicy") -> "TruncationPolicy":
        return TruncationPolicy(
            min(self.max_grade, other.max_grade),
            min(self.max_harmonic, other.max_harmonic),
            max(self.drop_tol, other.drop_tol),
        )


@dataclass(frozen=True)
class NormWeights:
    """Radii of the analyticity domain entering the weighted Fourier norm.

    ``scale`` shrinks all three radii at once (the usual ``1 - d`` factor
    used when domains are restricted).
    """

    rho: float = 1.0
    sigma: float = 1.0
    R: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if min(self.rho, self.sigma, self.R) <= 0:
            raise ValueError("radii must be positive")
        if not 0 < self.scale <= 1:
            raise ValueError("scale must lie in (0, 1]")

    def shrunk(self, d: float) -> "NormWeights":
        return NormWeights(self.rho, self.sigma, self.R, self.scale * (1.0 - d))


DEFAULT_POLICY = TruncationPolicy()


class DimensionMismatchError(ValueError):
    pass


class TaylorFourierSeries:
    """Finite map :class:`MultiIndex` -> coefficient, kept in canonical sparse
    form (no stored coefficient is zero, every index obeys the truncation)."""

    __slots__ = ("n1", "n2", "terms", "truncation")

    def __init__(self, n1, n2, terms=None, truncation=DEFAULT_POLICY, _canonical=False):
        self.n1 = int(n1)
        self.n2 = int(n2)
        self.truncation = truncation
        if terms is None:
            self.terms = {}
        elif _canonical:
            self.terms = dict(terms)
        else:
            self.terms = {}
            for idx, c in dict(terms).items():
                if not isinstance(idx, MultiIndex):
                    idx = MultiIndex(*idx)
                idx.validate()
                self._require_dims(idx)
                if truncation.admits(idx) and not _is_zero(c, truncation.drop_tol):
                    self.terms[idx] = c

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, n1, n2, truncation=DEFAULT_POLICY):
        return cls(n1, n2, {}, truncation, _canonical=True)

    @classmethod
    def constant(cls, n1, n2, c, truncation=DEFAULT_POLICY):
        idx = MultiIndex((0,) * n1, (0,) * n1, (0,) * n2, (0,) * n2)
        return cls(n1, n2, {idx: c}, truncation)

    @classmethod
    def monomial(cls, n1, n2, c, l=None, k=None, m1=None, m2=None, truncation=DEFAULT_POLICY):
        idx = MultiIndex(
            tuple(l) if l is not None else (0,) * n1,
            tuple(k) if k is not None else (0,) * n1,
            tuple(m1) if m1 is not None else (0,) * n2,
            tuple(m2) if m2 is not None else (0,) * n2,
        )
        return cls(n1, n2, {idx: c}, truncation)

    @classmethod
    def action(cls, n1, n2, j, c=1.0, truncation=DEFAULT_POLICY):
        l = [0] * n1
        l[j] = 1
        return cls.monomial(n1, n2, c, l=l, truncation=truncation)

    @classmethod
    def angle_exp(cls, n1, n2, k, c=1.0, truncation=DEFAULT_POLICY):
        return cls.monomial(n1, n2, c, k=k, truncation=truncation)

    @classmethod
    def cos_angle(cls, n1, n2, k, c=1.0, truncation=DEFAULT_POLICY):
        kk = tuple(k)
        half = c / 2
        neg = tuple(-x for x in kk)
        return cls(n1, n2, {MultiIndex((0,) * n1, kk, (0,) * n2, (0,) * n2): half,
                            MultiIndex((0,) * n1, neg, (0,) * n2, (0,) * n2): half},
                   truncation)

    @classmethod
    def sin_angle(cls, n1, n2, k, c=1.0, truncation=DEFAULT_POLICY):
        # sin = (e^{ik q} - e^{-ik q}) / (2i)
        kk = tuple(k)
        neg = tuple(-x for x in kk)
        if isinstance(c, (Fraction, RationalComplex)):
            val = _as_rc(c) / RationalComplex(0, 2) if not isinstance(c, RationalComplex) \
                else c / RationalComplex(0, 2)
        else:
            val = c / 2j
        return cls(n1, n2, {MultiIndex((0,) * n1, kk, (0,) * n2, (0,) * n2): val,
                            MultiIndex((0,) * n1, neg, (0,) * n2, (0,) * n2): -val},
                   truncation)

    @classmethod
    def xi(cls, n1, n2, j, c=1.0, truncation=DEFAULT_POLICY):
        m1 = [0] * n2
        m1[j] = 1
        return cls.monomial(n1, n2, c, m1=m1, truncation=truncation)

    @classmethod
    def eta(cls, n1, n2, j, c=1.0, truncation=DEFAULT_POLICY):
        m2 = [0] * n2
        m2[j] = 1
        return cls.monomial(n1, n2, c, m2=m2, truncation=truncation)

    # -- basic protocol -------------------------------------------------------

    def _require_dims(self, idx: MultiIndex):
        if len(idx.l) != self.n1 or len(idx.k) != self.n1 \
                or len(idx.m1) != self.n2 or len(idx.m2) != self.n2:
            raise DimensionMismatchError(f"index {idx} incompatible with dims ({self.n1}, {self.n2})")

    def _check_compatible(self, other: "TaylorFourierSeries"):
        if self.n1 != other.n1 or self.n2 != other.n2:
            raise DimensionMismatchError(
                f"dims ({self.n1},{self.n2}) vs ({other.n1},{other.n2})")

    @property
    def dims(self):
        return (self.n1, self.n2)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, TaylorFourierSeries):
            return NotImplemented
        return self.dims == other.dims and self.terms == other.terms

    def __repr__(self):
        return f"TaylorFourierSeries(n1={self.n1}, n2={self.n2}, nterms={len(self.terms)})"

    def copy(self, truncation=None):
        pol = truncation if truncation is not None else self.truncation
        return TaylorFourierSeries(self.n1, self.n2, self.terms, pol)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, TaylorFourierSeries):
            return NotImplemented
        self._check_compatible(other)
        pol = self.truncation.stricter(other.truncation)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            if idx in out:
                out[idx] = out[idx] + c
            else:
                out[idx] = c
        return TaylorFourierSeries(self.n1, self.n2, out, pol)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return TaylorFourierSeries(
            self.n1, self.n2, {idx: -c for idx, c in self.terms.items()},
            self.truncation, _canonical=True)

    def __mul__(self, other):
        if isinstance(other, TaylorFourierSeries):
            return self._series_mul(other)
        return self.scale(other)

    __rmul__ = __mul__

    def scale(self, c):
        if _is_zero(c, 0.0):
            return TaylorFourierSeries.zero(self.n1, self.n2, self.truncation)
        return TaylorFourierSeries(
            self.n1, self.n2, {idx: v * c for idx, v in self.terms.items()},
            self.truncation)

    def _series_mul(self, other: "TaylorFourierSeries"):
        self._check_compatible(other)
        pol = self.truncation.stricter(other.truncation)
        out = {}
        for ia, ca in self.terms.items():
            for ib, cb in other.terms.items():
                idx = MultiIndex(
                    tuple(x + y for x, y in zip(ia.l, ib.l)),
                    tuple(x + y for x, y in zip(ia.k, ib.k)),
                    tuple(x + y for x, y in zip(ia.m1, ib.m1)),
                    tuple(x + y for x, y in zip(ia.m2, ib.m2)),
                )
                if not pol.admits(idx):
                    continue
                c = ca * cb
                if idx in out:
                    out[idx] = out[idx] + c
                else:
                    out[idx] = c
        return TaylorFourierSeries(self.n1, self.n2, out, pol)

    # -- calculus ---------------------------------------------------------------

    def dp(self, j):
        out = {}
        for idx, c in self.terms.items():
            e = idx.l[j]
            if e == 0:
                continue
            l = list(idx.l)
            l[j] = e - 1
            out[MultiIndex(tuple(l), idx.k, idx.m1, idx.m2)] = c * e
        return TaylorFourierSeries(self.n1, self.n2, out, self.truncation)

    def dq(self, j):
        out = {}
        for idx, c in self.terms.items():
            kj = idx.k[j]
            if kj == 0:
                continue
            out[idx] = _times_i(c * kj)
        return TaylorFourierSeries(self.n1, self.n2, out, self.truncation)

    def dxi(self, j):
        out = {}
        for idx, c in self.terms.items():
            e = idx.m1[j]
            if e == 0:
                continue
            m1 = list(idx.m1)
            m1[j] = e - 1
            out[MultiIndex(idx.l, idx.k, tuple(m1), idx.m2)] = c * e
        return TaylorFourierSeries(self.n1, self.n2, out, self.truncation)

    def deta(self, j):
        out = {}
        for idx, c in self.terms.items():
            e = idx.m2[j]
            if e == 0:
                continue
            m2 = list(idx.m2)
            m2[j] = e - 1
            out[MultiIndex(idx.l, idx.k, idx.m1, tuple(m2))] = c * e
        return TaylorFourierSeries(self.n1, self.n2, out, self.truncation)

    # -- structure operations ----------------------------------------------------

    def grade_decompose(self) -> dict:
        """Split into pure-grade components; the components sum back to self."""
        buckets = {}
        for idx, c in self.terms.items():
            buckets.setdefault(idx.grade, {})[idx] = c
        return {
            g: TaylorFourierSeries(self.n1, self.n2, t, self.truncation, _canonical=True)
            for g, t in sorted(buckets.items())
        }

    def filter_terms(self, pred: Callable[[MultiIndex], bool]):
        return TaylorFourierSeries(
            self.n1, self.n2,
            {idx: c for idx, c in self.terms.items() if pred(idx)},
            self.truncation, _canonical=True)

    def average_fast_angle(self):
        """Projection onto the ``k_1 = 0`` harmonics (average over the fast angle)."""
        return self.filter_terms(lambda idx: idx.k[0] == 0)

    def restrict_transverse_zero(self):
        """Substitute xi = eta = 0."""
        return self.filter_terms(lambda idx: idx.transverse_degree == 0)

    def restrict_actions_zero(self):
        """Substitute p = 0."""
        return self.filter_terms(lambda idx: idx.action_degree == 0)

    def substitute_slow_angles(self, phases: Sequence):
        """Evaluate the slow angles: ``phases[j]`` is ``exp(i q_{j+2})`` for the
        slow components; the fast harmonic ``k_1`` is left untouched."""
        if len(phases) != self.n1 - 1:
            raise DimensionMismatchError("need one phase per slow angle")
        out = {}
        for idx, c in self.terms.items():
            for j, ph in enumerate(phases):
                kj = idx.k[j + 1]
                if kj >= 0:
                    c = c * _int_pow(ph, kj)
                else:
                    c = c * _int_pow(_conj(ph), -kj)
            nk = (idx.k[0],) + (0,) * (self.n1 - 1)
            nidx = MultiIndex(idx.l, nk, idx.m1, idx.m2)
            if nidx in out:
                out[nidx] = out[nidx] + c
            else:
                out[nidx] = c
        return TaylorFourierSeries(self.n1, self.n2, out, self.truncation)

    def linear_action_coefficients(self):
        """Coefficients of the terms linear in the actions, constant otherwise."""
        out = [0] * self.n1
        for idx, c in self.terms.items():
            if idx.action_degree == 1 and idx.transverse_degree == 0 \
                    and all(kj == 0 for kj in idx.k):
                j = idx.l.index(1)
                out[j] = out[j] + c
        return out

    # -- metrics and evaluation ----------------------------------------------------

    def weighted_norm(self, w: NormWeights) -> float:
        rho = w.rho * w.scale
        sigma = w.sigma * w.scale
        R = w.R * w.scale
        total = 0.0
        for idx, c in self.terms.items():
            total += abs(c) * rho ** idx.action_degree \
                * R ** idx.transverse_degree \
                * math.exp(sigma * sum(abs(kj) for kj in idx.k))
        return total

    def evaluate(self, p, q, xi=(), eta=()) -> complex:
        p = [complex(v) for v in p]
        q = [complex(v) for v in q]
        xi = [complex(v) for v in xi]
        eta = [complex(v) for v in eta]
        if len(p) != self.n1 or len(q) != self.n1 or len(xi) != self.n2 or len(eta) != self.n2:
            raise DimensionMismatchError("evaluation point has wrong dimensions")
        total = 0j
        for idx, c in self.terms.items():
            v = complex(c)
            for j in range(self.n1):
                if idx.l[j]:
                    v *= p[j] ** idx.l[j]
            phase = sum(idx.k[j] * q[j] for j in range(self.n1))
            if phase != 0:
                v *= cmath.exp(1j * phase)
            for j in range(self.n2):
                if idx.m1[j]:
                    v *= xi[j] ** idx.m1[j]
                if idx.m2[j]:
                    v *= eta[j] ** idx.m2[j]
            total += v
        return total


def _int_pow(x, n):
    out = None
    for _ in range(n):
        out = x if out is None else out * x
    return out if out is not None else 1


def _conj(x):
    if isinstance(x, RationalComplex):
        return x.conjugate()
    if isinstance(x, (int, Fraction)):
        return x
    return complex(x).conjugate()


# -- Poisson structure ---------------------------------------------------------


def poisson_bracket(f: TaylorFourierSeries, g: TaylorFourierSeries) -> TaylorFourierSeries:
    """Canonical bracket {f, g} = sum_j (df/dq_j dg/dp_j - df/dp_j dg/dq_j)
    + sum_j (df/dxi_j dg/deta_j - df/deta_j dg/dxi_j), so {q_j, p_j} = {xi_j, eta_j} = 1."""
    f._check_compatible(g)
    n1, n2 = f.n1, f.n2
    pol = f.truncation.stricter(g.truncation)
    out = {}

    def accumulate(idx, c):
        if not pol.admits(idx):
            return
        if idx in out:
            out[idx] = out[idx] + c
        else:
            out[idx] = c

    for ia, ca in f.terms.items():
        for ib, cb in g.terms.items():
            cab = ca * cb
            # action-angle channels
            for j in range(n1):
                ka, la = ia.k[j], ia.l[j]
                kb, lb = ib.k[j], ib.l[j]
                w = ka * lb - la * kb
                if w:
                    l = list(x + y for x, y in zip(ia.l, ib.l))
                    l[j] -= 1
                    idx = MultiIndex(
                        tuple(l),
                        tuple(x + y for x, y in zip(ia.k, ib.k)),
                        tuple(x + y for x, y in zip(ia.m1, ib.m1)),
                        tuple(x + y for x, y in zip(ia.m2, ib.m2)),
                    )
                    accumulate(idx, _times_i(cab * w))
            # transverse channels
            for j in range(n2):
                w = ia.m1[j] * ib.m2[j] - ia.m2[j] * ib.m1[j]
                if w:
                    m1 = list(x + y for x, y in zip(ia.m1, ib.m1))
                    m2 = list(x + y for x, y in zip(ia.m2, ib.m2))
                    m1[j] -= 1
                    m2[j] -= 1
                    idx = MultiIndex(
                        tuple(x + y for x, y in zip(ia.l, ib.l)),
                        tuple(x + y for x, y in zip(ia.k, ib.k)),
                        tuple(m1),
                        tuple(m2),
                    )
                    accumulate(idx, cab * w)
    return TaylorFourierSeries(n1, n2, out, pol)


def lie_derivative(f: TaylorFourierSeries, chi: TaylorFourierSeries,
                   zeta: Sequence | None = None) -> TaylorFourierSeries:
    """Lie derivative L_chi f = {f, chi}; an optional action translation vector
    ``zeta`` adds the derivation of the angle-linear generator <zeta, q>,
    namely ``-<zeta, grad_p f>``."""
    out = poisson_bracket(f, chi)
    if zeta is not None:
        for j, zj in enumerate(zeta):
            if _is_zero(zj, 0.0):
                continue
            out = out - f.dp(j).scale(zj)
    return out


def lie_transform(f: TaylorFourierSeries, chi: TaylorFourierSeries,
                  chi_eps_order: int, max_eps_order: int,
                  f_eps_order: int = 0, zeta: Sequence | None = None) -> TaylorFourierSeries:
    """Truncated Lie series exp(L_chi) f = sum_j L_chi^j f / j!.

    ``chi`` carries formal order ``chi_eps_order`` (>= 1) in the small
    parameter and ``f`` a uniform order ``f_eps_order``; iterates beyond
    ``max_eps_order`` are dropped.  With ``chi = 0`` and ``zeta = None`` the
    input is returned unchanged.
    """
    if chi_eps_order < 1:
        raise ValueError("generator must carry a positive formal order")
    out = f
    term = f
    j = 1
    factorial = 1
    while f_eps_order + j * chi_eps_order <= max_eps_order:
        term = lie_derivative(term, chi, zeta)
        if term.is_zero():
            break
        factorial *= j
        out = out + term.scale(_inv_int(factorial, term))
        j += 1
    return out


def _inv_int(n: int, ref: TaylorFourierSeries):
    """1/n in the coefficient arithmetic of ``ref``."""
    for c in ref.terms.values():
        if isinstance(c, RationalComplex):
            return Fraction(1, n)
        break
    return 1.0 / n


# -- serialization ---------------------------------------------------------------


def dump_series(f: TaylorFourierSeries, eps_order: int = 0) -> str:
    """Line-oriented text format, one term per line:
    ``l... | k... | m1... | m2... | re im | eps_order``."""
    lines = [
        "# taylor-fourier series",
        f"# n1={f.n1} n2={f.n2}",
    ]
    for idx in sorted(f.terms):
        c = complex(f.terms[idx])
        lines.append("{} | {} | {} | {} | {!r} {!r} | {}".format(
            " ".join(map(str, idx.l)),
            " ".join(map(str, idx.k)),
            " ".join(map(str, idx.m1)),
            " ".join(map(str, idx.m2)),
            c.real, c.imag, eps_order))
    return "\n".join(lines) + "\n"


def load_series(text: str, truncation=DEFAULT_POLICY) -> dict:
    """Parse the :func:`dump_series` format; returns {eps_order: series}."""
    n1 = n2 = None
    per_order: dict = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "n1=" in line:
                parts = dict(p.split("=") for p in line.lstrip("# ").split())
                n1, n2 = int(parts["n1"]), int(parts["n2"])
            continue
        if n1 is None:
            raise ValueError("series header with dims missing")
        fields = [p.strip() for p in line.split("|")]
        if len(fields) != 6:
            raise ValueError(f"malformed series line: {raw!r}")
        l = tuple(int(x) for x in fields[0].split())
        k = tuple(int(x) for x in fields[1].split())
        m1 = tuple(int(x) for x in fields[2].split()) if fields[2] else ()
        m2 = tuple(int(x) for x in fields[3].split()) if fields[3] else ()
        re_s, im_s = fields[4].split()
        s = int(fields[5])
        idx = MultiIndex(l, k, m1, m2)
        per_order.setdefault(s, {})[idx] = complex(float(re_s), float(im_s))
    if n1 is None:
        raise ValueError("series header with dims missing")
    return {
        s: TaylorFourierSeries(n1, n2, terms, truncation)
        for s, terms in sorted(per_order.items())
    }
