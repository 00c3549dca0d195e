"""Order-r resonant normal form: homological solvers, the five-stage step,
the driver, and the estimate ledger.

A normalization step removes the grade-1 and grade-3 couplings at order r,
averages the grade-0/2/4 terms over the fast angle, and translates the
actions so the linear frequency stays fixed.  The bookkeeping of how each
family member transforms is implemented literally from the stage recursions
(floor(s/r) sums plus the special low-order identities), not by generic
exponential composition, so every index is machine-checkable.
"""

from __future__ import annotations

import cmath
import csv
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import GradedHamiltonian
from .series import (
    NormWeights,
    RationalComplex,
    TaylorFourierSeries,
    _div_by_i_real,
    dump_series,
    lie_derivative,
)


class SmallDivisorError(ArithmeticError):
    """A homological divisor fell below the configured threshold."""

    def __init__(self, divisor, index):
        self.divisor = divisor
        self.index = index
        super().__init__(f"divisor {divisor!r} below threshold at {index}")


class NormalFormError(RuntimeError):
    pass


STAGES = ("I", "II", "III", "IV", "V")
STAGE_GRADES = {"I": 0, "II": 1, "III": 2, "IV": 3, "V": 4}
# grade shift of one Lie application per stage generator
STAGE_SHIFTS = {"I": -2, "II": -1, "III": 0, "IV": 1, "V": 2}


# -- Melnikov nonresonance -------------------------------------------------------


@dataclass(frozen=True)
class MelnikovReport:
    """Minimum divisor over the scanned range and the tuple achieving it."""

    alpha: float
    worst_offender: tuple
    passed: bool
    K: int
    delta_min: float


def check_melnikov(omega, Omega, K, delta_min) -> MelnikovReport:
    """Scan |omega|, |k1 omega +- Omega_j| (first condition, all |k1| <= K) and
    |k1 omega +- Omega_l +- Omega_k| (second condition, k1 != 0)."""
    if K < 1:
        raise ValueError("harmonic cutoff K must be >= 1")
    omega = float(omega)
    Om = [float(x) for x in Omega]
    best = (abs(omega), ("omega",))
    for k1 in range(-K, K + 1):
        for j, Oj in enumerate(Om):
            for s in (1, -1):
                v = abs(k1 * omega + s * Oj)
                if v < best[0]:
                    best = (v, ("first", k1, j, s))
        if k1 == 0:
            continue
        for l, Ol in enumerate(Om):
            for k, Ok in enumerate(Om):
                for s1 in (1, -1):
                    for s2 in (1, -1):
                        v = abs(k1 * omega + s1 * Ol + s2 * Ok)
                        if v < best[0]:
                            best = (v, ("second", k1, l, s1, k, s2))
    alpha, offender = best
    return MelnikovReport(alpha, offender, alpha > delta_min, K, delta_min)


# -- homological equations --------------------------------------------------------


def solve_homological(f: TaylorFourierSeries, mode: str, keep_k1_zero: bool,
                      omega, Omega, delta_min: float) -> TaylorFourierSeries:
    """Generating function chi with L_chi(omega p_1 + sum_j i Omega_j xi_j eta_j)
    killing the removable part of ``f``.

    ``mode='action'`` uses divisors ``i k1 omega`` and requires a transverse-free
    input; ``mode='mixed'`` uses ``i (k1 omega + <m1 - m2, Omega>)``.  With
    ``keep_k1_zero`` only the ``k1 != 0`` harmonics are solved (fast-angle
    averaging); otherwise every harmonic is removed.
    """
    if mode not in ("action", "mixed"):
        raise ValueError(f"unknown homological mode {mode!r}")
    out = {}
    for idx, c in f.terms.items():
        k1 = idx.k[0]
        if keep_k1_zero and k1 == 0:
            continue
        if mode == "action":
            if idx.transverse_degree != 0:
                raise ValueError("action-only homological equation met a transverse term")
            divisor = k1 * omega
        else:
            divisor = k1 * omega
            for j in range(f.n2):
                divisor = divisor + (idx.m1[j] - idx.m2[j]) * Omega[j]
        if abs(divisor) <= delta_min:
            raise SmallDivisorError(divisor, idx)
        out[idx] = _div_by_i_real(c, divisor)
    return TaylorFourierSeries(f.n1, f.n2, out, f.truncation)


def extract_action_hessian(f4: TaylorFourierSeries):
    """Hessian of a transverse-free, angle-free grade-4 series at p = 0
    (rows of exact coefficients; the twist matrix)."""
    n1 = f4.n1
    C = [[0 for _ in range(n1)] for _ in range(n1)]
    for idx, c in f4.terms.items():
        if idx.transverse_degree != 0 or idx.action_degree != 2:
            continue
        if any(idx.k):
            raise NormalFormError("twist extraction met an angle-dependent term")
        nz = [j for j, e in enumerate(idx.l) if e]
        if len(nz) == 1:
            j = nz[0]
            C[j][j] = C[j][j] + 2 * c
        else:
            a, b = nz
            C[a][b] = C[a][b] + c
            C[b][a] = C[b][a] + c
    return C


def twist_constant(C) -> float:
    """Minimum l1-gain of the twist matrix: m = 1 / ||C^{-1}||_{1->1}."""
    Cf = np.array([[_to_float(x) for x in row] for row in C], dtype=float)
    try:
        inv = np.linalg.inv(Cf)
    except np.linalg.LinAlgError:
        return 0.0
    colsum = np.max(np.sum(np.abs(inv), axis=0))
    return 1.0 / colsum


def _to_float(x):
    if isinstance(x, RationalComplex):
        if x.im != 0:
            raise NormalFormError("expected a real coefficient")
        return float(x.re)
    if isinstance(x, complex):
        return x.real
    return float(x)


def frequency_fix_translation(family: dict, r: int, qstar_phases, C,
                              exact: bool):
    """Translation vector solving C zeta = grad_p <f_2^{(r-1,r)}|_{xi=eta=0, q=q*}>_{q1}."""
    n1 = len(C)
    f2 = family.get((2, r))
    if f2 is None or f2.is_zero():
        return [Fraction(0)] * n1 if exact else [0.0] * n1
    restricted = f2.restrict_transverse_zero() \
                   .substitute_slow_angles(qstar_phases) \
                   .average_fast_angle()
    rhs = restricted.linear_action_coefficients()
    if exact:
        rhs_ex = [_to_fraction(x) for x in rhs]
        return _solve_fraction(C, rhs_ex)
    Cf = np.array([[_to_float(x) for x in row] for row in C], dtype=float)
    rhs_f = np.array([complex(x).real for x in rhs], dtype=float)
    imag = max((abs(complex(x).imag) for x in rhs), default=0.0)
    if imag > 1e-10 * max(1.0, np.max(np.abs(rhs_f))):
        raise NormalFormError(f"translation right-hand side is not real ({imag:.2e})")
    zeta = np.linalg.solve(Cf, rhs_f)
    resid = np.linalg.norm(Cf @ zeta - rhs_f)
    if resid > 1e-12 * max(1.0, np.linalg.norm(rhs_f)):
        raise NormalFormError(f"translation solve residual {resid:.2e}")
    return list(zeta)


def _to_fraction(x):
    if isinstance(x, RationalComplex):
        if x.im != 0:
            raise NormalFormError("expected a real exact coefficient")
        return x.re
    return Fraction(x)


def _solve_fraction(C, rhs):
    n = len(C)
    aug = [[_to_fraction(C[i][j]) for j in range(n)] + [rhs[i]] for i in range(n)]
    for c in range(n):
        piv = next((r for r in range(c, n) if aug[r][c] != 0), None)
        if piv is None:
            raise NormalFormError("twist matrix is singular")
        aug[c], aug[piv] = aug[piv], aug[c]
        pv = aug[c][c]
        aug[c] = [x / pv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                fct = aug[r][c]
                aug[r] = [x - fct * y for x, y in zip(aug[r], aug[c])]
    return [aug[i][n] for i in range(n)]


# -- generating functions and stages ----------------------------------------------


@dataclass
class GeneratingFunction:
    """One stage generator: the series part ``chi`` (coefficient of eps^r) and,
    for stage I, the action translation ``zeta``."""

    stage: str
    r: int
    chi: TaylorFourierSeries
    zeta: list | None = None

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        expected = STAGE_GRADES[self.stage]
        for idx in self.chi.terms:
            if idx.grade != expected:
                raise ValueError(
                    f"stage {self.stage} generator contains a grade-{idx.grade} term")

    def is_zero(self):
        zeta_zero = self.zeta is None or all(not _nonzero(z) for z in self.zeta)
        return self.chi.is_zero() and zeta_zero

    def lie(self, f: TaylorFourierSeries) -> TaylorFourierSeries:
        return lie_derivative(f, self.chi, self.zeta)


def _nonzero(z):
    if isinstance(z, Fraction):
        return z != 0
    return abs(z) > 0.0


def _inv_factorial(j: int, exact: bool):
    return Fraction(1, math.factorial(j)) if exact else 1.0 / math.factorial(j)


def _scalar(value, exact: bool):
    return Fraction(value) if exact else float(value)


def _apply_stage(family: dict, gen: GeneratingFunction, r: int, s_max: int,
                 ell_max: int, exact: bool, specials: dict) -> dict:
    """Push every family member through exp(L) using the floor(s/r) sums, then
    overwrite the targets fixed by the stage's homological identities."""
    shift = STAGE_SHIFTS[gen.stage]
    out = {key: series for key, series in family.items()}

    if not gen.is_zero():
        for (l_src, s_src), f in family.items():
            chain = f
            j = 1
            while s_src + j * r <= s_max:
                chain = gen.lie(chain)
                if chain.is_zero():
                    break
                l_tgt = l_src + j * shift
                if 0 <= l_tgt <= ell_max:
                    key = (l_tgt, s_src + j * r)
                    contrib = chain.scale(_inv_factorial(j, exact))
                    out[key] = contrib if key not in out else out[key] + contrib
                j += 1

    for key, series in specials.items():
        if series.is_zero():
            out.pop(key, None)
        else:
            out[key] = series
    return {k: v for k, v in out.items() if not v.is_zero()}


def normalization_step(ham: GradedHamiltonian, r: int, qstar_phases,
                       delta_min: float):
    """One five-stage normalization step taking order r-1 to order r."""
    if r < 1:
        raise ValueError("normalization order must be >= 1")
    if ham.truncation.max_grade < 4:
        raise NormalFormError("grade cutoff below 4 cannot hold the normal form classes")
    exact = ham.exact
    omega, Omega = ham.omega, ham.Omega
    s_max, ell_max = ham.s_max, ham.truncation.max_grade
    fam = dict(ham.terms)
    zero = TaylorFourierSeries.zero(ham.n1, ham.n2, ham.truncation)
    half = _scalar(1, exact) / _scalar(2, exact)
    generators = []

    # Stage I: average f_0^{(r-1,r)} over the fast angle and translate the
    # actions to keep the frequency fixed.
    f0r = fam.get((0, r), zero)
    X0 = solve_homological(f0r, "action", True, omega, Omega, delta_min)
    C0 = extract_action_hessian(fam.get((4, 0), zero))
    zeta = frequency_fix_translation(fam, r, qstar_phases, C0, exact)
    genI = GeneratingFunction("I", r, X0, zeta)
    fam = _apply_stage(fam, genI, r, s_max, ell_max, exact,
                       {(0, r): f0r.average_fast_angle()})
    generators.append(genI)

    # Stage II: remove the grade-1 coupling entirely.
    f1r = fam.get((1, r), zero)
    chi1 = solve_homological(f1r, "mixed", False, omega, Omega, delta_min)
    genII = GeneratingFunction("II", r, chi1)
    specials = {(1, r): zero}
    if 2 * r <= s_max:
        specials[(0, 2 * r)] = fam.get((0, 2 * r), zero) \
            + genII.lie(f1r).scale(half)
    fam = _apply_stage(fam, genII, r, s_max, ell_max, exact, specials)
    generators.append(genII)

    # Stage III: average the grade-2 term over the fast angle.
    f2r = fam.get((2, r), zero)
    chi2 = solve_homological(f2r, "mixed", True, omega, Omega, delta_min)
    genIII = GeneratingFunction("III", r, chi2)
    f2avg = f2r.average_fast_angle()
    specials = {(2, r): f2avg}
    i = 2
    while i * r <= s_max:
        inv_i = _scalar(1, exact) / _scalar(i, exact)
        lead = f2avg.scale(inv_i) + f2r.scale(_scalar(i - 1, exact) * inv_i)
        chain = lead
        for _ in range(i - 1):
            chain = genIII.lie(chain)
        total = chain.scale(_inv_factorial(i - 1, exact))
        for j in range(i - 1):
            piece = fam.get((2, (i - j) * r), zero)
            for _ in range(j):
                piece = genIII.lie(piece)
            total = total + piece.scale(_inv_factorial(j, exact))
        specials[(2, i * r)] = total
        i += 1
    fam = _apply_stage(fam, genIII, r, s_max, ell_max, exact, specials)
    generators.append(genIII)

    # Stage IV: remove the action-transverse part of the grade-3 term.
    f3r = fam.get((3, r), zero)
    mixed_part = f3r.filter_terms(lambda idx: idx.action_degree == 1)
    chi3 = solve_homological(mixed_part, "mixed", False, omega, Omega, delta_min)
    genIV = GeneratingFunction("IV", r, chi3)
    f3_rest = f3r.restrict_actions_zero()
    specials = {(3, r): f3_rest}
    if 2 * r <= s_max:
        specials[(4, 2 * r)] = fam.get((4, 2 * r), zero) \
            + genIV.lie(f3r).scale(half) + genIV.lie(f3_rest).scale(half)
    fam = _apply_stage(fam, genIV, r, s_max, ell_max, exact, specials)
    generators.append(genIV)

    # Stage V: average the transverse-free part of the grade-4 term.
    f4r = fam.get((4, r), zero)
    f4_flat = f4r.restrict_transverse_zero()
    chi4 = solve_homological(f4_flat, "action", True, omega, Omega, delta_min)
    genV = GeneratingFunction("V", r, chi4)
    specials = {(4, r): f4_flat.average_fast_angle() + (f4r - f4_flat)}
    fam = _apply_stage(fam, genV, r, s_max, ell_max, exact, specials)
    generators.append(genV)

    out = ham.copy_shell(order=r)
    out.terms = fam
    return out, generators


# -- the driver --------------------------------------------------------------------


@dataclass
class StructureReport:
    """Largest coefficient violating each normal-form property, per order s <= r."""

    fast_angle_in_f0: float = 0.0
    f1_present: float = 0.0
    fast_angle_in_f2: float = 0.0
    f2_at_equilibrium: float = 0.0
    actions_in_f3: float = 0.0
    fast_angle_in_f4_flat: float = 0.0

    def max_defect(self) -> float:
        return max(self.fast_angle_in_f0, self.f1_present, self.fast_angle_in_f2,
                   self.f2_at_equilibrium, self.actions_in_f3,
                   self.fast_angle_in_f4_flat)


def check_structure(ham: GradedHamiltonian, qstar_phases) -> StructureReport:
    rep = StructureReport()
    r = ham.order
    for (grade, s), series in ham.terms.items():
        if s < 1 or s > r:
            continue
        if grade == 0:
            bad = series.filter_terms(lambda idx: idx.k[0] != 0)
            rep.fast_angle_in_f0 = max(rep.fast_angle_in_f0, bad.max_abs_coeff())
        elif grade == 1:
            rep.f1_present = max(rep.f1_present, series.max_abs_coeff())
        elif grade == 2:
            bad = series.filter_terms(lambda idx: idx.k[0] != 0)
            rep.fast_angle_in_f2 = max(rep.fast_angle_in_f2, bad.max_abs_coeff())
            at_eq = series.restrict_transverse_zero() \
                          .substitute_slow_angles(qstar_phases) \
                          .average_fast_angle()
            rep.f2_at_equilibrium = max(rep.f2_at_equilibrium, at_eq.max_abs_coeff())
        elif grade == 3:
            bad = series.filter_terms(lambda idx: idx.action_degree > 0)
            rep.actions_in_f3 = max(rep.actions_in_f3, bad.max_abs_coeff())
        elif grade == 4:
            flat = series.restrict_transverse_zero()
            bad = flat.filter_terms(lambda idx: idx.k[0] != 0)
            rep.fast_angle_in_f4_flat = max(rep.fast_angle_in_f4_flat, bad.max_abs_coeff())
    return rep


@dataclass
class NormalFormResult:
    H: GradedHamiltonian
    generators: list
    qstar: np.ndarray
    melnikov: MelnikovReport
    twist_m: float
    structure: list          # StructureReport per completed order
    ledger: "EstimateLedger | None" = None

    def generators_of_step(self, r):
        return [g for g in self.generators if g.r == r]


def qstar_phases(qstar, exact: bool = False):
    """Unit-circle values exp(i q*_j) for the slow angles."""
    out = []
    for q in qstar:
        if exact:
            if q == 0:
                out.append(RationalComplex(1, 0))
            elif math.isclose(float(q), math.pi, rel_tol=0, abs_tol=1e-15):
                out.append(RationalComplex(-1, 0))
            else:
                raise ValueError("exact mode supports q* components in {0, pi} only")
        else:
            out.append(cmath.exp(1j * float(q)))
    return out


def normalize(ham: GradedHamiltonian, r_max: int, qstar,
              delta_min: float | None = None,
              require_melnikov: bool = True,
              with_ledger: bool = False,
              weights: NormWeights | None = None,
              d: float = 0.25) -> NormalFormResult:
    """Drive r_max normalization steps at the fixed parameter vector q*."""
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    if len(qstar) != ham.n1 - 1:
        raise ValueError("q* must have one component per slow angle")
    if delta_min is None:
        delta_min = 1e-8 * abs(float(ham.omega))
    phases = qstar_phases(qstar, ham.exact)

    C0 = extract_action_hessian(ham.f(4, 0))
    m = twist_constant(C0)
    if m <= 0:
        raise NormalFormError("twist condition fails: action Hessian is singular")
    mel = check_melnikov(ham.omega, ham.Omega, ham.truncation.max_harmonic, delta_min)
    if require_melnikov and not mel.passed:
        raise NormalFormError(
            f"Melnikov scan fails at {mel.worst_offender} (alpha={mel.alpha:.3e})")

    current = ham
    generators = []
    structure = []
    for r in range(1, r_max + 1):
        current, gens = normalization_step(current, r, phases, delta_min)
        generators.extend(gens)
        structure.append(check_structure(current, phases))

    ledger = None
    if with_ledger:
        w = weights if weights is not None else NormWeights()
        profile = ham.decay_profile(w)
        ledger = estimate_ledger(
            E=max(profile["E"], 1e-30), m=m, alpha=mel.alpha,
            weights=w, d=d, r_max=max(r_max, 1), s_max=max(ham.s_max, 6))

    return NormalFormResult(
        H=current, generators=generators, qstar=np.asarray([float(q) for q in qstar]),
        melnikov=mel, twist_m=m, structure=structure, ledger=ledger)


# -- estimate ledger ----------------------------------------------------------------


@dataclass
class EstimateLedger:
    """Recursive estimate machinery: domain-restriction sequences, the bracket
    factor, the term-count table and the derived thresholds."""

    d: float
    E: float
    m: float
    alpha: float
    weights: NormWeights
    delta: list = field(default_factory=list)        # delta_r, r >= 1
    d_seq: list = field(default_factory=list)        # d_r, r >= 0
    Xi: list = field(default_factory=list)           # Xi_r, r >= 1
    nu: list = field(default_factory=list)           # nu[r][s]
    nu_stages: list = field(default_factory=list)    # per r: dict stage -> row
    generator_bounds: list = field(default_factory=list)   # per r: dict
    f_bound_factor: list = field(default_factory=list)     # per r: list over s
    eps_star: list = field(default_factory=list)     # eps*(r)
    c1: list = field(default_factory=list)           # c1(r)

    def nu_bound_ok(self) -> bool:
        ok = all(v == 1 for v in self.nu[0])
        for r in range(len(self.nu)):
            for s in range(len(self.nu[r])):
                ok = ok and self.nu[r][s] <= self.nu[s][s] if s < len(self.nu) else ok
                ok = ok and self.nu[r][s] <= 2 ** (14 * s) / 2 ** 8 or s == 0
        return ok


def delta_sequence(d: float, r_max: int):
    """delta_r = (d/5)(6/pi^2) r^{-2}: decreasing with sum <= d/5."""
    if not 0 < d <= 0.25:
        raise ValueError("domain budget d must lie in (0, 1/4]")
    return [(d / 5.0) * (6.0 / math.pi ** 2) / r ** 2 for r in range(1, r_max + 1)]


def nu_table(r_max: int, s_max: int):
    """The five-stage term-count recursion; returns (final rows, stage rows)."""
    nu = [[1] * (s_max + 1)]
    stages_all = []
    for r in range(1, r_max + 1):
        prev = nu[r - 1]

        def convolve(row, anchor):
            out = []
            for s in range(s_max + 1):
                tot = 0
                for j in range(s // r + 1):
                    tot += anchor ** j * row[s - j * r]
                out.append(tot)
            return out

        nuI = convolve(prev, prev[r])
        nuII = convolve(nuI, nuI[r])
        nuIII = convolve(nuII, 2 * nuII[r])
        nuIV = convolve(nuIII, nuIII[r])
        nuV = convolve(nuIV, nuIV[r])
        nu.append(nuV)
        stages_all.append({"I": nuI, "II": nuII, "III": nuIII, "IV": nuIV})
    return nu, stages_all


def estimate_ledger(E: float, m: float, alpha: float, weights: NormWeights,
                    d: float, r_max: int, s_max: int) -> EstimateLedger:
    rho, sigma, R = weights.rho, weights.sigma, weights.R
    led = EstimateLedger(d=d, E=E, m=m, alpha=alpha, weights=weights)
    led.delta = delta_sequence(d, r_max)
    led.d_seq = [0.0]
    for dr in led.delta:
        led.d_seq.append(led.d_seq[-1] + 5 * dr)
    e = math.e
    for dr in led.delta:
        led.Xi.append(max(
            e * E / (alpha * dr ** 2 * rho * sigma) + e * E / (4 * m * dr * rho ** 2),
            2 + e * E / (alpha * dr ** 2 * rho * sigma),
            (E / (alpha * dr ** 2)) * (2 * e / (rho * sigma) + e ** 2 / R ** 2),
        ))
    led.nu, led.nu_stages = nu_table(r_max, s_max)
    for r in range(1, r_max + 1):
        Xi = led.Xi[r - 1]
        st = led.nu_stages[r - 1]
        led.generator_bounds.append({
            "X0": led.nu[r - 1][r] * Xi ** (5 * r - 5) * E / alpha,
            "zeta": led.nu[r - 1][r] * Xi ** (5 * r - 3) * E / (4 * m * rho),
            "chi1": st["I"][r] * Xi ** (5 * r - 4) * E / (2 * alpha),
            "chi2": 2 * st["II"][r] * Xi ** (5 * r - 3) * E / (4 * alpha),
            "chi3": st["III"][r] * Xi ** (5 * r - 2) * E / (8 * alpha),
            "chi4": st["IV"][r] * Xi ** (5 * r - 1) * E / (16 * alpha),
        })
        led.f_bound_factor.append(
            [led.nu[r][s] * Xi ** (5 * s) * E for s in range(s_max + 1)])
        led.eps_star.append(1.0 / (2 ** 14 * Xi ** 5))
        led.c1.append(4 * E * (2 ** 14 * Xi ** 5) ** (r + 1))
    return led


def f_term_bound(led: EstimateLedger, r: int, grade: int, s: int) -> float:
    """Norm bound on f_grade^{(r,s)} at shrunk radii, per coefficient of eps^s."""
    return led.f_bound_factor[r - 1][s] / 2 ** grade


# -- serialization ------------------------------------------------------------------


def save_normal_form(result: NormalFormResult, out_dir: str):
    """One series file per family slot, a generators manifest, a ledger CSV."""
    os.makedirs(out_dir, exist_ok=True)
    for (grade, s), series in sorted(result.H.terms.items()):
        path = os.path.join(out_dir, f"f_l{grade}_s{s}.series")
        with open(path, "w") as fh:
            fh.write(dump_series(series, eps_order=s))
    with open(os.path.join(out_dir, "generators.txt"), "w") as fh:
        fh.write("# step stage file zeta...\n")
        for i, gen in enumerate(result.generators):
            fname = f"chi_r{gen.r}_{gen.stage}.series"
            with open(os.path.join(out_dir, fname), "w") as gh:
                gh.write(dump_series(gen.chi, eps_order=gen.r))
            zeta = "" if gen.zeta is None else " ".join(repr(float(z)) for z in gen.zeta)
            fh.write(f"{gen.r} {gen.stage} {fname} {zeta}\n".rstrip() + "\n")
    if result.ledger is not None:
        led = result.ledger
        with open(os.path.join(out_dir, "ledger.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "delta_r", "d_r", "Xi_r", "nu_rr",
                             "eps_star", "c1"])
            for r in range(1, len(led.delta) + 1):
                writer.writerow([r, repr(led.delta[r - 1]), repr(led.d_seq[r]),
                                 repr(led.Xi[r - 1]),
                                 led.nu[r][r] if r < len(led.nu[r]) else "",
                                 repr(led.eps_star[r - 1]), repr(led.c1[r - 1])])
