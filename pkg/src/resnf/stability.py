"""Linearization around relative equilibria, fast/slow decoupling, Floquet
spectra and their splitting, stability classification, and spectral
perturbation validators.

Blocks are literal Hessians of the truncated normal form at the relative
equilibrium; the linear vector field is J times the Hessian and block
diagonalizes between the (q, p) directions and the transverse pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .model import GradedHamiltonian


class StabilityError(RuntimeError):
    pass


_SQ2 = math.sqrt(2.0)


# -- linearization blocks -----------------------------------------------------------


@dataclass
class LinearizationBlocks:
    """Second derivatives of the truncated normal form at the relative
    equilibrium: B (slow angles), D (slow angles x actions), C (actions),
    E, F, G (transverse), with the attached eps value."""

    eps: float
    B: np.ndarray
    D: np.ndarray
    C: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def n1(self):
        return self.C.shape[0]

    @property
    def n2(self):
        return self.E.shape[0]

    def B_ext(self):
        """B with a zero row and column prepended (fast-angle slot)."""
        n1 = self.n1
        out = np.zeros((n1, n1))
        out[1:, 1:] = self.B
        return out

    def D_ext(self):
        """D with a zero top row (fast-angle slot); entry (i, j) is the mixed
        derivative with respect to angle i and action j."""
        n1 = self.n1
        out = np.zeros((n1, n1))
        out[1:, :] = self.D
        return out


def _second_derivative(series, i, j, n1, n2):
    def deriv(s, a):
        if a < n1:
            return s.dq(a)
        if a < n1 + n2:
            return s.dxi(a - n1)
        if a < 2 * n1 + n2:
            return s.dp(a - n1 - n2)
        return s.deta(a - 2 * n1 - n2)

    return deriv(deriv(series, i), j)


def linearize_blocks(ham: GradedHamiltonian, eps: float, qstar,
                     equilibrium_tol: float = 1e-8) -> LinearizationBlocks:
    """Extract B, C, D, E, F, G at x* = (q = q*, p = 0, xi = eta = 0) from the
    normal form truncated at its normalization order."""
    Z = ham.truncated(ham.order)
    n1, n2 = Z.n1, Z.n2
    qhat = np.concatenate(([0.0], np.asarray(qstar, float)))
    zp = [0.0] * n1
    zt = [0.0] * n2

    # relative-equilibrium check: gradient reduces to omega along p_1
    grad = np.zeros(2 * (n1 + n2), dtype=complex)
    for (grade, s), series in Z.terms.items():
        w = eps ** s
        for a in range(n1):
            grad[a] += w * series.dq(a).evaluate(zp, qhat, zt, zt)
            grad[n1 + n2 + a] += w * series.dp(a).evaluate(zp, qhat, zt, zt)
        for a in range(n2):
            grad[n1 + a] += w * series.dxi(a).evaluate(zp, qhat, zt, zt)
            grad[2 * n1 + n2 + a] += w * series.deta(a).evaluate(zp, qhat, zt, zt)
    expected = np.zeros_like(grad)
    expected[n1 + n2] = float(Z.omega)
    defect = np.max(np.abs(grad - expected))
    if defect > equilibrium_tol:
        raise StabilityError(f"x* is not a relative equilibrium (defect {defect:.3e})")

    dim = 2 * (n1 + n2)
    Hw = np.zeros((dim, dim), dtype=complex)
    for (grade, s), series in Z.terms.items():
        w = eps ** s
        for i in range(dim):
            for j in range(i, dim):
                d2 = _second_derivative(series, i, j, n1, n2)
                if d2.is_zero():
                    continue
                v = w * d2.evaluate(zp, qhat, zt, zt)
                Hw[i, j] += v
                if i != j:
                    Hw[j, i] += v

    qi = list(range(n1))
    xii = list(range(n1, n1 + n2))
    pi = list(range(n1 + n2, 2 * n1 + n2))
    etai = list(range(2 * n1 + n2, dim))

    fast_defect = max(
        np.max(np.abs(Hw[np.ix_([0], qi + pi)])),
        np.max(np.abs(Hw[np.ix_(qi + pi, [0])])),
    )
    if fast_defect > 1e-10 * max(1.0, np.max(np.abs(Hw))):
        raise StabilityError(
            f"quadratic part depends on the fast angle (defect {fast_defect:.3e})")

    B = Hw[np.ix_(qi[1:], qi[1:])]
    D = Hw[np.ix_(qi[1:], pi)]
    C = Hw[np.ix_(pi, pi)]
    E = Hw[np.ix_(xii, etai)]
    G = Hw[np.ix_(xii, xii)]
    F = Hw[np.ix_(etai, etai)]
    for name, M in (("B", B), ("D", D), ("C", C)):
        if np.max(np.abs(M.imag)) > 1e-10 * max(1.0, np.max(np.abs(M))):
            raise StabilityError(f"block {name} has an imaginary part")
    return LinearizationBlocks(eps=float(eps), B=B.real, D=D.real, C=C.real,
                               E=E, F=F, G=G)


# -- linear vector field --------------------------------------------------------------


@dataclass
class LinearVectorField:
    L11: np.ndarray          # 2 n1 square, real, acting on (Q, P)
    L22: np.ndarray          # 2 n2 square, complex, acting on (xi, eta)
    L22_real: np.ndarray     # 2 n2 square, real, acting on (x, y)
    full: np.ndarray         # 2 n square, real, block order (q, p, x, y)


def assemble_L(blocks: LinearizationBlocks) -> LinearVectorField:
    n1, n2 = blocks.n1, blocks.n2
    Bx = blocks.B_ext()
    Dx = blocks.D_ext()
    L11 = np.block([[Dx.T, blocks.C], [-Bx, -Dx]])
    L22 = np.block([[blocks.E.T, blocks.F], [-blocks.G, -blocks.E]])
    # complex -> real transverse basis: (xi, eta) = W (x, y)
    W = np.zeros((2 * n2, 2 * n2), dtype=complex)
    for j in range(n2):
        W[j, j] = 1 / _SQ2
        W[j, n2 + j] = -1j / _SQ2
        W[n2 + j, j] = -1j / _SQ2
        W[n2 + j, n2 + j] = 1 / _SQ2
    L22r = np.linalg.solve(W, L22 @ W)
    if np.max(np.abs(L22r.imag)) > 1e-10 * max(1.0, np.max(np.abs(L22r))):
        raise StabilityError("transverse field is not real in Cartesian variables")
    L22r = L22r.real
    n = n1 + n2
    full = np.zeros((2 * n, 2 * n))
    full[np.ix_(range(2 * n1), range(2 * n1))] = np.block(
        [[L11[:n1, :n1], L11[:n1, n1:]], [L11[n1:, :n1], L11[n1:, n1:]]])
    tr = list(range(2 * n1, 2 * n))
    full[np.ix_(tr, tr)] = L22r
    return LinearVectorField(L11=L11, L22=L22, L22_real=L22r, full=full)


def approximate_reduced_return(lin: LinearVectorField, T: float, n1: int):
    """N(eps): the flat-reduced exp(L T) - Id in block order (q, p, trans)."""
    from .continuation import reduce_matrix

    dim = lin.full.shape[0]
    return reduce_matrix(expm(lin.full * T) - np.eye(dim), n1)


def split_N(N: np.ndarray, n1: int):
    m = 2 * n1 - 1
    return N[:m, :m], N[m:, m:], max(
        float(np.max(np.abs(N[:m, m:]))) if N.shape[0] > m else 0.0,
        float(np.max(np.abs(N[m:, :m]))) if N.shape[0] > m else 0.0,
    )


# -- fast/slow decoupling and the slow spectrum ----------------------------------------


def decouple_fast(blocks: LinearizationBlocks):
    """Schur complement removing the fast action: returns (c11, C22, ||D||)."""
    C = blocks.C
    C11 = C[0, 0]
    C12 = C[0:1, 1:]
    C22 = C[1:, 1:]
    try:
        sol = np.linalg.solve(C22, C12.T)
    except np.linalg.LinAlgError as exc:
        raise StabilityError("C22 is singular; fast direction cannot decouple") from exc
    c11 = float(C11 - (C12 @ sol)[0, 0])
    residual_D = float(np.linalg.norm(blocks.D))
    return c11, C22, residual_D


def slow_matrix(B: np.ndarray, C22: np.ndarray) -> np.ndarray:
    z = np.zeros_like(B)
    return np.block([[z, C22], [-B, z]])


def slow_spectrum(blocks: LinearizationBlocks, d_tol: float = 1e-10):
    """Eigenvalues of the decoupled slow linear field; refuses when the mixed
    angle-action block is present (the shortcut would be invalid)."""
    c11, C22, residual_D = decouple_fast(blocks)
    scale = max(1.0, float(np.max(np.abs(blocks.C))))
    if residual_D > d_tol * scale + 1e-8 * abs(blocks.eps):
        raise StabilityError(
            f"mixed angle-action terms present (||D|| = {residual_D:.3e}); "
            "slow-spectrum shortcut invalid")
    return np.linalg.eigvals(slow_matrix(blocks.B, C22))


# -- classification ---------------------------------------------------------------------


@dataclass
class DirectionLabel:
    index: int           # slow-angle direction (0-based among q_2..q_{n1})
    label: str           # center | saddle | degenerate
    eigenvalue: complex  # representative eigenvalue of the pair
    gammaB_sign: int


@dataclass
class StabilityReport:
    eps: float
    labels: list = field(default_factory=list)
    verdict: str = ""
    degenerate_index: int | None = None
    transverse_definite: bool = True
    omega_signs_ok: bool = True
    sigma11: np.ndarray | None = None
    sigma22: np.ndarray | None = None
    unit_circle_dist: np.ndarray | None = None
    gap_min: float | None = None

    def n_off_circle(self, tol: float) -> int:
        if self.unit_circle_dist is None:
            raise StabilityError("no multiplier data attached")
        return int(np.sum(self.unit_circle_dist > tol))


def classify_stability(blocks: LinearizationBlocks, gamma: float,
                       zero_tol_factor: float = 1e-3) -> StabilityReport:
    """Per-direction center/saddle labels from the decoupled slow field.

    The degenerate direction is the one whose diagonal entry of gamma*B is of
    second order in eps; stability alternates with sign(gamma * eps) on the
    others while the degenerate label is sign-invariant.
    """
    eps = blocks.eps
    c11, C22, residual_D = decouple_fast(blocks)
    sig = np.linalg.eigvals(C22)
    if np.any(np.abs(sig.imag) > 1e-10) or np.any(sig.real == 0):
        raise StabilityError("C22 is not real-diagonalizable")
    definite = np.all(sig.real > 0) or np.all(sig.real < 0)
    if not definite:
        raise StabilityError("C22 is indefinite; signature argument unavailable")

    slow_spectrum(blocks)  # validates the decoupling preconditions
    d = blocks.B.shape[0]
    M = slow_matrix(blocks.B, C22)
    lam_all, vecs = np.linalg.eig(M)

    gB = gamma * np.diag(blocks.B)
    degenerate_index = int(np.argmin(np.abs(gB)))

    # pair eigenvalues (lambda, -lambda) and attach each pair to the slow-angle
    # direction dominating its eigenvector
    used = np.zeros(len(lam_all), dtype=bool)
    labels = []
    for i in range(len(lam_all)):
        if used[i]:
            continue
        li = lam_all[i]
        j = None
        best = np.inf
        for k in range(len(lam_all)):
            if k != i and not used[k]:
                v = abs(lam_all[k] + li)
                if v < best:
                    best, j = v, k
        used[i] = True
        if j is not None:
            used[j] = True
        vec = vecs[:, i]
        direction = int(np.argmax(np.abs(vec[:d]) + np.abs(vec[d:])))
        if abs(li) <= zero_tol_factor * eps ** 2:
            label = "degenerate"
        elif abs(li.real) <= 1e-6 * max(abs(li), 1e-300):
            label = "center"
        else:
            label = "saddle"
        labels.append(DirectionLabel(direction, label, li,
                                     int(np.sign(gB[direction]))))
    labels.sort(key=lambda x: x.index)
    verdict = "stable" if all(l.label == "center" for l in labels) else "unstable"
    return StabilityReport(
        eps=eps, labels=labels, verdict=verdict,
        degenerate_index=degenerate_index,
        transverse_definite=_transverse_definite(blocks),
        omega_signs_ok=True)


def _transverse_definite(blocks: LinearizationBlocks) -> bool:
    """Definiteness of the transverse quadratic form in Cartesian variables."""
    n2 = blocks.n2
    W = np.zeros((2 * n2, 2 * n2), dtype=complex)
    for j in range(n2):
        W[j, j] = 1 / _SQ2
        W[j, n2 + j] = -1j / _SQ2
        W[n2 + j, j] = -1j / _SQ2
        W[n2 + j, n2 + j] = 1 / _SQ2
    Hc = np.block([[blocks.G, blocks.E], [blocks.E.T, blocks.F]])
    Hr = (W.T @ Hc @ W)
    if np.max(np.abs(Hr.imag)) > 1e-9 * max(1.0, np.max(np.abs(Hr))):
        return False
    ev = np.linalg.eigvalsh((Hr.real + Hr.real.T) / 2)
    return bool(np.all(ev > 0) or np.all(ev < 0))


def omega_signs_ok(Omega) -> bool:
    """Transverse frequencies must share one sign (the used consequence of
    signature theory)."""
    Om = np.asarray([float(x) for x in Omega])
    return bool(np.all(Om > 0) or np.all(Om < 0))


# -- Floquet splitting -------------------------------------------------------------------


def floquet_split(monodromy: np.ndarray, lin: LinearVectorField, T: float,
                  unit_tol: float = 1e-4) -> StabilityReport:
    """Partition the monodromy spectrum by proximity to the spectra of
    exp(L11 T) and exp(L22 T); the (at least two) unit multipliers belong to
    the slow part."""
    mult = np.linalg.eigvals(monodromy)
    ref11 = np.linalg.eigvals(expm(lin.L11 * T))
    ref22 = np.linalg.eigvals(expm(lin.L22 * T))
    gap = min(abs(a - b) for a in ref11 for b in ref22)
    d11 = np.min(np.abs(mult[:, None] - ref11[None, :]), axis=1)
    d22 = np.min(np.abs(mult[:, None] - ref22[None, :]), axis=1)
    assign_tol = gap / 2
    if np.any(np.minimum(d11, d22) > assign_tol):
        raise StabilityError("monodromy spectrum not separable at this eps")
    to11 = d11 <= d22
    s11 = mult[to11]
    s22 = mult[~to11]
    n_unit = int(np.sum(np.abs(np.abs(s11) - 1.0) < unit_tol))
    if n_unit < 2:
        raise StabilityError("fewer than two unit multipliers in the slow part")
    rep = StabilityReport(eps=float("nan"))
    rep.sigma11 = s11
    rep.sigma22 = s22
    rep.unit_circle_dist = np.abs(np.abs(mult) - 1.0)
    rep.gap_min = float(gap)
    return rep


def nonzero_eigen_gaps(L11: np.ndarray, zero_tol: float = 1e-12):
    """Pairwise gaps of the nonzero eigenvalues (fast zero pair excluded)."""
    ev = np.linalg.eigvals(L11)
    scale = max(1.0, float(np.max(np.abs(ev))))
    ev = np.array([l for l in ev if abs(l) > zero_tol * scale])
    gaps = [abs(a - b) for i, a in enumerate(ev) for b in ev[i + 1:]]
    return ev, (min(gaps) if gaps else float("inf"))


def spectral_match(reference, spectrum):
    """Nearest-neighbour matching of two spectra; returns (pairs, distances,
    ambiguous) where ambiguous flags a perturbed eigenvalue claimed twice."""
    reference = np.asarray(reference)
    spectrum = np.asarray(spectrum)
    pairs = []
    dists = []
    claimed = {}
    ambiguous = False
    for lam in reference:
        j = int(np.argmin(np.abs(spectrum - lam)))
        d = float(abs(spectrum[j] - lam))
        pairs.append((lam, spectrum[j]))
        dists.append(d)
        if j in claimed:
            ambiguous = True
        claimed[j] = lam
    return pairs, np.array(dists), ambiguous


# -- spectral perturbation validators ------------------------------------------------------


def estimate_c_op(dim: int, rng, n_samples: int = 200) -> float:
    """Randomized lower estimate of the smallest constant with
    ||M|| <= c_op max(rho(M), 1) over the sampled matrix ensemble."""
    best = 1.0
    for _ in range(n_samples):
        M = rng.standard_normal((dim, dim))
        if rng.uniform() < 0.3:
            # shear-dominated samples probe the non-normal regime
            M = np.triu(M, 1) + np.diag(rng.uniform(0.1, 1.0, dim))
        r = np.linalg.norm(M, 2) / max(np.max(np.abs(np.linalg.eigvals(M))), 1.0)
        best = max(best, float(r))
    return best


@dataclass
class MinEigRow:
    eps: float
    premise_ok: bool
    min_eig: float
    bound: float
    ok: bool


def min_eig_bound_check(N_of, P_of, mu_of, alpha: float, eps_grid,
                        c1: float | None = None) -> dict:
    """Invertibility of N + mu P with the minimum-eigenvalue lower bound
    c3 |eps|^alpha, c3 = 1/(2 c1), on a grid where the perturbation premise
    |mu| ||N^{-1} P|| <= 1/2 holds."""
    rows = []
    if c1 is None:
        c1 = max(np.linalg.norm(np.linalg.inv(np.asarray(N_of(e), dtype=complex)), 2)
                 * abs(e) ** alpha for e in eps_grid)
    c3 = 1.0 / (2.0 * c1)
    for e in eps_grid:
        N = np.asarray(N_of(e), dtype=complex)
        P = np.asarray(P_of(e), dtype=complex)
        mu = mu_of(e)
        Ninv = np.linalg.inv(N)
        premise = abs(mu) * np.linalg.norm(Ninv @ P, 2) <= 0.5
        M = N + mu * P
        mn = float(np.min(np.abs(np.linalg.eigvals(M))))
        bound = c3 * abs(e) ** alpha
        rows.append(MinEigRow(float(e), bool(premise), mn, bound,
                              bool(not premise or mn >= bound)))
    return {
        "c1": float(c1),
        "c3": float(c3),
        "rows": rows,
        "ok": all(r.ok for r in rows),
        "n_premise": sum(r.premise_ok for r in rows),
    }


@dataclass
class LocalizationRow:
    eps: float
    max_dist: float
    bound: float
    separation: float
    sep_required: float
    ambiguous: bool
    ok: bool


def eigenvalue_localization_check(N_of, P_of, mu_of, beta1: float, beta2: float,
                                  c_P: float, c_N: float, eps_grid,
                                  c_op: float) -> dict:
    """Each unperturbed eigenvalue owns a perturbed one within
    c_M |eps|^{beta1}, given pairwise separation >= c_N |eps|^{beta2} with
    beta2 < beta1; c_M is assembled from the proof constants with the supplied
    per-dimension c_op estimate."""
    if not beta2 < beta1:
        raise ValueError("localization needs beta2 < beta1")
    c = 4.0 * c_op * c_P
    c_M = c + c_op * (c + c_P)
    rows = []
    for e in eps_grid:
        N = np.asarray(N_of(e), dtype=complex)
        P = np.asarray(P_of(e), dtype=complex)
        mu = mu_of(e)
        lam = np.linalg.eigvals(N)
        nu = np.linalg.eigvals(N + mu * P)
        gaps = [abs(a - b) for i, a in enumerate(lam) for b in lam[i + 1:]]
        sep = min(gaps) if gaps else float("inf")
        _, dists, ambiguous = spectral_match(lam, nu)
        bound = c_M * abs(e) ** beta1
        sep_req = c_N * abs(e) ** beta2
        ok = sep >= sep_req and float(np.max(dists)) <= bound
        rows.append(LocalizationRow(float(e), float(np.max(dists)), bound,
                                    float(sep), sep_req, ambiguous, bool(ok)))
    return {"c_M": float(c_M), "rows": rows, "ok": all(r.ok for r in rows)}
