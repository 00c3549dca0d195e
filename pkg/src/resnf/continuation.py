"""Approximate periodic orbits from the normal form and their Newton
continuation through the period-return map.

The return displacement drops the momentum conjugate to the fast angle
(energy conservation makes it dependent) and freezes the initial fast phase,
leaving a square system of dimension 2n - 1 whose Jacobian is the flat
reduction of (monodromy - identity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamflow import CompiledHamiltonian, flow, flow_with_monodromy, to_block_order
from .model import GradedHamiltonian
from .normal_form import NormalFormResult, normalize
from .series import TaylorFourierSeries


class ContinuationError(RuntimeError):
    pass


# -- state packing -----------------------------------------------------------------


def pack_reduced(q_slow, p, x, y):
    return np.concatenate((np.asarray(q_slow, float), np.asarray(p, float),
                           np.asarray(x, float), np.asarray(y, float)))


def full_state(x_reduced, n1, n2, q1_0=0.0):
    q_slow = x_reduced[:n1 - 1]
    p = x_reduced[n1 - 1:2 * n1 - 1]
    x = x_reduced[2 * n1 - 1:2 * n1 - 1 + n2]
    y = x_reduced[2 * n1 - 1 + n2:]
    return np.concatenate(([q1_0], q_slow, x, p, y))


def reduce_state(z, n1, n2):
    q = z[:n1]
    x = z[n1:n1 + n2]
    p = z[n1 + n2:2 * n1 + n2]
    y = z[2 * n1 + n2:]
    return pack_reduced(q[1:], p, x, y)


def reduce_matrix(M, n1):
    """Flat reduction: drop the first column (fast angle) and the row of the
    conjugate momentum from a square matrix in block order (q, p, transverse)."""
    M = np.asarray(M)
    if M.shape[0] < 2 or M.shape[0] != M.shape[1]:
        raise ValueError("flat reduction needs a square matrix of size >= 2")
    keep_rows = [i for i in range(M.shape[0]) if i != n1]
    keep_cols = [j for j in range(M.shape[1]) if j != 0]
    return M[np.ix_(keep_rows, keep_cols)]


# -- the return map ----------------------------------------------------------------


def upsilon(comp: CompiledHamiltonian, omega: float, x_reduced,
            q1_0: float = 0.0, tol: float = 1e-12):
    """Period-return displacement with the fast-momentum row dropped."""
    n1, n2 = comp.n1, comp.n2
    T = 2 * math.pi / omega
    z0 = full_state(np.asarray(x_reduced, float), n1, n2, q1_0)
    zT = flow(comp, z0, T, tol=tol)
    dq = zT[:n1] - z0[:n1]
    dq[0] -= omega * T
    dx = zT[n1:n1 + n2] - z0[n1:n1 + n2]
    dp = zT[n1 + n2:2 * n1 + n2] - z0[n1 + n2:2 * n1 + n2]
    dy = zT[2 * n1 + n2:] - z0[2 * n1 + n2:]
    return np.concatenate((dq, dp[1:], dx, dy))


def upsilon_with_jacobian(comp: CompiledHamiltonian, omega: float, x_reduced,
                          q1_0: float = 0.0, tol: float = 1e-12):
    """Return (Upsilon, M) with M the flat reduction of (Phi(T) - Id)."""
    n1, n2 = comp.n1, comp.n2
    T = 2 * math.pi / omega
    z0 = full_state(np.asarray(x_reduced, float), n1, n2, q1_0)
    zT, Phi = flow_with_monodromy(comp, z0, T, tol=tol)
    dq = zT[:n1] - z0[:n1]
    dq[0] -= omega * T
    dx = zT[n1:n1 + n2] - z0[n1:n1 + n2]
    dp = zT[n1 + n2:2 * n1 + n2] - z0[n1 + n2:2 * n1 + n2]
    dy = zT[2 * n1 + n2:] - z0[2 * n1 + n2:]
    ups = np.concatenate((dq, dp[1:], dx, dy))
    Phi_block = to_block_order(Phi, n1, n2)
    M = reduce_matrix(Phi_block - np.eye(2 * (n1 + n2)), n1)
    return ups, M, Phi


def monodromy(comp: CompiledHamiltonian, z0, T: float, tol: float = 1e-12):
    """Fundamental matrix at time T in block order (q, p, transverse)."""
    _, Phi = flow_with_monodromy(comp, np.asarray(z0, float), T, tol=tol)
    return to_block_order(Phi, comp.n1, comp.n2)


# -- critical points of the averaged perturbation -------------------------------------


@dataclass
class CriticalPointProblem:
    """Gradient field of the fast-angle-averaged perturbation on the slow torus.

    ``orders`` maps the eps power s to the grade-0 family member; the field is
    F(q; eps) = sum_s eps^s grad_q f_0^{(r,s)}(q).
    """

    n1: int
    n2: int
    orders: dict                     # s -> TaylorFourierSeries (grade 0)
    eps: float

    def __post_init__(self):
        self._grads = {}
        self._hesss = {}
        for s, series in self.orders.items():
            self._grads[s] = [series.dq(j) for j in range(1, self.n1)]
            self._hesss[s] = [[self._grads[s][a].dq(b + 1) for b in range(self.n1 - 1)]
                              for a in range(self.n1 - 1)]
        self.s_min = min(self.orders) if self.orders else 1

    def _angles(self, q_slow):
        return np.concatenate(([0.0], np.asarray(q_slow, float)))

    def field(self, q_slow, normalized: bool = False):
        qhat = self._angles(q_slow)
        zp = [0.0] * self.n1
        zt = [0.0] * self.n2
        out = np.zeros(self.n1 - 1)
        for s, grads in self._grads.items():
            w = self.eps ** (s - self.s_min) if normalized else self.eps ** s
            for a, g in enumerate(grads):
                out[a] += w * g.evaluate(zp, qhat, zt, zt).real
        return out

    def jacobian(self, q_slow, normalized: bool = False):
        qhat = self._angles(q_slow)
        zp = [0.0] * self.n1
        zt = [0.0] * self.n2
        out = np.zeros((self.n1 - 1, self.n1 - 1))
        for s, rows in self._hesss.items():
            w = self.eps ** (s - self.s_min) if normalized else self.eps ** s
            for a in range(self.n1 - 1):
                for b in range(self.n1 - 1):
                    out[a, b] += w * rows[a][b].evaluate(zp, qhat, zt, zt).real
        return out

    def order_field(self, s):
        """Gradient of the single order-s member (coefficient field)."""
        grads = self._grads.get(s)

        def F(q_slow):
            if grads is None:
                return np.zeros(self.n1 - 1)
            qhat = self._angles(q_slow)
            zp = [0.0] * self.n1
            zt = [0.0] * self.n2
            return np.array([g.evaluate(zp, qhat, zt, zt).real for g in grads])

        return F


def critical_point_problem(result: NormalFormResult, eps: float) -> CriticalPointProblem:
    ham = result.H
    orders = {}
    for s in range(1, ham.order + 1):
        f0 = ham.f(0, s)
        if not f0.is_zero():
            orders[s] = f0
    return CriticalPointProblem(ham.n1, ham.n2, orders, eps)


@dataclass
class CriticalPoint:
    q: np.ndarray
    residual: float
    jacobian: np.ndarray
    smallest_sv: float
    degenerate: bool
    null_direction: np.ndarray | None = None


def solve_critical_points(problem: CriticalPointProblem, seeds=None,
                          rng=None, n_random: int = 0,
                          newton_tol: float = 1e-12, max_iter: int = 50,
                          merge_tol: float = 1e-6,
                          degeneracy_factor: float = 1e-2) -> list:
    """Newton-refine the seed grid {0, pi}^(n1-1) plus optional random seeds;
    duplicates are merged modulo 2 pi and every root is classified degenerate
    or nondegenerate by the smallest singular value of the eps-normalized
    Jacobian against ``degeneracy_factor * eps``."""
    d = problem.n1 - 1
    if seeds is None:
        grid = np.array(np.meshgrid(*([[0.0, np.pi]] * d), indexing="ij"))
        seeds = grid.reshape(d, -1).T
    seeds = [np.asarray(s, float) for s in seeds]
    if n_random and rng is not None:
        seeds += [rng.uniform(0, 2 * np.pi, d) for _ in range(n_random)]

    roots = []
    for seed in seeds:
        q = seed.copy()
        ok = False
        for _ in range(max_iter):
            F = problem.field(q, normalized=True)
            if np.linalg.norm(F) < newton_tol:
                ok = True
                break
            J = problem.jacobian(q, normalized=True)
            try:
                step = np.linalg.lstsq(J, -F, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 1.0:
                step *= 1.0 / np.linalg.norm(step)
            q = q + step
            if np.linalg.norm(step) < 1e-14:
                ok = np.linalg.norm(problem.field(q, normalized=True)) < newton_tol
                break
        if not ok:
            continue
        q = np.mod(q, 2 * np.pi)
        if any(_torus_distance(q, r.q) < merge_tol for r in roots):
            continue
        J = problem.jacobian(q, normalized=True)
        svals = np.linalg.svd(J, compute_uv=False)
        smallest = float(svals[-1])
        degenerate = smallest < degeneracy_factor * problem.eps
        null_dir = None
        if degenerate:
            _, _, vt = np.linalg.svd(J)
            null_dir = vt[-1]
        roots.append(CriticalPoint(
            q=q, residual=float(np.linalg.norm(problem.field(q, normalized=True))),
            jacobian=J, smallest_sv=smallest, degenerate=degenerate,
            null_direction=null_dir))
    roots.sort(key=lambda r: tuple(np.round(r.q, 8)))
    return roots


def _torus_distance(a, b):
    d = np.abs(np.mod(a - b + np.pi, 2 * np.pi) - np.pi)
    return float(np.max(d))


@dataclass
class OrbitFamily:
    """One-parameter circle of critical points: the free slow angle and the
    frozen values of the others."""

    free_axis: int
    fixed: dict

    def parameterize(self, theta):
        d = 1 + len(self.fixed)
        q = np.zeros(d)
        for j, v in self.fixed.items():
            q[j] = v
        q[self.free_axis] = theta
        return q

    def tangent(self):
        d = 1 + len(self.fixed)
        t = np.zeros(d)
        t[self.free_axis] = 1.0
        return t


def identify_families(problem: CriticalPointProblem, roots,
                      tol: float = 1e-9, n_check: int = 32) -> list:
    """Group degenerate roots whose null direction is a coordinate axis into
    circles along which the (normalized) field vanishes."""
    families = []
    seen = set()
    for root in roots:
        if not root.degenerate or root.null_direction is None:
            continue
        axis = int(np.argmax(np.abs(root.null_direction)))
        if abs(abs(root.null_direction[axis]) - 1.0) > 1e-6:
            continue
        fixed = {j: float(np.mod(root.q[j], 2 * np.pi))
                 for j in range(len(root.q)) if j != axis}
        key = (axis, tuple((j, round(fixed[j], 8)) for j in sorted(fixed)))
        if key in seen:
            continue
        fam = OrbitFamily(axis, fixed)
        worst = max(
            np.linalg.norm(problem.field(fam.parameterize(th), normalized=True))
            for th in np.linspace(0, 2 * np.pi, n_check, endpoint=False))
        if worst <= tol:
            seen.add(key)
            families.append(fam)
    return families


def family_breakdown_test(F1, family: OrbitFamily, n_grid: int = 100):
    """Projection of the next-order field on the family tangent; its simple
    zeros select the surviving configurations."""
    thetas = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    tangent = family.tangent()
    values = np.array([float(F1(family.parameterize(th)) @ tangent) for th in thetas])
    zeros = []
    for i in range(n_grid):
        a, b = values[i], values[(i + 1) % n_grid]
        # a zero sitting on a grid node is owned by that node only
        if a == 0.0 or (b != 0.0 and (a < 0) != (b < 0)):
            th = thetas[i] if a == 0.0 else _bisect_zero(
                lambda t: float(F1(family.parameterize(t)) @ tangent),
                thetas[i], thetas[i] + 2 * np.pi / n_grid)
            slope = (b - a) / (2 * np.pi / n_grid)
            zeros.append((float(np.mod(th, 2 * np.pi)), abs(slope) > 1e-12))
    return thetas, values, zeros


def _bisect_zero(f, a, b, iters=80):
    fa = f(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fa < 0) != (fm < 0):
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


# -- self-consistent parameter loop -----------------------------------------------


def self_consistent_configuration(ham0: GradedHamiltonian, r_max: int, q_init,
                                  eps: float, tol: float = 1e-10,
                                  max_iter: int = 20,
                                  require_melnikov: bool = True):
    """Fixed point of (normalize at q* -> nearest critical point -> new q*).

    In/out-of-phase configurations are exact fixed points, so the loop
    typically converges in one pass.
    """
    q = np.asarray(q_init, float)
    result = None
    for _ in range(max_iter):
        result = normalize(ham0, r_max, q, require_melnikov=require_melnikov)
        problem = critical_point_problem(result, eps)
        roots = solve_critical_points(problem, seeds=[q])
        if not roots:
            raise ContinuationError(f"no critical point near {q}")
        q_new = min(roots, key=lambda r: _torus_distance(r.q, np.mod(q, 2 * np.pi))).q
        if _torus_distance(q_new, np.mod(q, 2 * np.pi)) <= tol:
            return result, q_new
        q = q_new
    raise ContinuationError("parameter self-consistency loop did not converge")


# -- approximate orbits and Newton continuation -------------------------------------


@dataclass
class ApproximateOrbit:
    qstar: np.ndarray
    x_reduced: np.ndarray
    T: float
    eps: float
    residual: float


def approximate_orbit(result: NormalFormResult, eps: float,
                      comp: CompiledHamiltonian | None = None,
                      tol: float = 1e-12) -> ApproximateOrbit:
    ham = result.H
    n1, n2 = ham.n1, ham.n2
    if comp is None:
        comp = CompiledHamiltonian(ham, eps)
    x_red = pack_reduced(result.qstar, np.zeros(n1), np.zeros(n2), np.zeros(n2))
    resid = float(np.linalg.norm(upsilon(comp, float(ham.omega), x_red, tol=tol)))
    return ApproximateOrbit(
        qstar=np.asarray(result.qstar, float), x_reduced=x_red,
        T=2 * math.pi / float(ham.omega), eps=eps, residual=resid)


@dataclass
class PeriodicOrbitSolution:
    x_reduced: np.ndarray
    converged: bool
    iterations: int
    residuals: list
    step_norms: list
    distance: float
    monodromy: np.ndarray
    reduced_jacobian: np.ndarray
    smallest_sv: float
    dropped_directions: int = 0


def newton_continue(ham: GradedHamiltonian, approx: ApproximateOrbit,
                    tol: float = 1e-11, max_iter: int = 8,
                    flow_tol: float = 1e-13,
                    sv_floor_factor: float = 1e-3,
                    trust_radius: float = 0.1,
                    comp: CompiledHamiltonian | None = None) -> PeriodicOrbitSolution:
    """Newton iteration on the return map starting from the relative
    equilibrium of the truncated normal form.

    The Jacobian is the flat-reduced (monodromy - identity), recomputed each
    iteration.  Its eigenvalues must stay above ``sv_floor_factor * eps`` in
    modulus; singular directions below that floor (they resolve the datum more
    finely than the return map can measure) are excluded from the step.
    """
    omega = float(ham.omega)
    if comp is None:
        comp = CompiledHamiltonian(ham, approx.eps)
        comp.compile_hessian(ham)
    floor = sv_floor_factor * abs(approx.eps)
    x = approx.x_reduced.copy()
    residuals = []
    steps = []
    Phi = None
    M = None
    converged = False
    dropped = 0
    for it in range(max_iter + 1):
        ups, M, Phi = upsilon_with_jacobian(comp, omega, x, tol=flow_tol)
        rnorm = float(np.linalg.norm(ups))
        residuals.append(rnorm)
        if rnorm <= tol:
            converged = True
            break
        if it == max_iter:
            break
        U, svals, Vt = np.linalg.svd(M)
        keep = svals >= floor
        dropped = int(np.sum(~keep))
        if not np.any(keep):
            raise ContinuationError("all return-map directions below the floor")
        if dropped:
            unsolvable = float(np.linalg.norm(U[:, ~keep].T @ ups))
            if unsolvable > max(tol, 10 * flow_tol):
                raise ContinuationError(
                    f"return-map Jacobian singular along the residual "
                    f"(component {unsolvable:.3e} below the sv floor)")
        step = -Vt[keep].T @ ((U[:, keep].T @ ups) / svals[keep])
        snorm = float(np.linalg.norm(step))
        if snorm > trust_radius:
            raise ContinuationError(
                f"Newton step {snorm:.3e} left the trust neighbourhood")
        steps.append(snorm)
        x = x + step
    svals = np.linalg.svd(M, compute_uv=False)
    return PeriodicOrbitSolution(
        x_reduced=x, converged=converged, iterations=len(steps),
        residuals=residuals, step_norms=steps,
        distance=float(np.linalg.norm(x - approx.x_reduced)),
        monodromy=Phi, reduced_jacobian=M, smallest_sv=float(svals[-1]),
        dropped_directions=dropped)
