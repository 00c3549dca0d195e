"""Numerical flows of series Hamiltonians.

A family of Taylor-Fourier series is compiled to flat numpy exponent arrays
so the canonical vector field, its Jacobian (for variational equations) and
the energy can be evaluated vectorized.  Real canonical coordinates are used
throughout: the complex transverse pair is mapped to the underlying Cartesian
pair by xi = (x - i y)/sqrt(2), eta = (y - i x)/sqrt(2), which is symplectic.

State layout: z = (q (n1), x (n2), p (n1), y (n2)), positions before momenta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import GradedHamiltonian


class FlowError(RuntimeError):
    pass


_SQ2 = np.sqrt(2.0)


def transverse_to_complex(x, y):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return (x - 1j * y) / _SQ2, (y - 1j * x) / _SQ2


def complex_to_transverse(xi, eta):
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    x = (xi + 1j * eta) / _SQ2
    y = (eta + 1j * xi) / _SQ2
    return x.real, y.real


def _stack(series_list):
    """Stack (series, prefactor) pairs into flat exponent/coefficient arrays."""
    C, L, K, M1, M2, OUT = [], [], [], [], [], []
    for out_idx, series, pref in series_list:
        for idx, c in series.terms.items():
            C.append(complex(c) * pref)
            L.append(idx.l)
            K.append(idx.k)
            M1.append(idx.m1)
            M2.append(idx.m2)
            OUT.append(out_idx)
    if not C:
        return None
    return (np.array(C, dtype=complex), np.array(L, dtype=float),
            np.array(K, dtype=float), np.array(M1, dtype=float),
            np.array(M2, dtype=float), np.array(OUT, dtype=np.intp))


def _eval_stack(stack, n_out, p, q, xi, eta):
    if stack is None:
        return np.zeros(n_out, dtype=complex)
    C, L, K, M1, M2, OUT = stack
    mono = C * np.exp(1j * (K @ q))
    if L.shape[1]:
        mono = mono * np.prod(np.power(p[None, :], L), axis=1)
    if M1.shape[1]:
        mono = mono * np.prod(np.power(xi[None, :], M1), axis=1)
        mono = mono * np.prod(np.power(eta[None, :], M2), axis=1)
    re = np.bincount(OUT, weights=mono.real, minlength=n_out)
    im = np.bincount(OUT, weights=mono.imag, minlength=n_out)
    return re + 1j * im


class CompiledHamiltonian:
    """Vectorized evaluator for H = sum_s eps^s f_s and its canonical field."""

    def __init__(self, source, eps: float, dims=None):
        if isinstance(source, GradedHamiltonian):
            pairs = source.series_with_orders()
            self.n1, self.n2 = source.n1, source.n2
        else:
            pairs = list(source)
            if dims is None:
                raise ValueError("dims required when compiling a raw series list")
            self.n1, self.n2 = dims
        self.eps = float(eps)
        n1, n2 = self.n1, self.n2
        self.n = n1 + n2
        self.dim = 2 * self.n

        weighted = [(s, self.eps ** order) for s, order in pairs if not s.is_zero()]
        self._value_stack = _stack([(0, s, w) for s, w in weighted])

        # complex-coordinate gradient: order (q (n1), xi (n2), p (n1), eta (n2))
        grad_entries = []
        for s, w in weighted:
            for j in range(n1):
                grad_entries.append((j, s.dq(j), w))
                grad_entries.append((n1 + n2 + j, s.dp(j), w))
            for j in range(n2):
                grad_entries.append((n1 + j, s.dxi(j), w))
                grad_entries.append((n1 + n2 + n1 + j, s.deta(j), w))
        self._grad_stack = _stack(grad_entries)

        self._hess_stack = None
        self._hess_pairs = None

        # embedding w = S u of real coordinates u = (q, x, p, y) into complex
        # coordinates w = (q, xi, p, eta)
        S = np.zeros((self.dim, self.dim), dtype=complex)
        for j in range(n1):
            S[j, j] = 1.0
            S[n1 + n2 + j, n1 + n2 + j] = 1.0
        for j in range(n2):
            S[n1 + j, n1 + j] = 1.0 / _SQ2
            S[n1 + j, n1 + n2 + n1 + j] = -1j / _SQ2
            S[n1 + n2 + n1 + j, n1 + j] = -1j / _SQ2
            S[n1 + n2 + n1 + j, n1 + n2 + n1 + j] = 1.0 / _SQ2
        self._S = S
        self._St = S.T.copy()

    # -- coordinate helpers ------------------------------------------------------

    def split(self, z):
        n1, n2 = self.n1, self.n2
        q = np.asarray(z[:n1], dtype=float)
        x = np.asarray(z[n1:n1 + n2], dtype=float)
        p = np.asarray(z[n1 + n2:2 * n1 + n2], dtype=float)
        y = np.asarray(z[2 * n1 + n2:], dtype=float)
        return q, x, p, y

    def complex_point(self, z):
        q, x, p, y = self.split(z)
        xi, eta = transverse_to_complex(x, y)
        return p, q, xi, eta

    # -- evaluation ----------------------------------------------------------------

    def value(self, z) -> float:
        p, q, xi, eta = self.complex_point(z)
        v = _eval_stack(self._value_stack, 1, p, q, xi, eta)[0]
        return v.real

    def value_complex(self, z) -> complex:
        p, q, xi, eta = self.complex_point(z)
        return _eval_stack(self._value_stack, 1, p, q, xi, eta)[0]

    def gradient(self, z):
        """Real gradient of H with respect to the real state."""
        p, q, xi, eta = self.complex_point(z)
        gw = _eval_stack(self._grad_stack, self.dim, p, q, xi, eta)
        return (self._St @ gw).real

    def rhs(self, t, z):
        g = self.gradient(z)
        n = self.n
        return np.concatenate((g[n:], -g[:n]))

    def compile_hessian(self, source):
        """Compile second derivatives (complex coordinates) for the variational
        equations; ``source`` is the same object passed to the constructor."""
        if isinstance(source, GradedHamiltonian):
            pairs = source.series_with_orders()
        else:
            pairs = list(source)
        n1, n2 = self.n1, self.n2
        weighted = [(s, self.eps ** order) for s, order in pairs if not s.is_zero()]

        def deriv(series, i):
            if i < n1:
                return series.dq(i)
            if i < n1 + n2:
                return series.dxi(i - n1)
            if i < 2 * n1 + n2:
                return series.dp(i - n1 - n2)
            return series.deta(i - 2 * n1 - n2)

        entries = []
        pair_list = []
        pos = 0
        for i in range(self.dim):
            for j in range(i, self.dim):
                for s, w in weighted:
                    dij = deriv(deriv(s, i), j)
                    if not dij.is_zero():
                        entries.append((pos, dij, w))
                pair_list.append((i, j))
                pos += 1
        self._hess_stack = _stack(entries)
        self._hess_pairs = pair_list

    def hessian_real(self, z):
        if self._hess_pairs is None:
            raise FlowError("call compile_hessian() before variational flows")
        p, q, xi, eta = self.complex_point(z)
        vals = _eval_stack(self._hess_stack, len(self._hess_pairs), p, q, xi, eta)
        Hw = np.zeros((self.dim, self.dim), dtype=complex)
        for (i, j), v in zip(self._hess_pairs, vals):
            Hw[i, j] = v
            if i != j:
                Hw[j, i] = v
        return (self._St @ Hw @ self._S).real

    def linear_field(self, z):
        """J * Hess H(z): the matrix of the linearized canonical equations."""
        H = self.hessian_real(z)
        n = self.n
        return np.vstack((H[n:], -H[:n]))


def flow(comp: CompiledHamiltonian, z0, t_final: float, tol: float = 1e-12,
         check_energy: bool = True):
    """Adaptive eighth-order propagation of the canonical equations.

    Local error per step is controlled at ``tol``; the energy drift over the
    whole integration is asserted to stay within ``100 * tol``.
    """
    z0 = np.asarray(z0, dtype=float)
    if not np.all(np.isfinite(z0)):
        raise FlowError("non-finite initial state")
    if t_final == 0.0:
        return z0.copy()
    sol = solve_ivp(comp.rhs, (0.0, t_final), z0, method="DOP853",
                    rtol=tol, atol=tol * 1e-3, dense_output=False)
    if not sol.success:
        raise FlowError(f"integration failed: {sol.message}")
    zT = sol.y[:, -1]
    if not np.all(np.isfinite(zT)):
        raise FlowError("non-finite state reached")
    if check_energy:
        e0, e1 = comp.value(z0), comp.value(zT)
        drift = abs(e1 - e0)
        if drift > 100 * tol * max(1.0, abs(e0)):
            raise FlowError(f"energy drift {drift:.3e} exceeds budget")
    return zT


def flow_with_monodromy(comp: CompiledHamiltonian, z0, t_final: float,
                        tol: float = 1e-12):
    """Propagate the state together with the fundamental matrix of the
    variational equations; returns (z(T), Phi(T))."""
    if comp._hess_pairs is None:
        raise FlowError("call compile_hessian() before variational flows")
    dim = comp.dim
    z0 = np.asarray(z0, dtype=float)
    y0 = np.concatenate((z0, np.eye(dim).ravel()))

    def rhs(t, y):
        z = y[:dim]
        Phi = y[dim:].reshape(dim, dim)
        dz = comp.rhs(t, z)
        dPhi = comp.linear_field(z) @ Phi
        return np.concatenate((dz, dPhi.ravel()))

    sol = solve_ivp(rhs, (0.0, t_final), y0, method="DOP853",
                    rtol=tol, atol=tol * 1e-3)
    if not sol.success:
        raise FlowError(f"variational integration failed: {sol.message}")
    yT = sol.y[:, -1]
    return yT[:dim], yT[dim:].reshape(dim, dim)


def to_block_order(M, n1, n2):
    """Permute a matrix from state order (q, x, p, y) to (q, p, x, y)."""
    perm = list(range(n1)) + list(range(n1 + n2, 2 * n1 + n2)) \
        + list(range(n1, n1 + n2)) + list(range(2 * n1 + n2, 2 * (n1 + n2)))
    P = np.asarray(perm)
    return M[np.ix_(P, P)]


def symplectic_defect(M, n1, n2) -> float:
    """|| M^T J M - J || for a matrix in state order (q, x, p, y)."""
    n = n1 + n2
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return float(np.linalg.norm(M.T @ J @ M - J))


def generator_point_map(gen, eps: float, dims, direction: int = 1,
                        tol: float = 1e-13):
    """Time-(+/-1) Hamiltonian flow of one stage generator as a point map.

    Stage-I generators (angle-only series plus the action translation) move
    points by an exact closed-form shift; the other stages are integrated.
    """
    n1, n2 = dims
    w = eps ** gen.r

    if gen.stage == "I":
        grads = [gen.chi.dq(j) for j in range(n1)]
        zeta = gen.zeta if gen.zeta is not None else [0.0] * n1

        def move(z):
            z = np.array(z, dtype=float)
            q = z[:n1]
            shift = np.array([
                float(np.real(g.evaluate([0.0] * n1, q, [0.0] * n2, [0.0] * n2)))
                for g in grads])
            # flow of X0(q) + <zeta, q>: q frozen, p -> p - t (grad X0 + zeta)
            z[n1 + n2:2 * n1 + n2] -= direction * w * (
                shift + np.array([float(zj) for zj in zeta]))
            return z

        return move

    comp = CompiledHamiltonian([(gen.chi, gen.r)], eps, dims)

    def move(z):
        if gen.chi.is_zero():
            return np.array(z, dtype=float)
        return flow(comp, z, float(direction), tol=tol, check_energy=False)

    return move


def transform_new_to_old(generators, eps: float, dims, tol: float = 1e-13):
    """Point map of the composed normalizing transformation: a point in the
    normal-form coordinates is carried to the original chart coordinates by
    applying the stage flows in reverse creation order."""
    maps = [generator_point_map(g, eps, dims, +1, tol) for g in reversed(generators)]

    def apply(z):
        z = np.array(z, dtype=float)
        for mv in maps:
            z = mv(z)
        return z

    return apply


def transform_old_to_new(generators, eps: float, dims, tol: float = 1e-13):
    maps = [generator_point_map(g, eps, dims, -1, tol) for g in generators]

    def apply(z):
        z = np.array(z, dtype=float)
        for mv in maps:
            z = mv(z)
        return z

    return apply
