"""Linearization blocks, slow spectra, classification, Floquet splitting, and
the spectral perturbation validators."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from resnf import build_seagull
from resnf.continuation import (
    approximate_orbit,
    newton_continue,
    upsilon_with_jacobian,
    pack_reduced,
)
from resnf.hamflow import CompiledHamiltonian
from resnf.normal_form import normalize
from resnf.stability import (
    StabilityError,
    approximate_reduced_return,
    assemble_L,
    classify_stability,
    decouple_fast,
    eigenvalue_localization_check,
    estimate_c_op,
    floquet_split,
    linearize_blocks,
    min_eig_bound_check,
    nonzero_eigen_gaps,
    omega_signs_ok,
    slow_spectrum,
    spectral_match,
    split_N,
)

PI = math.pi
EPS = 1e-3


# ------------------------------------------------------------------ blocks


def test_blocks_closed_form_at_pi(nf_r2_pi):
    """Diagonal of B is -2 eps I* cos q + (eps^2/gamma) cos^2 q per slow pair
    and -(eps^2/gamma) cos q3 in the degenerate direction."""
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    gamma = Istar = 1.0
    d1 = 2 * EPS * Istar + EPS ** 2 / gamma
    expect = np.diag([d1, EPS ** 2 / gamma, d1])
    assert np.max(np.abs(blocks.B - expect)) < 1e-12
    assert np.max(np.abs(blocks.D)) < 1e-12
    assert np.max(np.abs(blocks.B - blocks.B.T)) < 1e-12
    assert np.max(np.abs(blocks.C - blocks.C.T)) < 1e-12


def test_blocks_unperturbed_limit(nf_r2_pi, seagull):
    _, _, ham = seagull
    blocks = linearize_blocks(nf_r2_pi.H, 0.0, [PI] * 3)
    from resnf.normal_form import extract_action_hessian
    C0 = np.array(extract_action_hessian(ham.f(4, 0)), dtype=float)
    assert np.max(np.abs(blocks.B)) == 0.0
    assert np.max(np.abs(blocks.D)) == 0.0
    assert np.max(np.abs(blocks.G)) == 0.0
    assert np.max(np.abs(blocks.F)) == 0.0
    assert np.max(np.abs(blocks.C - C0)) < 1e-14
    assert np.max(np.abs(blocks.E - np.diag([1j]))) < 1e-14


def test_blocks_match_finite_difference_hessian(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    Z = nf_r2_pi.H.truncated(2)
    comp = CompiledHamiltonian(Z, EPS)
    comp.compile_hessian(Z)
    x_star = np.concatenate([[0.0, PI, PI, PI], [0.0], np.zeros(4), [0.0]])
    H = comp.hessian_real(x_star)
    # real-coordinate checks: (q, p) blocks at indices q=0..3, x=4, p=5..8, y=9
    assert np.max(np.abs(H[1:4, 1:4] - blocks.B)) < 1e-7
    assert np.max(np.abs(H[5:9, 5:9] - blocks.C)) < 1e-7
    assert np.max(np.abs(H[1:4, 5:9] - blocks.D)) < 1e-7
    # transverse 2x2 in Cartesian variables: i Omega xi eta -> diag(Omega)
    assert np.max(np.abs(H[np.ix_([4, 9], [4, 9])]
                         - np.eye(2) * blocks.E[0, 0].imag)) < 1e-4


def test_blocks_require_equilibrium(nf_r2_pi):
    with pytest.raises(StabilityError):
        linearize_blocks(nf_r2_pi.H, EPS, [PI, PI / 3, PI])


def test_block_leading_orders(nf_r2_pi, seagull):
    """B, D, G, F start at order eps; C - C0 and E - E0 at order eps (fit)."""
    _, _, ham = seagull
    from resnf.normal_form import extract_action_hessian
    C0 = np.array(extract_action_hessian(ham.f(4, 0)), dtype=float)
    eps_list = np.geomspace(1e-4, 1e-3, 4)
    normB, normdC = [], []
    for e in eps_list:
        b = linearize_blocks(nf_r2_pi.H, e, [PI] * 3)
        normB.append(np.linalg.norm(b.B))
        normdC.append(np.linalg.norm(b.C - C0))
    sB = np.polyfit(np.log(eps_list), np.log(normB), 1)[0]
    sC = np.polyfit(np.log(eps_list), np.log(normdC), 1)[0]
    assert sB >= 1 - 0.1
    assert sC >= 1 - 0.1


# ------------------------------------------------------------------ linear field


def test_assemble_L_shapes_and_transverse_spectrum(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    lin = assemble_L(blocks)
    assert lin.L11.shape == (8, 8)
    assert lin.L22.shape == (2, 2)
    ev = np.linalg.eigvals(lin.L22)
    assert np.max(np.abs(np.sort(ev.imag) - np.array([-1.0, 1.0]))) < 5 * EPS
    assert np.max(np.abs(ev.real)) < 1e-12


def test_exp_LT_is_symplectic(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    lin = assemble_L(blocks)
    T = 2 * PI / 3.0
    M = expm(lin.full * T)
    # full is in block order (q, p, x, y): conjugate into (pos, mom) split
    perm = list(range(4)) + [8] + list(range(4, 8)) + [9]
    P = np.asarray(perm)
    Mp = M[np.ix_(P, P)]
    J = np.zeros((10, 10))
    J[:5, 5:] = np.eye(5)
    J[5:, :5] = -np.eye(5)
    assert np.linalg.norm(Mp.T @ J @ Mp - J) < 1e-10


def test_unperturbed_field_is_shear_plus_rotation(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, 0.0, [PI] * 3)
    lin = assemble_L(blocks)
    # L11 nilpotent block: only the C0 shear survives
    assert np.max(np.abs(lin.L11[4:, :])) == 0.0
    ev = np.linalg.eigvals(lin.L22)
    assert np.max(np.abs(np.sort(ev.imag) - np.array([-1.0, 1.0]))) < 1e-14


def test_N_matrix_matches_return_jacobian(nf_r2_pi):
    """Flat-reduced exp(L T) - Id against the flowed return Jacobian:
    agreement at order eps^{r+1} (sweep slope >= r + 1 - 0.2)."""
    omega = 3.0
    T = 2 * PI / omega
    comp_cache = {}
    eps_list = np.geomspace(2e-4, 2e-3, 4)
    defects = []
    for e in eps_list:
        blocks = linearize_blocks(nf_r2_pi.H, e, [PI] * 3)
        lin = assemble_L(blocks)
        N = approximate_reduced_return(lin, T, 4)
        comp = CompiledHamiltonian(nf_r2_pi.H, e)
        comp.compile_hessian(nf_r2_pi.H)
        x_red = pack_reduced([PI] * 3, np.zeros(4), [0.0], [0.0])
        _, M, _ = upsilon_with_jacobian(comp, omega, x_red, tol=1e-13)
        defects.append(np.max(np.abs(M - N)))
    slope = np.polyfit(np.log(eps_list), np.log(defects), 1)[0]
    assert slope >= 3.0 - 0.2


def test_N_block_structure(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    lin = assemble_L(blocks)
    N = approximate_reduced_return(lin, 2 * PI / 3.0, 4)
    N11, N22, off = split_N(N, 4)
    assert off < 1e-10
    assert N11.shape == (7, 7) and N22.shape == (2, 2)
    # N22 eigenvalues are e^{+-i Omega T} - 1, order one
    ev = np.linalg.eigvals(N22)
    assert np.min(np.abs(ev)) > 0.5


def test_N11_eigenvalue_scaling_and_sv(nf_r2_pi):
    """Smallest |eigenvalue| decays like eps (alpha = 1); the smallest
    singular value decays faster (quadratically) and is reported, not the
    scaling witness."""
    T = 2 * PI / 3.0
    eps_list = np.geomspace(1e-4, 1e-3, 5)
    eig_min, sv_min = [], []
    for e in eps_list:
        blocks = linearize_blocks(nf_r2_pi.H, e, [PI] * 3)
        lin = assemble_L(blocks)
        N11, _, _ = split_N(approximate_reduced_return(lin, T, 4), 4)
        eig_min.append(np.min(np.abs(np.linalg.eigvals(N11))))
        sv_min.append(np.linalg.svd(N11, compute_uv=False)[-1])
    s_eig = np.polyfit(np.log(eps_list), np.log(eig_min), 1)[0]
    s_sv = np.polyfit(np.log(eps_list), np.log(sv_min), 1)[0]
    assert abs(s_eig - 1.0) < 0.1
    assert s_sv > s_eig  # the non-normal shear pushes singular values lower


# ------------------------------------------------------------------ decoupling


def test_decouple_fast_seagull(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    c11, C22, residual_D = decouple_fast(blocks)
    assert residual_D < 1e-12
    assert C22.shape == (3, 3)


def test_decouple_diagonal_C():
    from resnf.stability import LinearizationBlocks
    C = np.diag([2.0, 3.0, 4.0, 5.0])
    blocks = LinearizationBlocks(
        eps=0.0, B=np.zeros((3, 3)), D=np.zeros((3, 4)), C=C,
        E=np.diag([1j]), F=np.zeros((1, 1)), G=np.zeros((1, 1)))
    c11, C22, res = decouple_fast(blocks)
    assert c11 == 2.0
    assert np.array_equal(C22, np.diag([3.0, 4.0, 5.0]))


def test_schur_complement_dense_oracle():
    rng = np.random.default_rng(5)
    from resnf.stability import LinearizationBlocks
    A = rng.standard_normal((4, 4))
    C = A @ A.T + 4 * np.eye(4)
    blocks = LinearizationBlocks(
        eps=0.0, B=np.zeros((3, 3)), D=np.zeros((3, 4)), C=C,
        E=np.diag([1j]), F=np.zeros((1, 1)), G=np.zeros((1, 1)))
    c11, C22, _ = decouple_fast(blocks)
    expect = C[0, 0] - C[0:1, 1:] @ np.linalg.solve(C[1:, 1:], C[1:, 0:1])
    assert abs(c11 - expect[0, 0]) < 1e-12


def test_slow_spectrum_refuses_mixed_terms():
    from resnf.stability import LinearizationBlocks
    blocks = LinearizationBlocks(
        eps=1e-3, B=np.eye(3) * 1e-3, D=np.ones((3, 4)), C=np.eye(4),
        E=np.diag([1j]), F=np.zeros((1, 1)), G=np.zeros((1, 1)))
    with pytest.raises(StabilityError):
        slow_spectrum(blocks)


def test_slow_spectrum_zero_B(nf_r2_pi):
    from resnf.stability import LinearizationBlocks
    blocks = LinearizationBlocks(
        eps=0.0, B=np.zeros((3, 3)), D=np.zeros((3, 4)), C=np.eye(4),
        E=np.diag([1j]), F=np.zeros((1, 1)), G=np.zeros((1, 1)))
    lam = slow_spectrum(blocks)
    assert np.max(np.abs(lam)) == 0.0


def test_slow_spectrum_stable_configuration(nf_r2_pi):
    lam = slow_spectrum(linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3))
    assert np.max(np.abs(lam.real)) < 1e-12  # all centers


def test_slow_spectrum_leading_coefficients(nf_r2_pi):
    """Two pairs at 2 sqrt(2) sqrt(I* |gamma| eps) and one at sqrt(2) eps."""
    gamma = Istar = 1.0
    for e in (1e-4, 2.5e-4):
        lam = slow_spectrum(linearize_blocks(nf_r2_pi.H, e, [PI] * 3))
        mags = np.sort(np.abs(lam))[::2]
        mags = np.sort(mags)
        big = 2 * math.sqrt(2) * math.sqrt(Istar * gamma * e)
        small = math.sqrt(2) * e
        assert abs(mags[0] - small) / small < 0.05
        assert abs(mags[1] - big) / big < 0.05
        assert abs(mags[2] - big) / big < 0.05


# ------------------------------------------------------------------ classification


def build_report(gamma, qs, eps=EPS):
    _, _, ham = build_seagull(gamma, 1.0, s_max=3)
    res = normalize(ham, 2, qs, require_melnikov=False)
    blocks = linearize_blocks(res.H, eps, qs)
    return classify_stability(blocks, gamma)


def test_stable_configuration_positive_gamma():
    rep = build_report(1.0, [PI] * 3)
    assert rep.verdict == "stable"
    assert all(l.label == "center" for l in rep.labels)
    rep0 = build_report(1.0, [0.0] * 3)
    assert rep0.verdict == "unstable"
    assert all(l.label == "saddle" for l in rep0.labels)
    assert rep0.degenerate_index == 1


def test_stable_configuration_negative_gamma():
    rep = build_report(-1.0, [0.0, PI, 0.0])
    assert rep.verdict == "stable"


def test_degenerate_direction_sign_invariance():
    """The q3 label flips with cos q3 only, never with sign(gamma) or
    sign(eps); the nondegenerate labels flip with sign(gamma eps)."""
    by_direction = {}
    for gamma in (1.0, -1.0):
        for eps in (EPS, -EPS):
            rep = build_report(gamma, [PI] * 3, eps=eps)
            labels = {l.index: l.label for l in rep.labels}
            by_direction[(gamma, eps)] = labels
    # q3 (index 1) is pi here: always a center
    assert all(v[1] == "center" for v in by_direction.values())
    # nondegenerate directions swap with sign(gamma * eps)
    assert by_direction[(1.0, EPS)][0] == "center"
    assert by_direction[(1.0, -EPS)][0] == "saddle"
    assert by_direction[(-1.0, EPS)][0] == "saddle"
    assert by_direction[(-1.0, -EPS)][0] == "center"
    rep_q3_zero = build_report(1.0, [PI, 0.0, PI])
    labels = {l.index: l.label for l in rep_q3_zero.labels}
    assert labels[1] == "saddle"  # q3 = 0 is a saddle regardless of signs
    rep_q3_zero_neg = build_report(-1.0, [PI, 0.0, PI])
    labels_neg = {l.index: l.label for l in rep_q3_zero_neg.labels}
    assert labels_neg[1] == "saddle"


def test_label_invariance_under_eps_scaling():
    for scale in (0.3, 1.0, 2.0):
        rep = build_report(1.0, [PI] * 3, eps=EPS * scale)
        assert [l.label for l in rep.labels] == ["center"] * 3


def test_transverse_definiteness_and_omega_signs(nf_r2_pi):
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    rep = classify_stability(blocks, 1.0)
    assert rep.transverse_definite
    assert omega_signs_ok([1.0])
    assert omega_signs_ok([-1.0, -2.0])
    assert not omega_signs_ok([1.0, -1.0])


# ------------------------------------------------------------------ Floquet split


def continued_orbit(res, eps):
    comp = CompiledHamiltonian(res.H, eps)
    comp.compile_hessian(res.H)
    ap = approximate_orbit(res, eps, comp=comp, tol=1e-13)
    return newton_continue(res.H, ap, comp=comp)


def test_floquet_split_all_on_circle(nf_r2_pi):
    sol = continued_orbit(nf_r2_pi, EPS)
    blocks = linearize_blocks(nf_r2_pi.H, EPS, [PI] * 3)
    lin = assemble_L(blocks)
    rep = floquet_split(sol.monodromy, lin, 2 * PI / 3.0)
    assert rep.unit_circle_dist.max() < 1e-4
    assert len(rep.sigma11) == 8 and len(rep.sigma22) == 2


def test_floquet_split_unperturbed(nf_r2_pi):
    comp = CompiledHamiltonian(nf_r2_pi.H, 0.0)
    comp.compile_hessian(nf_r2_pi.H)
    from resnf.hamflow import flow_with_monodromy
    from resnf.continuation import full_state
    z0 = full_state(pack_reduced([PI] * 3, np.zeros(4), [0.0], [0.0]), 4, 1)
    _, Phi = flow_with_monodromy(comp, z0, 2 * PI / 3.0, tol=1e-12)
    blocks = linearize_blocks(nf_r2_pi.H, 0.0, [PI] * 3)
    lin = assemble_L(blocks)
    rep = floquet_split(Phi, lin, 2 * PI / 3.0)
    assert np.allclose(rep.sigma11, 1.0, atol=1e-10)
    assert np.allclose(np.sort(rep.sigma22.imag),
                       np.sort(np.array([np.exp(2j * PI / 3), np.exp(-2j * PI / 3)]).imag),
                       atol=1e-10)


def test_multiplier_reciprocity(nf_r2_zero):
    sol = continued_orbit(nf_r2_zero, EPS)
    mult = np.linalg.eigvals(sol.monodromy)
    for mu in mult:
        assert np.min(np.abs(mult - 1.0 / np.conj(mu))) < 1e-6
        assert np.min(np.abs(mult - np.conj(mu))) < 1e-6


def test_gap_exponent(nf_r2_pi):
    eps_list = np.geomspace(1e-4, 1e-3, 5)
    gaps = []
    for e in eps_list:
        blocks = linearize_blocks(nf_r2_pi.H, e, [PI] * 3)
        lin = assemble_L(blocks)
        _, gap = nonzero_eigen_gaps(lin.L11)
        gaps.append(gap)
    slope = np.polyfit(np.log(eps_list), np.log(gaps), 1)[0]
    assert abs(slope - 1.5) < 0.1


def test_true_orbit_pattern_matches_approximate(seagull):
    _, _, ham = seagull
    for qs, expected_off in (([PI] * 3, 0), ([0.0] * 3, 6)):
        res = normalize(ham, 2, qs)
        sol = continued_orbit(res, EPS)
        blocks = linearize_blocks(res.H, EPS, qs)
        lin = assemble_L(blocks)
        T = 2 * PI / 3.0
        approx = np.concatenate([np.linalg.eigvals(expm(lin.L11 * T)),
                                 np.linalg.eigvals(expm(lin.L22 * T))])
        true = np.linalg.eigvals(sol.monodromy)
        n_true = int(np.sum(np.abs(np.abs(true) - 1) > 1e-4))
        n_approx = int(np.sum(np.abs(np.abs(approx) - 1) > 1e-4))
        assert n_true == n_approx == expected_off


# ------------------------------------------------------------------ spectral validators


def test_c_op_estimate_sane():
    rng = np.random.default_rng(11)
    c = estimate_c_op(5, rng, n_samples=100)
    assert c >= 1.0 and np.isfinite(c)


def test_min_eig_bound_trivial_perturbation():
    rng = np.random.default_rng(12)
    N0 = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    rep = min_eig_bound_check(
        lambda e: e * N0, lambda e: np.zeros((4, 4)), lambda e: 0.0,
        alpha=1.0, eps_grid=np.geomspace(1e-3, 1e-1, 5))
    assert rep["ok"]
    for row in rep["rows"]:
        direct = np.min(np.abs(np.linalg.eigvals(row.eps * N0)))
        assert abs(row.min_eig - direct) < 1e-12


def test_min_eig_bound_randomized_families():
    rng = np.random.default_rng(13)
    eps_grid = np.geomspace(1e-4, 1e-2, 6)
    for _ in range(30):
        N0 = rng.standard_normal((5, 5))
        while abs(np.linalg.det(N0)) < 1e-2:
            N0 = rng.standard_normal((5, 5))
        P0 = rng.standard_normal((5, 5))
        rep = min_eig_bound_check(
            lambda e: e * N0, lambda e: P0, lambda e: 0.05 * e ** 2,
            alpha=1.0, eps_grid=eps_grid)
        assert rep["ok"]


def test_min_eig_singular_reports_premise_failure():
    N0 = np.diag([1.0, 1.0, 0.0])

    def N_of(e):
        return e * N0 + 1e-300 * np.eye(3)

    with pytest.raises(np.linalg.LinAlgError):
        min_eig_bound_check(lambda e: e * np.diag([1.0, 1.0, 0.0]),
                            lambda e: np.eye(3), lambda e: e ** 2,
                            alpha=1.0, eps_grid=[1e-2])


def test_localization_zero_perturbation():
    rng = np.random.default_rng(14)
    d = np.array([1.0, 2.0, 3.0, 4.0])
    rep = eigenvalue_localization_check(
        lambda e: np.diag(d * e), lambda e: rng.standard_normal((4, 4)),
        lambda e: 0.0, beta1=2.0, beta2=1.0, c_P=1.0, c_N=0.9,
        eps_grid=np.geomspace(1e-3, 1e-1, 4), c_op=1.5)
    assert rep["ok"]
    assert all(r.max_dist == 0.0 for r in rep["rows"])


def test_localization_randomized_families_and_slope():
    rng = np.random.default_rng(15)
    c_op = estimate_c_op(5, rng, n_samples=50)
    eps_grid = np.geomspace(1e-4, 1e-2, 6)
    for _ in range(30):
        d = rng.permutation(np.arange(1.0, 6.0))
        Q = np.linalg.qr(rng.standard_normal((5, 5)))[0]
        P0 = rng.standard_normal((5, 5))
        P0 /= np.linalg.norm(P0, 2)
        rep = eigenvalue_localization_check(
            lambda e: Q @ np.diag(d * e) @ Q.T, lambda e: P0, lambda e: e ** 2,
            beta1=2.0, beta2=1.0, c_P=1.0, c_N=0.9, eps_grid=eps_grid, c_op=c_op)
        assert rep["ok"]
        dists = [r.max_dist for r in rep["rows"]]
        slope = np.polyfit(np.log(eps_grid), np.log(dists), 1)[0]
        assert slope >= 2.0 - 0.1


def test_seagull_multiplier_localization_slope(seagull):
    """Distance between the true slow multipliers and the approximate ones
    decays at least like eps^{r+1-alpha} = eps^2."""
    _, _, ham = seagull
    res = normalize(ham, 2, [0.0] * 3)
    T = 2 * PI / 3.0
    eps_list = np.geomspace(1e-4, 1e-3, 4)
    dists = []
    for e in eps_list:
        sol = continued_orbit(res, e)
        blocks = linearize_blocks(res.H, e, [0.0] * 3)
        lin = assemble_L(blocks)
        rep = floquet_split(sol.monodromy, lin, T)
        ref = np.linalg.eigvals(expm(lin.L11 * T))
        _, dd, _ = spectral_match(ref, rep.sigma11)
        dists.append(np.max(dd))
    slope = np.polyfit(np.log(eps_list), np.log(dists), 1)[0]
    assert slope >= 1.8
