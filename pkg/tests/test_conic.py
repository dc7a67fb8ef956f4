import numpy as np
import pytest

from coprimedoa.conic import (
    SdpProblem,
    SdpSolverError,
    SocpProblem,
    solve_dual_sdp,
    solve_l1_socp,
)
from coprimedoa.superres import atom_matrix, dual_polynomial
from oracles import grid_primal

FC = 17
N = 2 * FC + 1
LAGS = np.arange(-FC, FC + 1)
W = np.zeros(N, dtype=complex)
W[FC] = 1.0


def spikes_to_r(taus, amps):
    return (np.asarray(amps)[None, :]
            * np.exp(-2j * np.pi * np.outer(LAGS, taus))).sum(axis=1)


def random_instance(rng, K, noise=0.02, use_w=True, min_sep=2.0 / FC):
    while True:
        taus = np.sort(rng.uniform(0, 1, K))
        if K == 1:
            break
        gaps = np.diff(np.concatenate([taus, [taus[0] + 1.0]]))
        if gaps.min() > min_sep:
            break
    amps = rng.uniform(0.3, 2.0, K)
    r = spikes_to_r(taus, amps)
    if use_w:
        r = r + rng.uniform(0.2, 1.5) * W
    z = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    r = r + noise * np.linalg.norm(r) / np.sqrt(2 * N) * z
    return taus, amps, r


def test_zero_measurement_yields_zero():
    p = SdpProblem(r=np.zeros(N, dtype=complex), w=W, epsilon=1.0, f_c=FC)
    cert = solve_dual_sdp(p)
    assert cert.converged
    assert abs(cert.value) < 1e-7
    assert max(cert.residuals.values()) < 1e-9


def test_single_spike_strong_duality():
    r = spikes_to_r([0.25], [2.0])
    cert = solve_dual_sdp(SdpProblem(r=r, w=None, epsilon=0.0, f_c=FC))
    assert cert.converged
    assert cert.value == pytest.approx(2.0, abs=1e-6)
    assert max(cert.residuals.values()) < 1e-9


def test_two_spike_value_matches_grid_oracle():
    rng = np.random.default_rng(7)
    taus, amps, r = random_instance(rng, 2, use_w=False)
    eps = 0.15 * np.linalg.norm(r)
    cert = solve_dual_sdp(SdpProblem(r=r, w=None, epsilon=eps, f_c=FC),
                          tol=1e-8)
    orc = grid_primal(r, None, eps, FC)
    rel = (orc["value"] - cert.value) / orc["value"]
    assert -1e-9 <= rel <= 1e-3


def test_weak_duality_against_feasible_primal():
    # Any feasible spike train's mass bounds the dual value from above.
    rng = np.random.default_rng(11)
    taus, amps, r = random_instance(rng, 3, noise=0.0, use_w=True)
    sigma2_true = np.real(r[FC]) - amps.sum()
    eps = 0.5
    cert = solve_dual_sdp(SdpProblem(r=r, w=W, epsilon=eps, f_c=FC))
    assert cert.value <= amps.sum() + 1e-8


def test_certificate_polynomial_bounded_on_grid():
    rng = np.random.default_rng(3)
    _, _, r = random_instance(rng, 3)
    cert = solve_dual_sdp(SdpProblem(r=r, w=W, epsilon=1.0, f_c=FC))
    grid = np.arange(100_000) / 100_000
    assert np.abs(dual_polynomial(cert.u, grid)).max() <= 1.0 + 1e-6


def test_positive_homogeneity():
    rng = np.random.default_rng(5)
    _, _, r = random_instance(rng, 2)
    eps = 0.8
    c = 3.7
    cert1 = solve_dual_sdp(SdpProblem(r=r, w=W, epsilon=eps, f_c=FC),
                           tol=1e-9)
    cert2 = solve_dual_sdp(SdpProblem(r=c * r, w=W, epsilon=c * eps,
                                      f_c=FC), tol=1e-9)
    assert cert2.value == pytest.approx(c * cert1.value, rel=1e-6)


def test_solver_determinism():
    rng = np.random.default_rng(9)
    _, _, r = random_instance(rng, 2)
    p = SdpProblem(r=r, w=W, epsilon=0.7, f_c=FC)
    c1 = solve_dual_sdp(p)
    c2 = solve_dual_sdp(p)
    assert np.array_equal(c1.u, c2.u)
    assert np.array_equal(c1.Q, c2.Q)
    assert c1.value == c2.value


def test_nonconvergence_raises_with_payload():
    rng = np.random.default_rng(13)
    _, _, r = random_instance(rng, 2)
    with pytest.raises(SdpSolverError) as exc:
        solve_dual_sdp(SdpProblem(r=r, w=W, epsilon=0.7, f_c=FC),
                       max_iter=3)
    cert = exc.value.certificate
    assert cert is not None and not cert.converged
    assert set(cert.residuals) == {"psd_violation", "trace_violation",
                                   "w_violation"}


def test_certificate_json_roundtrip():
    from coprimedoa.conic import DualCertificate
    r = spikes_to_r([0.3], [1.0])
    cert = solve_dual_sdp(SdpProblem(r=r, w=W, epsilon=0.3, f_c=FC))
    back = DualCertificate.from_json(cert.to_json())
    assert np.allclose(back.u, cert.u)
    assert np.allclose(back.Q, cert.Q)
    assert back.value == cert.value


# ---------------------------------------------------------------------
# l1 refinement solver
# ---------------------------------------------------------------------

def test_l1_exact_single_spike_equality():
    tau, amp = 0.31, 1.7
    F = atom_matrix(FC, [tau])
    r = amp * F[:, 0]
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=W, epsilon_d=0.0))
    assert sol.status == "optimal"
    assert sol.s0[0] == pytest.approx(amp, abs=1e-9)
    assert sol.sigma2 == pytest.approx(0.0, abs=1e-9)


def test_l1_pure_noise_recovers_sigma2():
    F = atom_matrix(FC, [0.2, 0.7])
    r = 1.3 * W
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=W, epsilon_d=0.0))
    assert sol.status == "optimal"
    assert np.allclose(sol.s0, 0.0, atol=1e-9)
    assert sol.sigma2 == pytest.approx(1.3, abs=1e-9)


def test_l1_spurious_candidates_get_zero():
    taus = [0.15, 0.45, 0.8]
    amps = [1.0, 2.0, 0.7]
    cand = taus + [0.3, 0.62]      # two spurious extras
    F = atom_matrix(FC, cand)
    r = spikes_to_r(taus, amps)
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=W, epsilon_d=0.0))
    assert sol.status == "optimal"
    assert np.allclose(sol.s0[:3], amps, atol=1e-8)
    assert np.all(sol.s0[3:] < 1e-8)


def test_l1_infeasible_reports_min_residual():
    F = atom_matrix(FC, [0.2])
    rng = np.random.default_rng(1)
    r = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=None,
                                    epsilon_d=1e-6))
    assert sol.status == "infeasible"
    assert sol.residual > 1e-3


def test_l1_socp_ball_feasibility_and_shrinkage():
    taus = [0.2, 0.6]
    amps = [1.5, 1.0]
    F = atom_matrix(FC, taus)
    r = spikes_to_r(taus, amps) + 0.8 * W
    eps_d = 1.0
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=W, epsilon_d=eps_d))
    assert sol.status == "optimal"
    assert sol.residual <= eps_d * (1 + 1e-7)
    # l1 regularization shrinks relative to the exact amplitudes
    assert sol.s0.sum() <= sum(amps) + 1e-9
    assert np.all(sol.s0 >= -1e-12)


def test_l1_signed_variant():
    taus = [0.25, 0.66]
    F = atom_matrix(FC, taus)
    r = 1.2 * F[:, 0] - 0.5 * F[:, 1]   # one genuinely negative amplitude
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=None, epsilon_d=0.0),
                        nonneg=False)
    assert sol.status == "optimal"
    assert sol.s0[0] == pytest.approx(1.2, abs=1e-8)
    assert sol.s0[1] == pytest.approx(-0.5, abs=1e-8)


def test_l1_boundary_only_feasible_set():
    # eps_d equal to the best achievable residual: the minimal-residual
    # point is the whole feasible set.
    F = atom_matrix(FC, [0.3])
    r = 2.0 * F[:, 0]
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=None,
                                    epsilon_d=1e-12))
    assert sol.status == "optimal"
    assert sol.s0[0] == pytest.approx(2.0, abs=1e-9)


def test_l1_no_columns():
    empty = np.zeros((N, 0), dtype=complex)
    ok = solve_l1_socp(SocpProblem(F_est=empty,
                                   r=np.zeros(N, dtype=complex),
                                   w=None, epsilon_d=0.5))
    assert ok.status == "optimal" and ok.s0.size == 0
    bad = solve_l1_socp(SocpProblem(F_est=empty,
                                    r=np.ones(N, dtype=complex),
                                    w=None, epsilon_d=0.5))
    assert bad.status == "infeasible"


def test_l1_overcomplete_support_matches_oracle(scene15_clean, geom35):
    # 40 candidates around the 15 true spikes; l1 keeps exactly 15.
    from coprimedoa.coarray import doa_to_tau
    rng = np.random.default_rng(21)
    true_taus = np.sort([doa_to_tau(s, 0.5) for s in scene15_clean.doas])
    extras = rng.uniform(0, 1, 25)
    cand = np.sort(np.concatenate([true_taus, extras]))
    F = atom_matrix(FC, cand)
    r = spikes_to_r(true_taus, np.ones(15)) + 1.0 * W
    eps_d = 1e-7
    sol = solve_l1_socp(SocpProblem(F_est=F, r=r, w=W, epsilon_d=eps_d))
    assert sol.status == "optimal"
    big = sol.s0 > 0.01 * sol.s0.max()
    assert big.sum() == 15
    kept = np.sort(cand[big])
    assert np.allclose(kept, true_taus, atol=1e-9)
    assert np.allclose(sol.s0[big], 1.0, atol=1e-6)
    assert sol.sigma2 == pytest.approx(1.0, abs=1e-6)
