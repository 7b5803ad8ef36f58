import numpy as np
import pytest

from approxqss.channels import (
    apply_channel,
    choi_is_valid,
    complementary,
    compose,
    dephasing,
    depolarizing,
    identity_channel,
    kraus_to_choi,
    preparation_channel,
    random_channel,
    tensor,
    validate_cptp,
)
from approxqss.divergences import QFunction, joint_state, q_function
from approxqss.numkernel import NumericalError, hermitize, is_density_matrix, random_density_matrix
from approxqss.qss import AuthorizedSet, build_cgl_2_3_scheme, builtin_attack, effective_channels
from approxqss.saddle import (
    SolverConfig,
    diamond_lower_estimate,
    dykstra_cptp_project,
    max_sigma_q,
    min_rho_q,
    optimize_recovery,
    saddle_max_sigma_min_rho,
    worst_case_input,
)

from conftest import (
    random_channels,
    sdp_diamond_distance,
    sdp_max_recovery_root_fidelity,
    sdp_max_sigma_root_fidelity,
)

pytestmark = pytest.mark.filterwarnings("ignore:Solution may be inaccurate")


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(restarts=0)
    assert SolverConfig().with_(seed=3).seed == 3


def test_min_rho_constant_channel(rng):
    sigma0 = random_density_matrix(3, rng)
    qf = QFunction.from_channel(preparation_channel(2, sigma0))
    res = min_rho_q(sigma0, qf)
    assert res.value == pytest.approx(1.0, abs=1e-10)


def test_min_rho_identity_qubit():
    qf = QFunction.from_channel(identity_channel(2))
    res = min_rho_q(np.eye(2) / 2, qf)
    assert res.value == pytest.approx(0.25, abs=1e-10)
    assert np.allclose(res.state, np.eye(2) / 2, atol=1e-5)
    # grid over the Bloch ball: q^2 = (1 + |r|^2) / 4
    J = kraus_to_choi(identity_channel(2))
    best = min(
        q_function(0.5 * np.array([[1 + z, x], [x, 1 - z]]), np.eye(2) / 2, J) ** 2
        for x in np.linspace(-0.7, 0.7, 15)
        for z in np.linspace(-0.7, 0.7, 15)
        if x * x + z * z <= 1
    )
    assert best == pytest.approx(0.25, abs=1e-12)


def test_min_rho_against_monte_carlo(rng):
    ch = complementary(random_channel(2, 2, 2, rng))
    J = kraus_to_choi(ch)
    sigma = random_density_matrix(ch.dim_out, rng)
    res = min_rho_q(sigma, QFunction(J, ch.dim_in, ch.dim_out))
    sampled = min(
        q_function(random_density_matrix(2, rng, rank=int(rng.integers(1, 3))), sigma, J) ** 2
        for _ in range(10_000)
    )
    assert res.value <= sampled + 1e-9
    assert res.value >= sampled - 1e-3


def test_max_sigma_is_optimal_against_samples(rng):
    ch = random_channel(3, 2, 2, rng)
    J = kraus_to_choi(ch)
    qf = QFunction(J, 3, 2)
    rho = random_density_matrix(3, rng)
    res = max_sigma_q(rho, qf)
    assert is_density_matrix(res.state)
    for _ in range(500):
        assert q_function(rho, random_density_matrix(2, rng), J) <= res.q + 1e-9


def test_saddle_closed_forms(rng):
    res = saddle_max_sigma_min_rho(kraus_to_choi(preparation_channel(2, random_density_matrix(2, rng))), 2, 2)
    assert res.value == pytest.approx(1.0, abs=1e-9) and abs(res.gap) <= 1e-9
    for d in (2, 3):
        res = saddle_max_sigma_min_rho(kraus_to_choi(identity_channel(d)), d, d)
        assert res.value == pytest.approx(1 / d**2, abs=1e-9)
        assert res.q_maxmin == pytest.approx(1 / d, abs=1e-9)
        assert np.allclose(res.rho_star, np.eye(d) / d, atol=1e-6)
        assert np.allclose(res.sigma_star, np.eye(d) / d, atol=1e-6)


def test_saddle_on_cgl_complement():
    s = build_cgl_2_3_scheme()
    comp = effective_channels(s, builtin_attack(s, "identity"), AuthorizedSet((1, 2))).complement
    res = saddle_max_sigma_min_rho(kraus_to_choi(comp), comp.dim_in, comp.dim_out)
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_saddle_routes_bracket_and_match_sdp(rng):
    for ch in random_channels(6, rng):
        J = kraus_to_choi(ch)
        res = saddle_max_sigma_min_rho(J, ch.dim_in, ch.dim_out)
        assert res.converged
        assert res.value <= res.value_minmax + 1e-12
        assert res.certified_gap >= res.gap - 1e-15
        assert is_density_matrix(res.rho_star) and is_density_matrix(res.sigma_star)
        oracle = sdp_max_sigma_root_fidelity(J, ch.dim_in, ch.dim_out) ** 2
        assert res.value == pytest.approx(oracle, abs=2e-5)


def test_dykstra_fixed_point_and_feasibility(rng):
    J = kraus_to_choi(random_channel(2, 3, 2, rng))
    assert np.allclose(dykstra_cptp_project(J, 2, 3), J, atol=1e-8)
    P = dykstra_cptp_project(np.eye(6), 2, 3)
    assert choi_is_valid(P, 2, 3)
    assert np.allclose(P, np.eye(6) / 3)
    A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    delta = hermitize(A)
    delta *= 0.1 / np.linalg.norm(delta)
    P = dykstra_cptp_project(J + delta, 2, 3)
    assert choi_is_valid(P, 2, 3, tol=1e-8)
    assert np.linalg.norm(P - J) <= 0.2


def test_dykstra_matches_sdp_projection(rng):
    cp = pytest.importorskip("cvxpy")
    J0 = kraus_to_choi(random_channel(2, 2, 2, rng))
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    X = J0 + 0.5 * hermitize(A)
    V = cp.Variable((4, 4), hermitian=True)
    cons = [V >> 0, cp.partial_trace(V, [2, 2], axis=1) == np.eye(2)]
    cp.Problem(cp.Minimize(cp.norm(V - X, "fro")), cons).solve(solver="CLARABEL")
    assert np.allclose(dykstra_cptp_project(X, 2, 2), V.value, atol=1e-5)


def test_dykstra_iteration_cap(rng):
    A = rng.standard_normal((9, 9))
    with pytest.raises(NumericalError):
        dykstra_cptp_project(A + A.T - 20 * np.eye(9), 3, 3, max_iters=1)


def test_worst_case_input_closed_forms():
    assert worst_case_input(identity_channel(2)).fidelity == pytest.approx(1.0)
    res = worst_case_input(depolarizing(2, 1.0))
    assert res.fidelity == pytest.approx(0.25, abs=1e-10)
    prev = 1.0
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        f = worst_case_input(dephasing(2, p)).fidelity
        assert f <= prev + 1e-12
        assert f == pytest.approx(1 - p / 2, abs=1e-8)
        prev = f


def test_worst_case_input_beats_random_pure_inputs(rng):
    ch = random_channel(2, 2, 3, rng)
    res = worst_case_input(ch)
    tau = joint_state(ch, res.rho.T)
    assert np.vdot(res.psi, tau @ res.psi).real == pytest.approx(res.fidelity, abs=1e-9)
    for _ in range(300):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        out = apply_channel(tensor(identity_channel(2), ch), np.outer(v, v.conj()))
        assert np.vdot(v, out @ v).real >= res.fidelity - 1e-9


def test_optimize_recovery_closed_forms(rng):
    res = optimize_recovery(identity_channel(3))
    assert res.fidelity == pytest.approx(1.0, abs=1e-10)
    assert validate_cptp(res.recovery).passed
    res = optimize_recovery(preparation_channel(2, random_density_matrix(3, rng)))
    assert res.fidelity == pytest.approx(0.25, abs=1e-6)
    s = build_cgl_2_3_scheme()
    fwd = effective_channels(s, builtin_attack(s, "identity"), AuthorizedSet((1, 2))).forward
    assert optimize_recovery(fwd).fidelity >= 1 - 1e-6


def test_optimize_recovery_matches_sdp_and_dual(rng):
    for _ in range(3):
        N = random_channel(2, 3, 2, rng)
        res = optimize_recovery(N)
        assert validate_cptp(res.recovery).passed
        oracle = sdp_max_recovery_root_fidelity(kraus_to_choi(N), 2, 3) ** 2
        assert res.fidelity == pytest.approx(oracle, abs=1e-4)
        comp = complementary(N)
        dual = saddle_max_sigma_min_rho(kraus_to_choi(comp), comp.dim_in, comp.dim_out)
        assert res.fidelity == pytest.approx(dual.value, abs=1e-5)
        assert res.fidelity >= res.baseline - 1e-12


def test_diamond_lower_estimate_below_sdp(rng):
    for ch in [depolarizing(2, 1.0), dephasing(2, 0.3)] + [random_channel(2, 2, 2, rng) for _ in range(3)]:
        est, psi = diamond_lower_estimate(ch)
        assert abs(np.linalg.norm(psi) - 1) < 1e-12
        exact = sdp_diamond_distance(kraus_to_choi(ch), 2)
        assert est <= exact + 1e-6
        assert est >= exact - 1e-3


def test_recovered_channel_is_cptp_and_composes(rng):
    N = random_channel(2, 2, 2, rng)
    res = optimize_recovery(N)
    RN = compose(res.recovery, N)
    assert validate_cptp(RN).passed
    assert worst_case_input(RN).fidelity == pytest.approx(res.fidelity, abs=1e-9)
