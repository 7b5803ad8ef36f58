import numpy as np
import pytest

from approxqss.channels import (
    KrausChannel,
    NotCPTPError,
    apply_channel,
    choi_apply,
    choi_is_valid,
    choi_to_kraus,
    complementary,
    compose,
    dephasing,
    depolarizing,
    erasure,
    identity_channel,
    kraus_to_choi,
    minimal_kraus,
    preparation_channel,
    random_channel,
    require_cptp,
    stinespring_isometry,
    tensor,
    trace_out_channel,
    unitary_channel,
    unvec,
    validate_cptp,
    vec,
)
from approxqss.numkernel import partial_trace, random_density_matrix, random_unitary


def test_vec_unvec_roundtrip(rng):
    K = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    assert np.allclose(unvec(vec(K), 2, 3), K)


def test_choi_is_action_on_matrix_units(rng):
    ch = random_channel(2, 3, 2, rng)
    J = kraus_to_choi(ch)
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = 1
            assert np.allclose(J[3 * i:3 * i + 3, 3 * j:3 * j + 3], apply_channel(ch, E))
    assert np.trace(J).real == pytest.approx(2.0)


def test_kraus_choi_roundtrip(rng):
    ch = random_channel(3, 2, 3, rng)
    J = kraus_to_choi(ch)
    back = choi_to_kraus(J, 3, 2)
    assert back.rank <= 3
    assert np.allclose(kraus_to_choi(back), J, atol=1e-12)
    rho = random_density_matrix(3, rng)
    assert np.allclose(choi_apply(J, rho, 3, 2), apply_channel(ch, rho))


def test_choi_to_kraus_rejects_invalid():
    with pytest.raises(NotCPTPError):
        choi_to_kraus(-np.eye(4), 2, 2)


def test_compose_and_tensor_match_sequential_application(rng):
    a, b = random_channel(2, 3, 2, rng), random_channel(3, 2, 2, rng)
    rho = random_density_matrix(2, rng)
    assert np.allclose(compose(b, a)(rho), b(a(rho)))
    r1, r2 = random_density_matrix(2, rng), random_density_matrix(3, rng)
    c = random_channel(3, 3, 2, rng)
    assert np.allclose(tensor(a, c)(np.kron(r1, r2)), np.kron(a(r1), c(r2)))


def test_complementary_matches_stinespring(rng):
    ch = random_channel(3, 2, 3, rng)
    W = stinespring_isometry(ch)
    assert np.allclose(W.conj().T @ W, np.eye(3))
    rho = random_density_matrix(3, rng)
    big = W @ rho @ W.conj().T
    comp = complementary(ch)
    assert np.allclose(comp(rho), partial_trace(big, [ch.rank, 2], [0]))
    assert np.allclose(ch(rho), partial_trace(big, [ch.rank, 2], [1]))
    assert validate_cptp(comp).passed


def test_complement_of_unitary_is_constant(rng):
    comp = complementary(unitary_channel(random_unitary(3, rng)))
    for _ in range(5):
        assert np.allclose(comp(random_density_matrix(3, rng)), [[1.0]])


def test_minimal_kraus_preserves_channel(rng):
    ch = tensor(depolarizing(2, 0.3), identity_channel(2))
    m = minimal_kraus(ch)
    assert m.rank <= 4
    assert np.allclose(kraus_to_choi(m), kraus_to_choi(ch), atol=1e-12)


def test_trace_out_channel(rng):
    rho = random_density_matrix(12, rng)
    ch = trace_out_channel([2, 3, 2], [1])
    assert np.allclose(ch(rho), partial_trace(rho, [2, 3, 2], [0, 2]))
    assert validate_cptp(ch).passed


def test_preparation_channel_is_constant(rng):
    sigma = random_density_matrix(3, rng, rank=2)
    ch = preparation_channel(2, sigma)
    assert validate_cptp(ch).passed
    for _ in range(3):
        assert np.allclose(ch(random_density_matrix(2, rng)), sigma)
    assert np.allclose(kraus_to_choi(ch), np.kron(np.eye(2), sigma))


def test_noise_families(rng):
    rho = random_density_matrix(3, rng)
    assert np.allclose(depolarizing(3, 0.4)(rho), 0.6 * rho + 0.4 * np.eye(3) / 3)
    assert np.allclose(dephasing(3, 0.4)(rho), 0.6 * rho + 0.4 * np.diag(np.diag(rho)))
    assert np.allclose(kraus_to_choi(erasure(3, 0.7)), kraus_to_choi(depolarizing(3, 0.7)))
    for f in (depolarizing, dephasing, erasure):
        for p in (0.0, 0.5, 1.0):
            assert validate_cptp(f(3, p)).passed


@pytest.mark.parametrize("family", [depolarizing, dephasing, erasure])
def test_noise_parameter_range(family):
    with pytest.raises(ValueError, match=r"parameter out of range \[0,1\]"):
        family(2, 1.5)


def test_validate_cptp_reports_failures(rng):
    ch = random_channel(2, 2, 2, rng)
    bad = KrausChannel(1.1 * ch.kraus)
    diag = validate_cptp(bad)
    assert not diag.passed and diag.tp_residual > 0.1
    assert "FAIL" in diag.describe()
    with pytest.raises(NotCPTPError):
        require_cptp(bad)
    assert choi_is_valid(kraus_to_choi(ch), 2, 2)
    assert not choi_is_valid(kraus_to_choi(bad), 2, 2)


def test_random_channel_rank_check(rng):
    with pytest.raises(ValueError):
        random_channel(4, 2, 1, rng)
