import numpy as np
import pytest

from approxqss.channels import random_channel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_channels(count, rng, dims_in=(2, 3), dims_out=(2, 3, 4), max_rank=3):
    out = []
    while len(out) < count:
        di, do = int(rng.choice(dims_in)), int(rng.choice(dims_out))
        r = int(rng.integers(1, max_rank + 1))
        if r * do < di:
            continue
        out.append(random_channel(di, do, r, rng))
    return out


# -- independent SDP oracles (cvxpy); used only by the tests ----------------


def _cp():
    return pytest.importorskip("cvxpy")


def _ptrace_out(cp, X, din, dout):
    return cp.partial_trace(X, [din, dout], axis=1)


def _range_factor(J, tol=1e-12):
    """``L`` with ``J = L L^dag`` and full column rank."""
    w, V = np.linalg.eigh(J)
    keep = w > tol * max(w.max(), 1.0)
    return V[:, keep] * np.sqrt(w[keep])


def sdp_max_sigma_root_fidelity(J, din, dout):
    """``max_sigma sqrt(F_diamond(N, prepare sigma))`` by semidefinite programming.

    The off-diagonal block is written as ``L Y`` with ``J = L L^dag`` so the
    problem stays strictly feasible when ``J`` is rank deficient.
    """
    cp = _cp()
    n = din * dout
    L = _range_factor(J)
    r = L.shape[1]
    Y = cp.Variable((r, n), complex=True)
    sigma = cp.Variable((dout, dout), hermitian=True)
    t = cp.Variable()
    B = cp.bmat([[np.eye(r), Y], [Y.H, cp.kron(np.eye(din), sigma)]])
    T = _ptrace_out(cp, L @ Y, din, dout)
    cons = [
        0.5 * (B + B.H) >> 0,
        0.5 * (T + T.H) - t * np.eye(din) >> 0,
        sigma >> 0,
        cp.real(cp.trace(sigma)) == 1,
    ]
    cp.Problem(cp.Maximize(t), cons).solve(solver="CLARABEL")
    return float(t.value)


def sdp_max_recovery_root_fidelity(JN, q, m):
    """``max_R sqrt(F_diamond(R o N, id))`` for ``N: q -> m`` by semidefinite programming.

    The identity Choi matrix is rank one, so the off-diagonal block is
    ``x phi^dag`` and the block constraint reduces to ``J_{R o N} >= x x^dag``.
    """
    cp = _cp()
    JR = cp.Variable((m * q, m * q), hermitian=True)
    T4 = JN.reshape(q, m, q, m)
    blocks = []
    for i in range(q):
        row = []
        for j in range(q):
            acc = 0
            for x in range(m):
                for y in range(m):
                    c = T4[i, x, j, y]
                    if abs(c) > 1e-14:
                        acc = acc + c * JR[x * q:(x + 1) * q, y * q:(y + 1) * q]
            row.append(acc if not isinstance(acc, int) else np.zeros((q, q)))
        blocks.append(row)
    Jc = cp.bmat(blocks)
    phi = np.eye(q).reshape(-1)
    x = cp.Variable((q * q, 1), complex=True)
    t = cp.Variable()
    B = cp.bmat([[Jc, x], [x.H, np.ones((1, 1))]])
    T = _ptrace_out(cp, x @ phi[None, :], q, q)
    cons = [
        0.5 * (B + B.H) >> 0,
        0.5 * (T + T.H) - t * np.eye(q) >> 0,
        JR >> 0,
        cp.partial_trace(JR, [m, q], axis=1) == np.eye(m),
    ]
    cp.Problem(cp.Maximize(t), cons).solve(solver="CLARABEL")
    return float(t.value)


def sdp_diamond_distance(J, d):
    """``1/2 ||Phi - id||_diamond`` by the standard semidefinite program."""
    cp = _cp()
    phi = np.eye(d).reshape(-1)
    Jd = J - np.outer(phi, phi)
    W = cp.Variable((d * d, d * d), hermitian=True)
    rho = cp.Variable((d, d), hermitian=True)
    cons = [W >> 0, W - cp.kron(rho.T, np.eye(d)) << 0, rho >> 0, cp.real(cp.trace(rho)) == 1]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(W @ Jd))), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value)
