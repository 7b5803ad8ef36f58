"""Dense complex-matrix primitives shared by the rest of the package.

Matrices are plain ``numpy`` arrays. Functions that expect a density matrix
accept any array that is Hermitian, positive semidefinite and of unit trace up
to the module tolerances below; :func:`density_matrix` cleans such an array
(symmetrizes, clips float-noise eigenvalues) and raises on genuine violations.
"""

from __future__ import annotations

import numpy as np

# eigenvalues in (-PSD_ERROR_TOL, 0) are treated as float noise and clipped
PSD_CLIP_TOL = 1e-10
PSD_ERROR_TOL = 1e-6
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-10


class NumericalError(ArithmeticError):
    """A dense linear-algebra routine failed to converge."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before meeting its tolerance.

    ``result`` holds the best point found, so callers can still use it as a
    bound.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class NotPSDError(ValueError):
    """An operator that must be positive semidefinite has a negative eigenvalue."""


class ShapeError(ValueError):
    """Operand dimensions are inconsistent."""


def _square(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {M.shape}")
    return M


def hermitize(M: np.ndarray) -> np.ndarray:
    M = _square(M)
    return 0.5 * (M + M.conj().T)


def hermitian_eig(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.

    Returns ``(w, V)`` with ``H = V @ diag(w) @ V^†``.
    """
    H = hermitize(H)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(H) if np.all(np.isfinite(H)) else np.inf
        raise NumericalError(
            f"eigendecomposition failed for {H.shape[0]}x{H.shape[0]} matrix "
            f"(condition number {cond:.3e})"
        ) from exc
    return w[::-1], V[:, ::-1]


def _clipped_eig(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = hermitian_eig(P)
    if w.size and w[-1] < -PSD_ERROR_TOL:
        raise NotPSDError(f"operator has eigenvalue {w[-1]:.3e} below -{PSD_ERROR_TOL:g}")
    return np.clip(w, 0.0, None), V


def psd_power(P: np.ndarray, power: float, floor: float = PSD_CLIP_TOL) -> np.ndarray:
    """``P**power`` on the support of a PSD matrix.

    Eigenvalues at or below ``floor`` are treated as zero, so negative powers
    act as pseudo-inverse powers.
    """
    w, V = _clipped_eig(P)
    wp = np.zeros_like(w)
    keep = w > floor
    wp[keep] = w[keep] ** power
    return (V * wp) @ V.conj().T


def noise_floor(w: np.ndarray) -> float:
    """Eigenvalues below this are indistinguishable from zero in float64."""
    return w.size * np.finfo(float).eps * max(float(np.max(w, initial=0.0)), 0.0)


def psd_sqrt(P: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues at float-noise level count as zero."""
    w, V = _clipped_eig(P)
    w[w <= noise_floor(w)] = 0.0
    return (V * np.sqrt(w)) @ V.conj().T


def psd_log(P: np.ndarray, floor: float = PSD_CLIP_TOL) -> np.ndarray:
    """Matrix logarithm on the support (zero on the kernel)."""
    w, V = _clipped_eig(P)
    lw = np.zeros_like(w)
    keep = w > floor
    lw[keep] = np.log(w[keep])
    return (V * lw) @ V.conj().T


def trace_norm(M: np.ndarray) -> float:
    """Schatten 1-norm (sum of singular values)."""
    M = np.asarray(M, dtype=complex)
    try:
        s = np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed for matrix of shape {M.shape}") from exc
    return float(np.sum(s))


def partial_trace(M: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out every tensor factor of ``M`` whose index is not in ``keep``.

    ``dims`` lists the factor dimensions and ``keep`` holds 0-based factor
    indices. Kept factors appear in ascending index order.
    """
    M = _square(M)
    dims = [int(d) for d in dims]
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if int(np.prod(dims)) != M.shape[0]:
        raise ShapeError(f"factor dims {dims} do not match matrix size {M.shape[0]}")
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise ShapeError(f"keep must be a nonempty subset of 0..{n - 1}, got {keep}")
    T = M.reshape(dims + dims)
    # einsum labels: row axes i, column axes n+i; traced pairs share a label
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    R = np.einsum(T, row + col, out)
    dk = int(np.prod([dims[i] for i in keep]))
    return R.reshape(dk, dk)


def density_matrix(M: np.ndarray) -> np.ndarray:
    """Validate and clean a density matrix.

    Symmetrizes, clips eigenvalues in ``[-1e-6, 0)`` to zero and checks the
    trace. Raises :class:`NotPSDError` or :class:`ValueError` otherwise.
    """
    H = hermitize(M)
    if not np.all(np.isfinite(H)):
        raise ValueError("density matrix has non-finite entries")
    tr = np.trace(H).real
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"density matrix trace is {tr:.12g}, expected 1")
    w, V = _clipped_eig(H)
    w = w / w.sum()
    return (V * w) @ V.conj().T


def is_density_matrix(M: np.ndarray, tol: float = 1e-8) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    if np.max(np.abs(M - M.conj().T), initial=0.0) > tol:
        return False
    if abs(np.trace(M).real - 1.0) > tol:
        return False
    return bool(np.linalg.eigvalsh(hermitize(M))[0] >= -tol)


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``||sqrt(rho) sqrt(sigma)||_1^2``."""
    rho, sigma = _square(rho, "rho"), _square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ShapeError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    return trace_norm(psd_sqrt(rho) @ psd_sqrt(sigma)) ** 2


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    rho, sigma = _square(rho, "rho"), _square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ShapeError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    w = np.linalg.eigvalsh(hermitize(rho - sigma))
    return 0.5 * float(np.sum(np.abs(w)))


def max_entangled(d: int, normalized: bool = True) -> np.ndarray:
    """``sum_k |k>|k>``, optionally divided by ``sqrt(d)``."""
    v = np.eye(d, dtype=complex).reshape(-1)
    return v / np.sqrt(d) if normalized else v


def purify(rho: np.ndarray) -> np.ndarray:
    """Purification ``sum_i sqrt(l_i) |psi_i>|conj(psi_i)> = (sqrt(rho) x I)|Phi>``.

    The reference factor is second and carries the conjugate eigenbasis, so
    the first marginal is ``rho`` and the second is ``rho^T``. The result does
    not depend on the eigenbasis chosen for degenerate ``rho``.
    """
    rho = density_matrix(rho)
    d = rho.shape[0]
    return np.kron(psd_sqrt(rho), np.eye(d)) @ max_entangled(d, normalized=False)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    k = idx[u - css / idx > 0][-1]
    return np.maximum(v - css[k - 1] / k, 0.0)


def density_project(H: np.ndarray) -> np.ndarray:
    """Nearest density matrix in Frobenius norm."""
    w, V = hermitian_eig(H)
    p = project_simplex(w)
    return (V * p) @ V.conj().T


def ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed density matrix (Hilbert-Schmidt measure for full rank)."""
    rank = d if rank is None else rank
    G = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = G @ G.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)
