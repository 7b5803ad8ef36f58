"""Quantum channels in Kraus form, with Choi and Stinespring views.

Conventions
-----------
* Kraus operators are stored as one array of shape ``(r, dim_out, dim_in)``.
* Choi matrices are unnormalized, input factor first:
  ``J = sum_ij |i><j| (x) N(|i><j|)``, so ``tr J = dim_in``.
* Vectorization ``|K>> = sum_i |i> (x) K|i>`` (input index first), giving
  ``J = sum_k |K_k>><<K_k|``.
* The Stinespring isometry of a Kraus list is ``W = sum_k |k>_env (x) K_k``
  with the environment register first; the complementary channel keeps the
  environment and discards the output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .numkernel import (
    PSD_CLIP_TOL,
    PSD_ERROR_TOL,
    ShapeError,
    hermitian_eig,
    hermitize,
    partial_trace,
)

CPTP_TOL = 1e-8


class NotCPTPError(ValueError):
    """A Kraus list or Choi matrix fails complete positivity or trace preservation."""


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.kraus, dtype=complex)
        if K.ndim == 2:
            K = K[None]
        if K.ndim != 3 or K.shape[0] == 0:
            raise ShapeError(f"Kraus array must have shape (r, dim_out, dim_in), got {K.shape}")
        K.setflags(write=False)
        object.__setattr__(self, "kraus", K)

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def rank(self) -> int:
        """Number of stored Kraus operators (not necessarily minimal)."""
        return self.kraus.shape[0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(self, rho)

    def choi(self) -> np.ndarray:
        return kraus_to_choi(self)

    def adjoint(self, X: np.ndarray) -> np.ndarray:
        """Heisenberg-picture map ``X -> sum_k K_k^† X K_k``."""
        K = self.kraus
        return np.einsum("kai,ab,kbj->ij", K.conj(), X, K)

    def __repr__(self) -> str:
        return f"KrausChannel(dim_in={self.dim_in}, dim_out={self.dim_out}, rank={self.rank})"


@dataclass(frozen=True)
class CPTPDiagnostics:
    tp_residual: float
    choi_min_eig: float
    passed: bool

    def describe(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: ||sum K^dag K - I|| = {self.tp_residual:.3e}, "
            f"min eig(Choi) = {self.choi_min_eig:.3e}"
        )


def vec(K: np.ndarray) -> np.ndarray:
    """``|K>> = sum_i |i> (x) K|i>`` for ``K`` of shape (dim_out, dim_in)."""
    return np.asarray(K).T.reshape(-1)


def unvec(v: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    return np.asarray(v).reshape(dim_in, dim_out).T


def kraus_to_choi(ch: KrausChannel) -> np.ndarray:
    V = ch.kraus.transpose(0, 2, 1).reshape(ch.rank, -1)  # rows are |K_k>>
    return hermitize(V.T @ V.conj())


def choi_to_kraus(J: np.ndarray, dim_in: int, dim_out: int, tol: float = PSD_CLIP_TOL) -> KrausChannel:
    """Minimal Kraus decomposition from the eigendecomposition of ``J``.

    Eigenvalues at or below ``tol`` are dropped, so the Kraus count equals the
    numerical rank of ``J``.
    """
    J = np.asarray(J, dtype=complex)
    if J.shape != (dim_in * dim_out, dim_in * dim_out):
        raise ShapeError(f"Choi shape {J.shape} does not match dims ({dim_in}, {dim_out})")
    w, V = hermitian_eig(J)
    if w[-1] < -PSD_ERROR_TOL:
        raise NotCPTPError(f"Choi matrix not CP: eigenvalue {w[-1]:.3e}")
    keep = w > tol
    if not np.any(keep):
        raise NotCPTPError("Choi matrix is numerically zero")
    vecs = V[:, keep] * np.sqrt(w[keep])
    kraus = vecs.T.reshape(-1, dim_in, dim_out).transpose(0, 2, 1)
    return KrausChannel(kraus)


def choi_apply(J: np.ndarray, rho: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    """Channel action from the Choi matrix: ``tr_in[(rho^T (x) I) J]``."""
    T = np.asarray(J).reshape(dim_in, dim_out, dim_in, dim_out)
    return np.einsum("ij,iajb->ab", np.asarray(rho), T)


def apply_channel(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.dim_in, ch.dim_in):
        raise ShapeError(f"input of shape {rho.shape} for channel with dim_in={ch.dim_in}")
    K = ch.kraus
    return np.einsum("kai,ij,kbj->ab", K, rho, K.conj())


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """``outer o inner``; the inner Kraus label is the most significant index."""
    if inner.dim_out != outer.dim_in:
        raise ShapeError(
            f"cannot compose: inner dim_out={inner.dim_out}, outer dim_in={outer.dim_in}"
        )
    prods = np.einsum("jab,ibc->ijac", outer.kraus, inner.kraus)
    return KrausChannel(prods.reshape(-1, outer.dim_out, inner.dim_in))


def tensor(*channels: KrausChannel) -> KrausChannel:
    """Tensor product; the Kraus labels run lexicographically, first channel slowest."""
    def kron2(a: KrausChannel, b: KrausChannel) -> KrausChannel:
        K = np.einsum("iab,jcd->ijacbd", a.kraus, b.kraus)
        return KrausChannel(
            K.reshape(a.rank * b.rank, a.dim_out * b.dim_out, a.dim_in * b.dim_in)
        )

    return reduce(kron2, channels)


def stinespring_isometry(ch: KrausChannel) -> np.ndarray:
    """``W = sum_k |k> (x) K_k``, shape ``(rank * dim_out, dim_in)``, environment first."""
    return ch.kraus.reshape(ch.rank * ch.dim_out, ch.dim_in)


def complementary(ch: KrausChannel) -> KrausChannel:
    """Complementary channel ``rho -> tr_out(W rho W^†)``.

    The output is the environment register, labelled by the Kraus index of
    ``ch``. Its Kraus operators are ``sum_k |k><a| K_k`` for each output basis
    vector ``a``.
    """
    return KrausChannel(np.ascontiguousarray(ch.kraus.transpose(1, 0, 2)))


def minimal_kraus(ch: KrausChannel) -> KrausChannel:
    """Equivalent channel with the minimal number of Kraus operators."""
    return choi_to_kraus(kraus_to_choi(ch), ch.dim_in, ch.dim_out)


def trace_out_channel(dims, discard) -> KrausChannel:
    """Partial trace over the 0-based factors in ``discard`` as a Kraus channel.

    Kraus operators are ``<k_discard| (x) I_keep`` over all basis labels of the
    discarded factors, in lexicographic order.
    """
    dims = [int(d) for d in dims]
    discard = sorted(set(int(i) for i in discard))
    n = len(dims)
    if not discard or discard[0] < 0 or discard[-1] >= n:
        raise ValueError(f"discard must be a nonempty subset of 0..{n - 1}, got {discard}")
    keep = [i for i in range(n) if i not in discard]
    D = int(np.prod(dims))
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    labels = list(itertools.product(*[range(dims[i]) for i in discard]))
    kraus = np.zeros((len(labels), dk, D), dtype=complex)
    for full in range(D):
        multi = np.unravel_index(full, dims)
        lab = tuple(multi[i] for i in discard)
        k = int(np.ravel_multi_index(lab, [dims[i] for i in discard]))
        row = int(np.ravel_multi_index([multi[i] for i in keep], [dims[i] for i in keep])) if keep else 0
        kraus[k, row, full] = 1.0
    return KrausChannel(kraus)


def preparation_channel(dim_in: int, sigma: np.ndarray) -> KrausChannel:
    """Constant channel ``rho -> tr(rho) sigma``."""
    sigma = hermitize(sigma)
    w, V = hermitian_eig(sigma)
    keep = w > PSD_CLIP_TOL
    ops = []
    for lam, v in zip(w[keep], V[:, keep].T):
        for j in range(dim_in):
            K = np.zeros((sigma.shape[0], dim_in), dtype=complex)
            K[:, j] = np.sqrt(lam) * v
            ops.append(K)
    return KrausChannel(np.array(ops))


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d, dtype=complex)[None])


def unitary_channel(U: np.ndarray) -> KrausChannel:
    return KrausChannel(np.asarray(U, dtype=complex)[None])


def validate_cptp(ch: KrausChannel, tol: float = CPTP_TOL) -> CPTPDiagnostics:
    S = np.einsum("kai,kaj->ij", ch.kraus.conj(), ch.kraus)
    tp = float(np.max(np.abs(np.linalg.eigvalsh(hermitize(S - np.eye(ch.dim_in))))))
    min_eig = float(np.linalg.eigvalsh(kraus_to_choi(ch))[0])
    return CPTPDiagnostics(tp, min_eig, tp <= tol and min_eig >= -PSD_ERROR_TOL)


def require_cptp(ch: KrausChannel, tol: float = CPTP_TOL) -> KrausChannel:
    diag = validate_cptp(ch, tol)
    if not diag.passed:
        raise NotCPTPError(diag.describe())
    return ch


def choi_is_valid(J: np.ndarray, dim_in: int, dim_out: int, tol: float = CPTP_TOL) -> bool:
    try:
        w = np.linalg.eigvalsh(hermitize(J))
    except np.linalg.LinAlgError:
        return False
    tp = np.max(np.abs(partial_trace(J, [dim_in, dim_out], [0]) - np.eye(dim_in)))
    return bool(w[0] >= -tol and tp <= tol)


# -- standard qudit noise ---------------------------------------------------


def weyl_ops(d: int) -> list[np.ndarray]:
    """Shift-and-clock operators ``X^a Z^b``, ordered with ``(a, b) = (0, 0)`` first."""
    X = np.roll(np.eye(d), 1, axis=0)
    Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b)
        for a in range(d)
        for b in range(d)
    ]


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"parameter out of range [0,1]: p={p}")
    return p


def depolarizing(d: int, p: float) -> KrausChannel:
    """``rho -> (1-p) rho + p tr(rho) I/d`` via Weyl Kraus operators."""
    p = _check_p(p)
    W = weyl_ops(d)
    coeffs = [1 - p + p / d**2] + [p / d**2] * (d * d - 1)
    ops = [np.sqrt(c) * U for c, U in zip(coeffs, W) if c > 0]
    return KrausChannel(np.array(ops))


def dephasing(d: int, p: float) -> KrausChannel:
    """``rho -> (1-p) rho + p diag(rho)`` via diagonal Weyl (clock) operators."""
    p = _check_p(p)
    Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    coeffs = [1 - p + p / d] + [p / d] * (d - 1)
    ops = [np.sqrt(c) * np.linalg.matrix_power(Z, b) for b, c in enumerate(coeffs) if c > 0]
    return KrausChannel(np.array(ops))


def erasure(d: int, p: float) -> KrausChannel:
    """With probability ``p`` the share is handed over and replaced by ``I/d``.

    Same channel as :func:`depolarizing`, but written with matrix-unit Kraus
    operators ``sqrt(p/d)|a><b|``.
    """
    p = _check_p(p)
    ops = []
    if p < 1:
        ops.append(np.sqrt(1 - p) * np.eye(d, dtype=complex))
    if p > 0:
        for a in range(d):
            for b in range(d):
                K = np.zeros((d, d), dtype=complex)
                K[a, b] = np.sqrt(p / d)
                ops.append(K)
    return KrausChannel(np.array(ops))


def random_channel(dim_in: int, dim_out: int, rank: int, rng: np.random.Generator) -> KrausChannel:
    """Kraus channel from a Haar-like random isometry ``C^dim_in -> C^rank (x) C^dim_out``."""
    if rank * dim_out < dim_in:
        raise ValueError(f"no isometry from dim {dim_in} into rank*dim_out={rank * dim_out}")
    G = rng.standard_normal((rank * dim_out, dim_in)) + 1j * rng.standard_normal((rank * dim_out, dim_in))
    Q, _ = np.linalg.qr(G)
    return KrausChannel(Q.reshape(rank, dim_out, dim_in))


__all__ = [
    "CPTPDiagnostics",
    "KrausChannel",
    "NotCPTPError",
    "apply_channel",
    "choi_apply",
    "choi_to_kraus",
    "complementary",
    "compose",
    "dephasing",
    "depolarizing",
    "erasure",
    "identity_channel",
    "kraus_to_choi",
    "minimal_kraus",
    "preparation_channel",
    "random_channel",
    "require_cptp",
    "stinespring_isometry",
    "tensor",
    "trace_out_channel",
    "unitary_channel",
    "validate_cptp",
]
