"""Entropic and fidelity-based quantities for channels.

All logarithms are natural (nats).

The central object is the q-function of a channel with Choi matrix ``J``::

    q(rho, sigma) = || J^{1/2} (rho (x) sqrt(sigma)) ||_1
                  = sqrt(F((sqrt(rho) (x) I) J (sqrt(rho) (x) I), rho (x) sigma))

Here ``rho`` is the reference marginal of the purified input (the first
tensor factor of the Choi matrix); the channel itself sees ``rho^T``.
``q`` is convex in ``rho`` and concave in ``sigma``, and

    max_sigma min_rho q^2 = min_rho max_sigma q^2 = exp(-C_{1/2}),

which ties the fidelity of the complementary channel to a preparation
channel to the Renyi-1/2 entanglement-assisted capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, apply_channel, complementary, kraus_to_choi
from .numkernel import (
    ConvergenceError,
    ShapeError,
    density_matrix,
    hermitian_eig,
    hermitize,
    noise_floor,
    partial_trace,
    psd_log,
    psd_power,
    psd_sqrt,
    purify,
    trace_norm,
)

# relative cutoff for the range of J and the support of its output marginal
SUPPORT_TOL = 1e-12
# eigenvalue floor for G^{-1/2} in the q-function gradient
GRAD_FLOOR = 1e-12


def von_neumann_entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(hermitize(rho))
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Umegaki relative entropy ``tr rho (log rho - log sigma)``; ``inf`` off support."""
    w, V = hermitian_eig(sigma)
    ker = V[:, w <= 1e-12]
    if ker.size and np.linalg.norm(ker.conj().T @ rho @ ker) > 1e-10:
        return float("inf")
    return float(np.trace(rho @ (psd_log(rho) - psd_log(sigma))).real)


def sandwiched_renyi(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    """Sandwiched Renyi divergence of order ``alpha`` (``alpha > 0``, ``alpha != 1``).

    ``(1/(alpha-1)) log tr[(sigma^b rho sigma^b)^alpha]`` with
    ``b = (1-alpha)/(2 alpha)``. Powers of ``sigma`` act on its support. For
    ``alpha > 1`` a ``rho`` not supported inside ``sigma`` gives ``inf``.
    """
    if alpha <= 0 or alpha == 1:
        raise ValueError(f"alpha must be positive and != 1, got {alpha}")
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ShapeError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    if alpha > 1:
        w, V = hermitian_eig(sigma)
        ker = V[:, w <= 1e-12]
        if ker.size and np.linalg.norm(ker.conj().T @ rho @ ker) > 1e-10:
            return float("inf")
    b = (1 - alpha) / (2 * alpha)
    sb = psd_power(sigma, b)
    inner = hermitize(sb @ rho @ sb)
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr = float(np.sum(w**alpha))
    if tr <= 0:
        return float("inf")
    return float(np.log(tr) / (alpha - 1))


def q_function(rho: np.ndarray, sigma: np.ndarray, J: np.ndarray) -> float:
    """``|| J^{1/2} (rho (x) sqrt(sigma)) ||_1`` for a Choi matrix ``J``."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if rho.shape[0] * sigma.shape[0] != np.asarray(J).shape[0]:
        raise ShapeError(
            f"rho ({rho.shape[0]}) and sigma ({sigma.shape[0]}) do not match Choi size {J.shape[0]}"
        )
    return trace_norm(psd_sqrt(J) @ np.kron(rho, psd_sqrt(sigma)))


class QFunction:
    """Factored evaluator of the q-function and its gradients.

    ``J`` is replaced by a factor ``K`` with ``J = K K^†`` (``r`` columns, the
    rank of ``J``), and the output space is compressed to the support of
    ``tr_in J``. Then ``q = tr sqrt(G)`` with the small ``r x r`` matrix
    ``G = K^†(rho^2 (x) sigma) K``. Density matrices on the output side are
    passed in compressed coordinates; see :meth:`compress` and :meth:`lift`.
    """

    def __init__(self, J: np.ndarray, dim_in: int, dim_out: int):
        J = hermitize(J)
        if J.shape[0] != dim_in * dim_out:
            raise ShapeError(f"Choi size {J.shape[0]} != {dim_in}*{dim_out}")
        w, V = hermitian_eig(J)
        scale = max(1.0, w[0])
        keep = w > SUPPORT_TOL * scale
        K = V[:, keep] * np.sqrt(w[keep])
        out = partial_trace(J, [dim_in, dim_out], [1])
        ow, oV = hermitian_eig(out)
        P = oV[:, ow > SUPPORT_TOL * max(1.0, ow[0])]
        self.dim_in = dim_in
        self.dim_out = dim_out
        self.dim_sigma = P.shape[1]
        self.rank = K.shape[1]
        self.P = P
        Kc = np.einsum("ab,ibr->iar", P.conj().T, K.reshape(dim_in, dim_out, -1))
        self.K = np.ascontiguousarray(Kc)  # (dim_in, dim_sigma, r)

    @classmethod
    def from_channel(cls, ch: KrausChannel) -> "QFunction":
        return cls(kraus_to_choi(ch), ch.dim_in, ch.dim_out)

    def compress(self, sigma: np.ndarray) -> np.ndarray:
        return self.P.conj().T @ sigma @ self.P

    def lift(self, sigma_c: np.ndarray) -> np.ndarray:
        return self.P @ sigma_c @ self.P.conj().T

    def _gram(self, rho, sigma_c):
        din, s, r = self.K.shape
        A = (rho @ self.K.reshape(din, s * r)).reshape(din, s, r)  # (rho x I) K
        C = np.matmul(sigma_c, A)  # (rho x sigma) K
        G = A.reshape(din * s, r).conj().T @ C.reshape(din * s, r)
        return A, C, hermitize(G)

    def value(self, rho: np.ndarray, sigma_c: np.ndarray) -> float:
        _, _, G = self._gram(rho, sigma_c)
        w = np.clip(np.linalg.eigvalsh(G), 0.0, None)
        w[w <= noise_floor(w)] = 0.0
        return float(np.sum(np.sqrt(w)))

    def value_and_grads(self, rho: np.ndarray, sigma_c: np.ndarray):
        """Return ``(q, dq/drho, dq/dsigma)`` with gradients as Hermitian matrices.

        Gradients are ``Herm tr_Y[(rho x sigma) M]`` and
        ``1/2 tr_X[(rho x I) M (rho x I)]`` with ``M = K G^{-1/2} K^†``,
        using a pseudo-inverse on the kernel of ``G``.
        """
        din, s, r = self.K.shape
        A, C, G = self._gram(rho, sigma_c)
        w, V = np.linalg.eigh(G)
        w = np.clip(w, 0.0, None)
        w[w <= noise_floor(w)] = 0.0
        q = float(np.sum(np.sqrt(w)))
        inv = np.zeros_like(w)
        big = w > GRAD_FLOOR
        inv[big] = 1.0 / np.sqrt(w[big])
        Gm = (V * inv) @ V.conj().T
        CG = (C.reshape(din * s, r) @ Gm).reshape(din, s * r)
        g_rho = hermitize(CG @ self.K.reshape(din, s * r).conj().T)
        AG = (A.reshape(din * s, r) @ Gm).reshape(din, s, r)
        g_sig = 0.5 * (
            AG.transpose(1, 0, 2).reshape(s, din * r)
            @ A.transpose(1, 0, 2).reshape(s, din * r).conj().T
        )
        return q, g_rho, hermitize(g_sig)

    def output_state(self, rho: np.ndarray) -> np.ndarray:
        """Output marginal of ``(sqrt(rho) x I) J (sqrt(rho) x I)``, compressed."""
        din, s, r = self.K.shape
        A = (psd_sqrt(rho) @ self.K.reshape(din, s * r)).reshape(din, s, r)
        out = np.einsum("iar,ibr->ab", A, A.conj())
        return hermitize(out / np.trace(out).real)


def joint_state(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    """``tau = (1 (x) ch)(|psi_rho><psi_rho|)`` on reference (x) output."""
    psi = purify(rho)
    d = ch.dim_in
    Kfull = np.einsum("ij,kab->kiajb", np.eye(d), ch.kraus).reshape(
        ch.rank, d * ch.dim_out, d * d
    )
    outs = Kfull @ psi
    return hermitize(outs.T @ outs.conj())


def mutual_info_vn(ch: KrausChannel, rho: np.ndarray) -> float:
    """``I(X:Y)_tau = S(X) + S(Y) - S(XY)`` for ``tau = (1 x ch)(psi_rho)``."""
    rho = density_matrix(rho)
    if rho.shape[0] != ch.dim_in:
        raise ShapeError(f"rho has dim {rho.shape[0]}, channel dim_in={ch.dim_in}")
    tau = joint_state(ch, rho)
    tau_y = partial_trace(tau, [ch.dim_in, ch.dim_out], [1])
    val = von_neumann_entropy(rho) + von_neumann_entropy(tau_y) - von_neumann_entropy(tau)
    return max(val, 0.0)


def mutual_info_renyi_half(ch: KrausChannel, rho: np.ndarray, cfg=None) -> float:
    """``-log max_sigma F(tau, rho (x) sigma) = -log max_sigma q(rho, sigma)^2``."""
    from .saddle import max_sigma_q

    rho = density_matrix(rho)
    if rho.shape[0] != ch.dim_in:
        raise ShapeError(f"rho has dim {rho.shape[0]}, channel dim_in={ch.dim_in}")
    res = max_sigma_q(rho, QFunction.from_channel(ch), cfg)
    if not res.converged and res.fw_gap > 1e-6:
        raise ConvergenceError(
            f"sigma maximization stopped at q^2 = {res.value:.10g} with Frank-Wolfe gap {res.fw_gap:.3e}", res
        )
    return max(-np.log(res.value), 0.0)


@dataclass
class CapacityResult:
    value: float
    rho: np.ndarray
    gap: float
    iterations: int
    converged: bool


def _ea_objective(ch: KrausChannel, comp: KrausChannel, rho_in: np.ndarray):
    out, env = apply_channel(ch, rho_in), apply_channel(comp, rho_in)
    val = von_neumann_entropy(rho_in) + von_neumann_entropy(out) - von_neumann_entropy(env)
    grad = -psd_log(rho_in) - ch.adjoint(psd_log(out)) + comp.adjoint(psd_log(env))
    return val, hermitize(grad)


def _expm_h(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(hermitize(H))
    w = np.exp(w - w.max())
    X = (V * w) @ V.conj().T
    return hermitize(X / np.trace(X).real)


def _ea_ascent(ch, comp, rho_in, tol, max_iters):
    """Entropic mirror ascent (Blahut-Arimoto type) with a Frank-Wolfe certificate."""
    val, grad = _ea_objective(ch, comp, rho_in)
    eta, gap, it = 0.5, np.inf, 0
    for it in range(1, max_iters + 1):
        gap = float(np.linalg.eigvalsh(grad)[-1] - np.trace(rho_in @ grad).real)
        if gap <= tol:
            break
        log_rho = psd_log(rho_in, floor=0.0)
        while True:
            cand = _expm_h(log_rho + eta * grad)
            cval, cgrad = _ea_objective(ch, comp, cand)
            if cval >= val or eta < 1e-12:
                break
            eta *= 0.5
        if cval < val:
            break
        rho_in, val, grad = cand, cval, cgrad
        eta = min(2 * eta, 1.0)
    return val, rho_in, gap, it


def capacity_ea(ch: KrausChannel, cfg=None, strict: bool = True) -> CapacityResult:
    """Entanglement-assisted capacity ``max_rho I(X:Y)`` (nats).

    The objective is concave, so a point whose Frank-Wolfe gap
    ``lambda_max(grad) - tr(rho grad)`` is below the tolerance is certified
    optimal to that accuracy. Further random starts are tried only when the
    maximally mixed start fails to certify.
    """
    from .saddle import SolverConfig

    cfg = cfg or SolverConfig()
    comp = complementary(ch)
    d = ch.dim_in
    rng = np.random.default_rng(cfg.seed)
    best = None
    for k in range(max(1, cfg.restarts)):
        if k == 0:
            start = np.eye(d, dtype=complex) / d
        else:
            from .numkernel import random_density_matrix

            start = 0.5 * random_density_matrix(d, rng) + 0.5 * np.eye(d) / d
        val, rho_in, gap, it = _ea_ascent(ch, comp, start, cfg.capacity_tol, cfg.max_iters)
        if best is None or val > best.value:
            best = CapacityResult(max(val, 0.0), rho_in.T.copy(), gap, it, gap <= cfg.capacity_tol)
        if best.converged:
            break
    if strict and not best.converged:
        raise ConvergenceError(
            f"capacity ascent did not certify: best value {best.value:.10g}, "
            f"Frank-Wolfe gap {best.gap:.3e}", best
        )
    return best


@dataclass
class RenyiCapacityResult:
    value: float
    rho: np.ndarray
    sigma: np.ndarray
    saddle: object

    @property
    def converged(self) -> bool:
        return self.saddle.converged


def capacity_renyi_half(ch: KrausChannel, cfg=None, strict: bool = True) -> RenyiCapacityResult:
    """Renyi-1/2 entanglement-assisted capacity ``-log min_rho max_sigma q^2``.

    The value is taken from the rho-outer route of the saddle certificate;
    the sigma-outer route of the same saddle gives ``max_sigma F_diamond``.
    """
    from .saddle import saddle_max_sigma_min_rho

    res = saddle_max_sigma_min_rho(kraus_to_choi(ch), ch.dim_in, ch.dim_out, cfg)
    value = max(-np.log(res.value_minmax), 0.0)
    out = RenyiCapacityResult(value, res.rho_star, res.sigma_star, res)
    if strict and not res.converged:
        raise ConvergenceError(
            f"saddle gap {res.gap:.3e} above tolerance: max-min route {res.value:.10g}, "
            f"min-max route {res.value_minmax:.10g}", out
        )
    return out
