"""Optimization engines over density matrices and channels.

* :func:`min_rho_q` / :func:`max_sigma_q` solve the two one-sided problems of
  the q-function (convex in rho, concave in sigma) by projected gradient with
  Armijo backtracking. Both report a Frank-Wolfe gap, which bounds the
  distance to the optimum for convex/concave objectives.
* :func:`saddle_max_sigma_min_rho` finds the saddle point by projected
  extragradient and certifies it with the two one-sided problems.
* :func:`optimize_recovery` maximizes the worst-case entanglement fidelity of
  ``R o N`` over recovery channels ``R``. The fidelity is linear in the Choi
  matrix of ``R`` and convex in the input state, so the recovery/input
  alternation is run as a simultaneous extragradient on both.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import (
    KrausChannel,
    apply_channel,
    choi_to_kraus,
    compose,
    kraus_to_choi,
    minimal_kraus,
    unvec,
)
from .divergences import QFunction
from .numkernel import (
    NumericalError,
    density_project,
    hermitian_eig,
    hermitize,
    max_entangled,
    partial_trace,
    psd_power,
    purify,
)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    tol: float = 1e-6
    restarts: int = 16
    step_init: float = 0.1
    seed: int = 42
    seesaw_tol: float = 1e-3
    inner_tol: float = 1e-10
    inner_max_iters: int = 3000
    capacity_tol: float = 1e-7
    dykstra_tol: float = 1e-9

    def __post_init__(self):
        if self.tol <= 0 or self.seesaw_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = SolverConfig()


@dataclass
class InnerResult:
    """One-sided optimum. ``value`` is on the fidelity scale (``q**2``)."""

    q: float
    state: np.ndarray
    fw_gap: float
    iterations: int
    converged: bool

    @property
    def value(self) -> float:
        return self.q**2


@dataclass
class SaddleResult:
    """Saddle point of ``q`` with both one-sided values.

    ``value`` is the sigma-outer route ``min_rho q(rho, sigma_star)^2`` and
    ``value_minmax`` the rho-outer route ``max_sigma q(rho_star, sigma)^2``.
    """

    value: float
    value_minmax: float
    rho_star: np.ndarray
    sigma_star: np.ndarray
    gap: float
    certified_gap: float
    iterations: int
    converged: bool

    @property
    def q_maxmin(self) -> float:
        return float(np.sqrt(self.value))

    @property
    def q_minmax(self) -> float:
        return float(np.sqrt(self.value_minmax))


def _projected_gradient(fg, x0, maximize, tol, max_iters):
    """Armijo projected gradient over density matrices.

    ``fg(x)`` returns ``(f, grad)``. Returns ``(x, f, fw_gap, iterations)``.
    """
    sign = 1.0 if maximize else -1.0
    x = x0
    f, g = fg(x)
    eta, fw, it = 1.0, np.inf, 0
    stall = 0
    for it in range(1, max_iters + 1):
        w = np.linalg.eigvalsh(g)
        fw = (w[-1] - np.trace(x @ g).real) if maximize else (np.trace(x @ g).real - w[0])
        if fw <= tol:
            break
        while True:
            new = density_project(x + sign * eta * g)
            fn, gn = fg(new)
            d = new - x
            model = np.trace(g @ d).real * sign - np.vdot(d, d).real / (2 * eta)
            if sign * (fn - f) >= model - 1e-15 or eta < 1e-14:
                break
            eta *= 0.5
        improved = sign * (fn - f) > 1e-15 * max(1.0, abs(f))
        stall = 0 if improved else stall + 1
        x, f, g = new, fn, gn
        if stall >= 25:
            break
        eta *= 1.5
    return x, f, fw, it


def _max_sigma(qf: QFunction, rho, sig_c, tol, max_iters):
    return _projected_gradient(
        lambda s: (lambda v: (v[0], v[2]))(qf.value_and_grads(rho, s)),
        sig_c, True, tol, max_iters,
    )


def _min_rho(qf: QFunction, sig_c, rho, tol, max_iters):
    return _projected_gradient(
        lambda r: qf.value_and_grads(r, sig_c)[:2],
        rho, False, tol, max_iters,
    )


def max_sigma_q(rho: np.ndarray, qf: QFunction, cfg: SolverConfig | None = None,
                start: np.ndarray | None = None) -> InnerResult:
    """``max_sigma q(rho, sigma)`` over density matrices on the channel output."""
    cfg = cfg or DEFAULT_CONFIG
    sig0 = qf.output_state(rho) if start is None else density_project(qf.compress(start))
    s, q, fw, it = _max_sigma(qf, rho, sig0, cfg.inner_tol, cfg.inner_max_iters)
    return InnerResult(float(q), qf.lift(s), float(fw), it, bool(fw <= cfg.inner_tol))


def min_rho_q(sigma: np.ndarray, qf: QFunction, cfg: SolverConfig | None = None,
              start: np.ndarray | None = None) -> InnerResult:
    """``min_rho q(rho, sigma)``; its square is ``F_diamond(N, V_sigma)``."""
    cfg = cfg or DEFAULT_CONFIG
    rho0 = np.eye(qf.dim_in, dtype=complex) / qf.dim_in if start is None else start
    r, q, fw, it = _min_rho(qf, qf.compress(sigma), rho0, cfg.inner_tol, cfg.inner_max_iters)
    return InnerResult(float(q), r, float(fw), it, bool(fw <= cfg.inner_tol))


def _certify(qf, rho, sig_c, cfg):
    rho_br, lo, fw_lo, _ = _min_rho(qf, sig_c, rho, cfg.inner_tol, cfg.inner_max_iters)
    sig_br, hi, fw_hi, _ = _max_sigma(qf, rho, sig_c, cfg.inner_tol, cfg.inner_max_iters)
    lo_cert = max(lo - max(fw_lo, 0.0), 0.0)
    return lo, hi, hi**2 - lo**2, (hi + max(fw_hi, 0.0)) ** 2 - lo_cert**2


def saddle_max_sigma_min_rho(J: np.ndarray, dim_in: int, dim_out: int,
                             cfg: SolverConfig | None = None) -> SaddleResult:
    """Saddle point of the q-function by projected extragradient.

    Runs extragradient (descent in rho, ascent in sigma, both projected onto
    density matrices) until the fixed-point residual is small, then certifies
    the last iterate and the running average of the latest half of the
    iterates. The better-certified point is returned. If the gap
    ``max_sigma q(rho*, .)^2 - min_rho q(., sigma*)^2`` exceeds ``cfg.tol``,
    the step is halved and the iteration continues until ``max_iters``.
    """
    cfg = cfg or DEFAULT_CONFIG
    qf = QFunction(J, dim_in, dim_out)
    rho = np.eye(dim_in, dtype=complex) / dim_in
    sig = qf.output_state(rho)
    eta = cfg.step_init
    res_tol = max(cfg.tol * 1e-3, 1e-12)

    best = None
    avg_r, avg_s, n_avg, epoch = np.zeros_like(rho), np.zeros_like(sig), 0, 1
    window_start_res, window_iter = np.inf, 0
    k = 0
    while k < cfg.max_iters:
        k += 1
        _, gr, gs = qf.value_and_grads(rho, sig)
        rh = density_project(rho - eta * gr)
        sh = density_project(sig + eta * gs)
        _, gr, gs = qf.value_and_grads(rh, sh)
        rn = density_project(rho - eta * gr)
        sn = density_project(sig + eta * gs)
        res = np.sqrt(np.vdot(rn - rho, rn - rho).real + np.vdot(sn - sig, sn - sig).real) / eta
        rho, sig = rn, sn

        if k >= 2 * epoch:  # restart the average so it covers the latest half
            avg_r, avg_s, n_avg, epoch = np.zeros_like(rho), np.zeros_like(sig), 0, k
        avg_r, avg_s, n_avg = avg_r + rho, avg_s + sig, n_avg + 1

        if k - window_iter >= 500:
            if res > 0.5 * window_start_res:
                eta *= 0.5
            window_start_res, window_iter = res, k

        if res < res_tol or k == cfg.max_iters:
            cands = [(rho, sig), (hermitize(avg_r / n_avg), hermitize(avg_s / n_avg))]
            for r_c, s_c in cands:
                lo, hi, gap, cgap = _certify(qf, r_c, s_c, cfg)
                if best is None or gap < best[2]:
                    best = (lo, hi, gap, cgap, r_c, s_c)
            if best[2] <= cfg.tol:
                break
            eta *= 0.5
            res_tol *= 0.1

    lo, hi, gap, cgap, r_c, s_c = best
    return SaddleResult(
        value=lo**2,
        value_minmax=hi**2,
        rho_star=r_c,
        sigma_star=qf.lift(s_c),
        gap=gap,
        certified_gap=cgap,
        iterations=k,
        converged=bool(abs(gap) <= cfg.tol),
    )


# -- CPTP projection ---------------------------------------------------------


def _tp_residual(J, dim_in, dim_out):
    return np.max(np.abs(partial_trace(J, [dim_in, dim_out], [0]) - np.eye(dim_in)))


def _project_affine_tp(J, dim_in, dim_out):
    T = partial_trace(J, [dim_in, dim_out], [0]) - np.eye(dim_in)
    return J - np.kron(T, np.eye(dim_out)) / dim_out


def _project_psd(J):
    w, V = hermitian_eig(J)
    return (V * np.clip(w, 0.0, None)) @ V.conj().T


def dykstra_cptp_project(X: np.ndarray, dim_in: int, dim_out: int,
                         tol: float = 1e-9, max_iters: int = 20000) -> np.ndarray:
    """Frobenius projection onto Choi matrices of CPTP maps.

    Dykstra's alternating projections between the PSD cone and the affine set
    ``tr_out J = I``. Stops when the PSD and trace residuals are both below
    ``tol``; raises :class:`NumericalError` at the iteration cap.
    """
    x = _project_affine_tp(hermitize(X), dim_in, dim_out)
    p = np.zeros_like(x)
    for _ in range(max_iters):
        w = np.linalg.eigvalsh(x)
        if w[0] >= -tol:
            return x
        y = _project_psd(x + p)
        p = x + p - y
        x = _project_affine_tp(y, dim_in, dim_out)
    w0 = np.linalg.eigvalsh(x)[0]
    raise NumericalError(
        f"Dykstra projection did not converge: min eigenvalue {w0:.3e}, "
        f"trace residual {_tp_residual(x, dim_in, dim_out):.3e}"
    )


# -- worst-case inputs and recovery ------------------------------------------


@dataclass
class WorstCaseResult:
    fidelity: float
    psi: np.ndarray
    rho: np.ndarray
    fw_gap: float


def _ent_fid_and_grad(Jl: np.ndarray, rho_in: np.ndarray):
    """Entanglement fidelity ``<<rho|J|rho>>`` of a d->d channel and its gradient."""
    d = rho_in.shape[0]
    v = rho_in.T.reshape(-1)
    Jv = Jl @ v
    f = float(np.vdot(v, Jv).real)
    W = unvec(Jv, d, d)
    return f, hermitize(W + W.conj().T)


def _worst_case(Jl, d, cfg, starts):
    best = None
    for r0 in starts:
        x, f, fw, _ = _projected_gradient(
            lambda r: _ent_fid_and_grad(Jl, r), r0, False, cfg.inner_tol, cfg.inner_max_iters
        )
        if best is None or f < best[1]:
            best = (x, f, fw)
    return best


def worst_case_input(F: KrausChannel, cfg: SolverConfig | None = None) -> WorstCaseResult:
    """``F_diamond(F, id) = min_psi <psi|(1 x F)(psi)|psi>``.

    The objective only depends on the channel-input marginal of ``psi`` and
    is a convex quadratic in it, so the minimum is found by projected
    gradient over density matrices. Starts: the maximally mixed state (the
    maximally entangled ``psi``) and a few random states.
    """
    cfg = cfg or DEFAULT_CONFIG
    if F.dim_in != F.dim_out:
        raise ValueError("worst_case_input needs a channel with dim_in == dim_out")
    d = F.dim_in
    Jl = kraus_to_choi(F)
    rng = np.random.default_rng(cfg.seed)
    from .numkernel import random_density_matrix

    starts = [np.eye(d, dtype=complex) / d]
    starts += [random_density_matrix(d, rng) for _ in range(min(cfg.restarts, 4) - 1)]
    x, f, fw = _worst_case(Jl, d, cfg, starts)
    # reference marginal is the transpose of the channel input
    return WorstCaseResult(f, purify(x.T), x, fw)


def _stabilized_trace_distance(kraus: np.ndarray, psi: np.ndarray):
    d = kraus.shape[2]
    ops = np.einsum("ij,kab->kiajb", np.eye(d), kraus).reshape(kraus.shape[0], d * d, d * d)
    outs = ops @ psi
    delta = np.outer(psi, psi.conj()) - outs.T @ outs.conj()
    w, V = np.linalg.eigh(hermitize(delta))
    S = (V * np.sign(w)) @ V.conj().T
    val = 0.5 * float(np.sum(np.abs(w)))
    grad = S @ psi - np.einsum("kba,bc,kcd,d->a", ops.conj(), S, ops, psi)
    return val, grad


def diamond_lower_estimate(F: KrausChannel, cfg: SolverConfig | None = None,
                           extra_starts=()) -> tuple[float, np.ndarray]:
    """Heuristic lower estimate of ``D_diamond(F, id)``.

    Gradient ascent of ``1/2 ||psi psi^† - (1 x F)(psi psi^†)||_1`` over unit
    vectors ``psi`` (reference first), restarted from the maximally entangled
    state, any ``extra_starts`` and random vectors. Every returned value is
    attained, so it never exceeds the true diamond distance.
    """
    cfg = cfg or DEFAULT_CONFIG
    F = minimal_kraus(F)
    d = F.dim_in
    rng = np.random.default_rng(cfg.seed + 1)
    starts = [max_entangled(d)] + [np.asarray(s, dtype=complex) for s in extra_starts]
    for _ in range(max(cfg.restarts - len(starts), 0)):
        v = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
        starts.append(v / np.linalg.norm(v))
    best_val, best_psi = -1.0, None
    for psi in starts:
        psi = psi / np.linalg.norm(psi)
        val, g = _stabilized_trace_distance(F.kraus, psi)
        eta = 0.5
        for _ in range(300):
            cand = psi + eta * (g - np.vdot(psi, g) * psi)
            cand /= np.linalg.norm(cand)
            cval, cg = _stabilized_trace_distance(F.kraus, cand)
            if cval > val + 1e-14:
                psi, val, g = cand, cval, cg
                eta = min(eta * 1.5, 2.0)
            else:
                eta *= 0.5
                if eta < 1e-8:
                    break
        if val > best_val:
            best_val, best_psi = val, psi
    return best_val, best_psi


@dataclass
class RecoveryResult:
    fidelity: float
    recovery: KrausChannel
    psi_worst: np.ndarray
    rho_worst: np.ndarray
    baseline: float
    iterations: int
    converged: bool


def petz_recovery(N: KrausChannel) -> KrausChannel:
    """Transpose (Petz) recovery for the maximally mixed input, completed to be TP."""
    q, m = N.dim_in, N.dim_out
    tau = np.eye(q) / q
    out = apply_channel(N, tau)
    inv_sqrt = psd_power(out, -0.5, floor=1e-12)
    ops = [np.sqrt(tau) @ K.conj().T @ inv_sqrt for K in N.kraus]
    w, V = hermitian_eig(out)
    ker = V[:, w <= 1e-12]
    for b in range(ker.shape[1]):
        for a in range(q):
            E = np.zeros((q, m), dtype=complex)
            E[a] = ker[:, b].conj() / np.sqrt(q)
            ops.append(E)
    return minimal_kraus(KrausChannel(np.array(ops)))


def _recovery_objective(Nk: np.ndarray, JR: np.ndarray, rho_in: np.ndarray):
    """Entanglement fidelity of ``R o N`` at input ``rho_in`` with gradients.

    ``f = tr(J_R Omega(rho))`` with ``Omega = sum_k |rho N_k^†>><<rho N_k^†|``.
    """
    r, m, q = Nk.shape
    X = (Nk.conj() @ rho_in.T).reshape(r, m * q)  # rows are |rho N_k^†>>
    Omega = X.T @ X.conj()
    Y = X @ JR.T
    f = float(np.vdot(X.T, (JR @ X.T)).real) if r else 0.0
    W = Y.reshape(r, m, q).transpose(0, 2, 1)  # unvec(J_R x_k), shape (r, q, m)
    Z = (W @ Nk).sum(axis=0)
    return f, Omega, hermitize(Z + Z.conj().T)


def _evaluate_recovery(N: KrausChannel, R: KrausChannel, cfg, rho_hint=None):
    Jl = kraus_to_choi(compose(R, N))
    q = N.dim_in
    starts = [np.eye(q, dtype=complex) / q]
    if rho_hint is not None:
        starts.append(rho_hint)
    x, f, _ = _worst_case(Jl, q, cfg, starts)
    return f, x


def optimize_recovery(N: KrausChannel, cfg: SolverConfig | None = None) -> RecoveryResult:
    """``max_R F_diamond(R o N, id)`` for a channel ``N`` out of a ``q``-dim system.

    Recovery/input alternation as a simultaneous extragradient: ascent on the
    recovery Choi matrix (projected onto CPTP maps with Dykstra) and descent
    on the input state (projected onto density matrices). The step adapts by
    backtracking on the local Lipschitz test of the extrapolation step. It
    starts from the Petz recovery and stops once the fixed-point residual
    drops below ``cfg.seesaw_tol * 1e-4``. The returned fidelity is the exact worst case
    of the final recovery, so it is attained. The best constant recovery
    (fidelity ``1/q^2``) is kept as a floor.
    """
    cfg = cfg or DEFAULT_CONFIG
    q, m = N.dim_in, N.dim_out
    N = minimal_kraus(N)
    Nk = N.kraus

    baseline_R = KrausChannel(
        np.array([np.outer(np.eye(q)[a], np.eye(m)[b]) / np.sqrt(q) for a in range(q) for b in range(m)])
    )
    baseline = 1.0 / q**2

    R = petz_recovery(N)
    JR = kraus_to_choi(R)
    f_start, rho = _evaluate_recovery(N, R, cfg)
    best = (f_start, JR, rho)

    eta = 1.0
    res_tol = cfg.seesaw_tol * 1e-4
    it = 0
    converged = f_start >= 1 - 1e-12
    check_every = 50

    def dist(dJ, dr):
        return np.sqrt(np.vdot(dJ, dJ).real + np.vdot(dr, dr).real)

    while not converged and it < cfg.max_iters:
        it += 1
        _, Om0, g0 = _recovery_objective(Nk, JR, rho)
        # backtrack until the extrapolation step satisfies the local Lipschitz test
        while True:
            Jh = dykstra_cptp_project(JR + eta * Om0, m, q, tol=cfg.dykstra_tol)
            rh = density_project(rho - eta * g0)
            _, Om1, g1 = _recovery_objective(Nk, Jh, rh)
            if eta * dist(Om1 - Om0, g1 - g0) <= 0.9 * dist(Jh - JR, rh - rho) or eta < 1e-10:
                break
            eta *= 0.5
        Jn = dykstra_cptp_project(JR + eta * Om1, m, q, tol=cfg.dykstra_tol)
        rn = density_project(rho - eta * g1)
        res = dist(Jn - JR, rn - rho) / eta
        JR, rho = Jn, rn
        eta *= 1.2
        if it % check_every == 0 or res < res_tol:
            Rk = choi_to_kraus(JR, m, q)
            f, rho_w = _evaluate_recovery(N, Rk, cfg, rho)
            if f > best[0]:
                best = (f, JR, rho_w)
            converged = bool(res < res_tol)

    f, JR, _ = best
    R = choi_to_kraus(JR, m, q)
    if f < baseline:
        R, f = baseline_R, _evaluate_recovery(N, baseline_R, cfg)[0]
    f, rho_w = _evaluate_recovery(N, R, cfg)
    return RecoveryResult(
        fidelity=f,
        recovery=R,
        psi_worst=purify(rho_w.T),
        rho_worst=rho_w,
        baseline=baseline,
        iterations=it,
        converged=converged,
    )
