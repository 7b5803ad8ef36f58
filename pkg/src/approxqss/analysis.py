"""Secrecy, reconstructability and adversary strength of a scheme under attack.

For every authorized set ``A`` the pipeline computes

* ``secrecy_fid = max_sigma F_diamond(N^_A, V_sigma)`` from the saddle point
  of the q-function of the complement (sigma-outer route),
* ``ctilde = -log min_rho max_sigma q^2`` from the same saddle (rho-outer
  route) and ``c_ea``, the entanglement-assisted capacity of ``N^_A``,
* ``recon_fid_primal = max_R F_diamond(R o N_A, id)`` by optimizing over
  recovery channels directly.

The dual and primal reconstruction fidelities must agree, and
``secrecy_fid = exp(-ctilde)``; the residuals of both identities are reported
per set. Aggregates follow the max/min structure over sets:
``epsilon = 1 - min_A secrecy_fid``, ``C = max_A c_ea``,
``Ctilde = max_A ctilde``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .channels import KrausChannel, compose
from .divergences import capacity_ea, capacity_renyi_half
from .numkernel import NumericalError
from .qss import (
    AttackModel,
    AuthorizedSet,
    ThresholdScheme,
    all_authorized_sets,
    effective_channels,
    min_authorized_sets,
)
from .saddle import (
    DEFAULT_CONFIG,
    SolverConfig,
    diamond_lower_estimate,
    optimize_recovery,
    worst_case_input,
)

ROUTE_TOL = 2e-5
DUALITY_TOL = 5e-3


@dataclass
class SetReport:
    A: AuthorizedSet
    secrecy_fid: float
    ctilde: float
    c_ea: float
    recon_fid_dual: float
    recon_fid_primal: float | None
    primal_dual_gap: float | None
    diamond_lower: float
    diamond_upper: float
    diamond_estimate: float | None = None
    route_residual: float = 0.0
    saddle_converged: bool = True
    capacity_converged: bool = True
    recovery_converged: bool = True
    failure: str | None = None
    recovery: KrausChannel | None = field(default=None, repr=False, compare=False)

    @property
    def converged(self) -> bool:
        return (
            self.failure is None
            and self.saddle_converged
            and self.capacity_converged
            and self.recovery_converged
        )

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "recovery"}
        d["A"] = list(self.A.members)
        d["converged"] = self.converged
        return d


@dataclass
class AnalysisReport:
    scheme: dict
    attack: dict
    sets: list[SetReport]
    epsilon_secrecy: float
    epsilon_recon: float
    epsilon_recon_primal: float | None
    strength_C: float
    strength_Ctilde: float
    delta_bounds: tuple[float, float]
    diamond_estimate: float | None
    duality_residuals: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.sets)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "attack": self.attack,
            "sets": [s.to_dict() for s in self.sets],
            "epsilon_secrecy": self.epsilon_secrecy,
            "epsilon_recon": self.epsilon_recon,
            "epsilon_recon_primal": self.epsilon_recon_primal,
            "strength_C": self.strength_C,
            "strength_Ctilde": self.strength_Ctilde,
            "delta_bounds": list(self.delta_bounds),
            "diamond_estimate": self.diamond_estimate,
            "duality_residuals": self.duality_residuals,
            "converged": self.converged,
        }


def diamond_bounds(eps_fid: float, C: float) -> tuple[float, float]:
    """Bracket the diamond-distance reconstruction error ``delta``.

    ``1 - F <= D <= sqrt(1 - F)`` for every recovery gives
    ``eps_fid <= delta <= sqrt(eps_fid)``, and the capacity bound caps the
    upper end at ``sqrt(1 - exp(-C))``. ``C`` may be ``math.inf``. The two
    inputs usually come from different solvers, so a lower end that exceeds
    the upper end by float noise (1e-9) is clipped to it.
    """
    eps_fid, C = float(eps_fid), float(C)
    if not (0.0 <= eps_fid <= 1.0):
        raise ValueError(f"eps_fid must lie in [0, 1], got {eps_fid}")
    if not C >= 0.0:
        raise ValueError(f"C must be nonnegative, got {C}")
    upper = min(math.sqrt(eps_fid), math.sqrt(-math.expm1(-C)))
    lower = upper if upper < eps_fid <= upper + 1e-9 else eps_fid
    return lower, upper


def _clip01(x: float) -> float:
    return min(max(float(x), 0.0), 1.0)


def _resolve_sets(scheme: ThresholdScheme, sets) -> list[AuthorizedSet]:
    if sets is None or sets == "minimal":
        return min_authorized_sets(scheme)
    if sets == "all":
        return all_authorized_sets(scheme)
    return [s if isinstance(s, AuthorizedSet) else AuthorizedSet(tuple(s)) for s in sets]


def analyze_set(scheme: ThresholdScheme, attack: AttackModel, A: AuthorizedSet,
                cfg: SolverConfig | None = None, primal: bool = True,
                capacity: bool = True) -> SetReport:
    """All per-set quantities. Solver failures are recorded, not raised."""
    cfg = cfg or DEFAULT_CONFIG
    ch = effective_channels(scheme, attack, A)
    try:
        ren = capacity_renyi_half(ch.complement, cfg, strict=False)
    except NumericalError as exc:
        return SetReport(A, math.nan, math.nan, math.nan, math.nan, None, None,
                         math.nan, math.nan, failure=f"saddle: {exc}", saddle_converged=False)
    sad = ren.saddle
    fid = _clip01(sad.value)
    rep = SetReport(
        A=A,
        secrecy_fid=fid,
        ctilde=ren.value,
        c_ea=math.nan,
        recon_fid_dual=fid,
        recon_fid_primal=None,
        primal_dual_gap=None,
        diamond_lower=math.nan,
        diamond_upper=math.nan,
        route_residual=abs(sad.value - math.exp(-ren.value)),
        saddle_converged=sad.converged,
    )
    c_cap = math.inf
    if capacity:
        try:
            cap = capacity_ea(ch.complement, cfg, strict=False)
            rep.c_ea, rep.capacity_converged = cap.value, cap.converged
            c_cap = cap.value
        except NumericalError as exc:
            rep.failure, rep.capacity_converged = f"capacity: {exc}", False
    rep.diamond_lower, rep.diamond_upper = diamond_bounds(1.0 - fid, c_cap)
    if primal:
        try:
            rec = optimize_recovery(ch.forward, cfg)
            rep.recon_fid_primal = rec.fidelity
            rep.recovery = rec.recovery
            rep.primal_dual_gap = abs(fid - rec.fidelity)
            rep.recovery_converged = rec.converged
            est, _ = diamond_lower_estimate(
                compose(rec.recovery, ch.forward), cfg, extra_starts=[rec.psi_worst]
            )
            rep.diamond_estimate = est
        except NumericalError as exc:
            rep.failure, rep.recovery_converged = f"recovery: {exc}", False
    return rep


def _per_set(scheme, attack, sets, cfg, primal=False, capacity=False):
    return [analyze_set(scheme, attack, A, cfg, primal, capacity) for A in _resolve_sets(scheme, sets)]


def secrecy_epsilon(scheme, attack, sets=None, cfg=None):
    """``epsilon = 1 - min_A max_sigma F_diamond(N^_A, V_sigma)`` and per-set fidelities."""
    reps = _per_set(scheme, attack, sets, cfg)
    return 1.0 - min(r.secrecy_fid for r in reps), {r.A: r.secrecy_fid for r in reps}


def reconstructability_dual(scheme, attack, sets=None, cfg=None):
    """Reconstruction error in fidelity from the secrecy side of the duality.

    Same computation as :func:`secrecy_epsilon`; by the duality between
    recovery and leakage the two quantities coincide.
    """
    return secrecy_epsilon(scheme, attack, sets, cfg)


@dataclass
class PrimalRecon:
    epsilon: float
    fidelities: dict
    gaps: dict
    converged: dict


def reconstructability_primal(scheme, attack, sets=None, cfg=None) -> PrimalRecon:
    """``1 - min_A max_R F_diamond(R o N_A, id)`` by direct recovery optimization.

    ``gaps`` holds ``|primal - dual|`` per set.
    """
    reps = _per_set(scheme, attack, sets, cfg, primal=True)
    return PrimalRecon(
        1.0 - min(r.recon_fid_primal for r in reps),
        {r.A: r.recon_fid_primal for r in reps},
        {r.A: r.primal_dual_gap for r in reps},
        {r.A: r.recovery_converged for r in reps},
    )


def adversary_strength(scheme, attack, sets=None, cfg=None):
    """``(C, Ctilde, per-set (c_ea, ctilde))`` with maxima over the sets."""
    reps = _per_set(scheme, attack, sets, cfg, capacity=True)
    C = max(r.c_ea for r in reps)
    Ct = max(r.ctilde for r in reps)
    if C < Ct - 1e-4:
        raise NumericalError(f"capacity ordering violated: C = {C:.8g} < Ctilde = {Ct:.8g}")
    return C, Ct, {r.A: (r.c_ea, r.ctilde) for r in reps}


def scheme_descriptor(scheme: ThresholdScheme) -> dict:
    return {
        "name": scheme.name,
        "t": scheme.t,
        "n": scheme.n,
        "secret_dim": scheme.secret_dim,
        "share_dim": scheme.share_dim,
    }


def attack_descriptor(attack: AttackModel) -> dict:
    return {"label": attack.label, "parameters": dict(attack.parameters)}


def _duality_residuals(reps, C, Ct, eps):
    primal = [r.primal_dual_gap for r in reps if r.primal_dual_gap is not None]
    return {
        "route_max": max(r.route_residual for r in reps),
        "duality_max": max(primal) if primal else None,
        "secrecy_vs_ctilde": abs(math.exp(-Ct) - (1.0 - eps)),
    }


def analyze(scheme: ThresholdScheme, attack: AttackModel, sets=None,
            cfg: SolverConfig | None = None, primal: bool = True) -> AnalysisReport:
    """Full per-set analysis and the aggregated report.

    ``sets`` is ``"minimal"`` (default), ``"all"`` or an explicit list.
    """
    cfg = cfg or DEFAULT_CONFIG
    reps = _per_set(scheme, attack, sets, cfg, primal=primal, capacity=True)
    ok = [r for r in reps if not math.isnan(r.secrecy_fid)]
    if not ok:
        raise NumericalError("every authorized set failed: " + "; ".join(str(r.failure) for r in reps))
    eps = 1.0 - min(r.secrecy_fid for r in ok)
    caps = [r.c_ea for r in ok if not math.isnan(r.c_ea)]
    C = max(caps) if len(caps) == len(ok) else math.inf
    Ct = max(r.ctilde for r in ok)
    eps_primal = None
    ests = None
    if primal and all(r.recon_fid_primal is not None and r.diamond_estimate is not None for r in ok):
        eps_primal = 1.0 - min(r.recon_fid_primal for r in ok)
        ests = max(r.diamond_estimate for r in ok)
    return AnalysisReport(
        scheme=scheme_descriptor(scheme),
        attack=attack_descriptor(attack),
        sets=reps,
        epsilon_secrecy=eps,
        epsilon_recon=eps,
        epsilon_recon_primal=eps_primal,
        strength_C=C,
        strength_Ctilde=Ct,
        delta_bounds=diamond_bounds(_clip01(eps), C),
        diamond_estimate=ests,
        duality_residuals=_duality_residuals(reps, C, Ct, eps),
    )


@dataclass
class DualityRow:
    A: AuthorizedSet
    exp_neg_ctilde: float
    secrecy_fid: float
    primal_fid: float | None
    route_residual: float
    duality_residual: float | None
    passed: bool
    failure: str | None = None
    fvg: FvGReport | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["A"] = list(self.A.members)
        d["fvg"] = self.fvg.to_dict() if self.fvg is not None else None
        return d


@dataclass
class DualityReport:
    rows: list[DualityRow]
    route_tol: float
    duality_tol: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "route_tol": self.route_tol,
            "duality_tol": self.duality_tol,
            "passed": self.passed,
        }


def verify_duality(scheme: ThresholdScheme, attack: AttackModel, cfg: SolverConfig | None = None,
                   sets=None, route_tol: float = ROUTE_TOL,
                   duality_tol: float = DUALITY_TOL, fvg: bool = False) -> DualityReport:
    """Per-set check of the leakage/recovery equivalence.

    For each set: (a) ``exp(-Ctilde_A)`` from the rho-outer route, (b) the
    sigma-outer value ``max_sigma F_diamond(N^_A, V_sigma)`` and (c) the
    directly optimized recovery fidelity. Reports ``|a - b|`` against
    ``route_tol`` and ``|b - c|`` against ``duality_tol``. With ``fvg`` the
    recovered channel ``R o N_A`` also goes through :func:`fvg_channel_check`.
    """
    rows = []
    for rep in _per_set(scheme, attack, sets, cfg, primal=True, capacity=False):
        a = math.exp(-rep.ctilde) if not math.isnan(rep.ctilde) else math.nan
        passed = (
            rep.failure is None
            and rep.route_residual <= route_tol
            and rep.primal_dual_gap is not None
            and rep.primal_dual_gap <= duality_tol
        )
        chk = None
        if fvg and rep.recovery is not None:
            forward = effective_channels(scheme, attack, rep.A).forward
            chk = fvg_channel_check(compose(rep.recovery, forward), cfg)
            passed = passed and chk.passed
        rows.append(DualityRow(rep.A, a, rep.secrecy_fid, rep.recon_fid_primal,
                               rep.route_residual, rep.primal_dual_gap, passed, rep.failure, chk))
    return DualityReport(rows, route_tol, duality_tol)


@dataclass
class FvGReport:
    fidelity: float
    distance: float
    lower_ok: bool
    upper_ok: bool
    note: str = (
        "fidelity is a certified minimum over inputs and distance an attained "
        "value, so 1 - D <= F holds at the fidelity-optimal input and "
        "F <= 1 - D^2 at the distance-optimal one; a violation signals a bug"
    )

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def fvg_channel_check(F: KrausChannel, cfg: SolverConfig | None = None, tol: float = 1e-6) -> FvGReport:
    """Check ``1 - D <= F_diamond <= 1 - D^2`` for a channel against the identity."""
    cfg = cfg or DEFAULT_CONFIG
    wc = worst_case_input(F, cfg)
    D, _ = diamond_lower_estimate(F, cfg, extra_starts=[wc.psi])
    f = wc.fidelity
    return FvGReport(f, D, 1.0 - D <= f + tol, f <= 1.0 - D * D + tol)
