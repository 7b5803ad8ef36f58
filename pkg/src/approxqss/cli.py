"""Command-line front end.

Scenario files are JSON with top-level keys ``scheme``, ``attack``, and the
optional ``solver`` and ``sets``. Complex matrix entries are ``[re, im]``
pairs (plain numbers are read as real), matrices are row-major.

::

    {"scheme": "cgl23",
     "attack": {"family": "depolarizing", "p": 0.5, "shares": [1]},
     "solver": {"seed": 7},
     "sets": "minimal"}

``scheme`` is a builtin name or
``{"t", "n", "secret_dim", "share_dim", "encoder": <d^n x q matrix>}``.
``attack`` is ``{"family", "p", "shares"}``, ``{"kraus": [<matrix>, ...]}``
acting on all shares, or ``{"per_share": [<attack on one share>, ...]}``.

Exit codes: 0 converged / verified, 1 input error, 2 partial convergence or
failed verification.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import analyze, diamond_bounds, verify_duality
from .channels import KrausChannel, NotCPTPError, identity_channel, require_cptp
from .numkernel import NumericalError, ShapeError
from .qss import (
    NOISE_FAMILIES,
    AttackModel,
    ThresholdScheme,
    UnauthorizedSetError,
    build_cgl_2_3_scheme,
    builtin_attack,
    product_attack,
)
from .saddle import SolverConfig

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2
BUILTIN_SCHEMES = {"cgl23": build_cgl_2_3_scheme}
LOG_FIELDS = ("ctilde", "c_ea", "strength_C", "strength_Ctilde")


class ScenarioError(ValueError):
    """Malformed scenario; the message names the offending location."""


@dataclasses.dataclass
class Scenario:
    scheme: ThresholdScheme
    attack: AttackModel
    solver: SolverConfig
    sets: str
    raw: dict


def _matrix(obj, where: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: not a numeric matrix ({exc})") from None
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ScenarioError(f"{where}: expected a matrix of numbers or [re, im] pairs, got shape {arr.shape}")


def encode_matrix(M: np.ndarray) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _parse_scheme(obj) -> ThresholdScheme:
    if isinstance(obj, str):
        obj = {"builtin": obj}
    if not isinstance(obj, dict):
        raise ScenarioError("scheme: expected a builtin name or an object")
    if "builtin" in obj:
        name = obj["builtin"]
        if name not in BUILTIN_SCHEMES:
            raise ScenarioError(f"scheme.builtin: unknown scheme {name!r}; known: {', '.join(BUILTIN_SCHEMES)}")
        return BUILTIN_SCHEMES[name]()
    missing = [k for k in ("t", "n", "secret_dim", "share_dim", "encoder") if k not in obj]
    if missing:
        raise ScenarioError(f"scheme: missing keys {missing}")
    V = _matrix(obj["encoder"], "scheme.encoder")
    try:
        return ThresholdScheme(int(obj["t"]), int(obj["n"]), int(obj["secret_dim"]),
                               int(obj["share_dim"]), KrausChannel(V[None]), name=obj.get("name", "custom"))
    except (ValueError, ShapeError) as exc:
        raise ScenarioError(f"scheme: {exc}") from None


def _parse_share_attack(obj, d: int, where: str) -> KrausChannel:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    if "kraus" in obj:
        ops = np.array([_matrix(K, f"{where}.kraus[{i}]") for i, K in enumerate(obj["kraus"])])
        ch = KrausChannel(ops)
        if ch.dim_in != d or ch.dim_out != d:
            raise ScenarioError(f"{where}: share channel must act on dim {d}")
        return _checked(ch, where)
    fam = obj.get("family", "identity")
    if fam == "identity":
        return identity_channel(d)
    if fam not in NOISE_FAMILIES:
        raise ScenarioError(f"{where}.family: unknown attack family {fam!r}")
    try:
        return NOISE_FAMILIES[fam](d, obj.get("p", 0.0))
    except ValueError as exc:
        raise ScenarioError(f"{where}.p: {exc}") from None


def _checked(ch: KrausChannel, where: str) -> KrausChannel:
    try:
        return require_cptp(ch)
    except NotCPTPError as exc:
        raise ScenarioError(f"{where}: not CPTP: {exc}") from None


def _parse_attack(obj, scheme: ThresholdScheme) -> AttackModel:
    if obj is None or obj == "identity":
        obj = {"family": "identity"}
    if not isinstance(obj, dict):
        raise ScenarioError("attack: expected an object")
    if "kraus" in obj:
        ops = np.array([_matrix(K, f"attack.kraus[{i}]") for i, K in enumerate(obj["kraus"])])
        ch = KrausChannel(ops)
        if ch.dim_in != scheme.total_dim or ch.dim_out != scheme.total_dim:
            raise ScenarioError(f"attack.kraus: operators must be {scheme.total_dim}x{scheme.total_dim}")
        return AttackModel(obj.get("label", "explicit"), {}, global_channel=_checked(ch, "attack.kraus"))
    if "per_share" in obj:
        items = obj["per_share"]
        if not isinstance(items, list) or len(items) != scheme.n:
            raise ScenarioError(f"attack.per_share: expected a list of {scheme.n} share attacks")
        chans = [_parse_share_attack(o, scheme.share_dim, f"attack.per_share[{i}]") for i, o in enumerate(items)]
        return product_attack(chans, label=obj.get("label", "per_share"))
    fam = obj.get("family", "identity")
    try:
        return builtin_attack(scheme, fam, obj.get("p", 0.0), obj.get("shares"))
    except ValueError as exc:
        raise ScenarioError(f"attack: {exc}") from None


def _parse_solver(obj) -> SolverConfig:
    obj = obj or {}
    if not isinstance(obj, dict):
        raise ScenarioError("solver: expected an object")
    names = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = sorted(set(obj) - names)
    if unknown:
        raise ScenarioError(f"solver: unknown keys {unknown}")
    try:
        return SolverConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"solver: {exc}") from None


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("top level: expected an object with keys scheme/attack/solver/sets")
    unknown = sorted(set(raw) - {"scheme", "attack", "solver", "sets"})
    if unknown:
        raise ScenarioError(f"top level: unknown keys {unknown}")
    if "scheme" not in raw:
        raise ScenarioError("top level: missing key 'scheme'")
    sets = raw.get("sets", "minimal")
    if sets not in ("minimal", "all"):
        raise ScenarioError(f"sets: expected 'minimal' or 'all', got {sets!r}")
    scheme = _parse_scheme(raw["scheme"])
    return Scenario(scheme, _parse_attack(raw.get("attack"), scheme), _parse_solver(raw.get("solver")), sets, raw)


def serialize_scenario(sc: Scenario) -> dict:
    """Explicit form of a parsed scenario (encoder and attack Kraus spelled out)."""
    s = sc.scheme
    attack = sc.attack
    if attack.factors is not None:
        att = {"per_share": [{"kraus": [encode_matrix(K) for K in f.kraus]} for f in attack.factors],
               "label": attack.label}
    else:
        att = {"kraus": [encode_matrix(K) for K in attack.global_channel.kraus], "label": attack.label}
    return {
        "scheme": {"t": s.t, "n": s.n, "secret_dim": s.secret_dim, "share_dim": s.share_dim,
                   "encoder": encode_matrix(s.isometry), "name": s.name},
        "attack": att,
        "solver": dataclasses.asdict(sc.solver),
        "sets": sc.sets,
    }


def _load(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _to_bits(d):
    if isinstance(d, dict):
        return {k: (v / math.log(2) if k in LOG_FIELDS and isinstance(v, float) else _to_bits(v))
                for k, v in d.items()}
    if isinstance(d, list):
        return [_to_bits(v) for v in d]
    return d


def _envelope(kind: str, sc: Scenario, payload: dict, bits: bool) -> dict:
    body = _to_bits(payload) if bits else payload
    return {
        "tool": "approxqss",
        "version": __version__,
        "command": kind,
        "seed": sc.solver.seed,
        "units": "bits" if bits else "nats",
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "scenario": sc.raw,
        "result": body,
    }


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        sc.solver = sc.solver.with_(seed=args.seed)
        sc.raw = dict(sc.raw, solver=dict(sc.raw.get("solver") or {}, seed=args.seed))
    if getattr(args, "sets", None):
        sc.sets = args.sets
        sc.raw = dict(sc.raw, sets=args.sets)
    return sc


def cmd_analyze(args) -> int:
    sc = _apply_overrides(_load(args.file), args)
    rep = analyze(sc.scheme, sc.attack, sc.sets, sc.solver)
    _emit(dump_report(_envelope("analyze", sc, rep.to_dict(), args.bits)), args.out)
    return EXIT_OK if rep.converged else EXIT_PARTIAL


def cmd_verify(args) -> int:
    sc = _apply_overrides(_load(args.file), args)
    rep = verify_duality(sc.scheme, sc.attack, sc.solver, sc.sets, fvg=True)
    _emit(dump_report(_envelope("verify", sc, rep.to_dict(), args.bits)), args.out)
    return EXIT_OK if rep.passed else EXIT_PARTIAL


def parse_grid(text: str) -> list[float]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ScenarioError("grid must be nonempty")
    try:
        vals = [float(t) for t in items]
    except ValueError as exc:
        raise ScenarioError(f"grid: {exc}") from None
    uniq = list(dict.fromkeys(vals))
    if len(uniq) < len(vals):
        warnings.warn(f"grid had duplicate values; using {uniq}", stacklevel=2)
    return uniq


SWEEP_COLUMNS = ("parameter", "epsilon", "ctilde", "c", "delta_lower", "delta_upper")


def cmd_sweep(args) -> int:
    sc = _apply_overrides(_load(args.file), args)
    grid = parse_grid(args.grid)
    att = sc.raw.get("attack")
    if not isinstance(att, dict) or "family" not in att or att["family"] == "identity":
        raise ScenarioError("sweep needs an attack with a noise family (attack.family)")
    if args.param not in ("p",):
        raise ScenarioError(f"unknown parameter {args.param!r} for attack family {att['family']!r}; known: p")
    rows, converged = [], True
    scale = 1 / math.log(2) if args.bits else 1.0
    for v in grid:
        try:
            attack = builtin_attack(sc.scheme, att["family"], v, att.get("shares"))
        except ValueError as exc:
            raise ScenarioError(f"grid value {v}: {exc}") from None
        rep = analyze(sc.scheme, attack, sc.sets, sc.solver, primal=False)
        converged &= rep.converged
        lo, hi = diamond_bounds(min(max(rep.epsilon_secrecy, 0.0), 1.0), rep.strength_C)
        rows.append((v, rep.epsilon_secrecy, rep.strength_Ctilde * scale, rep.strength_C * scale, lo, hi))
    ordered = sorted(rows)
    if any(b[1] < a[1] - 1e-6 for a, b in zip(ordered, ordered[1:])):
        warnings.warn("epsilon is not monotone in the swept parameter", stacklevel=2)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([repr(float(x)) for x in r])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK if converged else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="approxqss", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"approxqss {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", help="scenario JSON file")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--sets", choices=("minimal", "all"), help="authorized sets to analyze")
        sp.add_argument("--seed", type=int, help="override the solver seed")
        sp.add_argument("--bits", action="store_true", help="report capacities in bits")

    a = sub.add_parser("analyze", help="secrecy, reconstructability and adversary strength")
    common(a)
    a.set_defaults(func=cmd_analyze)
    v = sub.add_parser("verify", help="check the leakage/recovery equivalence per set")
    common(v)
    v.set_defaults(func=cmd_verify)
    s = sub.add_parser("sweep", help="tabulate results over an attack parameter grid (CSV)")
    common(s)
    s.add_argument("--param", required=True, help="attack parameter to sweep (p)")
    s.add_argument("--grid", required=True, help="comma-separated values")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, UnauthorizedSetError, NotCPTPError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
