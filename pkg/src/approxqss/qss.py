"""Threshold secret sharing schemes, attacks and per-set effective channels.

Players are labelled ``1..n``. For an authorized set ``A`` the forward
channel ``N_A`` maps the secret to the shares held by ``A`` after the attack,
``N_A = tr_{not A} o attack o encoder``. Its complement ``N^_A`` maps the
secret to everything else (the attack environment and the other shares).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    KrausChannel,
    NotCPTPError,
    choi_to_kraus,
    complementary,
    dephasing,
    depolarizing,
    erasure,
    identity_channel,
    require_cptp,
    tensor,
)
from .numkernel import ShapeError, partial_trace

MAX_SHARE_SPACE = 729


class UnauthorizedSetError(ValueError):
    """The player set is smaller than the threshold."""


@dataclass(frozen=True)
class ThresholdScheme:
    """((t, n)) scheme with an isometric encoder ``C^q -> (C^d)^{(x) n}``."""

    t: int
    n: int
    secret_dim: int
    share_dim: int
    encoder: KrausChannel
    name: str = "custom"

    def __post_init__(self):
        if not 1 <= self.t <= self.n:
            raise ValueError(f"need 1 <= t <= n, got t={self.t}, n={self.n}")
        total = self.share_dim**self.n
        if total > MAX_SHARE_SPACE:
            raise ValueError(
                f"share space dimension {self.share_dim}^{self.n} = {total} exceeds "
                f"the dense-matrix limit {MAX_SHARE_SPACE}"
            )
        enc = self.encoder
        if not isinstance(enc, KrausChannel):
            enc = KrausChannel(np.asarray(enc, dtype=complex)[None])
            object.__setattr__(self, "encoder", enc)
        if enc.rank != 1:
            raise NotCPTPError(f"encoder must have a single Kraus operator, got {enc.rank}")
        if enc.dim_in != self.secret_dim or enc.dim_out != total:
            raise ShapeError(
                f"encoder maps {enc.dim_in} -> {enc.dim_out}, expected "
                f"{self.secret_dim} -> {total}"
            )
        V = enc.kraus[0]
        err = float(np.max(np.abs(V.conj().T @ V - np.eye(self.secret_dim))))
        if err > 1e-8:
            raise NotCPTPError(f"encoder is not an isometry: max |V^†V - I| = {err:.3e}")

    @property
    def isometry(self) -> np.ndarray:
        return self.encoder.kraus[0]

    @property
    def total_dim(self) -> int:
        return self.share_dim**self.n


def build_cgl_2_3_scheme() -> ThresholdScheme:
    """The ((2,3)) qutrit threshold scheme.

    ``|s> -> sum_j |j, j+s, j+2s>/sqrt(3)`` (arithmetic mod 3), so
    ``|0> -> (|000>+|111>+|222>)/sqrt(3)`` and so on.
    """
    V = np.zeros((27, 3), dtype=complex)
    for s in range(3):
        for j in range(3):
            V[9 * j + 3 * ((j + s) % 3) + (j + 2 * s) % 3, s] = 1 / np.sqrt(3)
    return ThresholdScheme(2, 3, 3, 3, KrausChannel(V[None]), name="cgl23")


@dataclass(frozen=True)
class AuthorizedSet:
    """Set of player labels drawn from ``1..n``."""

    members: tuple[int, ...]

    def __post_init__(self):
        m = tuple(sorted(set(int(i) for i in self.members)))
        if not m or m[0] < 1:
            raise ValueError(f"player labels must be a nonempty subset of 1..n, got {self.members}")
        object.__setattr__(self, "members", m)

    def complement(self, n: int) -> tuple[int, ...]:
        return tuple(i for i in range(1, n + 1) if i not in self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


@dataclass(frozen=True)
class AttackModel:
    """CPTP map on all ``n`` shares.

    Product attacks keep their per-share factors so they can be applied share
    by share; the full Kraus list is only built on request.
    """

    label: str
    parameters: dict = field(default_factory=dict)
    global_channel: KrausChannel | None = None
    factors: tuple[KrausChannel, ...] | None = None

    def __post_init__(self):
        if (self.global_channel is None) == (self.factors is None):
            raise ValueError("give exactly one of global_channel or factors")
        if self.global_channel is not None:
            ch = self.global_channel
            if ch.dim_in != ch.dim_out:
                raise ShapeError(f"attack must map a space to itself, got {ch.dim_in} -> {ch.dim_out}")
            require_cptp(ch)
        else:
            for f in self.factors:
                require_cptp(f)

    @property
    def dim(self) -> int:
        if self.global_channel is not None:
            return self.global_channel.dim_in
        return int(np.prod([f.dim_in for f in self.factors]))

    @property
    def attack(self) -> KrausChannel:
        return self.global_channel if self.factors is None else tensor(*self.factors)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Apply the attack to an operator on the share space."""
        if self.global_channel is not None:
            K = self.global_channel.kraus
            return np.einsum("kab,bc,kdc->ad", K, X, K.conj())
        dims = [f.dim_in for f in self.factors]
        n = len(dims)
        T = np.asarray(X, dtype=complex).reshape(dims + dims)
        for j, f in enumerate(self.factors):
            if f.rank == 1 and np.allclose(f.kraus[0], np.eye(dims[j])):
                continue
            out = np.zeros_like(T)
            for K in f.kraus:
                Y = np.moveaxis(np.tensordot(K, T, axes=([1], [j])), 0, j)
                out += np.moveaxis(np.tensordot(K.conj(), Y, axes=([1], [n + j])), 0, n + j)
            T = out
        return T.reshape(X.shape)


def product_attack(per_share, label: str = "product", parameters: dict | None = None) -> AttackModel:
    per_share = tuple(per_share)
    if not per_share:
        raise ValueError("product attack needs at least one share channel")
    for i, f in enumerate(per_share):
        if f.dim_in != f.dim_out:
            raise ShapeError(f"share {i + 1} channel maps {f.dim_in} -> {f.dim_out}")
    return AttackModel(label, dict(parameters or {}), factors=per_share)


def identity_attack(scheme: ThresholdScheme) -> AttackModel:
    return product_attack([identity_channel(scheme.share_dim)] * scheme.n, label="identity")


NOISE_FAMILIES = {"depolarizing": depolarizing, "dephasing": dephasing, "erasure": erasure}


def builtin_attack(scheme: ThresholdScheme, family: str, p: float = 0.0, shares=None) -> AttackModel:
    """Per-share noise from a named family on the listed shares (default: all)."""
    if family == "identity":
        return identity_attack(scheme)
    if family not in NOISE_FAMILIES:
        raise ValueError(f"unknown attack family {family!r}; choose from identity, {', '.join(NOISE_FAMILIES)}")
    shares = tuple(range(1, scheme.n + 1)) if shares is None else tuple(int(s) for s in shares)
    bad = [s for s in shares if not 1 <= s <= scheme.n]
    if bad:
        raise ValueError(f"share labels {bad} outside 1..{scheme.n}")
    noisy = NOISE_FAMILIES[family](scheme.share_dim, p)
    ident = identity_channel(scheme.share_dim)
    factors = [noisy if i in shares else ident for i in range(1, scheme.n + 1)]
    return product_attack(factors, label=family, parameters={"p": float(p), "shares": list(shares)})


@dataclass(frozen=True)
class EffectiveChannels:
    forward: KrausChannel
    complement: KrausChannel


def forward_choi(scheme: ThresholdScheme, attack: AttackModel, A: AuthorizedSet) -> np.ndarray:
    """Choi matrix of ``tr_{not A} o attack o encoder``."""
    if attack.dim != scheme.total_dim:
        raise ShapeError(f"attack acts on dim {attack.dim}, scheme shares span {scheme.total_dim}")
    if A.members[-1] > scheme.n:
        raise ValueError(f"player labels {A.members} outside 1..{scheme.n}")
    q, d = scheme.secret_dim, scheme.share_dim
    keep = [i - 1 for i in A.members]
    dA = d ** len(keep)
    V = scheme.isometry
    J = np.zeros((q * dA, q * dA), dtype=complex)
    for i in range(q):
        for j in range(i, q):
            out = attack.apply(np.outer(V[:, i], V[:, j].conj()))
            block = partial_trace(out, [d] * scheme.n, keep)
            J[i * dA:(i + 1) * dA, j * dA:(j + 1) * dA] = block
            if j != i:
                J[j * dA:(j + 1) * dA, i * dA:(i + 1) * dA] = block.conj().T
    return J


def effective_channels(scheme: ThresholdScheme, attack: AttackModel, A: AuthorizedSet) -> EffectiveChannels:
    """``N_A`` and its complement for an authorized set ``A``.

    The forward channel is stored with a minimal Kraus list, so the
    complement's environment is as small as the channel allows. Any other
    dilation gives a complement that differs by an isometry on the output,
    which leaves every fidelity and capacity unchanged.
    """
    if len(A) < scheme.t:
        raise UnauthorizedSetError(
            f"set {A} has {len(A)} players, below the threshold t={scheme.t}"
        )
    J = forward_choi(scheme, attack, A)
    fwd = choi_to_kraus(J, scheme.secret_dim, scheme.share_dim ** len(A))
    return EffectiveChannels(fwd, complementary(fwd))


def min_authorized_sets(scheme: ThresholdScheme) -> list[AuthorizedSet]:
    """All sets of exactly ``t`` players, in lexicographic order."""
    return [AuthorizedSet(c) for c in itertools.combinations(range(1, scheme.n + 1), scheme.t)]


def all_authorized_sets(scheme: ThresholdScheme) -> list[AuthorizedSet]:
    """All sets of at least ``t`` players, by size then lexicographically."""
    return [
        AuthorizedSet(c)
        for k in range(scheme.t, scheme.n + 1)
        for c in itertools.combinations(range(1, scheme.n + 1), k)
    ]
