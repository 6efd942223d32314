"""Incremental minimum-norm solver and the epsilon-embedded WLS estimate.

Monitors are visited in order; each one refines the running estimate with
its own rows and hands ``(x_hat, K)`` to the next.  ``K`` spans the
directions the processed rows leave undetermined.

All estimate arrays may carry a trailing batch axis: ``z`` of shape
``(p, N)`` solves ``N`` right-hand sides at once (the kernel bases do not
depend on ``z``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import ContractError, InconsistentSystemError, NumericalError
from .linalg import (
    ESTIMATOR_RTOL,
    SubspaceBasis,
    as_matrix,
    kernel_basis,
    kernel_from_svd,
    pinv_from_svd,
    pseudoinverse,
    svd,
)


def _scale_tol(M: np.ndarray, rtol: float) -> float:
    s = np.linalg.norm(M, 2) if M.size else 0.0
    return rtol * max(float(s), 1e-300)


def consistency_tolerance(z: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.max(np.abs(z), initial=0.0)))


@dataclass
class IncrementalState:
    x_hat: np.ndarray
    K: SubspaceBasis

    @classmethod
    def initial(cls, n: int, batch: int | None = None) -> "IncrementalState":
        shape = (n,) if batch is None else (n, batch)
        return cls(np.zeros(shape), SubspaceBasis.full(n))


@dataclass(frozen=True)
class BasisPacket:
    """Wire form of a kernel basis: the basis itself or its complement."""

    kind: str  # "kernel" or "complement"
    matrix: np.ndarray
    ambient_dim: int

    @property
    def size(self) -> int:
        # one extra slot for the basis-type flag
        return self.matrix.size + 1


def encode_basis(K: SubspaceBasis, compact: bool = False) -> BasisPacket:
    if compact and K.ambient_dim - K.dim < K.dim:
        return BasisPacket("complement", K.complement().basis, K.ambient_dim)
    return BasisPacket("kernel", K.basis.copy(), K.ambient_dim)


def decode_basis(packet: BasisPacket) -> SubspaceBasis:
    if packet.kind == "kernel":
        return SubspaceBasis(packet.matrix)
    if packet.kind == "complement":
        if packet.matrix.shape[1] == 0:
            return SubspaceBasis.full(packet.ambient_dim)
        return kernel_basis(packet.matrix.T, tol=ESTIMATOR_RTOL)
    raise ContractError(f"unknown basis packet kind {packet.kind!r}")


def incremental_step(
    state: IncrementalState, H_i, z_i, rtol: float = ESTIMATOR_RTOL
) -> tuple[IncrementalState, tuple[int, int]]:
    """One monitor's update; also returns the shape of the SVD it needed."""
    H_i = np.asarray(H_i, dtype=float)
    if H_i.ndim == 1:
        H_i = H_i[np.newaxis, :]
    z_i = np.asarray(z_i, dtype=float)
    K = state.K
    if H_i.shape[1] != K.ambient_dim:
        raise ContractError(f"block has {H_i.shape[1]} columns, expected {K.ambient_dim}")
    if H_i.shape[0] == 0 or K.is_zero:
        return state, (H_i.shape[0], K.dim)
    HK = H_i @ K.basis
    res = svd(HK, full=True, tol=_scale_tol(H_i, rtol))
    r = z_i - H_i @ state.x_hat
    x_new = state.x_hat + K.basis @ (pinv_from_svd(res) @ r)
    N = kernel_from_svd(res).basis
    K_new = SubspaceBasis(K.basis @ N)
    return IncrementalState(x_new, K_new), HK.shape


@dataclass
class IncrementalResult:
    x_hat: np.ndarray
    states: list[IncrementalState]
    communications: int
    svd_shapes: list[tuple[int, int]]
    wire_sizes: list[int] = field(default_factory=list)

    @property
    def flop_surrogate(self) -> int:
        return sum(min(r * c * c, r * r * c) for r, c in self.svd_shapes)


def run_incremental(
    blocks: Sequence[tuple[np.ndarray, np.ndarray]],
    *,
    compact: bool = False,
    rtol: float = ESTIMATOR_RTOL,
    check: bool = True,
) -> IncrementalResult:
    """Run the incremental solver over ``(H_i, z_i)`` blocks in order.

    Every handoff between consecutive monitors goes through
    :func:`encode_basis`/:func:`decode_basis`; ``compact=True`` sends the
    smaller of the kernel basis and its complement.
    """
    if not blocks:
        raise ContractError("need at least one block")
    H_blocks = [as_matrix(H_i, "H_i") if np.ndim(H_i) else np.zeros((0, 0)) for H_i, _ in blocks]
    n = H_blocks[0].shape[1]
    z0 = np.asarray(blocks[0][1], dtype=float)
    batch = z0.shape[1] if z0.ndim == 2 else None
    state = IncrementalState.initial(n, batch)
    states, shapes, wire = [], [], []
    comms = 0
    for idx, (H_i, (_, z_i)) in enumerate(zip(H_blocks, blocks)):
        if idx > 0:
            packet = encode_basis(state.K, compact)
            wire.append(packet.size + state.x_hat.size)
            state = IncrementalState(state.x_hat.copy(), decode_basis(packet))
            comms += 1
        state, shape = incremental_step(state, H_i, z_i, rtol)
        states.append(state)
        shapes.append(shape)
    if check:
        H = np.vstack(H_blocks)
        z = np.concatenate([np.asarray(zi, dtype=float) for _, zi in blocks])
        resid = float(np.max(np.abs(z - H @ state.x_hat), initial=0.0))
        if resid > consistency_tolerance(z):
            raise InconsistentSystemError(
                f"stacked measurements not in Im(H): residual {resid:.3e}"
            )
    return IncrementalResult(state.x_hat, states, comms, shapes, wire)


def incremental_min_norm(
    blocks: Sequence[tuple[np.ndarray, np.ndarray]], *, compact: bool = False
) -> np.ndarray:
    """Minimum-norm solution of the stacked consistent system ``H x = z``."""
    return run_incremental(blocks, compact=compact).x_hat


# -- weighted least squares --------------------------------------------------


class WlsSolution(NamedTuple):
    x: np.ndarray
    W: np.ndarray


def wls_gain(H, Sigma) -> np.ndarray:
    """``W = (H^T Σ^-1 H)^-1 H^T Σ^-1``."""
    H = as_matrix(H, "H")
    S = as_matrix(Sigma, "Sigma")
    if np.linalg.matrix_rank(H) < H.shape[1]:
        raise ContractError("H must have full column rank (Ker(H) = {0})")
    try:
        cf = scipy.linalg.cho_factor(S)
    except np.linalg.LinAlgError as exc:
        raise ContractError("Sigma is not positive definite") from exc
    SiH = scipy.linalg.cho_solve(cf, H)
    G = H.T @ SiH
    return np.linalg.solve(G, SiH.T)


def wls_oracle(H, Sigma, z) -> WlsSolution:
    """Centralized minimum-variance estimate computed from the normal equations."""
    W = wls_gain(H, Sigma)
    return WlsSolution(W @ np.asarray(z, dtype=float), W)


def default_epsilon(H, B) -> float:
    sH = float(np.linalg.norm(H, 2))
    sB = float(np.linalg.norm(B, 2))
    if sH == 0 or sB == 0:
        raise ContractError("H and B must be nonzero")
    return 1e-6 * sH / sB


def embed_blocks(blocks, epsilon: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(H_i, B_i, z_i) -> ([H_i  eps B_i], z_i)``."""
    if not epsilon > 0:
        raise ContractError("epsilon must be > 0")
    return [(np.hstack([H_i, epsilon * B_i]), z_i) for H_i, B_i, z_i in blocks]


def wls_incremental(blocks, epsilon: float, *, compact: bool = False) -> np.ndarray:
    """Incremental estimate ``x_hat(eps)`` from ``(H_i, B_i, z_i)`` blocks."""
    n = np.asarray(blocks[0][0]).shape[1]
    return incremental_min_norm(embed_blocks(blocks, epsilon), compact=compact)[:n]


# -- closed-form block pseudoinverse -----------------------------------------


@dataclass
class BlockPinv:
    top: np.ndarray
    bottom: np.ndarray
    C_pinv: np.ndarray
    D: np.ndarray

    @property
    def full(self) -> np.ndarray:
        return np.vstack([self.top, self.bottom])


def block_pinv(H, B, epsilon: float) -> BlockPinv:
    """Assemble ``[H  eps B]^+`` block by block from ``C``, ``E`` and ``D``."""
    H = as_matrix(H, "H")
    B = as_matrix(B, "B")
    if not epsilon > 0:
        raise ContractError("epsilon must be > 0")
    p = H.shape[0]
    if B.shape[0] != p:
        raise ContractError("H and B must have the same number of rows")
    if np.linalg.matrix_rank(B) < p:
        raise ContractError("B must have full row rank")
    h_scale = float(np.linalg.norm(H, 2)) if H.size else 0.0
    b_scale = epsilon * float(np.linalg.norm(B, 2))
    # rank cuts relative to the unprojected scales; the projection of B can be
    # pure rounding noise (square H), which a self-relative cut would invert
    Hp = pseudoinverse(H, tol=ESTIMATOR_RTOL * max(h_scale, 1e-300))
    C = epsilon * (np.eye(p) - H @ Hp) @ B
    Cp = pseudoinverse(C, tol=ESTIMATOR_RTOL * max(b_scale, 1e-300))
    E = np.eye(B.shape[1]) - Cp @ C
    G = pseudoinverse(H @ H.T, tol=ESTIMATOR_RTOL * max(h_scale**2, 1e-300))
    inner = np.eye(B.shape[1]) + epsilon**2 * E @ B.T @ G @ B @ E
    if np.linalg.cond(inner) > 1e12:
        raise NumericalError("inner matrix of the block formula is near singular")
    D = epsilon * E @ np.linalg.solve(inner, B.T @ G @ (np.eye(p) - epsilon * B @ Cp))
    bottom = Cp + D
    top = Hp - epsilon * Hp @ B @ bottom
    return BlockPinv(top, bottom, Cp, D)


def block_pinv_formula(H, B, epsilon: float) -> np.ndarray:
    return block_pinv(H, B, epsilon).full


def approximation_error_exact(H, B, z, epsilon: float) -> np.ndarray:
    """``eps H^+ B D z``: the exact gap between the WLS estimate and ``x_hat(eps)``."""
    bp = block_pinv(H, B, epsilon)
    H = as_matrix(H, "H")
    tol = ESTIMATOR_RTOL * max(float(np.linalg.norm(H, 2)), 1e-300)
    return epsilon * pseudoinverse(H, tol=tol) @ B @ bp.D @ np.asarray(z, dtype=float)


def epsilon_for_accuracy(bound_HBDz: float, target: float) -> float:
    """Largest ``eps`` with ``eps * bound <= target``."""
    if not bound_HBDz > 0 or not target > 0:
        raise ContractError("bound and target must be positive")
    eps = target / bound_HBDz
    if eps >= 1:
        warnings.warn(f"epsilon {eps:g} >= 1: target looser than the bound", stacklevel=2)
    return eps


def residual_gain_norm(H, Sigma, norm=np.inf) -> float:
    W = wls_gain(H, Sigma)
    M = np.eye(W.shape[1]) - as_matrix(H) @ W
    return float(np.linalg.norm(M, norm))


def residual_bound(H, Sigma, v_norm: float, norm=np.inf) -> float:
    """Upper bound ``||I - H W|| * ||v||`` on the WLS residual norm."""
    return residual_gain_norm(H, Sigma, norm) * v_norm


def communications_expected(rows: int, block_size: int) -> int:
    return math.ceil(rows / block_size) - 1
