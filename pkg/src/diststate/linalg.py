"""Dense linear-algebra kernels used by the estimators.

Everything here works on plain ``numpy`` arrays.  Subspaces are carried as
:class:`SubspaceBasis` objects whose columns are orthonormal; a basis with
zero columns is the zero subspace.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ContractError, NotPositiveDefiniteError, NumericalError

EPS = np.finfo(float).eps

# Relative threshold used by the estimators when deciding rank of projected
# blocks. Accumulated rounding in the kernel bases is far above
# max(shape) * eps, so the plain rank tolerance would keep spurious directions.
ESTIMATOR_RTOL = 1e-10


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array (1-D input becomes a row)."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if A.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError(f"{name} has non-finite entries")
    return A


def rank_tolerance(shape: tuple[int, int], s_max: float) -> float:
    return max(shape) * EPS * s_max


@dataclass(frozen=True)
class SvdResult:
    """Singular value decomposition ``M = U diag(s) V^T``.

    ``U`` and ``V`` may carry extra orthonormal columns (full decomposition);
    only the first ``len(s)`` of each pair multiply a singular value.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    rank: int
    tol: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    @property
    def s_max(self) -> float:
        return float(self.s[0]) if self.s.size else 0.0

    def reconstruct(self) -> np.ndarray:
        k = self.s.size
        return (self.U[:, :k] * self.s) @ self.V[:, :k].T


def svd(M, *, full: bool = False, tol: float | None = None) -> SvdResult:
    """SVD with a numerical rank.

    Parameters
    ----------
    M : array_like
        Real matrix.
    full : bool
        Return complete square ``U`` and ``V`` (needed for kernel bases).
    tol : float, optional
        Absolute threshold; singular values ``<= tol`` count as zero.
        Defaults to ``max(rows, cols) * eps * s_max``.
    """
    A = as_matrix(M)
    r, c = A.shape
    if r == 0 or c == 0:
        U = np.eye(r) if full else np.zeros((r, 0))
        V = np.eye(c) if full else np.zeros((c, 0))
        return SvdResult(U, np.zeros(0), V, 0, 0.0 if tol is None else tol)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=full)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for {r}x{c} matrix") from exc
    if tol is None:
        tol = rank_tolerance(A.shape, float(s[0]))
    rank = int(np.count_nonzero(s > tol))
    return SvdResult(U, s, Vt.T, rank, tol)


# -- instrumentation ---------------------------------------------------------

_recorder: contextvars.ContextVar[list | None] = contextvars.ContextVar(
    "pinv_recorder", default=None
)


class PinvRecord(NamedTuple):
    """A pseudoinverse computed under :func:`record_pseudoinverses`.

    ``tol`` is the rank cut that was applied: ``M P M`` reproduces ``M`` only
    up to the singular values at or below it.
    """

    matrix: np.ndarray
    pinv: np.ndarray
    tol: float


@contextlib.contextmanager
def record_pseudoinverses() -> Iterator[list[PinvRecord]]:
    """Collect every pseudoinverse computed inside the block."""
    pairs: list[PinvRecord] = []
    token = _recorder.set(pairs)
    try:
        yield pairs
    finally:
        _recorder.reset(token)


def pinv_from_svd(res: SvdResult) -> np.ndarray:
    k = res.rank
    P = (res.V[:, :k] / res.s[:k]) @ res.U[:, :k].T
    pairs = _recorder.get()
    if pairs is not None:
        pairs.append(PinvRecord(res.reconstruct(), P, res.tol))
    return P


def kernel_from_svd(res: SvdResult) -> "SubspaceBasis":
    if res.V.shape[1] != res.shape[1]:
        raise ContractError("kernel needs a full SVD (full=True)")
    return SubspaceBasis(res.V[:, res.rank:].copy())


def pseudoinverse(M, *, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse through a truncated SVD."""
    return pinv_from_svd(svd(M, tol=tol))


def moore_penrose_errors(M, P) -> dict[str, float]:
    """Max-abs violations of the four Moore-Penrose identities."""
    M = np.asarray(M, dtype=float)
    P = np.asarray(P, dtype=float)
    MP = M @ P
    PM = P @ M
    return {
        "MPM": float(np.max(np.abs(MP @ M - M), initial=0.0)),
        "PMP": float(np.max(np.abs(PM @ P - P), initial=0.0)),
        "MP_sym": float(np.max(np.abs(MP - MP.T), initial=0.0)),
        "PM_sym": float(np.max(np.abs(PM - PM.T), initial=0.0)),
    }


# -- subspaces ---------------------------------------------------------------


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of a linear subspace of ``R^ambient_dim``."""

    basis: np.ndarray

    def __post_init__(self):
        if self.basis.ndim != 2:
            raise ContractError("basis must be a 2-D array")

    @classmethod
    def zero(cls, ambient_dim: int) -> "SubspaceBasis":
        return cls(np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "SubspaceBasis":
        return cls(np.eye(ambient_dim))

    @classmethod
    def from_columns(cls, M, *, tol: float | None = None) -> "SubspaceBasis":
        """Orthonormal basis of the column span of ``M``."""
        res = svd(M, tol=tol)
        return cls(res.U[:, : res.rank].copy())

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.dim == 0

    def orthonormality_error(self) -> float:
        G = self.basis.T @ self.basis
        return float(np.max(np.abs(G - np.eye(self.dim)), initial=0.0))

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ x)

    def complement(self) -> "SubspaceBasis":
        return kernel_basis(self.basis.T) if self.dim else SubspaceBasis.full(self.ambient_dim)


def kernel_basis(M, *, tol: float | None = None) -> SubspaceBasis:
    """Orthonormal basis of ``Ker(M)``."""
    return kernel_from_svd(svd(M, full=True, tol=tol))


def image_basis(M, *, tol: float | None = None) -> SubspaceBasis:
    return SubspaceBasis.from_columns(M, tol=tol)


def _orthonormalize(Q: np.ndarray) -> np.ndarray:
    if Q.shape[1] == 0:
        return Q
    q, _ = np.linalg.qr(Q)
    return q


def intersection_from_svd(A: SubspaceBasis, res: SvdResult) -> SubspaceBasis:
    """Intersection basis from the full SVD of ``[-A  B]``.

    Kernel vectors ``(a, b)`` of the stacked map satisfy ``A a = B b``; for
    orthonormal ``A`` and ``B`` the images ``A a`` have norm ``1/sqrt(2)``.
    """
    N = kernel_from_svd(res).basis
    Q = np.sqrt(2.0) * (A.basis @ N[: A.dim])
    return SubspaceBasis(_orthonormalize(Q))


def subspace_intersection(
    A: SubspaceBasis, B: SubspaceBasis, *, tol: float | None = None
) -> SubspaceBasis:
    """Orthonormal basis of ``Im(A) ∩ Im(B)``."""
    if A.ambient_dim != B.ambient_dim:
        raise ContractError(
            f"ambient dimensions differ: {A.ambient_dim} vs {B.ambient_dim}"
        )
    if A.is_zero or B.is_zero:
        return SubspaceBasis.zero(A.ambient_dim)
    if tol is None:
        tol = ESTIMATOR_RTOL
    res = svd(np.hstack([-A.basis, B.basis]), full=True, tol=tol)
    return intersection_from_svd(A, res)


def max_principal_sine(A: SubspaceBasis, B: SubspaceBasis) -> float:
    """Sine of the largest principal angle; ``inf`` if dimensions differ.

    The residual form ``||B - A A^T B||_2`` stays accurate for tiny angles,
    unlike ``arccos`` of the cosines.
    """
    if A.dim != B.dim:
        return float("inf")
    if A.dim == 0:
        return 0.0
    R = B.basis - A.basis @ (A.basis.T @ B.basis)
    return float(np.linalg.norm(R, 2))


def same_subspace(A: SubspaceBasis, B: SubspaceBasis, atol: float = 1e-8) -> bool:
    return max_principal_sine(A, B) <= atol


def contained_in(A: SubspaceBasis, B: SubspaceBasis, atol: float = 1e-9) -> bool:
    """True if ``Im(A) ⊆ Im(B)``."""
    if A.dim == 0:
        return True
    R = A.basis - B.basis @ (B.basis.T @ A.basis)
    return float(np.linalg.norm(R, 2)) <= atol


# -- covariance --------------------------------------------------------------


def noise_factor(Sigma) -> np.ndarray:
    """Factor an SPD covariance as ``Sigma = B B^T`` with ``B = W Λ^{1/2}``."""
    S = as_matrix(Sigma, "Sigma")
    if S.shape[0] != S.shape[1]:
        raise ContractError(f"Sigma must be square, got {S.shape}")
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-10:
        raise ContractError("Sigma is not symmetric")
    S = 0.5 * (S + S.T)
    if S.size == 0:
        return S.copy()
    try:
        lam, W = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed") from exc
    floor = rank_tolerance(S.shape, float(np.max(np.abs(lam))))
    if lam[0] <= floor:
        raise NotPositiveDefiniteError(
            f"Sigma has eigenvalue {lam[0]:.3e} <= {floor:.3e}"
        )
    return W * np.sqrt(lam)


def pinv_kernel_check(H, atol: float = 1e-8) -> bool:
    """Check that ``Ker((H^+)^T)`` and ``Ker(H)`` coincide."""
    H = as_matrix(H, "H")
    P = pseudoinverse(H)
    return same_subspace(kernel_basis(P.T), kernel_basis(H), atol)
