"""Dense complex linear algebra and entropy primitives.

Composite basis convention: for subsystems with dimensions ``(d_0, d_1, ...)``
the product vector ``|a_0 a_1 ...>`` sits at the row-major index, so for two
systems ``|a>|b>`` maps to ``a * d_B + b``. This is exactly ``np.kron`` order.

All entropies are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
PROB_CLIP_TOL = 1e-12


class InvalidStateError(ValueError):
    """Raised when a matrix fails the density-operator invariants."""


def _check_finite(M: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf entries")


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, PSD, unit-trace matrix with subsystem dimensions.

    Construction validates every invariant; pass ``check=False`` only for
    matrices already known to be valid.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, matrix, dims: Sequence[int], check: bool = True):
        M = np.array(matrix, dtype=np.complex128)
        dims = tuple(int(k) for k in dims)
        n = int(np.prod(dims))
        if M.shape != (n, n):
            raise InvalidStateError(
                f"matrix shape {M.shape} does not match dims {dims}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "dims", dims)
        if check:
            validate_density(M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, vec, dims: Sequence[int]) -> "DensityOperator":
        v = np.asarray(vec, dtype=np.complex128).reshape(-1)
        return cls(np.outer(v, v.conj()), dims)

    def __repr__(self) -> str:
        return f"DensityOperator(dims={self.dims})"


def validate_density(M: np.ndarray) -> None:
    """Raise :class:`InvalidStateError` unless ``M`` is a density matrix."""
    _check_finite(M)
    herm = np.max(np.abs(M - M.conj().T)) if M.size else 0.0
    if herm > HERMITIAN_TOL:
        raise InvalidStateError(f"not Hermitian (max |M - M^H| = {herm:.3e})")
    tr = np.trace(M).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidStateError(f"trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(M)[0]
    if lam_min < -PSD_TOL:
        raise InvalidStateError(f"negative eigenvalue {lam_min:.3e}")


def is_density(M: np.ndarray) -> bool:
    try:
        validate_density(np.asarray(M, dtype=np.complex128))
    except InvalidStateError:
        return False
    return True


def as_probability_vector(weights) -> np.ndarray:
    """Validate a probability vector, clipping tiny negative round-off to 0."""
    p = np.asarray(weights, dtype=float).reshape(-1)
    _check_finite(p, "probability vector")
    if np.any(p < -PROB_CLIP_TOL):
        raise ValueError(f"negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    if abs(p.sum() - 1.0) > TRACE_TOL:
        raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
    return p


def tensor_product(*mats) -> np.ndarray:
    """Kronecker product; the first factor is the slowest index."""
    out = np.array([[1.0 + 0j]])
    for M in mats:
        M = np.asarray(M, dtype=np.complex128)
        _check_finite(M)
        out = np.kron(out, M)
    return out


def _normalize_keep(keep, n_sys: int) -> list[int]:
    if isinstance(keep, (int, np.integer)):
        keep = [keep]
    keep = sorted(set(int(k) for k in keep))
    for k in keep:
        if not 0 <= k < n_sys:
            raise ValueError(f"subsystem index {k} out of range for {n_sys} systems")
    return keep


def partial_trace_matrix(M: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Partial trace of a raw matrix, keeping the subsystems in ``keep``."""
    dims = list(dims)
    n = len(dims)
    keep = _normalize_keep(keep, n)
    T = np.asarray(M).reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    # contract traced pairs from the highest index down so axis numbers stay valid
    for k in sorted(traced, reverse=True):
        n_cur = T.ndim // 2
        T = np.trace(T, axis1=k, axis2=k + n_cur)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return T.reshape(dk, dk)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    keep = _normalize_keep(keep, len(rho.dims))
    red = partial_trace_matrix(rho.matrix, rho.dims, keep)
    return DensityOperator(red, [rho.dims[k] for k in keep] or [1])


def eigenvalues_hermitian(M, density: bool = False) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix in descending order.

    With ``density=True`` values within 1e-9 of [0, 1] are clipped into it.
    """
    M = np.asarray(M, dtype=np.complex128)
    _check_finite(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix is not square")
    herm = np.max(np.abs(M - M.conj().T)) if M.size else 0.0
    if herm > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (deviation {herm:.3e})")
    lam = np.linalg.eigvalsh(M)[::-1]
    if density:
        if lam.size and (lam[-1] < -PSD_TOL or lam[0] > 1 + PSD_TOL):
            raise InvalidStateError("eigenvalues outside [0, 1] for a density input")
        lam = np.clip(lam, 0.0, 1.0)
    return lam


def shannon_entropy(p) -> float:
    """H(p) = -sum p log2 p with 0 log 0 = 0."""
    p = as_probability_vector(p)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr rho log2 rho."""
    M = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    if not isinstance(rho, DensityOperator):
        validate_density(np.asarray(M, dtype=np.complex128))
    lam = eigenvalues_hermitian(M, density=True)
    lam = lam / lam.sum()
    return max(0.0, shannon_entropy(lam))


def entropy_rows(P: np.ndarray) -> np.ndarray:
    """Shannon entropies (bits) of each row of a batch of non-negative arrays."""
    P = np.clip(np.asarray(P, dtype=float), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, -P * np.log2(np.where(P > 0, P, 1.0)), 0.0)
    return terms.sum(axis=-1)
