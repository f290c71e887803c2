"""Kraus noise channels on a single qudit and their action on subsystems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DensityOperator
from .states import weyl_operators

COMPLETENESS_TOL = 1e-9

FAMILIES = ("identity", "depolarising", "dit-phase-flip", "amplitude-damping")

_ALIASES = {
    "none": "identity",
    "id": "identity",
    "dp": "depolarising",
    "depolarizing": "depolarising",
    "dph": "dit-phase-flip",
    "d-ph": "dit-phase-flip",
    "ad": "amplitude-damping",
}


@dataclass(frozen=True, eq=False)
class KrausChannel:
    d: int
    operators: tuple
    family: str = "custom"
    p: float = 0.0

    def __post_init__(self):
        ops = tuple(np.asarray(K, dtype=np.complex128) for K in self.operators)
        for K in ops:
            if K.shape != (self.d, self.d):
                raise ValueError(f"Kraus operator of shape {K.shape}, expected d={self.d}")
            K.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        res = completeness_residual(ops)
        if res > COMPLETENESS_TOL:
            raise ValueError(f"Kraus operators are not complete (residual {res:.3e})")

    def stacked(self) -> np.ndarray:
        return np.stack(self.operators)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        """Apply to a raw d x d matrix."""
        K = self.stacked()
        return np.einsum("kab,bc,kdc->ad", K, rho, K.conj())

    def adjoint(self, X: np.ndarray) -> np.ndarray:
        """Heisenberg-picture map X -> sum K^H X K."""
        K = self.stacked()
        return np.einsum("kba,bc,kcd->ad", K.conj(), X, K)

    def __repr__(self) -> str:
        return f"KrausChannel({self.family!r}, d={self.d}, p={self.p}, n_ops={len(self.operators)})"


def completeness_residual(ops) -> float:
    ops = list(ops)
    d = ops[0].shape[0]
    S = sum(K.conj().T @ K for K in ops)
    return float(np.max(np.abs(S - np.eye(d))))


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise strength p={p} outside [0, 1]")
    return p


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(d, (np.eye(d),), "identity", 0.0)


def depolarising(d: int, p: float) -> KrausChannel:
    """Weyl-covariant depolarising channel rho -> (1 - p) rho + p I/d.

    K^{00} = sqrt(1 - (d^2 - 1) p / d^2) I and K^{ij} = (sqrt(p) / d) U^{ij}
    for (i, j) != (0, 0).
    """
    p = _check_p(p)
    U = weyl_operators(d)
    ops = [np.sqrt(1 - (d * d - 1) * p / (d * d)) * U[0, 0]]
    if p > 0:
        ops += [np.sqrt(p) / d * U[i, j]
                for i in range(d) for j in range(d) if (i, j) != (0, 0)]
    return KrausChannel(d, tuple(ops), "depolarising", p)


def dit_phase_flip(d: int, p: float) -> KrausChannel:
    """K^{00} = sqrt(1 - p) I, K^{ij} = sqrt(p)/(d - 1) U^{ij} for 1 <= i, j <= d-1."""
    p = _check_p(p)
    U = weyl_operators(d)
    ops = [np.sqrt(1 - p) * U[0, 0]]
    if p > 0:
        ops += [np.sqrt(p) / (d - 1) * U[i, j]
                for i in range(1, d) for j in range(1, d)]
    return KrausChannel(d, tuple(ops), "dit-phase-flip", p)


def amplitude_damping(d: int, p: float) -> KrausChannel:
    """K^0 = |0><0| + sqrt(1-p) sum_{i>0} |i><i|, K^i = sqrt(p) |0><i|."""
    p = _check_p(p)
    K0 = np.diag([1.0] + [np.sqrt(1 - p)] * (d - 1)).astype(np.complex128)
    ops = [K0]
    if p > 0:
        for i in range(1, d):
            K = np.zeros((d, d), dtype=np.complex128)
            K[0, i] = np.sqrt(p)
            ops.append(K)
    return KrausChannel(d, tuple(ops), "amplitude-damping", p)


def normalize_family(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValueError(f"unknown noise family {name!r}; choose from {FAMILIES}")
    return key


def make_channel(family: str, d: int, p: float = 0.0) -> KrausChannel:
    family = normalize_family(family)
    if family == "identity":
        return identity_channel(d)
    return {"depolarising": depolarising,
            "dit-phase-flip": dit_phase_flip,
            "amplitude-damping": amplitude_damping}[family](d, p)


def apply_to_subsystem(ops: np.ndarray, M: np.ndarray, dims, target: int) -> np.ndarray:
    """sum_k (I x K_k x I) M (I x K_k x I)^H on raw (possibly batched) matrices.

    ``M`` may carry leading batch axes; the last two axes are the matrix.
    """
    dims = list(dims)
    n = len(dims)
    batch = M.shape[:-2]
    T = M.reshape(batch + tuple(dims) + tuple(dims))
    nb = len(batch)
    ax_row = nb + target
    ax_col = nb + n + target
    out = np.zeros_like(T)
    for K in ops:
        # K acts on the row index, K^* on the column index
        A = np.moveaxis(np.tensordot(K, T, axes=([1], [ax_row])), 0, ax_row)
        A = np.moveaxis(np.tensordot(K.conj(), A, axes=([1], [ax_col])), 0, ax_col)
        out += A
    return out.reshape(M.shape)


def apply_channel(ch: KrausChannel, rho: DensityOperator, target: int) -> DensityOperator:
    if not 0 <= target < len(rho.dims):
        raise ValueError(f"target subsystem {target} out of range")
    if rho.dims[target] != ch.d:
        raise ValueError(
            f"channel dimension {ch.d} does not match subsystem dimension {rho.dims[target]}")
    out = apply_to_subsystem(ch.operators, rho.matrix, rho.dims, target)
    return DensityOperator(out, rho.dims)
