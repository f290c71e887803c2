"""Weyl operators, generalized Bell and test bases, and state samplers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .linalg import DensityOperator, as_probability_vector

NORM_TOL = 1e-9


def _check_dim(d: int) -> int:
    d = int(d)
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    return d


def _check_index(d: int, *idx: int) -> None:
    for k in idx:
        if not 0 <= int(k) < d:
            raise ValueError(f"index {k} out of range for d={d}")


@dataclass(frozen=True)
class BellLabel:
    """Shift ``x`` and phase ``y`` of a generalized Bell state."""

    x: int
    y: int

    def check(self, d: int) -> "BellLabel":
        _check_index(d, self.x, self.y)
        return self


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "dims", tuple(int(k) for k in self.dims))
        if a.size != int(np.prod(self.dims)):
            raise ValueError("amplitude count does not match dims")
        norm = np.vdot(a, a).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm^2 = {norm!r})")

    def density(self) -> DensityOperator:
        return DensityOperator.from_pure(self.amplitudes, self.dims)


@dataclass(frozen=True)
class MixtureSpec:
    """A Bell mixture: distinct labels with mixing probabilities."""

    d: int
    labels: tuple[BellLabel, ...]
    probs: np.ndarray

    def __post_init__(self):
        _check_dim(self.d)
        labels = tuple(
            lab if isinstance(lab, BellLabel) else BellLabel(*lab)
            for lab in self.labels)
        for lab in labels:
            lab.check(self.d)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate Bell labels in mixture")
        probs = as_probability_vector(self.probs)
        if probs.size != len(labels):
            raise ValueError("label and probability counts differ")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.probs > 0))

    def shift_marginal(self) -> np.ndarray:
        """Probability of each shift value x (summed over phases y)."""
        pt = np.zeros(self.d)
        for lab, p in zip(self.labels, self.probs):
            pt[lab.x] += p
        return pt

    def weight_table(self) -> np.ndarray:
        """d x d array ``P[x, y]`` of mixing weights."""
        P = np.zeros((self.d, self.d))
        for lab, p in zip(self.labels, self.probs):
            P[lab.x, lab.y] = p
        return P


@lru_cache(maxsize=None)
def _weyl_stack(d: int) -> np.ndarray:
    w = np.exp(2j * np.pi / d)
    l = np.arange(d)
    ops = np.zeros((d, d, d, d), dtype=np.complex128)
    for x in range(d):
        for y in range(d):
            ops[x, y, l, (l + x) % d] = w ** (l * y)
    ops.setflags(write=False)
    return ops


def weyl_unitary(d: int, x: int, y: int) -> np.ndarray:
    """U^{xy} = sum_l exp(2 pi i l y / d) |l><l + x mod d|."""
    d = _check_dim(d)
    _check_index(d, x, y)
    return _weyl_stack(d)[x, y].copy()


def weyl_operators(d: int) -> np.ndarray:
    """All Weyl unitaries as a read-only array indexed ``[x, y]``."""
    return _weyl_stack(_check_dim(d))


@lru_cache(maxsize=None)
def _bell_stack(d: int) -> np.ndarray:
    w = np.exp(2j * np.pi / d)
    l = np.arange(d)
    vecs = np.zeros((d, d, d * d), dtype=np.complex128)
    for x in range(d):
        for y in range(d):
            vecs[x, y, l * d + (l + x) % d] = w ** (l * y) / np.sqrt(d)
    vecs.setflags(write=False)
    return vecs


def bell_vector(d: int, x: int, y: int) -> np.ndarray:
    d = _check_dim(d)
    _check_index(d, x, y)
    return _bell_stack(d)[x, y].copy()


def bell_basis(d: int) -> np.ndarray:
    """(d^2, d^2) array whose row ``x*d + y`` is |B(xy)>."""
    d = _check_dim(d)
    return _bell_stack(d).reshape(d * d, d * d)


def bell_state(d: int, label) -> PureState:
    lab = label if isinstance(label, BellLabel) else BellLabel(*label)
    return PureState(bell_vector(d, lab.x, lab.y), (d, d))


def max_entangled(d: int) -> PureState:
    """|phi+> = sum_p |p, p> / sqrt(d)."""
    d = _check_dim(d)
    v = np.zeros(d * d, dtype=np.complex128)
    v[np.arange(d) * (d + 1)] = 1 / np.sqrt(d)
    return PureState(v, (d, d))


@lru_cache(maxsize=None)
def _test_stack(d: int) -> np.ndarray:
    w = np.exp(2j * np.pi / d)
    l = np.arange(d)
    vecs = np.zeros((d, d, d * d), dtype=np.complex128)
    for j in range(d):
        for k in range(d):
            vecs[j, k, j * d + l] = w ** (k * l) / np.sqrt(d)
    vecs.setflags(write=False)
    return vecs


def test_basis_vector(d: int, j: int, k: int) -> PureState:
    """|j, k_-|> = |j> (x) sum_l exp(2 pi i k l / d) |l> / sqrt(d)."""
    d = _check_dim(d)
    _check_index(d, j, k)
    return PureState(_test_stack(d)[j, k], (d, d))


# not a pytest test despite the name
test_basis_vector.__test__ = False


def test_basis(d: int) -> np.ndarray:
    """(d^2, d^2) array whose row ``j*d + k`` is |j, k_-|>."""
    d = _check_dim(d)
    return _test_stack(d).reshape(d * d, d * d)


test_basis.__test__ = False


def bell_mixture(spec: MixtureSpec) -> DensityOperator:
    d = spec.d
    B = bell_basis(d)
    idx = [lab.x * d + lab.y for lab in spec.labels]
    V = B[idx]
    rho = (V.T * spec.probs) @ V.conj()
    return DensityOperator(rho, (d, d))


def _all_labels(d: int) -> list[BellLabel]:
    return [BellLabel(x, y) for x in range(d) for y in range(d)]


def random_bell_mixture(d: int, R: int, rng: np.random.Generator) -> MixtureSpec:
    """R distinct labels drawn uniformly; weights are normalized uniforms."""
    d = _check_dim(d)
    if not 1 <= R <= d * d:
        raise ValueError(f"rank R={R} must lie in [1, {d * d}]")
    picks = rng.choice(d * d, size=R, replace=False)
    u = rng.uniform(0.0, 1.0, size=R)
    # uniform(0, 1) can return exactly 0; redraw keeps the rank at R
    while np.any(u == 0.0):
        u[u == 0.0] = rng.uniform(0.0, 1.0, size=int(np.sum(u == 0.0)))
    labels = tuple(BellLabel(int(k) // d, int(k) % d) for k in picks)
    return MixtureSpec(d, labels, u / u.sum())


def random_rank2_state(d: int, rng: np.random.Generator,
                       complex_amplitudes: bool = False) -> DensityOperator:
    """p1 |psi1><psi1| + p2 |psi2><psi2| with psi1 on |ii>, psi2 on |i, i+1>.

    Amplitudes are standard normal (real unless ``complex_amplitudes``).
    """
    d = _check_dim(d)

    def gaussian():
        a = rng.standard_normal(d)
        if complex_amplitudes:
            a = a + 1j * rng.standard_normal(d)
        return a / np.linalg.norm(a)

    a1, a2 = gaussian(), gaussian()
    i = np.arange(d)
    psi1 = np.zeros(d * d, dtype=np.complex128)
    psi2 = np.zeros(d * d, dtype=np.complex128)
    psi1[i * d + i] = a1
    psi2[i * d + (i + 1) % d] = a2
    p1 = rng.uniform(0.0, 1.0)
    rho = p1 * np.outer(psi1, psi1.conj()) + (1 - p1) * np.outer(psi2, psi2.conj())
    return DensityOperator(rho, (d, d))


def schmidt_decomposition(psi: PureState):
    """Return (coefficients, left vectors, right vectors), coefficients descending."""
    dA, dB = psi.dims
    M = psi.amplitudes.reshape(dA, dB)
    W, s, Vh = np.linalg.svd(M)
    # numpy's SVD is already descending; a stable sort pins the tie order
    order = np.argsort(-s, kind="stable")
    return s[order], W[:, order], Vh[order, :]


def canonicalize_mes(psi: PureState):
    """Local unitaries (U, V) with (U x V) psi = sum_i sqrt(lambda_i) |ii>.

    Returns ``(U, V, psi_canonical)``. For a maximally entangled input the
    canonical state is |phi+>.
    """
    if len(psi.dims) != 2:
        raise ValueError("canonicalize_mes needs a bipartite state")
    s, W, Vh = schmidt_decomposition(psi)
    U = W.conj().T
    V = Vh.conj()
    out = np.kron(U, V) @ psi.amplitudes
    return U, V, PureState(out, psi.dims)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_density_matrix(dims: Sequence[int], rng: np.random.Generator,
                          rank: int | None = None) -> DensityOperator:
    """Generic mixed state G G^H / Tr from a complex Ginibre matrix."""
    n = int(np.prod(dims))
    k = n if rank is None else int(rank)
    G = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = G @ G.conj().T
    return DensityOperator(rho / np.trace(rho).real, dims)
