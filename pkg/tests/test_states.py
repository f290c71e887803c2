import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sdc_qkd.linalg import eigenvalues_hermitian, partial_trace, von_neumann_entropy
from sdc_qkd.states import (
    BellLabel,
    MixtureSpec,
    PureState,
    bell_basis,
    bell_mixture,
    bell_state,
    canonicalize_mes,
    max_entangled,
    random_bell_mixture,
    random_rank2_state,
    random_unitary,
    schmidt_decomposition,
    test_basis,
    test_basis_vector,
    weyl_operators,
    weyl_unitary,
)

DIMS = range(2, 7)


def test_weyl_matches_oracle():
    for d in (2, 3, 4):
        for x in range(d):
            for y in range(d):
                assert np.allclose(weyl_unitary(d, x, y), oracles.weyl(d, x, y), atol=1e-14)


def test_weyl_identity_and_qubit_structure():
    for d in DIMS:
        assert np.array_equal(weyl_unitary(d, 0, 0), np.eye(d))
    X = np.array([[0, 1], [1, 0]])
    Z = np.diag([1, -1])
    assert np.allclose(weyl_unitary(2, 1, 0), X)
    assert np.allclose(weyl_unitary(2, 0, 1), Z)
    # (1, 1) is Y up to a global phase
    U = weyl_unitary(2, 1, 1)
    Y = np.array([[0, -1j], [1j, 0]])
    phase = U[0, 1] / Y[0, 1]
    assert abs(abs(phase) - 1) < 1e-12 and np.allclose(U, phase * Y)


@pytest.mark.parametrize("d", list(DIMS))
def test_weyl_unitary_and_orthogonal(d):
    U = weyl_operators(d).reshape(d * d, d, d)
    for k in range(d * d):
        assert np.max(np.abs(U[k].conj().T @ U[k] - np.eye(d))) < 1e-12
    gram = np.einsum("kab,lab->kl", U.conj(), U)
    assert np.max(np.abs(gram - d * np.eye(d * d))) < 1e-12


def test_weyl_out_of_range():
    with pytest.raises(ValueError):
        weyl_unitary(3, 3, 0)
    with pytest.raises(ValueError):
        weyl_unitary(1, 0, 0)


def test_bell_qubit_and_mes():
    v = bell_state(2, (0, 0)).amplitudes
    assert np.allclose(v, np.array([1, 0, 0, 1]) / np.sqrt(2))
    for d in DIMS:
        assert np.allclose(bell_state(d, (0, 0)).amplitudes, max_entangled(d).amplitudes)


@pytest.mark.parametrize("d", list(DIMS))
def test_bell_orthonormal_complete(d):
    B = bell_basis(d)
    assert np.max(np.abs(B.conj() @ B.T - np.eye(d * d))) < 1e-12
    assert np.max(np.abs(B.T @ B.conj() - np.eye(d * d))) < 1e-10
    for x in range(d):
        for y in range(d):
            assert np.allclose(B[x * d + y], oracles.bell(d, x, y), atol=1e-14)


def test_bell_label_invalid():
    with pytest.raises(ValueError):
        bell_state(3, (0, 3))


def test_max_entangled_marginals():
    for d in (2, 5):
        rho = max_entangled(d).density()
        assert abs(von_neumann_entropy(partial_trace(rho, [0])) - math.log2(d)) < 1e-12
        assert np.allclose(partial_trace(rho, [1]).matrix, np.eye(d) / d)
    with pytest.raises(ValueError):
        max_entangled(1)


def test_test_basis_examples():
    v = test_basis_vector(2, 0, 0).amplitudes
    assert np.allclose(v, np.kron([1, 0], [1, 1]) / np.sqrt(2))
    for d in (2, 3, 4):
        for j in range(d):
            for k in range(d):
                assert np.allclose(test_basis_vector(d, j, k).amplitudes,
                                   oracles.test_vec(d, j, k), atol=1e-14)
    with pytest.raises(ValueError):
        test_basis_vector(2, 2, 0)


@pytest.mark.parametrize("d", list(DIMS))
def test_test_basis_orthonormal_and_unbiased(d):
    T = test_basis(d)
    assert np.max(np.abs(T.conj() @ T.T - np.eye(d * d))) < 1e-12
    overlaps = np.abs(T.conj() @ bell_basis(d).T) ** 2
    assert np.max(np.abs(overlaps - 1 / d ** 2)) < 1e-12


def test_bell_mixture_examples():
    pure = bell_mixture(MixtureSpec(3, [(1, 2)], [1.0])).matrix
    v = bell_state(3, (1, 2)).amplitudes
    assert np.allclose(pure, np.outer(v, v.conj()))
    labels = [(x, y) for x in range(2) for y in range(2)]
    assert np.allclose(bell_mixture(MixtureSpec(2, labels, [0.25] * 4)).matrix, np.eye(4) / 4)
    lam = eigenvalues_hermitian(bell_mixture(MixtureSpec(3, [(0, 0), (1, 2)], [0.7, 0.3])).matrix)
    assert np.allclose(lam, [0.7, 0.3] + [0] * 7, atol=1e-12)


def test_mixture_spec_validation():
    with pytest.raises(ValueError):
        MixtureSpec(2, [(0, 0), (0, 0)], [0.5, 0.5])
    with pytest.raises(ValueError):
        MixtureSpec(2, [(0, 0), (0, 1)], [0.5, 0.6])
    with pytest.raises(ValueError):
        MixtureSpec(2, [(0, 2)], [1.0])
    spec = MixtureSpec(3, [(1, 0), (1, 2), (2, 2)], [0.2, 0.3, 0.5])
    assert np.allclose(spec.shift_marginal(), [0, 0.5, 0.5])
    assert spec.rank == 3


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.data())
def test_bell_mixture_spectrum_and_marginals(seed, d, data):
    R = data.draw(st.integers(1, d * d))
    spec = random_bell_mixture(d, R, np.random.default_rng(seed))
    rho = bell_mixture(spec)
    lam = eigenvalues_hermitian(rho.matrix, density=True)
    assert np.allclose(lam[:R], np.sort(spec.probs)[::-1], atol=1e-12)
    assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == R
    assert abs(von_neumann_entropy(partial_trace(rho, [0])) - math.log2(d)) < 1e-9
    assert abs(von_neumann_entropy(partial_trace(rho, [1])) - math.log2(d)) < 1e-9


def test_random_bell_mixture_contract():
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(1000):
        spec = random_bell_mixture(2, 4, rng)
        assert len(set(spec.labels)) == 4
        seen.update(spec.labels)
    assert seen == {BellLabel(x, y) for x in range(2) for y in range(2)}
    with pytest.raises(ValueError):
        random_bell_mixture(2, 5, rng)
    a = random_bell_mixture(3, 3, np.random.default_rng(9))
    b = random_bell_mixture(3, 3, np.random.default_rng(9))
    assert a.labels == b.labels and np.array_equal(a.probs, b.probs)
    assert np.all(a.probs > 0) and abs(a.probs.sum() - 1) < 1e-12


def test_random_bell_mixture_label_coverage_is_uniform():
    rng = np.random.default_rng(1)
    counts = np.zeros(9)
    for _ in range(3000):
        for lab in random_bell_mixture(3, 2, rng).labels:
            counts[lab.x * 3 + lab.y] += 1
    expected = 3000 * 2 / 9
    assert np.all(np.abs(counts - expected) < 5 * math.sqrt(expected))


def test_random_rank2_state():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        rho = random_rank2_state(d, rng)  # invariants checked at construction
        assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == 2
        assert np.allclose(rho.matrix.imag, 0)
    c = random_rank2_state(3, np.random.default_rng(4), complex_amplitudes=True)
    assert np.abs(c.matrix.imag).max() > 0
    a = random_rank2_state(4, np.random.default_rng(5)).matrix
    b = random_rank2_state(4, np.random.default_rng(5)).matrix
    assert np.array_equal(a, b)


def test_canonicalize_rotated_mes(rng):
    for d in (2, 3, 4):
        U, V = random_unitary(d, rng), random_unitary(d, rng)
        psi = PureState(np.kron(U, V) @ max_entangled(d).amplitudes, (d, d))
        A, B, out = canonicalize_mes(psi)
        assert np.allclose(out.amplitudes, max_entangled(d).amplitudes, atol=1e-10)
        assert np.allclose(np.kron(A, B) @ psi.amplitudes, out.amplitudes)
        assert np.allclose(A.conj().T @ A, np.eye(d)) and np.allclose(B.conj().T @ B, np.eye(d))


def test_canonicalize_product(rng):
    e = random_unitary(3, rng)[:, 0]
    f = random_unitary(3, rng)[:, 1]
    _, _, out = canonicalize_mes(PureState(np.kron(e, f), (3, 3)))
    target = np.zeros(9)
    target[0] = 1
    assert np.allclose(out.amplitudes, target, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
def test_canonical_form_properties(seed, d):
    r = np.random.default_rng(seed)
    a = r.normal(size=d * d) + 1j * r.normal(size=d * d)
    psi = PureState(a / np.linalg.norm(a), (d, d))
    s, _, _ = schmidt_decomposition(psi)
    lam = eigenvalues_hermitian(partial_trace(psi.density(), [0]).matrix, density=True)
    assert np.allclose(s ** 2, lam, atol=1e-10)
    _, _, out = canonicalize_mes(psi)
    M = out.amplitudes.reshape(d, d)
    assert np.allclose(M, np.diag(np.diag(M)), atol=1e-10)
    diag = np.diag(M)
    assert np.allclose(diag.imag, 0, atol=1e-10)
    assert np.all(diag.real >= -1e-12) and np.all(np.diff(diag.real) <= 1e-12)


def test_pure_state_rejects_unnormalized():
    with pytest.raises(ValueError):
        PureState(np.ones(4), (2, 2))
