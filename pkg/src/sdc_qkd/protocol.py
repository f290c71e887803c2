"""The purified dense-coding key distribution pipeline.

Subsystem labels used throughout: slot 0 is Alice's kept qudit (A), slot 1 is
the transmitted qudit (A' -> B on the way out, C -> A' on the way back).

Outcome tables are ``(d^2, d^2)`` arrays: row ``i*d + j`` is Alice's outcome
(i, j), column ``x*d + y`` is Bob's outcome.

Label conventions
-----------------
Key run: Bob's column (x, y) is the Weyl unitary U^{xy} he applied. Since
(I x U^{xy}) |B(a, b)> is proportional to |B(a - x, b + y)>, a noiseless Bell
mixture gives q(ij, xy) = (1/d^2) sum p(a, b) [i = a - x][j = b + y].

Test run: Bob projects (B, B') onto |r, s_-|> with B' half of the ancilla
|phi+>_{B'C}; the returned qudit C is left in the conjugate Fourier state, so
a noiseless Bell mixture gives h(ij, rs) = (1/d^2) sum p(a, b) [i = r - a][j = -s].

The closed forms usually quoted for these tables, with [i = a + r][j = b + s]
and [i = a + r][j = s], are the same tables after negating some labels mod d;
:func:`to_quoted_labels` performs that relabeling. Entropies are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, apply_to_subsystem, identity_channel, make_channel
from .linalg import DensityOperator, entropy_rows
from .states import BellLabel, MixtureSpec, bell_basis, test_basis, weyl_operators

TABLE_TOL = 1e-9
NEGATIVE_TOL = 1e-12
BRANCH_TRACE_FLOOR = 1e-12


@dataclass(frozen=True)
class ProtocolConfig:
    d: int
    pre_channel: KrausChannel
    post_channel: KrausChannel

    def __post_init__(self):
        for name in ("pre_channel", "post_channel"):
            ch = getattr(self, name)
            if ch.d != self.d:
                raise ValueError(f"{name} acts on d={ch.d}, protocol uses d={self.d}")

    @classmethod
    def noiseless(cls, d: int) -> "ProtocolConfig":
        ch = identity_channel(d)
        return cls(d, ch, ch)

    @classmethod
    def symmetric(cls, d: int, family: str, p: float) -> "ProtocolConfig":
        """Identical but independent channels before and after encoding."""
        ch = make_channel(family, d, p)
        return cls(d, ch, ch)

    @property
    def is_noiseless(self) -> bool:
        return (self.pre_channel.family == "identity"
                and self.post_channel.family == "identity")


@dataclass(frozen=True, eq=False)
class JointOutcomeDistribution:
    """Joint probabilities of Alice's (rows) and Bob's (columns) outcomes."""

    d: int
    table: np.ndarray
    kind: str = "key"

    def __post_init__(self):
        T = np.asarray(self.table, dtype=float)
        n = self.d * self.d
        if T.shape != (n, n):
            raise ValueError(f"table shape {T.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(T)):
            raise ValueError("table has non-finite entries")
        if T.min() < -NEGATIVE_TOL:
            raise ValueError(f"negative probability {T.min():.3e}")
        T = np.clip(T, 0.0, None)
        if abs(T.sum() - 1.0) > TABLE_TOL:
            raise ValueError(f"table sums to {T.sum()!r}")
        T.setflags(write=False)
        object.__setattr__(self, "table", T)

    def alice_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def bob_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def tensor(self) -> np.ndarray:
        """Four-index view ``[i, j, x, y]``."""
        d = self.d
        return self.table.reshape(d, d, d, d)


def _check_two_qudit(rho: DensityOperator, d: int) -> None:
    if rho.dims != (d, d):
        raise ValueError(f"expected a two-qudit state with dims ({d}, {d}), got {rho.dims}")


def _encoding_ops(d: int) -> np.ndarray:
    """(d^2, d^2, d^2) stack of I x U^{xy}, indexed x*d + y."""
    U = weyl_operators(d).reshape(d * d, d, d)
    return np.einsum("ab,kcd->kacbd", np.eye(d), U).reshape(d * d, d * d, d * d)


def _bob_test_kernel(d: int) -> np.ndarray:
    """K[rs, b, c] = sum_e <r, s_-|_{b e} <e|phi+>_{e c}: maps B onto C."""
    T = test_basis(d).reshape(d * d, d, d)
    # <e, c|phi+> = delta_ec / sqrt(d)
    return T.conj() / np.sqrt(d)


def encode_branch(rho_AB: DensityOperator, label) -> tuple[float, DensityOperator]:
    """Encoding branch (x, y): probability 1/d^2 and (I x U^{xy}) rho (I x U^{xy})^H."""
    d = rho_AB.dims[0]
    _check_two_qudit(rho_AB, d)
    lab = label if isinstance(label, BellLabel) else BellLabel(*label)
    lab.check(d)
    W = np.kron(np.eye(d), weyl_operators(d)[lab.x, lab.y])
    return 1.0 / (d * d), DensityOperator(W @ rho_AB.matrix @ W.conj().T, (d, d))


def key_run_tables(cfg: ProtocolConfig, rho_in: np.ndarray) -> np.ndarray:
    """Raw key-run table for a (batch of) input matrices, branch by branch."""
    d = cfg.d
    dims = (d, d)
    rho_AB = apply_to_subsystem(cfg.pre_channel.operators, rho_in, dims, 1)
    W = _encoding_ops(d)
    # branches stacked on a new axis just before the matrix axes
    branches = W @ rho_AB[..., None, :, :] @ W.conj().swapaxes(-1, -2)
    branches = apply_to_subsystem(cfg.post_channel.operators, branches, dims, 1)
    B = bell_basis(d)
    q = np.einsum("ia,...xab,ib->...ix", B.conj(), branches, B).real
    return q / (d * d)


def test_run_branch_states(cfg: ProtocolConfig, rho_in: np.ndarray) -> np.ndarray:
    """Unnormalized (A, C) states after Bob's test projection, before return.

    Shape ``(..., d^2, d^2, d^2)`` indexed by Bob's outcome r*d + s. Each trace
    is that outcome's probability.
    """
    d = cfg.d
    dims = (d, d)
    rho_AB = apply_to_subsystem(cfg.pre_channel.operators, rho_in, dims, 1)
    batch = rho_AB.shape[:-2]
    R = rho_AB.reshape(batch + (d, d, d, d))
    K = _bob_test_kernel(d)
    sigma = np.einsum("sbc,...abAB,sBC->...sacAC", K, R, K.conj())
    return sigma.reshape(batch + (d * d, d * d, d * d))


def test_run_tables(cfg: ProtocolConfig, rho_in: np.ndarray) -> np.ndarray:
    d = cfg.d
    sigma = test_run_branch_states(cfg, rho_in)
    sigma = apply_to_subsystem(cfg.post_channel.operators, sigma, (d, d), 1)
    T = test_basis(d)
    return np.einsum("ia,...sab,ib->...is", T.conj(), sigma, T).real


def test_run_branches(cfg: ProtocolConfig, rho_in: DensityOperator):
    """List of (probability, normalized branch state or None) per Bob outcome."""
    _check_two_qudit(rho_in, cfg.d)
    sigma = test_run_branch_states(cfg, rho_in.matrix)
    out = []
    for S in sigma:
        pr = float(np.trace(S).real)
        if pr > BRANCH_TRACE_FLOOR:
            out.append((pr, DensityOperator(S / pr, (cfg.d, cfg.d))))
        else:
            out.append((max(pr, 0.0), None))
    return out


def key_run_distribution(cfg: ProtocolConfig, rho_in: DensityOperator) -> JointOutcomeDistribution:
    """q(ij, xy): pre-channel, Weyl encoding, post-channel, Alice's Bell measurement."""
    _check_two_qudit(rho_in, cfg.d)
    return JointOutcomeDistribution(cfg.d, key_run_tables(cfg, rho_in.matrix), "key")


def test_run_distribution(cfg: ProtocolConfig, rho_in: DensityOperator) -> JointOutcomeDistribution:
    """h(ij, rs): pre-channel, Bob's test projection, post-channel, Alice's test measurement."""
    _check_two_qudit(rho_in, cfg.d)
    return JointOutcomeDistribution(cfg.d, test_run_tables(cfg, rho_in.matrix), "test")


def conditional_entropies(tables: np.ndarray) -> np.ndarray:
    """H(joint) - H(Alice marginal) for a batch of tables (..., n_alice, n_bob)."""
    T = np.clip(np.asarray(tables, dtype=float), 0.0, None)
    flat = T.reshape(T.shape[:-2] + (-1,))
    return entropy_rows(flat) - entropy_rows(T.sum(axis=-1))


def conditional_entropy_B_given_A(q: JointOutcomeDistribution) -> float:
    """S(B|A) = H(A, B) - H(A) in bits."""
    if not isinstance(q, JointOutcomeDistribution):
        raise TypeError("expected a JointOutcomeDistribution")
    return max(0.0, float(conditional_entropies(q.table)))


def overlap_constant(d: int) -> float:
    """max |<j k_-|B(xy)>|^2 over both bases, which must equal 1/d^2."""
    G = np.abs(test_basis(d).conj() @ bell_basis(d).T) ** 2
    c = float(G.max())
    if abs(c - 1.0 / (d * d)) > 1e-12:
        raise ArithmeticError(f"overlap constant {c!r} differs from 1/d^2")
    return 1.0 / (d * d)


# closed forms for noiseless Bell mixtures

def bell_mixture_key_table(spec: MixtureSpec) -> np.ndarray:
    """q(ij, xy) = (1/d^2) sum p(a, b) [i = a - x][j = b + y], pipeline labels."""
    d = spec.d
    P = spec.weight_table()
    q = np.zeros((d, d, d, d))
    for i in range(d):
        for j in range(d):
            for x in range(d):
                for y in range(d):
                    q[i, j, x, y] = P[(i + x) % d, (j - y) % d]
    return q.reshape(d * d, d * d) / (d * d)


def bell_mixture_test_table(spec: MixtureSpec) -> np.ndarray:
    """h(ij, rs) = (1/d^2) sum p(a, b) [i = r - a][j = -s], pipeline labels."""
    d = spec.d
    pt = spec.shift_marginal()
    h = np.zeros((d, d, d, d))
    for i in range(d):
        for r in range(d):
            for s in range(d):
                h[i, (-s) % d, r, s] = pt[(r - i) % d]
    return h.reshape(d * d, d * d) / (d * d)


def quoted_key_table(spec: MixtureSpec) -> np.ndarray:
    """g(ijrs) = (1/d^2) sum p(a, b) [i = a + r][j = b + s]."""
    d = spec.d
    g = np.zeros((d, d, d, d))
    for lab, p in zip(spec.labels, spec.probs):
        for r in range(d):
            for s in range(d):
                g[(lab.x + r) % d, (lab.y + s) % d, r, s] += p
    return g.reshape(d * d, d * d) / (d * d)


def quoted_test_table(spec: MixtureSpec) -> np.ndarray:
    """h(ijrs) = (1/d^2) sum p(a, b) [i = a + r][j = s]."""
    d = spec.d
    h = np.zeros((d, d, d, d))
    for lab, p in zip(spec.labels, spec.probs):
        for r in range(d):
            for s in range(d):
                h[(lab.x + r) % d, s, r, s] += p
    return h.reshape(d * d, d * d) / (d * d)


def to_quoted_labels(table: np.ndarray, d: int, kind: str) -> np.ndarray:
    """Relabel a pipeline table into the quoted g/h label convention.

    key:  g[i, j, r, s] = q[i, j, -r, s]
    test: h[i, j, r, s] = h_pipe[-i, j, -r, -s]
    """
    T = np.asarray(table).reshape(d, d, d, d)
    neg = (-np.arange(d)) % d
    if kind == "key":
        out = T[:, :, neg, :]
    elif kind == "test":
        out = T[neg][:, :, neg][:, :, :, neg]
    else:
        raise ValueError(f"unknown table kind {kind!r}")
    return out.reshape(d * d, d * d)


class CompiledProtocol:
    """Heisenberg-picture effects for a fixed configuration.

    Each table entry is Tr(E rho_in) for a precomputed effect E, so batches of
    input states are evaluated with a single matrix product.
    """

    def __init__(self, cfg: ProtocolConfig):
        self.cfg = cfg
        d = cfg.d
        D = d * d
        dims = (d, d)
        pre_adj = [K.conj().T for K in cfg.pre_channel.operators]
        post_adj = [K.conj().T for K in cfg.post_channel.operators]

        B = bell_basis(d)
        Q = np.einsum("ia,ib->iab", B, B.conj())
        Y = apply_to_subsystem(post_adj, Q, dims, 1)
        W = _encoding_ops(d)
        Wh = W.conj().swapaxes(-1, -2)
        Z = (Wh[None] @ Y[:, None] @ W[None]) / D
        key = apply_to_subsystem(pre_adj, Z.reshape(D * D, D, D), dims, 1)

        T = test_basis(d)
        Qt = np.einsum("ia,ib->iab", T, T.conj())
        Yt = apply_to_subsystem(post_adj, Qt, dims, 1).reshape(D, d, d, d, d)
        K = _bob_test_kernel(d)
        # G[ij, rs][a'b', ab] = sum_{c c'} Y[a'c', a c] K[rs, b, c] K*[rs, b', c']
        G = np.einsum("iEFac,sbc,sBF->isEBab", Yt, K, K.conj(),
                      optimize=True).reshape(D * D, D, D)
        test = apply_to_subsystem(pre_adj, G, dims, 1)

        # Tr(E rho) = sum_{uv} E[u, v] rho[v, u]
        self._key = key.reshape(D * D, D * D)
        self._test = test.reshape(D * D, D * D)

    def _apply(self, E: np.ndarray, rhos: np.ndarray) -> np.ndarray:
        rhos = np.asarray(rhos)
        D = self.cfg.d ** 2
        flat = rhos.swapaxes(-1, -2).reshape(rhos.shape[:-2] + (D * D,))
        return (flat @ E.T).real.reshape(rhos.shape[:-2] + (D, D))

    def key_tables(self, rhos: np.ndarray) -> np.ndarray:
        return self._apply(self._key, rhos)

    def test_tables(self, rhos: np.ndarray) -> np.ndarray:
        return self._apply(self._test, rhos)

    def entropies(self, rhos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(S(B|A)_key, S(B|A)_test) for a batch of input matrices."""
        s_k = np.clip(conditional_entropies(self.key_tables(rhos)), 0.0, None)
        s_t = np.clip(conditional_entropies(self.test_tables(rhos)), 0.0, None)
        return s_k, s_t
