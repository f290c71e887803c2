import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sdc_qkd.channels import amplitude_damping, depolarising
from sdc_qkd.linalg import DensityOperator, shannon_entropy
from sdc_qkd.protocol import (
    CompiledProtocol,
    JointOutcomeDistribution,
    ProtocolConfig,
    bell_mixture_key_table,
    bell_mixture_test_table,
    conditional_entropy_B_given_A,
    encode_branch,
    key_run_distribution,
    overlap_constant,
    quoted_key_table,
    quoted_test_table,
    to_quoted_labels,
)
from sdc_qkd import protocol
from sdc_qkd.states import (
    MixtureSpec,
    bell_mixture,
    bell_state,
    max_entangled,
    random_bell_mixture,
    random_density_matrix,
)

FAMILIES = ("identity", "depolarising", "dit-phase-flip", "amplitude-damping")


def phi(d):
    return max_entangled(d).density()


def test_encode_branch_on_mes():
    for d in (2, 3):
        for x in range(d):
            for y in range(d):
                pr, out = encode_branch(phi(d), (x, y))
                assert pr == 1 / d ** 2
                # (I x U^{xy})|phi+> is a Bell vector up to phase
                overlaps = [abs(np.vdot(bell_state(d, (a, b)).amplitudes,
                                        out.matrix @ bell_state(d, (a, b)).amplitudes))
                            for a in range(d) for b in range(d)]
                assert abs(max(overlaps) - 1) < 1e-12


def test_encode_branch_matches_ancilla_projection(rng):
    """<B(xy)|_{BB'} (rho_AB x phi+_{B'C}) |B(xy)> renormalized is the encoded state."""
    for d in (2, 3):
        rho = random_density_matrix((d, d), rng)
        big = oracles.four_party_state(rho.matrix, d, [np.eye(d)])
        perm = oracles.bob_outcome_to_encoding(d)
        total = 0.0
        for x in range(d):
            for y in range(d):
                sigma = oracles.bob_project(big, oracles.bell(d, x, y), d)
                pr = np.trace(sigma).real
                total += pr
                k = perm[x * d + y]
                p_ours, ours = encode_branch(rho, (k // d, k % d))
                assert abs(pr - p_ours) < 1e-12
                assert np.max(np.abs(sigma / pr - ours.matrix)) < 1e-10
        assert abs(total - 1) < 1e-12


def test_encode_branch_dimension_mismatch():
    with pytest.raises(ValueError):
        encode_branch(DensityOperator(np.eye(6) / 6, (2, 3)), (0, 0))


@pytest.mark.parametrize("family,p", [("identity", 0.0), ("depolarising", 0.3),
                                      ("dit-phase-flip", 0.2), ("amplitude-damping", 0.45)])
@pytest.mark.parametrize("d", [2, 3])
def test_pipeline_matches_full_tensor_oracle(family, p, d):
    r = np.random.default_rng(d * 100 + int(p * 100))
    K = oracles.KRAUS[family](d, p)
    cfg = ProtocolConfig.symmetric(d, family, p)
    perm = oracles.bob_outcome_to_encoding(d)
    for rho in (phi(d), random_density_matrix((d, d), r)):
        q = key_run_distribution(cfg, rho).table
        h = protocol.test_run_distribution(cfg, rho).table
        assert np.max(np.abs(oracles.key_table(rho.matrix, d, K, K)[:, perm] - q)) < 1e-10
        assert np.max(np.abs(oracles.test_table(rho.matrix, d, K, K) - h)) < 1e-10


@pytest.mark.parametrize("d", [2, 3])
def test_measurement_channel_commutation(d):
    r = np.random.default_rng(40 + d)
    rho = random_density_matrix((d, d), r).matrix
    for family in ("depolarising", "amplitude-damping"):
        K = oracles.KRAUS[family](d, 0.4)
        cfg = ProtocolConfig.symmetric(d, family, 0.4)
        perm = oracles.bob_outcome_to_encoding(d)
        for post_first in (False, True):
            qo = oracles.key_table(rho, d, K, K, post_first=post_first)
            ho = oracles.test_table(rho, d, K, K, post_first=post_first)
            q = key_run_distribution(cfg, DensityOperator(rho, (d, d))).table
            h = protocol.test_run_distribution(cfg, DensityOperator(rho, (d, d))).table
            assert np.max(np.abs(qo[:, perm] - q)) < 1e-10
            assert np.max(np.abs(ho - h)) < 1e-10


def test_noiseless_mes_perfect_correlation():
    for d in (2, 3, 4):
        q = key_run_distribution(ProtocolConfig.noiseless(d), phi(d))
        assert np.count_nonzero(q.table > 1e-12) == d * d
        assert np.allclose(q.table.max(axis=0), 1 / d ** 2)
        h = protocol.test_run_distribution(ProtocolConfig.noiseless(d), phi(d))
        assert np.allclose(h.alice_marginal(), 1 / d ** 2)
        assert conditional_entropy_B_given_A(q) < 1e-12
        assert conditional_entropy_B_given_A(h) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_bell_mixture_tables_match_quoted_forms(d):
    r = np.random.default_rng(d)
    cfg = ProtocolConfig.noiseless(d)
    for _ in range(50):
        spec = random_bell_mixture(d, int(r.integers(1, d * d + 1)), r)
        rho = bell_mixture(spec)
        q = key_run_distribution(cfg, rho).table
        h = protocol.test_run_distribution(cfg, rho).table
        assert np.max(np.abs(q - bell_mixture_key_table(spec))) < 1e-10
        assert np.max(np.abs(h - bell_mixture_test_table(spec))) < 1e-10
        assert np.max(np.abs(to_quoted_labels(q, d, "key") - quoted_key_table(spec))) < 1e-10
        assert np.max(np.abs(to_quoted_labels(h, d, "test") - quoted_test_table(spec))) < 1e-10


def test_quoted_tables_by_hand():
    spec = MixtureSpec(3, [(1, 2)], [1.0])
    g = quoted_key_table(spec).reshape(3, 3, 3, 3)
    # i = alpha + r, j = beta + s
    assert g[(1 + 2) % 3, (2 + 1) % 3, 2, 1] == pytest.approx(1 / 9)
    assert g[1, 0, 2, 1] == 0
    h = quoted_test_table(spec).reshape(3, 3, 3, 3)
    assert h[(1 + 1) % 3, 2, 1, 2] == pytest.approx(1 / 9)
    assert h[(1 + 1) % 3, 0, 1, 2] == 0


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
def test_bell_mixture_alice_marginals_uniform(seed, d):
    r = np.random.default_rng(seed)
    spec = random_bell_mixture(d, int(r.integers(1, d * d + 1)), r)
    cfg = ProtocolConfig.noiseless(d)
    for dist in (key_run_distribution(cfg, bell_mixture(spec)),
                 protocol.test_run_distribution(cfg, bell_mixture(spec))):
        assert np.allclose(dist.alice_marginal(), 1 / d ** 2, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(FAMILIES), st.floats(0, 1),
       st.integers(2, 3))
def test_distributions_normalized(seed, family, p, d):
    rho = random_density_matrix((d, d), np.random.default_rng(seed))
    cfg = ProtocolConfig.symmetric(d, family, p)
    for dist in (key_run_distribution(cfg, rho), protocol.test_run_distribution(cfg, rho)):
        assert abs(dist.table.sum() - 1) < 1e-9 and dist.table.min() >= 0


def test_conditional_entropy_examples():
    for d in (2, 3):
        uniform = JointOutcomeDistribution(d, np.full((d * d, d * d), 1 / d ** 4))
        assert abs(conditional_entropy_B_given_A(uniform) - 2 * math.log2(d)) < 1e-12
    spec = MixtureSpec(3, [(0, 0), (1, 2), (2, 1)], [0.5, 0.3, 0.2])
    q = key_run_distribution(ProtocolConfig.noiseless(3), bell_mixture(spec))
    assert abs(conditional_entropy_B_given_A(q) - shannon_entropy(spec.probs)) < 1e-12
    with pytest.raises(TypeError):
        conditional_entropy_B_given_A(np.eye(4) / 4)


def test_distribution_validation():
    with pytest.raises(ValueError):
        JointOutcomeDistribution(2, np.full((4, 4), 1 / 15))
    bad = np.full((4, 4), 1 / 16)
    bad[0, 0] = -1e-6
    bad[0, 1] += 1 / 16 + 1e-6
    with pytest.raises(ValueError):
        JointOutcomeDistribution(2, bad)
    with pytest.raises(ValueError):
        JointOutcomeDistribution(2, np.eye(3) / 3)


def test_overlap_constant():
    assert overlap_constant(2) == 1 / 4
    assert overlap_constant(3) == 1 / 9
    for d in range(2, 7):
        assert overlap_constant(d) == 1 / d ** 2


def test_config_dimension_check():
    with pytest.raises(ValueError):
        ProtocolConfig(3, depolarising(2, 0.1), depolarising(3, 0.1))


def test_zero_probability_branches_are_none():
    d = 2
    cfg = ProtocolConfig(d, amplitude_damping(d, 1.0), amplitude_damping(d, 1.0))
    branches = protocol.test_run_branches(cfg, phi(d))
    assert abs(sum(pr for pr, _ in branches) - 1) < 1e-12
    assert any(state is None for _, state in branches)
    for pr, state in branches:
        assert pr >= 0 and (state is None or np.all(np.isfinite(state.matrix)))
    dist = protocol.test_run_distribution(cfg, phi(d))
    assert np.all(np.isfinite(dist.table))


@pytest.mark.parametrize("family", FAMILIES)
def test_compiled_matches_branchwise(family):
    for d in (2, 3, 4):
        r = np.random.default_rng(d)
        cfg = ProtocolConfig.symmetric(d, family, 0.27)
        comp = CompiledProtocol(cfg)
        rhos = np.stack([random_density_matrix((d, d), r).matrix for _ in range(5)])
        for k, rho in enumerate(rhos):
            dm = DensityOperator(rho, (d, d))
            assert np.max(np.abs(comp.key_tables(rhos)[k]
                                 - key_run_distribution(cfg, dm).table)) < 1e-12
            assert np.max(np.abs(comp.test_tables(rhos)[k]
                                 - protocol.test_run_distribution(cfg, dm).table)) < 1e-12
