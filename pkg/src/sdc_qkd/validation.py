"""Structural invariant suite run by ``sdc-qkd validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import FAMILIES, apply_channel, completeness_residual, make_channel
from .experiments import trial_rng
from .keyrate import CLOSED_FORMS, key_rate_lower_bound
from .linalg import InvalidStateError, validate_density
from .protocol import (
    ProtocolConfig,
    key_run_tables,
    overlap_constant,
    quoted_key_table,
    quoted_test_table,
    test_run_branches,
    test_run_tables,
    to_quoted_labels,
)
from .states import (
    bell_basis,
    bell_mixture,
    max_entangled,
    random_bell_mixture,
    random_density_matrix,
    random_rank2_state,
    test_basis,
    weyl_operators,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _orthonormal_residual(V: np.ndarray) -> float:
    """Max deviation of V V^H from I for a square stack of row kets."""
    return float(np.max(np.abs(V.conj() @ V.T - np.eye(len(V)))))


def check_bell_basis(dims=range(2, 7)) -> CheckResult:
    worst = 0.0
    for d in dims:
        B = bell_basis(d)
        worst = max(worst, _orthonormal_residual(B))
        # completeness: sum of projectors is the identity
        worst = max(worst, float(np.max(np.abs(B.T @ B.conj() - np.eye(d * d)))))
    return CheckResult("bell orthonormality and completeness", worst < 1e-12,
                       f"max residual {worst:.2e}")


def check_weyl(dims=range(2, 7)) -> CheckResult:
    worst = 0.0
    for d in dims:
        U = weyl_operators(d).reshape(d * d, d, d)
        for k in range(d * d):
            worst = max(worst, float(np.max(np.abs(U[k].conj().T @ U[k] - np.eye(d)))))
        # Hilbert-Schmidt Gram matrix Tr(U_k^H U_l) = d delta_kl
        gram = np.einsum("kab,lab->kl", U.conj(), U)
        worst = max(worst, float(np.max(np.abs(gram - d * np.eye(d * d)))))
    return CheckResult("weyl unitarity and orthogonality", worst < 1e-12,
                       f"max residual {worst:.2e}")


def check_test_basis(dims=range(2, 7)) -> CheckResult:
    worst, ok = 0.0, True
    for d in dims:
        worst = max(worst, _orthonormal_residual(test_basis(d)))
        try:
            overlap_constant(d)
        except ArithmeticError:
            ok = False
    return CheckResult("test basis orthonormality and overlap 1/d^2",
                       ok and worst < 1e-12, f"max residual {worst:.2e}")


def check_kraus_grid(dims=range(2, 6), grid=np.linspace(0, 1, 11)) -> CheckResult:
    worst = 0.0
    for fam in FAMILIES:
        for d in dims:
            for p in grid:
                worst = max(worst, completeness_residual(make_channel(fam, d, p).operators))
    return CheckResult("kraus completeness over family, p, d", worst < 1e-9,
                       f"max residual {worst:.2e}")


def check_table_oracle(dims=(2, 3, 4), n=10, seed=0) -> CheckResult:
    worst = 0.0
    for d in dims:
        cfg = ProtocolConfig.noiseless(d)
        for k in range(n):
            spec = random_bell_mixture(d, int(trial_rng(seed, k).integers(1, d * d + 1)),
                                       trial_rng(seed, 1000 + k))
            rho = bell_mixture(spec).matrix
            g = to_quoted_labels(key_run_tables(cfg, rho), d, "key")
            h = to_quoted_labels(test_run_tables(cfg, rho), d, "test")
            worst = max(worst, float(np.max(np.abs(g - quoted_key_table(spec)))),
                        float(np.max(np.abs(h - quoted_test_table(spec)))))
    return CheckResult("bell mixture tables match closed forms", worst < 1e-10,
                       f"max deviation {worst:.2e}")


def check_mes_rates(dims=range(2, 6)) -> CheckResult:
    worst = 0.0
    for d in dims:
        rep = key_rate_lower_bound(ProtocolConfig.noiseless(d), max_entangled(d).density())
        worst = max(worst, abs(rep.r - 2 * math.log2(d)))
    return CheckResult("noiseless |phi+> rate equals 2 log2 d", worst < 1e-9,
                       f"max deviation {worst:.2e}")


def check_closed_forms(dims=(2, 3, 4), grid=np.linspace(0, 1, 21)) -> CheckResult:
    worst = 0.0
    for fam, f in CLOSED_FORMS.items():
        for d in dims:
            for p in grid:
                rep = key_rate_lower_bound(ProtocolConfig.symmetric(d, fam, p),
                                           max_entangled(d).density())
                worst = max(worst, abs(rep.r - f(d, float(p))))
    return CheckResult("closed-form noisy |phi+> rates match pipeline", worst < 1e-8,
                       f"max deviation {worst:.2e}")


def check_density_invariants(dims=(2, 3, 4), n=5, seed=0) -> CheckResult:
    """Sampled inputs, channel outputs and normalized test-run branches are states."""
    count = 0
    try:
        for d in dims:
            for k in range(n):
                rng = trial_rng(seed, k)
                inputs = [bell_mixture(random_bell_mixture(d, 2, rng)),
                          random_rank2_state(d, rng),
                          random_density_matrix((d, d), rng)]
                for fam in FAMILIES:
                    cfg = ProtocolConfig.symmetric(d, fam, float(rng.uniform()))
                    for rho in inputs:
                        out = apply_channel(cfg.pre_channel, rho, 1)
                        validate_density(out.matrix)
                        count += 1
                        for _, branch in test_run_branches(cfg, rho):
                            if branch is not None:
                                validate_density(branch.matrix)
                                count += 1
    except InvalidStateError as exc:
        return CheckResult("density invariants on produced states", False, str(exc))
    return CheckResult("density invariants on produced states", True, f"{count} states checked")


CHECKS = (check_bell_basis, check_weyl, check_test_basis, check_kraus_grid,
          check_table_oracle, check_mes_rates, check_closed_forms, check_density_invariants)


def run_validation() -> list[CheckResult]:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # a crash is a failed check, not an aborted suite
            out.append(CheckResult(check.__name__, False, f"{type(exc).__name__}: {exc}"))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    return "\n".join(lines)
