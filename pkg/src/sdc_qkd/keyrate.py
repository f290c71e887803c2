"""Key-rate lower bounds, dense coding capacity and Bell-mixture results.

The bound evaluated everywhere is

    r >= log2(1/c) - S(B|A)_test - S(B|A)_key,   c = 1/d^2,

so r = 2 log2 d - s_kappa - s_tau and the regularized rate is r / (2 log2 d).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .channels import apply_channel
from .linalg import DensityOperator, partial_trace, shannon_entropy, von_neumann_entropy
from .protocol import (
    ProtocolConfig,
    conditional_entropy_B_given_A,
    key_run_distribution,
    overlap_constant,
    test_run_distribution,
)
from .states import MixtureSpec

ADVANTAGE_TOL = 1e-12
THEOREM_SLACK = 1e-9


@dataclass(frozen=True)
class KeyRateReport:
    d: int
    s_kappa: float
    s_tau: float
    r: float
    r_tilde: float
    dc_capacity: float
    dc_advantage: bool
    positive_key: bool

    @classmethod
    def from_entropies(cls, d: int, s_kappa: float, s_tau: float,
                       dc_capacity: float = float("nan"),
                       dc_advantage: bool = False) -> "KeyRateReport":
        r = math.log2(1.0 / overlap_constant(d)) - s_kappa - s_tau
        return cls(d, s_kappa, s_tau, r, r / (2 * math.log2(d)),
                   dc_capacity, bool(dc_advantage), bool(r > 0))

    def to_dict(self) -> dict:
        return asdict(self)


def regularize(r, d: int):
    return r / (2 * math.log2(d))


def dc_capacity(rho: DensityOperator) -> tuple[float, bool]:
    """C = log2 d_B + S(A) - S(AB); advantage when S(A) - S(AB) > 0."""
    if len(rho.dims) != 2:
        raise ValueError("dense coding capacity needs a bipartite state")
    s_a = von_neumann_entropy(partial_trace(rho, [0]))
    s_ab = von_neumann_entropy(rho)
    gain = s_a - s_ab
    return math.log2(rho.dims[1]) + gain, bool(gain > ADVANTAGE_TOL)


def key_rate_lower_bound(cfg: ProtocolConfig, rho_in: DensityOperator) -> KeyRateReport:
    q = key_run_distribution(cfg, rho_in)
    h = test_run_distribution(cfg, rho_in)
    C, adv = dc_capacity(apply_channel(cfg.pre_channel, rho_in, 1))
    return KeyRateReport.from_entropies(
        cfg.d, conditional_entropy_B_given_A(q), conditional_entropy_B_given_A(h), C, adv)


def bell_mixture_key_rate_analytic(spec: MixtureSpec) -> KeyRateReport:
    """Noiseless Bell-mixture rate: s_kappa = H(p), s_tau = H(p~) with p~^x = sum_y p^{xy}."""
    d = spec.d
    s_kappa = shannon_entropy(spec.probs)
    s_tau = shannon_entropy(spec.shift_marginal())
    C = 2 * math.log2(d) - s_kappa
    return KeyRateReport.from_entropies(
        d, s_kappa, s_tau, C, bool(math.log2(d) - s_kappa > ADVANTAGE_TOL))


@dataclass(frozen=True)
class Theorem1Record:
    advantage: bool
    r: float
    shift_bound: float
    chain_holds: bool
    bound_holds: bool


def theorem1_check(spec: MixtureSpec) -> Theorem1Record:
    """Check DC advantage => r >= log2 d - H(p~) >= 0 for one Bell mixture."""
    rep = bell_mixture_key_rate_analytic(spec)
    bound = math.log2(spec.d) - shannon_entropy(spec.shift_marginal())
    adv = rep.dc_advantage
    chain = (not adv) or rep.r >= -THEOREM_SLACK
    holds = (not adv) or (rep.r >= bound - THEOREM_SLACK and bound >= -THEOREM_SLACK)
    return Theorem1Record(adv, rep.r, bound, chain, holds)


STRUCTURES = ("same_x", "distinct_x", "uniform_full")


def case_bounds(d: int, R: int, structure: str) -> tuple[float, float]:
    """Extremes of log2 d - H(p~) for rank-R Bell mixtures of a given layout.

    same_x:       R <= d, all labels share one shift: exactly log2 d.
                  d < R < d^2 with R = n d + d', grouped into n full shifts
                  plus one partial shift: the lower value is that layout with
                  uniform weights, log2 d + (nd/R) log2(d/R) + (d'/R) log2(d'/R).
    distinct_x:   R <= d, all shifts distinct: between log2(d/R) and log2 d.
    uniform_full: R = d^2: the uniform mixture gives 0.
    """
    if structure not in STRUCTURES:
        raise ValueError(f"unknown structure {structure!r}")
    if not 1 <= R <= d * d:
        raise ValueError(f"rank {R} out of range for d={d}")
    ld = math.log2(d)
    if structure == "uniform_full":
        if R != d * d:
            raise ValueError("uniform_full requires R = d^2")
        return 0.0, ld
    if structure == "distinct_x":
        if R > d:
            raise ValueError("at most d labels can have distinct shifts")
        return math.log2(d / R), ld
    if R <= d:
        return ld, ld
    if R == d * d:
        raise ValueError("R = d^2 fills every shift; use uniform_full")
    n, dp = divmod(R, d)
    lo = ld + (n * d / R) * math.log2(d / R)
    if dp:
        lo += (dp / R) * math.log2(dp / R)
    return lo, ld


def _xlog2(coef: float, arg: float) -> float:
    """coef * log2(arg), allowing only the analytic 0 * log 0 case."""
    if coef == 0.0:
        return 0.0
    if arg <= 0.0:
        raise ArithmeticError(f"log of non-positive argument {arg!r} with coefficient {coef!r}")
    return coef * math.log2(max(arg, 1e-300))


def _check_args(d: int, p: float) -> None:
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise strength p={p} outside [0, 1]")


def closed_form_depolarising(d: int, p: float) -> float:
    """Key-rate bound for |phi+> with depolarising noise on both legs (bits)."""
    _check_args(d, p)
    d4 = d ** 4
    a = d - (d - 1) * p
    b = (2 - p) * p
    c = d * d - (d * d - 1) * b
    test = (_xlog2((d - 1) ** 2 * p * p, p * p / d4)
            + _xlog2(2 * (d - 1) * p * a, p * a / d4)
            + _xlog2(a * a, a * a / d4)) / (d * d)
    key = (_xlog2((1 - d * d) * b, b / d4) - _xlog2(c, c / d4)) / (d * d)
    return 3 * math.log2(d * d) + test - key


def closed_form_dit_phase_flip(d: int, p: float) -> float:
    """Key-rate bound for |phi+> with dit-phase-flip noise on both legs (bits)."""
    _check_args(d, p)
    m = (d - 1) ** 2
    dd = d * d
    out = 3 * math.log2(dd)
    out += (_xlog2(p * p, p * p / (m * dd))
            - _xlog2(2 * p * (p - 1), -(p - 1) * p / ((d - 1) * dd)))
    out += _xlog2((p - 1) ** 2, (p - 1) ** 2 / dd)
    out -= (_xlog2(-2 * (d - 2) * p * p, (d - 2) * p * p / ((d - 1) ** 3 * dd))
            + _xlog2(p * ((dd - 2) * p - 2 * m),
                     p * (2 * m - (dd - 2) * p) / (m * m * dd))) / m
    out -= _xlog2(p * (2 * m - (m + 1) * p) - m,
                  (p * ((m + 1) * p - 2 * m) + m) / (m * dd)) / m
    return out


CLOSED_FORMS = {
    "depolarising": closed_form_depolarising,
    "dit-phase-flip": closed_form_dit_phase_flip,
}
