"""Monte Carlo averages, noise sweeps, critical noise and convexity trials.

Reproducibility rule: trial ``k`` of a run with seed ``s`` draws from
``default_rng(SeedSequence(s, spawn_key=(k,)))``. Streams depend only on
(seed, trial index), so serial and parallel runs produce identical samples,
and every grid cell of one run sees the same random numbers.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from . import __version__
from .channels import normalize_family
from .keyrate import (
    CLOSED_FORMS,
    bell_mixture_key_rate_analytic,
    key_rate_lower_bound,
    theorem1_check,
)
from .linalg import validate_density
from .protocol import CompiledProtocol, ProtocolConfig
from .states import (
    bell_mixture,
    max_entangled,
    random_bell_mixture,
    random_density_matrix,
    random_rank2_state,
)

KINDS = ("table1", "fig1_sweep", "fig2_critical", "fig3_noisy_mixtures",
         "theorem_checks", "convexity")
STATE_KINDS = ("bell", "rank2")

# reference values of the average regularized key rate, rows d = 2..5
TABLE1_REFERENCE = {
    ("bell", 2): {2: 0.180636, 3: 0.483039, 4: 0.590318, 5: 0.647119},
    ("bell", 3): {2: 0.105261, 3: 0.12709, 4: 0.308235, 5: 0.404146},
    ("bell", 4): {2: 0.0989495, 3: 0.10578, 4: 0.12253, 5: 0.226962},
    ("rank2", 2): {2: 0.288065, 3: 0.362568, 4: 0.459374, 5: 0.516064},
}


def default_p_grid(n: int = 101) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(0.0, 1.0, n))


@dataclass
class ExperimentConfig:
    kind: str = "table1"
    d_list: tuple = (2, 3, 4, 5)
    R_list: tuple = (2, 3, 4)
    noise_family: str = "identity"
    p_grid: tuple = (0.0,)
    trials: int = 10_000
    seed: int = 0
    averaging: str = "clipped"
    state: str = "bell"
    # execution-only settings: excluded from equality and emitted metadata
    workers: int = field(default=1, compare=False)
    defaults_applied: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        self.d_list = tuple(int(d) for d in self.d_list)
        self.R_list = tuple(int(R) for R in self.R_list)
        self.p_grid = tuple(float(p) for p in self.p_grid)
        self.noise_family = normalize_family(self.noise_family)
        if any(d < 2 for d in self.d_list):
            raise ValueError("d_list entries must be >= 2")
        if any(not 0.0 <= p <= 1.0 for p in self.p_grid):
            raise ValueError("p_grid values must lie in [0, 1]")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        self.trials = int(self.trials)
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.averaging not in ("raw", "clipped"):
            raise ValueError("averaging must be 'raw' or 'clipped'")
        if self.state not in STATE_KINDS:
            raise ValueError(f"state must be one of {STATE_KINDS}")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        self.workers = int(self.workers)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("defaults_applied")
        out.pop("workers")
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentResult:
    rows: list
    metadata: dict = field(default_factory=dict)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_state(d: int, R: int, state: str, rng: np.random.Generator) -> np.ndarray:
    if state == "bell":
        return bell_mixture(random_bell_mixture(d, R, rng)).matrix
    if state == "rank2":
        return random_rank2_state(d, rng).matrix
    raise ValueError(f"unknown state kind {state!r}")


def _sample_chunk(args) -> np.ndarray:
    d, R, state, seed, start, stop = args
    return np.stack([sample_state(d, R, state, trial_rng(seed, k)) for k in range(start, stop)])


def sample_states(d: int, R: int, state: str, trials: int, seed: int,
                  workers: int = 1) -> np.ndarray:
    """(trials, d^2, d^2) input states in canonical trial order."""
    chunk = max(1, math.ceil(trials / max(1, workers)))
    jobs = [(d, R, state, seed, a, min(trials, a + chunk)) for a in range(0, trials, chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_chunk, jobs))
    else:
        parts = [_sample_chunk(j) for j in jobs]
    return np.concatenate(parts)


@lru_cache(maxsize=64)
def compiled(d: int, family: str, p: float) -> CompiledProtocol:
    return CompiledProtocol(ProtocolConfig.symmetric(d, family, p))


def regularized_rates(states: np.ndarray, d: int, family: str, p: float,
                      batch: int = 2000) -> np.ndarray:
    """Per-state r~ through the (compiled) noisy pipeline."""
    comp = compiled(d, normalize_family(family), float(p))
    out = []
    for a in range(0, len(states), batch):
        s_k, s_t = comp.entropies(states[a:a + batch])
        out.append((2 * math.log2(d) - s_k - s_t) / (2 * math.log2(d)))
    return np.concatenate(out)


def summarize(r_tilde: np.ndarray) -> dict:
    n = r_tilde.size
    clipped = np.clip(r_tilde, 0.0, None)

    def stderr(x):
        return float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    return {
        "n_trials": n,
        "mean_r_tilde_raw": float(np.mean(r_tilde)),
        "mean_r_tilde_clipped": float(np.mean(clipped)),
        "stderr": stderr(r_tilde),
        "stderr_clipped": stderr(clipped),
        "n_positive": int(np.count_nonzero(r_tilde > 0)),
    }


def experiment_metadata(cfg: ExperimentConfig | None = None, **extra) -> dict:
    meta = {"artifact_version": __version__}
    if cfg is not None:
        meta["config"] = cfg.to_dict()
        meta["config_hash"] = cfg.digest()
        meta["seed"] = cfg.seed
        if cfg.defaults_applied:
            meta["defaults_applied"] = list(cfg.defaults_applied)
    meta.update(extra)
    return meta


def monte_carlo_average(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean r~ over random states for every (d, R, p) of the config grid."""
    rows = []
    Rs = cfg.R_list if cfg.state == "bell" else (2,)
    for d in cfg.d_list:
        for R in Rs:
            if cfg.state == "bell" and R > d * d:
                raise ValueError(f"rank {R} exceeds d^2 = {d * d}")
            states = sample_states(d, R, cfg.state, cfg.trials, cfg.seed, cfg.workers)
            for p in cfg.p_grid:
                rt = regularized_rates(states, d, cfg.noise_family, p)
                row = {"d": d, "R": R, "family": cfg.noise_family, "p": p,
                       "state": cfg.state, "seed": cfg.seed}
                row.update(summarize(rt))
                ref = TABLE1_REFERENCE.get((cfg.state, R), {}).get(d)
                if cfg.noise_family == "identity" and ref is not None:
                    row["reference_mean"] = ref
                rows.append(row)
    return ExperimentResult(rows, experiment_metadata(cfg))


def table1(trials: int = 10_000, seed: int = 0, d_list=(2, 3, 4, 5),
           R_list=(2, 3, 4), workers: int = 1) -> ExperimentResult:
    """Noiseless averages for Bell mixtures of each rank and rank-2 random states."""
    rows = []
    for state, Rs in (("bell", R_list), ("rank2", (2,))):
        cfg = ExperimentConfig(kind="table1", d_list=d_list, R_list=Rs, trials=trials,
                               seed=seed, state=state, workers=workers)
        rows += monte_carlo_average(cfg).rows
    meta = experiment_metadata(seed=seed, trials=trials, kind="table1")
    return ExperimentResult(rows, meta)


def mes_rate(d: int, family: str, p: float):
    return key_rate_lower_bound(ProtocolConfig.symmetric(d, family, p),
                                max_entangled(d).density())


def noise_sweep(d: int, family: str, p_grid) -> ExperimentResult:
    """r~(p) for the noisy |phi+>, alongside the closed form where one exists."""
    family = normalize_family(family)
    closed = CLOSED_FORMS.get(family)
    rows = []
    for p in p_grid:
        p = float(p)
        rep = mes_rate(d, family, p)
        rows.append({
            "d": d, "family": family, "p": p,
            "r_bits": rep.r, "r_tilde": rep.r_tilde,
            "closed_form_bits": closed(d, p) if closed else None,
            "positive_flag": rep.positive_key,
        })
    return ExperimentResult(rows, experiment_metadata(kind="fig1_sweep", d=d, family=family))


@dataclass(frozen=True)
class CriticalNoise:
    p_c: float
    saturated: bool


def first_crossing(f, tol: float = 1e-6, scan: int = 101) -> CriticalNoise:
    """Smallest p in [0, 1] with f(p) <= 0, located by scan then bisection."""
    if not f(0.0) > 0:
        raise ValueError("rate is not positive at p = 0; no critical noise to bracket")
    grid = np.linspace(0.0, 1.0, scan)
    prev = 0.0
    for p in grid[1:]:
        if f(float(p)) <= 0:
            root = bisect(f, prev, float(p), xtol=tol)
            return CriticalNoise(float(root), False)
        prev = float(p)
    return CriticalNoise(1.0, True)


def critical_noise(d: int, family: str, tol: float = 1e-6) -> CriticalNoise:
    family = normalize_family(family)
    return first_crossing(lambda p: mes_rate(d, family, p).r_tilde, tol)


def mixture_critical_noise(states: np.ndarray, d: int, family: str,
                           tol: float = 1e-4, scan: int = 51) -> CriticalNoise:
    """Critical noise of the raw mean r~ over a fixed sample of states."""
    family = normalize_family(family)
    return first_crossing(
        lambda p: float(np.mean(regularized_rates(states, d, family, p))), tol, scan)


def theorem1_sweep(d: int, R: int, trials: int, seed: int) -> dict:
    """Count violations of DC advantage => r >= log2 d - H(p~) >= 0."""
    n_adv = chain_bad = bound_bad = 0
    min_r_adv = math.inf
    for k in range(trials):
        rec = theorem1_check(random_bell_mixture(d, R, trial_rng(seed, k)))
        if rec.advantage:
            n_adv += 1
            min_r_adv = min(min_r_adv, rec.r)
        chain_bad += not rec.chain_holds
        bound_bad += not rec.bound_holds
    return {"d": d, "R": R, "trials": trials, "n_advantage": n_adv,
            "chain_violations": chain_bad, "bound_violations": bound_bad,
            "min_r_advantage": min_r_adv if n_adv else None}


@dataclass
class ConvexityReport:
    d: int
    n_trials: int
    n_useless_sampled: int
    violations: int
    entropy_range_violations: int
    max_mixture_r: float


def _useless_candidate(d: int, rng: np.random.Generator) -> np.ndarray:
    kind = rng.integers(3)
    if kind == 0:
        spec = random_bell_mixture(d, int(rng.integers(d + 1, d * d + 1)), rng)
        return bell_mixture(spec).matrix
    if kind == 1:
        return random_density_matrix((d, d), rng).matrix
    lam = rng.uniform(0.5, 1.0)
    rho = random_rank2_state(d, rng).matrix
    return (1 - lam) * rho + lam * np.eye(d * d) / (d * d)


def useless_set_convexity_trial(d: int, rng: np.random.Generator, n_trials: int,
                                cfg: ProtocolConfig | None = None,
                                max_attempts: int | None = None) -> ConvexityReport:
    """Mix random pairs of useless states (r < 0) and check the mixture stays useless."""
    cfg = cfg or ProtocolConfig.noiseless(d)
    comp = CompiledProtocol(cfg)
    ld2 = 2 * math.log2(d)
    need = 2 * n_trials
    max_attempts = max_attempts or 50 * need
    pool, attempts, range_bad = [], 0, 0
    while len(pool) < need:
        if attempts >= max_attempts:
            raise RuntimeError(f"found only {len(pool)} useless states in {attempts} attempts")
        batch = np.stack([_useless_candidate(d, rng) for _ in range(256)])
        attempts += len(batch)
        for rho in batch:
            validate_density(rho)
        s_k, s_t = comp.entropies(batch)
        tot = s_k + s_t
        range_bad += int(np.count_nonzero((tot < -1e-9) | (tot > 2 * ld2 + 1e-9)))
        pool.extend(batch[ld2 - tot < 0])
    pool = np.stack(pool[:need])
    lam = rng.uniform(0.0, 1.0, size=n_trials)[:, None, None]
    mixes = lam * pool[0::2] + (1 - lam) * pool[1::2]
    s_k, s_t = comp.entropies(mixes)
    tot = s_k + s_t
    range_bad += int(np.count_nonzero((tot < -1e-9) | (tot > 2 * ld2 + 1e-9)))
    r_mix = ld2 - tot
    return ConvexityReport(d, n_trials, need, int(np.count_nonzero(r_mix >= 1e-9)),
                           range_bad, float(r_mix.max()))


def analytic_rates(d: int, R: int, trials: int, seed: int) -> np.ndarray:
    """Noiseless r~ of random Bell mixtures from the closed-form entropies."""
    return np.array([bell_mixture_key_rate_analytic(
        random_bell_mixture(d, R, trial_rng(seed, k))).r_tilde for k in range(trials)])


def critical_table(cfg: ExperimentConfig, tol: float = 1e-6) -> ExperimentResult:
    if cfg.noise_family == "identity":
        raise ValueError("critical noise needs a noise family other than identity")
    rows = []
    for d in cfg.d_list:
        c = critical_noise(d, cfg.noise_family, tol)
        rows.append({"d": d, "family": cfg.noise_family, "p_c": c.p_c,
                     "saturated": c.saturated})
    return ExperimentResult(rows, experiment_metadata(cfg, tol=tol))


def theorem_table(cfg: ExperimentConfig) -> ExperimentResult:
    rows = [theorem1_sweep(d, R, cfg.trials, cfg.seed)
            for d in cfg.d_list for R in cfg.R_list if R <= d * d]
    return ExperimentResult(rows, experiment_metadata(cfg))


def convexity_table(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    for d in cfg.d_list:
        rep = useless_set_convexity_trial(d, trial_rng(cfg.seed, d), cfg.trials)
        rows.append(asdict(rep))
    return ExperimentResult(rows, experiment_metadata(cfg))


def run(cfg: ExperimentConfig) -> ExperimentResult:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind in ("table1", "fig3_noisy_mixtures"):
        return monte_carlo_average(cfg)
    if cfg.kind == "fig1_sweep":
        rows = []
        for d in cfg.d_list:
            rows += noise_sweep(d, cfg.noise_family, cfg.p_grid).rows
        return ExperimentResult(rows, experiment_metadata(cfg))
    if cfg.kind == "fig2_critical":
        return critical_table(cfg)
    if cfg.kind == "theorem_checks":
        return theorem_table(cfg)
    return convexity_table(cfg)
