"""Command-line entry point: ``sdc-qkd <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .channels import normalize_family
from .config import ConfigError, load_config, parse_grid
from .experiments import (
    ExperimentConfig,
    critical_table,
    default_p_grid,
    experiment_metadata,
    monte_carlo_average,
    noise_sweep,
    theorem1_sweep,
    trial_rng,
    useless_set_convexity_trial,
)
from .keyrate import key_rate_lower_bound
from .output import (
    CRITICAL_COLUMNS,
    KEYRATE_COLUMNS,
    MONTECARLO_COLUMNS,
    SWEEP_COLUMNS,
    THEOREM_COLUMNS,
    VALIDATE_COLUMNS,
    render_csv,
    render_json,
    write_text,
)
from .protocol import ProtocolConfig
from .states import (
    MixtureSpec,
    bell_mixture,
    max_entangled,
    random_bell_mixture,
    random_rank2_state,
)
from .validation import format_table, run_validation

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2, 3

NOISE_CHOICES = ("none", "depolarising", "dit-phase-flip", "amplitude-damping")


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"argument {flag}: {message}")


# argparse type converters; their errors name the flag automatically

def _dims(text: str) -> tuple[int, ...]:
    try:
        ds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not ds or any(d < 2 for d in ds):
        raise argparse.ArgumentTypeError("dimensions must be integers >= 2")
    return ds


def _ranks(text: str) -> tuple[int, ...]:
    try:
        rs = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not rs or any(r < 1 for r in rs):
        raise argparse.ArgumentTypeError("ranks must be integers >= 1")
    return rs


def _prob(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"noise strength {p} outside [0, 1]")
    return p


def _grid(text: str) -> tuple[float, ...]:
    try:
        g = parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if not g or any(not 0.0 <= p <= 1.0 for p in g):
        raise argparse.ArgumentTypeError("grid values must lie in [0, 1]")
    return g


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _seed(text: str) -> int:
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def _tol(text: str) -> float:
    try:
        t = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < t < 0.5:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 0.5)")
    return t


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=_dims, help="dimension or comma list of dimensions")
    common.add_argument("--noise", choices=NOISE_CHOICES, help="noise family on both legs")
    common.add_argument("--p", type=_prob, help="single noise strength")
    common.add_argument("--grid", type=_grid, help="noise grid lo:hi:step or comma list")
    common.add_argument("--rank", type=_ranks, help="Bell mixture rank(s)")
    common.add_argument("--trials", type=_positive, help="Monte Carlo sample count")
    common.add_argument("--seed", type=_seed, help="base seed (default 0)")
    common.add_argument("--workers", type=_positive, help="worker processes")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--config", help="flat key = value experiment config")

    parser = argparse.ArgumentParser(prog="sdc-qkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keyrate", parents=[common], help="key-rate bound for one state")
    k.add_argument("--state", choices=("mes", "bell", "uniform", "rank2"), default="mes")
    sub.add_parser("sweep", parents=[common], help="rate of the noisy |phi+> over a p grid")
    c = sub.add_parser("critical", parents=[common], help="critical noise strength per d")
    c.add_argument("--tol", type=_tol, default=1e-6)
    m = sub.add_parser("montecarlo", parents=[common], help="average rate of random states")
    m.add_argument("--state", choices=("bell", "rank2"))
    sub.add_parser("theorems", parents=[common], help="advantage-rate and convexity checks")
    sub.add_parser("validate", parents=[common], help="structural invariant suite")
    return parser


def _experiment_config(args, kind: str, defaults: dict) -> ExperimentConfig:
    """Subcommand defaults, then config file values, then explicit flags."""
    if args.p is not None and args.grid is not None:
        raise UsageError("--grid", "give either --p or --grid, not both")
    keys = [k for k in ExperimentConfig.__dataclass_fields__ if k != "defaults_applied"]
    base = load_config(args.config) if args.config else None
    unset = set(base.defaults_applied) if base else set(keys)
    values = {k: getattr(base, k) for k in keys} if base else {}
    for key, val in defaults.items():
        if key in unset:
            values[key] = val
    flags = {
        "d_list": args.d,
        "noise_family": args.noise,
        "p_grid": (args.p,) if args.p is not None else args.grid,
        "R_list": args.rank,
        "trials": args.trials,
        "seed": args.seed,
        "workers": args.workers,
        "state": getattr(args, "state", None),
    }
    given = {k for k, v in flags.items() if v is not None}
    values.update({k: flags[k] for k in given})
    values["kind"] = kind
    applied = tuple(k for k in keys if k in unset - given - {"kind", "workers"})
    return ExperimentConfig(**values, defaults_applied=applied)


def _meta(command: str, result_meta: dict) -> dict:
    meta = dict(result_meta)
    meta["command"] = command
    meta.setdefault("artifact_version", __version__)
    return meta


def _emit(args, default_fmt: str, columns, rows, metadata, extra: dict | None = None):
    fmt = args.format
    if fmt is None and args.out:
        fmt = "json" if args.out.endswith(".json") else "csv" if args.out.endswith(".csv") else None
    fmt = fmt or default_fmt
    if fmt == "csv":
        text = render_csv(rows, columns, metadata)
    else:
        payload = {"metadata": metadata}
        payload.update(extra if extra is not None else {"rows": rows})
        text = render_json(payload)
    write_text(text, args.out)


def cmd_keyrate(args) -> int:
    if args.grid is not None:
        raise UsageError("--grid", "keyrate takes a single --p")
    if args.d is not None and len(args.d) != 1:
        raise UsageError("--d", "keyrate takes a single dimension")
    d = args.d[0] if args.d else 2
    family = normalize_family(args.noise or "none")
    p = args.p if args.p is not None else 0.0
    seed = args.seed if args.seed is not None else 0
    ranks = args.rank or (2,)
    if len(ranks) != 1:
        raise UsageError("--rank", "keyrate takes a single rank")
    R = ranks[0]
    if args.state == "bell" and R > d * d:
        raise UsageError("--rank", f"rank {R} exceeds d^2 = {d * d}")

    extra = {}
    if args.state == "mes":
        rho = max_entangled(d).density()
    elif args.state == "uniform":
        labels = [(x, y) for x in range(d) for y in range(d)]
        rho = bell_mixture(MixtureSpec(d, labels, np.full(d * d, 1.0 / (d * d))))
    elif args.state == "bell":
        spec = random_bell_mixture(d, R, trial_rng(seed, 0))
        rho = bell_mixture(spec)
        extra = {"labels": [[lab.x, lab.y] for lab in spec.labels],
                 "probs": [float(v) for v in spec.probs]}
    else:
        rho = random_rank2_state(d, trial_rng(seed, 0))
    rep = key_rate_lower_bound(ProtocolConfig.symmetric(d, family, p), rho)
    report = {"d": d, "state": args.state, "family": family, "p": p}
    report.update(rep.to_dict())
    report.update(extra)
    config = {"d": d, "state": args.state, "noise_family": family, "p": p,
              "rank": R, "seed": seed}
    meta = {"artifact_version": __version__, "command": "keyrate",
            "config": config, "seed": seed}
    _emit(args, "json", KEYRATE_COLUMNS, [report], meta, {"report": report})
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args, "fig1_sweep", {"p_grid": default_p_grid()})
    rows = []
    for d in cfg.d_list:
        rows += noise_sweep(d, cfg.noise_family, cfg.p_grid).rows
    meta = _meta("sweep", experiment_metadata(cfg))
    _emit(args, "csv", SWEEP_COLUMNS, rows, meta)
    return EXIT_OK


def cmd_critical(args) -> int:
    cfg = _experiment_config(args, "fig2_critical", {})
    res = critical_table(cfg, args.tol)
    _emit(args, "csv", CRITICAL_COLUMNS, res.rows, _meta("critical", res.metadata))
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _experiment_config(args, "table1", {})
    if cfg.noise_family != "identity" or cfg.p_grid != (0.0,):
        cfg = ExperimentConfig(**{**cfg.to_dict(), "kind": "fig3_noisy_mixtures"},
                               workers=cfg.workers, defaults_applied=cfg.defaults_applied)
    res = monte_carlo_average(cfg)
    _emit(args, "csv", MONTECARLO_COLUMNS, res.rows, _meta("montecarlo", res.metadata))
    return EXIT_OK


def cmd_theorems(args) -> int:
    cfg = _experiment_config(args, "theorem_checks", {"trials": 1000})
    rows = []
    for d in cfg.d_list:
        for R in cfg.R_list:
            if R > d * d:
                continue
            t = theorem1_sweep(d, R, cfg.trials, cfg.seed)
            rows.append({"check": "theorem1", "d": d, "R": R, "trials": cfg.trials,
                         "n_advantage": t["n_advantage"],
                         "violations": t["chain_violations"] + t["bound_violations"],
                         "extremum": t["min_r_advantage"]})
        rep = useless_set_convexity_trial(d, trial_rng(cfg.seed, d), cfg.trials)
        rows.append({"check": "convexity", "d": d, "R": None, "trials": cfg.trials,
                     "n_advantage": None,
                     "violations": rep.violations + rep.entropy_range_violations,
                     "extremum": rep.max_mixture_r})
    _emit(args, "csv", THEOREM_COLUMNS, rows, _meta("theorems", experiment_metadata(cfg)))
    return EXIT_OK if all(r["violations"] == 0 for r in rows) else EXIT_VALIDATION


def cmd_validate(args) -> int:
    results = run_validation()
    rows = [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]
    meta = {"artifact_version": __version__, "command": "validate", "config": {}, "seed": 0}
    if args.out:
        _emit(args, "json", VALIDATE_COLUMNS, rows, meta)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


COMMANDS = {
    "keyrate": cmd_keyrate,
    "sweep": cmd_sweep,
    "critical": cmd_critical,
    "montecarlo": cmd_montecarlo,
    "theorems": cmd_theorems,
    "validate": cmd_validate,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"sdc-qkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"sdc-qkd {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
