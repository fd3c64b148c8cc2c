"""Benchmark driver: experiment configs, algorithm suites, trace files.

Config files are flat ``key = value`` text ('#' starts a comment).  Required
keys are ``problem`` and ``variant``; everything else has documented defaults
(see :data:`GAME_DEFAULTS` / :data:`LASSO_DEFAULTS`).  Unknown keys are errors.

Algorithm labels follow the benchmark convention: ``cp`` (plain primal-dual),
``hcp`` (fixed-schedule anchoring), ``restarted_hcp``, ``acp`` (adaptive
anchoring), ``restarted_acp``.

Trace files are CSV with a ``# key = value`` metadata block above the header

    k,phi,m_residual,residual,gap,objective_error,elapsed_seconds

absent metrics are empty fields, floats carry 17 significant digits, and a
time-limited run appends a trailing ``# truncated = true`` marker.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cpsolver import (
    CpProblem,
    LassoGapSpec,
    build_solver,
    game_cp_problem,
    lasso_cp_problem,
    pd_gap,
    residual_norm,
)
from .fixpoint import Algorithm, IterationTrace, NumericDivergenceError, TraceRow
from .linops import estimate_operator_norm
from .precond import PrimalDualPoint, make_point
from .problems import (
    GAME_VARIANT_DIMS,
    LASSO_DEFAULT_CORR,
    LASSO_DEFAULT_DIMS,
    LASSO_DEFAULT_MU,
    LASSO_VARIANTS,
    LassoInstance,
    MatrixGameInstance,
    gen_lasso,
    gen_matrix_game,
    lasso_objective,
    load_instance,
    save_instance,
)

logger = logging.getLogger(__name__)

TRACE_HEADER = "k,phi,m_residual,residual,gap,objective_error,elapsed_seconds"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_INVARIANT = 3

ALGORITHM_LABELS = {
    "cp": Algorithm.PICARD,
    "hcp": Algorithm.HALPERN_FIXED,
    "restarted_hcp": Algorithm.RESTARTED_HALPERN,
    "acp": Algorithm.PHA,
    "restarted_acp": Algorithm.RESTARTED_PHA,
}
DEFAULT_ALGORITHMS = ("cp", "hcp", "restarted_hcp", "acp", "restarted_acp")

GAME_DEFAULTS = {"seed": 50, "max_iters": 20000, "restart_period": 450}
LASSO_DEFAULTS = {"seed": 100, "max_iters": 10000, "restart_period": 400}
DEFAULT_CADENCE = 10

PHI_LOWER_SLACK = 1e-9


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    variant: str
    seed: int
    algorithms: tuple[str, ...]
    max_iters: int
    restart_period: int
    metric_cadence: int
    stop_tol: float
    output_dir: str
    q: int | None = None
    p: int | None = None
    s: int | None = None
    mu: float | None = None
    corr_v: float | None = None
    time_limit_seconds: float | None = None


_CONFIG_KEYS = ("problem", "variant", "seed", "algorithms", "max_iters",
                "restart_period", "metric_cadence", "stop_tol", "output_dir",
                "q", "p", "s", "mu", "corr_v", "time_limit_seconds")
_INT_KEYS = {"seed", "max_iters", "restart_period", "metric_cadence", "q", "p", "s"}
_FLOAT_KEYS = {"stop_tol", "mu", "corr_v", "time_limit_seconds"}


def _parse_scalar(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a ``key = value`` experiment config."""
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        raw[key] = _parse_scalar(key, value)

    for required in ("problem", "variant"):
        if required not in raw:
            raise ConfigError(f"missing required key {required!r}")
    problem = raw.pop("problem")
    if problem not in ("matrix_game", "lasso"):
        raise ConfigError(f"problem must be matrix_game or lasso, got {problem!r}")
    defaults = GAME_DEFAULTS if problem == "matrix_game" else LASSO_DEFAULTS

    algorithms = raw.pop("algorithms", ",".join(DEFAULT_ALGORITHMS))
    if isinstance(algorithms, str):
        algorithms = tuple(tok.strip() for tok in algorithms.split(",") if tok.strip())

    cfg = ExperimentConfig(
        problem=problem,
        variant=raw.pop("variant"),
        seed=raw.pop("seed", defaults["seed"]),
        algorithms=algorithms,
        max_iters=raw.pop("max_iters", defaults["max_iters"]),
        restart_period=raw.pop("restart_period", defaults["restart_period"]),
        metric_cadence=raw.pop("metric_cadence", DEFAULT_CADENCE),
        stop_tol=raw.pop("stop_tol", 0.0),
        output_dir=raw.pop("output_dir", "traces"),
        q=raw.pop("q", None),
        p=raw.pop("p", None),
        s=raw.pop("s", None),
        mu=raw.pop("mu", None),
        corr_v=raw.pop("corr_v", None),
        time_limit_seconds=raw.pop("time_limit_seconds", None),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.problem == "matrix_game":
        if cfg.variant not in GAME_VARIANT_DIMS:
            raise ConfigError(f"unknown matrix-game variant {cfg.variant!r}")
        if cfg.s is not None or cfg.mu is not None or cfg.corr_v is not None:
            raise ConfigError("s/mu/corr_v only apply to the lasso problem")
        if (cfg.q is None) != (cfg.p is None):
            raise ConfigError("override both q and p or neither")
    else:
        if cfg.variant not in LASSO_VARIANTS:
            raise ConfigError(f"unknown lasso variant {cfg.variant!r}")
        if cfg.variant != "correlated" and cfg.corr_v is not None:
            raise ConfigError("corr_v only applies to the correlated variant")
        dims_given = [dim is not None for dim in (cfg.q, cfg.p, cfg.s)]
        if any(dims_given) and not all(dims_given):
            raise ConfigError("override all of q, p, s or none")
    q, p, s = _dims(cfg)
    if q < 1 or p < 1:
        raise ConfigError(f"dims must be positive, got q={q}, p={p}")
    if cfg.problem == "lasso" and not 0 < s <= q:
        raise ConfigError(f"need 0 < s <= q, got s={s}, q={q}")
    if cfg.max_iters < 0:
        raise ConfigError(f"max_iters must be >= 0, got {cfg.max_iters}")
    if cfg.restart_period < 1:
        raise ConfigError(f"restart_period must be >= 1, got {cfg.restart_period}")
    if cfg.metric_cadence < 1:
        raise ConfigError(f"metric_cadence must be >= 1, got {cfg.metric_cadence}")
    if cfg.stop_tol < 0:
        raise ConfigError(f"stop_tol must be >= 0, got {cfg.stop_tol}")
    if cfg.time_limit_seconds is not None and cfg.time_limit_seconds <= 0:
        raise ConfigError("time_limit_seconds must be positive when given")
    if not cfg.algorithms:
        raise ConfigError("algorithms list is empty")
    for label in cfg.algorithms:
        if label not in ALGORITHM_LABELS:
            raise ConfigError(f"unknown algorithm {label!r}; choose from "
                              f"{sorted(ALGORITHM_LABELS)}")
    if len(set(cfg.algorithms)) != len(cfg.algorithms):
        raise ConfigError("duplicate algorithm labels")


def _dims(cfg: ExperimentConfig) -> tuple[int, int, int | None]:
    if cfg.problem == "matrix_game":
        p, q = GAME_VARIANT_DIMS[cfg.variant] if cfg.q is None else (cfg.p, cfg.q)
        return q, p, None
    q, p, s = LASSO_DEFAULT_DIMS if cfg.q is None else (cfg.q, cfg.p, cfg.s)
    return q, p, s


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) round-trips."""
    lines = [
        f"problem = {cfg.problem}",
        f"variant = {cfg.variant}",
        f"seed = {cfg.seed}",
        f"algorithms = {','.join(cfg.algorithms)}",
        f"max_iters = {cfg.max_iters}",
        f"restart_period = {cfg.restart_period}",
        f"metric_cadence = {cfg.metric_cadence}",
        f"stop_tol = {cfg.stop_tol!r}",
        f"output_dir = {cfg.output_dir}",
    ]
    for key in ("q", "p", "s", "mu", "corr_v", "time_limit_seconds"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {value!r}" if isinstance(value, float)
                         else f"{key} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Trace CSV I/O

def _csv_field(value: float | None) -> str:
    if value is None:
        return ""
    return format(value, ".17g")


def write_trace_csv(trace: IterationTrace, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for key in sorted(trace.metadata):
            fh.write(f"# {key} = {trace.metadata[key]}\n")
        fh.write(TRACE_HEADER + "\n")
        for row in trace.rows:
            fh.write(",".join([
                str(row.k),
                _csv_field(row.phi),
                _csv_field(row.m_residual),
                _csv_field(row.residual),
                _csv_field(row.gap),
                _csv_field(row.objective_error),
                _csv_field(row.elapsed_seconds),
            ]) + "\n")
        if trace.stop_reason == "time_limit":
            fh.write("# truncated = true\n")


def read_trace_csv(path) -> tuple[dict[str, str], list[TraceRow]]:
    path = Path(path)
    metadata: dict[str, str] = {}
    rows: list[TraceRow] = []
    header_seen = False
    with path.open() as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = (part.strip() for part in body.split("=", 1))
                    metadata[key] = value
                continue
            if not header_seen:
                if line != TRACE_HEADER:
                    raise ValueError(f"{path}: unexpected header {line!r}")
                header_seen = True
                continue
            fields = line.split(",")
            if len(fields) != 7:
                raise ValueError(f"{path}: malformed row {line!r}")
            rows.append(TraceRow(
                k=int(fields[0]),
                phi=float(fields[1]) if fields[1] else None,
                m_residual=float(fields[2]),
                residual=float(fields[3]) if fields[3] else None,
                gap=float(fields[4]) if fields[4] else None,
                objective_error=float(fields[5]) if fields[5] else None,
                elapsed_seconds=float(fields[6]),
            ))
    if not header_seen:
        raise ValueError(f"{path}: no trace header found")
    return metadata, rows


# ---------------------------------------------------------------------------
# Experiment runner

def build_instance(cfg: ExperimentConfig) -> MatrixGameInstance | LassoInstance:
    q, p, s = _dims(cfg)
    if cfg.problem == "matrix_game":
        dims = None if cfg.q is None else (p, q)
        return gen_matrix_game(cfg.variant, cfg.seed, dims=dims)
    corr = cfg.corr_v
    if cfg.variant == "correlated" and corr is None:
        corr = LASSO_DEFAULT_CORR
    return gen_lasso(cfg.variant, dims=(q, p, s),
                     mu=LASSO_DEFAULT_MU if cfg.mu is None else cfg.mu,
                     corr_v=corr, seed=cfg.seed)


def initial_point(instance: MatrixGameInstance | LassoInstance) -> PrimalDualPoint:
    """Benchmark starting points: uniform simplex pair for games, (0, -b) for LASSO."""
    if isinstance(instance, MatrixGameInstance):
        return make_point(np.full(instance.q, 1.0 / instance.q),
                          np.full(instance.p, 1.0 / instance.p))
    return make_point(np.zeros(instance.q), -instance.b)


def _metric_callback(instance, prob: CpProblem):
    if isinstance(instance, MatrixGameInstance):
        def metrics(k: int, x: PrimalDualPoint, y: PrimalDualPoint) -> dict:
            return {
                "gap": pd_gap(y.u, y.v, instance),
                "residual": residual_norm(y, prob),
            }
        return metrics, {}
    f_star = lasso_objective(instance.u_star, instance)
    spec = LassoGapSpec(instance=instance, f_star=f_star)

    def metrics(k: int, x: PrimalDualPoint, y: PrimalDualPoint) -> dict:
        return {
            "objective_error": pd_gap(y.u, y.v, spec),
            "residual": residual_norm(y, prob),
        }
    # the reference value is the planted-signal objective, recorded for replay
    return metrics, {"f_star": format(f_star, ".17g")}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """Run every configured algorithm on one generated instance; one trace file each."""
    validate_config(cfg)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("normalized config:\n%s", serialize_config(cfg).rstrip())

    instance = build_instance(cfg)
    norm = estimate_operator_norm(instance.K)
    if not norm.converged:
        logger.warning("operator norm estimate did not converge (%d iterations)",
                       norm.iterations)
    if isinstance(instance, MatrixGameInstance):
        prob = game_cp_problem(instance, norm_K=norm.value)
    else:
        prob = lasso_cp_problem(instance, norm_K=norm.value)
    metrics, extra_meta = _metric_callback(instance, prob)
    x0 = initial_point(instance)

    shared_meta = {
        "schema": "1",
        "problem": cfg.problem,
        "variant": cfg.variant,
        "seed": str(cfg.seed),
        "q": str(instance.q),
        "p": str(instance.p),
        "tau": format(prob.tau, ".17g"),
        "sigma": format(prob.sigma, ".17g"),
        "norm_k": format(prob.norm_K, ".17g"),
        **extra_meta,
    }
    if isinstance(instance, LassoInstance):
        shared_meta["s"] = str(instance.s)
        shared_meta["mu"] = format(instance.mu, ".17g")

    written: list[Path] = []
    for label in cfg.algorithms:
        algorithm = ALGORITHM_LABELS[label]
        restart = cfg.restart_period if algorithm in (
            Algorithm.RESTARTED_PHA, Algorithm.RESTARTED_HALPERN) else None
        solver = build_solver(prob, algorithm, cfg.max_iters,
                              restart_period=restart, stop_tol=cfg.stop_tol,
                              metric_cadence=cfg.metric_cadence,
                              time_limit_seconds=cfg.time_limit_seconds)
        started = time.perf_counter()
        trace = solver.run(x0, metrics=metrics)
        logger.info("%s: %d rows, stop=%s, %.2fs", label, len(trace.rows),
                    trace.stop_reason, time.perf_counter() - started)
        trace.metadata.update(shared_meta)
        trace.metadata["algorithm"] = label
        path = out / f"{label}.csv"
        write_trace_csv(trace, path)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Trace verification

def verify_trace(metadata: dict[str, str], rows: list[TraceRow],
                 instance=None) -> list[str]:
    """Re-check the hard trace invariants; returns a list of violations."""
    problems: list[str] = []
    if not rows:
        problems.append("trace has no rows")
        return problems

    last_k = None
    last_elapsed = None
    for row in rows:
        if last_k is not None and row.k <= last_k:
            problems.append(f"k not strictly increasing at row k={row.k}")
        if last_elapsed is not None and row.elapsed_seconds < last_elapsed:
            problems.append(f"elapsed_seconds decreases at row k={row.k}")
        if not np.isfinite(row.m_residual) or row.m_residual < 0:
            problems.append(f"bad m_residual at row k={row.k}")
        last_k, last_elapsed = row.k, row.elapsed_seconds

    label = metadata.get("algorithm", metadata.get("engine_algorithm", ""))
    anchored = label in ("acp", "restarted_acp", "hcp", "restarted_hcp",
                         "pha", "restarted_pha", "halpern_fixed", "restarted_halpern")
    restarted = label.startswith("restarted")
    period = int(metadata["restart_period"]) if restarted and metadata.get("restart_period") else None
    if anchored:
        for row in rows:
            if row.phi is None:
                problems.append(f"missing phi at row k={row.k}")
                continue
            in_epoch = row.k % period if period else row.k
            if not row.phi >= in_epoch - PHI_LOWER_SLACK:
                problems.append(
                    f"phi={row.phi!r} below in-epoch index {in_epoch} at row k={row.k}")
            if period and row.k % period == 0 and row.phi != 1.0:
                problems.append(f"phi at restart row k={row.k} is {row.phi!r}, not 1")

    if instance is not None:
        for key, expect in (("problem", "matrix_game" if isinstance(instance, MatrixGameInstance) else "lasso"),
                            ("variant", instance.variant),
                            ("seed", str(instance.seed)),
                            ("q", str(instance.q)),
                            ("p", str(instance.p))):
            if metadata.get(key) != expect:
                problems.append(f"metadata {key}={metadata.get(key)!r} does not match "
                                f"instance ({expect!r})")
        if isinstance(instance, MatrixGameInstance):
            for row in rows:
                if row.gap is not None and row.gap < -1e-9:
                    problems.append(f"negative game gap {row.gap!r} at row k={row.k}")
    return problems


# ---------------------------------------------------------------------------
# CLI

def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        logger.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.algorithms is not None:
            overrides["algorithms"] = tuple(
                tok.strip() for tok in args.algorithms.split(",") if tok.strip())
        if args.max_iters is not None:
            overrides["max_iters"] = args.max_iters
        if overrides:
            cfg = replace(cfg, **overrides)
            validate_config(cfg)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        paths = run_experiment(cfg, out_dir=args.out)
    except NumericDivergenceError as exc:
        logger.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_gen(args) -> int:
    try:
        if args.problem == "matrix_game":
            instance = gen_matrix_game(args.variant, args.seed)
        elif args.problem == "lasso":
            instance = gen_lasso(args.variant, seed=args.seed)
        else:
            logger.error("unknown problem %r", args.problem)
            return EXIT_CONFIG
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    save_instance(instance, args.out)
    print(args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        metadata, rows = read_trace_csv(args.trace)
    except (OSError, ValueError) as exc:
        logger.error("cannot read trace: %s", exc)
        return EXIT_CONFIG
    instance = None
    if args.instance is not None:
        try:
            instance = load_instance(args.instance)
        except (OSError, ValueError) as exc:
            logger.error("cannot read instance: %s", exc)
            return EXIT_CONFIG
    violations = verify_trace(metadata, rows, instance=instance)
    for violation in violations:
        print(f"violation: {violation}")
    if violations:
        return EXIT_INVARIANT
    print(f"ok: {len(rows)} rows")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Run anchored primal-dual benchmark suites and manage traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (default from config)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--algorithms", default=None, help="comma-separated labels")
    p_run.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("gen", help="dump a problem instance to a text file")
    p_gen.add_argument("problem", choices=["matrix_game", "lasso"])
    p_gen.add_argument("variant")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    p_verify = sub.add_parser("verify", help="re-check invariants recorded in a trace")
    p_verify.add_argument("trace")
    p_verify.add_argument("--instance", default=None)
    p_verify.set_defaults(func=_cmd_verify)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
