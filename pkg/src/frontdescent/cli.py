"""Benchmark command line: run solver x problem x dimension grids, compute
metrics and performance profiles, dump snapshot sets for plotting.

Artifacts live under ``<out>/<problem>/n<n>/<solver>/``:

* ``config.txt``      flat key = value snapshot of the cell configuration
* ``trace.jsonl``     header line, then one JSON record per iteration
* ``front.csv``       final set, columns x1..xn, f1..fm
* ``snapshots.jsonl`` objective vectors of X^k (and C^k) at snapshot iterations
* ``summary.json``    counts needed by the metrics, plus wall time

Exit codes: 0 success, 1 configuration error, 2 some cells failed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import operator
import re
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from frontdescent import metrics as mt
from frontdescent.descent import (
    FPD,
    FPD_NMT,
    PRUNE_MODES,
    ConstantSigma,
    DriverConfig,
    GeometricSigma,
    RunTrace,
    StoppingRule,
    run,
)
from frontdescent.linesearch import ArmijoParams
from frontdescent.problems import get_problem, list_problems

log = logging.getLogger("frontdescent.cli")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SolverSpec:
    method: str
    memory: int | None = None

    @property
    def label(self) -> str:
        return self.method if self.method == FPD else f"{self.method}_M{self.memory}"


def parse_solver(text: str, default_memory: int) -> SolverSpec:
    """"FPD", "FPD_NMT" or "FPD_NMT:20"."""
    name, _, mem = text.strip().partition(":")
    if name == FPD:
        if mem:
            raise ConfigError("FPD takes no memory parameter")
        return SolverSpec(FPD)
    if name == FPD_NMT:
        try:
            memory = int(mem) if mem else default_memory
        except ValueError:
            raise ConfigError(f"bad memory in solver {text!r}") from None
        if memory < 1:
            raise ConfigError("M must be a positive integer")
        return SolverSpec(FPD_NMT, memory)
    raise ConfigError(f"unknown solver {text!r}; expected FPD or FPD_NMT[:M]")


@dataclass
class ExperimentConfig:
    problems: list[tuple[str, int]]
    solvers: list[SolverSpec]
    driver: DriverConfig = field(default_factory=DriverConfig)
    seed: int = 0
    output_dir: Path = Path("runs")
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.problems:
            raise ConfigError("no problems configured")
        if not self.solvers:
            raise ConfigError("no solvers configured")


DEFAULTS = {
    "problems": "ZDT_1",
    "dims": "5",
    "solvers": "FPD, FPD_NMT",
    "m_memory": "4",
    "max_iters": "200",
    "time_budget": "",
    "stall_window": "3",
    "sigma_mode": "constant",
    "sigma": "1e-4",
    "sigma0": "1e-2",
    "rho": "0.9",
    "alpha0": "1.0",
    "delta": "0.5",
    "gamma": "1e-4",
    "max_backtracks": "60",
    "cap": "100",
    "prune": "hard",
    "snapshot_every": "",
    "seed": "0",
    "out": "runs",
    "jobs": "1",
}
# config-file spellings accepted for a few keys
ALIASES = {"m": "m_memory", "memory": "m_memory", "n": "dims", "problem": "problems",
           "solver": "solvers", "max_iterations": "max_iters", "output_dir": "out"}


def read_config_file(path: Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from None
    values = {}
    for key, value in parser["experiment"].items():
        key = ALIASES.get(key, key)
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    return values


def _split(text: str) -> list[str]:
    return [t for t in re.split(r"[,\s]+", text.strip()) if t]


def _num(values: dict[str, str], key: str, kind=float):
    text = values[key].strip()
    if text == "" or text.lower() == "none":
        return None
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key} = {text!r} is not a valid {kind.__name__}") from None


def build_config(values: dict[str, str]) -> ExperimentConfig:
    merged = {**DEFAULTS, **values}
    memory = _num(merged, "m_memory", int)
    try:
        dims = [int(d) for d in _split(merged["dims"])]
    except ValueError:
        raise ConfigError(f"bad dims {merged['dims']!r}") from None
    problems = [(p, n) for p in _split(merged["problems"]) for n in dims]
    solvers = [parse_solver(s, memory) for s in _split(merged["solvers"])]
    if merged["sigma_mode"] == "constant":
        sigma = ConstantSigma(_num(merged, "sigma"))
    elif merged["sigma_mode"] == "geometric":
        sigma = GeometricSigma(_num(merged, "sigma0"), _num(merged, "rho"))
    else:
        raise ConfigError("sigma_mode must be constant or geometric")
    if merged["prune"] not in PRUNE_MODES:
        raise ConfigError(f"prune must be one of {PRUNE_MODES}")
    try:
        driver = DriverConfig(
            armijo=ArmijoParams(_num(merged, "alpha0"), _num(merged, "delta"),
                                _num(merged, "gamma"), _num(merged, "max_backtracks", int)),
            sigma=sigma,
            memory=memory,
            crowding_cap=_num(merged, "cap", int),
            stop=StoppingRule(_num(merged, "max_iters", int), _num(merged, "time_budget"),
                              _num(merged, "stall_window", int) or None),
            prune=merged["prune"],
            snapshot_every=_num(merged, "snapshot_every", int),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(problems, solvers, driver, _num(merged, "seed", int),
                            Path(merged["out"]), _num(merged, "jobs", int) or 1)


def config_snapshot(problem: str, n: int, spec: SolverSpec, cfg: ExperimentConfig) -> str:
    d = cfg.driver
    sigma = d.sigma
    lines = {
        "problem": problem,
        "n": n,
        "solver": spec.label,
        "method": spec.method,
        "m_memory": spec.memory if spec.memory is not None else "",
        "max_iters": d.stop.max_iterations,
        "time_budget": "" if d.stop.time_budget is None else d.stop.time_budget,
        "stall_window": "" if d.stop.stall_window is None else d.stop.stall_window,
        "sigma_mode": "constant" if isinstance(sigma, ConstantSigma) else "geometric",
        "sigma": getattr(sigma, "value", ""),
        "sigma0": getattr(sigma, "sigma0", ""),
        "rho": getattr(sigma, "rho", ""),
        "alpha0": d.armijo.alpha0,
        "delta": d.armijo.delta,
        "gamma": d.armijo.gamma,
        "max_backtracks": d.armijo.max_backtracks,
        "cap": "" if d.crowding_cap is None else d.crowding_cap,
        "prune": d.prune,
        "dual_tolerance": d.solver.dual_tolerance,
        "seed": cfg.seed,
    }
    return "".join(f"{k} = {v}\n" for k, v in lines.items())


# ---------------------------------------------------------------------------
# artifacts


def cell_dir(root: Path, problem: str, n: int, label: str) -> Path:
    return Path(root) / problem / f"n{n}" / label


def _fmt(v: float) -> str:
    return repr(float(v))


def write_artifact(path: Path, trace: RunTrace, snapshot: str, wall: float) -> None:
    path.mkdir(parents=True, exist_ok=True)
    (path / "config.txt").write_text(snapshot)
    header = {"schema_version": SCHEMA_VERSION, "problem": trace.problem, "n": trace.n,
              "m": trace.m, "method": trace.method, "memory": trace.memory,
              "iterations": trace.iterations, "stop_reason": trace.stop_reason}
    with open(path / "trace.jsonl", "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in trace.records:
            fh.write(json.dumps(asdict(rec)) + "\n")
    with open(path / "front.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(trace.n)] + [f"f{j + 1}" for j in range(trace.m)])
        for p in trace.final:
            w.writerow([_fmt(v) for v in p.x] + [_fmt(v) for v in p.fx])
    with open(path / "snapshots.jsonl", "w") as fh:
        for k in sorted(trace.snapshots):
            snap = trace.snapshots[k]
            row = {"k": k, "X": snap["X"].tolist()}
            if "C" in snap:
                row["C"] = snap["C"].tolist()
            fh.write(json.dumps(row) + "\n")
    summary = {"problem": trace.problem, "n": trace.n, "m": trace.m, "method": trace.method,
               "iterations": trace.iterations, "stop_reason": trace.stop_reason,
               "f_evals": trace.total_f_evals, "processed": trace.total_processed,
               "alphas": list(trace.alphas), "front_size": len(trace.final),
               "wall_time": wall}
    (path / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")


def load_summary(path: Path, label: str | None = None) -> mt.RunSummary:
    path = Path(path)
    try:
        info = json.loads((path / "summary.json").read_text())
        with open(path / "front.csv", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, ValueError) as exc:
        raise FileNotFoundError(f"incomplete artifact {path}: {exc}") from None
    m = info["m"]
    fx = np.array([[float(v) for v in r[-m:]] for r in rows[1:]]).reshape(-1, m)
    return mt.RunSummary(info["problem"], info["n"], label or path.name, fx,
                         info["f_evals"], info["processed"], info["alphas"])


# ---------------------------------------------------------------------------
# run


def _run_cell(args: tuple[str, int, SolverSpec, ExperimentConfig]) -> tuple[str, str | None]:
    problem_name, n, spec, cfg = args
    path = cell_dir(cfg.output_dir, problem_name, n, spec.label)
    try:
        problem = get_problem(problem_name, n)
        driver = cfg.driver if spec.memory is None else replace(cfg.driver, memory=spec.memory)
        start = time.perf_counter()
        trace = run(problem, driver, method=spec.method)
        write_artifact(path, trace, config_snapshot(problem_name, n, spec, cfg),
                       time.perf_counter() - start)
        return str(path), None
    except Exception:  # per-cell failure; the grid keeps going
        err = traceback.format_exc()
        path.mkdir(parents=True, exist_ok=True)
        (path / "error.txt").write_text(err)
        return str(path), err


def validate_cells(cfg: ExperimentConfig) -> None:
    for name, n in cfg.problems:
        try:
            get_problem(name, n)
        except KeyError:
            raise ConfigError(f"cell {name} n={n}: unknown problem {name!r}") from None
        except ValueError as exc:
            raise ConfigError(f"cell {name} n={n}: {exc}") from None


def cmd_run(cfg: ExperimentConfig) -> int:
    validate_cells(cfg)
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        probe = cfg.output_dir / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {cfg.output_dir} is not writable: {exc}") from None
    cells = [(p, n, s, cfg) for p, n in cfg.problems for s in cfg.solvers]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    failed = [path for path, err in results if err is not None]
    for path, err in results:
        if err is None:
            log.info("done %s", path)
        else:
            log.error("cell %s failed:\n%s", path, err)
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# metrics

_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
        "==": operator.eq, "=": operator.eq}


def parse_dims_filter(text: str):
    """'n>30' style filter to a predicate on n."""
    match = re.fullmatch(r"\s*n\s*(<=|>=|==|=|<|>)\s*(\d+)\s*", text or "")
    if not match:
        raise ConfigError(f"bad dims filter {text!r}; expected e.g. 'n>30'")
    op, bound = _OPS[match.group(1)], int(match.group(2))
    return lambda n: op(n, bound)


def discover(root: Path) -> dict[tuple[str, int], list[Path]]:
    cells: dict[tuple[str, int], list[Path]] = {}
    for summary in sorted(Path(root).glob("*/n*/*/summary.json")):
        cell = summary.parent
        n = int(cell.parent.name[1:])
        cells.setdefault((cell.parent.parent.name, n), []).append(cell)
    return cells


def cmd_metrics(root: Path, out: Path | None = None, dims: str | None = None) -> list[Path]:
    keep = parse_dims_filter(dims) if dims else (lambda n: True)
    cells = {k: v for k, v in discover(root).items() if keep(k[1])}
    if not cells:
        raise FileNotFoundError(f"no run artifacts under {root}")
    rows: list[mt.CellMetrics] = []
    for key in sorted(cells):
        runs = [load_summary(p) for p in sorted(cells[key])]
        if len(runs) < 2:
            raise mt.MetricError(f"{key[0]} n={key[1]}: need at least two solvers for a reference front")
        rows.extend(mt.instance_metrics(runs))
    out = Path(out or root)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "metrics.csv"]
    with open(written[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["problem", "solver", "n", "purity", "hv", "hv_transformed", "nf_mean", "alpha_mean"])
        for c in rows:
            w.writerow([c.problem, c.solver, c.n, _fmt(c.purity), _fmt(c.hv), _fmt(c.hv_transformed),
                        "" if c.nf_mean is None else _fmt(c.nf_mean),
                        "" if c.alpha_mean is None else _fmt(c.alpha_mean)])
    solvers = sorted({c.solver for c in rows})
    for metric in mt.METRICS:
        profile = mt.performance_profiles(mt.cost_matrix(rows, metric, solvers))
        path = out / f"profile_{metric}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["solver", "tau", "rho"])
            for solver, tau, rho in profile.rows():
                w.writerow([solver, _fmt(tau), _fmt(rho)])
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# front dump


def cmd_front_dump(run_dir: Path, k: int) -> list[tuple[str, list[float]]]:
    run_dir = Path(run_dir)
    try:
        header = json.loads((run_dir / "trace.jsonl").read_text().splitlines()[0])
        lines = (run_dir / "snapshots.jsonl").read_text().splitlines()
    except (OSError, IndexError) as exc:
        raise FileNotFoundError(f"not a run artifact: {run_dir} ({exc})") from None
    if k < 0 or k > header["iterations"]:
        raise KeyError(f"k={k} is outside the run (0..{header['iterations']})")
    for line in lines:
        snap = json.loads(line)
        if snap["k"] == k:
            points = [("X", f) for f in snap["X"]]
            points += [("C", f) for f in snap.get("C", [])]
            return points
    raise KeyError(f"iteration {k} was not snapshotted; rerun with snapshot_every = 1")


# ---------------------------------------------------------------------------
# argument parsing


def _run_overrides(args: argparse.Namespace) -> dict[str, str]:
    values: dict[str, str] = {}
    pairs = [("problem", "problems"), ("n", "dims"), ("solver", "solvers")]
    for attr, key in pairs:
        got = getattr(args, attr)
        if got:
            values[key] = ",".join(str(v) for v in got)
    for attr, key in [("M", "m_memory"), ("max_iters", "max_iters"), ("sigma", "sigma"),
                      ("sigma_mode", "sigma_mode"), ("cap", "cap"), ("prune", "prune"),
                      ("out", "out"), ("jobs", "jobs"), ("snapshot_every", "snapshot_every"),
                      ("time_budget", "time_budget"), ("stall_window", "stall_window")]:
        got = getattr(args, attr)
        if got is not None:
            values[key] = str(got)
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpd-bench", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a solver x problem x dimension grid")
    p.add_argument("--config", type=Path, help="flat key = value file")
    p.add_argument("--problem", action="append", help="problem name (repeatable)")
    p.add_argument("--n", action="append", type=int, help="dimension (repeatable)")
    p.add_argument("--solver", action="append", help="FPD, FPD_NMT or FPD_NMT:M (repeatable)")
    p.add_argument("--M", type=int, help="memory for FPD_NMT solvers without an explicit M")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--sigma-mode", choices=["constant", "geometric"])
    p.add_argument("--cap", type=int)
    p.add_argument("--prune", choices=PRUNE_MODES)
    p.add_argument("--stall-window", type=int, help="0 disables the stall rule")
    p.add_argument("--time-budget", type=float)
    p.add_argument("--snapshot-every", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("metrics", help="metrics and performance profiles for a run directory")
    p.add_argument("artifacts", type=Path)
    p.add_argument("--out", type=Path, help="output directory (default: the artifact directory)")
    p.add_argument("--dims", help="dimension filter such as 'n>30'")

    p = sub.add_parser("front-dump", help="print the X^k and C^k objective vectors of a run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", type=Path, help="CSV file (default: stdout)")

    sub.add_parser("list-problems", help="list registered problems")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "list-problems":
            for name in list_problems():
                print(name)
            return EXIT_OK
        if args.command == "run":
            values = read_config_file(args.config) if args.config else {}
            values.update(_run_overrides(args))
            return cmd_run(build_config(values))
        if args.command == "metrics":
            for path in cmd_metrics(args.artifacts, args.out, args.dims):
                print(path)
            return EXIT_OK
        if args.command == "front-dump":
            points = cmd_front_dump(args.run_dir, args.k)
            fh = open(args.out, "w", newline="") if args.out else sys.stdout
            try:
                w = csv.writer(fh)
                m = len(points[0][1]) if points else 0
                w.writerow(["set"] + [f"f{j + 1}" for j in range(m)])
                for label, f in points:
                    w.writerow([label] + [_fmt(v) for v in f])
            finally:
                if args.out:
                    fh.close()
            return EXIT_OK
    except (ConfigError, FileNotFoundError, KeyError, mt.MetricError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
