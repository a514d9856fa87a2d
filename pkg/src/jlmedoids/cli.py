"""Command-line entry point: ``jlmedoids <subcommand> ...``.

Exit codes: 0 success (failed checks are data, not errors), 2 usage or
configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import constant_for
from .clustering import BudgetExceeded, ClusteringInstance, opt, opt_exact, opt_local
from .geometry import GeometryError, read_point_set, write_point_set
from .instances import FAMILIES, InstanceError, InstanceSpec, make_instance
from .nets import build_net, estimate_ddim
from .projection import (
    DimensionRecipe,
    VARIANTS,
    ProjectionError,
    apply_set,
    sample_map,
    target_dimension,
    write_map,
)
from .stats import chi_square_lower_tail, lower_tail_bound
from .verify import CHECKS, DEFAULT_ALPHA, GuaranteeReport, VerifyError, seeded_check

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CSV_HEADER = ["check", "seed", "t", "eps", "alpha", "pass", "worst_ratio", "runtime_ms"]
THRESHOLDS = {"expansion": 2 / 3, "contraction": 2 / 3, "relaxed-contraction": 2 / 3, "fixed-solution": 0.9}


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 2."""


# -- config ---------------------------------------------------------------------------


@dataclass
class CheckSpec:
    name: str
    eps: float
    alpha: float = DEFAULT_ALPHA
    identity: bool = False
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    instance: InstanceSpec
    ts: list
    checks: list
    trials: int
    base_seed: int
    output: Path
    workers: int = 1
    record_timing: bool = False


@dataclass(frozen=True)
class ResultRow:
    check: str
    seed: int
    t: int
    eps: float
    alpha: float
    passed: bool
    worst_ratio: float
    runtime_ms: float
    exact: bool = True

    def cells(self) -> list:
        return [self.check, self.seed, self.t, repr(float(self.eps)), repr(float(self.alpha)),
                "true" if self.passed else "false", repr(float(self.worst_ratio)), f"{self.runtime_ms:.3f}"]


def load_mapping(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix == ".json":
            return json.loads(raw)
        return tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _recipe_t(mapping: dict) -> int:
    m = dict(mapping)
    if m.get("variant") in VARIANTS:
        m.setdefault("c_const", constant_for(m["variant"]))
    try:
        return target_dimension(DimensionRecipe.from_mapping(m))
    except (ProjectionError, TypeError) as exc:
        raise UsageError(f"recipe: {exc}") from None


def parse_config(data: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    """Validate an experiment mapping (TOML or JSON); raises :class:`UsageError`."""
    known = {"instance", "recipe", "t", "checks", "trials", "base_seed", "output", "workers", "record_timing",
             "eps", "alpha"}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    inst = data.get("instance")
    if not isinstance(inst, dict) or "family" not in inst:
        raise UsageError("config needs an [instance] table with a family")
    if inst["family"] not in FAMILIES:
        raise UsageError(f"unknown family {inst['family']!r}; choose from {sorted(FAMILIES)}")
    spec = InstanceSpec(inst["family"], dict(inst.get("params", {})), inst.get("seed"))
    if ("t" in data) == ("recipe" in data):
        raise UsageError("give exactly one of 't' (integer or list) or a [recipe] table")
    if "t" in data:
        ts = data["t"] if isinstance(data["t"], list) else [data["t"]]
    else:
        ts = [_recipe_t(data["recipe"])]
    if not ts or not all(isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in ts):
        raise UsageError("t must be a positive integer or a nonempty list of them")
    trials = data.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        raise UsageError("trials must be an integer >= 1")
    base_seed = data.get("base_seed", 0)
    if not isinstance(base_seed, int) or base_seed < 0:
        raise UsageError("base_seed must be a nonnegative integer")
    raw_checks = data.get("checks")
    if not raw_checks:
        raise UsageError("config needs at least one [[checks]] entry")
    checks = []
    for c in raw_checks:
        c = dict(c)
        name = c.pop("name", None)
        if name not in CHECKS:
            raise UsageError(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
        eps = c.pop("eps", data.get("eps"))
        if eps is None or not 0 < eps <= 0.5:
            raise UsageError(f"check {name}: eps must lie in (0, 1/2]")
        alpha = c.pop("alpha", data.get("alpha", DEFAULT_ALPHA))
        identity = bool(c.pop("identity", False))
        checks.append(CheckSpec(name, float(eps), float(alpha), identity, c))
    out = Path(data.get("output", "results.csv"))
    if not out.is_absolute():
        out = base_dir / out
    workers = data.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise UsageError("workers must be an integer >= 1")
    return ExperimentConfig(spec, ts, checks, trials, base_seed, out, workers, bool(data.get("record_timing", False)))


def _build_instance(spec: InstanceSpec) -> ClusteringInstance:
    try:
        inst = make_instance(spec)
    except (InstanceError, GeometryError, ValueError) as exc:
        raise UsageError(f"instance: {exc}") from None
    return inst


def _run_cell(inst, chk: CheckSpec, t: int, seed: int, record_timing: bool) -> ResultRow:
    fn = seeded_check(chk.name, inst, t, chk.eps, chk.alpha, chk.identity, **chk.params)
    t0 = time.perf_counter()
    try:
        rep = fn(seed)
    except BudgetExceeded:
        rep = GuaranteeReport(chk.name, False, math.nan, exact=False)
    ms = (time.perf_counter() - t0) * 1000.0 if record_timing else 0.0
    return ResultRow(chk.name, seed, inst.P.dim if chk.identity else t, chk.eps, chk.alpha, rep.passed,
                     rep.worst_ratio, ms, rep.exact)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list, dict]:
    """Execute every (check, t, seed) cell; rows come back ordered by check, t, seed."""
    inst = _build_instance(cfg.instance)
    cells = [(chk, t, cfg.base_seed + i) for chk in cfg.checks for t in cfg.ts for i in range(cfg.trials)]
    nw = cfg.workers if workers is None else workers
    run = lambda cell: _run_cell(inst, cell[0], cell[1], cell[2], cfg.record_timing)  # noqa: E731
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            rows = list(ex.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    return rows, summarize(rows)


def summarize(rows) -> dict:
    out = {}
    for r in rows:
        s = out.setdefault(r.check, {"trials": 0, "successes": 0, "non_exact": 0, "by_t": {}})
        s["trials"] += 1
        s["successes"] += int(r.passed)
        s["non_exact"] += int(not r.exact)
        bt = s["by_t"].setdefault(str(r.t), {"trials": 0, "successes": 0})
        bt["trials"] += 1
        bt["successes"] += int(r.passed)
    for name, s in out.items():
        s["rate"] = s["successes"] / s["trials"]
        for bt in s["by_t"].values():
            bt["rate"] = bt["successes"] / bt["trials"]
        if name in THRESHOLDS:
            s["threshold"] = THRESHOLDS[name]
            s["meets_threshold"] = s["rate"] >= THRESHOLDS[name]
    return out


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_results(rows, summary: dict, csv_path: Path) -> Path:
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(rows_to_csv(rows))
    json_path = csv_path.with_suffix(".summary.json")
    json_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return json_path


# -- subcommands ----------------------------------------------------------------------


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except ValueError:
            out[k] = v
    return out


def _read(path):
    try:
        return read_point_set(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except (GeometryError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _instance_from_args(args) -> ClusteringInstance:
    P = _read(args.input)
    Q = _read(args.candidates) if getattr(args, "candidates", None) else P
    try:
        return ClusteringInstance(P, Q, args.k, args.z)
    except (GeometryError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _map_t(args) -> int:
    if args.t is not None:
        return args.t
    if args.recipe:
        return _recipe_t(load_mapping(args.recipe))
    raise UsageError("give --t or --recipe")


def cmd_gen(args, out):
    inst = _build_instance(InstanceSpec(args.family, _parse_params(args.params), args.seed))
    write_point_set(inst.P, args.out)
    if args.out_candidates:
        write_point_set(inst.Q, args.out_candidates)
    print(f"wrote {len(inst.P)} points (total weight {inst.P.size}, dim {inst.P.dim}) to {args.out}", file=out)


def cmd_project(args, out):
    P = _read(args.input)
    G = sample_map(P.dim, _map_t(args), args.seed)
    try:
        write_point_set(apply_set(G, P), args.out)
    except GeometryError as exc:
        raise UsageError(f"projected points collide ({exc}); use a larger t") from None
    if args.map_out:
        write_map(G, args.map_out)
    print(f"projected {len(P)} points from d={G.d} to t={G.t}", file=out)


def cmd_net(args, out):
    P = _read(args.input)
    net = build_net(P, np.arange(len(P)), args.rho)
    print(json.dumps({"rho": net.rho, "size": len(net), "members": net.member_indices.tolist(),
                      "packing": net.is_packing(P), "covering": net.is_covering(P)}), file=out)


def cmd_ddim(args, out):
    est = estimate_ddim(_read(args.input), radius_ratio=args.radius_ratio)
    if args.json:
        print(json.dumps({"value": est.value, "method": est.method, "witness": list(est.witness),
                          "cover_size": est.cover_size}), file=out)
    else:
        print(repr(est.value), file=out)


def cmd_opt(args, out):
    inst = _instance_from_args(args)
    if args.mode == "exact":
        try:
            res = opt_exact(inst, args.budget)
        except BudgetExceeded as exc:
            raise UsageError(str(exc)) from None
    elif args.mode == "local":
        res = opt_local(inst, args.restarts, args.seed)
    else:
        res = opt(inst, args.budget, args.restarts, args.seed)
    print(json.dumps({"value": res.value, "centers": list(res.solution.center_indices), "exact": res.exact}),
          file=out)


def cmd_verify(args, out):
    inst = _instance_from_args(args)
    t = inst.P.dim if args.identity else _map_t(args)
    params = {}
    if args.check == "preserve-sum":
        params["center"] = inst.P.points[args.center_index]
    fn = seeded_check(args.check, inst, t, args.eps, args.alpha, args.identity, **params)
    seeds = [args.base_seed + i for i in range(args.trials)]
    reports = [fn(s) for s in seeds]
    ok = sum(r.passed for r in reports)
    doc = {
        "schema": 1,
        "check": args.check,
        "t": t,
        "eps": args.eps,
        "alpha": args.alpha,
        "summary": {"trials": len(seeds), "successes": ok, "rate": ok / len(seeds)},
        "trials": [dict(seed=s, **r.to_dict()) for s, r in zip(seeds, reports)],
    }
    text = json.dumps(doc, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(f"{args.check}: {ok}/{len(seeds)} passed (t={t})", file=out)


def cmd_stats(args, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "eps", "estimate", "stderr", "bound"])
    for t in args.t:
        for eps in args.eps:
            est = chi_square_lower_tail(t, eps, args.trials, args.seed)
            w.writerow([t, repr(eps), repr(est.probability), repr(est.stderr), repr(lower_tail_bound(t, eps, args.c))])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        out.write(buf.getvalue())


def cmd_experiment(args, out):
    path = Path(args.config)
    cfg = parse_config(load_mapping(path), path.parent)
    if args.out:
        cfg.output = Path(args.out)
    rows, summary = run_experiment(cfg, args.workers)
    json_path = write_results(rows, summary, cfg.output)
    for name, s in summary.items():
        print(f"{name}: {s['successes']}/{s['trials']} (rate {s['rate']:.3f})", file=out)
    print(f"wrote {cfg.output} and {json_path}", file=out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jlmedoids", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def instance_args(p):
        p.add_argument("--input", required=True, help="point CSV (w,x1..xd rows)")
        p.add_argument("--candidates", help="candidate-center CSV (default: the input set)")
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--z", type=float, default=1.0)

    def map_args(p):
        p.add_argument("--t", type=int, help="target dimension")
        p.add_argument("--recipe", help="TOML/JSON recipe giving the target dimension")

    p = sub.add_parser("gen", help="generate an instance family")
    p.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p.add_argument("--params", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--out-candidates", help="also write the candidate set")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("project", help="apply a seeded Gaussian map")
    p.add_argument("--input", required=True)
    map_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--map-out", help="also write the map in binary form")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("net", help="greedy rho-net of a point set")
    p.add_argument("--input", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("ddim", help="greedy-cover doubling dimension estimate")
    p.add_argument("--input", required=True)
    p.add_argument("--radius-ratio", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ddim)

    p = sub.add_parser("opt", help="discrete (k, z)-clustering optimum")
    instance_args(p)
    p.add_argument("--mode", choices=["exact", "local", "auto"], default="auto")
    p.add_argument("--budget", type=int, default=2_000_000)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("verify", help="run a guarantee check over seeded maps")
    instance_args(p)
    map_args(p)
    p.add_argument("--check", required=True, choices=sorted(CHECKS))
    p.add_argument("--identity", action="store_true", help="use the identity map (t = d)")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--center-index", type=int, default=0, help="center for preserve-sum")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="chi-square lower-tail estimates as CSV")
    p.add_argument("--t", type=int, nargs="+", required=True)
    p.add_argument("--eps", type=float, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=8.0, help="constant in the exp(-c eps^2 t)/t bound column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("experiment", help="run a configured experiment to CSV + JSON summary")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, help="override the configured worker count")
    p.add_argument("--out", help="override the configured CSV path")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except UsageError as exc:
        print(f"jlmedoids {args.command}: {exc}", file=sys.stderr)
        return 2
    except (InstanceError, ProjectionError, VerifyError, GeometryError) as exc:
        print(f"jlmedoids {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"jlmedoids {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
