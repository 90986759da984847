"""Command-line experiment runner.

    rankgossip <kind> --config exp.yaml [--seed S] [--out DIR] [--replicates M] [--threads T]
    rankgossip run exp.yaml

``kind`` is one of simulate, analytic, fquad, lattice, nash, sweep.  Fields
can also be given or overridden with ``--set key.path=value`` (value parsed
as YAML).  Results go to ``--out``, else the config's ``out``, else
``$RANKGOSSIP_OUT/<kind>-<config hash>`` (default base ``results``).

Exit codes: 0 success, 2 invalid config (message names the field),
1 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analytic, config as cfgmod, fquad, lattice, nash
from .config import ConfigError, ExperimentConfig
from .fpp import EgoDeviation, percolate, spread_stats
from .parallel import map_ordered
from .scaling import loglog_slope
from .seeding import replicate_seeds

OUT_ENV = "RANKGOSSIP_OUT"


@dataclass
class ResultRecord:
    config_hash: str
    version: str
    out_dir: str
    outputs: list = field(default_factory=list)
    duration: float = 0.0
    summary: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


class Outputs:
    """Atomic writers (temp file in the target directory, then rename)."""

    def __init__(self, root: str):
        self.root = root
        self.names: list[str] = []
        os.makedirs(root, exist_ok=True)

    def text(self, name: str, text: str):
        path = os.path.join(self.root, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.names.append(name)

    def json(self, name: str, obj):
        self.text(name, json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self.text(name, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


# -- experiment kinds --------------------------------------------------------------------------

def _simulate(cfg: ExperimentConfig, out: Outputs):
    top, prof = cfg.topology_obj(), cfg.strategy_obj()
    reps = cfg.replicates or 1
    p = cfg.params
    ego = None
    if cfg.ego is not None:
        ego = EgoDeviation(int(p.get("ego_agent", 0)), cfg.ego_obj())
    lo, hi = float(p.get("lo", 0.1)), float(p.get("hi", 0.9))
    seeds = replicate_seeds(cfg.seed, reps, stream=40)

    def one(s):
        run = percolate(top, prof, ego, int(s))
        st = spread_stats(run, lo, hi)
        qs = np.quantile(run.receipt_time, [0.1, 0.5, 0.9])
        er = int(run.rank[ego.agent]) if ego is not None else -1
        return run, (int(s), int(run.source), *qs, st.width, er)

    res = map_ordered(one, seeds, cfg.threads)
    rows = [(i, *r[1]) for i, r in enumerate(res)]
    header = ["replicate", "seed", "source", "t10", "t50", "t90", "width", "ego_rank"]
    out.csv("runs.csv", header, rows)
    for i in range(min(int(p.get("agent_tables", 1)), reps)):
        out.text(f"run_{i:03d}.csv", res[i][0].to_csv())
    widths = np.array([r[6] for r in rows])
    summary = {"replicates": reps, "width_mean": float(widths.mean()),
               "width_stderr": float(widths.std(ddof=1) / np.sqrt(reps)) if reps > 1 else None,
               "n_agents": top.n_agents}
    if ego is not None:
        u = np.array([r[7] for r in rows]) / top.n_agents
        summary["ego_rank_mean"] = float(u.mean())
    return summary


def _analytic(cfg: ExperimentConfig, out: Outputs):
    p = cfg.params
    what = p.get("quantity", "nash_cg")
    if what == "nash_cg":
        spec = cfg.reward_obj()
        th = analytic.nash_cg(spec)
        return {"quantity": what, "theta": th, "payoff": spec.rbar() - th}
    if what == "payoff_cg":
        spec = cfg.reward_obj()
        theta = float(p.get("theta", 0.5))
        phis = np.asarray(p.get("phi", list(theta * np.geomspace(0.25, 4, 9))), dtype=float)
        rows = [(f, analytic.payoff_cg(spec, f, theta)) for f in phis]
        out.csv("payoff.csv", ["phi", "payoff"], rows)
        return {"quantity": what, "theta": theta, "points": len(rows)}
    if what == "finite_k":
        n, k = int(p["n"]), int(p["k"])
        th, pay = analytic.nash_finite_k(n, k, include_source=bool(p.get("include_source", False)))
        return {"quantity": what, "n": n, "k": k, "theta": th, "payoff": pay}
    if what == "audience":
        c = float(p.get("c", 1.0))
        return {"quantity": what, "c": c, "theta": analytic.nash_audience(c),
                "series": analytic.audience_series(c)}
    if what == "symmetric":
        spec = cfg.reward_obj()
        th = analytic.nash_cg(spec)
        return {"quantity": what, "theta_asymmetric": th, "theta": analytic.nash_symmetric(th)}
    if what == "regular_calls":
        theta = float(p.get("theta", 1.0))
        sol = analytic.regular_calls_fixed_point(theta)
        out.csv("cdf.csv", ["t", "F"], zip(sol.t, sol.F))
        return {"quantity": what, "theta": theta, "residual": sol.residual, "iterations": sol.iterations}
    raise ConfigError("params.quantity", f"unknown analytic quantity {what!r}")


def _fquad(cfg: ExperimentConfig, out: Outputs):
    p = cfg.params
    lam = float(p.get("lam", 1.0))
    sol = fquad.solve_fquad(lam, h=float(p.get("h", 2.0**-8)), tol=float(p.get("tol", 1e-6)))
    stride = max(1, int(p.get("stride", 4)))
    out.csv("cdf.csv", ["t", "F"], zip(sol.t[::stride], sol.F[::stride]))
    return {"lam": lam, "residual": sol.residual, "iterations": sol.iterations,
            "projections": sol.projections, "window_width": sol.window_width(),
            "left_tail_rate": fquad.left_tail_rate(lam), "centering": sol.centering}


def _lattice(cfg: ExperimentConfig, out: Outputs):
    p = cfg.params
    task = p.get("task", "shape")
    reps = cfg.replicates
    er = float(p.get("edge_rate", 1.0))

    def shape():
        return lattice.estimate_shape(int(p.get("L", 400)), p.get("s_max"), int(p.get("shape_replicates", 8)),
                                      cfg.seed, edge_rate=er, threads=cfg.threads)

    def taus():
        return lattice.sample_tau(float(p.get("r", 32)), int(reps or 1000), cfg.seed, edge_rate=er,
                                  threads=cfg.threads)

    if task == "shape":
        s = shape()
        out.csv("shape.csv", ["angle", "radius"], zip(s.angles, s.radius))
        out.csv("q.csv", ["s", "q"], s.table())
        return {"task": task, "area": s.area, "area_stderr": s.area_stderr, "area_limit": s.area_limit,
                "hull_excess": s.hull_excess, "edge_rate": s.edge_rate}
    if task == "tau":
        t = taus()
        out.text("tau.csv", t.to_csv())
        return {"task": task, "tau_mean": t.tau.mean(axis=0).tolist(), "replicates": len(t.tau)}
    if task in ("z", "nash-nn"):
        t = taus()
        z = lattice.estimate_z(t, seed=cfg.seed)
        out.csv("z.csv", ["lambda", "Z", "Z_stderr"], z.table())
        summ = {"task": task, "dz1": z.dz1, "dz1_stderr": z.dz1_stderr, "dz1_pathwise": z.dz1_pathwise}
        if task == "nash-nn":
            s = shape()
            N = int(p.get("N", 128))
            th = lattice.nash_torus_nn(cfg.reward_obj(), s, z, N, bins=int(p.get("bins", 10)))
            summ.update({"N": N, "theta": th, "theta_times_N": th * N, "area": s.area_limit})
        return summ
    if task == "uniform-rank":
        r = lattice.uniform_rank_check(int(p.get("N", 128)), int(reps or 10000), cfg.seed, threads=cfg.threads)
        return {"task": task, "ks": r.ks, "pvalue": r.pvalue, "N": r.N}
    raise ConfigError("params.task", f"unknown lattice task {task!r}")


def _nash(cfg: ExperimentConfig, out: Outputs):
    p = cfg.params
    top, spec = cfg.topology_obj(), cfg.reward_obj()
    solver = p.get("solver", "fixed_point")
    reps = cfg.replicates or 1000
    if solver == "fixed_point":
        est = nash.nash_fixed_point(top, spec, cfg.strategy_obj(), int(p.get("iterations", 60)), cfg.seed,
                                    replicates=reps, damping=float(p.get("damping", 0.5)),
                                    ego_len=p.get("ego_len"), threads=cfg.threads,
                                    method=p.get("method", "auto"))
        rep = est.to_dict()
        out.csv("trace.csv", ["iteration", "coordinate", "theta"],
                [(i, j, v) for i, t in enumerate(est.trace) for j, v in enumerate(np.atleast_1d(t))])
        out.json("report.json", rep)
        return {k: rep[k] for k in ("strategy", "strategy_ci", "payoff", "payoff_stderr", "classification",
                                    "flag", "residual", "iterations", "cost")}
    if solver == "short_long_limit":
        if top.kind != "short_long":
            raise ConfigError("topology.kind", "short_long_limit needs a short_long topology")
        res = nash.nash_short_long(spec, top.c_far, float(p["area"]), float(p["dz1"]), N=top.size)
        d = dict(res.__dict__, lambda_N=res.lambda_N)
        out.json("report.json", d)
        return d
    if solver == "distance_cost_efficiency":
        costs = list(top.costs)
        grid = [int(x) for x in p.get("N_grid", [top.size])]
        rep = nash.distance_cost_efficiency(spec, lambda d: costs[d - 1] if d <= len(costs) else costs[-1],
                                            grid, cfg.seed, d_max=int(p.get("d_max", 8)), replicates=reps,
                                            threads=cfg.threads)
        out.csv("efficiency.csv", ["N", "cost", "payoff", "d_star", "d_max", "window_width", "classification"],
                [(r["N"], r["cost"], r["payoff"], r["d_star"], r["d_max"], r["window_width"],
                  r["classification"]) for r in rep["rows"]])
        out.json("report.json", rep)
        return rep
    raise ConfigError("params.solver", f"unknown nash solver {solver!r}")


def _sweep(cfg: ExperimentConfig, out: Outputs):
    p = cfg.params
    base = copy.deepcopy(p["base"])
    base.setdefault("seed", cfg.seed)
    if cfg.replicates is not None:
        base.setdefault("replicates", cfg.replicates)
    values = p["values"]
    ykey = p.get("y")
    xkey = p.get("x")
    subs = []
    for i, v in enumerate(values):
        d = cfgmod.set_path(copy.deepcopy(base), p["vary"], v)
        d["out"] = None
        d["threads"] = None
        subs.append((i, cfgmod.validate(cfgmod.from_dict(d))))

    def one(item):
        i, sub = item
        sub_out = Outputs(os.path.join(out.root, f"point_{i:03d}"))
        try:
            summ = KINDS[sub.kind](sub, sub_out)
            sub_out.json("summary.json", summ)
            return summ, None
        except Exception as e:  # recorded per point
            return None, f"{type(e).__name__}: {e}"

    # points run one after another; each point parallelizes internally
    results = [one(s) for s in subs] if p.get("sequential", True) else map_ordered(one, subs, cfg.threads)
    rows, xs, ys = [], [], []
    for (i, sub), (summ, err) in zip(subs, results):
        yv = None
        if summ is not None and ykey:
            try:
                yv = cfgmod.get_path(summ, ykey)
            except (KeyError, IndexError, TypeError):
                err = f"missing output {ykey!r}"
        xv = cfgmod.get_path(sub.to_dict(), xkey) if xkey else values[i]
        rows.append((i, json.dumps(values[i]), xv if isinstance(xv, (int, float)) else json.dumps(xv),
                     "ok" if err is None else "failed", "" if yv is None else yv, err or ""))
        if err is None and yv is not None:
            xs.append(float(xv))
            ys.append(float(yv))
    out.csv("summary.csv", ["index", "value", "x", "status", "y", "error"], rows)
    summary = {"points": len(values), "failed": sum(r[3] == "failed" for r in rows), "y": ykey}
    if ykey and len(xs) >= 2:
        fit = loglog_slope(xs, np.abs(ys))
        summary.update({"slope": fit.slope, "slope_stderr": fit.stderr, "n_points": fit.n_points})
        if "slope" in p:
            summary["hypothesis_slope"] = float(p["slope"])
        out.csv("slopes.csv", ["x", "y", "slope", "slope_stderr", "n_points"],
                [(xkey or p["vary"], ykey, fit.slope, fit.stderr, fit.n_points)])
    return summary


KINDS = {"simulate": _simulate, "analytic": _analytic, "fquad": _fquad, "lattice": _lattice,
         "nash": _nash, "sweep": _sweep}


def run(cfg: ExperimentConfig, out_dir: str | None = None) -> ResultRecord:
    """Validate, execute and persist one experiment."""
    cfgmod.validate(cfg)
    h = cfg.hash()
    root = out_dir or cfg.out or os.path.join(os.environ.get(OUT_ENV, "results"), f"{cfg.kind}-{h}")
    out = Outputs(root)
    t0 = time.perf_counter()
    summary = KINDS[cfg.kind](cfg, out)
    out.json("summary.json", summary)
    out.text("config.json", json.dumps(json.loads(cfg.canonical()), sort_keys=True, indent=2) + "\n")
    out.json("record.json", {"config_hash": h, "version": __version__, "outputs": sorted(out.names)})
    return ResultRecord(h, __version__, root, sorted(out.names), time.perf_counter() - t0, summary)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rankgossip", description="Rank-based gossip experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML or JSON experiment file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. topology.size=64")

    for kind in KINDS:
        common(sub.add_parser(kind, help=f"run one {kind} experiment"))
    rp = sub.add_parser("run", help="run the experiment described by a config file")
    rp.add_argument("config_file")
    common(rp)
    return ap


def _assemble(args) -> ExperimentConfig:
    data = {}
    path = getattr(args, "config_file", None) or args.config
    if path:
        try:
            with open(path) as fh:
                data = cfgmod.parse_text(fh.read())
        except OSError as e:
            raise ConfigError("--config", str(e)) from None
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
    if args.command != "run":
        if "kind" in data and data["kind"] != args.command:
            raise ConfigError("kind", f"config kind {data['kind']!r} does not match command {args.command!r}")
        data["kind"] = args.command
    for item in args.set:
        if "=" not in item:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfgmod.set_path(data, k.strip(), cfgmod.parse_text(v))
    for key in ("seed", "replicates", "threads"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    return cfgmod.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _assemble(args)
        cfgmod.validate(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        rec = run(cfg, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error ({cfg.kind}): {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(json.dumps({"out": rec.out_dir, "config_hash": rec.config_hash,
                      "duration_s": round(rec.duration, 3), "summary": _jsonable(rec.summary)},
                      sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
