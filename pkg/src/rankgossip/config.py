"""Experiment configuration: parsing, validation and canonical hashing.

A config is a YAML (or JSON) mapping::

    kind: nash                 # simulate | analytic | fquad | lattice | nash | sweep
    seed: 1
    replicates: 1000
    topology: {kind: complete, size: 10000}
    reward: {family: linear}
    strategy: [0.5]            # population rates (initial guess for nash)
    params: {...}              # kind-specific settings

Validation errors raise ``ConfigError`` naming the offending field.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .fpp import StrategyProfile, Topology
from .reward import RewardSpec, reward_from_config

KINDS = ("simulate", "analytic", "fquad", "lattice", "nash", "sweep")
TOP_KEYS = ("kind", "seed", "replicates", "threads", "topology", "reward", "strategy", "ego",
            "params", "out")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    replicates: int | None = None
    threads: int | None = None
    topology: dict | None = None
    reward: dict | None = None
    strategy: list | None = None
    ego: list | None = None
    params: dict = field(default_factory=dict)
    out: str | None = None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in TOP_KEYS}
        return {k: v for k, v in d.items() if v is not None and v != {}}

    def canonical(self) -> str:
        """Sorted-key JSON of everything except output location and thread count."""
        d = self.to_dict()
        d.pop("out", None)
        d.pop("threads", None)
        return json.dumps(_plain(d), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # typed accessors, valid after ``validate``
    def topology_obj(self) -> Topology:
        return topology_from_config(self.topology)

    def reward_obj(self) -> RewardSpec:
        return reward_from_config(self.reward)

    def strategy_obj(self) -> StrategyProfile | None:
        return None if self.strategy is None else StrategyProfile(tuple(float(x) for x in self.strategy))

    def ego_obj(self) -> StrategyProfile | None:
        return None if self.ego is None else StrategyProfile(tuple(float(x) for x in self.ego))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def topology_from_config(cfg: dict) -> Topology:
    kind = cfg.get("kind")
    size = cfg.get("size")
    if kind == "complete":
        return Topology.complete(size)
    if kind == "torus_nn":
        return Topology.torus_nn(size)
    if kind == "short_long":
        return Topology.short_long(size, cfg.get("c_far", 1.0))
    if kind == "distance_cost":
        costs = cfg.get("costs")
        if costs is None and "cost_power" in cfg:
            p = float(cfg["cost_power"])
            costs = lambda d: float(d) ** p  # noqa: E731
        return Topology.distance_cost(size, costs if costs is not None else ())
    raise ValueError(f"unknown topology kind {kind!r}")


def _require_int(d, key, name, lo=None):
    v = d.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be >= {lo}, got {v}")
    return int(v)


def _rates(vals, name):
    if not isinstance(vals, (list, tuple)) or not vals:
        raise ConfigError(name, "expected a nonempty list of rates")
    for i, v in enumerate(vals):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{name}[{i}]", f"expected a number, got {v!r}")
        if not np.isfinite(v) or v < 0:
            raise ConfigError(f"{name}[{i}]", f"calling rates must be finite and nonnegative, got {v}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.kind not in KINDS:
        raise ConfigError("kind", f"expected one of {KINDS}, got {cfg.kind!r}")
    if cfg.seed is None:
        raise ConfigError("seed", "a seed is required")
    _require_int({"seed": cfg.seed}, "seed", "seed", 0)
    if cfg.replicates is not None:
        _require_int({"r": cfg.replicates}, "r", "replicates", 1)
    if cfg.threads is not None:
        _require_int({"t": cfg.threads}, "t", "threads", 1)
    if not isinstance(cfg.params, dict):
        raise ConfigError("params", "expected a mapping")
    if cfg.topology is not None:
        if not isinstance(cfg.topology, dict):
            raise ConfigError("topology", "expected a mapping")
        _require_int(cfg.topology, "size", "topology.size", 2)
        try:
            top = topology_from_config(cfg.topology)
        except ValueError as e:
            raise ConfigError("topology", str(e)) from None
    else:
        top = None
    if cfg.reward is not None:
        try:
            reward_from_config(cfg.reward)
        except (ValueError, TypeError, IndexError) as e:
            raise ConfigError("reward", str(e)) from None
    for name in ("strategy", "ego"):
        vals = getattr(cfg, name)
        if vals is None:
            continue
        _rates(vals, name)
        if top is not None:
            try:
                top.check_profile(StrategyProfile(tuple(float(x) for x in vals)), allow_zero=name == "ego")
            except ValueError as e:
                raise ConfigError(name, str(e)) from None
    needs = {"simulate": ("topology", "strategy"), "nash": ("topology", "reward")}
    for key in needs.get(cfg.kind, ()):
        if getattr(cfg, key) is None:
            raise ConfigError(key, f"required for kind {cfg.kind!r}")
    if cfg.kind == "sweep":
        p = cfg.params
        if "base" not in p or not isinstance(p["base"], dict):
            raise ConfigError("params.base", "sweep needs a base experiment mapping")
        if not isinstance(p.get("vary"), str):
            raise ConfigError("params.vary", "expected a dotted key path such as 'topology.size'")
        if not isinstance(p.get("values"), list) or not p["values"]:
            raise ConfigError("params.values", "sweep grid must be a nonempty list")
        base = dict(p["base"])
        base.setdefault("seed", cfg.seed)
        if base.get("kind") == "sweep":
            raise ConfigError("params.base.kind", "nested sweeps are not supported")
        for i, v in enumerate(p["values"]):
            try:
                validate(from_dict(set_path(copy.deepcopy(base), p["vary"], v)))
            except ConfigError as e:
                raise ConfigError(f"params.values[{i}].{e.field}", str(e).split(": ", 1)[-1]) from None
    return cfg


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = sorted(set(d) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(unknown[0], f"unknown field; allowed: {TOP_KEYS}")
    if "kind" not in d:
        raise ConfigError("kind", "missing")
    return ExperimentConfig(
        kind=d["kind"], seed=d.get("seed"), replicates=d.get("replicates"), threads=d.get("threads"),
        topology=d.get("topology"), reward=d.get("reward"), strategy=d.get("strategy"),
        ego=d.get("ego"), params=d.get("params") or {}, out=d.get("out"))


def parse_text(text: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "<unknown position>"
        raise ConfigError(where, f"cannot parse config: {getattr(e, 'problem', e)}") from None
    return data if data is not None else {}


def load(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return from_dict(parse_text(fh.read()))


def set_path(d: dict, path: str, value):
    """Set ``d[a][b]...`` for ``path = "a.b..."``; list indices are written ``a.0``."""
    keys = path.split(".")
    cur = d
    for k in keys[:-1]:
        if isinstance(cur, list):
            cur = cur[int(k)]
        else:
            cur = cur.setdefault(k, {})
    last = keys[-1]
    if isinstance(cur, list):
        cur[int(last)] = value
    else:
        cur[last] = value
    return d


def get_path(d, path: str):
    cur = d
    for k in path.split("."):
        cur = cur[int(k)] if isinstance(cur, list) else cur[k]
    return cur
