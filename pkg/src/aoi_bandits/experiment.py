"""Experiment configuration files and batch execution.

A configuration is a YAML mapping::

    network:
      num_sources: 3
      arrival_rate: 0.1
      reliabilities: [0.4, 0.45, 0.5, 0.55, 0.6]
      horizon: 100000
      base_seed: 1
      replications: 1000
    source_policy: abmw            # abmw | roundrobin
    channel_policies:              # run and compare in one go
      - ts
      - name: hybrid
        switch_slot: 10000
    mode: independent              # independent | mirrored
    common_random_numbers: true
    grid_points: 200
    output: results
    threads: 4
    trace: false

``num_channels`` may be given but must then match the reliabilities.
Without ``channel_policies`` all five learning policies are run.
Channel policies are either bare names or mappings with ``name`` plus
``eps_c``, ``ucb_c``, ``switch_slot`` or ``observe_empty``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .channels import ChannelPolicySpec
from .metrics import (
    SCHEMA_VERSION,
    periods_report,
    regret_curve,
    write_estimates_csv,
    write_regret_csv,
)
from .model import ConfigError, NetworkConfig
from .simulator import RunMode, default_grid, run_batch, run_replication
from .sources import SOURCE_POLICIES

_NETWORK_KEYS = {"num_sources", "num_channels", "arrival_rate", "reliabilities", "horizon",
                 "base_seed", "replications"}
_TOP_KEYS = {"network", "source_policy", "channel_policies", "mode", "common_random_numbers",
             "grid_points", "output", "threads", "trace"}
_POLICY_KEYS = {"name", "eps_c", "ucb_c", "switch_slot", "observe_empty"}
DEFAULT_POLICIES = ("eps-greedy", "ucb", "ts", "optimal", "hybrid")


class ConfigFileError(ConfigError):
    def __init__(self, message: str, line: Optional[int] = None, path=None):
        where = f"{path}:" if path else ""
        where += f"{line}: " if line else (" " if path else "")
        super().__init__(f"{where}{message}")
        self.line = line


@dataclass
class ExperimentConfig:
    network: NetworkConfig
    channel_policies: list[ChannelPolicySpec]
    source_policy: str = "abmw"
    mode: RunMode = RunMode.INDEPENDENT
    common_random_numbers: bool = True
    grid_points: int = 200
    output: Path = Path("results")
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    trace: bool = False

    def __post_init__(self):
        self.mode = RunMode(self.mode)
        self.output = Path(self.output)
        if self.source_policy not in SOURCE_POLICIES:
            raise ConfigError(f"unknown source policy {self.source_policy!r}", "source_policy")
        if not self.channel_policies:
            raise ConfigError("at least one channel policy is required", "channel_policies")
        names = [p.name for p in self.channel_policies]
        if len(set(names)) != len(names):
            raise ConfigError("channel policies must have distinct names", "channel_policies")
        if self.mode is RunMode.MIRRORED and not self.common_random_numbers:
            raise ConfigError("mirrored mode needs common random numbers", "mode")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1", "threads")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2", "grid_points")

    @property
    def grid(self) -> np.ndarray:
        return default_grid(self.network.horizon, self.grid_points)

    def to_dict(self) -> dict:
        net = asdict(self.network)
        net["reliabilities"] = list(net["reliabilities"])
        return {
            "network": net,
            "source_policy": self.source_policy,
            "channel_policies": [asdict(p) for p in self.channel_policies],
            "mode": self.mode.value,
            "common_random_numbers": self.common_random_numbers,
            "grid_points": self.grid_points,
            "output": str(self.output),
            "threads": self.threads,
            "trace": self.trace,
        }


def _key_lines(node, prefix=()) -> dict:
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = prefix + (k.value,)
            lines[key] = k.start_mark.line + 1
            lines.update(_key_lines(v, key))
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = prefix + (i,)
            lines[key] = v.start_mark.line + 1
            lines.update(_key_lines(v, key))
    return lines


def parse_config(text: str, path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse and validate a configuration; errors carry the offending line.

    ``overrides`` maps network field names or top-level keys to values that
    replace whatever the file says (used by the command line).
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigFileError(f"malformed configuration: {getattr(exc, 'problem', exc)}", line, path)
    lines = _key_lines(root) if root is not None else {}

    def fail(msg, *key):
        while key and key not in lines:
            key = key[:-1]
        raise ConfigFileError(msg, lines.get(key), path)

    if not isinstance(data, dict):
        raise ConfigFileError("configuration must be a mapping", 1, path)
    for k in data:
        if k not in _TOP_KEYS:
            fail(f"unknown key {k!r}", k)
    net = data.get("network")
    if not isinstance(net, dict):
        fail("missing 'network' section", "network")
    for k in net:
        if k not in _NETWORK_KEYS:
            fail(f"unknown network key {k!r}", "network", k)
    overrides = dict(overrides or {})
    net = dict(net)
    for k in list(overrides):
        if k in _NETWORK_KEYS:
            net[k] = overrides.pop(k)
    for k in ("num_sources", "arrival_rate", "reliabilities", "horizon"):
        if k not in net:
            fail(f"network.{k} is required", "network")
    rel = net["reliabilities"]
    if not isinstance(rel, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                            for x in rel):
        fail("network.reliabilities must be a list of numbers", "network", "reliabilities")
    if not isinstance(net["arrival_rate"], (int, float)) or isinstance(net["arrival_rate"], bool):
        fail("network.arrival_rate must be a number", "network", "arrival_rate")
    net.setdefault("num_channels", len(rel))
    net.setdefault("base_seed", 0)
    net.setdefault("replications", 1)
    for k in ("num_sources", "num_channels", "horizon", "base_seed", "replications"):
        if isinstance(net[k], bool) or not isinstance(net[k], int):
            fail(f"network.{k} must be an integer", "network", k)
    try:
        network = NetworkConfig(**net)
    except ConfigError as exc:
        fail(str(exc), "network", exc.field or "")

    top = {k: v for k, v in data.items() if k != "network"}
    top.update(overrides)
    raw_policies = top.pop("channel_policies", None)
    if raw_policies is None:
        raw_policies = list(DEFAULT_POLICIES)
    if isinstance(raw_policies, (str, dict)):
        raw_policies = [raw_policies]
    policies = []
    for i, raw in enumerate(raw_policies):
        if isinstance(raw, str):
            raw = {"name": raw}
        if not isinstance(raw, dict) or "name" not in raw:
            fail("each channel policy needs a name", "channel_policies", i)
        unknown = set(raw) - _POLICY_KEYS
        if unknown:
            fail(f"unknown channel policy keys {sorted(unknown)}", "channel_policies", i)
        try:
            policies.append(ChannelPolicySpec(**raw))
        except (TypeError, ValueError) as exc:
            fail(str(exc), "channel_policies", i)
    try:
        mode = RunMode(top.pop("mode", RunMode.INDEPENDENT))
    except ValueError:
        fail("mode must be 'independent' or 'mirrored'", "mode")
    for k, kind in (("common_random_numbers", bool), ("trace", bool), ("grid_points", int),
                    ("threads", int)):
        if k in top and not isinstance(top[k], kind):
            fail(f"{k} must be of type {kind.__name__}", k)
    try:
        return ExperimentConfig(network=network, channel_policies=policies, mode=mode, **top)
    except ConfigError as exc:
        fail(str(exc), exc.field or "")


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path, overrides)


def run_experiment(cfg: ExperimentConfig, progress=None) -> dict:
    """Run every channel policy and write its artifacts into ``cfg.output``.

    ``progress(policy_name, total)``, if given, must return a per-replication
    callback.

    Writes ``<policy>_regret.csv``, ``<policy>_estimates.csv``,
    ``<policy>_periods.json`` per policy and one ``manifest.json``; with
    ``cfg.trace`` also ``<policy>_trace.jsonl`` for the first replication.
    Returns a summary keyed by policy name.
    """
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid
    summary = {}
    written = []
    for spec in cfg.channel_policies:
        tick = None if progress is None else progress(spec.name, cfg.network.replications)
        traces = run_batch(cfg.network, spec, cfg.mode, source_policy=cfg.source_policy, grid=grid,
                           common_random_numbers=cfg.common_random_numbers, threads=cfg.threads,
                           progress=tick)
        record = regret_curve(traces)
        write_regret_csv(record, out / f"{spec.name}_regret.csv")
        write_estimates_csv(record, out / f"{spec.name}_estimates.csv")
        with open(out / f"{spec.name}_periods.json", "w", encoding="utf-8") as fh:
            json.dump(periods_report(traces, record), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if cfg.trace:
            first = run_replication(cfg.network, spec, cfg.mode, traces[0].seed,
                                    source_policy=cfg.source_policy, grid=grid, record=True,
                                    common_random_numbers=cfg.common_random_numbers)
            with open(out / f"{spec.name}_trace.jsonl", "w", encoding="utf-8") as fh:
                for row in first.slot_rows():
                    fh.write(json.dumps(row) + "\n")
        written += [f"{spec.name}_{k}" for k in ("regret.csv", "estimates.csv", "periods.json")]
        if cfg.trace:
            written.append(f"{spec.name}_trace.jsonl")
        summary[spec.name] = {
            "regret_T": float(record.regret_mean[-1]),
            "regret_T_stderr": float(record.regret_stderr[-1]),
            "suboptimal_choices_T": float(record.suboptimal_choices_mean[-1]),
        }
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "seeds": cfg.network.seeds(),
        "grid": grid.tolist(),
        "artifacts": written,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return summary
