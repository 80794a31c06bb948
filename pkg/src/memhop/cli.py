"""Config-driven command line.

    memhop run CONFIG [--override K=V ...] [--check] [--workers N]
               [--seed S] [--out-dir D]
    memhop describe CONFIG [--override K=V ...]
    memhop bench [--nodes N] [--events M] [--hbar2 H]

Exit codes: 0 success; 2 config/schema error; 3 output I/O error;
4 engine/ensemble failure; 5 acceptance check failed (--check).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from .ensemble import EnsembleError
from .engine import EngineError
from .experiments import CheckFailure, ExperimentError, describe, execute

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_RUN = 4
EXIT_CHECK = 5

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["two_level", "ring", "complete_graph",
                          "random_hermitian"]},
        "n": {"type": "integer", "minimum": 2},
        "g": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "diagonal": {"type": "boolean"},
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["uniform", "basis", "angle", "random",
                                  "vector"]},
                "index": {"type": "integer", "minimum": 0},
                "theta": {"type": "number"},
                "seed": {"type": "integer", "minimum": 0},
                "components": {"type": "array",
                               "items": {"type": "array",
                                         "items": {"type": "number"},
                                         "minItems": 2, "maxItems": 2}},
            },
        },
    },
}

_PARAMS_PROPERTIES = {
    "hbar2": {"type": "number", "exclusiveMinimum": 0},
    "t_end": {"type": "number", "exclusiveMinimum": 0},
    "n_points": {"type": "integer", "minimum": 2},
    "n_trajectories": {"type": "integer", "minimum": 1},
    "n_trajectories_sweep": {"type": "integer", "minimum": 1},
    "snapshot_times": {"type": "array", "items": {"type": "number"},
                       "minItems": 1},
    "epsilon_psi": {"type": "number", "exclusiveMinimum": 0},
    "max_events": {"type": "integer", "minimum": 1},
    "start_node": {"type": "integer", "minimum": 0},
    "time_dependent_rule": {"type": "boolean"},
    "rate_clamp": {"type": "boolean"},
    "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}},
    "hbar2_values": {"type": "array",
                     "items": {"type": "number", "exclusiveMinimum": 0}},
    "hbar2_ladder": {"type": "array",
                     "items": {"type": "number", "exclusiveMinimum": 0}},
    "min_repeats": {"type": "number", "exclusiveMinimum": 0},
    "g": {"type": "number", "exclusiveMinimum": 0},
    "n_qubits": {"type": "integer", "minimum": 2},
    "tau_gate": {"type": "number", "exclusiveMinimum": 0},
    "theta": {"type": "number"},
    "thetas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    "hbar2_sweep": {"type": "number", "exclusiveMinimum": 0},
    "d_env": {"type": "integer", "minimum": 0},
    "d_env_sweep": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    "omega_int": {"type": "number", "exclusiveMinimum": 0},
    "omega_weak": {"type": "number", "minimum": 0},
    "dwell_time": {"type": "number", "minimum": 0},
    "window": {"type": "array", "items": {"type": "number"},
               "minItems": 2, "maxItems": 2},
    "n_seeds": {"type": "integer", "minimum": 1},
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "kind", "seed"],
    "properties": {
        "schema": {"const": "memhop-experiment/1"},
        "kind": {"enum": ["oracle-check", "trajectory", "equivariance",
                          "recurrence-scaling", "cat-state", "measurement",
                          "hbar2-convergence"]},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "model": _MODEL_SCHEMA,
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": _PARAMS_PROPERTIES,
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

_NEEDS_MODEL = {"oracle-check", "trajectory", "equivariance"}


def load_config(path: str, overrides) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object")
        node[parts[-1]] = value
    validate_config(cfg)
    return cfg


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
    if cfg["kind"] in _NEEDS_MODEL and "model" not in cfg:
        raise ConfigError(f"experiment kind {cfg['kind']!r} requires a model")
    if "params" not in cfg and cfg["kind"] != "oracle-check":
        cfg["params"] = {}
    cfg.setdefault("params", {})


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="memhop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path config override")
    p_run.add_argument("--check", action="store_true",
                       help="nonzero exit on acceptance-tolerance violation")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out-dir", default=None)

    p_desc = sub.add_parser("describe", help="print the execution plan (dry run)")
    p_desc.add_argument("config")
    p_desc.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE")

    p_bench = sub.add_parser("bench", help="benchmark the jitted kernel vs the "
                                           "pure-numpy fallback")
    p_bench.add_argument("--nodes", type=int, default=8)
    p_bench.add_argument("--events", type=int, default=2_000_000)
    p_bench.add_argument("--hbar2", type=float, default=1e-3)

    args = parser.parse_args(argv)

    if args.command == "bench":
        from .bench import run_bench
        run_bench(n_nodes=args.nodes, n_events=args.events, hbar2=args.hbar2)
        return EXIT_OK

    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "describe":
        print(json.dumps(describe(cfg), indent=1))
        return EXIT_OK

    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    outdir = Path(args.out_dir or cfg.get("output", {}).get("dir", "out"))
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write-probe"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        print(f"output directory not writable: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        summary = execute(cfg, outdir, args.check)
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (EngineError, EnsembleError, ExperimentError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, indent=1))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
