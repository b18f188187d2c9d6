"""Batch experiment runner.

    mixtime --family lollipop:4,4 --epsilon 1/64 --tokens 1000000000 --oracle --out runs/lol

Writes ``report.json``, ``probes.csv`` and ``ledger.csv`` (plus
``timings.json``; wall-clock times are kept out of the report so that equal
configurations give byte-identical reports). Exit codes: 0 success, 2 config
error, 3 graph validation error, 4 length cap exceeded. Errors are also
printed to stderr as a JSON object.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import oracle
from .congest import TAG_BITS
from .graphcore import (
    Graph,
    GraphError,
    MaxLengthExceeded,
    diameter,
    generate,
    parse_family,
    read_graph,
    validate_for_walk,
)
from .mixing import MixingEstimate, WalkConfig, estimate_mixing_time, oracle_agreement

__all__ = [
    "ConfigError",
    "UnknownFlag",
    "MalformedRational",
    "MissingGraphSource",
    "ExperimentConfig",
    "ExperimentReport",
    "parse_config",
    "parse_configs",
    "run_experiment",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_CAP = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class UnknownFlag(ConfigError):
    pass


class MalformedRational(ConfigError):
    pass


class MissingGraphSource(ConfigError):
    pass


def parse_rational(text: str) -> Fraction:
    """Parse ``num/den`` (or a bare integer); decimals are rejected."""
    text = str(text).strip()
    num, sep, den = text.partition("/")
    digits = num.lstrip("-")
    if not digits.isdigit() or (sep and not den.isdigit()):
        raise MalformedRational(f"expected num/den, got {text!r}")
    if sep and int(den) == 0:
        raise MalformedRational(f"zero denominator in {text!r}")
    return Fraction(int(num), int(den) if sep else 1)


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str | None = None
    family: str | None = None
    source: int = 0
    epsilon: Fraction | None = None
    tokens: int | None = None
    paper_k: bool = False
    seed: int = 0
    lazy: bool = False
    max_length: int | None = None
    oracle: bool = False
    spectral: bool = False
    monotonicity_horizon: int | None = None
    out: str | None = None
    jobs: int = 1
    name: str | None = None

    def __post_init__(self):
        if (self.graph is None) == (self.family is None):
            if self.graph is None:
                raise MissingGraphSource("give exactly one of --graph or --family")
            raise ConfigError("--graph and --family are mutually exclusive")
        if self.tokens is not None and self.paper_k:
            raise ConfigError("--tokens and --paper-k are mutually exclusive")
        if self.tokens is not None and self.tokens < 1:
            raise ConfigError("--tokens must be positive")
        if self.jobs < 1:
            raise ConfigError("--jobs must be positive")

    def load_graph(self) -> Graph:
        if self.graph is not None:
            return read_graph(self.graph)
        return generate(parse_family(self.family), seed=self.seed)

    def walk_config(self, g: Graph) -> WalkConfig:
        if self.tokens is None:
            return WalkConfig.paper(
                g.n, epsilon=self.epsilon, seed=self.seed, lazy=self.lazy, max_length=self.max_length
            )
        return WalkConfig(
            K=self.tokens, epsilon=self.epsilon, seed=self.seed, lazy=self.lazy, max_length=self.max_length
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "unrecognized arguments" in message:
            raise UnknownFlag(message)
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixtime", description="Distributed mixing-time estimation experiments.")
    p.add_argument("--config", help="JSON file with default values (flags win)")
    p.add_argument("--graph", help="graph file ('n m' header then 'u v' lines)")
    p.add_argument("--family", help="graph family, e.g. cycle:5 or lollipop:4,4")
    p.add_argument("--source", type=int)
    p.add_argument("--epsilon", help="accuracy as num/den (default 1/n^2)")
    k = p.add_mutually_exclusive_group()
    k.add_argument("--tokens", type=int, help="number of walk tokens K")
    k.add_argument("--paper-k", action="store_true", default=None, help="K = ceil(80 n^8 ln n)")
    p.add_argument("--seed", type=int)
    p.add_argument("--lazy", action="store_true", default=None)
    p.add_argument("--max-length", type=int)
    p.add_argument("--oracle", action="store_true", default=None)
    p.add_argument("--spectral", action="store_true", default=None)
    p.add_argument("--monotonicity-horizon", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int)
    return p


_KEYS = {f.name for f in fields(ExperimentConfig)}


def _coerce(raw: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise UnknownFlag(f"unknown option {key!r}")
        if key == "epsilon" and value is not None and not isinstance(value, Fraction):
            if not isinstance(value, str):
                raise MalformedRational(f"epsilon must be a num/den string, got {value!r}")
            value = parse_rational(value)
        out[key] = value
    return out


def parse_configs(args: Sequence[str], file: str | Path | None = None) -> list[ExperimentConfig]:
    """Parse flags plus an optional JSON file into one or more experiments.

    The file holds option values and optionally an ``experiments`` list whose
    entries override the file defaults. Command-line flags override both.
    """
    ns = _build_parser().parse_args(list(args))
    file = file if file is not None else ns.config
    flags = {k: v for k, v in vars(ns).items() if k != "config" and v is not None}
    base: dict[str, Any] = {}
    runs: list[dict[str, Any]] = [{}]
    if file is not None:
        try:
            data = json.loads(Path(file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {file}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        runs = data.pop("experiments", None) or [{}]
        base = data
    configs = []
    for i, run in enumerate(runs):
        merged = {**_coerce(base), **_coerce(run), **_coerce(flags)}
        # a graph source given on the command line replaces the file's
        if "graph" in flags and "family" not in flags:
            merged.pop("family", None)
        if "family" in flags and "graph" not in flags:
            merged.pop("graph", None)
        if flags.get("paper_k"):
            merged.pop("tokens", None)
        if "tokens" in flags:
            merged.pop("paper_k", None)
        if len(runs) > 1:
            merged.setdefault("name", f"exp{i:03d}")
        configs.append(ExperimentConfig(**merged))
    return configs


def parse_config(args: Sequence[str], file: str | Path | None = None) -> ExperimentConfig:
    configs = parse_configs(args, file)
    if len(configs) != 1:
        raise ConfigError("configuration describes several experiments")
    return configs[0]


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _frac(x: Fraction | None) -> str | None:
    return None if x is None else f"{x.numerator}/{x.denominator}"


@dataclass
class ExperimentReport:
    data: dict[str, Any]
    estimate: MixingEstimate | None = field(default=None, repr=False)
    timings: dict[str, float] = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def write(self, out: str | Path) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n")
        if self.estimate is not None:
            self.estimate.write_probes_csv(out / "probes.csv")
            self.estimate.ledger.write_csv(out / "ledger.csv")


def _resolved_config(cfg: ExperimentConfig, wc: WalkConfig) -> dict[str, Any]:
    return {
        "graph": cfg.graph,
        "family": cfg.family,
        "source": cfg.source,
        "K": str(wc.K),
        "paper_k": cfg.tokens is None,
        "epsilon": _frac(wc.epsilon),
        "seed": wc.seed,
        "lazy": wc.lazy,
        "averaging_threshold_factor": wc.averaging_threshold_factor,
        "max_length": wc.max_length,
        "payload_bits": wc.payload_bits,
        "oracle": cfg.oracle,
        "spectral": cfg.spectral,
        "monotonicity_horizon": cfg.monotonicity_horizon,
    }


def _estimate_json(est: MixingEstimate) -> dict[str, Any]:
    return {
        "length": est.estimate,
        "bracket": list(est.bracket) if est.bracket else None,
        "total_rounds": est.total_rounds,
        "setup_rounds": est.setup_rounds,
        "tree_height": est.tree_height,
        "upcast_chunks": est.upcast_chunks,
        "probes": [
            {
                "index": p.index,
                "length": p.length,
                "deviation": _frac(p.deviation),
                "verdict": "pass" if p.passed else "fail",
                "rounds": p.rounds,
            }
            for p in est.probes
        ],
    }


def _congestion_json(est: MixingEstimate) -> dict[str, Any]:
    led = est.ledger
    walk_bits = led.max_bit_size("walk")
    return {
        "max_messages_per_edge_round": led.max_messages_per_edge(),
        "walk_max_messages_per_edge_round": led.max_messages_per_edge("walk"),
        "max_bit_size": led.max_bit_size(),
        "walk_max_payload_bits": walk_bits - TAG_BITS if walk_bits else 0,
        "payload_budget_bits": est.config.payload_bits,
        "messages": led.message_count(),
        "phase_rounds": led.phase_rounds(),
    }


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one experiment; raises on config/validation errors.

    A length-cap overrun is not raised: the returned report carries the
    partial probe log, an ``error`` entry and exit code 4.
    """
    timings: dict[str, float] = {}
    g = cfg.load_graph()
    if not 0 <= cfg.source < g.n:
        raise ConfigError(f"source {cfg.source} outside 0..{g.n - 1}")
    validate_for_walk(g, cfg.lazy)
    wc = cfg.walk_config(g).resolve(g)
    data: dict[str, Any] = {
        "config": _resolved_config(cfg, wc),
        "graph": {"n": g.n, "m": g.m, "diameter": diameter(g), "source": cfg.source},
        "estimate": None,
        "oracle": None,
        "spectral": None,
        "monotonicity": None,
        "congestion": None,
        "error": None,
    }
    report = ExperimentReport(data, timings=timings)

    t0 = time.perf_counter()
    try:
        est = estimate_mixing_time(g, cfg.source, wc)
    except MaxLengthExceeded as exc:
        est = exc.estimate
        data["error"] = {"type": "MaxLengthExceeded", "message": str(exc)}
        report.exit_code = EXIT_CAP
    timings["estimate_s"] = time.perf_counter() - t0
    report.estimate = est
    if est is not None:
        data["estimate"] = _estimate_json(est)
        data["congestion"] = _congestion_json(est)

    if cfg.oracle and est is not None and est.estimate is not None:
        t0 = time.perf_counter()
        exact = oracle.exact_mixing_time(g, cfg.source, wc.epsilon, wc.lazy, wc.max_length)
        agree = oracle_agreement(g, cfg.source, est.estimate, wc)
        data["oracle"] = {
            "exact_mixing_time": exact,
            "delta": _frac(agree.delta),
            "bracket": [agree.lower, agree.upper],
            "agreement": agree.ok,
        }
        timings["oracle_s"] = time.perf_counter() - t0
    if cfg.monotonicity_horizon:
        verdict = oracle.check_monotonicity(g, cfg.source, cfg.monotonicity_horizon, wc.lazy)
        data["monotonicity"] = {
            "horizon": cfg.monotonicity_horizon,
            "ok": verdict.ok,
            "first_violation": verdict.first_violation,
        }
    if cfg.spectral:
        t0 = time.perf_counter()
        spec = oracle.spectral_report(g, lazy=wc.lazy, source=cfg.source)
        sj = spec.to_json()
        sj["mixing_upper_bound"] = None if math.isinf(spec.mixing_upper_bound) else spec.mixing_upper_bound
        sj["error_bound"] = spec.error_bound
        data["spectral"] = sj
        timings["spectral_s"] = time.perf_counter() - t0
    return report


def _summary(cfg: ExperimentConfig, report: ExperimentReport) -> str:
    d = report.data
    lines = [f"graph {cfg.family or cfg.graph}: n={d['graph']['n']} m={d['graph']['m']} D={d['graph']['diameter']}"]
    if d["estimate"]:
        e = d["estimate"]
        lines.append(
            f"  estimate {e['length']} after {len(e['probes'])} probes, {e['total_rounds']} rounds"
        )
    if d["oracle"]:
        o = d["oracle"]
        verdict = "agree" if o["agreement"] else "DISAGREE"
        lines.append(f"  oracle {o['exact_mixing_time']} (bracket {o['bracket']}): {verdict}")
    if d["spectral"]:
        s = d["spectral"]
        lines.append(f"  lambda2={s['lambda2']:.6f} abs_gap={s['abs_gap']:.6f} sandwich_ok={s['sandwich_ok']}")
    if d["error"]:
        lines.append(f"  error: {d['error']['message']}")
    return "\n".join(lines)


def _error_object(exc: BaseException, code: int) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sort_keys=True)


def _run_one(cfg: ExperimentConfig) -> tuple[int, str, str | None]:
    """Run and write one experiment; returns (exit code, summary, error json)."""
    try:
        report = run_experiment(cfg)
    except ConfigError as exc:
        return EXIT_CONFIG, "", _error_object(exc, EXIT_CONFIG)
    except (GraphError, OSError) as exc:
        return EXIT_VALIDATION, "", _error_object(exc, EXIT_VALIDATION)
    if cfg.out is not None:
        out = Path(cfg.out)
        report.write(out / cfg.name if cfg.name else out)
    err = None
    if report.exit_code:
        err = json.dumps({**report.data["error"], "exit_code": report.exit_code}, sort_keys=True)
    return report.exit_code, _summary(cfg, report), err


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        configs = parse_configs(argv)
    except ConfigError as exc:
        print(_error_object(exc, EXIT_CONFIG), file=sys.stderr)
        return EXIT_CONFIG
    jobs = max(c.jobs for c in configs)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, configs))
    else:
        results = [_run_one(c) for c in configs]
    code = EXIT_OK
    for status, summary, err in results:
        if summary:
            print(summary)
        if err:
            print(err, file=sys.stderr)
        code = max(code, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
