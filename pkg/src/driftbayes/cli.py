"""Configuration-driven command line for the estimation pipeline.

Each subcommand reads a JSON config, runs one module pipeline, and writes
its artifacts plus a deterministic run manifest (config hash, seed,
versions, and a content hash for every output). Files are written
atomically via temp file and rename, so identical config + seed reruns are
byte-identical. Exit codes: 0 success, 1 config or validation failure,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from ._kernels import backend_name
from .divergence import divergence_report
from .drift import (
    DriftClassError,
    DriftEvaluationError,
    DriftSpec,
    default_half_width,
    validate_drift,
)
from .posterior import (
    L2Ball,
    WeakNeighborhood,
    compute_posterior,
    consistency_curve,
)
from .prior import (
    CapacityError,
    PriorNet,
    audit_covering,
    build_net,
    linear_family,
    sqrt_blend_family,
)
from .quadrature import QuadratureError
from .simulate import (
    ExplosionError,
    IngestError,
    ObservationSeries,
    SimScheme,
    ingest_csv,
    simulate_series,
)
from .transition import (
    TransitionModel,
    identifiability_probe,
    test_function,
    uniform_probe,
)

THREADS_ENV = "DRIFTBAYES_THREADS"

_NUMERICAL_ERRORS = (QuadratureError, ExplosionError, CapacityError,
                     DriftEvaluationError, DriftClassError)


class ConfigError(ValueError):
    """Malformed or incomplete config; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class ValidationFailure(Exception):
    """A referenced drift fails its class constraints.

    Carries whatever artifacts were produced so the caller can still write
    the diagnostic report before exiting with code 1.
    """

    def __init__(self, message: str, outputs: dict[str, str] | None = None):
        super().__init__(message)
        self.outputs = outputs or {}


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def _need(doc: dict, field: str, kind=None):
    if field not in doc:
        raise ConfigError(field, "missing")
    value = doc[field]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(field, f"expected {getattr(kind, '__name__', kind)}")
    return value


def _drift_from(doc: dict, field: str) -> DriftSpec:
    spec_doc = _need(doc, field, dict)
    try:
        return DriftSpec.from_json_dict(spec_doc)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(field, str(err)) from err


def _checked_drift(doc: dict, field: str) -> DriftSpec:
    """Parse a drift and audit its class constraints; failure exits 1."""
    spec = _drift_from(doc, field)
    report = validate_drift(spec, default_half_width(spec), grid_points=101)
    if not report.ok:
        raise ValidationFailure(
            f"drift '{field}' fails class constraints:\n{report.summary()}")
    return spec


def _model_from(doc: dict, seed: int) -> TransitionModel:
    spec = doc.get("model", {"method": "exact_ou"})
    if not isinstance(spec, dict):
        raise ConfigError("model", "expected an object")
    allowed = {"method", "n_paths", "substeps", "bandwidth", "seed",
               "quad_nodes"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"model.{sorted(unknown)[0]}", "unknown key")
    spec = dict(spec)
    spec.setdefault("seed", seed)
    try:
        return TransitionModel(**spec)
    except (TypeError, ValueError) as err:
        raise ConfigError("model", str(err)) from err


def _family_from(doc: dict):
    spec = _need(doc, "family", dict)
    kind = _need(spec, "kind", str)
    try:
        if kind == "linear":
            return linear_family(_need(spec, "beta_min", (int, float)),
                                 _need(spec, "beta_max", (int, float)),
                                 dim=int(spec.get("dim", 1)))
        if kind == "sqrt-blend":
            return sqrt_blend_family(_need(spec, "c_lo", (int, float)),
                                     _need(spec, "c_hi", (int, float)),
                                     _need(spec, "g_lo", (int, float)),
                                     _need(spec, "g_hi", (int, float)),
                                     dim=int(spec.get("dim", 2)))
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError("family", str(err)) from err
    raise ConfigError("family.kind", f"unknown family '{kind}'")


def _net_from(doc: dict, seed: int) -> PriorNet:
    if "net_path" in doc:
        try:
            with open(doc["net_path"]) as fh:
                return PriorNet.from_json_dict(json.load(fh))
        except (OSError, KeyError, TypeError, ValueError) as err:
            raise ConfigError("net_path", str(err)) from err
    family = _family_from(doc)
    return build_net(family,
                     m_max=int(_need(doc, "m_max", int)),
                     l_max=int(_need(doc, "l_max", int)),
                     eps_schedule=_need(doc, "eps_schedule", list),
                     q1=doc.get("q1"), q2=doc.get("q2"),
                     seed=int(doc.get("net_seed", seed)))


def _scheme_from(doc: dict) -> SimScheme:
    spec = doc.get("scheme", {})
    try:
        return SimScheme(method=spec.get("method", "auto"),
                         substeps=int(spec.get("substeps", 64)))
    except (TypeError, ValueError) as err:
        raise ConfigError("scheme", str(err)) from err


def _test_function(name, params: dict):
    try:
        return test_function(name, **params)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError("criterion.fn", str(err)) from err


def _criterion_from(doc: dict, model: TransitionModel, delta: float):
    spec = _need(doc, "criterion", dict)
    kind = _need(spec, "type", str)
    if kind == "l2ball":
        radius = float(_need(spec, "radius", (int, float)))
        if radius <= 0:
            raise ConfigError("criterion.radius", "must be positive")
        return L2Ball(radius=radius)
    if kind == "weak":
        fn = _test_function(spec.get("fn", "cos"), spec.get("fn_params", {}))
        probe = uniform_probe(fn,
                              half_width=float(spec.get("half_width", 4.0)),
                              n_nodes=int(spec.get("n_nodes", 41)),
                              epsilon=float(_need(spec, "epsilon",
                                                  (int, float))),
                              dim=int(spec.get("dim", 1)))
        return WeakNeighborhood(probe=probe, model=model, delta=delta)
    raise ConfigError("criterion.type", f"unknown criterion '{kind}'")


def _series_from(doc: dict, seed: int, delta: float,
                 scheme: SimScheme) -> ObservationSeries:
    spec = _need(doc, "series", dict)
    if "path" in spec:
        series, _ = ingest_csv(spec["path"], delta)
        return series
    drift = _checked_drift(spec, "drift")
    return simulate_series(drift, delta, int(_need(spec, "n", int)),
                           seed=int(spec.get("seed", seed)), scheme=scheme)


# ---------------------------------------------------------------------------
# artifact plumbing
# ---------------------------------------------------------------------------

def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _series_text(series: ObservationSeries) -> str:
    buf = io.StringIO()
    series.to_csv(buf)
    return buf.getvalue()


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _emit(outdir: str, command: str, config_text: str, seed: int,
          threads: int, outputs: dict[str, str]) -> None:
    os.makedirs(outdir, exist_ok=True)
    hashes = {}
    for name, text in outputs.items():
        path = os.path.join(outdir, name)
        _write_atomic(path, text)
        hashes[name] = _sha256(text)
        print(f"wrote {path}")
    manifest = {
        "command": command,
        "config_sha256": _sha256(config_text),
        "seed": seed,
        "threads": threads,
        "versions": {
            "driftbayes": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": backend_name,
        },
        "outputs": hashes,
    }
    path = os.path.join(outdir, "run_manifest.json")
    _write_atomic(path, _json_text(manifest))
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# subcommand handlers: each returns {filename: text}
# ---------------------------------------------------------------------------

def _cmd_validate(config: dict, seed: int, threads: int) -> dict[str, str]:
    drift = _drift_from(config, "drift")
    half_width = float(config.get("half_width")
                       or default_half_width(drift))
    report = validate_drift(drift, half_width,
                            grid_points=int(config.get("grid_points", 101)))
    doc = {
        "ok": report.ok,
        "half_width": half_width,
        "violations": [
            {"constraint": v.constraint, "point": list(v.point),
             "measured": v.measured, "bound": v.bound}
            for v in report.violations],
    }
    outputs = {"validation.json": _json_text(doc)}
    if not report.ok:
        raise ValidationFailure(report.summary(), outputs)
    return outputs


def _cmd_simulate(config: dict, seed: int, threads: int) -> dict[str, str]:
    drift = _checked_drift(config, "drift")
    series = simulate_series(drift,
                             float(_need(config, "delta", (int, float))),
                             int(_need(config, "n", int)),
                             seed=seed, scheme=_scheme_from(config))
    return {"series.csv": _series_text(series)}


def _cmd_ingest(config: dict, seed: int, threads: int) -> dict[str, str]:
    path = _need(config, "path", str)
    delta = float(_need(config, "delta", (int, float)))
    series, report = ingest_csv(path, delta)
    doc = {
        "n_accepted": report.n_accepted,
        "delta": report.delta,
        "rejected": [{"line": line, "reason": reason}
                     for line, reason in report.rejected],
        "origin": series.meta.get("origin", "ingested"),
    }
    return {"ingest_report.json": _json_text(doc),
            "series.csv": _series_text(series)}


def _cmd_net(config: dict, seed: int, threads: int) -> dict[str, str]:
    family = _family_from(config)
    net = _net_from(config, seed)
    audit_seed = int(np.random.SeedSequence(seed + 1).generate_state(1)[0])
    audit = audit_covering(net, family, seed=audit_seed)
    doc = {
        "n_atoms": net.n_atoms,
        "cells": {f"{m},{l}": worst
                  for (m, l), worst in sorted(audit.items())},
        "audit_seed": audit_seed,
        "truncated_mass": net.truncated_mass,
    }
    return {"net.json": _json_text(net.to_json_dict()),
            "net_audit.json": _json_text(doc)}


def _cmd_posterior(config: dict, seed: int, threads: int) -> dict[str, str]:
    delta = float(_need(config, "delta", (int, float)))
    net = _net_from(config, seed)
    series = _series_from(config, seed, delta, _scheme_from(config))
    model = _model_from(config, seed)
    reference = config.get("reference", "self-normalizing")
    if isinstance(reference, dict):
        reference = _drift_from(config, "reference")
    elif reference != "self-normalizing":
        raise ConfigError("reference",
                          "expected 'self-normalizing' or a drift object")
    post = compute_posterior(net, series, model, b0_for_ratio=reference)
    return {"posterior.csv": post.to_csv(),
            "posterior.json": _json_text(post.to_json_dict())}


def _cmd_consistency(config: dict, seed: int, threads: int) -> dict[str, str]:
    delta = float(_need(config, "delta", (int, float)))
    true_drift = _checked_drift(config, "true_drift")
    net = _net_from(config, seed)
    model = _model_from(config, seed)
    criterion = _criterion_from(config, model, delta)
    curve = consistency_curve(
        net, true_drift, _need(config, "n_schedule", list), delta, criterion,
        model=model,
        replications=int(config.get("replications", 20)),
        seed=seed, scheme=_scheme_from(config))
    doc = {"ns": [int(n) for n in curve.ns],
           "means": [float(v) for v in curve.means],
           "stderrs": [float(v) for v in curve.stderrs]}
    return {"curve.csv": curve.to_csv(),
            "curve.json": _json_text(doc),
            "net.json": _json_text(net.to_json_dict())}


def _cmd_divergence(config: dict, seed: int, threads: int) -> dict[str, str]:
    delta = float(_need(config, "delta", (int, float)))
    pairs = _need(config, "pairs", list)
    if not pairs:
        raise ConfigError("pairs", "must be a non-empty list")
    with_mc = bool(config.get("with_path_mc", False))
    children = np.random.SeedSequence(seed).spawn(len(pairs))

    def one(item):
        idx, pair = item
        if not isinstance(pair, dict):
            raise ConfigError(f"pairs[{idx}]", "expected an object")
        b = _drift_from(pair, "b")
        b0 = _drift_from(pair, "b0")
        child_seed = int(children[idx].generate_state(1)[0])
        return divergence_report(b, b0, delta, with_path_mc=with_mc,
                                 seed=child_seed)

    # per-pair seeds are fixed by index, so the thread count changes wall
    # time only, never the results
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, enumerate(pairs)))
    else:
        reports = [one(item) for item in enumerate(pairs)]
    return {"divergence.json":
            _json_text([r.to_json_dict() for r in reports])}


def _cmd_identifiability(config: dict, seed: int, threads: int
                         ) -> dict[str, str]:
    delta = float(_need(config, "delta", (int, float)))
    a = _checked_drift(config, "a")
    b = _checked_drift(config, "b")
    model = _model_from(config, seed)
    names = config.get("test_functions",
                       ["cos", "sin", "tanh", "gauss-bump"])
    fns = [_test_function(n, {}) for n in names]
    half_width = float(config.get("half_width", 3.0))
    n_nodes = int(config.get("n_nodes", 13))
    grid = (np.linspace(-half_width, half_width, n_nodes).reshape(-1, 1)
            * np.ones(a.dim))
    report = identifiability_probe(a, b, model, delta, fns, grid)
    doc = {
        "max_gap": report.max_gap,
        "stderr": report.stderr,
        "argmax_function": report.argmax_function,
        "argmax_point": list(report.argmax_point),
        "separated": report.separated,
    }
    return {"identifiability.json": _json_text(doc)}


_HANDLERS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "net": _cmd_net,
    "posterior": _cmd_posterior,
    "consistency": _cmd_consistency,
    "divergence": _cmd_divergence,
    "identifiability": _cmd_identifiability,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftbayes",
        description="Drift estimation pipeline for discretely observed "
                    "ergodic diffusions.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for batch items "
                            f"(default: ${THREADS_ENV} or 1)")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def _resolve_threads(cli_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as err:
            raise ConfigError(THREADS_ENV, f"not an integer: {env!r}") \
                from err
    return 1


def run_command(argv=None) -> int:
    """Parse argv, run one subcommand, write artifacts; returns exit code."""
    args = _build_parser().parse_args(argv)
    outdir = "."
    config_text = ""
    seed = 0
    threads = 1
    try:
        try:
            with open(args.config) as fh:
                config_text = fh.read()
        except OSError as err:
            raise ConfigError("--config", str(err)) from err
        try:
            config = json.loads(config_text)
        except json.JSONDecodeError as err:
            raise ConfigError(
                "--config",
                f"invalid JSON at line {err.lineno} column {err.colno}: "
                f"{err.msg}") from err
        if not isinstance(config, dict):
            raise ConfigError("--config", "top level must be an object")
        if args.seed is not None:
            seed = int(args.seed)
        elif "seed" in config:
            seed = int(config["seed"])
        else:
            raise ConfigError("seed", "missing (no wall-clock seeding; pass "
                                      "--seed or put 'seed' in the config)")
        threads = _resolve_threads(args.threads)
        outdir = args.out or config.get("out") or "."
        outputs = _HANDLERS[args.command](config, seed, threads)
        _emit(outdir, args.command, config_text, seed, threads, outputs)
        return 0
    except ValidationFailure as err:
        if err.outputs:
            _emit(outdir, args.command, config_text, seed, threads,
                  err.outputs)
        print(f"validation failed: {err}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except (ConfigError, IngestError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
