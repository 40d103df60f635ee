"""Command-line front end: transform, verify, extract and analyze.

Exit codes: 0 success, 1 verification failed, 2 bad input (parse or I/O),
3 infeasible parameters, 4 unsupported network or dimension.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from netmorph.errors import (
    InfeasibleParametersError,
    InputError,
    NetmorphError,
    NetworkParseError,
    UnsupportedNetworkError,
)
from netmorph.netcore import deserialize, serialize

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_UNSUPPORTED = 4

log = logging.getLogger("netmorph")


@dataclass(frozen=True)
class RunConfig:
    command: str
    inputs: tuple = ()
    out: str | None = None
    report: str | None = None
    mode: str = "wide"
    task: str = "regression"
    delta: float = 0.02
    mu: float | None = None
    B: float = 1.0
    samples: int = 1_000_000
    seed: int = 0
    tol: float = 1e-6


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    return deserialize(text)


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def _emit(doc, path):
    """Write a report document to ``path`` (or stdout) deterministically."""
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path:
        _write_text(path, text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ---------------------------------------------------------------- commands


def cmd_transform(cfg):
    from netmorph.classify import classify_transform
    from netmorph.regress import transform

    if len(cfg.inputs) != 1:
        raise InputError("transform takes exactly one --in network")
    net = _load(cfg.inputs[0])
    if cfg.task == "classification":
        result = classify_transform(net, cfg.mode, cfg.delta, cfg.B, mu=cfg.mu, seed=cfg.seed)
        report = result.report
        report["rules"] = result.rules.to_document()
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            result = transform(net, cfg.mode, cfg.delta, cfg.B, mu=cfg.mu, seed=cfg.seed)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        report = result.report
        report["task"] = "regression"
    if cfg.out:
        _write_text(cfg.out, serialize(result.network))
    _emit(_jsonable(report), cfg.report)
    return EXIT_OK


def cmd_verify(cfg, rounding_aware=False, exact=False):
    from netmorph.verify import exact_compare_1d, mismatch_measure

    if len(cfg.inputs) != 2:
        raise InputError("verify takes exactly two --in networks")
    a, b = (_load(p) for p in cfg.inputs)
    if a.input_dim != b.input_dim:
        raise InputError("networks differ in input dimension")
    if exact:
        err = exact_compare_1d(a, b, cfg.B)
        passed = err <= cfg.tol
        doc = {"max_abs_error": err, "tol": cfg.tol, "B": cfg.B, "passed": passed}
    else:
        rep = mismatch_measure(
            a, b, cfg.B, samples=cfg.samples, seed=cfg.seed, tol=cfg.tol,
            labels=cfg.task == "classification", rounding_aware=rounding_aware,
        )
        passed = rep.absolute_measure < cfg.delta
        doc = rep.to_document()
        doc.update(delta=cfg.delta, rounding_aware=rounding_aware, passed=passed)
    _emit(_jsonable(doc), cfg.report)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_extract(cfg):
    from netmorph.geometry import cover_from_network_2d
    from netmorph.pwl1d import extract_pwl

    if len(cfg.inputs) != 1:
        raise InputError("extract takes exactly one --in network")
    net = _load(cfg.inputs[0])
    if net.input_dim == 1:
        doc = extract_pwl(net, cfg.B).to_document()
    elif net.input_dim == 2:
        doc = cover_from_network_2d(net, cfg.B, seed=cfg.seed).to_document()
    else:
        raise UnsupportedNetworkError("extract handles D <= 2")
    _emit(_jsonable(doc), cfg.out or cfg.report)
    return EXIT_OK


def _parse_range(text):
    """``"40"`` or ``"4:100"`` (inclusive) or ``"4:100:2"``."""
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise InputError(f"bad range {text!r}") from None
    if len(parts) == 1:
        parts = [parts[0], parts[0]]
    if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] <= 0):
        raise InputError(f"bad range {text!r}")
    lo, hi = parts[:2]
    step = parts[2] if len(parts) == 3 else 1
    if lo <= 0 or hi < lo:
        raise InputError("N_sigma range must be positive and increasing")
    return range(lo, hi + 1, step)


def analyze_rows(n_sigma_values, L, n, alpha):
    from netmorph.verify import width_depth_estimate

    return [(ns, *width_depth_estimate(ns, L, n, alpha)) for ns in n_sigma_values]


def cmd_analyze(args):
    rows = analyze_rows(_parse_range(args.n_sigma), args.L, args.n, args.alpha)
    lines = ["n_sigma,width,depth"]
    lines += [f"{ns},{w:.10g},{d:.10g}" for ns, w, d in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return conv


def build_parser():
    p = argparse.ArgumentParser(prog="netmorph", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_in):
        sp.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="PATH", help=f"network JSON ({n_in})")
        sp.add_argument("--B", type=_positive(float), default=1.0,
                        help="half side of the domain [-B, B]^D")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--report", help="report path (default stdout)")

    t = sub.add_parser("transform", help="wide or deep quasi-equivalent network")
    common(t, "once")
    t.add_argument("--out", help="output network path")
    t.add_argument("--mode", choices=("wide", "deep"), default="wide")
    t.add_argument("--task", choices=("regression", "classification"), default="regression")
    t.add_argument("--delta", type=_positive(float), default=0.02)
    t.add_argument("--mu", type=_positive(float), help="override the automatic parameters")

    v = sub.add_parser("verify", help="measure where two networks disagree")
    common(v, "twice")
    v.add_argument("--task", choices=("regression", "classification"), default="regression")
    v.add_argument("--delta", type=_positive(float), default=0.02)
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--rounding-aware", action="store_true",
                   help="widen tol by each network's float64 rounding-error bound")
    v.add_argument("--exact", action="store_true",
                   help="univariate grid + breakpoint comparison instead of sampling")

    e = sub.add_parser("extract", help="linear pieces of a 1D or 2D network")
    common(e, "once")
    e.add_argument("--out", help="output document path")

    a = sub.add_parser("analyze", help="width/depth estimate as CSV")
    a.add_argument("--n-sigma", default="4:100", help="N_sigma value or lo:hi[:step]")
    a.add_argument("--L", type=_positive(float), default=4.0)
    a.add_argument("--n", type=_positive(float), default=5.0)
    a.add_argument("--alpha", type=_positive(float), default=1.0)
    a.add_argument("--out", help="CSV path (default stdout)")
    return p


def _config(args):
    return RunConfig(
        command=args.command,
        inputs=tuple(args.inputs),
        out=getattr(args, "out", None),
        report=args.report,
        mode=getattr(args, "mode", "wide"),
        task=getattr(args, "task", "regression"),
        delta=getattr(args, "delta", 0.02),
        mu=getattr(args, "mu", None),
        B=args.B,
        samples=getattr(args, "samples", 1_000_000),
        seed=args.seed,
        tol=getattr(args, "tol", 1e-6),
    )


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "analyze":
            return cmd_analyze(args)
        cfg = _config(args)
        log.info("config %s", asdict(cfg))
        if cfg.command == "transform":
            return cmd_transform(cfg)
        if cfg.command == "verify":
            if cfg.samples < 1:
                raise InputError("samples must be positive")
            return cmd_verify(cfg, args.rounding_aware, args.exact)
        return cmd_extract(cfg)
    except NetworkParseError as exc:
        print(f"error: parse error at {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleParametersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UnsupportedNetworkError as exc:
        print(f"error: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except NetmorphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
