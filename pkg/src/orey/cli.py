"""Command line entry point: ``orey <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 numerical or verification
failure. Every file written is accompanied by ``<file>.manifest.json``
recording the exact invocation and output digests; ``orey replay`` reruns a
manifest and checks the digests.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import sigma_matrix
from .conditions import ALL_CHECKS, n_grid_up_to, verify
from .errors import (
    DegenerateInputError,
    DomainError,
    MissingMetadataError,
    OreyError,
    PathFormatError,
    SimulationError,
    TruncationError,
)
from .estimator import gamma_hat
from .kernels import parse_model
from .montecarlo import McConfig, Statistic, run
from .pathgen import PathGenerator, export_path, import_path, simulate
from .quadvar import NormalizationMode, aggregates, coefficients

log = logging.getLogger("orey")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_schema(name):
    """Schema shipped with the package for the ``name`` report (sigma, estimate, ...)."""
    text = resources.files("orey").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("OREY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"OREY_THREADS must be an integer, got {env!r}")
    return 1


def _emit(args, payload, written):
    """Write JSON to ``--out`` (recording it) or stdout."""
    text = dumps(payload)
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
        written.append(args.out)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands; each returns an exit code and appends written files
# ---------------------------------------------------------------------------

def cmd_simulate(args, written):
    model = parse_model(args.model, args.horizon)
    gen = PathGenerator(args.generator) if args.generator else None
    path = simulate(model, args.n, args.seed, gen)
    export_path(path, args.out)
    written.append(args.out)
    return EXIT_OK


def cmd_estimate(args, written):
    path = import_path(args.inp)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = gamma_hat(path, ci=args.ci)
    for w in caught:
        log.warning("%s", w.message)
    _emit(args, res.to_dict(), written)
    return EXIT_OK


def cmd_coeffs(args, written):
    model = parse_model(args.model, args.horizon)
    mode = NormalizationMode.parse(args.mode)
    agg = aggregates(model, args.n, mode)
    out = {
        "model": model.spec(),
        "n": args.n,
        "mode": mode.value,
        "row_sum_max_n": agg.row_sum_max_n,
        "row_sum_max_2n": agg.row_sum_max_2n,
        "expected_v_n": agg.expected_v_n,
        "expected_v_2n": agg.expected_v_2n,
        "isserlis_var_n": agg.var_v_n,
        "isserlis_var_2n": agg.var_v_2n,
        "isserlis_cov": agg.cov_v,
        "scaled_cov": agg.scaled_cov_matrix(),
    }
    if args.full:
        cs = coefficients(model, args.n, mode)
        out["matrices"] = {"d_n": cs.d_n, "d_2n": cs.d_2n, "c": cs.c}
    _emit(args, out, written)
    return EXIT_OK


def cmd_sigma(args, written):
    res = sigma_matrix(args.gamma, args.tol)
    out = {
        "gamma": res.gamma,
        "Sigma11": res.Sigma11,
        "Sigma12": res.Sigma12,
        "Sigma22": res.Sigma22,
        "sigma_sq": res.sigma_gamma_sq,
        "J": res.truncation_J,
        "tail_bound": res.tail_bound,
    }
    _emit(args, out, written)
    return EXIT_OK


def cmd_verify(args, written):
    model = parse_model(args.model, args.horizon)
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = set(checks) - set(ALL_CHECKS)
    if bad:
        raise UsageError(f"unknown checks {sorted(bad)}; choose from {','.join(ALL_CHECKS)}")
    grid = n_grid_up_to(args.nmax, args.nmin)
    if not grid:
        raise UsageError("empty n grid; need nmin <= nmax")
    rep = verify(model, checks, grid, args.mode)
    _emit(args, rep.to_dict(), written)
    return EXIT_NUMERIC if rep.any_fail else EXIT_OK


def cmd_mc(args, written):
    model = parse_model(args.model, args.horizon)
    stat = {"gamma_hat": Statistic.GAMMA_HAT, "bivariate": Statistic.BIVARIATE_V, "bivariate_v": Statistic.BIVARIATE_V}[
        args.stat
    ]
    cfg = McConfig(
        model=model,
        n=args.n,
        M=args.reps,
        seed=args.seed,
        statistic=stat,
        threads=_threads(args),
        generator=PathGenerator(args.generator) if args.generator else None,
        keep_samples=bool(args.samples),
    )
    rep = run(cfg)
    _emit(args, rep.to_dict(), written)
    if args.samples:
        rep.write_samples(args.samples)
        written.append(args.samples)
    return EXIT_NUMERIC if any(v.value == "FAIL" for v in rep.verdicts.values()) else EXIT_OK


def cmd_replay(args, written):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = manifest["argv"]
    code = main(argv, write_manifest=False)
    if code != manifest.get("exit_code", EXIT_OK):
        log.error("replay exit code %s differs from recorded %s", code, manifest.get("exit_code"))
        return EXIT_NUMERIC
    mismatched = [p for p, digest in manifest["outputs"].items() if not Path(p).exists() or sha256(p) != digest]
    if mismatched:
        log.error("replay digests differ for %s", ", ".join(mismatched))
        return EXIT_NUMERIC
    sys.stderr.write(f"replay reproduced {len(manifest['outputs'])} output(s)\n")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="orey", description="Orey index inference via second-order quadratic variations")
    p.add_argument("--version", action="version", version=f"orey {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help='e.g. "fbm:gamma=0.7", "sfbm:H=0.7", "bifbm:H=0.6,K=0.5"')
            sp.add_argument("--horizon", type=float, default=1.0)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env OREY_THREADS)")

    generators = [g.value for g in PathGenerator if g is not PathGenerator.IMPORTED]

    sp = sub.add_parser("simulate", help="simulate one path to CSV")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--generator", choices=generators)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate the Orey index of a CSV path")
    common(sp, model=False)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--ci", type=float, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("coeffs", help="exact second-difference coefficient aggregates")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--mode", choices=["exact", "orey"], default="orey")
    sp.add_argument("--full", action="store_true", help="include the full d and c matrices")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("sigma", help="asymptotic covariance Sigma_gamma")
    common(sp, model=False)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sigma)

    sp = sub.add_parser("verify", help="check the CLT hypotheses for a model")
    common(sp)
    sp.add_argument("--checks", default=",".join(ALL_CHECKS))
    sp.add_argument("--nmax", type=int, default=1024)
    sp.add_argument("--nmin", type=int, default=32)
    sp.add_argument("--mode", choices=["exact", "orey"], default="orey")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("mc", help="Monte Carlo validation of the CLTs")
    common(sp)
    sp.add_argument("--n", type=int, default=1024)
    sp.add_argument("--reps", type=int, default=500)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--stat", choices=["gamma_hat", "bivariate", "bivariate_v"], default="bivariate")
    sp.add_argument("--generator", choices=generators)
    sp.add_argument("--out")
    sp.add_argument("--samples")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("replay", help="rerun a manifest and compare output digests")
    sp.add_argument("manifest")
    sp.set_defaults(func=cmd_replay)
    return p


def _write_manifest(argv, args, written, code):
    manifest = {
        "tool": "orey",
        "version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "flags": {k: v for k, v in vars(args).items() if k not in ("func",)},
        "model": getattr(args, "model", None),
        "seed": getattr(args, "seed", None),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "exit_code": code,
        "outputs": {p: sha256(p) for p in written},
    }
    for p in written:
        Path(f"{p}.manifest.json").write_text(dumps(manifest))


def main(argv=None, write_manifest=True):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
    except UsageError as exc:
        sys.stderr.write(f"orey: usage error: {exc}\n")
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="orey: %(message)s")
    written = []
    try:
        code = args.func(args, written)
    except UsageError as exc:
        sys.stderr.write(f"orey: usage error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, MissingMetadataError) as exc:
        sys.stderr.write(f"orey: invalid model or argument: {exc}\n")
        return EXIT_USAGE
    except PathFormatError as exc:
        sys.stderr.write(f"orey: malformed path CSV: {exc}\n")
        return EXIT_USAGE
    except FileNotFoundError as exc:
        sys.stderr.write(f"orey: file not found: {exc.filename}\n")
        return EXIT_USAGE
    except DegenerateInputError as exc:
        sys.stderr.write(f"orey: degenerate input: {exc}\n")
        return EXIT_NUMERIC
    except TruncationError as exc:
        sys.stderr.write(f"orey: tolerance unreachable: {exc}\n")
        return EXIT_NUMERIC
    except SimulationError as exc:
        sys.stderr.write(f"orey: simulation failed: {exc}\n")
        return EXIT_NUMERIC
    except OreyError as exc:
        sys.stderr.write(f"orey: {exc}\n")
        return EXIT_NUMERIC
    if write_manifest and written and args.command != "replay":
        _write_manifest(argv, args, written, code)
    return code


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
