"""Command-line entry point: ``python -m lfpp <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import fpp, gff, kernels, multiscale, totalvar
from .errors import GeometryError, NumericalError, ResourceError
from .geometry import RectRegion, ScaleParams

log = logging.getLogger("lfpp")

EXIT_USAGE, EXIT_RESOURCE, EXIT_NUMERICAL = 2, 3, 4


def fmt(v) -> str:
    return f"{v:.12g}"


def _round(obj):
    """Round floats to 12 significant digits; non-finite values become null."""
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse_point(text: str) -> tuple[int, int]:
    try:
        x, y = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y but got {text!r}")
    return x, y


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_penalty(text: str) -> totalvar.StepPenalty:
    """``levels=a,b;breaks=0,t1,T`` (breaks default to an even split of [0, 1])."""
    fields = {}
    for part in str(text).split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"malformed penalty field {part!r}")
        k, v = part.split("=", 1)
        fields[k.strip()] = [float(t) for t in v.split(",") if t.strip()]
    if set(fields) - {"levels", "breaks"} or "levels" not in fields:
        raise ValueError("penalty spec needs 'levels=' and optionally 'breaks='")
    levels = fields["levels"]
    breaks = fields.get("breaks") or [i / len(levels) for i in range(len(levels) + 1)]
    return totalvar.StepPenalty(tuple(breaks), tuple(levels))


def parse_params(text: str) -> dict:
    out = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ValueError(f"malformed parameter {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = float(v)
    return out


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    cfg = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {line!r}")
        k, v = line.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


# command defaults; CLI flags override config values, which override these
DEFAULTS = {
    "seed": 0, "threads": 1, "out_dir": None, "format": "csv",
    "M": None, "N": None, "v": None, "x": 1, "y": 0, "mode": None,
    "gamma": 0.0, "sizes": "32,64,128,256", "replicas": 16,
    "penalty": None, "paths": 1000,
    "levels": 2, "params": "", "strategy": "II",
    "replicate": 0,
}


def _emit(args, name: str, text: str) -> None:
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_kernels(args) -> int:
    if args.M is None or args.N is None:
        if args.sub != "potential":
            raise ValueError("--M and --N are required")
    if args.sub == "poisson":
        if args.v is None:
            raise ValueError("--v x,y is required")
        k = kernels.RectKernel(int(args.M), int(args.N))
        pts, probs = kernels.poisson_row(k, parse_point(args.v) if isinstance(args.v, str) else args.v)
        lines = ["x,y,probability"] + [f"{x},{y},{fmt(p)}" for (x, y), p in zip(pts, probs)]
        _emit(args, "poisson.csv", "\n".join(lines) + "\n")
    elif args.sub == "green":
        table = kernels.greens_via_solve(RectRegion.box(int(args.M), int(args.N)))
        k = table.kernel
        pts = k.interior_points()
        lines = ["x1,y1,x2,y2,value"]
        for i, (a, b) in enumerate(pts):
            for j, (c, d) in enumerate(pts):
                lines.append(f"{a},{b},{c},{d},{fmt(table.values[i, j])}")
        _emit(args, "green.csv", "\n".join(lines) + "\n")
    else:
        mode = args.mode or "approx"
        val = kernels.potential_kernel((int(args.x), int(args.y)), mode)
        _emit(args, "potential.csv", f"x,y,mode,value\n{args.x},{args.y},{mode},{fmt(val)}\n")
    return 0


def cmd_gff(args) -> int:
    if args.M is None or args.N is None:
        raise ValueError("--M and --N are required")
    cov = gff.CovModel.box(int(args.M), int(args.N))
    vals = gff.sample_values(cov, int(args.seed), [int(args.replicate)], args.mode or "spectral")[0]
    s = gff.FieldSample(cov.region, vals, int(args.seed), int(args.replicate))
    lines = [f"# region={args.M}x{args.N} seed={args.seed} replicate={args.replicate}", "x,y,value"]
    for i in range(int(args.M) + 1):
        for j in range(int(args.N) + 1):
            lines.append(f"{i},{j},{fmt(s.values[i, j])}")
    _emit(args, "field.csv", "\n".join(lines) + "\n")
    return 0


def cmd_fpp_scan(args) -> int:
    sizes = parse_int_list(args.sizes)
    log.info("scan gamma=%s sizes=%s replicas=%s", args.gamma, sizes, args.replicas)
    fit = fpp.exponent_scan(float(args.gamma), sizes, int(args.replicas), int(args.seed),
                            mode=args.mode or "point2point", threads=int(args.threads))
    log.info("slope %.6f stderr %.6f", fit.slope, fit.stderr)
    if args.out_dir:
        _emit(args, "scan.csv", fit.to_csv())
        _emit(args, "fit.json", dump_json(fit.summary()))
    elif args.format == "json":
        sys.stdout.write(dump_json(fit.summary()))
    else:
        sys.stdout.write(fit.to_csv())
    return 0


def cmd_tv(args) -> int:
    if args.penalty is None:
        raise ValueError("--penalty is required")
    pen = parse_penalty(args.penalty)
    rep = totalvar.strategy_experiment(pen, int(args.paths), int(args.seed))
    _emit(args, "tv.json", dump_json(rep))
    return 0


def cmd_multiscale(args) -> int:
    extra = parse_params(args.params)
    m = int(extra.pop("m", 2))
    m_gamma = int(extra.pop("m_Gamma", 2))
    N = int(extra.pop("N", 16))
    aspect = extra.pop("aspect", None)
    beta = extra.pop("beta", 4.0)
    alpha = extra.pop("alpha", None)
    if extra:
        raise ValueError(f"unknown multiscale parameters: {sorted(extra)}")
    params = ScaleParams.from_m(m, m_Gamma=m_gamma, gamma_fpp=float(args.gamma), alpha=alpha, beta=beta)
    stats, rows = multiscale.recursive_run(
        params, int(args.levels), float(args.gamma), int(args.replicas), int(args.seed), N=N,
        aspect=None if aspect is None else int(aspect), beta=beta, strategy=args.strategy,
        threads=int(args.threads))
    summary = {"delta": params.delta, "alpha": params.alpha, "gamma": float(args.gamma),
               "levels": [s.__dict__ for s in stats]}
    if args.out_dir:
        _emit(args, "levels.csv", multiscale.rows_to_csv(rows))
        _emit(args, "summary.json", dump_json(summary))
    elif args.format == "json":
        sys.stdout.write(dump_json(summary))
    else:
        sys.stdout.write(multiscale.rows_to_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfpp", description="Liouville FPP numerical laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--config", help="key=value file; flags override it")

    k = sub.add_parser("kernels", help="dump random-walk kernels")
    k.add_argument("sub", choices=("poisson", "green", "potential"))
    k.add_argument("--M", type=int)
    k.add_argument("--N", type=int)
    k.add_argument("--v", type=parse_point)
    k.add_argument("--x", type=int)
    k.add_argument("--y", type=int)
    k.add_argument("--mode", choices=("approx", "exact"))
    common(k)
    k.set_defaults(func=cmd_kernels)

    g = sub.add_parser("gff", help="sample one field and write it as CSV")
    g.add_argument("--M", type=int)
    g.add_argument("--N", type=int)
    g.add_argument("--replicate", type=int)
    g.add_argument("--mode", choices=gff.METHODS)
    common(g)
    g.set_defaults(func=cmd_gff)

    f = sub.add_parser("fpp-scan", help="distance exponent scan")
    f.add_argument("--gamma", type=float)
    f.add_argument("--sizes")
    f.add_argument("--replicas", type=int)
    f.add_argument("--mode", choices=("point2point", "crossing"))
    common(f)
    f.set_defaults(func=cmd_fpp_scan)

    t = sub.add_parser("tv", help="penalised total-variation experiment")
    t.add_argument("--penalty")
    t.add_argument("--paths", type=int)
    common(t)
    t.set_defaults(func=cmd_tv)

    m = sub.add_parser("multiscale", help="multi-level crossing construction")
    m.add_argument("--levels", type=int)
    m.add_argument("--gamma", type=float)
    m.add_argument("--replicas", type=int)
    m.add_argument("--params", help="comma list such as m=2,m_Gamma=2,N=16,aspect=5,beta=4")
    m.add_argument("--strategy", choices=("I", "II"))
    common(m)
    m.set_defaults(func=cmd_multiscale)
    return p


def _merge(args) -> None:
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for key, default in DEFAULTS.items():
        if not hasattr(args, key) and key not in cfg:
            continue
        if getattr(args, key, None) is None:
            setattr(args, key, cfg.get(key, default))
    env = os.environ.get("LFPP_THREADS")
    if env:
        args.threads = int(env)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge(args)
        return args.func(args)
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, GeometryError, argparse.ArgumentTypeError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
