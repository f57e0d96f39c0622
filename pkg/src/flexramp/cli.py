"""Command-line front end.

Examples::

    flexramp dispatch --model threebus --fu 0 --fd 0
    flexramp surface --model threebus --out surface.json
    flexramp contour --model threebus --levels 30 --out contours/
    flexramp risk --model garver6 --samples errors.csv --p 0.95
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

from . import __version__
from . import grid
from .config import DEFAULT, ENV_VAR, parse_overrides
from .grid import ModelError, NegativeParameterError
from .lp import OPTIMAL
from .parametric import BaseInfeasibleError
from .risk import (
    NoFeasiblePairError, EmptyBandError, EmptyDistributionError, ingest_samples,
    read_errors_csv, read_records_csv, risk_dispatch,
)
from .surface import build_surface, contour

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

logger = logging.getLogger("flexramp")


def round_floats(obj, digits: int = 9):
    """Round every float in a JSON-like structure to ``digits`` significant digits."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{digits}g}") + 0.0  # no negative zero
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(round_floats(obj), sort_keys=True, indent=2) + "\n"


def _emit(text: str, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _load_model(ref: str):
    path = Path(ref)
    if path.exists():
        return grid.load_model(path)
    return grid.bundled_model(ref)


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _levels(text: str) -> int:
    k = int(text)
    if k < 2:
        raise argparse.ArgumentTypeError("need at least 2 levels")
    return k


def cmd_dispatch(args, tol) -> int:
    model = _load_model(args.model)
    sol = grid.solve_dispatch(model, args.fu, args.fd)
    if args.format == "csv":
        lines = ["generator,t,g,r_up,r_down"]
        if sol.status == OPTIMAL:
            for n, gen in enumerate(model.generators):
                for t in range(model.horizon):
                    ru = sol.r_up[n, t - 1] if t else 0.0
                    rd = sol.r_down[n, t - 1] if t else 0.0
                    lines.append(f"{gen.id},{t},{sol.g[n, t]:.9g},{ru:.9g},{rd:.9g}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        data = sol.to_dict()
        data.update({"model": model.name, "f_u": args.fu, "f_d": args.fd,
                     "generators": [g.id for g in model.generators]})
        _emit(dumps(data), args.out)
    if sol.status != OPTIMAL:
        print(f"dispatch is {sol.status} at f_u={args.fu}, f_d={args.fd}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def surface_summary(surf) -> dict:
    return {
        "triangles": surf.n_triangles,
        "vertices": len(surf.vertices),
        "base_cost": surf.base_cost,
        "theta_max": surf.theta_max,
        "argmax": list(surf.argmax),
        "max_ds": surf.theta_max - surf.base_cost,
        "free_up": surf.free_up,
        "free_down": surf.free_down,
        "levels": surf.levels.tolist(),
        "empty": surf.empty,
    }


def cmd_surface(args, tol) -> int:
    if args.format == "csv":
        raise ValueError("surface output is JSON only")
    model = _load_model(args.model)
    surf = build_surface(model, tol)
    summary = surface_summary(surf)
    if args.out:
        data = surf.to_dict()
        data["summary"] = summary
        _emit(dumps(data), args.out)
    print(dumps(summary), end="")
    return EXIT_OK


def cmd_contour(args, tol) -> int:
    model = _load_model(args.model)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cs = contour(model, args.levels, tol)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.format == "json" or not args.out:
        data = {"levels": cs.levels.tolist(),
                "polylines": [p.tolist() for p in cs.polylines]}
        _emit(dumps(data), args.out)
        return EXIT_OK
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    index = []
    for i, lev in enumerate(cs.levels):
        name = f"level_{i:03d}.csv"
        (outdir / name).write_text(cs.to_csv(i), encoding="utf-8")
        index.append({"file": name, "level": float(lev), "ds": float(lev - cs.levels[0])})
    (outdir / "index.json").write_text(dumps({"levels": index}), encoding="utf-8")
    print(f"wrote {len(index)} contour files to {outdir}")
    return EXIT_OK


def cmd_risk(args, tol) -> int:
    text = Path(args.samples).read_text(encoding="utf-8")
    if args.capacity is not None:
        regimes = ingest_samples(read_records_csv(text), args.capacity, args.net_load)
        dist = regimes.band(args.band)
    else:
        dist = read_errors_csv(text)
        if args.net_load:
            dist = dist.scaled(-1.0)
    model = _load_model(args.model)
    surf = build_surface(model, tol)
    res = risk_dispatch(surf, dist, args.p, args.delta)
    data = res.to_dict()
    data.update({"model": model.name, "n_samples": dist.n,
                 "error_mean": dist.mean, "error_std": dist.std})
    if args.format == "csv":
        keys = ["f_u", "f_d", "cost", "ds", "confidence", "p", "delta"]
        row = ",".join(f"{data[k]:.9g}" for k in keys)
        _emit(",".join(keys) + "\n" + row + "\n", args.out)
    else:
        _emit(dumps(data), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexramp", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--tol", default="", help=f"tolerance overrides key=value,...; also ${ENV_VAR}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt="json"):
        p.add_argument("--model", default="threebus",
                       help="model JSON path or bundled name (threebus, garver6)")
        p.add_argument("--out", default=None, help="output path (stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv"), default=fmt)

    p = sub.add_parser("dispatch", help="solve the dispatch at fixed ramping requirements")
    common(p)
    p.add_argument("--fu", type=_nonneg, default=0.0, help="up-ramping requirement, MW")
    p.add_argument("--fd", type=_nonneg, default=0.0, help="down-ramping requirement, MW")
    p.set_defaults(func=cmd_dispatch)

    p = sub.add_parser("surface", help="triangulate the cost surface")
    common(p)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("contour", help="export cost contours, one CSV per level")
    common(p, fmt="csv")
    p.add_argument("--levels", type=_levels, default=30)
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("risk", help="risk-limiting ramping requirements")
    common(p)
    p.add_argument("--samples", required=True,
                   help="CSV with predicted_mw,actual_mw (or a single error_mw column)")
    p.add_argument("--p", type=_fraction, default=0.95, help="confidence level, fraction")
    p.add_argument("--delta", type=_positive, default=None, help="search step, MW")
    p.add_argument("--capacity", type=_positive, default=None,
                   help="plant capacity, MW; enables band selection")
    p.add_argument("--band", choices=("low", "mid", "high"), default="mid")
    p.add_argument("--net-load", action="store_true",
                   help="flip error sign (renewable surplus lowers net load)")
    p.set_defaults(func=cmd_risk)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; this tool reserves 2 for infeasibility
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        tol = parse_overrides(args.tol, DEFAULT) if args.tol else DEFAULT
        return args.func(args, tol)
    except (BaseInfeasibleError, NoFeasiblePairError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError, KeyError, ModelError, NegativeParameterError,
            EmptyBandError, EmptyDistributionError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
