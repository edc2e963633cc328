"""Command-line front end for the cable-system library.

One subcommand per computed artifact: graph construction, discrete and
restricted energies, weak gradients, two-point energies and Besov scans,
the BV staircase example, the inequality experiments, and a combined
verification run.  Every command can emit CSV (RFC 4180) and JSON (sorted
keys) artifacts, and optionally render figures next to them; identical
configurations produce byte-identical delimited output.

Exit codes: 0 success, 1 a checked assertion failed, 2 usage error,
3 resource limits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from vicsek.energy import (
    Region,
    discrete_energy,
    discrete_energy_restricted,
    energy_limit,
    gradient_norm,
    self_similarity_check,
    stream_energy,
)
from vicsek.experiments import (
    hajlasz_divergence,
    k_functional_scan,
    maximal_function,
    morrey_check,
    poincare_check,
    run_all,
    sharpness_fit,
)
from vicsek.functions import (
    CantorEdgeFunction,
    PAFunction,
    cross_function,
    distance_function,
    random_pa,
    weak_gradient,
)
from vicsek.geometry import (
    CENTER,
    LatticePoint,
    ResourceLimitError,
    alpha_p,
    build_graph,
    cell_map,
    check_word,
    max_level,
    save_graph,
)
from vicsek.ks import besov_seminorm, default_radius_grid, ks_energy
from vicsek.reporting import (
    format_value,
    render_series_figure,
    write_csv,
    write_json,
)

__all__ = ["RunConfig", "main", "parse_args", "run"]


class UsageError(ValueError):
    """Malformed values or inconsistent options on the command line."""


# ---------------------------------------------------------------------------
# Value parsers
# ---------------------------------------------------------------------------

_RADIUS_RE = re.compile(r"(?:(\d+(?:/\d+)?)\s*\*\s*)?3\^(-?\d+)$")


def parse_radius(text: str) -> Fraction:
    """A triadic radius literal: '3^-k', 'a*3^-k', or a plain fraction."""
    s = text.strip()
    m = _RADIUS_RE.match(s)
    if m:
        base = Fraction(m.group(1)) if m.group(1) else Fraction(1)
        return base * Fraction(3) ** int(m.group(2))
    try:
        r = Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError(f"cannot parse radius {text!r}") from e
    return r


def parse_grid(text: str) -> tuple:
    return tuple(parse_radius(part) for part in text.split(",") if part.strip())


def parse_power(text: str) -> float:
    s = text.strip().lower()
    if s in ("inf", "infinity", "oo"):
        return math.inf
    try:
        p = float(s)
    except ValueError as e:
        raise UsageError(f"cannot parse power {text!r}") from e
    if p < 1:
        raise UsageError(f"the power must satisfy p >= 1, got {p}")
    return p


def parse_alpha(text: str | None, p: float) -> float | None:
    if text is None:
        return None
    s = text.strip().lower()
    if s == "critical":
        if math.isinf(p):
            raise UsageError("the critical exponent needs a finite p")
        return alpha_p(p)
    try:
        return float(s)
    except ValueError as e:
        raise UsageError(f"cannot parse alpha {text!r}") from e


def parse_point(text: str) -> LatticePoint:
    s = text.strip().lower()
    if s == "center":
        return CENTER
    m = re.fullmatch(r"q([1-5])", s)
    if m:
        return LatticePoint.key_point(int(m.group(1)))
    m = re.fullmatch(r"cell:([1-5]*)", s)
    if m:
        word = tuple(int(c) for c in m.group(1))
        return cell_map(word).apply(CENTER)
    raise UsageError(
        f"cannot parse point {text!r} (use center, q1..q5, or cell:DIGITS)"
    )


def parse_range(text: str) -> range:
    m = re.fullmatch(r"(\d+):(\d+)", text.strip())
    if not m:
        raise UsageError(f"cannot parse range {text!r} (use FIRST:LAST)")
    a, b = int(m.group(1)), int(m.group(2))
    if b < a:
        raise UsageError(f"empty range {text!r}")
    return range(a, b + 1)


def _check_level(level: int | None) -> int | None:
    if level is not None and level > max_level():
        raise UsageError(
            f"level {level} exceeds the maximum {max_level()} "
            "(override with VICSEK_MAX_LEVEL)"
        )
    if level is not None and level < 0:
        raise UsageError("the level must be nonnegative")
    return level


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """A validated invocation: command, resolution, exponents, the function
    and region under study, artifact paths, tolerance, and worker count."""

    command: str
    level: int | None
    p: float
    alpha: float | None
    function: str | None
    region: str | None
    json_path: str | None
    csv_path: str | None
    figures_dir: str | None
    tolerance: float | None
    threads: int
    options: dict = field(default_factory=dict)


def _add_common(sp, function=True, level=True, power=True, region=False):
    if function:
        sp.add_argument(
            "--function",
            default="cross",
            help="cross | dist | cantor | const[:v] | random[:seed] | JSON file",
        )
        sp.add_argument(
            "--function-level",
            type=int,
            default=None,
            help="construction level for dist/cantor/random functions",
        )
    if level:
        sp.add_argument("--level", type=int, default=None, help="working level")
    if power:
        sp.add_argument("--p", default="2", help="exponent p >= 1, or 'inf'")
    if region:
        sp.add_argument("--ball", default=None, help="ball region 'POINT:RADIUS'")
        sp.add_argument("--cell", default=None, help="cell region, e.g. '51'")
    sp.add_argument("--json", dest="json_path", default=None, help="JSON report path")
    sp.add_argument("--csv", dest="csv_path", default=None, help="CSV table path")
    sp.add_argument(
        "--figures", dest="figures_dir", default=None, help="directory for figures"
    )
    sp.add_argument("--tol", type=float, default=None, help="tolerance override")
    sp.add_argument("--threads", type=int, default=1, help="worker process count")
    sp.add_argument("--seed", type=int, default=0, help="random seed")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vicsek",
        description="Cable-system energies, function spaces, and inequality checks.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", help="construct and optionally cache a graph")
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--out", default=None, help="binary cache output path")
    _add_common(sp, function=False, level=False, power=False)

    sp = sub.add_parser("energy", help="discrete p-energies over a level scan")
    _add_common(sp, region=True)
    sp.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    sp.add_argument("--stream", action="store_true", help="stream the top level")

    sp = sub.add_parser("gradient", help="weak gradient density and its norm")
    _add_common(sp, region=True)

    sp = sub.add_parser("ks", help="two-point energies over a radius grid")
    _add_common(sp)
    sp.add_argument("--r-grid", default=None, help="comma list of radii (3^-k form)")
    sp.add_argument(
        "--margin", type=int, default=2,
        help="extra refinements past the minimal level (when --level is absent)",
    )

    sp = sub.add_parser("besov", help="scaled two-point seminorm scan")
    _add_common(sp)
    sp.add_argument("--alpha", default="critical")
    sp.add_argument("--r-grid", default=None)
    sp.add_argument("--margin", type=int, default=1)

    sp = sub.add_parser("bv", help="staircase example: p=1 energies and support")
    _add_common(sp, function=False)

    sp = sub.add_parser("morrey", help="pointwise-difference bound sampling")
    _add_common(sp, region=True)
    sp.add_argument("--pairs", type=int, default=1000)

    sp = sub.add_parser("poincare", help="mean-value inequality on a region")
    _add_common(sp, region=True)

    sp = sub.add_parser("sharpness", help="central-ball decay exponent fit")
    _add_common(sp, function=True)
    sp.add_argument("--n-range", default="1:5", help="ball depth range FIRST:LAST")

    sp = sub.add_parser("maximal", help="ball maximal function of the gradient")
    _add_common(sp)
    sp.add_argument("--r-grid", default=None)
    sp.add_argument("--lusin-pairs", type=int, default=512)

    sp = sub.add_parser("hajlasz", help="maximal-function norms across levels")
    _add_common(sp)
    sp.add_argument("--m-range", default="3:7", help="resolution range FIRST:LAST")

    sp = sub.add_parser("kfunc", help="K-functional upper bounds vs energies")
    _add_common(sp)
    sp.add_argument("--alpha", default=None, help="smoothness exponent or 'critical'")
    sp.add_argument("--r-grid", default=None)
    sp.add_argument("--n-max", type=int, default=4)

    sp = sub.add_parser("selfsim", help="energy self-similarity identity")
    _add_common(sp)
    sp.add_argument("--exact", action="store_true")

    sp = sub.add_parser("all", help="run the named verification experiments")
    _add_common(sp, function=False, level=False, power=False)
    sp.add_argument("--only", default=None, help="comma list of experiment names")
    sp.add_argument("--quick", action="store_true", help="reduced sample sizes")

    return ap


def parse_args(argv=None) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    p = parse_power(getattr(ns, "p", "2"))
    alpha = parse_alpha(getattr(ns, "alpha", None), p)
    level = _check_level(getattr(ns, "level", None))
    region = None
    if getattr(ns, "ball", None) is not None and getattr(ns, "cell", None) is not None:
        raise UsageError("give at most one of --ball and --cell")
    if getattr(ns, "ball", None) is not None:
        region = f"ball={ns.ball}"
    elif getattr(ns, "cell", None) is not None:
        region = f"cell={ns.cell}"
    skip = {
        "command", "p", "alpha", "level", "function",
        "json_path", "csv_path", "figures_dir", "tol", "threads",
    }
    options = {k: v for k, v in vars(ns).items() if k not in skip}
    if getattr(ns, "threads", 1) < 1:
        raise UsageError("the thread count must be at least 1")
    return RunConfig(
        command=ns.command,
        level=level,
        p=p,
        alpha=alpha,
        function=getattr(ns, "function", None),
        region=region,
        json_path=getattr(ns, "json_path", None),
        csv_path=getattr(ns, "csv_path", None),
        figures_dir=getattr(ns, "figures_dir", None),
        tolerance=getattr(ns, "tol", None),
        threads=getattr(ns, "threads", 1),
        options=options,
    )


# ---------------------------------------------------------------------------
# Shared construction helpers
# ---------------------------------------------------------------------------


def _make_function(cfg: RunConfig) -> PAFunction:
    spec = (cfg.function or "cross").strip()
    flevel = cfg.options.get("function_level")
    if flevel is not None:
        _check_level(flevel)
    if spec == "cross":
        return cross_function()
    if spec == "dist":
        return distance_function(flevel if flevel is not None else 0)
    if spec == "cantor":
        lvl = flevel if flevel is not None else min(cfg.level or 4, 6)
        return CantorEdgeFunction().as_pa(lvl)
    if spec.startswith("const"):
        val = Fraction(spec.split(":", 1)[1]) if ":" in spec else Fraction(1)
        return PAFunction.from_key_values([val] * 4, val)
    if spec.startswith("random"):
        seed = int(spec.split(":", 1)[1]) if ":" in spec else cfg.options.get("seed", 0)
        lvl = flevel if flevel is not None else min(cfg.level or 2, 2)
        return random_pa(max(lvl, 1), seed=seed)
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        try:
            return PAFunction.from_vertex_values(
                int(data["level"]), data["values"], data.get("exact")
            )
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"bad function file {spec!r}: {e}") from e
    raise UsageError(f"unknown function spec {spec!r}")


def _make_region(cfg: RunConfig) -> Region | None:
    ball = cfg.options.get("ball")
    cell = cfg.options.get("cell")
    if ball is not None:
        if ":" not in ball:
            raise UsageError(f"ball spec {ball!r} needs the form POINT:RADIUS")
        point_s, radius_s = ball.rsplit(":", 1)
        return Region.ball(parse_point(point_s), parse_radius(radius_s))
    if cell is not None:
        try:
            word = check_word(tuple(int(c) for c in cell.strip()))
        except (ValueError, TypeError) as e:
            raise UsageError(f"bad cell word {cell!r}") from e
        return Region.cell(word)
    return None


def _emit(cfg: RunConfig, json_obj=None, csv_table=None, figures=()):
    if cfg.csv_path and csv_table is not None:
        header, rows = csv_table
        write_csv(cfg.csv_path, header, rows)
    if cfg.json_path and json_obj is not None:
        write_json(cfg.json_path, json_obj)
    if cfg.figures_dir:
        for fig in figures:
            render_series_figure(
                os.path.join(cfg.figures_dir, fig["file"]),
                fig["title"],
                fig["xlabel"],
                fig["ylabel"],
                fig["series"],
                logx=fig.get("logx", False),
                logy=fig.get("logy", False),
            )


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def _cmd_build(cfg: RunConfig) -> int:
    level = cfg.level
    if level is None:
        raise UsageError("build needs --level")
    t0 = time.perf_counter()
    g = build_graph(level)
    dt = time.perf_counter() - t0
    acyclic = g.n_edges == g.n_vertices - 1
    print(
        f"level {level}: vertices {g.n_vertices} edges {g.n_edges} "
        f"acyclic {str(acyclic).lower()} ({dt:.3f}s)"
    )
    out = cfg.options.get("out")
    if out:
        save_graph(g, out)
        print(f"cached to {out}")
    _emit(cfg, json_obj={
        "level": level,
        "vertices": g.n_vertices,
        "edges": g.n_edges,
        "acyclic": acyclic,
    })
    return 0 if acyclic else 1


def _cmd_energy(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    m = cfg.level if cfg.level is not None else f.level
    _check_level(m)
    if m < f.level:
        raise UsageError(f"--level must be >= the function level {f.level}")
    region = _make_region(cfg)
    exact = cfg.options.get("exact", False)
    stream = cfg.options.get("stream", False)
    if stream and (exact or region is not None):
        raise UsageError("--stream supports only float whole-space energies")
    if exact and (not float(cfg.p).is_integer() or math.isinf(cfg.p)):
        raise UsageError("--exact needs an integer p")
    levels = list(range(f.level, m + 1))
    values = []
    for lev in levels:
        if region is not None:
            values.append(discrete_energy_restricted(f, cfg.p, lev, region))
        elif stream and lev == m:
            values.append(stream_energy(f, cfg.p, lev, workers=cfg.threads))
        else:
            values.append(discrete_energy(f, cfg.p, lev, exact=exact))
    floats = [float(v) for v in values]
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-12
    mono = [True] + [
        b >= a - tol * max(1.0, abs(a)) for a, b in zip(floats[:-1], floats[1:])
    ]
    region_s = region.describe() if region is not None else "whole"
    print(format_value(values[-1]))
    rows = [
        (format_value(cfg.p), lev, region_s, v, ok)
        for lev, v, ok in zip(levels, values, mono)
    ]
    _emit(
        cfg,
        json_obj={
            "p": cfg.p,
            "region": region_s,
            "levels": levels,
            "energies": floats,
            "monotone": all(mono),
        },
        csv_table=(("p", "level", "region", "energy", "monotone_ok"), rows),
        figures=[{
            "file": "energy_levels.png",
            "title": f"discrete energy, p={cfg.p}",
            "xlabel": "level",
            "ylabel": "energy",
            "series": [("E_p^m", levels, floats)],
            "logy": min(floats) > 0 and max(floats) / max(min(floats), 1e-300) > 50,
        }],
    )
    return 0 if all(mono) else 1


def _cmd_gradient(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    m = cfg.level if cfg.level is not None else f.level
    _check_level(m)
    if m < f.level:
        raise UsageError(f"--level must be >= the function level {f.level}")
    density = weak_gradient(f.refine(m))
    region = _make_region(cfg)
    norm = gradient_norm(density, cfg.p, region)
    print(format_value(norm))
    g = density.graph
    mags = np.abs(density.values)
    order = np.argsort(-mags, kind="stable")
    rows = (
        (int(e), int(g.edge_cell[e]), int(g.edge_corner[e]), density.values[e])
        for e in range(g.n_edges)
    )
    _emit(
        cfg,
        json_obj={
            "p": cfg.p,
            "level": m,
            "region": region.describe() if region else "whole",
            "norm": norm,
            "support_edges": int((mags > 0).sum()),
            "max_density": float(mags.max()) if len(mags) else 0.0,
        },
        csv_table=(("edge", "cell", "corner", "density"), rows),
        figures=[{
            "file": "gradient_decay.png",
            "title": f"weak-gradient magnitudes, level {m}",
            "xlabel": "rank",
            "ylabel": "|density|",
            "series": [(
                "sorted",
                list(range(1, len(order) + 1)),
                [float(mags[i]) for i in order],
            )],
            "logy": bool(len(mags) and mags.max() > 0),
        }],
    )
    return 0


def _cmd_ks(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    grid_s = cfg.options.get("r_grid")
    if grid_s:
        grid = parse_grid(grid_s)
    else:
        grid = default_radius_grid(cfg.level if cfg.level is not None else f.level + 3)
    a = alpha_p(cfg.p)
    margin = max(cfg.options.get("margin", 2), 0)
    rows = []
    for r in grid:
        if cfg.level is not None:
            m = cfg.level
        else:
            m = f.level
            while Fraction(1, 3**m) > Fraction(r) / 3:
                m += 1
            m = min(m + margin, max_level())
        est = ks_energy(f, r, cfg.p, m=m)
        rows.append((float(r), est.value, est.error))
        print(f"r={format_value(r)} value={format_value(est.value)} "
              f"error={format_value(est.error)}")
    _emit(
        cfg,
        json_obj={
            "p": cfg.p,
            "alpha": a,
            "radii": [r for r, _, _ in rows],
            "values": [v for _, v, _ in rows],
            "errors": [e for _, _, e in rows],
        },
        csv_table=(
            ("p", "alpha", "r", "value", "err_lo", "err_hi"),
            [
                (format_value(cfg.p), a, r, v, max(v - e, 0.0), v + e)
                for r, v, e in rows
            ],
        ),
        figures=[{
            "file": "ks_scan.png",
            "title": f"two-point energy, p={cfg.p}",
            "xlabel": "r",
            "ylabel": "E_p(f, r)",
            "series": [("estimate", [r for r, _, _ in rows], [v for _, v, _ in rows])],
            "logx": True,
            "logy": all(v > 0 for _, v, _ in rows),
        }],
    )
    return 0


def _cmd_besov(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    grid_s = cfg.options.get("r_grid")
    grid = parse_grid(grid_s) if grid_s else None
    rep = besov_seminorm(
        f, cfg.alpha, cfg.p, r_grid=grid, m=cfg.level,
        margin=cfg.options.get("margin", 1),
    )
    slope = rep.fitted_slope()
    print(f"seminorm={format_value(rep.seminorm)} slope={format_value(slope)}")
    scaled = rep.scaled
    rows = [
        (r, v, e, s)
        for r, v, e, s in zip(rep.radii, rep.values, rep.errors, scaled)
    ]
    _emit(
        cfg,
        json_obj={
            "p": cfg.p,
            "alpha": rep.alpha,
            "seminorm": rep.seminorm,
            "fitted_slope": slope,
            "limsup_proxy": rep.limsup_proxy,
            "radii": [float(r) for r in rep.radii],
            "values": list(rep.values),
            "errors": list(rep.errors),
            "scaled": list(scaled),
        },
        csv_table=(("r", "value", "error", "scaled"), rows),
        figures=[{
            "file": "besov_scan.png",
            "title": f"scaled two-point seminorm, p={cfg.p}, alpha={rep.alpha:.4f}",
            "xlabel": "r",
            "ylabel": "r^-alpha E^(1/p)",
            "series": [("scaled", [float(r) for r in rep.radii], list(scaled))],
            "logx": True,
            "logy": all(s > 0 for s in scaled),
        }],
    )
    return 0


def _cmd_bv(cfg: RunConfig) -> int:
    m = cfg.level if cfg.level is not None else 6
    _check_level(m)
    c = CantorEdgeFunction()
    rows = []
    for lev in range(m + 1):
        e1 = c.arm_energy(1, lev)
        rows.append((lev, e1, c.slope_support_length(lev)))
    ok = all(e1 == 1 for _, e1, _ in rows)
    print(format_value(rows[-1][1]))
    _emit(
        cfg,
        json_obj={
            "levels": [lev for lev, _, _ in rows],
            "energy1": [str(e) for _, e, _ in rows],
            "support_length": [str(s) for _, _, s in rows],
            "constant_energy": ok,
        },
        csv_table=(("level", "energy1", "support_length"), rows),
        figures=[{
            "file": "bv_support.png",
            "title": "staircase slope support",
            "xlabel": "level",
            "ylabel": "nu-length",
            "series": [(
                "(2/3)^m",
                [lev for lev, _, _ in rows],
                [float(s) for _, _, s in rows],
            )],
            "logy": True,
        }],
    )
    return 0 if ok else 1


def _cmd_morrey(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    rep = morrey_check(
        f,
        region=_make_region(cfg),
        p=cfg.p,
        n_pairs=cfg.options.get("pairs", 1000),
        seed=cfg.options.get("seed", 0),
    )
    print(format_value(rep.max_ratio))
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-12
    ok = rep.max_ratio <= 1.0 + tol
    _emit(cfg, json_obj={
        "p": rep.p,
        "region": rep.region.describe(),
        "energy": rep.energy,
        "pairs": rep.n_pairs,
        "max_ratio": rep.max_ratio,
        "worst_pair": rep.worst_pair,
        "ok": ok,
    })
    return 0 if ok else 1


def _cmd_poincare(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    region = _make_region(cfg)
    if region is None:
        region = Region.whole()
    rep = poincare_check(f, region, p=cfg.p)
    print(format_value(rep.scaled_ratio))
    _emit(cfg, json_obj={
        "p": rep.p,
        "region": rep.region.describe(),
        "mean": rep.mean,
        "lhs": rep.lhs,
        "lhs_error": rep.lhs_error,
        "rhs": rep.rhs,
        "energy": rep.energy,
        # the ball-scaled ratio, whose sharp central value is 2/21 at p=2
        "ratio": rep.scaled_ratio,
        "inequality_ratio": rep.ratio,
        "ok": rep.ok,
    })
    return 0 if rep.ok else 1


def _cmd_sharpness(cfg: RunConfig) -> int:
    f = _make_function(cfg) if cfg.function != "cross" else None
    fit = sharpness_fit(
        p=cfg.p, n_range=parse_range(cfg.options.get("n_range", "1:5")), f=f
    )
    print(f"exponent={format_value(fit.exponent)} "
          f"constant={format_value(fit.constant)} "
          f"residual={format_value(fit.residual)}")
    fitted = [fit.constant * s**fit.exponent for s, _ in fit.points]
    rows = [
        (s, v, w) for (s, v), w in zip(fit.points, fitted)
    ]
    _emit(
        cfg,
        json_obj={
            "p": cfg.p,
            "exponent": fit.exponent,
            "constant": fit.constant,
            "residual": fit.residual,
            "points": [list(pt) for pt in fit.points],
        },
        csv_table=(("scale", "value", "fitted"), rows),
        figures=[{
            "file": "sharpness_fit.png",
            "title": f"central-ball decay, p={cfg.p}",
            "xlabel": "r",
            "ylabel": "integral",
            "series": [
                ("samples", [s for s, _ in fit.points], [v for _, v in fit.points]),
                ("fit", [s for s, _ in fit.points], fitted),
            ],
            "logx": True,
            "logy": True,
        }],
    )
    return 0


def _cmd_maximal(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    grid_s = cfg.options.get("r_grid")
    rep = maximal_function(
        f,
        p=cfg.p,
        r_grid=parse_grid(grid_s) if grid_s else None,
        m=cfg.level,
        lusin_pairs=cfg.options.get("lusin_pairs", 512),
        seed=cfg.options.get("seed", 0),
    )
    print(f"strong={format_value(rep.strong_norm)} "
          f"weak={format_value(rep.weak_norm)} "
          f"lusin={format_value(rep.lusin_constant)}")
    ok = rep.weak_norm <= rep.strong_norm + 1e-12
    g_sorted = np.sort(rep.g_values)[::-1]
    _emit(
        cfg,
        json_obj={
            "p": rep.p,
            "level": rep.level,
            "r_grid": list(rep.r_grid),
            "strong_norm": rep.strong_norm,
            "weak_norm": rep.weak_norm,
            "lambda_grid": list(rep.lambda_grid),
            "lusin_constant": rep.lusin_constant,
            "chebyshev_ok": ok,
        },
        csv_table=(
            ("anchor", "g"),
            ((i, rep.g_values[i]) for i in range(len(rep.g_values))),
        ),
        figures=[{
            "file": "maximal_decay.png",
            "title": f"maximal function profile, p={cfg.p}, level {rep.level}",
            "xlabel": "rank",
            "ylabel": "g",
            "series": [("sorted g", list(range(1, len(g_sorted) + 1)),
                        [float(v) for v in g_sorted])],
            "logy": bool(len(g_sorted) and g_sorted[0] > 0),
        }],
    )
    return 0 if ok else 1


def _cmd_hajlasz(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    rep = hajlasz_divergence(
        f, p=cfg.p, m_range=parse_range(cfg.options.get("m_range", "3:7"))
    )
    for lev, s, w in zip(rep.levels, rep.strong, rep.weak):
        print(f"m={lev} strong={format_value(s)} weak={format_value(w)}")
    _emit(
        cfg,
        json_obj={
            "p": rep.p,
            "levels": list(rep.levels),
            "strong": list(rep.strong),
            "weak": list(rep.weak),
            "weak_band": rep.weak_band,
        },
        csv_table=(
            ("level", "strong", "weak"),
            list(zip(rep.levels, rep.strong, rep.weak)),
        ),
        figures=[{
            "file": "hajlasz_norms.png",
            "title": f"maximal-function norms, p={cfg.p}",
            "xlabel": "level",
            "ylabel": "norm",
            "series": [
                ("strong", list(rep.levels), list(rep.strong)),
                ("weak", list(rep.levels), list(rep.weak)),
            ],
        }],
    )
    return 0


def _cmd_kfunc(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    grid_s = cfg.options.get("r_grid")
    rep = k_functional_scan(
        f,
        p=cfg.p,
        r_grid=parse_grid(grid_s) if grid_s else None,
        alpha=cfg.alpha,
        n_max=cfg.options.get("n_max", 4),
    )
    print(f"band={format_value(rep.band)}")
    rows = []
    for i, r in enumerate(rep.r_grid):
        d = rep.decompositions[i]
        rows.append((
            r,
            rep.e_values[i],
            rep.e_errors[i],
            rep.k_values[i],
            rep.ratios[i],
            d["kind"],
            d["n"] if d["n"] is not None else "",
            d["g_norm"],
            d["h_seminorm"],
        ))
    _emit(
        cfg,
        json_obj={
            "p": rep.p,
            "theta": rep.theta,
            "band": rep.band,
            "r_grid": list(rep.r_grid),
            "e_values": list(rep.e_values),
            "k_values": list(rep.k_values),
            "ratios": list(rep.ratios),
            "decompositions": list(rep.decompositions),
        },
        csv_table=(
            ("r", "e_value", "e_error", "k_up", "ratio",
             "kind", "n", "g_norm", "h_seminorm"),
            rows,
        ),
        figures=[{
            "file": "kfunc_scan.png",
            "title": f"K-functional bound vs energy, p={cfg.p}",
            "xlabel": "r",
            "ylabel": "value",
            "series": [
                ("E^(1/p)", list(rep.r_grid),
                 [v ** (1.0 / rep.p) for v in rep.e_values]),
                ("K_up", list(rep.r_grid), list(rep.k_values)),
            ],
            "logx": True,
            "logy": all(v > 0 for v in rep.k_values),
        }],
    )
    return 0


def _cmd_selfsim(cfg: RunConfig) -> int:
    f = _make_function(cfg)
    lev = cfg.level if cfg.level is not None else f.level
    _check_level(lev + 1)
    lhs, rhs, gap = self_similarity_check(
        f, cfg.p, level=lev, exact=cfg.options.get("exact", False)
    )
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-12
    ok = gap <= tol
    print(f"lhs={format_value(lhs)} rhs={format_value(rhs)} gap={format_value(gap)}")
    _emit(cfg, json_obj={
        "p": cfg.p,
        "level": lev,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "gap": gap,
        "ok": ok,
    })
    return 0 if ok else 1


def _cmd_all(cfg: RunConfig) -> int:
    only = cfg.options.get("only")
    names = [s.strip() for s in only.split(",")] if only else None
    results = run_all(
        names, quick=cfg.options.get("quick", False), workers=cfg.threads
    )
    for r in results:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'}")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} experiments passed")
    figures = []
    by_name = {r.name: r for r in results}
    if "hajlasz" in by_name:
        v = by_name["hajlasz"].values
        figures.append({
            "file": "all_hajlasz.png",
            "title": "maximal-function norms across levels",
            "xlabel": "level",
            "ylabel": "norm",
            "series": [
                ("strong", v["levels"], v["strong"]),
                ("weak", v["levels"], v["weak"]),
            ],
        })
    if "poincare" in by_name:
        v = by_name["poincare"].values
        figures.append({
            "file": "all_poincare.png",
            "title": "central-ball scaled ratios",
            "xlabel": "depth n",
            "ylabel": "ratio",
            "series": [
                ("ratio", list(range(1, len(v["central_ratios"]) + 1)),
                 v["central_ratios"]),
            ],
        })
    if "interpolant" in by_name:
        v = by_name["interpolant"].values
        errs = v["lipschitz_sup_errors"]
        figures.append({
            "file": "all_interpolant.png",
            "title": "interpolant sup errors (Lipschitz input)",
            "xlabel": "n",
            "ylabel": "sup error",
            "series": [("error", list(range(len(errs))), errs)],
            "logy": True,
        })
    _emit(
        cfg,
        json_obj=[r.to_dict() for r in results],
        csv_table=(
            ("experiment", "passed"),
            [(r.name, r.passed) for r in results],
        ),
        figures=figures,
    )
    return 0 if n_fail == 0 else 1


_HANDLERS = {
    "build": _cmd_build,
    "energy": _cmd_energy,
    "gradient": _cmd_gradient,
    "ks": _cmd_ks,
    "besov": _cmd_besov,
    "bv": _cmd_bv,
    "morrey": _cmd_morrey,
    "poincare": _cmd_poincare,
    "sharpness": _cmd_sharpness,
    "maximal": _cmd_maximal,
    "hajlasz": _cmd_hajlasz,
    "kfunc": _cmd_kfunc,
    "selfsim": _cmd_selfsim,
    "all": _cmd_all,
}


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit code."""
    return _HANDLERS[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return run(cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ResourceLimitError, MemoryError) as e:
        print(f"resource error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
