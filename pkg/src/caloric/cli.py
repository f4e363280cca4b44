"""Deterministic command-line front end.

Subcommands::

    caloric kernel eval        pointwise source-solution values
    caloric capacity estimate  LP capacity of a sampled compact set
    caloric content estimate   parabolic Hausdorff content bounds
    caloric check tbhcc        time-backwards content condition report
    caloric check tbcdc        time-backwards capacity condition report
    caloric measure estimate   Monte Carlo exit measure from one pole
    caloric dirichlet solve    Monte Carlo solution values at poles
    caloric wiener series      partial sums of the capacity series
    caloric scenario NAME      packaged experiment (writes a result dir)
    caloric validate           fast deterministic self-check bundle

Results print to stdout as canonical JSON (``--format csv`` switches to a
delimited table); ``--out-dir`` additionally writes the artifacts and a
provenance manifest.  Every randomized command requires an explicit
``--seed`` so a rerun of the printed command reproduces its output byte for
byte; the only timestamp lives in the manifest.

Input mini-languages (documented in the README):

* points: comma-separated floats, last entry the time (``0.5,-1.0,2.25``);
* domains: a bundled name (``cylinder``, ``complement-cube``,
  ``sparse-cubes``) or a JSON file in the domain DSL;
* operators: a JSON file, ``{"type": "scaled_heat", "M": 1.0, "n": 1}`` or
  ``{"type": "diagonal_checkerboard", "lam": 0.5, "n": 1, "period": 1.0,
  "low": 0.5, "high": 2.0}``;
* compact sets: a JSON file, ``{"set": {"type": "slab" | "point" | "box" |
  "slab_complement" | "backward_cube_complement", ...}}``;
* data: ``const:V``, ``bump:cx,..,ct,r`` or ``outside_cube:cx,..,ct,r``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .capacity import (
    CompactSetSample,
    Slab,
    backward_cube_complement_sample,
    check_tbcdc,
    check_tbhcc,
    estimate_capacity,
    frostman_lower_bound,
    hausdorff_content_upper,
    rasterize,
    singleton_sample,
    slab_complement_sample,
    slab_sample,
    wiener_partial_sums,
)
from .geometry import (
    Domain,
    ParabolicCube,
    SpacetimePoint,
    domain_from_dsl,
    load_domain,
    parabolic_dist_arrays,
    sample_sigma,
)
from .kernels import ScaledHeatKernel
from .scenarios import BUNDLED_DOMAINS, bundled_domain, run_scenario, write_result
from .serialization import (
    RunManifest,
    canonical_json,
    format_csv,
    measure_csv,
    measure_header,
    write_csv,
    write_json,
)
from .walker import (
    DiagonalField,
    ScaledHeat,
    WalkConfig,
    estimate_measure,
    lattice_estimate_measure,
    solve_dirichlet,
)


class UsageError(Exception):
    """Bad command-line input; reported on stderr with exit status 2."""


# ---------------------------------------------------------------------------
# argument parsing helpers


def _floats(text: str) -> list[float]:
    try:
        vals = [float(p) for p in str(text).split(",") if p.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise UsageError(f"expected comma-separated numbers, got {text!r}")
    return vals


def _point(text: str) -> SpacetimePoint:
    vals = _floats(text)
    if len(vals) < 2:
        raise UsageError(
            f"a point needs at least one spatial coordinate and a time, got {text!r}"
        )
    return SpacetimePoint.of(tuple(vals[:-1]), vals[-1])


def _require_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise UsageError("this command is randomized; pass an explicit --seed")
    return int(args.seed)


def _read_json_file(path: str) -> Any:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _domain_arg(text: str) -> tuple[Domain, Any]:
    """A bundled domain name or a path to a domain DSL file."""
    if text in BUNDLED_DOMAINS:
        return bundled_domain(text), {"bundled": text}
    if Path(text).exists():
        return load_domain(text), {"file": text}
    raise UsageError(
        f"domain {text!r} is neither a bundled name {BUNDLED_DOMAINS} nor a file"
    )


def _checkerboard(
    low: float, high: float, period: float, n: int
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def field(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        cells = np.floor(x / period).sum(axis=1) + np.floor(t / period)
        vals = np.where(cells.astype(np.int64) % 2 == 0, low, high)
        return np.repeat(vals[:, None], n, axis=1)

    return field


def _load_operator(path: str | None, n_default: int) -> tuple[Any, dict]:
    if path is None:
        node: dict = {"type": "scaled_heat", "M": 1.0, "n": n_default}
    else:
        node = _read_json_file(path)
        if not isinstance(node, dict):
            raise UsageError(f"{path}: operator file must hold a JSON object")
    kind = node.get("type")
    if kind == "scaled_heat":
        return ScaledHeat(float(node.get("M", 1.0)), int(node.get("n", n_default))), node
    if kind == "diagonal_checkerboard":
        lam = float(node.get("lam", 0.5))
        n = int(node.get("n", n_default))
        low = float(node.get("low", lam))
        high = float(node.get("high", 1.0 / lam))
        period = float(node.get("period", 1.0))
        if not (lam <= low <= high <= 1.0 / lam):
            raise UsageError(
                "checkerboard levels must satisfy lam <= low <= high <= 1/lam"
            )
        if period <= 0:
            raise UsageError("checkerboard period must be positive")
        op = DiagonalField(_checkerboard(low, high, period, n), lam, n)
        return op, node
    raise UsageError(f"unknown operator type {kind!r}")


def _load_set(path: str) -> tuple[CompactSetSample, dict]:
    obj = _read_json_file(path)
    node = obj.get("set", obj) if isinstance(obj, dict) else obj
    if not isinstance(node, dict):
        raise UsageError(f"{path}: set file must hold a JSON object")
    kind = node.get("type")
    if kind == "slab":
        slab = Slab(
            tuple(node["center_x"]), node["half_side"], node["t_lo"], node["t_hi"]
        )
        return slab_sample(slab, int(node.get("depth", 2))), node
    if kind == "slab_complement":
        slab = Slab(
            tuple(node["center_x"]), node["half_side"], node["t_lo"], node["t_hi"]
        )
        d = domain_from_dsl(node["domain"])
        return slab_complement_sample(d, slab, int(node.get("depth", 2))), node
    if kind == "point":
        p = SpacetimePoint.of(tuple(node["x"]), node["t"])
        return singleton_sample(p, float(node.get("resolution", 1e-8))), node
    if kind == "backward_cube_complement":
        d = domain_from_dsl(node["domain"])
        return (
            backward_cube_complement_sample(
                d, node["x0"], float(node["t0"]), float(node["r"]), int(node.get("depth", 3))
            ),
            node,
        )
    if kind == "box":
        x_lo = [float(v) for v in node["x_lo"]]
        x_hi = [float(v) for v in node["x_hi"]]
        sample = rasterize(
            lambda x, t: np.ones(len(t), dtype=bool),
            x_lo,
            x_hi,
            float(node["t_lo"]),
            float(node["t_hi"]),
            float(node["h"]),
        )
        return sample, node
    raise UsageError(f"unknown set type {kind!r}")


def _parse_datum(
    text: str, n: int
) -> tuple[Callable[[np.ndarray, np.ndarray], np.ndarray], dict]:
    head, _, rest = text.partition(":")
    if head == "const":
        try:
            v = float(rest)
        except ValueError as exc:
            raise UsageError(f"const datum needs a number, got {rest!r}") from exc
        return (lambda x, t: np.full(len(t), v)), {"datum": "const", "value": v}
    if head in ("bump", "outside_cube"):
        vals = _floats(rest)
        if len(vals) != n + 2:
            raise UsageError(
                f"{head} datum needs {n} center coordinates, a time and a radius"
            )
        cx, ct, r = np.asarray(vals[:n]), vals[n], vals[n + 1]
        if r <= 0:
            raise UsageError("datum radius must be positive")
        meta = {"datum": head, "center_x": vals[:n], "center_t": ct, "radius": r}
        if head == "bump":

            def bump(x: np.ndarray, t: np.ndarray) -> np.ndarray:
                u = parabolic_dist_arrays(x, t, cx, ct) / r
                out = np.zeros(len(t))
                inside = u < 1.0
                out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
                return out

            return bump, meta
        cube = ParabolicCube(SpacetimePoint.of(tuple(cx), ct), r, kind="full")

        def outside(x: np.ndarray, t: np.ndarray) -> np.ndarray:
            return (~cube.contains_batch(x, t)).astype(float)

        return outside, meta
    raise UsageError(
        f"unknown datum {text!r}; use const:V, bump:cx,..,ct,r or outside_cube:cx,..,ct,r"
    )


def _walk_config(args: argparse.Namespace, seed: int) -> WalkConfig:
    return WalkConfig(
        dt_max=args.dt_max,
        boundary_tol=args.boundary_tol,
        time_floor=args.time_floor,
        max_steps=args.max_steps,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# output helpers


def _emit(
    args: argparse.Namespace,
    command: str,
    config: Mapping[str, Any],
    payload: Mapping[str, Any],
    tables: Mapping[str, tuple[Sequence[str], Sequence[Sequence[Any]]]],
    default_text: str | None = None,
) -> None:
    """Print one result and optionally persist it.

    ``default_text`` is used when no ``--format`` was requested (the kernel
    command prints a bare number); otherwise JSON is the default and ``csv``
    prints the first table.
    """
    fmt = args.format
    if fmt is None and default_text is not None:
        sys.stdout.write(default_text)
        if not default_text.endswith("\n"):
            sys.stdout.write("\n")
    elif fmt == "csv":
        if not tables:
            raise UsageError(f"{command} has no tabular output; use --format json")
        header, rows = next(iter(tables.values()))
        sys.stdout.write(format_csv(header, rows))
    else:
        sys.stdout.write(canonical_json(payload))

    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        slug = command.replace(" ", "_")
        written = [write_json(out / f"{slug}.json", payload)]
        for name, (header, rows) in tables.items():
            written.append(write_csv(out / f"{name}.csv", header, rows))
        manifest = RunManifest.create(
            command,
            config,
            getattr(args, "seed", None),
            __version__,
            [p.name for p in written],
        )
        manifest.write(out)


# ---------------------------------------------------------------------------
# command handlers


def _cmd_kernel_eval(args: argparse.Namespace) -> int:
    target = _point(args.target)
    source = _point(args.source)
    if target.dim != source.dim:
        raise UsageError("target and source must share a spatial dimension")
    n = int(args.n) if args.n is not None else target.dim
    if n != target.dim:
        raise UsageError(f"--n {n} contradicts {target.dim}-dimensional points")
    kern = ScaledHeatKernel(args.M, n)
    value = float(
        kern.evaluate(
            np.asarray([target.x]), np.asarray([target.t]),
            np.asarray(source.x), source.t,
        )[0]
    )
    config = {
        "command": "kernel eval",
        "M": args.M,
        "n": n,
        "target": list(target.x) + [target.t],
        "source": list(source.x) + [source.t],
    }
    payload = dict(config, value=value)
    _emit(
        args,
        "kernel eval",
        config,
        payload,
        {"kernel": (("value",), ((value,),))},
        default_text="%.7g" % value,
    )
    return 0


def _cmd_capacity_estimate(args: argparse.Namespace) -> int:
    sample, node = _load_set(args.set)
    kern = ScaledHeatKernel(args.M, sample.dim)
    est = estimate_capacity(sample, kern)
    config = {"command": "capacity estimate", "set": node, "M": args.M, "n": sample.dim}
    payload = dict(config, **asdict(est))
    table = (
        (
            "lp_value",
            "verify_max_potential",
            "certified_lower",
            "constraint_count",
            "atom_count",
        ),
        (
            (
                est.lp_value,
                est.verify_max_potential,
                est.certified_lower,
                est.constraint_count,
                est.atom_count,
            ),
        ),
    )
    _emit(args, "capacity estimate", config, payload, {"capacity": table})
    return 0


def _cmd_content_estimate(args: argparse.Namespace) -> int:
    sample, node = _load_set(args.set)
    if sample.cells is None:
        raise UsageError("this set has no dyadic cover; content needs cells, not atoms")
    upper = hausdorff_content_upper(sample.cells, args.s)
    lower, _ = frostman_lower_bound(sample.cells, args.s)
    config = {"command": "content estimate", "set": node, "s": args.s, "n": sample.dim}
    payload = dict(config, upper_bound=upper, frostman_lower=lower)
    table = (("s", "upper_bound", "frostman_lower"), ((args.s, upper, lower),))
    _emit(args, "content estimate", config, payload, {"content": table})
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    d, dmeta = _domain_arg(args.domain)
    scales = _floats(args.scales)
    sigma = sample_sigma(d, args.sigma_count, rng_seed=seed)
    if args.condition == "tbhcc":
        report = check_tbhcc(d, sigma, scales, eps=args.eps, depth=args.depth)
        params: dict = {"eps": args.eps, "depth": args.depth}
    else:
        n = sigma.points[0].dim if len(sigma) else 1
        kern = ScaledHeatKernel(args.M, n)
        report = check_tbcdc(d, kern, sigma, scales, a=args.a, depth=args.depth)
        params = {"M": args.M, "a": args.a, "depth": args.depth}
    command = f"check {args.condition}"
    config = {
        "command": command,
        "domain": dmeta,
        "scales": scales,
        "sigma_count": args.sigma_count,
        "seed": seed,
        **params,
    }
    rows = report.csv_rows()
    payload = dict(
        config,
        condition=report.condition,
        worst_ratio=report.worst_ratio,
        resolution=report.resolution,
        row_count=len(rows) - 1,
    )
    _emit(args, command, config, payload, {"ratios": (tuple(rows[0]), tuple(map(tuple, rows[1:])))})
    return 0


def _cmd_measure_estimate(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    d, dmeta = _domain_arg(args.domain)
    pole = _point(args.pole)
    op, opspec = _load_operator(args.operator, pole.dim)
    cfg = _walk_config(args, seed)
    if args.lattice_h is not None:
        if not isinstance(op, DiagonalField):
            raise UsageError("--lattice-h requires a diagonal-field operator")
        meas = lattice_estimate_measure(d, op, pole, args.lattice_h, args.paths, cfg)
    else:
        meas = estimate_measure(d, op, pole, args.paths, cfg, workers=args.workers)
    config = {
        "command": "measure estimate",
        "domain": dmeta,
        "operator": opspec,
        "pole": list(pole.x) + [pole.t],
        "paths": args.paths,
        "seed": seed,
        "boundary_tol": args.boundary_tol,
        "time_floor": args.time_floor,
        "lattice_h": args.lattice_h,
    }
    payload = dict(config, **measure_header(meas, config))
    hits_text = measure_csv(meas)
    hit_lines = hits_text.splitlines()
    header = tuple(hit_lines[0].split(","))
    rows = tuple(tuple(cell for cell in line.split(",")) for line in hit_lines[1:])
    _emit(args, "measure estimate", config, payload, {"hits": (header, rows)})
    return 0


def _cmd_dirichlet_solve(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    d, dmeta = _domain_arg(args.domain)
    poles = [_point(p) for p in args.pole]
    n = poles[0].dim
    if any(p.dim != n for p in poles):
        raise UsageError("all poles must share a spatial dimension")
    op, opspec = _load_operator(args.operator, n)
    datum, datum_meta = _parse_datum(args.datum, n)
    cfg = _walk_config(args, seed)
    results = solve_dirichlet(
        d,
        op,
        datum,
        poles,
        args.paths,
        cfg,
        infinity_value=args.infinity_value,
        workers=args.workers,
    )
    config = {
        "command": "dirichlet solve",
        "domain": dmeta,
        "operator": opspec,
        "datum": datum_meta,
        "poles": [list(p.x) + [p.t] for p in poles],
        "paths": args.paths,
        "seed": seed,
        "infinity_value": args.infinity_value,
        "boundary_tol": args.boundary_tol,
        "time_floor": args.time_floor,
    }
    rows = tuple(
        tuple(p.x) + (p.t, v, s) for p, (v, s) in zip(poles, results)
    )
    header = tuple(f"x{i}" for i in range(n)) + ("t", "value", "se")
    payload = dict(
        config,
        values=[{"pole": list(p.x) + [p.t], "value": v, "se": s} for p, (v, s) in zip(poles, results)],
    )
    _emit(args, "dirichlet solve", config, payload, {"values": (header, rows)})
    return 0


def _cmd_wiener_series(args: argparse.Namespace) -> int:
    d, dmeta = _domain_arg(args.domain)
    point = _point(args.point)
    kern = ScaledHeatKernel(args.M, point.dim)
    sums = wiener_partial_sums(
        d,
        kern,
        point,
        lam=args.lam,
        terms=args.terms,
        mode=args.mode,
        a=args.a,
        depth=args.depth,
        base_radius=args.base_radius,
    )
    config = {
        "command": "wiener series",
        "domain": dmeta,
        "M": args.M,
        "point": list(point.x) + [point.t],
        "lam": args.lam,
        "terms": args.terms,
        "mode": args.mode,
        "a": args.a,
        "depth": args.depth,
        "base_radius": args.base_radius,
    }
    payload = dict(config, partial_sums=list(sums))
    rows = tuple((k + 1, s) for k, s in enumerate(sums))
    _emit(args, "wiener series", config, payload, {"series": (("k", "partial_sum"), rows)})
    return 0


_SCENARIO_PATH_DEFAULTS = {
    "complement-cube": 20_000,
    "sparse-cubes": 20_000,
    "petrovsky": 4_000,
    "validation": 0,
}


def _scenario_config(args: argparse.Namespace, seed: int) -> dict:
    name = args.name
    paths = args.paths if args.paths is not None else _SCENARIO_PATH_DEFAULTS[name]
    if name == "complement-cube":
        R_list = _floats(args.radii) if args.radii else [8.0, 16.0, 32.0, 64.0]
        return {
            "scenario": name,
            "n": args.n,
            "R_list": R_list,
            "n_paths": paths,
            "seed": seed,
        }
    if name == "sparse-cubes":
        schedule = _floats(args.radii) if args.radii else [16.0, 64.0, 256.0, 1024.0]
        J = args.J if args.J is not None else len(schedule)
        return {
            "scenario": name,
            "n": args.n,
            "R_schedule": schedule,
            "J": J,
            "n_paths": paths,
            "seed": seed,
        }
    if name == "petrovsky":
        M_list = _floats(args.M_list) if args.M_list else [1.0, 0.5]
        ladder = (
            _floats(args.delta_ladder)
            if args.delta_ladder
            else [0.5, 0.35, 0.25, 0.18, 0.12, 0.08]
        )
        return {
            "scenario": name,
            "M_list": M_list,
            "delta_ladder": ladder,
            "n_paths": paths,
            "seed": seed,
        }
    return {"scenario": "validation", "seed": seed}


def _print_result_lines(result) -> None:
    for c in result.checks:
        status = "PASS" if c["passed"] else "FAIL"
        sys.stdout.write(f"{status} {c['name']}: {c['detail']}\n")
    for m in result.measurements:
        se = "" if m["se"] is None else f" +- {m['se']!r}"
        sys.stdout.write(f"  {m['name']} = {m['value']!r}{se}\n")
    verdict = "passed" if result.passed else "failed"
    sys.stdout.write(f"{result.scenario}: {verdict}\n")


def _run_and_report(args: argparse.Namespace, config: dict) -> int:
    result = run_scenario(config, workers=args.workers)
    if args.format == "csv":
        name, (header, rows) = next(iter(result.tables.items()))
        sys.stdout.write(format_csv(header, rows))
    elif args.format == "json":
        sys.stdout.write(canonical_json(result.to_json()))
    else:
        _print_result_lines(result)
    if args.out_dir is not None:
        out = Path(args.out_dir)
        written = write_result(result, out, figures=not args.no_figures)
        manifest = RunManifest.create(
            f"scenario {result.scenario}",
            result.config,
            config.get("seed"),
            __version__,
            [p.name for p in written],
        )
        manifest.write(out)
    return 0 if result.passed else 1


def _cmd_scenario(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    return _run_and_report(args, _scenario_config(args, seed))


def _cmd_validate(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    return _run_and_report(args, {"scenario": "validation", "seed": seed})


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, *, walk: bool = False) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (required for randomized commands)")
    p.add_argument("--out-dir", default=None, help="directory for artifacts plus a manifest")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="stdout format")
    p.add_argument("--workers", type=int, default=1, help="deterministic worker count")
    if walk:
        p.add_argument("--paths", type=int, default=1000, help="Monte Carlo path count")
        p.add_argument("--boundary-tol", type=float, default=1e-4, help="exit classification tolerance")
        p.add_argument("--dt-max", type=float, default=float("inf"), help="time step ceiling")
        p.add_argument("--time-floor", type=float, default=float("-inf"), help="truncate paths below this time")
        p.add_argument("--max-steps", type=int, default=200_000, help="per-path step budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caloric",
        description="numerical laboratory for caloric measure on space-time domains",
    )
    parser.add_argument("--version", action="version", version=f"caloric {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    kernel = sub.add_parser("kernel", help="source-solution kernels")
    ksub = kernel.add_subparsers(dest="subcommand", required=True)
    keval = ksub.add_parser("eval", help="evaluate the kernel at one target/source pair")
    keval.add_argument("--M", type=float, required=True, help="diffusivity")
    keval.add_argument("--n", type=int, default=None, help="spatial dimension (inferred from the points)")
    keval.add_argument("--target", required=True, help="target point x,..,t")
    keval.add_argument("--source", required=True, help="source point y,..,s")
    _add_common(keval)
    keval.set_defaults(func=_cmd_kernel_eval)

    cap = sub.add_parser("capacity", help="thermal capacity")
    csub = cap.add_subparsers(dest="subcommand", required=True)
    cest = csub.add_parser("estimate", help="LP lower bound for a sampled compact set")
    cest.add_argument("--set", required=True, help="compact-set JSON file")
    cest.add_argument("--M", type=float, default=1.0, help="kernel diffusivity")
    _add_common(cest)
    cest.set_defaults(func=_cmd_capacity_estimate)

    con = sub.add_parser("content", help="parabolic Hausdorff content")
    consub = con.add_subparsers(dest="subcommand", required=True)
    cone = consub.add_parser("estimate", help="cover upper bound and Frostman lower bound")
    cone.add_argument("--set", required=True, help="compact-set JSON file")
    cone.add_argument("--s", type=float, required=True, help="content exponent")
    _add_common(cone)
    cone.set_defaults(func=_cmd_content_estimate)

    chk = sub.add_parser("check", help="time-backwards density conditions")
    chsub = chk.add_subparsers(dest="condition", required=True)
    for cond in ("tbhcc", "tbcdc"):
        c = chsub.add_parser(cond, help=f"{cond.upper()} report over boundary samples")
        c.add_argument("--domain", required=True, help="bundled name or DSL file")
        c.add_argument("--scales", required=True, help="comma-separated radii")
        c.add_argument("--sigma-count", type=int, default=6, help="boundary sample size")
        c.add_argument("--depth", type=int, default=3 if cond == "tbhcc" else 2)
        if cond == "tbhcc":
            c.add_argument("--eps", type=float, default=1.0, help="content exponent offset")
        else:
            c.add_argument("--M", type=float, default=1.0, help="kernel diffusivity")
            c.add_argument("--a", type=float, default=0.5, help="reference subdivision ratio")
        _add_common(c)
        c.set_defaults(func=_cmd_check)

    meas = sub.add_parser("measure", help="exit measures")
    msub = meas.add_subparsers(dest="subcommand", required=True)
    mest = msub.add_parser("estimate", help="Monte Carlo exit measure from one pole")
    mest.add_argument("--domain", required=True, help="bundled name or DSL file")
    mest.add_argument("--operator", default=None, help="operator JSON file")
    mest.add_argument("--pole", required=True, help="pole point x,..,t")
    mest.add_argument("--lattice-h", type=float, default=None, help="use the lattice walker at this mesh")
    _add_common(mest, walk=True)
    mest.set_defaults(func=_cmd_measure_estimate)

    dir_ = sub.add_parser("dirichlet", help="Dirichlet problem")
    dsub = dir_.add_subparsers(dest="subcommand", required=True)
    dsolve = dsub.add_parser("solve", help="Monte Carlo solution values at poles")
    dsolve.add_argument("--domain", required=True, help="bundled name or DSL file")
    dsolve.add_argument("--operator", default=None, help="operator JSON file")
    dsolve.add_argument("--datum", required=True, help="const:V, bump:.. or outside_cube:..")
    dsolve.add_argument("--pole", action="append", required=True, help="pole point (repeatable)")
    dsolve.add_argument("--infinity-value", type=float, default=None, help="datum value at infinity")
    _add_common(dsolve, walk=True)
    dsolve.set_defaults(func=_cmd_dirichlet_solve)

    wie = sub.add_parser("wiener", help="capacity series")
    wsub = wie.add_subparsers(dest="subcommand", required=True)
    wser = wsub.add_parser("series", help="partial sums of the shell capacity series")
    wser.add_argument("--domain", required=True, help="bundled name or DSL file")
    wser.add_argument("--M", type=float, default=1.0, help="kernel diffusivity")
    wser.add_argument("--point", required=True, help="boundary point x,..,t")
    wser.add_argument("--lam", type=float, default=0.5, help="shell ratio in (0, 1)")
    wser.add_argument("--terms", type=int, default=8, help="number of partial sums")
    wser.add_argument("--mode", choices=("heat_ball", "cylinder"), default="heat_ball")
    wser.add_argument("--a", type=float, default=0.5, help="cylinder subdivision ratio")
    wser.add_argument("--depth", type=int, default=2, help="rasterization depth")
    wser.add_argument("--base-radius", type=float, default=1.0, help="outer shell radius")
    _add_common(wser)
    wser.set_defaults(func=_cmd_wiener_series)

    sce = sub.add_parser("scenario", help="packaged experiments")
    sce.add_argument(
        "name",
        choices=("complement-cube", "sparse-cubes", "petrovsky", "validation"),
        help="scenario to run",
    )
    sce.add_argument("--n", type=int, default=1, help="spatial dimension")
    sce.add_argument("--radii", default=None, help="comma-separated pole radii (decay scenarios)")
    sce.add_argument("--J", type=int, default=None, help="obstacle count (sparse cubes)")
    sce.add_argument("--M-list", default=None, help="comma-separated diffusivities (petrovsky)")
    sce.add_argument("--delta-ladder", default=None, help="comma-separated pole offsets (petrovsky)")
    sce.add_argument("--paths", type=int, default=None, help="Monte Carlo path count")
    sce.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    _add_common(sce)
    sce.set_defaults(func=_cmd_scenario)

    val = sub.add_parser("validate", help="fast deterministic self-check bundle")
    val.add_argument("--paths", type=int, default=None, help=argparse.SUPPRESS)
    val.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    _add_common(val)
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"caloric: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"caloric: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
