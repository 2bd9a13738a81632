"""Experiment runner: config in, grids and CSV reports out.

Every report embeds the config hash and seed; identical config + seed gives
bit-identical files (wall-clock timings never enter file outputs).  Exit
codes by failure class: 2 config, 3 kernel/extension validation, 4 solver,
5 fit/verification, 6 io.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .barriers import (
    BarrierError,
    cone_supersolution,
    exp_cusp_barrier,
    power_regularized_barriers,
    traveling_cone_subsolution,
    verify_inequality,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .expr import Expression
from .free_boundary import (
    BoundaryError,
    FitError,
    analyze_boundary,
    blow_up_rescale,
    fit_1d_profile,
)
from .grids import write_grid
from .harnack import HarnackError, HarnackScenario, run_harnack
from .kernels import Density, KernelError, make_kernel, symbol
from .metrics import fit_time_regularity, global_gradient_holder, predicted_time_exponent
from .operator import ExtensionError
from .profiles import gamma_critical, gamma_elliptic
from .solver import (
    ObstacleProblem,
    SolverError,
    solve_elliptic_obstacle,
    solve_parabolic_obstacle,
)

CSV_VERSION = "# fbreg-csv v1"


class CliError(RuntimeError):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


def g17(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(path: Path, columns, rows, cfg_hash: str, seed: int):
    lines = [CSV_VERSION, f"# config {cfg_hash}", f"# seed {seed}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(g17(v) for v in row))
    path.write_bytes(("\r\n".join(lines) + "\r\n").encode())


def parse_density(spec: str) -> Density | None:
    if spec == "isotropic":
        return None
    if spec.startswith("constant:"):
        return Density(base=float(spec.split(":", 1)[1]), label=spec)
    if spec.startswith("harmonic:"):
        c2 = c3 = 0.0
        for part in spec.split(":", 1)[1].split(","):
            key, _, val = part.partition("=")
            if key.strip() == "c2":
                c2 = float(val)
            elif key.strip() == "c3":
                c3 = float(val)
            else:
                raise KernelError(f"unknown density parameter {key!r}")
        return Density(base=1.0, c2=c2, c3=c3, label=spec)
    raise KernelError(f"unknown density spec {spec!r}")


def build_kernel(cfg: ExperimentConfig):
    k = cfg.values["kernel"]
    lam = k["lambda"] or None
    Lam = k["Lambda"] or None
    drift = k["drift"] if k["drift"] else None
    return make_kernel(
        k["s"], lam=lam, Lam=Lam, density=parse_density(k["density"]),
        drift=drift, dim=k["dim"],
    )


def build_problem(cfg: ExperimentConfig, kernel) -> ObstacleProblem:
    g = cfg.values["grid"]
    o = cfg.values["obstacle"]
    expr = Expression(o["expr"])
    horizon = g["horizon"] if g["horizon"] > 0 else None
    steps = g["steps"] if horizon else None
    return ObstacleProblem(
        kernel=kernel,
        obstacle=expr.as_field(kernel.dim),
        extent=g["extent"],
        nodes=g["nodes"],
        horizon=horizon,
        steps=steps,
        obstacle_growth=o["growth"],
        obstacle_scale=o["scale"],
    )


def directions_from_config(cfg: ExperimentConfig, dim: int):
    raw = cfg.values["run"]["directions"]
    if dim == 1:
        return [np.array([1.0 if a >= 0 else -1.0]) for a in (raw or (0.0,))]
    return [np.array([math.cos(a), math.sin(a)]) for a in (raw or (0.0,))]


# ---------------------------------------------------------------------------
# scenario runners (each returns (summary, files))


def run_gamma(cfg, kernel, outdir, prefix, seed):
    rows = []
    for e in directions_from_config(cfg, kernel.dim):
        sym = symbol(kernel, e, cfg.values["run"]["magnitude"])
        for v in cfg.values["run"]["speeds"]:
            if kernel.symmetric and not kernel.has_drift and abs(kernel.s - 0.5) < 1e-12:
                gam = gamma_critical(kernel, e, v)
            else:
                gam = gamma_elliptic(kernel, e)
            rows.append(tuple(e) + (v, sym.A, sym.B, gam))
    cols = [f"e{i}" for i in range(kernel.dim)] + ["v", "A", "B", "gamma"]
    path = outdir / f"{prefix}_gamma.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    return f"gamma: {len(rows)} rows", [path]


def run_symbol(cfg, kernel, outdir, prefix, seed):
    rows = []
    mag = cfg.values["run"]["magnitude"]
    for e in directions_from_config(cfg, kernel.dim):
        sym = symbol(kernel, e, mag)
        rows.append(tuple(e) + (mag, sym.A, sym.B, sym.err_A, sym.resolution))
    cols = [f"e{i}" for i in range(kernel.dim)] + ["magnitude", "A", "B", "err_A", "resolution"]
    path = outdir / f"{prefix}_symbol.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    return f"symbol: {len(rows)} directions", [path]


def run_solve(cfg, kernel, outdir, prefix, seed):
    problem = build_problem(cfg, kernel)
    tol = cfg.values["run"]["tol"]
    if problem.is_parabolic:
        u, report = solve_parabolic_obstacle(problem, tol=tol)
    else:
        u, report = solve_elliptic_obstacle(problem, tol=tol)
    grid_path = outdir / f"{prefix}_solution.fbrg"
    write_grid(grid_path, u)
    fields = report.csv_fields()
    csv_path = outdir / f"{prefix}_solve.csv"
    write_csv(csv_path, list(fields), [tuple(fields.values())], cfg.hash(), seed)
    summary = (
        f"solve: residual {report.residual:.3e} in {report.iterations} sweeps, "
        f"wall {report.wall_time:.2f}s"
    )
    return summary, [grid_path, csv_path]


def run_fit_exponent(cfg, kernel, outdir, prefix, seed):
    problem = build_problem(cfg, kernel)
    tol = cfg.values["run"]["tol"]
    if problem.is_parabolic:
        u, _ = solve_parabolic_obstacle(problem, tol=tol)
    else:
        u, _ = solve_elliptic_obstacle(problem, tol=tol)
    grid = problem.grid()
    spatial = grid.time_slice(0) if grid.has_time else grid
    coords = spatial.meshgrid()
    pts = np.stack([c.reshape(-1) for c in coords], axis=-1)
    phi = problem.obstacle(pts, None).reshape(spatial.values.shape)
    if u.has_time:
        phi = np.repeat(phi[..., None], u.values.shape[-1], axis=-1)
    run = cfg.values["run"]
    points = analyze_boundary(
        u, phi, kernel,
        gap_tol=run["gap_tol"],
        r_min=run["r_min"] or None,
        r_max=run["r_max"] or None,
        max_points=run["max_points"],
        seed=seed,
        time_window=tuple(run["window"]) if run["window"] else None,
    )
    def _pad_spacetime(vec):
        # columns are (x, y, t): missing axes sit in the middle
        vec = list(vec)
        if not vec:
            return [math.nan] * 3
        if u.has_time:
            space, tail = vec[:-1], [vec[-1]]
        else:
            space, tail = vec, [math.nan]
        return space + [math.nan] * (2 - len(space)) + tail

    rows = []
    for p in points:
        loc = _pad_spacetime(p.location)
        nu = _pad_spacetime(p.normal)
        rows.append(
            tuple(loc[:3]) + tuple(nu[:3]) + (
                p.speed, p.beta, p.r2, str(p.classification),
                p.gamma_pred if p.gamma_pred is not None else math.nan,
                p.kappa if p.kappa is not None else math.nan,
                p.lip_distance if p.lip_distance is not None else math.nan,
            )
        )
    cols = ["x0", "y0", "t0", "nu_x", "nu_y", "nu_t", "v0", "beta", "r2",
            "class", "gamma_pred", "kappa", "lip_distance"]
    path = outdir / f"{prefix}_points.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    n_reg = sum(1 for p in points if p.classification.kind == "regular")
    return f"fit-exponent: {len(points)} points, {n_reg} regular", [path]


def run_blowup(cfg, kernel, outdir, prefix, seed):
    problem = build_problem(cfg, kernel)
    u, _ = (
        solve_parabolic_obstacle(problem, tol=cfg.values["run"]["tol"])
        if problem.is_parabolic
        else solve_elliptic_obstacle(problem, tol=cfg.values["run"]["tol"])
    )
    grid = problem.grid()
    spatial = grid.time_slice(0) if grid.has_time else grid
    coords = spatial.meshgrid()
    pts = np.stack([c.reshape(-1) for c in coords], axis=-1)
    phi = problem.obstacle(pts, None).reshape(spatial.values.shape)
    if u.has_time:
        phi = np.repeat(phi[..., None], u.values.shape[-1], axis=-1)
    w = u.map_like(u.values - phi)
    run = cfg.values["run"]
    point = run["blowup_point"]
    if not point:
        raise ConfigError("blowup scenario needs run.blowup_point", code="E_MISSING")
    rows = []
    for r in run["blowup_radii"]:
        resc = blow_up_rescale(w, point, r, norm_mode=run["norm_mode"])
        prof, lip = fit_1d_profile(resc, kernel)
        rows.append((r, prof.kappa, prof.v, prof.gamma) + tuple(prof.e) + (lip,))
    cols = ["r", "kappa", "v", "gamma"] + [f"e{i}" for i in range(kernel.dim)] + ["lip_distance"]
    path = outdir / f"{prefix}_blowup.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    return f"blowup: {len(rows)} radii at {tuple(point)}", [path]


def _barrier_samples(cfg, kernel, seed):
    rng = np.random.default_rng(seed)
    b = cfg.values["barrier"]
    kind = b["kind"]
    if kind == "exp-cusp":
        pts = np.linspace(-1.5, 1.5, 25)[:, None]
        pts = pts[np.abs(pts[:, 0]) > 0.1]
        if kernel.dim == 2:
            pts = np.concatenate([pts, np.zeros_like(pts)], axis=1)
        bar = exp_cusp_barrier(
            [1.0] + [0.0] * (kernel.dim - 1), theta=b["theta"],
            v=b["speed"] if abs(kernel.s - 0.5) < 1e-12 else 0.0,
            parabolic=abs(kernel.s - 0.5) < 1e-12 and b["speed"] > 0,
        )
        times = [0.0] if bar.claim.operator == "L" else [-0.5, 0.0]
        return bar, pts, times
    if kind == "cone-super":
        e = np.array([1.0] + [0.0] * (kernel.dim - 1))
        bar = cone_supersolution(e, b["eta"], b["theta"])
        pts = []
        while len(pts) < 24:
            cand = rng.uniform(-2, 2, size=(200, kernel.dim))
            r = np.linalg.norm(cand, axis=1)
            ok = (r > 0.15) & (r < 1.9) & bar.validity(cand)
            pts.extend(cand[ok].tolist())
        return bar, np.asarray(pts[:24]), [0.0]
    if kind == "traveling-cone-sub":
        e = np.array([1.0] + [0.0] * (kernel.dim - 1))
        bar = traveling_cone_subsolution(kernel.s, e, b["omega"], b["theta0"], b["gamma"])
        cand = rng.uniform(-0.9, 0.9, size=(48, kernel.dim))
        cand = cand[np.linalg.norm(cand, axis=1) < 0.95][:20]
        return bar, cand, [-0.75, -0.35, -0.1]
    if kind == "power-regularized":
        phi1, phi2 = power_regularized_barriers(
            kernel, [1.0] + [0.0] * (kernel.dim - 1), b["speed"], b["eps"], b["amplitude"]
        )
        pts = np.linspace(0.02, 0.3, 10)[:, None]
        if kernel.dim == 2:
            pts = np.concatenate([pts, np.zeros_like(pts)], axis=1)
        return (phi1, phi2), pts, [0.0, 0.1]
    raise ConfigError(f"unknown barrier kind {kind!r}", code="E_VALUE")


def run_verify_barrier(cfg, kernel, outdir, prefix, seed):
    b = cfg.values["barrier"]
    bar, pts, times = _barrier_samples(cfg, kernel, seed)
    barriers = bar if isinstance(bar, tuple) else (bar,)
    rows = []
    ok = True
    for tag, barrier in enumerate(barriers):
        rep = verify_inequality(
            kernel, barrier, pts, sample_times=times,
            refinement_levels=b["levels"], h0=b["h0"],
        )
        ok = ok and rep.passed
        for level, (hh, margin, obs) in enumerate(
            zip(rep.spacings, rep.margins, rep.observed)
        ):
            rows.append((barrier.kind, tag, level, hh, margin, obs,
                         int(rep.passed), int(rep.stable)))
    cols = ["kind", "member", "level", "h", "margin", "observed", "passed", "stable"]
    path = outdir / f"{prefix}_barrier.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    return f"verify-barrier: {b['kind']} passed={ok}", [path]


def run_harnack_scenario(cfg, kernel, outdir, prefix, seed):
    h = cfg.values["harnack"]
    g = cfg.values["grid"]
    scen = HarnackScenario(
        kernel=kernel,
        opening=h["opening"],
        speed=h["speed"],
        extent=g["extent"],
        nodes=g["nodes"],
        horizon=g["horizon"],
        steps=g["steps"],
        direction=tuple([1.0] + [0.0] * (kernel.dim - 1)),
        n_radii=h["n_radii"],
    )
    rep = run_harnack(scen)
    rows = [
        (r, osc, rep.alpha_obs, rep.r2, rep.comparability[0], rep.comparability[1],
         rep.excluded_cells)
        for r, osc in zip(rep.radii, rep.oscillations)
    ]
    cols = ["r", "osc", "alpha_obs", "r2", "comp_12", "comp_21", "excluded"]
    path = outdir / f"{prefix}_harnack.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    return f"harnack: alpha_obs={rep.alpha_obs:.4f} r2={rep.r2:.3f}", [path]


def run_regularity(cfg, kernel, outdir, prefix, seed):
    problem = build_problem(cfg, kernel)
    u, _ = solve_parabolic_obstacle(problem, tol=cfg.values["run"]["tol"])
    run = cfg.values["run"]
    window = tuple(run["window"]) if run["window"] else None
    trep = fit_time_regularity(u, eps=run["eps"], window=window)
    grad = global_gradient_holder(u.time_slice(u.values.shape[-1] - 1), kernel.s)
    rows = [(
        kernel.s, trep.measured, trep.predicted,
        predicted_time_exponent(kernel.s, run["eps"]), grad.value,
    )]
    cols = ["s", "measured_dt_exponent", "predicted", "predicted_min", "grad_holder"]
    path = outdir / f"{prefix}_regularity.csv"
    write_csv(path, cols, rows, cfg.hash(), seed)
    return (
        f"regularity: measured {trep.measured:.3f} vs predicted {trep.predicted:.3f}"
    ), [path]


RUNNERS = {
    "gamma": run_gamma,
    "symbol": run_symbol,
    "solve-elliptic": run_solve,
    "solve-parabolic": run_solve,
    "fit-exponent": run_fit_exponent,
    "blowup": run_blowup,
    "verify-barrier": run_verify_barrier,
    "harnack": run_harnack_scenario,
    "regularity": run_regularity,
}


def run(cfg: ExperimentConfig, outdir, seed=None):
    """Dispatch a parsed config; returns (summary, written files)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = cfg.values["main"]["seed"] if seed is None else seed
    prefix = cfg.values["main"]["out_prefix"]
    try:
        kernel = build_kernel(cfg)
    except KernelError as exc:
        raise CliError(f"kernel: {exc}", 3) from exc
    try:
        summary, files = RUNNERS[cfg.scenario](cfg, kernel, outdir, prefix, seed)
    except (KernelError, ExtensionError) as exc:
        raise CliError(f"validation: {exc}", 3) from exc
    except (SolverError, HarnackError) as exc:
        raise CliError(f"solver: {exc}", 4) from exc
    except (BarrierError, BoundaryError, FitError) as exc:
        raise CliError(f"fit: {exc}", 5) from exc
    except OSError as exc:
        raise CliError(f"io: {exc}", 6) from exc
    return summary, files


SUBCOMMANDS = (
    "solve", "fit-exponent", "blowup", "verify-barrier", "gamma", "symbol",
    "harnack", "regularity",
)

_COMMAND_SCENARIOS = {
    "solve": ("solve-elliptic", "solve-parabolic"),
    "fit-exponent": ("fit-exponent",),
    "blowup": ("blowup",),
    "verify-barrier": ("verify-barrier",),
    "gamma": ("gamma",),
    "symbol": ("symbol",),
    "harnack": ("harnack",),
    "regularity": ("regularity",),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fbreg",
        description="nonlocal obstacle-problem laboratory: solves, exponents, "
                    "barriers, boundary-Harnack experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="reserved; execution is sequential at desk scale")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 6
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.scenario not in _COMMAND_SCENARIOS[args.command]:
        print(
            f"error: [E_SCENARIO] config scenario {cfg.scenario!r} does not "
            f"match subcommand {args.command!r}",
            file=sys.stderr,
        )
        return 2
    try:
        summary, files = run(cfg, args.out, seed=args.seed)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"{summary} [config {cfg.hash()}] -> {', '.join(str(f) for f in files)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
