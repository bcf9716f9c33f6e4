"""Command-line front end: parse a flat config, compute, emit CSV and SVG.

Commands::

    simulate | compare-map | atlas | regions | fixed-points | freqlock |
    pendulum | curve | manifolds | lyapunov

Every command reads a ``key = value`` config file ('#' starts a comment) and
writes its results under ``--out``.  Exit codes: 0 on success, 2 on a
configuration or parameter error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import attractor, bifurcation, flow, output
from .returnmap import CylinderPoint, MapParams, cylinder_step
from .system import ParameterError, SystemParams, derive_constants

__all__ = ["main", "parse_config", "ConfigError"]


class ConfigError(ValueError):
    """Missing or malformed configuration."""


def parse_config(path) -> dict:
    """Parse a flat key = value file; values become float, list or str."""
    cfg: dict = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        cfg[key] = _parse_value(value)
    return cfg


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(part.strip()) for part in text.split(",") if part.strip()]
    return _parse_scalar(text)


def _parse_scalar(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _require(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    return [cfg[k] for k in keys]


def _system_params(cfg: dict) -> SystemParams:
    alpha, beta, gamma, omega = _require(cfg, "alpha", "beta", "gamma", "omega")
    return SystemParams(alpha=alpha, beta=beta, gamma=gamma, omega=omega)


def _map_params(cfg: dict) -> MapParams:
    if "K" in cfg:
        K, delta, omega, gamma, k1 = _require(cfg, "K", "delta", "omega", "gamma", "k1")
        return MapParams(K=K, delta=delta, omega=omega, gamma=gamma, k1=k1)
    p = _system_params(cfg)
    override = cfg.get("k1_override")
    return MapParams.from_system(
        p, eps=cfg.get("eps", 1.0), k1_override=override
    )


def _integrator_config(cfg: dict) -> flow.IntegratorConfig:
    return flow.IntegratorConfig(
        rel_tol=cfg.get("rel_tol", 1e-10),
        abs_tol=cfg.get("abs_tol", 1e-12),
        eps=cfg.get("eps", 0.1),
        max_time=cfg.get("max_time", 200.0),
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path, args) -> int:
    p = _system_params(cfg)
    icfg = _integrator_config(cfg)
    t0 = cfg.get("t0", 0.0)
    t1 = cfg.get("t1", 100.0)
    if "x0" in cfg:
        u0 = np.array([cfg["x0"], cfg["y0"], cfg["z0"]])
    else:
        u0 = flow.sphere_point(cfg.get("y_start", 1e-3), icfg.eps)
    traj = flow.integrate(u0, t0, t1, p, icfg)
    radius = traj.radius
    output.write_csv(
        out / "trajectory.csv",
        ["t", "x", "y", "z", "r"],
        (
            (float(t), float(u[0]), float(u[1]), float(u[2]), float(r))
            for t, u, r in zip(traj.t, traj.states, radius)
        ),
    )
    crossings = flow.section_crossing_log(traj, p, icfg)
    output.write_csv(
        out / "sections.csv",
        ["section", "t", "c1", "c2"],
        ((sp.section, sp.time, sp.c1, sp.c2) for sp in crossings),
    )
    fig = output.new_figure()
    ax = fig.add_subplot(111)
    for idx, name in enumerate("xyz"):
        ax.plot(traj.t, traj.states[:, idx], label=name, linewidth=0.8)
    ax.set_xlabel("t")
    ax.legend(loc="upper right")
    output.save_svg(fig, out / "trajectory.svg")
    return 0


def _one_return(task):
    s, y, w, p, icfg = task
    sample = flow.numerical_return(s, y, w, p, icfg)
    return sample.s, sample.y, sample.w, sample.return_time


def cmd_compare_map(cfg: dict, out: Path, args) -> int:
    p = _system_params(cfg)
    icfg = _integrator_config(cfg)
    dc = derive_constants(p)
    mp = MapParams.from_system(p, dc, eps=icfg.eps,
                               k1_override=cfg.get("k1_override"))
    n_s = int(cfg.get("n_s", 10))
    n_y = int(cfg.get("n_y", 10))
    y_lo = cfg.get("y_min", 1e-3)
    y_hi = cfg.get("y_max", icfg.eps / 2.0)
    s_grid = np.linspace(0.0, math.pi / p.omega, n_s, endpoint=False)
    y_grid = np.geomspace(y_lo, y_hi, n_y)
    tasks = [
        (float(s), float(y), float(flow.sphere_point(y, icfg.eps)[2] - 1.0), p, icfg)
        for s in s_grid
        for y in y_grid
    ]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_one_return, tasks))
    else:
        results = [_one_return(t) for t in tasks]
    rows = []
    errors = []
    for (s, y, _w, _p, _cfg), (s_ret, y_ret, _w_ret, t_ret) in zip(tasks, results):
        y_scaled = y / icfg.eps
        _s_pred, y_pred = cylinder_step(s, y_scaled, mp)
        y_num = y_ret / icfg.eps
        err = abs(y_num - y_pred)
        errors.append(err)
        rows.append((s, y_scaled, y_pred, y_num, err))
    output.write_csv(
        out / "compare.csv", ["s", "y", "y_analytic", "y_numeric", "abs_err"], rows
    )
    errors = np.asarray(errors)
    y_pred_all = np.asarray([r[2] for r in rows])
    rel = errors / np.abs(y_pred_all)
    summary = [
        ("median_abs_err", float(np.median(errors))),
        ("median_rel_err", float(np.median(rel))),
        ("q90_rel_err", float(np.quantile(rel, 0.9))),
        ("max_rel_err", float(np.max(rel))),
    ]
    output.write_csv(out / "summary.csv", ["stat", "value"], summary)
    for stat, value in summary:
        print(f"{stat} = {value:.6g}")
    return 0


def _atlas_curves(mp: MapParams, gammas) -> list[tuple]:
    rows = []
    for gamma in gammas:
        mpg = mp.with_gamma(float(gamma))
        try:
            times = bifurcation.saddle_node_times(mpg)
        except ValueError:
            continue
        for T in times:
            for rec in bifurcation.fixed_points_at(T, mpg):
                rows.append(
                    (mp.k1, float(gamma), T, rec.s, rec.y, "saddle_node", rec.branch)
                )
    hopf = bifurcation.hopf_locus(mp, gammas)
    for sample in hopf.samples:
        rows.append(
            (mp.k1, sample["gamma"], sample["T"], sample["s"], sample["y"],
             "hopf", "-")
        )
    for bt in bifurcation.bt_points(mp):
        rows.append((mp.k1, bt.gamma, bt.T, bt.s, bt.y, "bt", "-"))
    return rows


def cmd_atlas(cfg: dict, out: Path, args) -> int:
    K, delta, omega = _require(cfg, "K", "delta", "omega")
    k1_values = cfg.get("k1", [0.5, 2.0])
    if not isinstance(k1_values, list):
        k1_values = [k1_values]
    base = MapParams(K=K, delta=delta, omega=omega, gamma=1e-3, k1=1.0)
    m = bifurcation.peak_level(base)
    n_gamma = int(cfg.get("n_gamma", 40))
    fig = output.new_figure(7.0, 5.0)
    ax = fig.add_subplot(111)
    for k1 in k1_values:
        mp = MapParams(K=K, delta=delta, omega=omega, gamma=1e-3, k1=float(k1))
        gamma_hi = cfg.get("gamma_max", min(2.0 * m, m / abs(1.0 - k1) * 1.5
                                            if k1 != 1.0 else 2.0 * m))
        gammas = np.linspace(gamma_hi / n_gamma, gamma_hi, n_gamma)
        gammas = np.unique(np.append(gammas, [m / (1.0 + k1)]))
        rows = _atlas_curves(mp, gammas)
        output.write_csv(
            out / f"curves_k1_{k1:g}.csv",
            ["k1", "gamma", "T", "s", "y", "kind", "branch"],
            rows,
        )
        for kind, marker in (("saddle_node", "."), ("hopf", "x"), ("bt", "o")):
            pts = [(r[2], r[1]) for r in rows if r[5] == kind]
            if pts:
                ts, gs = zip(*pts)
                ax.plot(ts, gs, marker, markersize=3,
                        label=f"{kind} k1={k1:g}")
    ax.set_xlabel("T")
    ax.set_ylabel("gamma")
    ax.legend(fontsize=7)
    output.save_svg(fig, out / "atlas.svg")
    _write_region_grid(cfg, out, K, delta, omega)
    return 0


def _write_region_grid(cfg, out, K, delta, omega):
    n = int(cfg.get("n_region", 20))
    base = MapParams(K=K, delta=delta, omega=omega, gamma=1e-3, k1=1.0)
    m = bifurcation.peak_level(base)
    k1_grid = np.linspace(2.0 / n, 2.0, n)
    gamma_grid = np.linspace(2.0 * m / n, 2.0 * m, n)
    rows = []
    for k1 in k1_grid:
        for gamma in gamma_grid:
            mp = MapParams(K=K, delta=delta, omega=omega,
                           gamma=float(gamma), k1=float(k1))
            rows.append((float(k1), float(gamma),
                         bifurcation.classify_region(mp).label))
    output.write_csv(out / "regions.csv", ["k1", "gamma", "region"], rows)


def cmd_regions(cfg: dict, out: Path, args) -> int:
    K, delta, omega = _require(cfg, "K", "delta", "omega")
    _write_region_grid(cfg, out, K, delta, omega)
    return 0


def _record_rows(records):
    for rec in records:
        lam1, lam2 = rec.eigenvalues
        yield (
            rec.T, rec.s, rec.y, rec.branch, rec.stability,
            lam1.real, lam1.imag, lam2.real, lam2.imag,
        )


_RECORD_HEADER = [
    "T", "s", "y", "branch", "stability",
    "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im",
]


def cmd_fixed_points(cfg: dict, out: Path, args) -> int:
    mp = _map_params(cfg)
    (T,) = _require(cfg, "T")
    records = bifurcation.fixed_points_at(float(T), mp)
    output.write_csv(out / "fixed_points.csv", _RECORD_HEADER, _record_rows(records))
    return 0


def cmd_freqlock(cfg: dict, out: Path, args) -> int:
    mp = _map_params(cfg)
    n = int(cfg.get("n", 1))
    records = bifurcation.frequency_locked(n, mp)
    output.write_csv(out / "freqlock.csv", _RECORD_HEADER, _record_rows(records))
    return 0


def cmd_pendulum(cfg: dict, out: Path, args) -> int:
    mp = _map_params(cfg)
    ell = int(cfg.get("ell", 1))
    pp = bifurcation.pendulum_reduction(ell, mp, tol=cfg.get("centre_tol", 1e-6))
    output.write_csv(
        out / "pendulum.csv",
        ["A", "B", "tau_scale", "y_c", "s_c", "ell", "valid"],
        [(pp.A, pp.B, pp.tau_scale, pp.y_c, pp.s_c, pp.ell, pp.valid_pendulum)],
    )
    return 0


def cmd_curve(cfg: dict, out: Path, args) -> int:
    mp = _map_params(cfg)
    curve = attractor.invariant_curve(
        mp,
        grid_size=int(cfg.get("grid_size", 512)),
        tol=cfg.get("tol", 1e-8),
    )
    output.write_csv(
        out / "curve.csv", ["s", "h"],
        zip(curve.s.tolist(), curve.h.tolist()),
    )
    fig = output.new_figure()
    ax = fig.add_subplot(111)
    ax.plot(curve.s, curve.h, linewidth=1.0)
    ax.set_xlabel("s")
    ax.set_ylabel("h(s)")
    output.save_svg(fig, out / "curve.svg")
    print(f"residual = {curve.residual:.3e} after {curve.iterations} sweeps")
    return 0


def cmd_manifolds(cfg: dict, out: Path, args) -> int:
    mp = _map_params(cfg)
    (T,) = _require(cfg, "T")
    records = bifurcation.fixed_points_at(float(T), mp)
    saddle = next((r for r in records if r.stability == "saddle"), None)
    if saddle is None:
        raise ConfigError(f"no saddle fixed point at T={T}")
    polys = attractor.trace_manifolds(
        saddle, mp, arc_budget=cfg.get("arc_budget", 2.0)
    )
    rows = []
    for poly in polys:
        for idx, (s, y) in enumerate(poly.points):
            rows.append((poly.side, idx, float(s), float(y)))
    output.write_csv(out / "manifolds.csv", ["side", "idx", "s", "y"], rows)
    fig = output.new_figure()
    ax = fig.add_subplot(111)
    for poly in polys:
        style = "-" if poly.side.startswith("unstable") else "--"
        ax.plot(poly.points[:, 0] % mp.period, poly.points[:, 1], style,
                linewidth=0.7, label=poly.side)
    ax.plot([saddle.s], [saddle.y], "k*")
    ax.set_xlabel("s")
    ax.set_ylabel("y")
    ax.legend(fontsize=7)
    output.save_svg(fig, out / "manifolds.svg")
    return 0


def cmd_lyapunov(cfg: dict, out: Path, args) -> int:
    mp = _map_params(cfg)
    s0 = cfg.get("s0", 0.1)
    y0 = cfg.get("y0", 0.1)
    n_iter = int(cfg.get("n_iter", 4000))
    n_discard = int(cfg.get("n_discard", 500))
    T = cfg.get("T", 0.0)
    result = attractor.lyapunov_exponent(
        (s0, y0), mp, n_iter=n_iter, n_discard=n_discard, T=T, seed=args.seed
    )
    output.write_csv(
        out / "exponent.csv",
        ["lambda", "n_used", "truncated"],
        [(result.value, result.n_used, result.truncated)],
    )
    pt = CylinderPoint(s0, y0)
    from .returnmap import iterate_map

    orbit = iterate_map(mp, pt, min(n_iter, int(cfg.get("orbit_export", 1000))))
    output.write_csv(
        out / "orbit.csv", ["n", "s", "y"],
        ((i, p.s, p.y) for i, p in enumerate(orbit)),
    )
    print(f"lambda = {result.value:.6g} (n={result.n_used}, truncated={result.truncated})")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "compare-map": cmd_compare_map,
    "atlas": cmd_atlas,
    "regions": cmd_regions,
    "fixed-points": cmd_fixed_points,
    "freqlock": cmd_freqlock,
    "pendulum": cmd_pendulum,
    "curve": cmd_curve,
    "manifolds": cmd_manifolds,
    "lyapunov": cmd_lyapunov,
}

_NUMERICAL_FAILURES = (
    flow.IntegrationError,
    flow.SectionTimeoutError,
    flow.TransversalityError,
    attractor.GraphTransformError,
    attractor.ConvergenceError,
    attractor.DriftError,
    attractor.NoFixedPointsError,
    bifurcation.CentreError,
    ArithmeticError,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cylmap",
        description="Return-map and bifurcation toolkit for a periodically "
        "forced heteroclinic network",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        cfg = parse_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args)
    except (ConfigError, ParameterError, ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
