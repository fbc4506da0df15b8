"""Config-driven experiment pipelines with reproducible CSV/Markdown reports.

Config files are flat INI text ([run] names the pipeline and seed; one
section per pipeline holds its parameters). All randomness flows from the
single seed through numpy's seed-sequence spawning, results are assembled
in input order, and CSV floats are written with repr, so identical
configs give byte-identical outputs regardless of --threads.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis, eigen, exponents, functional, geometry
from .fem import ScalarField, SourceTerm, solve_poisson
from .mesh import TriMesh, refine_toward, triangulate


class PipelineError(RuntimeError):
    pass


class _Ctx:
    def __init__(self, cfg: configparser.ConfigParser, out: Path, seed: int, threads: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.threads = max(1, threads)
        self.report: list[str] = []
        self.log: dict = {"seed": seed, "threads": threads,
                          "versions": {"reiflab": __version__, "numpy": np.__version__}}

    def opt(self, section: str, key: str, default=None, cast=str):
        if self.cfg.has_option(section, key):
            raw = self.cfg.get(section, key)
            return cast(raw) if cast is not str else raw
        return default

    def pmap(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as ex:
            return list(ex.map(fn, items))

    def say(self, line: str):
        self.report.append(line)

    def check(self, ok: bool, name: str):
        self.say(f"- {'PASS' if ok else 'FAIL'}: {name}")
        if not ok:
            raise PipelineError(name)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


# ---------------------------------------------------------------------------
# domain / mesh / source construction from config


def _build_domain(ctx: _Ctx) -> geometry.PolygonalDomain:
    kind = ctx.opt("domain", "kind", "koch")
    r0 = ctx.opt("domain", "r0", None, float)
    if kind == "square":
        dom = geometry.square_domain(ctx.opt("domain", "side", 1.0, float), r0)
    elif kind == "disk":
        dom = geometry.disk_domain(ctx.opt("domain", "radius", 1.0, float),
                                   ctx.opt("domain", "segments", 512, int), r0)
    elif kind == "lshape":
        dom = geometry.lshape_domain(r0 if r0 is not None else 0.5)
    elif kind == "koch":
        base_kind = ctx.opt("domain", "base", "octagon")
        if base_kind == "square":
            base = geometry.square_domain(1.0, r0)
        else:
            k = 8 if base_kind == "octagon" else int(base_kind)
            base = geometry.regular_polygon_domain(k, 1.0, r0 if r0 is not None else 0.8)
        dom = geometry.generate_flat_fractal(
            base, ctx.opt("domain", "eta", 0.05, float),
            ctx.opt("domain", "depth", 2, int), seed=ctx.seed)
    else:
        raise PipelineError(f"unknown domain kind {kind!r}")
    ctx.log["domain"] = {"kind": kind, "vertices": dom.n_vertices, "r0": dom.r0}
    return dom


def _build_source(ctx: _Ctx) -> SourceTerm:
    descriptor = ctx.opt("solve", "f", "constant:1.0")
    kind, _, arg = descriptor.partition(":")
    if kind == "constant":
        return SourceTerm.constant(float(arg or 1.0))
    if kind == "radial_power":
        s, cx, cy = (arg.split(",") + ["0", "0"])[:3]
        return SourceTerm.radial_power((float(cx), float(cy)), float(s))
    if kind == "bump":
        h, r, cx, cy = (arg.split(",") + ["1", "0.2", "0", "0"])[:4]
        return SourceTerm.bump((float(cx), float(cy)), float(r), float(h))
    raise PipelineError(f"unknown source descriptor {descriptor!r}")


def _mesh_and_solve(ctx: _Ctx, dom):
    h = ctx.opt("mesh", "h", 0.04, float)
    mesh = triangulate(dom, h)
    f = _build_source(ctx)
    u = solve_poisson(mesh, f, ctx.opt("solve", "rel_tol", 1e-10, float))
    ctx.log["mesh"] = {"h_target": h, "n_points": mesh.n_points,
                       "n_triangles": mesh.n_triangles}
    ctx.log["solver"] = u.solver_stats
    return mesh, f, u


def _boundary_centers(dom, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fr = (np.arange(n) + rng.uniform(0.2, 0.8)) / n
    return dom.boundary_points_at(fr)


# ---------------------------------------------------------------------------
# pipelines


def _pipe_generate_domain(ctx: _Ctx) -> None:
    dom = _build_domain(ctx)
    dom.to_json(ctx.out / "domain.json")
    ctx.say(f"- domain: {dom.n_vertices} vertices, area {dom.area:.6g}, r0 {dom.r0}")


def _pipe_check_flatness(ctx: _Ctx):
    dom = _build_domain(ctx)
    scales_opt = ctx.opt("flatness", "scales", "")
    if scales_opt:
        scales = [float(s) for s in scales_opt.split(",")]
    else:
        scales = [dom.r0, dom.r0 / 2, dom.r0 / 4, dom.r0 / 8]
    rep = geometry.estimate_flatness(
        dom, scales,
        centers_per_scale=ctx.opt("flatness", "centers", 12, int),
        angular_resolution=ctx.opt("flatness", "angular_resolution", 48, int))
    rep.to_csv(ctx.out / "flatness.csv")
    ctx.say(f"- eps_global = {rep.eps_global:.4f} over {len(rep.samples)} samples")
    ctx.log["flatness"] = {"eps_global": rep.eps_global}
    return dom, rep


def _pipe_solve(ctx: _Ctx):
    dom = _build_domain(ctx)
    mesh, f, u = _mesh_and_solve(ctx, dom)
    mesh.save_off(ctx.out / "mesh.off")
    u.save_csv(ctx.out / "solution.csv")
    ctx.say(f"- solved on {mesh.n_points} vertices in "
            f"{u.solver_stats['iterations']} iterations")
    probe = ctx.opt("solve", "probe", "")
    if probe:
        x, y = (float(v) for v in probe.split(","))
        val = float(u.eval([[x, y]])[0])
        ctx.say(f"- u({x}, {y}) = {val!r}")
        ctx.log["probe"] = {"x": x, "y": y, "u": val}
    return dom, mesh, u


def _pipe_monotonicity(ctx: _Ctx) -> None:
    dom = _build_domain(ctx)
    mesh, f, u = _mesh_and_solve(ctx, dom)
    beta = ctx.opt("monotonicity", "beta", 1.2, float)
    n_centers = ctx.opt("monotonicity", "centers", 5, int)
    slack = ctx.opt("monotonicity", "slack", 0.05, float)
    h = mesh.h
    radii = analysis.geometric_radii(max(4 * h, dom.r0 / 16), dom.r0 / 2, 2)
    centers = _boundary_centers(dom, n_centers, ctx.seed)

    def trace_at(k):
        tr = functional.acf_trace(u, f, centers[k], beta, radii)
        return tr, functional.check_monotone(tr, slack)

    results = ctx.pmap(trace_at, range(len(centers)))
    total = 0
    rows = []
    for k, (tr, viol) in enumerate(results):
        tr.to_csv(ctx.out / f"trace_{k}.csv")
        total += len(viol)
        for r, e, p, fv in zip(tr.radii, tr.weighted_energy, tr.psi_term, tr.f_values):
            rows.append([k, float(r), float(e), float(p), float(fv)])
    _write_csv(ctx.out / "monotonicity.csv",
               ["center", "r", "weighted_energy", "psi_term", "F"], rows)
    ctx.say(f"- {len(centers)} boundary centers, beta={beta}: "
            f"{total} monotonicity violations at slack {slack}")
    ctx.check(total == 0, f"F nondecreasing at slack {slack}")


def _pipe_decay(ctx: _Ctx) -> None:
    dom = _build_domain(ctx)
    mesh, f, u = _mesh_and_solve(ctx, dom)
    beta = ctx.opt("decay", "beta", 1.2, float)
    h = mesh.h
    rmax = dom.r0 / 6
    rmin = min(4 * h, rmax / 1.9)
    radii = analysis.geometric_radii(rmin, rmax, 5)
    centers = list(_boundary_centers(dom, ctx.opt("decay", "centers", 4, int), ctx.seed))
    interior = ctx.opt("decay", "interior", "0.0,0.0")
    centers.append(np.array([float(v) for v in interior.split(",")]))

    fits = ctx.pmap(lambda c: analysis.energy_decay_fit(u, c, radii, r0=dom.r0), centers)
    rows = [[i, float(c[0]), float(c[1]), fit.slope, fit.intercept]
            for i, (c, fit) in enumerate(zip(centers, fits))]
    _write_csv(ctx.out / "decay.csv", ["center", "x", "y", "slope", "intercept"], rows)
    # plot-ready (log r, log E) per center
    energy_rows = [[i, float(r), float(e), math.log(r), math.log(e) if e > 0 else ""]
                   for i, fit in enumerate(fits)
                   for r, e in zip(fit.radii, fit.energies)]
    _write_csv(ctx.out / "decay_energies.csv",
               ["center", "r", "energy", "log_r", "log_energy"], energy_rows)
    need = beta - 0.15  # dimension-2 form of the decay target N - 2 + beta
    worst = min(fit.slope for fit in fits)
    ctx.say(f"- decay slopes over {len(centers)} centers: min {worst:.3f}, "
            f"target >= {need:.3f}")
    ctx.check(worst >= need, f"energy decay slope >= {need:.3f}")


def _pipe_holder(ctx: _Ctx) -> None:
    alpha = ctx.opt("holder", "alpha", 0.6, float)
    bundle = exponents.bundle_from_pq(
        2, ctx.opt("holder", "p", math.inf, float), ctx.opt("holder", "q", 2.0, float),
        alpha)
    (ctx.out / "bundle.json").write_text(json.dumps(dataclasses.asdict(bundle),
                                                    indent=1, default=float))
    if not bundle.valid:
        raise PipelineError(f"exponent bundle invalid: {bundle.reason}")
    ctx.say(f"- alpha={alpha} -> beta={bundle.beta}, eps_max={bundle.eps_max:.4f}")
    dom, rep = _pipe_check_flatness(ctx)
    ctx.check(rep.eps_global <= bundle.eps_max,
              f"eps_global {rep.eps_global:.4f} <= eps_max {bundle.eps_max:.4f}")
    mesh, f, u = _mesh_and_solve(ctx, dom)
    centers = _boundary_centers(dom, ctx.opt("holder", "centers", 3, int), ctx.seed)
    region = ctx.opt("holder", "region", max(dom.r0 / 6, 10 * mesh.h), float)

    def fit_at(k):
        return analysis.holder_exponent_fit(u, centers[k], region,
                                            pair_budget=4000, seed=ctx.seed + k)

    fits = ctx.pmap(fit_at, range(len(centers)))
    rows = [[k, float(centers[k][0]), float(centers[k][1]), fit.alpha_hat, fit.c_hat]
            for k, fit in enumerate(fits)]
    _write_csv(ctx.out / "holder.csv", ["center", "x", "y", "alpha_hat", "c_hat"], rows)
    worst = min(fit.alpha_hat for fit in fits)
    ctx.say(f"- alpha_hat min over {len(centers)} boundary regions: {worst:.3f}; "
            f"target >= {alpha - 0.1:.3f}")
    ctx.check(worst >= alpha - 0.1, f"alpha_hat >= alpha - 0.1 = {alpha - 0.1:.3f}")


def _pipe_exponents(ctx: _Ctx) -> None:
    ns = [int(v) for v in ctx.opt("exponents", "N", "2,3,4,5").split(",")]
    qs = [float(v) for v in ctx.opt("exponents", "q", "2,4,6").split(",")]
    rows = []
    for n in ns:
        for q in qs:
            c1 = exponents.alpha_max_cor1(n, q)
            rows.append([n, q, c1.alpha_max, int(c1.q_admissible), int(c1.n_admissible)])
    _write_csv(ctx.out / "exponents_cor1.csv",
               ["N", "q", "alpha_max", "q_admissible", "N_admissible"], rows)

    rows2 = []
    rs = [float(v) for v in ctx.opt("exponents", "r", "2,3").split(",")]
    for n in ns:
        for r in rs:
            if r > n:
                continue
            for q in qs:
                c2 = exponents.alpha_max_cor2(n, r, q)
                rows2.append([n, r, q, c2.alpha_max,
                              c2.r_star if math.isfinite(c2.r_star) else "inf",
                              int(c2.valid), c2.reason])
    _write_csv(ctx.out / "exponents_cor2.csv",
               ["N", "r", "q", "alpha_max", "r_star", "valid", "reason"], rows2)

    rows3 = []
    for n in (2, 3):
        for beta in (0.5, 1.0, 1.2, 1.5, 1.9):
            thr = eigen.flatness_threshold(n, beta)
            rows3.append([n, beta, thr.sigma_star, thr.t_star, thr.eps_max,
                          int(thr.unconditional)])
    _write_csv(ctx.out / "thresholds.csv",
               ["N", "beta", "sigma_star", "t_star", "eps_max", "unconditional"], rows3)
    ctx.say(f"- wrote {len(rows)} critical-exponent rows, {len(rows2)} divergence-form "
            f"rows, {len(rows3)} cap thresholds")


_PIPELINES = {
    "generate-domain": _pipe_generate_domain,
    "check-flatness": _pipe_check_flatness,
    "solve": _pipe_solve,
    "monotonicity": _pipe_monotonicity,
    "decay": _pipe_decay,
    "holder": _pipe_holder,
    "exponents": _pipe_exponents,
}


def run_pipeline(config_path, out_dir, seed: int | None = None,
                 threads: int = 1) -> int:
    """Run the pipeline named in the config; returns a process exit status."""
    cfg = configparser.ConfigParser()
    read = cfg.read(config_path)
    if not read:
        print(f"error: cannot read config {config_path}", file=sys.stderr)
        return 2
    name = cfg.get("run", "pipeline", fallback=None)
    if name is None:
        print("error: config lacks [run] pipeline = ...", file=sys.stderr)
        return 2
    if seed is None:
        seed = cfg.getint("run", "seed", fallback=0)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Ctx(cfg, out, seed, threads)
    names = list(_PIPELINES) if name == "all" else [name]
    if any(n not in _PIPELINES for n in names):
        print(f"error: unknown pipeline {name!r}; "
              f"choose from {', '.join([*_PIPELINES, 'all'])}", file=sys.stderr)
        return 2
    status = 0
    try:
        for n in names:
            ctx.say(f"## {n}")
            _PIPELINES[n](ctx)
    except PipelineError as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        status = 1
    (out / "report.md").write_text(
        "\n".join([f"# run report (pipeline = {name}, seed = {ctx.seed})", *ctx.report])
        + "\n")
    ctx.log["pipeline"] = name
    ctx.log["config"] = {s: dict(cfg.items(s)) for s in cfg.sections()}
    ctx.log["status"] = status
    (out / "runlog.json").write_text(json.dumps(ctx.log, indent=1, default=float))
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="reiflab",
        description="Poisson solves and boundary-regularity diagnostics on "
                    "flat-fractal planar domains")
    ap.add_argument("--config", required=True, help="INI config naming the pipeline")
    ap.add_argument("--out", required=True, help="output directory for reports")
    ap.add_argument("--seed", type=int, default=None,
                    help="64-bit seed overriding [run] seed")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker threads for per-center sweeps")
    args = ap.parse_args(argv)
    return run_pipeline(args.config, args.out, seed=args.seed, threads=args.threads)


if __name__ == "__main__":
    raise SystemExit(main())
