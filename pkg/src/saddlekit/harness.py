"""Experiment orchestration: configs, benchmark presets, attraction grids.

Configuration files are YAML mappings (schema documented in the README and
in :func:`load_config`).  Every preset and scan is deterministic: seeds are
explicit in the config and echoed into the outputs.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import gad as gad_mod
from . import manifold as mf
from .eigen import stationary_index
from .errors import OrderEstimateError
from .objective import COEFFICIENT_PRESETS, build_flat
from .potentials import make_builtin, morse_full_coordinates, write_xyz
from .search import (
    ConvergenceRecord,
    SearchConfig,
    estimate_order_pooled,
    run as run_search,
)
from .subsolve import SubsolveConfig, minimize, newton_stationary

__all__ = [
    "ExperimentConfig",
    "DoaGrid",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "doa_scan",
    "emit_table",
    "bench",
    "run_invariant_checks",
    "BENCH_PRESETS",
]


# ----------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Parsed experiment description (see README for the file schema)."""

    problem: str
    problem_params: dict = field(default_factory=dict)
    method: str = "imf"
    search: dict = field(default_factory=dict)
    subsolve: dict = field(default_factory=dict)
    gad: dict = field(default_factory=dict)
    newton: dict = field(default_factory=dict)
    start: dict = field(default_factory=dict)
    reference: object = "auto"
    label: str = "experiment"
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("imf", "gad", "newton"):
            raise ValueError(f"method must be one of imf|gad|newton, got {self.method!r}")
        if not self.start:
            raise ValueError("config requires a start section (point | circle | sphere_cap)")


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    problem = raw.pop("problem", None)
    if isinstance(problem, dict):
        name = problem.get("name")
        params = dict(problem.get("params", {}))
    else:
        name = problem
        params = dict(raw.pop("problem_params", {}))
    if not name:
        raise ValueError("config requires problem: {name: ..., params: {...}}")
    known = {f for f in ExperimentConfig.__dataclass_fields__ if f not in ("problem", "problem_params")}
    extra = set(raw) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return ExperimentConfig(problem=name, problem_params=params, **raw)


def load_config(path) -> ExperimentConfig:
    """Read a YAML experiment config.

    Top-level keys: ``problem`` (name + params), ``method`` (imf|gad|newton),
    ``search`` (outer-loop settings incl. nested ``subsolve``), ``gad``,
    ``newton``, ``start`` (point | circle | sphere_cap), ``reference``
    ("auto", explicit point, or null), ``label``, ``seed``.
    """
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"config {path} must be a mapping")
    return config_from_dict(raw)


def _search_config(cfg: ExperimentConfig, reference=None) -> SearchConfig:
    s = dict(cfg.search)
    sub = {**cfg.subsolve, **s.pop("subsolve", {})}
    subset_alpha = s.pop("subset_alpha", None)
    subset_beta = s.pop("subset_beta", None)
    if subset_alpha is not None:
        subset_alpha = {tuple(k) if isinstance(k, (list, tuple)) else (int(k),): v
                        for k, v in subset_alpha.items()}
    if subset_beta is not None:
        subset_beta = {tuple(k) if isinstance(k, (list, tuple)) else (int(k),): v
                       for k, v in subset_beta.items()}
    return SearchConfig(
        subsolve=SubsolveConfig(**sub),
        reference=reference,
        subset_alpha=subset_alpha,
        subset_beta=subset_beta,
        **s,
    )


def _starts(cfg: ExperimentConfig, p):
    """Materialize start points; returns (points, seed_used)."""
    spec = cfg.start
    rng = np.random.default_rng(cfg.seed)
    if "point" in spec:
        return [np.asarray(spec["point"], dtype=float)], cfg.seed
    if "circle" in spec:
        c = spec["circle"]
        center = np.asarray(c["center"], dtype=float)
        radius = float(c["radius"])
        count = int(c.get("count", 1))
        if center.shape != (2,):
            raise ValueError("circle starts require a 2-d center")
        pts = []
        for _ in range(count):
            th = rng.uniform(0.0, 2.0 * math.pi)
            pts.append(center + radius * np.array([math.cos(th), math.sin(th)]))
        return pts, cfg.seed
    if "sphere_cap" in spec:
        c = spec["sphere_cap"]
        center = np.asarray(c["center"], dtype=float)
        center = center / np.linalg.norm(center)
        dist = float(c["geodesic_distance"])
        count = int(c.get("count", 1))
        pts = []
        for _ in range(count):
            t = rng.standard_normal(center.size)
            t -= (t @ center) * center
            t /= np.linalg.norm(t)
            pts.append(math.cos(dist) * center + math.sin(dist) * t)
        return pts, cfg.seed
    if "perturbed_minimum" in spec:
        # relax the built geometry, then displace free coordinates
        c = spec["perturbed_minimum"]
        amp = float(c.get("amplitude", 0.05))
        count = int(c.get("count", 1))
        relax_tol = float(c.get("relax_tol", 1e-11))
        xref = _relaxed_minimum(p, relax_tol)
        return [xref + amp * rng.standard_normal(xref.size) for _ in range(count)], cfg.seed
    raise ValueError(f"unrecognized start spec {sorted(spec)}")


class _AsObjective:
    """Adapter: expose a potential with the inner-solver interface."""

    def __init__(self, p):
        self.p = p

    def value(self, y):
        return self.p.energy(y)

    def gradient(self, y):
        return self.p.gradient(y)

    def hessian_vec(self, y, u):
        return self.p.hessian_vec(y, u)


def _relaxed_minimum(p, tol=1e-11):
    if "coords" in p.extras:
        x0 = p.extras["coords"][~p.extras["frozen"]].ravel().copy()
    else:
        raise ValueError(f"{p.name} has no built-in geometry to relax")
    sol = minimize(_AsObjective(p), x0, SubsolveConfig(grad_tol=tol, max_inner_iters=6000))
    return sol.y


def _rereference(record: ConvergenceRecord, ref):
    record.reference = ref
    for i, (it, xx, _, gn, lam, inner) in enumerate(record.rows):
        record.rows[i] = (it, xx, float(np.linalg.norm(xx - ref)), gn, lam, inner)


def _auto_reference(p, record: ConvergenceRecord, on_sphere=False):
    """Re-reports errors against the nearest known saddle after the fact."""
    if on_sphere:
        saddles = [np.array([0.0, 1.0, 0.0]), np.array([0.0, -1.0, 0.0])]
    else:
        saddles = p.saddle_points()
    if not saddles or not record.rows:
        return None
    term = record.x
    ref = min(saddles, key=lambda s: float(np.linalg.norm(term - s)))
    _rereference(record, ref)
    return ref


# ----------------------------------------------------------------------------
# experiment runner


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Execute the configured runs and write records plus a JSON summary.

    Writes one ``<label>_run<k>.csv`` per run and ``<label>_summary.json``;
    for the cluster problem, initial and terminal geometries go to XYZ files.
    Returns the summary dict; ``summary["all_converged"]`` drives the CLI
    exit code.
    """
    os.makedirs(out_dir, exist_ok=True)
    p = make_builtin(cfg.problem, cfg.problem_params)
    starts, seed = _starts(cfg, p)
    explicit_ref = None
    if cfg.reference not in ("auto", None):
        explicit_ref = np.asarray(cfg.reference, dtype=float)

    runs = []
    sequences = []
    for k, x0 in enumerate(starts):
        entry = {"run": k, "start": [float(v) for v in x0] if x0.size <= 8 else None}
        if cfg.method == "imf":
            scfg = _search_config(cfg, reference=explicit_ref)
            record = run_search(p, x0, scfg)
            if explicit_ref is None and cfg.reference == "auto":
                _auto_reference(p, record, on_sphere=scfg.on_sphere)
            path = os.path.join(out_dir, f"{cfg.label}_run{k}.csv")
            record.to_csv(path)
            entry.update(record.summary())
            entry["csv"] = os.path.basename(path)
            entry["converged"] = record.converged
            if record.errors():
                sequences.append(record.errors(include_start=False))
            if "coords" in p.extras:
                for tag, vec in (("start", x0), ("end", record.x)):
                    xyz = os.path.join(out_dir, f"{cfg.label}_run{k}_{tag}.xyz")
                    write_xyz(xyz, morse_full_coordinates(p, vec),
                              symbol=p.extras.get("element", "X"),
                              comment=f"{cfg.label} run {k} {tag}")
        elif cfg.method == "gad":
            g = dict(cfg.gad)
            v0 = g.pop("v0", None)
            rng = np.random.default_rng(seed + 1000 + k)
            v0 = np.asarray(v0, float) if v0 is not None else rng.standard_normal(p.dimension)
            state = gad_mod.GADState(x=x0, v=v0 / np.linalg.norm(v0),
                                     gamma=float(g.pop("gamma", 1.0)))
            traj = gad_mod.run(p, state, **g)
            path = os.path.join(out_dir, f"{cfg.label}_run{k}.csv")
            traj.to_csv(path)
            entry.update({
                "status": traj.status, "steps": traj.steps,
                "terminal_x": [float(v) for v in traj.x],
                "terminal_grad_norm": traj.grad_norms[-1],
                "csv": os.path.basename(path),
                "converged": traj.status == "converged",
            })
        else:  # newton
            res = newton_stationary(p, x0, **cfg.newton)
            entry.update({
                "converged": res.converged, "index": res.index,
                "iterations": res.iterations, "message": res.message,
                "terminal_x": [float(v) for v in res.x] if res.x.size <= 8 else None,
            })
        runs.append(entry)

    summary = {
        "label": cfg.label,
        "problem": cfg.problem,
        "method": cfg.method,
        "seed": seed,
        "runs": runs,
        "all_converged": all(r.get("converged", False) for r in runs),
    }
    if len(sequences) > 1:
        try:
            summary["pooled_order"] = estimate_order_pooled(sequences)
        except OrderEstimateError:
            summary["pooled_order"] = None
    with open(os.path.join(out_dir, f"{cfg.label}_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


# ----------------------------------------------------------------------------
# error tables


def emit_table(records, path, fmt="markdown"):
    """Render per-iteration error columns for a list of (label, record).

    ``records`` may hold :class:`ConvergenceRecord` objects or plain error
    lists.  Formats: csv, json, markdown.
    """
    cols = []
    for label, rec in records:
        errs = rec.errors(include_start=False) if hasattr(rec, "errors") else list(rec)
        cols.append((str(label), [float(e) for e in errs]))
    depth = max((len(c) for _, c in cols), default=0)
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump({label: errs for label, errs in cols}, fh, indent=2)
            fh.write("\n")
        return path
    rows = []
    for i in range(depth):
        row = [str(i + 1)]
        for _, errs in cols:
            row.append(f"{errs[i]:.3e}" if i < len(errs) else "")
        rows.append(row)
    header = ["iter"] + [label for label, _ in cols]
    with open(path, "w") as fh:
        if fmt == "csv":
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        elif fmt == "markdown":
            fh.write("| " + " | ".join(header) + " |\n")
            fh.write("|" + "|".join(["---"] * len(header)) + "|\n")
            for row in rows:
                fh.write("| " + " | ".join(row) + " |\n")
        else:
            raise ValueError(f"unknown table format {fmt!r}")
    return path


def records_from_table_json(path):
    """Inverse of ``emit_table(..., fmt='json')``: label -> error list."""
    with open(path) as fh:
        data = json.load(fh)
    return {label: [float(e) for e in errs] for label, errs in data.items()}


# ----------------------------------------------------------------------------
# domain-of-attraction grid


@dataclass
class DoaGrid:
    """Per-cell convergence labels over a rectangular start region.

    ``labels[i, j]`` is the index into ``saddles`` reached from cell (i, j)
    (-1 for no convergence to a known index-1 saddle); ``iterations`` holds
    the outer-iteration count spent per cell.
    """

    region: tuple
    n: int
    method: str
    saddles: list
    labels: np.ndarray
    iterations: np.ndarray

    def labeled_cells(self) -> int:
        return int(np.sum(self.labels >= 0))

    def basin_is_connected(self, saddle_idx: int) -> bool:
        """4-connectivity check of one basin via flood fill."""
        mask = self.labels == saddle_idx
        total = int(mask.sum())
        if total == 0:
            return True
        seen = np.zeros_like(mask)
        si, sj = np.argwhere(mask)[0]
        stack = [(int(si), int(sj))]
        seen[si, sj] = True
        count = 0
        while stack:
            i, j = stack.pop()
            count += 1
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < mask.shape[0] and 0 <= b < mask.shape[1]:
                    if mask[a, b] and not seen[a, b]:
                        seen[a, b] = True
                        stack.append((a, b))
        return count == total

    def to_csv(self, path):
        np.savetxt(path, self.labels, fmt="%d", delimiter=",")

    def summary(self) -> dict:
        return {
            "method": self.method,
            "region": [list(map(float, b)) for b in self.region],
            "n": self.n,
            "labeled_cells": self.labeled_cells(),
            "cells_per_saddle": [int(np.sum(self.labels == i)) for i in range(len(self.saddles))],
            "connected": [self.basin_is_connected(i) for i in range(len(self.saddles))],
        }


def _doa_cell(args):
    (problem, params, method, point, budget, box, saddle_tol) = args
    p = make_builtin(problem, params)
    saddles = p.saddle_points()
    x0 = np.asarray(point, dtype=float)
    if method == "imf":
        cfg = SearchConfig(
            alpha=1.0, beta=1.0, grad_tol=1e-8, eig_tol=1e-8,
            subsolve=SubsolveConfig(grad_tol=1e-10, max_inner_iters=200, box_radius=box),
            max_outer_iters=budget, divergence_radius=50.0, verify_index=False,
        )
        rec = run_search(p, x0, cfg)
        if not rec.converged:
            return -1, rec.iterations
        x, iters = rec.x, rec.iterations
        if stationary_index(p, x) != 1:
            return -1, iters
    elif method == "newton":
        res = newton_stationary(p, x0, tol=1e-8, max_iters=budget)
        if not res.converged or res.index != 1:
            return -1, res.iterations
        x, iters = res.x, res.iterations
    else:
        raise ValueError(f"doa supports imf|newton, got {method!r}")
    for i, s in enumerate(saddles):
        if np.linalg.norm(x - s) <= saddle_tol:
            return i, iters
    return -1, iters


def doa_scan(problem, method, region, n, budget=200, box=0.25, saddle_tol=1e-3,
             params=None, workers=None) -> DoaGrid:
    """Label every cell of an n-by-n start grid by the saddle it reaches.

    Cells count as labeled only when the run converges to a verified
    index-1 stationary point within ``saddle_tol`` of a known saddle.
    Cells are independent and run on a process pool; the assembled result
    is deterministic.
    """
    (x_lo, x_hi), (y_lo, y_hi) = region
    xs = np.linspace(x_lo, x_hi, n)
    ys = np.linspace(y_lo, y_hi, n)
    p = make_builtin(problem, params or {})
    if p.dimension != 2:
        raise ValueError("attraction grids require a 2-dimensional problem")
    tasks = [
        (problem, params or {}, method, (float(xs[i]), float(ys[j])), budget, box, saddle_tol)
        for i in range(n) for j in range(n)
    ]
    labels = np.full((n, n), -1, dtype=int)
    iters = np.zeros((n, n), dtype=int)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_doa_cell, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [_doa_cell(t) for t in tasks]
    for (i, j), (label, nit) in zip(((i, j) for i in range(n) for j in range(n)), results):
        labels[i, j] = label
        iters[i, j] = nit
    return DoaGrid(region=region, n=n, method=method,
                   saddles=[list(map(float, s)) for s in p.saddle_points()],
                   labels=labels, iterations=iters)


# ----------------------------------------------------------------------------
# benchmark presets


def _bench_table1(out_dir, seed):
    p = make_builtin("three_hole")
    saddles = [p.stationary_points[0][0], p.stationary_points[1][0]]
    rng = np.random.default_rng(seed)
    records = []
    for sp in saddles:
        for name, (a, b) in COEFFICIENT_PRESETS.items():
            th = rng.uniform(0.0, 2.0 * math.pi)
            x0 = sp + 0.2 * np.array([math.cos(th), math.sin(th)])
            cfg = SearchConfig(
                alpha=a, beta=b, grad_tol=5e-14, eig_tol=1e-12,
                subsolve=SubsolveConfig(grad_tol=1e-14, max_inner_iters=500, box_radius=0.25),
                max_outer_iters=6, reference=sp,
            )
            rec = run_search(p, x0, cfg)
            records.append((f"({a:g},{b:g})@({sp[0]:.2f},{sp[1]:.2f})", rec))
    return p, records


def _bench_table2(out_dir, seed):
    p = make_builtin("three_hole")
    rng = np.random.default_rng(seed)
    center = np.array([-1.0, 0.0])
    records = []
    for draw in range(2):
        for name, (a, b) in COEFFICIENT_PRESETS.items():
            th = rng.uniform(0.0, 2.0 * math.pi)
            x0 = center + 0.1 * np.array([math.cos(th), math.sin(th)])
            cfg = SearchConfig(
                alpha=a, beta=b, grad_tol=1e-12, eig_tol=1e-12,
                subsolve=SubsolveConfig(grad_tol=1e-14, max_inner_iters=500, box_radius=0.25),
                max_outer_iters=15,
            )
            rec = run_search(p, x0, cfg)
            _auto_reference(p, rec)
            records.append((f"({a:g},{b:g})#{draw}", rec))
    return p, records


def _bench_table3(out_dir, seed):
    p = make_builtin("three_hole")
    saddles = [p.stationary_points[0][0], p.stationary_points[1][0]]
    rng = np.random.default_rng(seed)
    records = []
    for sp in saddles:
        for a, b in ((2.0, 0.0), (0.0, 2.0)):
            th = rng.uniform(0.0, 2.0 * math.pi)
            x0 = sp + 0.2 * np.array([math.cos(th), math.sin(th)])
            cfg = SearchConfig(
                alpha=a, beta=b, grad_tol=1e-11, eig_tol=1e-12,
                subsolve=SubsolveConfig(grad_tol=1e-16, max_inner_iters=3, box_radius=0.25),
                max_outer_iters=8, reference=sp,
            )
            rec = run_search(p, x0, cfg)
            records.append((f"3cg({a:g},{b:g})@({sp[0]:.2f},{sp[1]:.2f})", rec))
    return p, records


def _bench_table4(out_dir, seed):
    p = make_builtin("morse_island")
    xmin = _relaxed_minimum(p)
    rng = np.random.default_rng(seed)
    records = []
    for name, (a, b) in (("ray", COEFFICIENT_PRESETS["ray"]),):
        x0 = xmin + 0.05 * rng.standard_normal(xmin.size)
        cfg = SearchConfig(
            alpha=a, beta=b, grad_tol=1e-10, eig_tol=1e-9,
            subsolve=SubsolveConfig(grad_tol=1e-12, max_inner_iters=2000, box_radius=0.2),
            max_outer_iters=25, verify_index=False,
        )
        rec = run_search(p, x0, cfg)
        if rec.converged:
            # no tabulated saddle exists for the cluster: report distances to
            # the converged point, the way such error columns are produced
            _rereference(rec, rec.x)
        records.append((f"island({a:g},{b:g})", rec))
        write_xyz(os.path.join(out_dir, "island_minimum.xyz"),
                  morse_full_coordinates(p, xmin), symbol="Pt", comment="relaxed island minimum")
        write_xyz(os.path.join(out_dir, "island_saddle.xyz"),
                  morse_full_coordinates(p, rec.x), symbol="Pt", comment="converged island saddle")
    return p, records


def _bench_table5(out_dir, seed):
    # the "naive" run is a negative control: straight-line projection with
    # retraction instead of the geodesic machinery
    p = make_builtin("sphere_quadratic")
    rng = np.random.default_rng(seed)
    e1 = np.array([1.0, 0.0, 0.0])
    records = []
    for variant in ("hyperplane", "ray", "naive"):
        t = rng.standard_normal(3)
        t -= (t @ e1) * e1
        t /= np.linalg.norm(t)
        x0 = math.cos(0.1) * e1 + math.sin(0.1) * t
        cfg = SearchConfig(
            on_sphere=True, sphere_variant=variant, grad_tol=5e-14, eig_tol=1e-12,
            subsolve=SubsolveConfig(grad_tol=1e-15, max_inner_iters=500),
            max_outer_iters=8 if variant != "naive" else 40,
        )
        rec = run_search(p, x0, cfg)
        _auto_reference(p, rec, on_sphere=True)
        records.append((variant, rec))
    return p, records


def bench(preset, out_dir, seed=None) -> dict:
    """Run a named benchmark preset; writes records, a table, and a summary."""
    os.makedirs(out_dir, exist_ok=True)
    if preset == "fig2":
        summaries = {}
        for method in ("imf", "newton"):
            grid = doa_scan("three_hole", method, ((-1.5, 1.5), (-1.5, 2.0)), 50)
            grid.to_csv(os.path.join(out_dir, f"doa_{method}.csv"))
            summaries[method] = grid.summary()
        out = {"preset": preset, "grids": summaries,
               "imf_labels_more": summaries["imf"]["labeled_cells"] > summaries["newton"]["labeled_cells"]}
        with open(os.path.join(out_dir, "fig2_summary.json"), "w") as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
        return out
    builders = {
        "table1": (_bench_table1, 0),
        "table2": (_bench_table2, 7),
        "table3": (_bench_table3, 0),
        "table4": (_bench_table4, 42),
        "table5": (_bench_table5, 4),
    }
    if preset not in builders:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(builders) + ['fig2']}")
    build, default_seed = builders[preset]
    seed = default_seed if seed is None else int(seed)
    p, records = build(out_dir, seed)
    emit_table(records, os.path.join(out_dir, f"{preset}_errors.md"), fmt="markdown")
    emit_table(records, os.path.join(out_dir, f"{preset}_errors.csv"), fmt="csv")
    emit_table(records, os.path.join(out_dir, f"{preset}_errors.json"), fmt="json")
    runs = []
    for label, rec in records:
        rec.to_csv(os.path.join(out_dir, f"{preset}_{_slug(label)}.csv"))
        entry = {"label": label, **rec.summary(), "converged": rec.converged,
                 "comparison": label == "naive"}
        runs.append(entry)
    summary = {
        "preset": preset,
        "seed": seed,
        "runs": runs,
        # negative-control comparison runs do not gate the exit code
        "all_converged": all(r["converged"] for r in runs if not r["comparison"]),
    }
    # sphere sequences are very short: keep the starting error in the pool
    pool_start = preset == "table5"
    try:
        summary["pooled_order"] = estimate_order_pooled(
            [rec.errors(include_start=pool_start)
             for label, rec in records if rec.errors() and label != "naive"]
        )
    except OrderEstimateError:
        summary["pooled_order"] = None
    with open(os.path.join(out_dir, f"{preset}_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


BENCH_PRESETS = ("table1", "table2", "table3", "table4", "table5", "fig2")


def _slug(label):
    return "".join(c if c.isalnum() else "_" for c in label).strip("_")


# ----------------------------------------------------------------------------
# invariant checks (the `check` subcommand)


def _fd_gradient(p, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (p.energy(x + e) - p.energy(x - e)) / (2.0 * h)
    return g


def run_invariant_checks(include_cluster=True, verbose=False) -> list:
    """Cross-check analytic derivatives and geometric identities.

    Returns a list of (name, passed, detail) covering: gradient and
    Hessian-action finite-difference agreement, Hessian symmetry and
    linearity, mode-sign invariance of the objective, tangent-projector
    idempotence, anchor stationarity transfer, and geodesic-projection
    optimality against a brute-force sweep.
    """
    results = []

    def check(name, passed, detail=""):
        results.append((name, bool(passed), detail))
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")

    rng = np.random.default_rng(2718)
    problems = [
        ("double_well", {"mu": 2.0}, 0.6),
        ("three_hole", {}, 0.8),
        ("sphere_quadratic", {}, 0.8),
    ]
    if include_cluster:
        problems.append(("morse_island", {}, 0.03))

    for name, params, amp in problems:
        p = make_builtin(name, params)
        if "coords" in p.extras:
            base = p.extras["coords"][~p.extras["frozen"]].ravel()
        else:
            base = np.zeros(p.dimension)
        x = base + amp * rng.standard_normal(p.dimension)
        g = p.gradient(x)
        gfd = _fd_gradient(p, x)
        rel = np.linalg.norm(g - gfd) / max(1e-12, np.linalg.norm(gfd))
        check(f"{name}: gradient matches finite differences", rel < 1e-6, f"rel={rel:.2e}")

        u = rng.standard_normal(p.dimension)
        w = rng.standard_normal(p.dimension)
        hu = p.hessian_vec(x, u)
        h = 1e-5 * (1.0 + np.linalg.norm(x, ord=np.inf))
        un = np.linalg.norm(u)
        hfd = (p.gradient(x + (h / un) * u) - p.gradient(x - (h / un) * u)) * (un / (2.0 * h))
        rel = np.linalg.norm(hu - hfd) / max(1e-12, np.linalg.norm(hfd))
        check(f"{name}: hessian action matches finite differences", rel < 1e-5, f"rel={rel:.2e}")

        sym = abs(u @ p.hessian_vec(x, w) - w @ p.hessian_vec(x, u))
        scale = max(1.0, np.linalg.norm(hu) * np.linalg.norm(w))
        check(f"{name}: hessian action is symmetric", sym / scale < 1e-10, f"defect={sym:.2e}")

        lin = np.linalg.norm(
            p.hessian_vec(x, 0.3 * u + 1.7 * w)
            - 0.3 * p.hessian_vec(x, u) - 1.7 * p.hessian_vec(x, w)
        )
        check(f"{name}: hessian action is linear", lin / scale < 1e-12, f"defect={lin:.2e}")

    # mode-sign invariance and stationarity transfer on the three-hole surface
    p = make_builtin("three_hole")
    sp = p.stationary_points[0][0]
    x = sp + 0.1 * rng.standard_normal(2)
    v = rng.standard_normal(2)
    v /= np.linalg.norm(v)
    y = x + 0.2 * rng.standard_normal(2)
    for a, b in ((2.0, 0.0), (0.0, 2.0), (1.0, 1.0)):
        Lp = build_flat(p, x, v, a, b)
        Lm = build_flat(p, x, -v, a, b)
        dv = abs(Lp.value(y) - Lm.value(y))
        dg = np.linalg.norm(Lp.gradient(y) - Lm.gradient(y))
        check(f"three_hole: objective ({a:g},{b:g}) is mode-sign invariant",
              dv < 1e-12 and dg < 1e-12, f"dv={dv:.2e} dg={dg:.2e}")
        Ls = build_flat(p, sp, v, a, b)
        gn = np.linalg.norm(Ls.gradient(sp))
        check(f"three_hole: stationarity transfers to objective ({a:g},{b:g})",
              gn < 1e-9, f"|grad|={gn:.2e}")
        gfd = _fd_gradient(_AsObjective2(Lp), y)
        rel = np.linalg.norm(Lp.gradient(y) - gfd) / max(1e-12, np.linalg.norm(gfd))
        check(f"three_hole: objective ({a:g},{b:g}) gradient matches finite differences",
              rel < 1e-6, f"rel={rel:.2e}")

    # tangent projector idempotence and geodesic projection optimality
    M = mf.sphere(3)
    for trial in range(3):
        xs = rng.standard_normal(3)
        xs /= np.linalg.norm(xs)
        proj = mf.tangent_projector(M, xs)
        u = rng.standard_normal(3)
        d1 = np.linalg.norm(proj(proj(u)) - proj(u))
        d2 = abs(xs @ proj(u))
        check(f"sphere: tangent projection #{trial} idempotent and tangent",
              d1 < 1e-12 and d2 < 1e-12, f"idem={d1:.2e} normal={d2:.2e}")

        v = proj(rng.standard_normal(3))
        v /= np.linalg.norm(v)
        y = rng.standard_normal(3)
        y /= np.linalg.norm(y)
        theta, point = mf.sphere_geodesic_project(xs, v, y)
        sweep = np.linspace(-math.pi, math.pi, 1_000_000, endpoint=False)
        dots = (xs @ y) * np.cos(sweep) + (v @ y) * np.sin(sweep)
        best = sweep[int(np.argmax(dots))]
        dth = abs((theta - best + math.pi) % (2.0 * math.pi) - math.pi)
        check(f"sphere: geodesic projection #{trial} matches brute-force sweep",
              dth < 1e-5, f"dtheta={dth:.2e}")

    return results


class _AsObjective2:
    """Adapter exposing a modified objective as an energy for FD checks."""

    def __init__(self, L):
        self.L = L

    def energy(self, y):
        return self.L.value(y)
