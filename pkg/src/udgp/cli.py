"""Command-line surface: simulate, digest, solve, backtrack, extract, eval,
project, analyze, bench.

Every command is deterministic under a fixed --seed, including with
--jobs > 1: parallel work is keyed by stable indices and aggregated in a
fixed order, so outputs are byte-identical across runs.  Exit codes:
0 success, 2 usage error, 3 data error, 4 budget/convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pipeline
from .analysis import certify, null_space_certified
from .baseline import BacktrackConfig, backtrack_turnpike
from .domain import (
    Density,
    DistanceMultiset,
    Geometry,
    Grid,
    PointConfig,
    add_noise,
    pairwise_distances,
    quantize_config,
)
from .evaluate import score_recovery
from .extract import extract_points
from .ingest import ENZYMES, Enzyme, digest, parse_fasta, read_distances, write_distances
from .projection import project_l1_box
from .solver import SolveConfig
from .spectral import INIT_SCHEMES, SpectralConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BUDGET = 4


@dataclass
class ExperimentSpec:
    geometry: str  # "line" | "loop"
    N: int
    d_min: float
    d_max: float
    delta_l: float
    xi_list: list
    num_runs: int
    seed: int = 0
    init_scheme: str = "auto"
    sigma_grid: list = field(default_factory=list)

    def __post_init__(self):
        if not self.d_min < self.d_max:
            raise ValueError("need d_min < d_max")
        if self.delta_l > self.d_min:
            raise ValueError("delta_l must not exceed d_min (minimum separation criterion)")
        if any(xi >= self.d_min for xi in self.xi_list if xi > 0):
            raise ValueError("noise levels must stay below d_min")
        if not self.sigma_grid:
            self.sigma_grid = pipeline.default_sigma_grid(self.d_min)

    @property
    def loop_length(self) -> float:
        return self.d_min + self.d_max

    def grid(self) -> Grid:
        if self.geometry == "loop":
            return Grid.for_loop(self.loop_length, self.delta_l)
        return Grid(int(round(self.d_max / self.delta_l)), self.delta_l, Geometry.line())


PRESETS = {
    "n10-line": dict(geometry="line", N=10, d_min=1e-2, d_max=1.0, delta_l=1e-3,
                     xi_list=[0.0, 1e-3, 3e-3, 5e-3, 7e-3, 9e-3], num_runs=100),
    "n100-line": dict(geometry="line", N=100, d_min=1e-4, d_max=1.0, delta_l=1e-5,
                      xi_list=[0.0, 1e-5, 3e-5, 5e-5, 7e-5, 9e-5], num_runs=100),
    "n10-loop": dict(geometry="loop", N=10, d_min=1e-2, d_max=1.0, delta_l=1e-3,
                     xi_list=[0.0, 1e-3, 3e-3, 5e-3, 7e-3, 9e-3], num_runs=100),
    "n100-loop": dict(geometry="loop", N=100, d_min=1e-4, d_max=1.0, delta_l=1e-5,
                      xi_list=[0.0, 1e-5, 3e-5, 5e-5, 7e-5, 9e-5], num_runs=100),
}


def _floats(text: str) -> list:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _spec_from_args(args) -> ExperimentSpec:
    if args.preset:
        base = dict(PRESETS[args.preset])
    else:
        required = ("geometry", "n", "d_min", "d_max", "delta_l")
        missing = [k for k in required if getattr(args, k, None) is None]
        if missing:
            raise ValueError(f"either --preset or all of {missing} are required")
        base = dict(geometry=args.geometry, N=args.n, d_min=args.d_min,
                    d_max=args.d_max, delta_l=args.delta_l,
                    xi_list=[0.0], num_runs=10)
    if getattr(args, "xi", None):
        base["xi_list"] = _floats(args.xi)
    if getattr(args, "runs", None):
        base["num_runs"] = args.runs
    spec = ExperimentSpec(seed=args.seed, init_scheme=getattr(args, "init", "auto"),
                          sigma_grid=_floats(args.sigma_grid) if getattr(args, "sigma_grid", None) else [],
                          **base)
    if getattr(args, "sigma_count", None):
        spec.sigma_grid = pipeline.default_sigma_grid(spec.d_min, args.sigma_count)
    return spec


def _sample_truth(spec: ExperimentSpec, run: int) -> PointConfig:
    rng = np.random.default_rng([spec.seed, run])
    if spec.geometry == "loop":
        return pipeline.sample_loop_config(spec.N, spec.d_min, spec.loop_length, rng)
    return pipeline.sample_line_config(spec.N, spec.d_min, spec.d_max, spec.grid(), rng)


def _noisy_multiset(spec: ExperimentSpec, truth: PointConfig, run: int, xi_idx: int) -> DistanceMultiset:
    raw = pairwise_distances(truth)
    xi = spec.xi_list[xi_idx]
    return add_noise(raw, xi, np.random.default_rng([spec.seed, run, xi_idx]))


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "geometry": spec.geometry, "N": spec.N, "d_min": spec.d_min,
        "d_max": spec.d_max, "delta_l": spec.delta_l, "xi_list": spec.xi_list,
        "num_runs": spec.num_runs, "seed": spec.seed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for run in range(spec.num_runs):
        truth = _sample_truth(spec, run)
        (out / f"run{run:03d}_truth.json").write_text(truth.to_json() + "\n")
        for xi_idx in range(len(spec.xi_list)):
            dm = _noisy_multiset(spec, truth, run, xi_idx)
            write_distances(out / f"run{run:03d}_xi{xi_idx}_distances.txt", dm)
    print(f"wrote {spec.num_runs} runs x {len(spec.xi_list)} noise levels to {out}")
    return EXIT_OK


def cmd_digest(args) -> int:
    if args.enzyme == "custom":
        if not args.recognition or args.cut_offset is None:
            raise ValueError("custom enzyme needs --recognition and --cut-offset")
        enzyme = Enzyme("custom", args.recognition.upper(), args.cut_offset)
    else:
        enzyme = ENZYMES[args.enzyme]
    seq = parse_fasta(args.fasta)
    result = digest(seq, enzyme)
    if args.out:
        write_distances(args.out, result.distances)
    if args.sites_out:
        Path(args.sites_out).write_text(
            json.dumps({"sites": [int(s) for s in result.sites], "N": result.N}) + "\n"
        )
    print(json.dumps({"enzyme": enzyme.name, "N": result.N,
                      "sequence_length": len(seq)}))
    return EXIT_OK


def _grid_from_solve_args(args, dm: DistanceMultiset) -> Grid:
    if dm.kind.family == "beltway":
        if args.loop_length is None:
            raise ValueError("beltway data needs --loop-length")
        return Grid.for_loop(args.loop_length, args.delta_l)
    if args.m is not None:
        return Grid(args.m, args.delta_l, Geometry.line())
    return Grid.for_line(float(dm.values.max()), args.delta_l)


def cmd_solve(args) -> int:
    dm = read_distances(args.distances, N=args.n)
    grid = _grid_from_solve_args(args, dm)
    sigma_grid = _floats(args.sigma_grid) if args.sigma_grid else \
        pipeline.default_sigma_grid(args.d_min, args.sigma_count)
    cfg = SolveConfig(T=args.iters) if args.iters else SolveConfig()
    result = pipeline.reconstruct(
        dm, args.n, grid, args.d_min, sigma_grid,
        init_scheme=args.init, solve_cfg=cfg,
        spectral_cfg=SpectralConfig(seed=args.seed),
        seed=args.seed, jobs=args.jobs,
    )
    payload = result.to_json()
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    if args.dump_density:
        Path(args.dump_density).write_text(_density_to_json(result.density) + "\n")
    return EXIT_OK


def cmd_backtrack(args) -> int:
    dm = read_distances(args.distances, N=args.n)
    cfg = BacktrackConfig(delta_d=args.delta_d, node_budget=args.budget,
                          find_all=args.find_all)
    res = backtrack_turnpike(dm, args.n, cfg)
    payload = json.dumps({
        "solutions": [[float(v) for v in c.locations] for c in res.solutions],
        "nodes": res.nodes,
        "exhausted": res.exhausted,
    })
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    return EXIT_BUDGET if res.exhausted else EXIT_OK


def _density_to_json(d: Density) -> str:
    return json.dumps({
        "z": [float(v) for v in d.z], "N": d.N, "delta_l": d.grid.delta_l,
        "geometry": d.grid.geometry.kind, "loop_length": d.grid.geometry.loop_length,
    })


def _density_from_json(text: str) -> Density:
    obj = json.loads(text)
    geom = Geometry.loop(obj["loop_length"]) if obj["geometry"] == "loop" else Geometry.line()
    grid = Grid(len(obj["z"]), obj["delta_l"], geom)
    return Density(np.asarray(obj["z"], dtype=float), obj["N"], grid)


def cmd_extract(args) -> int:
    density = _density_from_json(Path(args.density).read_text())
    rng = np.random.default_rng([args.seed])
    res = extract_points(density, args.d_min, args.n, rng)
    payload = res.to_json()
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = PointConfig.from_json(Path(args.truth).read_text())
    est_obj = json.loads(Path(args.estimate).read_text())
    estimate = np.asarray(est_obj["locations"], dtype=float)
    score = score_recovery(truth, estimate, args.d_min)
    errors = []
    if score.aligned_estimate is not None:
        aligned = score.aligned_estimate.locations
        for t_idx, e_idx in score.assignment:
            errors.append(abs(float(truth.locations[t_idx] - aligned[e_idx])))
    payload = json.dumps({
        "matched": score.matched,
        "transform": {"shift": score.shift, "reflected": score.reflected},
        "assignment": score.assignment,
        "per_point_errors": errors,
    })
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    return EXIT_OK


def cmd_project(args) -> int:
    vec = np.array([float(t) for t in Path(args.infile).read_text().split()], dtype=float)
    res = project_l1_box(vec, args.n)
    Path(args.out).write_text(" ".join(repr(float(v)) for v in res.s) + "\n")
    print(json.dumps({"case": res.case, "r": res.r, "rho": res.rho, "kappa": res.kappa}))
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = PointConfig.from_json(Path(args.config).read_text())
    if config.geometry.is_loop:
        grid = Grid.for_loop(config.geometry.loop_length, args.delta_l)
    elif args.m is not None:
        grid = Grid(args.m, args.delta_l, Geometry.line())
    else:
        grid = Grid.for_line(float(config.locations.max()), args.delta_l)
    cells = quantize_config(config, grid)
    z = np.zeros(grid.M)
    z[cells] = 1.0
    x = Density(z, config.N, grid)
    cert = certify(x, q=args.q)
    payload = json.dumps({
        "lambda_E": cert.lambda_E, "q": cert.q, "tau": cert.tau,
        "null_space_certified": null_space_certified(x),
    })
    print(payload)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    return EXIT_OK


# ------------------------------------------------------------------- bench


def _bench_task(packed):
    """Worker for one (method, xi_idx, run) cell; must stay top-level picklable."""
    spec, method, xi_idx, run, iters = packed
    truth = _sample_truth(spec, run)
    dm = _noisy_multiset(spec, truth, run, xi_idx)
    start = time.perf_counter()
    failed = False
    if method == "pgd":
        cfg = SolveConfig(T=iters) if iters else SolveConfig()
        try:
            rec = pipeline.reconstruct(
                dm, spec.N, spec.grid(), spec.d_min, spec.sigma_grid,
                init_scheme=spec.init_scheme, solve_cfg=cfg,
                spectral_cfg=SpectralConfig(seed=spec.seed), seed=spec.seed + run,
            )
            matched = score_recovery(truth, rec.locations, spec.d_min).matched
        except Exception:
            matched, failed = 0, True
    elif method == "backtrack":
        delta_d = 5.0 * max(spec.sigma_grid)
        res = backtrack_turnpike(dm, spec.N, BacktrackConfig(delta_d=delta_d))
        if res.solutions:
            matched = score_recovery(truth, res.solutions[0], spec.d_min).matched
        else:
            matched, failed = 0, True
    else:
        raise ValueError(f"unknown method {method!r}")
    runtime_ms = (time.perf_counter() - start) * 1000.0
    return method, xi_idx, run, matched, failed, runtime_ms


def cmd_bench(args) -> int:
    spec = _spec_from_args(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if spec.geometry == "loop" and "backtrack" in methods:
        raise ValueError("backtracking does not apply to loop geometry")
    iters = args.iters
    tasks = [(spec, m, xi_idx, run, iters)
             for m in methods
             for xi_idx in range(len(spec.xi_list))
             for run in range(spec.num_runs)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_task, tasks, chunksize=1))
    else:
        rows = [_bench_task(t) for t in tasks]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["method", "xi", "run", "matched", "runtime_ms"])
    for method, xi_idx, run, matched, failed, ms in rows:
        stamp = f"{ms:.3f}" if args.timings else ""
        writer.writerow([method, repr(spec.xi_list[xi_idx]), run, matched, stamp])
    Path(args.out).write_text(buf.getvalue())

    summary = {}
    for method, xi_idx, run, matched, failed, ms in rows:
        summary.setdefault((method, xi_idx), []).append(matched)
    for (method, xi_idx), vals in sorted(summary.items()):
        print(f"{method},{spec.xi_list[xi_idx]!r},mean_matched={np.mean(vals):.3f}")
    return EXIT_OK


# -------------------------------------------------------------- arg wiring


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="udgp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("simulate", help="sample truth configs and noisy distance files")
    add_common(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--geometry", choices=["line", "loop"])
    p.add_argument("--n", type=int)
    p.add_argument("--d-min", dest="d_min", type=float)
    p.add_argument("--d-max", dest="d_max", type=float)
    p.add_argument("--delta-l", dest="delta_l", type=float)
    p.add_argument("--xi", help="comma-separated noise stds")
    p.add_argument("--runs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("digest", help="restriction-digest a FASTA genome")
    add_common(p)
    p.add_argument("--fasta", required=True)
    p.add_argument("--enzyme", choices=sorted(ENZYMES) + ["custom"], required=True)
    p.add_argument("--recognition")
    p.add_argument("--cut-offset", dest="cut_offset", type=int)
    p.add_argument("--out")
    p.add_argument("--sites-out", dest="sites_out")
    p.set_defaults(func=cmd_digest)

    p = sub.add_parser("solve", help="reconstruct point locations from a distance file")
    add_common(p)
    p.add_argument("--distances", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta-l", dest="delta_l", type=float, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--loop-length", dest="loop_length", type=float)
    p.add_argument("--d-min", dest="d_min", type=float, required=True)
    p.add_argument("--sigma-grid", dest="sigma_grid")
    p.add_argument("--sigma-count", dest="sigma_count", type=int, default=8)
    p.add_argument("--init", choices=INIT_SCHEMES + ("auto",), default="auto")
    p.add_argument("--iters", type=int)
    p.add_argument("--out")
    p.add_argument("--dump-density", dest="dump_density")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("backtrack", help="interval backtracking baseline (line only)")
    add_common(p)
    p.add_argument("--distances", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta-d", dest="delta_d", type=float, default=0.0)
    p.add_argument("--budget", type=int, default=10_000_000)
    p.add_argument("--find-all", dest="find_all", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_backtrack)

    p = sub.add_parser("extract", help="cluster a density JSON into point estimates")
    add_common(p)
    p.add_argument("--density", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d-min", dest="d_min", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score an estimate against a truth config")
    add_common(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--d-min", dest="d_min", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project", help="project a vector onto the feasible set")
    add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("analyze", help="convergence certificate for a truth config")
    add_common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--q", type=float, default=0.75)
    p.add_argument("--delta-l", dest="delta_l", type=float, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="matched-count benchmark over a protocol")
    add_common(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--geometry", choices=["line", "loop"])
    p.add_argument("--n", type=int)
    p.add_argument("--d-min", dest="d_min", type=float)
    p.add_argument("--d-max", dest="d_max", type=float)
    p.add_argument("--delta-l", dest="delta_l", type=float)
    p.add_argument("--xi", help="comma-separated noise stds")
    p.add_argument("--runs", type=int)
    p.add_argument("--methods", default="pgd,backtrack")
    p.add_argument("--init", choices=INIT_SCHEMES + ("auto",), default="auto")
    p.add_argument("--sigma-grid", dest="sigma_grid")
    p.add_argument("--sigma-count", dest="sigma_count", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--timings", action="store_true",
                   help="fill the runtime_ms column (non-deterministic)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
