"""End-to-end acceptance checks.

Every test prints one line ``ACCEPTANCE <n> PASS|FAIL: <detail>`` (run with
``-s`` to see them live; they are also echoed in the terminal summary).
"""

import json
import math

import numpy as np
import pytest

from valleyseek import baselines, cli, evalkit, kernels, learner, synthdata, vecgeom as G

pytestmark = pytest.mark.acceptance

SEEDS = range(5)
REPORT = []


def report(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    print("\n" + line)
    REPORT.append(line)
    return ok


def splits(mixture, seed, test_size=2000, train_size=10000):
    cfg = cli.ExperimentConfig(mixture=mixture, seed=seed, train_size=train_size,
                               calib_size=400, test_size=test_size)
    spec = synthdata.builtin_spec(mixture)
    train, calib, test = (synthdata.gen_mixture(spec, n, cli.stream_seed(seed, role))
                          for role, n in enumerate((cfg.train_size, cfg.calib_size, cfg.test_size)))
    return cfg, spec, train, calib, test


def top1(pool, calib, test):
    return evalkit.probe_pool(pool, calib.X, calib.y, test.X, test.y, ns=(1,))[1]


# 1 ---------------------------------------------------------------------------

def test_1_50d_convergence():
    results = []
    for seed in SEEDS:
        cfg, spec, train, calib, test = splits("paper50d", seed)
        pool, _ = cli.build_pool(cfg, train.X, spec.dim)
        assert pool.config == learner.LearnerConfig.scaled(1.0)
        e0 = top1(pool, calib, test)
        learner.train(pool, train.X)
        e1 = top1(pool, calib, test)
        results.append((seed, e0, e1, e0 >= 0.25 and e1 <= 0.04))
    good = sum(r[3] for r in results)
    detail = "; ".join(f"seed {s}: {a:.3f}->{b:.3f}" for s, a, b, _ in results)
    assert report(1, good >= 4, f"{good}/5 seeds start >= 0.25 and end <= 0.04 ({detail})")


# 2 ---------------------------------------------------------------------------

def _valley_hits(pool, spec):
    """Per pair: does some plane sit within 15 deg and 0.5 sigma of the optimal separator?"""
    m = [c.mean for c in spec.components]
    sigma = spec.components[0].sigma
    hits = []
    for a, b in ((0, 1), (2, 3)):
        normal = (m[b] - m[a]) / np.linalg.norm(m[b] - m[a])
        mid = 0.5 * (m[a] + m[b])
        ang = np.degrees(np.arccos(np.clip(np.abs(pool.W @ normal), 0.0, 1.0)))
        off = np.abs(pool.W @ mid - pool.theta)
        hits.append(bool(np.any((ang < 15.0) & (off < 0.5 * sigma))))
    return hits


def test_2_2d_migration():
    rows = []
    for seed in SEEDS:
        cfg, spec, train, calib, test = splits("paper2d", seed)
        pool, _ = cli.build_pool(cfg, train.X, spec.dim)
        assert len(pool) == 8
        learner.train(pool, train.X)
        hits = _valley_hits(pool, spec)
        e = top1(pool, calib, test)
        rows.append((seed, all(hits), e))
    valleys = sum(r[1] for r in rows)
    heads = sum(r[2] <= 0.05 for r in rows)
    both = sum(r[1] and r[2] <= 0.05 for r in rows)
    detail = ", ".join(f"seed {s}: valleys={'yes' if v else 'no'} top1={e:.3f}" for s, v, e in rows)
    assert report(2, both >= 4, f"valley planes in {valleys}/5 seeds, head Top-1 <= 0.05 in "
                                f"{heads}/5, both in {both}/5 ({detail})")


# 3 ---------------------------------------------------------------------------

def test_3_unsupervised_penalty():
    rows = []
    for seed in SEEDS:
        cfg, spec, train, calib, test = splits("paper50d", seed)
        pool, _ = cli.build_pool(cfg, train.X, spec.dim)
        learner.train(pool, train.X)
        e_learn = top1(pool, calib, test)
        knn = {}
        for k in (1, 5, 9):
            pred = baselines.KNN(k=k).fit(train.X, train.y).predict(test.X)
            knn[k] = float(np.mean(pred != test.y))
        rows.append((seed, e_learn, knn))
    good = sum(e - knn[5] <= 0.05 for _, e, knn in rows)
    detail = "; ".join(f"seed {s}: learner {e:.3f} knn1/5/9 {kn[1]:.3f}/{kn[5]:.3f}/{kn[9]:.3f}"
                       for s, e, kn in rows)
    assert report(3, good >= 4, f"learner - kNN(5) <= 0.05 in {good}/5 seeds ({detail})")


# 4 ---------------------------------------------------------------------------

def test_4_kmeans_failure():
    spec = synthdata.kmeans_trap_spec()
    bayes = synthdata.bayes_error_mc(spec, 100_000, 0)
    assert [c.prior for c in spec.components] == [0.4, 0.3, 0.2, 0.1]
    assert [c.sigma for c in spec.components] == [1.0, 1.0, 2.0, 2.0]
    rows = []
    for seed in SEEDS:
        cfg, spec, train, calib, test = splits("kmeans-trap", seed)
        km = baselines.kmeans(train.X, 4, seed=seed)
        rep = baselines.cluster_report(km.assign, train.y, 4)
        pool, _ = cli.build_pool(cfg, train.X, spec.dim)
        learner.train(pool, train.X)
        rows.append((seed, rep.failed, top1(pool, calib, test)))
    km_fail = sum(r[1] for r in rows)
    learn_ok = all(r[2] <= 0.08 for r in rows)
    detail = ", ".join(f"seed {s}: kmeans {'failed' if f else 'ok'}, learner {e:.3f}" for s, f, e in rows)
    ok = bayes <= 0.02 and km_fail >= 3 and learn_ok
    assert report(4, ok, f"Bayes {bayes:.4f}; k-means fails {km_fail}/5; learner Top-1 <= 0.08 "
                         f"in every seed: {learn_ok} ({detail})")


# 5 ---------------------------------------------------------------------------

def _unit(g, d):
    v = g.standard_normal(d)
    return v / np.linalg.norm(v)


def _frame(g, d):
    u = _unit(g, d)
    v = g.standard_normal(d)
    v -= (v @ u) * u
    return u, v / np.linalg.norm(v)


def _geometry_worst(d, trials, g):
    worst = dict(proj=0.0, norm=0.0, inverse=0.0, fixpoint=0.0)
    for _ in range(trials):
        w = _unit(g, d)
        theta = g.normal(0, 3)
        x = g.normal(0, 3, d)
        E = G.project_onto_plane(x, w, theta)
        worst["proj"] = max(worst["proj"], abs(w @ E - theta))
        u, v = _frame(g, d)
        a = g.uniform(-np.pi, np.pi)
        p = g.standard_normal(d)
        r = G.rotate_in_plane(p, u, v, a)
        worst["norm"] = max(worst["norm"], abs(np.linalg.norm(r) - np.linalg.norm(p)))
        worst["inverse"] = max(worst["inverse"], np.max(np.abs(G.rotate_in_plane(r, u, v, -a) - p)))
        if d > 2:
            q = p - (p @ u) * u - (p @ v) * v
            worst["fixpoint"] = max(worst["fixpoint"], np.max(np.abs(G.rotate_in_plane(q, u, v, a) - q)))
    return worst


def _pivot_residuals(mixture, n):
    """|w'.C - theta'| for every rotation fired while training on ``mixture``."""
    cfg, spec, train, _, _ = splits(mixture, 0, test_size=0, train_size=n)
    pool, _ = cli.build_pool(cfg, train.X, spec.dim)
    eps = pool.config.epsilon
    worst, fired = 0.0, 0
    for x in train.X:
        before_W, before_t = pool.W.copy(), pool.theta.copy()
        s0 = before_W @ x - before_t
        rot0 = pool.counters[kernels.ROTATIONS]
        pool.step(x)
        if pool.counters[kernels.ROTATIONS] == rot0:
            continue
        for j in np.flatnonzero(np.any(pool.W != before_W, axis=1)):
            shifted = before_t[j] + (-eps if s0[j] > 0 else eps)
            C = G.intersection_point(pool.mu1[j], pool.mu2[j], before_W[j], shifted)
            worst = max(worst, abs(pool.W[j] @ C - pool.theta[j]))
            fired += 1
    assert fired == pool.counters[kernels.ROTATIONS]
    return worst, fired


def test_5_geometry_suite():
    g = np.random.Generator(np.random.PCG64(2024))
    limits = dict(proj=1e-9, norm=1e-9, inverse=1e-8, fixpoint=1e-12)
    parts, ok = [], True
    for d in (2, 5, 50):
        worst = _geometry_worst(d, 10_000, g)
        ok &= all(worst[k] < limits[k] for k in limits)
        parts.append(f"d={d} " + " ".join(f"{k}={worst[k]:.1e}" for k in limits))
    for mixture, n in (("paper2d", 10_000), ("paper50d", 10_000)):
        worst, fired = _pivot_residuals(mixture, n)
        ok &= worst < 1e-9 and fired > 0
        parts.append(f"{mixture} pivot residual {worst:.1e} over {fired} rotations")
    assert report(5, ok, "; ".join(parts))


# 6 ---------------------------------------------------------------------------

def test_6_1d_equilibrium():
    h = 0.5 * synthdata.PAIR_DELTA
    spec = synthdata.MixtureSpec((synthdata.Component(0.5, [-h], 1.0, 0),
                                  synthdata.Component(0.5, [h], 1.0, 1)))
    cfg = learner.LearnerConfig.scaled(1.0)
    g = np.random.Generator(np.random.PCG64(6))

    def expected_shift(theta, n=100_000):
        X = synthdata.gen_mixture(spec, n, int(g.integers(2**31))).X
        plane = learner.Hyperplane(w=np.array([1.0]), theta=theta)
        d = np.array([learner.shift_update(plane, x, cfg).theta - theta for x in X])
        return d.mean(), d.std(ddof=1) / math.sqrt(n)

    mid, mid_se = expected_shift(0.0)
    right, _ = expected_shift(0.5)
    left, _ = expected_shift(-0.5)
    finals = []
    for seed in SEEDS:
        X = synthdata.gen_mixture(spec, 10_000, seed).X
        start = 1.0 if seed % 2 else -1.0
        pool = learner.Pool(np.array([[1.0]]), np.array([start]), cfg)
        learner.train(pool, X)
        finals.append(float(pool.theta[0]))
    settled = sum(abs(t) < 0.5 for t in finals)
    ok = abs(mid) <= 3 * mid_se and right < 0 and left > 0 and settled >= 4
    assert report(6, ok, f"E[shift] at midpoint {mid:.2e} (3 s.e. {3 * mid_se:.1e}); at +0.5: {right:.2e}, "
                         f"at -0.5: {left:.2e}; final theta {[round(t, 3) for t in finals]}, "
                         f"{settled}/5 within 0.5")


# 7 ---------------------------------------------------------------------------

def test_7_scaling(tmp_path):
    cfg = cli.ExperimentConfig(out=str(tmp_path), train_size=10_000)
    text = cli.cmd_sweep(cfg, [10, 50, 200], include_wall=False)
    rows = {r.split(",")[0] + r.split(",")[1]: r.split(",") for r in text.strip().splitlines()[1:]}
    cols = [c for c in cli.SWEEP_COLUMNS if c != "wall_ms"]
    exponent = float(rows["exponent"][cols.index("work_per_sample")])

    # per-sample rotate fraction on paper50d, sample by sample
    rcfg, spec, train, _, _ = splits("paper50d", 0, test_size=0)
    pool, _ = cli.build_pool(rcfg, train.X, spec.dim)
    _, trace = learner.train(pool, train.X, cadence=1)
    per_sample = np.diff([0] + [c.rotations_fired for c in trace.checkpoints]) / len(pool)
    ok = exponent <= 1.8 and per_sample.max() < 0.10
    assert report(7, ok, f"work exponent {exponent:.2f} over d=10,50,200; max per-sample rotate "
                         f"fraction on paper50d {per_sample.max():.3f} of N={len(pool)}")


# 8 ---------------------------------------------------------------------------

def _cli_run(root):
    r = lambda *a: cli.run([str(x) for x in a])  # noqa: E731
    assert r("gen", "--mixture", "paper2d", "--out", root, "--seed", 5, "--train-size", 3000) == 0
    assert r("train", "--mixture", "paper2d", "--out", root, "--calib", root / "calib.csv",
             "--test", root / "test.csv", "--no-wall") == 0
    assert r("eval", "--snapshot", root / "snapshot.json", "--calib", root / "calib.csv",
             "--test", root / "test.csv", "--out", root / "eval") == 0
    assert r("baseline", "knn", "--train", root / "train.csv", "--test", root / "test.csv",
             "--out", root / "knn") == 0
    assert r("baseline", "kmeans", "--train", root / "train.csv", "--test", root / "test.csv",
             "--out", root / "km", "--seed", 2) == 0
    assert r("plot", "--snapshot", root / "initial.json", "--snapshot", root / "snapshot.json",
             "--samples", root / "test.csv", "--output", root / "plot.svg") == 0
    assert r("sweep", "--dims", "5,10", "--train-size", 500, "--out", root / "sweep", "--no-wall") == 0
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_8_determinism(tmp_path):
    a = _cli_run(tmp_path / "a")
    b = _cli_run(tmp_path / "b")
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    diff = [str(k) for k in a if a[k] != b.get(k)]

    root = tmp_path / "a"
    pool = learner.Pool.load(root / "snapshot.json")
    calib = synthdata.read_samples(root / "calib.csv")
    test = synthdata.read_samples(root / "test.csv")
    mem = evalkit.probe_pool(pool, calib.X, calib.y, test.X, test.y)
    disk = {int(k): v for k, v in json.loads((root / "eval" / "metrics.json").read_text())["topn_error"].items()}
    # the trace's last probe ran on the in-memory pool before it was saved
    last = json.loads((root / "trace.json").read_text())["checkpoints"][-1]["topn_errors"]
    roundtrip = mem == disk == {int(k): v for k, v in last.items()}
    assert report(8, same and roundtrip, f"{len(a)} output files byte-identical across runs: {same} "
                                         f"{diff if diff else ''}; snapshot reload eval equals in-memory: {roundtrip}")
