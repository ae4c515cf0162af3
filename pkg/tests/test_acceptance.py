"""End-to-end acceptance checks.

Each criterion is a pytest test that also records a single PASS/FAIL line. The
lines are printed together at the end of any pytest run that includes this file,
and ``python tests/test_acceptance.py`` runs just this file.
"""
import contextlib
import io
import sys
import time

import numpy as np
import pytest
from scipy import stats

from planbench.cli import main as cli_main
from planbench.core import DiscreteActionSpace, finite_difference_gradient
from planbench.data import FOOTER, Column, FormatError, TrajectoryFile, TrajectorySchema, collect, write_trajectories
from planbench.eval import EvalConfig, dataset_pairs, evaluate_episodic, evaluate_from_dataset, fov_sweep, \
    reports_to_csv
from planbench.noise import ColoredNoiseSpec, gumbel_max_sample, sample_colored, sample_gaussian
from planbench.policy import MPCPolicyConfig, RandomPolicy, ReplayPolicy, expert_policy, mpc_policy
from planbench.rng import make_rng
from planbench.solvers import (
    GradientSolverConfig,
    GraspConfig,
    LagrangianConfig,
    SamplingSolverConfig,
    categorical_cem_solve,
    cem_solve,
    gd_solve,
    grasp_solve,
    icem_solve,
    lagrangian_solve,
    mppi_solve,
    pgd_solve,
    predictive_sampling_solve,
    project_simplex,
)
from planbench.toy import QuadraticCost
from planbench.worlds import EnvPool, make_world
from planbench.worlds.gridworld import MOVES, GridCost

TOL = 0.05


# collected here and echoed by conftest.py after the run, since pytest captures passing output
RESULTS = []


def report(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    return ok


def check(name, ok, detail=""):
    assert report(name, ok, detail), f"{name}: {detail}"


# -- 1. convergence on a convex quadratic ------------------------------------------------

def _convergence_runs():
    quad = QuadraticCost(0.3, dim=2)
    inactive = QuadraticCost(0.3, dim=2, constant_constraint=-1.0)
    small = dict(horizon=4, num_candidates=100, iterations=10, num_elites=10, init_scale=1.0)
    return {
        "cem": lambda: cem_solve(quad, None, SamplingSolverConfig(**small), rng=make_rng(0)),
        "icem": lambda: icem_solve(quad, None, SamplingSolverConfig(**small, noise_beta=0.0, momentum=0.0,
                                                                     elites_keep=0), rng=make_rng(0)),
        "mppi": lambda: mppi_solve(quad, None, SamplingSolverConfig(horizon=4, num_candidates=1000, iterations=30,
                                                                     num_elites=1000, init_scale=0.2,
                                                                     temperature=0.1), rng=make_rng(0)),
        "gd": lambda: gd_solve(quad, None, GradientSolverConfig(horizon=4, iterations=200, step_size=0.1),
                               rng=make_rng(0)),
        "predictive_sampling": lambda: predictive_sampling_solve(
            quad, None, SamplingSolverConfig(horizon=4, num_candidates=10**4, iterations=1, num_elites=1,
                                             init_scale=1.0), np.zeros((4, 2)), rng=make_rng(0)),
        "lagrangian": lambda: lagrangian_solve(
            inactive, None, LagrangianConfig(GradientSolverConfig(horizon=4, iterations=20, step_size=0.1),
                                             outer_iterations=10), rng=make_rng(0)),
    }


@pytest.mark.parametrize("name", list(_convergence_runs()))
def test_01_solver_convergence(name):
    t0 = time.perf_counter()
    res = _convergence_runs()[name]()
    err = float(np.max(np.abs(res.best_sequence - 0.3)))
    check(f"1 convergence {name}", err <= TOL, f"max error {err:.3f}, {time.perf_counter() - t0:.2f}s")


def test_01_convergence_suite_time():
    t0 = time.perf_counter()
    for run in _convergence_runs().values():
        run()
    elapsed = time.perf_counter() - t0
    check("1 convergence suite wall time", elapsed < 10.0, f"{elapsed:.2f}s")


# -- 2. constrained optimum ---------------------------------------------------------------

def test_02_constrained_optimum():
    model = QuadraticCost(0.9, action_limit=0.5)
    cfg = LagrangianConfig(GradientSolverConfig(horizon=1, iterations=50, step_size=0.05), outer_iterations=30,
                           penalty_init=1.0, penalty_scale=1.5, penalty_max=10.0)
    mults = []
    res = lagrangian_solve(model, None, cfg, rng=make_rng(0), callback=lambda l, lam, rho: mults.append(lam.copy()))
    a = float(res.best_sequence[0, 0])
    nonneg = all(np.all(m >= 0) for m in mults)
    check("2 constrained optimum", abs(a - 0.5) <= TOL and nonneg, f"a={a:.4f}, multipliers nonnegative={nonneg}")


# -- 3. analytic gradients ------------------------------------------------------------------

def _relative_error(g, fd):
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))


def test_03_gradients():
    rng = np.random.default_rng(3)
    worst = {}
    room, pend = make_world("tworoom"), make_world("pendulum")
    for i in range(100):
        room.reset(i, {"variation": "all"})
        model = room.cost_model(free=True)
        s0 = np.r_[rng.uniform(0, 1, 2), rng.normal(0, 0.2, 2)]
        A = rng.uniform(-1, 1, (8, 2))
        _, g = model.cost_and_grad(s0, A)
        worst["point-mass"] = max(worst.get("point-mass", 0.0),
                                  _relative_error(g, finite_difference_gradient(model, s0, A, h=1e-4)))

        pend.reset(i, {"variation": "all"})
        model = pend.cost_model()
        s0 = np.array([rng.uniform(-np.pi, np.pi), rng.normal()])
        A = rng.uniform(-0.9, 0.9, (8, 1)) * pend.params["u_max"]
        _, g = model.cost_and_grad(s0, A)
        worst["pendulum"] = max(worst.get("pendulum", 0.0),
                                _relative_error(g, finite_difference_gradient(model, s0, A, h=1e-4)))
    ok = max(worst.values()) <= 1e-5
    check("3 analytic gradients vs central differences", ok,
          ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# -- 4. simplex projection ------------------------------------------------------------------

def _grid_qp(v, step=1e-3):
    a = np.arange(int(round(1 / step)) + 1) * step
    if len(v) == 2:
        pts = np.stack([a, 1 - a], axis=1)
    else:
        i, j = np.meshgrid(a, a, indexing="ij")
        keep = i + j <= 1 + 1e-12
        pts = np.stack([i[keep], j[keep], 1 - i[keep] - j[keep]], axis=1)
    return pts[np.argmin(np.sum((pts - v) ** 2, axis=1))]


def test_04_simplex_projection():
    rng = np.random.default_rng(4)
    worst = 0.0
    for n in (2, 3):
        for _ in range(100):
            v = rng.uniform(-1.5, 1.5, n)
            worst = max(worst, float(np.max(np.abs(project_simplex(v) - _grid_qp(v)))))
    feasible = rng.dirichlet(np.ones(5), size=100)
    idem = float(np.max(np.abs(project_simplex(feasible) - feasible)))
    exact = (np.array_equal(project_simplex([2.0, 0.0]), [1.0, 0.0])
             and np.array_equal(project_simplex([0.4, 0.4]), [0.5, 0.5]))
    # a grid of pitch 1e-3 can be off by up to one step per coordinate
    ok = worst <= 1.5e-3 and idem <= 1e-12 and exact
    check("4 simplex projection", ok, f"grid gap {worst:.1e}, idempotence {idem:.1e}, examples exact={exact}")


# -- 5. colored noise -------------------------------------------------------------------------

def test_05_colored_noise():
    x = sample_colored(make_rng(1), ColoredNoiseSpec(2.0, 1024, 1), 10**4)[..., 0]
    power = np.mean(np.abs(np.fft.rfft(x, axis=-1)) ** 2, axis=0)
    f = np.fft.rfftfreq(1024)
    slope = float(np.polyfit(np.log(f[1:]), np.log(power[1:]), 1)[0])
    white = sample_colored(make_rng(4), ColoredNoiseSpec(0.0, 1000, 1), 100).ravel()
    pvalue = float(stats.ks_2samp(white, sample_gaussian(make_rng(5), 10**5, 1, 1).ravel()).pvalue)
    check("5 colored noise", abs(slope + 2) <= 0.3 and pvalue > 0.01, f"slope {slope:.3f}, KS p={pvalue:.3f}")


# -- 6. Gumbel-max ------------------------------------------------------------------------

def test_06_gumbel_max():
    pvalues = []
    root = make_rng(6)
    for K in range(2, 9):
        p = np.random.default_rng(K).dirichlet(np.ones(K))
        counts = np.bincount(gumbel_max_sample(root.split(K), p, 10**5), minlength=K)
        pvalues.append(float(stats.chisquare(counts, 10**5 * p).pvalue))
    p = np.random.default_rng(0).dirichlet(np.ones(6))
    same = np.array_equal(gumbel_max_sample(make_rng(9), p, 1000), gumbel_max_sample(make_rng(9), 3 * p, 1000))
    check("6 gumbel-max sampling", min(pvalues) > 0.01 and same, f"min chi2 p={min(pvalues):.3f}, p vs 3p same={same}")


# -- 7. discrete planning ------------------------------------------------------------------

def _brute_force_step(walls, s0, goal):
    dists = []
    for a in range(len(MOVES)):
        nxt = s0 + MOVES[a]
        if np.any(nxt < 0) or np.any(nxt >= walls.shape[0]) or walls[int(nxt[0]), int(nxt[1])]:
            nxt = s0
        dists.append(np.sum((nxt - goal) ** 2))
    return int(np.argmin(dists))


def test_07_discrete_planning():
    walls = np.zeros((7, 7), bool)
    s0 = np.array([3.0, 3.0])
    results = {}
    for name, step in {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}.items():
        goal = s0 + step
        model = GridCost(walls, goal)
        want = _brute_force_step(walls, s0, goal)
        ccem = categorical_cem_solve(model, s0, DiscreteActionSpace(5),
                                     SamplingSolverConfig(horizon=1, num_candidates=64, iterations=5, num_elites=8,
                                                          momentum=0.0), rng=make_rng(0))
        pgd = pgd_solve(model, s0, DiscreteActionSpace(5),
                        GradientSolverConfig(horizon=1, iterations=50, step_size=0.5))
        results[name] = int(ccem.extras["actions"][0]) == want and int(pgd.extras["actions"][0]) == want
    check("7 discrete planning decodes all directions", all(results.values()),
          ", ".join(f"{k}={'ok' if v else 'wrong'}" for k, v in results.items()))


# -- 8. two-room MPC vs random --------------------------------------------------------------

def _cem_mpc(seed=0):
    cfg = SamplingSolverConfig(horizon=10, num_candidates=100, iterations=10, num_elites=10)
    return mpc_policy(None, MPCPolicyConfig("cem", cfg, replan_every=5), seed)


def test_08_mpc_beats_random():
    pool = EnvPool("tworoom", 4)
    cfg = EvalConfig(episodes=100, seed=0, budget=50, timing=False)
    mpc = evaluate_episodic(pool, _cem_mpc(), cfg)
    rnd = evaluate_episodic(pool, RandomPolicy(pool.envs[0].action_space, 0), cfg)
    ok = mpc.success_rate >= 0.9 and rnd.success_rate <= 0.2 and mpc.seeds == rnd.seeds
    check("8 two-room MPC vs random", ok, f"cem {mpc.success_rate:.2f}, random {rnd.success_rate:.2f}")


# -- 9. dataset-driven protocol ---------------------------------------------------------

@pytest.fixture(scope="module")
def expert_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("accept") / "expert.swmt"
    collect(EnvPool("tworoom", 4), expert_policy("tworoom"), 100, seed=3, out=path)
    return path


def test_09_dataset_protocol(expert_dataset):
    delta = 25
    cfg = EvalConfig(episodes=100, seed=0, budget=50, dataset=str(expert_dataset), goal_offset=delta, timing=False)
    with TrajectoryFile(expert_dataset) as f:
        pairs = dataset_pairs(f, cfg)
        seqs = [f.read_window(e, t, delta, columns=["action"])["action"] for e, t in pairs]
    pool = EnvPool("tworoom", 4)
    replay = evaluate_from_dataset(pool, ReplayPolicy(seqs), cfg)
    mpc = evaluate_from_dataset(pool, _cem_mpc(), cfg)
    ok = replay.success_rate == 1.0 and mpc.success_rate >= 0.9
    check("9 dataset-driven protocol", ok, f"replay {replay.success_rate:.2f}, cem {mpc.success_rate:.2f}")


# -- 10. factor-of-variation sweep -----------------------------------------------------------

def test_10_fov_sweep():
    keys = ["door.center", "door.width", "physics.dt", "physics.drag", "physics.v_max"]
    cfg = EvalConfig(episodes=20, seed=5, budget=50, timing=False)
    pool = EnvPool("tworoom", 4)
    rows = fov_sweep(pool, _cem_mpc(), cfg, keys)
    direct = evaluate_episodic(pool, _cem_mpc(), cfg, "baseline")
    table = reports_to_csv(rows)
    ok = [r[0] for r in rows] == ["baseline"] + keys and rows[0][1].emit() == direct.emit()
    ok = ok and len(table.strip().splitlines()) == len(keys) + 2
    rates = ", ".join(f"{k} {r.success_rate:.2f}" for k, r in rows)
    check("10 factor sweep table, baseline identical", ok, rates)


# -- 11. data layer ------------------------------------------------------------------------

def test_11_data_layer(tmp_path):
    schema = TrajectorySchema((Column("state", "f32", (3,)), Column("action", "f32", (2,)),
                               Column("terminated", "bool", ())))
    rng = np.random.default_rng(11)
    eps = []
    for _ in range(500):
        T = int(rng.integers(1, 60))
        eps.append({"state": rng.normal(size=(T, 3)).astype(np.float32),
                    "action": rng.normal(size=(T, 2)).astype(np.float32),
                    "terminated": rng.random(T) < 0.05})
    path = tmp_path / "a.swmt"
    write_trajectories(path, schema, eps, [rng.normal(size=2) for _ in eps])
    errors = 0
    with TrajectoryFile(path) as f:
        exact = all(np.array_equal(f.read_episode(i)[c], eps[i][c]) for i in range(len(eps)) for c in schema.names)
        for _ in range(10**4):
            e = int(rng.integers(len(f)))
            T = int(f.lengths[e])
            t = int(rng.integers(T))
            w = int(rng.integers(1, T - t + 1))
            try:
                got = f.read_window(e, t, w)
                errors += not np.array_equal(got["state"], eps[e]["state"][t : t + w])
            except Exception:
                errors += 1

    T = 10**5
    long_ep = {"state": rng.normal(size=(T, 3)).astype(np.float32),
               "action": rng.normal(size=(T, 2)).astype(np.float32), "terminated": np.zeros(T, bool)}
    long_path = tmp_path / "long.swmt"
    write_trajectories(long_path, schema, [long_ep])

    def median_latency(f, start, reps=400):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            f.read_window(0, start, 64)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    with TrajectoryFile(long_path) as f:
        median_latency(f, 0, 50)
        early, late = median_latency(f, 0), median_latency(f, T - 64)
    ratio = max(early, late) / min(early, late)

    data = bytearray(path.read_bytes())
    data[(len(data) - FOOTER.size) // 2] ^= 0x10
    path.write_bytes(bytes(data))
    try:
        TrajectoryFile(path).close()
        detected = False
    except FormatError:
        detected = True
    ok = exact and errors == 0 and ratio <= 2.0 and detected
    check("11 data layer", ok, f"bit exact={exact}, window errors={errors}, latency ratio {ratio:.2f}, "
                               f"corruption detected={detected}")


# -- 12. CLI determinism -----------------------------------------------------------------------

def _quiet(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
        code = cli_main(argv)
    return code, buf.getvalue()


def test_12_cli_determinism(tmp_path):
    collect_args = ["collect", "--env", "tworoom", "--policy", "random", "--episodes", "50", "--seed", "7",
                    "--variation", "all", "--max-steps", "60"]
    eval_args = ["evaluate", "--env", "tworoom", "--solver", "cem", "--horizon", "10", "--replan-every", "5",
                 "--budget", "50", "--episodes", "20", "--seed", "0"]
    blobs, reports, codes = [], [], []
    for i, width in enumerate((1, 8, 1, 8)):
        out = tmp_path / f"c{i}.swmt"
        code, _ = _quiet(collect_args + ["--num-envs", str(width), "--out", str(out)])
        codes.append(code)
        blobs.append(out.read_bytes() if out.exists() else b"")
        code, text = _quiet(eval_args + ["--num-envs", str(width)])
        codes.append(code)
        reports.append(text)
    ok = set(codes) == {0} and len(set(blobs)) == 1 and len(set(reports)) == 1 and blobs[0] and reports[0]
    check("12 CLI byte-identical across repeats and pool widths 1/8", bool(ok),
          f"exit codes {sorted(set(codes))}, distinct files {len(set(blobs))}, distinct reports {len(set(reports))}")


# -- 13. GRASP -----------------------------------------------------------------------------

def test_13_grasp():
    world = make_world("tworoom")
    world.reset(0)
    rng = np.random.default_rng(13)
    pins_ok, certified, worst = True, 0, 0.0
    for _ in range(10):
        start = rng.uniform(0.2, 0.8, 2)
        goal = np.clip(start + rng.uniform(-0.2, 0.2, 2), 0.0, 1.0)
        s0, sg = np.r_[start, 0.0, 0.0], np.r_[goal, 0.0, 0.0]
        model = world.cost_model(goal=sg, free=True)
        ref = cem_solve(model, s0, SamplingSolverConfig(horizon=10, num_candidates=200, iterations=20, num_elites=20),
                        rng=make_rng(0))
        if np.linalg.norm(model.rollout(s0, ref.best_sequence[None])[0, -1, :2] - goal) > TOL:
            continue
        certified += 1
        pins = []
        res = grasp_solve(model, s0, sg, GraspConfig(horizon=10, sync_interval=10), rng=make_rng(0),
                          callback=lambda k, z, A: pins.append(np.array_equal(z[0], s0) and np.array_equal(z[-1], sg)))
        pins_ok = pins_ok and bool(pins) and all(pins)
        worst = max(worst, float(np.linalg.norm(model.rollout(s0, res.best_sequence[None])[0, -1, :2] - goal)))
    ok = pins_ok and certified > 0 and worst <= TOL
    check("13 GRASP pins and goal reach", ok, f"{certified} certified instances, worst distance {worst:.3f}, "
                                              f"pins held={pins_ok}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
