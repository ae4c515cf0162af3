import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planbench.core import ContractError, finite_difference_gradient, one_hot
from planbench.rng import make_rng
from planbench.worlds import EnvPool, VariationError, list_worlds, make_world
from planbench.worlds.gridworld import GridCost, bfs_distances, wall_layout
from planbench.worlds.pendulum import wrap_angle
from planbench.worlds.tworoom import WALL_GAP, WALL_X, route_distance
from planbench.worlds.variation import sample_variation


def test_registry():
    assert list_worlds() == ["gridworld", "pendulum", "tworoom"]
    with pytest.raises(ContractError):
        make_world("nope")


# -- two-room ---------------------------------------------------------------------

def rest(x, y):
    return np.array([x, y, 0.0, 0.0])


def test_tworoom_fixed_point():
    w = make_world("tworoom")
    w.reset(0, {"variation_values": {"physics.drag": 0.0}})
    w.set_state(rest(0.3, 0.3))
    s, _, _ = w.step([0.0, 0.0])
    np.testing.assert_array_equal(s, rest(0.3, 0.3))


def test_tworoom_euler_step():
    w = make_world("tworoom")
    w.reset(0, {"variation_values": {"physics.drag": 0.0}})
    w.set_state(rest(0.2, 0.3))
    s, _, _ = w.step([1.0, 0.0])
    np.testing.assert_allclose(s, [0.21, 0.3, 0.1, 0.0], atol=1e-12)


def test_tworoom_wall_blocks_outside_door():
    w = make_world("tworoom")
    w.reset(0, {"variation_values": {"physics.drag": 0.0}})
    w.set_state(np.array([0.49, 0.1, 0.3, 0.0]))
    s, _, _ = w.step([1.0, 0.0])
    assert s[0] == WALL_X - WALL_GAP and s[2] == 0.0


def test_tworoom_door_lets_agent_through():
    w = make_world("tworoom")
    w.reset(0, {"variation_values": {"physics.drag": 0.0}})
    w.set_state(np.array([0.49, 0.5, 0.3, 0.0]))
    s, _, _ = w.step([1.0, 0.0])
    assert s[0] > WALL_X


def test_tworoom_domain_boundary_clamps():
    w = make_world("tworoom")
    w.reset(0)
    w.set_state(np.array([0.999, 0.5, 0.5, 0.0]))
    s, _, _ = w.step([1.0, 0.0])
    assert s[0] == 1.0 - WALL_GAP and s[2] == 0.0


def test_reset_determinism_and_pinning():
    w = make_world("tworoom")
    a, ia = w.reset(17, {"variation": "all"})
    b, ib = w.reset(17, {"variation": "all"})
    np.testing.assert_array_equal(a, b)
    assert ia["variation"].keys() == ib["variation"].keys()
    for k in ia["variation"]:
        np.testing.assert_array_equal(ia["variation"][k], ib["variation"][k])
    _, info = w.reset(3, {"variation_values": {"goal.position": (0.9, 0.9)}})
    np.testing.assert_array_equal(info["goal"][:2], [0.9, 0.9])
    np.testing.assert_array_equal(info["variation"]["goal.position"], [0.9, 0.9])


def test_reset_starts_at_rest_in_opposite_rooms():
    w = make_world("tworoom")
    for seed in range(200):
        s, info = w.reset(seed)
        assert np.all(s[2:] == 0)
        assert (s[0] - WALL_X) * (info["goal"][0] - WALL_X) < 0


@pytest.mark.parametrize("name", ["tworoom", "pendulum", "gridworld"])
def test_all_variation_stays_in_bounds(name):
    w = make_world(name)
    space = w.variations
    for seed in range(1000):
        _, info = w.reset(seed, {"variation": "all"})
        for k, v in info["variation"].items():
            f = space[k]
            if f.kind == "box":
                assert np.all(np.asarray(v) >= f.low) and np.all(np.asarray(v) <= f.high), k
            elif f.kind == "discrete":
                assert v in f.values, k


def test_room_constraint_holds_over_many_samples():
    space = make_world("tworoom").variations
    rng = make_rng(0)
    for i in range(10**4):
        v = sample_variation(space, rng.split(i), {"variation": ["agent.start", "goal.position"]})
        sx, gx = v["agent.start"][0], v["goal.position"][0]
        assert (sx - WALL_X) * (gx - WALL_X) < 0


def test_sample_variation_defaults_and_endpoints():
    space = make_world("tworoom").variations
    v = sample_variation(space, make_rng(0), None)
    for k, d in space.defaults().items():
        np.testing.assert_array_equal(v[k], d)
    v = sample_variation(space, make_rng(0), {"variation_values": {"physics.drag": 0.3}})
    assert v["physics.drag"] == 0.3


def test_invalid_options_rejected():
    w = make_world("tworoom")
    with pytest.raises(VariationError):
        w.reset(0, {"variation": ["no.such.key"]})
    with pytest.raises(VariationError):
        w.reset(0, {"variation_values": {"physics.drag": 0.9}})
    with pytest.raises(VariationError):
        w.reset(0, {"bogus": 1})


def test_unsatisfiable_constraint_names_itself():
    w = make_world("tworoom")
    # a goal on the wall line can never be in the opposite room from any start
    with pytest.raises(VariationError, match="different rooms"):
        w.reset(0, {"variation_values": {"goal.position": (0.5, 0.5)}})


def test_constraints_skip_fully_pinned_tasks():
    w = make_world("tworoom")
    s, info = w.reset(0, {"variation_values": {"agent.start": (0.2, 0.5), "goal.position": (0.3, 0.5)}})
    np.testing.assert_array_equal(s[:2], [0.2, 0.5])


def test_step_before_reset_and_nonfinite_state():
    w = make_world("tworoom")
    with pytest.raises(ContractError):
        w.step([0.0, 0.0])
    w.reset(0)
    w.state = np.array([np.nan, 0.5, 0.0, 0.0])
    with pytest.raises(ContractError):
        w.step([0.0, 0.0])


@pytest.mark.parametrize("key,value", [("physics.dt", 0.15), ("physics.drag", 0.2), ("physics.v_max", 0.3),
                                       ("door.width", 0.15)])
def test_factor_changes_only_its_own_effect(key, value):
    base_w, alt_w = make_world("tworoom"), make_world("tworoom")
    s_base, _ = base_w.reset(5)
    s_alt, _ = alt_w.reset(5, {"variation_values": {key: value}})
    np.testing.assert_array_equal(s_base, s_alt)
    np.testing.assert_array_equal(base_w.goal, alt_w.goal)
    changed = {k for k in base_w.params if base_w.params[k] != alt_w.params[k]}
    assert len(changed) == 1


def test_tworoom_success_predicate():
    w = make_world("tworoom")
    goal = rest(0.7, 0.5)
    assert w.success(rest(0.7 + 0.049, 0.5), goal)
    assert not w.success(rest(0.7 + 0.051, 0.5), goal)


def test_episode_determinism():
    actions = np.random.default_rng(0).uniform(-1, 1, (40, 2))
    runs = []
    for _ in range(2):
        w = make_world("tworoom")
        w.reset(8, {"variation": "all"})
        runs.append(np.stack([w.step(a)[0] for a in actions]))
    np.testing.assert_array_equal(runs[0], runs[1])


def test_route_distance_through_door():
    # same room: straight line
    assert route_distance(np.array([[0.1, 0.1]]), np.array([0.4, 0.5]), 0.5, 0.3)[0] == pytest.approx(0.5)
    # crossing inside the door: straight line as well
    d = route_distance(np.array([[0.2, 0.5]]), np.array([0.8, 0.5]), 0.5, 0.3)[0]
    assert d == pytest.approx(0.6)
    # crossing below the door must bend up to its lower edge (inset by 0.02)
    d = route_distance(np.array([[0.2, 0.1]]), np.array([0.8, 0.1]), 0.5, 0.3)[0]
    y = 0.35 + 0.02
    assert d == pytest.approx(2 * np.hypot(0.3, y - 0.1))


# -- cost models -----------------------------------------------------------------

def test_cost_zero_at_goal():
    w = make_world("tworoom")
    w.reset(0)
    for free in (True, False):
        model = w.cost_model(goal=rest(0.3, 0.3), free=free)
        assert model.cost(rest(0.3, 0.3), np.zeros((5, 2))) == 0.0
    c, g = w.cost_model(goal=rest(0.3, 0.3), free=True).cost_and_grad(rest(0.3, 0.3), np.zeros((5, 2)))
    assert c == 0.0 and np.all(g == 0)


def test_action_weight_is_linear():
    w = make_world("tworoom")
    w.reset(0)
    A = np.random.default_rng(0).uniform(-1, 1, (6, 2))
    s0 = rest(0.2, 0.4)
    m0 = w.cost_model(free=True, action_weight=0.0).cost(s0, A)
    m1 = w.cost_model(free=True, action_weight=0.01).cost(s0, A)
    m2 = w.cost_model(free=True, action_weight=0.02).cost(s0, A)
    assert (m2 - m0) == pytest.approx(2 * (m1 - m0), rel=1e-12)


def test_goal_dimension_checked():
    w = make_world("tworoom")
    w.reset(0)
    with pytest.raises(ValueError):
        w.cost_model(goal=np.zeros(2))


def test_constraint_adapter():
    w = make_world("tworoom")
    w.reset(0)
    A = np.array([[1.0, 0.0], [0.3, 0.4]])
    G, _ = w.cost_model(a_max=0.5).constraints_and_jac(rest(0.2, 0.2), A)
    np.testing.assert_allclose(G, [0.75, 0.0], atol=1e-12)


def relative_error(g, fd):
    return np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)


def test_point_mass_gradient_matches_fd():
    w = make_world("tworoom")
    rng = np.random.default_rng(1)
    for i in range(100):
        w.reset(i, {"variation": "all"})
        model = w.cost_model(free=True)
        s0 = np.r_[rng.uniform(0, 1, 2), rng.normal(0, 0.2, 2)]
        A = rng.uniform(-1, 1, (8, 2))
        _, g = model.cost_and_grad(s0, A)
        assert relative_error(g, finite_difference_gradient(model, s0, A)) <= 1e-5


def test_pendulum_gradient_matches_fd():
    w = make_world("pendulum")
    rng = np.random.default_rng(2)
    for i in range(100):
        w.reset(i, {"variation": "all"})
        model = w.cost_model()
        s0 = np.array([rng.uniform(-np.pi, np.pi), rng.normal()])
        # keep torques away from the clip points, where the cost has kinks
        A = rng.uniform(-0.9, 0.9, (8, 1)) * w.params["u_max"]
        _, g = model.cost_and_grad(s0, A)
        assert relative_error(g, finite_difference_gradient(model, s0, A)) <= 1e-5


def test_grid_gradient_matches_fd():
    rng = np.random.default_rng(3)
    walls = np.zeros((8, 8), bool)
    walls[4, 2:6] = True
    model = GridCost(walls, np.array([6.0, 6.0]))
    for _ in range(50):
        P = rng.dirichlet(np.ones(5), size=6)
        s0 = np.array([1.0, 1.0])
        _, g = model.cost_and_grad(s0, P)
        fd = finite_difference_gradient(model, s0, P, h=1e-6)
        assert relative_error(g, fd) <= 1e-5


# -- pendulum ----------------------------------------------------------------------

def test_pendulum_equilibria():
    w = make_world("pendulum")
    w.reset(0)
    for theta in (0.0, np.pi):
        w.set_state([theta, 0.0])
        s, _, _ = w.step([0.0])
        np.testing.assert_allclose(s, [theta, 0.0], atol=1e-12)


def test_pendulum_euler_step():
    w = make_world("pendulum")
    w.reset(0, {"variation_values": {"physics.gravity": 9.8, "pole.length": 1.0, "physics.damping": 0.0}})
    w.set_state([np.pi / 2, 0.0])
    s, _, _ = w.step([0.0])
    np.testing.assert_allclose(s, [np.pi / 2 + 0.0245, 0.49], atol=1e-12)


@given(st.floats(-50, 50))
def test_wrap_angle_range(theta):
    w = float(wrap_angle(theta))
    assert -np.pi < w <= np.pi
    assert np.isclose(np.sin(w), np.sin(theta), atol=1e-9) and np.isclose(np.cos(w), np.cos(theta), atol=1e-9)


def test_pendulum_success_predicate():
    w = make_world("pendulum")
    goal = np.array([np.pi, 0.0])
    assert w.success([np.pi - 0.099, 0.99], goal)
    assert w.success([-np.pi + 0.05, -0.5], goal)
    assert not w.success([np.pi - 0.11, 0.0], goal)
    assert not w.success([np.pi, 1.01], goal)


def test_pendulum_torque_is_clipped():
    w = make_world("pendulum")
    w.reset(0, {"variation_values": {"actuator.u_max": 1.0}})
    w.set_state([0.0, 0.0])
    a = w.step([5.0])[0]
    w.set_state([0.0, 0.0])
    b = w.step([1.0])[0]
    np.testing.assert_array_equal(a, b)


# -- gridworld -----------------------------------------------------------------------

def open_grid(**values):
    w = make_world("gridworld")
    w.reset(0, {"variation_values": {"walls.density": 0.0, **values}})
    return w


def test_grid_stay_and_boundary():
    w = open_grid(**{"agent.start": (0.0, 0.0)})
    s0 = w.state.copy()
    np.testing.assert_array_equal(w.step(4)[0], s0)
    np.testing.assert_array_equal(w.step(1)[0], s0)  # down, off the grid
    np.testing.assert_array_equal(w.step(2)[0], s0)  # left, off the grid
    np.testing.assert_array_equal(w.step(3)[0], s0 + [1, 0])


def test_grid_walls_block():
    w = make_world("gridworld")
    for seed in range(200):
        w.reset(seed, {"variation": "all"})
        if w.walls.any():
            break
    wx, wy = np.argwhere(w.walls)[0]
    for a, move in enumerate([(0, 1), (0, -1), (-1, 0), (1, 0)]):
        cell = np.array([wx, wy]) - move
        if np.all(cell >= 0) and np.all(cell < w.size) and not w.walls[cell[0], cell[1]]:
            w.set_state(cell.astype(float))
            np.testing.assert_array_equal(w.step(a)[0], cell)
            return
    pytest.skip("wall had no open neighbour")


def test_grid_invalid_action():
    w = open_grid()
    with pytest.raises(ContractError):
        w.step(5)


def test_grid_relaxed_matches_discrete():
    rng = np.random.default_rng(4)
    w = make_world("gridworld")
    for seed in range(30):
        w.reset(seed, {"variation": "all"})
        actions = rng.integers(0, 5, 12)
        s0 = w.state.copy()
        model = w.cost_model()
        traj, _, _ = model._rollout(s0, one_hot(actions, 5)[None])
        for t, a in enumerate(actions):
            np.testing.assert_array_equal(w.step(int(a))[0], traj[0, t + 1])
        # and the cost of the one-hot rows equals the cost of that discrete path
        err = traj[0, 1:] - w.goal
        expected = np.sum(err**2) + 0.01 * len(actions)
        assert model.cost(s0, one_hot(actions, 5)) == pytest.approx(expected, rel=1e-12)


def test_grid_tasks_are_connected():
    w = make_world("gridworld")
    for seed in range(300):
        s, _ = w.reset(seed, {"variation": "all"})
        d = bfs_distances(w.walls, w.goal.astype(int))
        assert d[int(s[0]), int(s[1])] > 0


def test_grid_pinned_wall_cell_rejected():
    w = make_world("gridworld")
    for seed in range(1000):
        if wall_layout(8, seed, 0.3)[0, 0]:
            with pytest.raises(VariationError):
                w.reset(0, {"variation_values": {"walls.seed": seed, "walls.density": 0.3,
                                                 "agent.start": (0.0, 0.0)}})
            return
    pytest.skip("no layout with a wall at the origin")


# -- environment pool --------------------------------------------------------------

@pytest.mark.parametrize("width", [1, 3, 8])
def test_pool_results_do_not_depend_on_width(width):
    def run(env, slot, i):
        s, _ = env.reset(i, {"variation": "all"})
        for _ in range(5):
            s, _, _ = env.step(make_rng(i).uniform(-1, 1, 2))
        return s

    expected = EnvPool("tworoom", 1).map(run, list(range(20)))
    got = EnvPool("tworoom", width).map(run, list(range(20)))
    np.testing.assert_array_equal(np.stack(expected), np.stack(got))


def test_pool_rejects_zero_width():
    with pytest.raises(ContractError):
        EnvPool("tworoom", 0)
