"""Side-by-side run of the continuous solvers on two problems.

First a separable quadratic with a known optimum, then the pendulum swing-up
cost from the hanging position. GRASP gets the free point-mass, which is the
only model here with state jacobians.

Plain gradient descent never leaves the hanging pendulum: with zero torques the
gradient vanishes by symmetry, which is why sampling planners are the default.

Run: python demos/solver_comparison.py
"""
import numpy as np

from planbench.rng import make_rng
from planbench.solvers import (
    GradientSolverConfig,
    GraspConfig,
    LagrangianConfig,
    SamplingSolverConfig,
    cem_solve,
    gd_solve,
    grasp_solve,
    icem_solve,
    lagrangian_solve,
    mppi_solve,
    predictive_sampling_solve,
)
from planbench.toy import QuadraticCost
from planbench.worlds import make_world


def runs(H):
    sampling = SamplingSolverConfig(horizon=H, num_candidates=300, iterations=20, num_elites=30)
    gradient = GradientSolverConfig(horizon=H, iterations=200, step_size=0.05)
    return {
        "predictive_sampling": lambda m, s0: predictive_sampling_solve(m, s0, sampling, rng=make_rng(0)),
        "cem": lambda m, s0: cem_solve(m, s0, sampling, rng=make_rng(0)),
        "icem": lambda m, s0: icem_solve(m, s0, sampling, rng=make_rng(0)),
        "mppi": lambda m, s0: mppi_solve(
            m, s0, SamplingSolverConfig(horizon=H, num_candidates=1000, iterations=30, num_elites=1000,
                                        init_scale=0.2, temperature=0.1), rng=make_rng(0)),
        "gd": lambda m, s0: gd_solve(m, s0, gradient, rng=make_rng(0)),
    }


def table(title, model, s0, H, score):
    print(title)
    for name, run in runs(H).items():
        res = run(model, s0)
        print(f"  {name:>20}  cost {res.best_cost:10.4f}  {score(res.best_sequence)}  "
              f"{res.cost_evaluations:7d} evaluations  {res.wall_time * 1e3:7.1f} ms")


def main():
    quad = QuadraticCost(0.3, dim=2)
    table("quadratic, optimum 0.3 everywhere", quad, None, 4,
          lambda A: f"max error {np.max(np.abs(A - 0.3)):.3f}")

    env = make_world("pendulum")
    env.reset(0, {"variation_values": {"agent.theta0": 0.0}})
    s0 = env.state.copy()
    model = env.cost_model()

    def final_angle(A):
        env.set_state(s0)
        for a in A:
            state, _, _ = env.step(a)
        return f"final angle {state[0]:+.2f}"

    table("pendulum swing-up from rest, horizon 30", model, s0, 30, final_angle)

    constrained = QuadraticCost(0.9, action_limit=0.5)
    res = lagrangian_solve(constrained, None, LagrangianConfig(
        GradientSolverConfig(horizon=1, iterations=50, step_size=0.05), outer_iterations=30,
        penalty_scale=1.5, penalty_max=10.0), rng=make_rng(0))
    print(f"constrained optimum (|a| <= 0.5, target 0.9): {res.best_sequence[0, 0]:.3f}, "
          f"multiplier {res.extras['multipliers'][0]:.3f}")

    room = make_world("tworoom")
    room.reset(0)
    s0, goal = np.array([0.3, 0.3, 0.0, 0.0]), np.array([0.45, 0.4, 0.0, 0.0])
    free = room.cost_model(goal=goal, free=True)
    res = grasp_solve(free, s0, goal, GraspConfig(horizon=10), rng=make_rng(0))
    final = free.rollout(s0, res.best_sequence[None])[0, -1, :2]
    print(f"grasp on the point-mass: final distance {np.linalg.norm(final - goal[:2]):.3f}")


if __name__ == "__main__":
    main()
