"""How much does each two-room factor of variation hurt a CEM planner?

Every row re-runs the same seeded episodes with one factor re-sampled, so the
baseline row is directly comparable with the rest.

Run: python demos/fov_sweep.py
"""
from planbench.eval import EvalConfig, fov_sweep, reports_to_csv
from planbench.policy import MPCPolicyConfig, mpc_policy
from planbench.solvers import SamplingSolverConfig
from planbench.worlds import EnvPool

FACTORS = ["door.center", "door.width", "physics.dt", "physics.drag", "physics.v_max"]


def main():
    cfg = SamplingSolverConfig(horizon=10, num_candidates=100, iterations=10, num_elites=10)
    policy = mpc_policy(None, MPCPolicyConfig("cem", cfg, replan_every=5))
    rows = fov_sweep(EnvPool("tworoom", 4), policy, EvalConfig(episodes=30, seed=0, budget=50), FACTORS)
    print(reports_to_csv(rows), end="")


if __name__ == "__main__":
    main()
