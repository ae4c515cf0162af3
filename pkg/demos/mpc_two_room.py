"""Plan through a doorway with CEM-based MPC and compare against random actions.

Run: python demos/mpc_two_room.py
"""
import numpy as np

from planbench.eval import EvalConfig, evaluate_episodic
from planbench.policy import MPCPolicyConfig, RandomPolicy, mpc_policy
from planbench.rng import make_rng
from planbench.solvers import SamplingSolverConfig
from planbench.worlds import EnvPool, make_world


def cem_policy(seed=0):
    cfg = SamplingSolverConfig(horizon=10, num_candidates=100, iterations=10, num_elites=10)
    return mpc_policy(None, MPCPolicyConfig("cem", cfg, replan_every=5), seed)


def trace_one_episode():
    env = make_world("tworoom")
    # start in the left room, goal in the right one: the plan has to find the door
    opts = {"variation_values": {"agent.start": (0.2, 0.2), "goal.position": (0.8, 0.8)}}
    _, info = env.reset(0, opts)
    policy = cem_policy()
    policy.on_reset(env, 0, rng=make_rng(0), episode=0)
    print(f"door centre {env.params['door_center']:.2f}, width {env.params['door_width']:.2f}")
    for t in range(50):
        state, done, info = env.step(policy.get_action(info))
        if t % 5 == 0 or done:
            print(f"  step {t + 1:2d}  position ({state[0]:.2f}, {state[1]:.2f})")
        if done:
            print(f"reached the goal after {t + 1} steps")
            return
    print("budget exhausted")


def main():
    trace_one_episode()
    pool = EnvPool("tworoom", 4)
    cfg = EvalConfig(episodes=50, seed=0, budget=50, timing=False)
    planned = evaluate_episodic(pool, cem_policy(), cfg, "cem")
    random = evaluate_episodic(pool, RandomPolicy(pool.envs[0].action_space, 0), cfg, "random")
    for rep in (planned, random):
        ttg = "-" if rep.mean_time_to_goal is None else f"{rep.mean_time_to_goal:.1f}"
        print(f"{rep.label:>7}: success {rep.success_rate:.2f}, mean steps to goal {ttg}")
    assert np.array_equal(planned.seeds, random.seeds)


if __name__ == "__main__":
    main()
