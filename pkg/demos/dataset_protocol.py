"""Collect expert trajectories, then evaluate goal reaching between stored states.

Starts and goals are drawn from the same recorded episode, 25 steps apart, so
every goal is reachable. Replaying the stored actions is a sanity ceiling.

Run: python demos/dataset_protocol.py
"""
import json
import tempfile
from pathlib import Path

from planbench.data import TrajectoryFile, collect, inspect
from planbench.eval import EvalConfig, dataset_pairs, evaluate_from_dataset
from planbench.policy import MPCPolicyConfig, ReplayPolicy, expert_policy, mpc_policy
from planbench.solvers import SamplingSolverConfig
from planbench.worlds import EnvPool


def main():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "expert.swmt"
        pool = EnvPool("tworoom", 4)
        summary = collect(pool, expert_policy("tworoom"), 60, seed=1, out=path)
        print("collected:", json.dumps(summary))
        print("file:", json.dumps({k: v for k, v in inspect(path).items() if k != "columns"}))

        delta = 25
        cfg = EvalConfig(episodes=40, seed=0, budget=50, dataset=str(path), goal_offset=delta, timing=False)
        with TrajectoryFile(path) as f:
            pairs = dataset_pairs(f, cfg)
            recorded = [f.read_window(e, t, delta, columns=["action"])["action"] for e, t in pairs]

        replay = evaluate_from_dataset(pool, ReplayPolicy(recorded), cfg, "replay")
        cem = SamplingSolverConfig(horizon=10, num_candidates=100, iterations=10, num_elites=10)
        planned = evaluate_from_dataset(pool, mpc_policy(None, MPCPolicyConfig("cem", cem, replan_every=5)), cfg,
                                        "cem")
        for rep in (replay, planned):
            print(f"{rep.label:>6}: success {rep.success_rate:.2f} over {rep.n} start/goal pairs")


if __name__ == "__main__":
    main()
