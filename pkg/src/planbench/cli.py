"""``planbench`` command line.

Exit codes: 0 success, 2 usage error, 1 runtime error. Errors are printed
to stderr prefixed with the stage that failed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import ConfigurationError, ContractError, DiscreteActionSpace
from .data import collect, inspect
from .eval import EvalConfig, evaluate_episodic, evaluate_from_dataset, fov_sweep, reports_to_csv
from .policy import MPCPolicy, MPCPolicyConfig, SOLVERS, expert_policy, random_policy
from .solvers import GradientSolverConfig, GraspConfig, LagrangianConfig, SamplingSolverConfig
from .worlds import EnvPool, list_worlds, make_world
from .worlds.variation import ResetOptions, VariationError


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")


def _csv_list(text: str | None) -> list:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _parse_value(factor, text: str):
    parts = _csv_list(text)
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--set {factor.key}: {text!r} is not numeric") from None
    if factor.kind == "box":
        if not factor.shape and len(nums) != 1:
            raise UsageError(f"--set {factor.key}: expects a single number")
        value = np.array(nums) if factor.shape else nums[0]
    else:
        target = np.asarray(nums if len(nums) > 1 else nums[0], dtype=float)
        matches = [v for v in (factor.values or (factor.default,))
                   if np.array_equal(np.asarray(v, dtype=float), target)]
        if not matches:
            raise UsageError(f"--set {factor.key}: {text!r} is not an allowed value")
        value = matches[0]
    try:
        return factor.validate(value)
    except VariationError as exc:
        raise UsageError(str(exc)) from None


def build_options(world, variation: str | None, sets: list | None) -> ResetOptions:
    space = world.variations
    keys = _csv_list(variation)
    try:
        for k in keys:
            if k != "all":
                space[k]
    except VariationError as exc:
        raise UsageError(str(exc)) from None
    values = {}
    for item in sets or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        try:
            factor = space[key.strip()]
        except VariationError as exc:
            raise UsageError(str(exc)) from None
        values[factor.key] = _parse_value(factor, text)
    return ResetOptions(keys, values)


def solver_config(args, name: str):
    H = args.horizon
    if SOLVERS[name].config_type is SamplingSolverConfig:
        # MPPI weights every sample unless told otherwise
        elites = args.elites or (args.candidates if name == "mppi" else 10)
        elites = min(elites, args.candidates)
        return SamplingSolverConfig(
            horizon=H, num_candidates=args.candidates, iterations=args.iterations or 10,
            num_elites=elites, init_scale=args.init_scale,
            temperature=args.temperature, elites_keep=min(args.elites_keep, elites),
        )
    grad = GradientSolverConfig(horizon=H, num_candidates=args.gradient_candidates,
                                iterations=args.iterations or 30, step_size=args.step_size,
                                init_scale=args.gradient_init_scale)
    if name == "lagrangian":
        return LagrangianConfig(GradientSolverConfig(**{**grad.__dict__, "iterations": args.iterations or 10}),
                                outer_iterations=5)
    if name == "grasp":
        return GraspConfig(horizon=H, iterations=args.iterations or 30)
    return grad


def model_factory(world_name: str, solver: str):
    if world_name == "tworoom" and solver == "grasp":
        # GRASP needs one-step predictions, which only the wall-free model has
        return lambda env, goal: env.cost_model(goal, free=True)
    return lambda env, goal: env.cost_model(goal)


def build_policy(args, world, solver: str | None = None):
    kind = getattr(args, "policy", "mpc")
    if kind == "random":
        return random_policy(args.seed, world.action_space)
    if kind == "expert":
        return expert_policy(world)
    name = solver or args.solver
    if name not in SOLVERS:
        raise UsageError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
    if SOLVERS[name].discrete != isinstance(world.action_space, DiscreteActionSpace):
        raise UsageError(f"solver {name!r} does not handle the action space of {world.name!r}")
    cfg = MPCPolicyConfig(name, solver_config(args, name), args.replan_every or args.horizon // 2 or 1,
                          warm_start=not args.no_warm_start)
    return MPCPolicy(model_factory(world.name, name), cfg, seed=args.seed)


def _world(name: str):
    if name not in list_worlds():
        raise UsageError(f"unknown env {name!r}; choose from {', '.join(list_worlds())}")
    return make_world(name)


def _write(text: str, path: str | None):
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _eval_config(args, options) -> EvalConfig:
    return EvalConfig(episodes=args.episodes, seed=args.seed, budget=args.budget, options=options,
                      dataset=args.dataset, goal_offset=args.goal_offset, timing=args.timing)


# -- commands -----------------------------------------------------------------

def cmd_envs(args):
    for name in list_worlds():
        print(name)


def cmd_fovs(args):
    world = _world(args.env)
    print("key\tkind\tbounds\tdefault\tdescription")
    for row in world.describe_factors():
        print(f"{row['key']}\t{row['kind']}\t{row['bounds']}\t{row['default']}\t{row['description']}")


def cmd_collect(args):
    world = _world(args.env)
    options = build_options(world, args.variation, args.set)
    policy = random_policy(args.seed, world.action_space) if args.policy == "random" else expert_policy(world)
    try:
        summary = collect(EnvPool(args.env, args.num_envs), policy, args.episodes, args.seed, options,
                          args.out, max_steps=args.max_steps)
    except Exception as exc:
        raise StageError("collect", exc) from exc
    summary.pop("steps")
    print(json.dumps(summary, sort_keys=True))


def cmd_evaluate(args):
    world = _world(args.env)
    options = build_options(world, args.variation, args.set)
    policy = build_policy(args, world)
    cfg = _eval_config(args, options)
    try:
        pool = EnvPool(args.env, args.num_envs)
        run = evaluate_from_dataset if args.dataset else evaluate_episodic
        report = run(pool, policy, cfg, label=args.solver if args.policy == "mpc" else args.policy)
    except Exception as exc:
        raise StageError("evaluate", exc) from exc
    _write(report.emit(), args.out)


def cmd_sweep(args):
    world = _world(args.env)
    options = build_options(world, args.variation, args.set)
    keys = _csv_list(args.factors)
    try:
        for k in keys:
            world.variations[k]
    except VariationError as exc:
        raise UsageError(str(exc)) from None
    policy = build_policy(args, world)
    cfg = _eval_config(args, options)
    try:
        rows = fov_sweep(EnvPool(args.env, args.num_envs), policy, cfg, keys)
    except Exception as exc:
        raise StageError("sweep", exc) from exc
    _write(reports_to_csv(rows), args.out)
    if args.report:
        _write("".join(r.emit() for _, r in rows), args.report)


def cmd_compare(args):
    world = _world(args.env)
    options = build_options(world, args.variation, args.set)
    names = _csv_list(args.solvers)
    if not names:
        raise UsageError("--solvers needs at least one solver")
    policies = [(n, build_policy(args, world, n)) for n in names]
    cfg = _eval_config(args, options)
    rows = []
    for name, policy in policies:
        try:
            rows.append((name, evaluate_episodic(EnvPool(args.env, args.num_envs), policy, cfg, label=name)))
        except Exception as exc:
            raise StageError(f"compare-solvers ({name})", exc) from exc
    table = reports_to_csv(rows).replace("factor,", "solver,", 1)
    _write(table, args.out)
    if args.report:
        _write("".join(r.emit() for _, r in rows), args.report)


def cmd_inspect(args):
    try:
        summary = inspect(args.file)
    except Exception as exc:
        raise StageError("inspect", exc) from exc
    print(json.dumps(summary, sort_keys=True, indent=2))


# -- parser ---------------------------------------------------------------------

def _add_env_options(p):
    p.add_argument("--env", required=True, help="world id (see `envs`)")
    p.add_argument("--seed", type=int, required=True, help="run seed")
    p.add_argument("--episodes", type=int, default=100, help="number of episodes (default 100)")
    p.add_argument("--variation", help="comma-separated factor keys to sample at reset, or 'all'")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="pin a factor; vectors are comma-separated (repeatable)")
    p.add_argument("--num-envs", type=int, default=1, help="environment pool width; never changes results")


def _add_eval_options(p, solver_flag: bool = True):
    _add_env_options(p)
    if solver_flag:
        p.add_argument("--solver", default="cem", help=f"planner for --policy mpc: {', '.join(SOLVERS)}")
        p.add_argument("--policy", choices=("mpc", "expert", "random"), default="mpc",
                       help="policy to evaluate (default mpc)")
    else:
        p.set_defaults(policy="mpc", solver=None)
    p.add_argument("--horizon", type=int, default=10, help="planning horizon H (default 10)")
    p.add_argument("--budget", type=int, default=50, help="max environment steps per episode (default 50)")
    p.add_argument("--replan-every", type=int, help="actions executed per solve (default H/2)")
    p.add_argument("--no-warm-start", action="store_true", help="do not reuse the shifted previous plan")
    p.add_argument("--dataset", help="trajectory file for the dataset-driven protocol")
    p.add_argument("--goal-offset", type=int, default=25, help="steps between start and goal (default 25)")
    p.add_argument("--candidates", type=int, default=100, help="samples per iteration (default 100)")
    p.add_argument("--elites", type=int, help="elite count (default 10; all candidates for mppi)")
    p.add_argument("--elites-keep", type=int, default=0, help="iCEM elites carried over (default 0)")
    p.add_argument("--iterations", type=int, help="solver iterations (per-solver default)")
    p.add_argument("--init-scale", type=float, default=1.0, help="initial sampling std (default 1.0)")
    p.add_argument("--temperature", type=float, default=0.1, help="MPPI temperature (default 0.1)")
    p.add_argument("--step-size", type=float, default=1.0, help="gradient step size (default 1.0)")
    p.add_argument("--gradient-candidates", type=int, default=4, help="gradient-solver candidates (default 4)")
    p.add_argument("--gradient-init-scale", type=float, default=0.3,
                   help="perturbation of extra gradient candidates (default 0.3)")
    p.add_argument("--timing", action="store_true", help="record planning latency (reports are then not byte-stable)")
    p.add_argument("--out", help="write the main output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planbench", description="Planning and evaluation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("envs", help="list world ids")
    p.set_defaults(fn=cmd_envs)

    p = sub.add_parser("fovs", help="list a world's factors of variation")
    p.add_argument("env", help="world id")
    p.set_defaults(fn=cmd_fovs)

    p = sub.add_parser("collect", help="record episodes to a trajectory file")
    _add_env_options(p)
    p.add_argument("--policy", choices=("random", "expert"), default="expert", help="behaviour policy")
    p.add_argument("--out", required=True, help="output .swmt path")
    p.add_argument("--max-steps", type=int, help="truncate episodes here (default: the world's limit)")
    p.set_defaults(fn=cmd_collect)

    p = sub.add_parser("evaluate", help="evaluate a policy; prints a line-delimited JSON report")
    _add_eval_options(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="one evaluation per factor plus a baseline; prints a CSV table")
    _add_eval_options(p)
    p.add_argument("--factors", default="", help="comma-separated factor keys")
    p.add_argument("--report", help="also write every row's full report here")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("compare-solvers", help="paired-seed comparison of MPC solvers; prints a CSV table")
    _add_eval_options(p, solver_flag=False)
    p.add_argument("--solvers", required=True, help="comma-separated solver names")
    p.add_argument("--report", help="also write every solver's full report here")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("inspect", help="summarise a trajectory file")
    p.add_argument("file", help="path to a .swmt file")
    p.set_defaults(fn=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for flag in ("episodes", "num_envs", "horizon", "budget", "candidates", "elites"):
        if getattr(args, flag, 1) is not None and getattr(args, flag, 1) < 1:
            parser.print_usage(sys.stderr)
            print(f"planbench: error: --{flag.replace('_', '-')} must be >= 1", file=sys.stderr)
            return 2
    try:
        args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"planbench: error: {exc}", file=sys.stderr)
        return 2
    except (ConfigurationError, ContractError, VariationError) as exc:
        # raised while turning flags into configs
        print(f"planbench: error: configuration: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"planbench: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"planbench: error: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
