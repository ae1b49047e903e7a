"""Command-line entry point: batch experiments, presets, live sessions, server.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .harness import (
    export_csv,
    export_records_csv,
    load_config,
    run_experiment,
)
from .metrics import METRIC_NAMES, compute_record
from .policies import STEP_POLICY_IDS, get_policy, initial_state
from .presets import PRESET_NAMES, preset_config
from .solvers import offline_optimal


def cmd_simulate(args) -> int:
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return 1
    if args.reps is not None:
        config = replace(config, replications=args.reps)
    if args.seed is not None:
        config = replace(config, seed=args.seed)

    result = run_experiment(config, workers=args.workers)
    export_csv(result.rows, args.out)
    if args.records:
        export_records_csv(result.records, args.records)
    print(f"wrote {len(result.rows)} aggregate rows ({result.replications} replications) to {args.out}")
    for policy_id, count in sorted(result.nonconverged.items()):
        print(f"warning: {policy_id}: {count} non-converged replications excluded from aggregates")
    if result.eclose_violations:
        for message in result.eclose_violations:
            print(f"closeness-bound violation: {message}", file=sys.stderr)
        return 1
    return 0


def cmd_table(args) -> int:
    try:
        config = preset_config(args.preset, replications=args.reps, seed=args.seed)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    with open(args.out, "w") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    instance = config["instance"]
    n = sum(int(a.get("count", 1)) for a in instance["agents"])
    print(f"wrote preset {args.preset!r} (n={n}, budgets={instance['budgets']}) to {args.out}")
    return 0


def _parse_demand(line: str, num_resources: int):
    line = line.strip()
    if not line:
        raise ValueError("empty input")
    if line.startswith("["):
        values = json.loads(line)
        return tuple(float(v) for v in values)
    if num_resources > 1:
        return tuple(float(v) for v in line.replace(",", " ").split())
    return float(line)


def cmd_session(args) -> int:
    try:
        config = load_config(args.config)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return 1
    if args.policy not in STEP_POLICY_IDS:
        print(f"policy must be one of {list(STEP_POLICY_IDS)}", file=sys.stderr)
        return 2

    instance = config.instance
    policy = get_policy(args.policy)
    try:
        policy.check_instance(instance)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    print(f"session: {instance.n} agents, policy {args.policy}, budgets {list(instance.budgets)}")
    state = initial_state(instance)
    committed, observed = [], []
    while state.index < instance.n:
        support = instance.agents[state.index].distribution.support
        try:
            line = input(f"agent {state.index} demand> ")
        except EOFError:
            print()
            break
        try:
            theta = _parse_demand(line, instance.num_resources)
        except ValueError:
            print(f"  could not parse {line!r}; enter a number" +
                  (" or a JSON vector" if instance.num_resources > 1 else ""))
            continue
        if theta not in support:
            shown = [list(t) if isinstance(t, tuple) else t for t in support]
            print(f"  {theta!r} is not in this agent's support {shown}")
            continue
        result = policy.step(state, theta)
        state = result.state
        committed.append(result.x)
        observed.append(theta)
        extra = f"  threshold={result.threshold:.4f}" if result.threshold is not None else ""
        print(f"  allocated {[round(v, 4) for v in result.x]}  remaining {[round(b, 4) for b in state.remaining]}{extra}")

    if not committed:
        print("no allocations committed")
        return 0
    print(f"served {len(committed)} of {instance.n} agents")
    if len(committed) == instance.n:
        x_alg = np.array(committed)
        x_opt = offline_optimal(instance, tuple(observed))
        record = compute_record(args.policy, 0, x_alg, x_opt, tuple(observed), instance)
        print("hindsight optimum rows:", [[round(v, 4) for v in row] for row in x_opt.tolist()])
        for name in METRIC_NAMES:
            print(f"  {name} = {getattr(record, name):.6f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(static_dir=args.static, session_cap=args.session_cap)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        reason = str(exc) if isinstance(exc, OSError) else "startup failed, see the log above"
        print(f"server failed to start on {args.host}:{args.port}: {reason}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqfair",
        description="Sequential fair allocation: benchmark experiments and live sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a config file")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True, help="aggregate CSV output path")
    sim.add_argument("--records", default=None, help="optional per-replication CSV output path")
    sim.add_argument("--reps", type=int, default=None, help="override replication count")
    sim.add_argument("--seed", type=int, default=None, help="override base seed")
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    table = sub.add_parser("table", help="emit a named preset experiment config")
    table.add_argument("--preset", required=True, choices=PRESET_NAMES)
    table.add_argument("--out", required=True)
    table.add_argument("--reps", type=int, default=1000)
    table.add_argument("--seed", type=int, default=20260810)
    table.set_defaults(func=cmd_table)

    session = sub.add_parser("session", help="interactive terminal allocation session")
    session.add_argument("--config", required=True)
    session.add_argument("--policy", default="hope_online")
    session.set_defaults(func=cmd_session)

    serve = sub.add_parser("serve", help="run the HTTP session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--static", default=None, help="directory of console static files")
    serve.add_argument("--session-cap", type=int, default=256)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
