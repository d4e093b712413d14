"""Command-line entry points: genkb, train, sweep, eval, plotdata, expert, serve."""

from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from .agent import DQNAgent
from .kb import KnowledgeBase, generate_kb, load_kb, save_kb
from .trainer import (
    AGENT_KINDS,
    RunConfig,
    build_expert,
    build_setup,
    evaluate,
    run_training,
    sweep,
    write_plotdata,
)


def _norm_kind(kind: str) -> str:
    return kind.replace("-", "_")


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, default=300)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kb", help="KB JSON path (generated from --kb-seed when omitted)")
    p.add_argument("--kb-seed", type=int, default=7)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--hidden", type=int, default=80)
    p.add_argument("--planning-steps", type=int, default=5)
    p.add_argument("--eval-dialogues", type=int, default=50)
    p.add_argument("--goal-cap", type=int, default=30)
    p.add_argument("--demo-source", choices=["rule", "expert"], default="rule")
    p.add_argument("--expert-path")


def _config_from(args, agent_kind: str, out_dir: str | None) -> RunConfig:
    return RunConfig(
        agent_kind=_norm_kind(agent_kind),
        budget=args.budget,
        epochs=args.epochs,
        seed=args.seed,
        planning_steps=args.planning_steps,
        eval_dialogues=args.eval_dialogues,
        goal_cap_per_epoch=args.goal_cap,
        hidden_size=args.hidden,
        gamma=args.gamma,
        epsilon=args.epsilon,
        kb_seed=args.kb_seed,
        demo_source=args.demo_source,
        expert_path=args.expert_path,
        out_dir=out_dir,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="budgetdyna",
                                     description="Budgeted Dyna-Q dialogue experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genkb", help="generate a synthetic knowledge base")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--movies", type=int, default=8)
    p.add_argument("--theaters", type=int, default=6)
    p.add_argument("--cities", type=int, default=4)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one agent under one budget")
    p.add_argument("--agent", required=True,
                   help="one of " + ", ".join(AGENT_KINDS) + " (hyphens accepted)")
    p.add_argument("--out", required=True)
    _add_train_options(p)

    p = sub.add_parser("sweep", help="agents x budgets x seeds grid")
    p.add_argument("--agents", default="sl,dqn,ddq,bcs-ddq")
    p.add_argument("--budgets", default="50,100,150,200,250,300")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_train_options(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dialogues", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kb", help="KB JSON path")
    p.add_argument("--kb-seed", type=int, default=7)

    p = sub.add_parser("plotdata", help="aggregate run directories into plot CSVs")
    p.add_argument("--runs", required=True, help="glob of run directories")
    p.add_argument("--out", required=True)

    p = sub.add_parser("expert", help="build the frozen demonstration expert")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=float, default=0.85)
    p.add_argument("--max-epochs", type=int, default=60)

    p = sub.add_parser("serve", help="run the human-in-the-loop session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--kb", help="KB JSON path")
    p.add_argument("--kb-seed", type=int, default=7)
    p.add_argument("--checkpoint", help="machine-agent checkpoint (rule agent if omitted)")
    p.add_argument("--budget", type=int, help="attach a ledger with this budget")
    p.add_argument("--out", default="hitl_runs")

    args = parser.parse_args(argv)

    if args.command == "genkb":
        rows = generate_kb(args.seed, args.movies, args.theaters, args.cities)
        save_kb(args.out, rows)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    if args.command == "train":
        config = _config_from(args, args.agent, args.out)
        kb, goals = _kb_and_goals(args, config)
        result = run_training(config, kb, goals)
        final = result.final
        print(f"{config.agent_kind} b={config.budget} seed={config.seed}: "
              f"success {final.success_rate:.4f} reward {final.avg_reward:.2f} "
              f"turns {final.avg_turns:.2f} spent {result.ledger.spent_total}")
        return 0

    if args.command == "sweep":
        base = _config_from(args, "dqn", None)
        agents = [_norm_kind(a) for a in args.agents.split(",") if a]
        budgets = [int(b) for b in args.budgets.split(",") if b]
        rows = sweep(base, agents, budgets, args.runs, args.out, jobs=args.jobs)
        for row in rows:
            print(f"{row['agent']} b={row['budget']} seed={row['seed']}: "
                  f"success {row['final_success']:.4f}")
        return 0

    if args.command == "eval":
        agent = DQNAgent.load(args.checkpoint)
        if args.kb:
            kb = KnowledgeBase(load_kb(args.kb))
        else:
            kb = KnowledgeBase(generate_kb(args.kb_seed, 8, 6, 4))
        from .kb import enumerate_goals

        goals = enumerate_goals(kb.rows, 19, 400)
        rng = np.random.default_rng(args.seed)
        success, reward, turns = evaluate(agent, kb, goals, args.dialogues, rng)
        print(f"success {success:.4f} reward {reward:.2f} turns {turns:.2f} "
              f"({args.dialogues} dialogues)")
        return 0

    if args.command == "plotdata":
        run_dirs = sorted(d for d in glob.glob(args.runs)
                          if os.path.isfile(os.path.join(d, "result.json")))
        if not run_dirs:
            print("no run directories matched", file=sys.stderr)
            return 1
        write_plotdata(run_dirs, args.out)
        print(f"aggregated {len(run_dirs)} runs into {args.out}")
        return 0

    if args.command == "expert":
        path, success = build_expert(args.out, seed=args.seed, target=args.target,
                                     max_epochs=args.max_epochs, verbose=True)
        print(f"expert saved to {path} (greedy success {success:.3f})")
        return 0

    if args.command == "serve":
        import uvicorn

        from .hitl import HitlService, create_app
        from .kb import enumerate_goals

        if args.kb:
            kb = KnowledgeBase(load_kb(args.kb))
        else:
            kb = KnowledgeBase(generate_kb(args.kb_seed, 8, 6, 4))
        goals = enumerate_goals(kb.rows, 19, 400)
        agent = DQNAgent.load(args.checkpoint) if args.checkpoint else None
        ledger = None
        if args.budget is not None:
            from .bcs import BudgetLedger

            ledger = BudgetLedger(total_b=args.budget)
        service = HitlService(kb, goals, agent=agent, ledger=ledger, out_dir=args.out)
        uvicorn.run(create_app(service), host=args.host, port=args.port)
        return 0

    parser.error(f"unhandled command {args.command}")
    return 2


def _kb_and_goals(args, config: RunConfig):
    from .kb import enumerate_goals

    if getattr(args, "kb", None):
        kb = KnowledgeBase(load_kb(args.kb))
        goals = enumerate_goals(kb.rows, config.goal_seed, config.max_goals)
        return kb, goals
    kb, goals, _ = build_setup(config)
    return kb, goals


if __name__ == "__main__":
    sys.exit(main())
