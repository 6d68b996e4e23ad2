"""
ipweave コマンド:
python ipweave.py synth   --program data/replica/task01 --fspec data/jaas.fspec --out woven/
python ipweave.py score   --program data/replica/task01 --fspec data/jaas.fspec --top 5
python ipweave.py sketch  --fspec data/jaas.fspec
python ipweave.py resolve --program data/replica/task01 --fspec data/jaas.fspec
python ipweave.py analyze data/replica/task01
python ipweave.py eval    --dataset data/replica --fspec data/jaas.fspec --criteria all --record
python ipweave.py check   --program woven/ --fspec data/jaas.fspec
python ipweave.py history
python ipweave.py serve   --port 5000

終了コード: 0 成功 / 1 入力エラー / 2 合成不能
"""
import sys
import argparse
import logging

from annotator import CRITERIA, render_ranking
from errors import INPUT_ERROR, IpweaveError
from fspec import enumerate_branches, load_fspec, render_branch
from minilang import parse_program
from resolver import render_problem, render_resolution, resolve, solve_selection
from sketcher import generate_sketches, render_sketch
from variables import LOG_LEVEL, load_config

logger = logging.getLogger("ipweave")


def cmd_synth(args, config):
    from synthesizer import synthesize
    program = parse_program(args.program)
    fspec = load_fspec(args.fspec)
    result = synthesize(program, fspec, config, args.branch, args.rank)
    if args.out:
        result.write(args.out)
    else:
        for path, text in sorted(result.files.items()):
            print(f"==> {path} <==")
            print(text, end="")
    print(result.report.text(), end="")


def cmd_score(args, config):
    from synthesizer import score
    scored = score(parse_program(args.program), load_fspec(args.fspec), config, args.branch)
    print(f"branch {scored.branch.index}")
    for line in render_ranking(scored.ranked, args.top):
        print(line)


def cmd_sketch(args, config):
    fspec = load_fspec(args.fspec)
    for branch in enumerate_branches(fspec, tau=config.tau):
        if args.branch is not None and branch.index != args.branch:
            continue
        for line in render_branch(branch, fspec):
            print(line)
        for sketch in generate_sketches(branch, fspec):
            for line in render_sketch(sketch, fspec):
                print(line)


def cmd_resolve(args, config):
    from synthesizer import score, selection_problem
    program = parse_program(args.program)
    fspec = load_fspec(args.fspec)
    scored = score(program, fspec, config, args.branch)
    if not 1 <= args.rank <= len(scored.ranked):
        raise IpweaveError(f"rank {args.rank} outside 1..{len(scored.ranked)}")
    plan, problem = selection_problem(scored, program, fspec, scored.ranked[args.rank - 1])
    for line in render_problem(problem):
        print(line)
    for line in render_resolution(resolve(problem, solve_selection(problem))):
        print(line)


def cmd_analyze(args, config):
    from analysis import analyze
    program_dir = args.dir or args.program
    if not program_dir:
        raise IpweaveError("analyze needs a program directory")
    for line in analyze(parse_program(program_dir)).listing():
        print(line)


def cmd_eval(args, config):
    from harness import evaluate, record_run
    fspec = load_fspec(args.fspec)
    criteria = CRITERIA if args.criteria == "all" else (args.criteria,)
    for criterion in criteria:
        out = args.out if len(criteria) == 1 else (f"{args.out}/{criterion}" if args.out else None)
        result = evaluate(args.dataset, fspec, config, criterion, out)
        if len(criteria) == 1:
            for line in result.records():
                print(line)
        else:
            print(result.summary_row())
        if args.record:
            run_id = record_run(result, fspec.name)
            print(f"recorded run {run_id}")


def cmd_check(args, config):
    from harness import conformance_report
    program = parse_program(args.program)
    fspec = load_fspec(args.fspec)
    branches = enumerate_branches(fspec, tau=config.tau)
    if args.branch is not None:
        branches = [b for b in branches if b.index == args.branch]
        if not branches:
            raise IpweaveError(f"no branch {args.branch}")
    reports = [(conformance_report(program, fspec, b), b) for b in branches]
    report, branch = max(reports, key=lambda rb: (rb[0].score, -rb[1].index))
    print(f"branch {branch.index}")
    for line in report.lines():
        print(line)


def cmd_history(args, config):
    from harness import list_runs
    for run in list_runs(args.limit):
        print(f"run {run['id']} {run['created_at']} {run['criterion']} fspec={run['fspec']} "
              f"tasks={run['tasks']} hr@1={run['hr_at_1']:.1f} mrr={run['mrr']:.4f}")


def cmd_serve(args, config):
    from app import app
    app.run(host=args.host, port=args.port)


COMMANDS = {
    "synth": cmd_synth,
    "score": cmd_score,
    "sketch": cmd_sketch,
    "resolve": cmd_resolve,
    "analyze": cmd_analyze,
    "eval": cmd_eval,
    "check": cmd_check,
    "history": cmd_history,
    "serve": cmd_serve,
}


def parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")

    parser = argparse.ArgumentParser(prog="ipweave")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_syn = sub.add_parser("synth", parents=[common])
    p_syn.add_argument("--program", required=True)
    p_syn.add_argument("--fspec", required=True)
    p_syn.add_argument("--branch", type=int)
    p_syn.add_argument("--rank", type=int, default=1)
    p_syn.add_argument("--out")

    p_sc = sub.add_parser("score", parents=[common])
    p_sc.add_argument("--program", required=True)
    p_sc.add_argument("--fspec", required=True)
    p_sc.add_argument("--branch", type=int)
    p_sc.add_argument("--top", type=int)

    p_sk = sub.add_parser("sketch", parents=[common])
    p_sk.add_argument("--fspec", required=True)
    p_sk.add_argument("--branch", type=int)

    p_rs = sub.add_parser("resolve", parents=[common])
    p_rs.add_argument("--program", required=True)
    p_rs.add_argument("--fspec", required=True)
    p_rs.add_argument("--branch", type=int)
    p_rs.add_argument("--rank", type=int, default=1)

    p_an = sub.add_parser("analyze", parents=[common])
    p_an.add_argument("dir", nargs="?")
    p_an.add_argument("--program")

    p_ev = sub.add_parser("eval", parents=[common])
    p_ev.add_argument("--dataset", required=True)
    p_ev.add_argument("--fspec", required=True)
    p_ev.add_argument("--criteria", choices=CRITERIA + ("all",), default="cas")
    p_ev.add_argument("--out")
    p_ev.add_argument("--record", action="store_true")

    p_ck = sub.add_parser("check", parents=[common])
    p_ck.add_argument("--program", required=True)
    p_ck.add_argument("--fspec", required=True)
    p_ck.add_argument("--branch", type=int)

    p_hi = sub.add_parser("history", parents=[common])
    p_hi.add_argument("--limit", type=int, default=20)

    p_sv = sub.add_parser("serve", parents=[common])
    p_sv.add_argument("--host", default="127.0.0.1")
    p_sv.add_argument("--port", type=int, default=5000)
    return parser.parse_args(argv)


def main(argv):
    try:
        args = parse_args(argv)
    except SystemExit as e:
        # 使い方の誤りは入力エラー（終了コード 1）
        return INPUT_ERROR if e.code else 0
    logging.basicConfig(level=LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        COMMANDS[args.cmd](args, config)
    except IpweaveError as e:
        logger.error(f"{args.cmd} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
