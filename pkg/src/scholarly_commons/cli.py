"""Command-line front end.

Subcommands: run, validate, attack, replay, diff, report. Exit codes: 0 on
success, 1 on any protocol or scenario error, 2 on usage errors. Stdout
carries data only (result lines, JSON); paths and diagnostics go to stderr,
so runs stay byte-reproducible and pipeable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness
from .canonical import ratio_str
from .commons import Commons
from .errors import CommonsError, LogCorrupt, ScenarioError
from .reputation import SbtRegistry

ENV_SEED = "COMMONS_SEED"


def _env_seed() -> int | None:
    raw = os.environ.get(ENV_SEED)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError([f"{ENV_SEED} must be an integer, got {raw!r}"]) from None


def _resolve_scenario(ref: str) -> harness.Scenario:
    if os.path.exists(ref):
        return harness.load_scenario_file(ref)
    names = harness.bundled_scenario_names()
    if ref in names:
        return harness.load_bundled(ref)
    raise ScenarioError([f"no scenario file or bundled scenario named {ref!r}", f"bundled: {', '.join(names)}"])


def _on_off(value: str) -> bool:
    if value in ("on", "off"):
        return value == "on"
    raise argparse.ArgumentTypeError("expected 'on' or 'off'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commons",
        description="Deterministic scholarly-commons protocol simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario and write its report")
    run.add_argument("scenario", help="scenario file path or bundled scenario name")
    run.add_argument("--seed", type=int, default=None, help=f"override the scenario seed (also {ENV_SEED})")
    run.add_argument("--out", default=".", help="directory for report, event log, and figure")
    run.add_argument("--format", choices=("json", "csv"), default="json", dest="fmt")
    run.add_argument("--no-plots", action="store_true", help="skip the metrics figure")

    val = sub.add_parser("validate", help="check a scenario file, reporting every problem")
    val.add_argument("scenario")

    atk = sub.add_parser("attack", help="stage the flash-loan drain against a fresh arc")
    atk.add_argument("--loan", type=int, default=harness.DEFAULT_LOAN)
    atk.add_argument("--timelock", type=_on_off, default=True, metavar="on|off")
    atk.add_argument("--snapshot", type=_on_off, default=True, metavar="on|off")
    atk.add_argument("--seed", type=int, default=None)

    rep = sub.add_parser("replay", help="re-execute an event log and verify every hash link")
    rep.add_argument("log", help="events.jsonl path")

    diff = sub.add_parser("diff", help="compare two run reports of the same scenario")
    diff.add_argument("report_a")
    diff.add_argument("report_b")

    show = sub.add_parser("report", help="inspect one soul from a replayed event log")
    show.add_argument("--log", required=True, help="events.jsonl path")
    show.add_argument("--soul", required=True, help="soul id to inspect")
    show.add_argument(
        "--prove",
        nargs=2,
        metavar=("CATEGORY", "K"),
        help="emit a disclosure proof of at least K credentials in CATEGORY",
    )
    return parser


def _cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    seed = args.seed if args.seed is not None else _env_seed()
    result = harness.run(scenario, seed=seed)
    report = result.report
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = report.scenario

    if args.fmt == "json":
        (out / f"{stem}.report.json").write_text(report.to_json(), encoding="utf-8")
    else:
        (out / f"{stem}.report.csv").write_text(report.to_csv(), encoding="utf-8")
    result.commons.ledger.write_events(out / f"{stem}.events.jsonl")
    if not args.no_plots:
        from .plots import render_report_figure

        render_report_figure(report.to_dict(), out / f"{stem}.png")

    print(
        f"scenario={report.scenario} seed={report.seed} "
        f"epochs={report.final_epoch} content_hash={report.content_hash}"
    )
    return 0


def _cmd_validate(args) -> int:
    _resolve_scenario(args.scenario)
    print("OK")
    return 0


def _cmd_attack(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 2026)
    result = harness.run_attack_flashloan(
        loan=args.loan,
        timelock_on=args.timelock,
        snapshot_on=args.snapshot,
        seed=seed,
    )
    print(result.result_line())
    print(f"treasury_delta={result.treasury_delta} loan={result.loan}")
    return 0


def _cmd_replay(args) -> int:
    commons, events = Commons.replay_file(args.log)
    print(f"events={len(events)} state_hash={commons.state_digest()}")
    return 0


def _cmd_diff(args) -> int:
    with open(args.report_a, encoding="utf-8") as fh:
        report_a = json.load(fh)
    with open(args.report_b, encoding="utf-8") as fh:
        report_b = json.load(fh)
    diff = harness.compare(report_a, report_b)
    if diff["identical"]:
        print("no differences")
        return 0
    for metric, delta in diff["metric_deltas"].items():
        print(
            f"metric {metric}: final {delta['final_a']:g} -> {delta['final_b']:g}, "
            f"mean {delta['mean_a']:g} -> {delta['mean_b']:g}"
        )
    for name, pair in diff["attack_outcomes"].items():
        print(f"attack {name}: {pair['a']} -> {pair['b']}")

    def _state(entry):
        if entry is None:
            return "absent"
        state, reason = entry
        return f"{state}({reason})" if reason else state

    for pid, pair in diff["proposal_states"].items():
        print(f"proposal {pid}: {_state(pair['a'])} -> {_state(pair['b'])}")
    if not (diff["metric_deltas"] or diff["attack_outcomes"] or diff["proposal_states"]):
        print("reports differ only in non-metric fields")
    return 0


def _cmd_report(args) -> int:
    commons, _ = Commons.replay_file(args.log)
    ledger = commons.ledger
    reputation = commons.reputation
    soul = ledger.souls.get(args.soul)
    if soul is None:
        raise CommonsError(f"no such soul in this log: {args.soul}")
    sbts = sorted(
        (s for s in reputation.sbts.values() if s.subject == args.soul),
        key=lambda s: int(s.id.split("#")[1]),
    )
    body = {
        "soul": args.soul,
        "balance": soul.balance,
        "locked": soul.locked,
        "free": soul.free,
        "reputation": ratio_str(reputation.reputation(args.soul)),
        "credentials": [
            {"id": s.id, "category": s.category.value, "status": s.status.value} for s in sbts
        ],
        "portfolio_root": reputation.current_root(args.soul),
    }
    if args.prove:
        category, k_raw = args.prove
        try:
            k = int(k_raw)
        except ValueError:
            raise CommonsError(f"K must be an integer, got {k_raw!r}") from None
        proof = reputation.prove_count_at_least(args.soul, category, k)
        body["proof"] = proof
        body["proof_valid"] = SbtRegistry.verify_proof(proof["root"], proof)
    print(json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False))
    return 0


_HANDLERS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "attack": _cmd_attack,
    "replay": _cmd_replay,
    "diff": _cmd_diff,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except ScenarioError as exc:
        for problem in exc.diagnostics:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    except LogCorrupt as exc:
        print(f"error: log corrupt at seq={exc.seq}: {exc}", file=sys.stderr)
        return 1
    except CommonsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
