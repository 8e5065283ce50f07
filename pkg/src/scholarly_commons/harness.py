"""Adversarial scenario harness.

A scenario file declares an agent roster (researchers, whales, attackers,
apathetic holders), one ARC, a timed event script, and optionally a
flash-loan attack block. The runner executes it deterministically from the
declared seed, asserts every module invariant after every step, and emits a
report with per-epoch metric series (gini of effective voting power, plural
participation, treasury balance), proposal outcomes, and attack outcomes.

Reports hash their own canonical JSON, so two runs agree iff their bytes do.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .canonical import digest_obj, to_jsonable
from .commons import Commons
from .errors import (
    AllZeroValues,
    CommonsError,
    EmptyValues,
    InvariantViolation,
    ParseError,
    ScenarioError,
    ScenarioMismatch,
    TimelockActive,
)
from .governance import GovernanceConfig, GovMode, ProposalKind, ProposalState
from .ledger import Ledger
from .reputation import SbtCategory

AGENT_ROLES = ("Researcher", "Whale", "Attacker", "Apathetic")
METRIC_NAMES = ("gini", "participation", "treasury")
CSV_HEADER = "epoch,gini,participation,treasury"
DEFAULT_LOAN = 182_000_000

# scenario config keys consumed by the harness rather than governance
HARNESS_CONFIG_KEYS = ("reputation_weights", "royalty_fee_bp")


def gini(values) -> float:
    """Gini coefficient of a non-negative distribution, in [0, 1)."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise EmptyValues("gini of an empty distribution is undefined")
    if any(v < 0 for v in vals):
        raise ValueError("gini needs non-negative values")
    total = sum(vals)
    if total == 0:
        raise AllZeroValues("gini of an all-zero distribution is undefined")
    n = len(vals)
    ranked = sum(i * v for i, v in enumerate(vals, start=1))
    return 2.0 * ranked / (n * total) - (n + 1) / n


# --- scenario model ----------------------------------------------------------


@dataclass(frozen=True)
class AgentSpec:
    name: str
    role: str
    tokens: int
    sbts: dict


@dataclass(frozen=True)
class Step:
    epoch: int
    op: str
    args: dict
    label: str | None


@dataclass(frozen=True)
class FlashLoanSpec:
    loan_amount: int
    epoch: int
    timelock: bool
    snapshot: bool


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    config: dict
    agents: tuple
    treasury: int
    founder_council: tuple
    script: tuple
    attack: FlashLoanSpec | None
    metrics: tuple


# op name -> (required args, agent-valued args, label-valued args, produces a label)
OP_SPECS: dict[str, dict] = {
    "mint": {"requires": ("agent", "amount"), "agents": ("agent",)},
    "burn": {"requires": ("agent", "amount"), "agents": ("agent",)},
    "transfer": {"requires": ("from", "to", "amount"), "agents": ("from", "to")},
    "create_vesting": {
        "requires": ("agent", "total", "cliff", "duration"),
        "agents": ("agent",),
        "produces": True,
    },
    "claim_vesting": {"requires": ("schedule",), "labels": ("schedule",)},
    "issue_sbt": {"requires": ("to", "category"), "agents": ("to",), "produces": True},
    "commit_metadata": {"requires": ("agent",), "agents": ("agent",)},
    "stake_sbt": {
        "requires": ("agent", "sbt", "until_epoch"),
        "agents": ("agent",),
        "labels": ("sbt",),
        "produces": True,
    },
    "unstake": {"requires": ("stake",), "labels": ("stake",)},
    "revoke_sbt": {"requires": ("sbt", "proposal"), "labels": ("sbt", "proposal")},
    "appeal_sbt": {"requires": ("sbt",), "labels": ("sbt",), "produces": True},
    "submit_proposal": {
        "requires": ("proposer", "kind", "payload"),
        "agents": ("proposer",),
        "produces": True,
    },
    "cast_plural": {"requires": ("proposal", "voter", "votes"), "agents": ("voter",), "labels": ("proposal",)},
    "cast_epistemic": {
        "requires": ("proposal", "voter", "support"),
        "agents": ("voter",),
        "labels": ("proposal",),
    },
    "cast_token": {
        "requires": ("proposal", "voter", "support"),
        "agents": ("voter",),
        "labels": ("proposal",),
    },
    "delegate": {"requires": ("delegator", "delegate"), "agents": ("delegator", "delegate")},
    "undelegate": {"requires": ("delegator",), "agents": ("delegator",)},
    "close_voting": {"requires": ("proposal",), "labels": ("proposal",)},
    "tally": {"requires": ("proposal",), "labels": ("proposal",)},
    "execute": {"requires": ("proposal",), "labels": ("proposal",)},
    "council_veto": {"requires": ("proposal", "signers"), "labels": ("proposal",)},
    "open_round": {"requires": ("pool", "projects"), "produces": True},
    "contribute": {
        "requires": ("round", "from", "project", "amount"),
        "agents": ("from", "project"),
        "labels": ("round",),
    },
    "settle_round": {"requires": ("round",), "labels": ("round",)},
    "create_program": {
        "requires": ("director", "budget", "milestones"),
        "agents": ("director",),
        "produces": True,
    },
    "report_milestone": {"requires": ("program", "index"), "labels": ("program",)},
    "release_tranche": {
        "requires": ("program", "index", "recipient"),
        "agents": ("recipient",),
        "labels": ("program",),
    },
    "cancel_program": {"requires": ("program",), "labels": ("program",)},
    "mint_ipnft": {
        "requires": ("owner", "content", "open_access", "split"),
        "agents": ("owner",),
        "produces": True,
    },
    "grant_license": {
        "requires": ("asset", "licensee", "price", "exclusive"),
        "agents": ("licensee",),
        "labels": ("asset",),
    },
    "fractionalize": {
        "requires": ("asset", "cap", "p0", "slope", "phi0", "horizon"),
        "labels": ("asset",),
        "produces": True,
    },
    "curve_buy": {"requires": ("pool", "buyer", "units"), "agents": ("buyer",), "labels": ("pool",)},
    "curve_sell": {"requires": ("pool", "seller", "units"), "agents": ("seller",), "labels": ("pool",)},
    "distribute_royalties": {
        "requires": ("asset", "revenue", "payer"),
        "agents": ("payer",),
        "labels": ("asset",),
    },
}


def _is_uint(value, bits: int = 64) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and 0 <= value < 2**bits


def load_scenario(source: str | bytes | dict) -> Scenario:
    """Parse and validate a scenario; collects every diagnostic before failing."""
    if isinstance(source, (str, bytes)):
        try:
            raw = json.loads(source)
        except ValueError as exc:
            raise ParseError(f"scenario is not valid JSON: {exc}") from None
    else:
        raw = source
    if not isinstance(raw, dict):
        raise ParseError("scenario root must be a JSON object")

    problems: list[str] = []

    name = raw.get("name")
    if not isinstance(name, str) or not name:
        problems.append("name: required non-empty string")
        name = ""
    seed = raw.get("seed")
    if not _is_uint(seed):
        problems.append("seed: required unsigned 64-bit integer")
        seed = 0

    config = raw.get("config", {})
    gov_raw = {}
    if not isinstance(config, dict):
        problems.append("config: must be an object")
        config = {}
    else:
        gov_raw = {k: v for k, v in config.items() if k not in HARNESS_CONFIG_KEYS}
        try:
            GovernanceConfig.from_dict(gov_raw)
        except CommonsError as exc:
            problems.append(f"config: {exc}")

    agents: list[AgentSpec] = []
    names_seen = set()
    raw_agents = raw.get("agents")
    if not isinstance(raw_agents, list) or not raw_agents:
        problems.append("agents: required non-empty list")
        raw_agents = []
    for i, entry in enumerate(raw_agents):
        where = f"agents[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: must be an object")
            continue
        aname = entry.get("id")
        if not isinstance(aname, str) or not aname:
            problems.append(f"{where}: id must be a non-empty string")
            continue
        if aname in names_seen:
            problems.append(f"{where}: duplicate agent id {aname!r}")
            continue
        names_seen.add(aname)
        role = entry.get("role", "Researcher")
        if role not in AGENT_ROLES:
            problems.append(f"{where}: unknown role {role!r}")
            role = "Researcher"
        tokens = entry.get("tokens", 0)
        if not _is_uint(tokens):
            problems.append(f"{where}: tokens must be a non-negative integer")
            tokens = 0
        sbts = entry.get("sbts", {})
        if not isinstance(sbts, dict):
            problems.append(f"{where}: sbts must map category to count")
            sbts = {}
        else:
            for cat, count in sbts.items():
                if cat not in [c.value for c in SbtCategory]:
                    problems.append(f"{where}: unknown credential category {cat!r}")
                if not _is_uint(count):
                    problems.append(f"{where}: count for {cat!r} must be a non-negative integer")
        agents.append(AgentSpec(name=aname, role=role, tokens=tokens, sbts=dict(sbts)))

    treasury = raw.get("treasury", 0)
    if not _is_uint(treasury):
        problems.append("treasury: must be a non-negative integer")
        treasury = 0

    council = raw.get("founder_council", [])
    if not isinstance(council, list) or any(not isinstance(c, str) for c in council):
        problems.append("founder_council: must be a list of agent ids")
        council = []
    else:
        for c in council:
            if c not in names_seen:
                problems.append(f"founder_council: unknown agent {c!r}")

    metrics = raw.get("metrics", list(METRIC_NAMES))
    if not isinstance(metrics, list) or any(m not in METRIC_NAMES for m in metrics):
        problems.append(f"metrics: must be a subset of {list(METRIC_NAMES)}")
        metrics = list(METRIC_NAMES)

    script: list[Step] = []
    labels_defined: set[str] = set()
    raw_script = raw.get("script", [])
    if not isinstance(raw_script, list):
        problems.append("script: must be a list of steps")
        raw_script = []
    last_epoch = 1
    for i, entry in enumerate(raw_script):
        where = f"script[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: must be an object")
            continue
        epoch = entry.get("epoch")
        if not _is_uint(epoch) or epoch < 1:
            problems.append(f"{where}: epoch must be an integer >= 1 (setup owns epoch 0)")
            epoch = last_epoch
        if epoch < last_epoch:
            problems.append(f"{where}: epochs must be non-decreasing ({epoch} after {last_epoch})")
        last_epoch = max(last_epoch, epoch)
        op = entry.get("op")
        spec = OP_SPECS.get(op)
        if spec is None:
            problems.append(f"{where}: unknown op {op!r}")
            continue
        args = {k: v for k, v in entry.items() if k not in ("epoch", "op", "label")}
        for req in spec["requires"]:
            if req not in args:
                problems.append(f"{where}: {op} needs {req!r}")
        for key in spec.get("agents", ()):
            value = args.get(key)
            if isinstance(value, str) and value not in names_seen:
                problems.append(f"{where}: unknown agent ref {value!r}")
        for key in spec.get("labels", ()):
            value = args.get(key)
            if not (isinstance(value, str) and value.startswith("$")):
                problems.append(f"{where}: {key} must reference a label like \"$name\"")
            elif value[1:] not in labels_defined:
                problems.append(f"{where}: label {value!r} is not defined yet")
        if op == "council_veto":
            for signer in args.get("signers", []):
                if signer not in names_seen:
                    problems.append(f"{where}: unknown signer {signer!r}")
        if op == "open_round":
            for project in args.get("projects", []):
                if project not in names_seen:
                    problems.append(f"{where}: unknown project agent {project!r}")
        if op == "mint_ipnft":
            for entry_split in args.get("split", []):
                if (
                    not isinstance(entry_split, list)
                    or len(entry_split) != 2
                    or entry_split[0] not in names_seen
                ):
                    problems.append(f"{where}: split entries must be [agent, basis_points]")
        if op == "submit_proposal":
            payload = args.get("payload")
            kind = args.get("kind")
            if kind not in [k.value for k in ProposalKind]:
                problems.append(f"{where}: unknown proposal kind {kind!r}")
            if not isinstance(payload, dict):
                problems.append(f"{where}: payload must be an object")
            else:
                if kind == "TreasurySpend" and payload.get("to") not in names_seen:
                    problems.append(f"{where}: payload.to must name an agent")
                for v in payload.values():
                    if isinstance(v, str) and v.startswith("$") and v[1:] not in labels_defined:
                        problems.append(f"{where}: label {v!r} is not defined yet")
        label = entry.get("label")
        if label is not None:
            if not isinstance(label, str) or not label:
                problems.append(f"{where}: label must be a non-empty string")
            elif label in labels_defined:
                problems.append(f"{where}: duplicate label {label!r}")
            elif not spec.get("produces"):
                problems.append(f"{where}: op {op} does not produce a label")
            else:
                labels_defined.add(label)
        script.append(Step(epoch=epoch, op=op, args=args, label=label))

    attack = None
    raw_attack = raw.get("attack")
    if raw_attack is not None:
        if not isinstance(raw_attack, dict):
            problems.append("attack: must be an object")
        else:
            loan = raw_attack.get("loan_amount", DEFAULT_LOAN)
            if not _is_uint(loan) or loan == 0:
                problems.append("attack: loan_amount must be a positive integer")
                loan = DEFAULT_LOAN
            epoch = raw_attack.get("epoch", max((s.epoch for s in script), default=0) + 1)
            if not _is_uint(epoch) or epoch < 1:
                problems.append("attack: epoch must be an integer >= 1")
                epoch = 1
            timelock = raw_attack.get("timelock", True)
            snapshot = raw_attack.get("snapshot", True)
            if not isinstance(timelock, bool) or not isinstance(snapshot, bool):
                problems.append("attack: timelock and snapshot must be booleans")
                timelock, snapshot = bool(timelock), bool(snapshot)
            if gov_raw.get("mode") != GovMode.TOKEN_ONLY.value:
                problems.append("attack: flash-loan attacks target the token-only baseline; set config.mode")
            if not any(a.role == "Attacker" for a in agents):
                problems.append("attack: roster needs an Attacker-role agent")
            attack = FlashLoanSpec(loan_amount=loan, epoch=epoch, timelock=timelock, snapshot=snapshot)

    known_top = {
        "name", "seed", "config", "agents", "treasury", "founder_council",
        "script", "attack", "metrics",
    }
    for key in raw:
        if key not in known_top:
            problems.append(f"unknown top-level key {key!r}")

    if problems:
        raise ScenarioError(problems)
    return Scenario(
        name=name,
        seed=seed,
        config=dict(config),
        agents=tuple(agents),
        treasury=treasury,
        founder_council=tuple(council),
        script=tuple(script),
        attack=attack,
        metrics=tuple(metrics),
    )


def load_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(fh.read())


def bundled_scenario_names() -> list[str]:
    from importlib.resources import files

    folder = files(__package__) / "scenarios"
    return sorted(p.name[: -len(".json")] for p in folder.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> Scenario:
    from importlib.resources import files

    blob = (files(__package__) / "scenarios" / f"{name}.json").read_text(encoding="utf-8")
    return load_scenario(blob)


# --- invariant checks --------------------------------------------------------


def check_invariants(commons: Commons, sbt_baseline: dict) -> None:
    """Assert every module invariant; raise InvariantViolation on the first failure."""
    ledger = commons.ledger

    balance_sum = sum(s.balance for s in ledger.souls.values())
    if balance_sum != ledger.minted - ledger.burned:
        raise InvariantViolation(
            "conservation", f"sum(balances)={balance_sum} != minted-burned={ledger.minted - ledger.burned}"
        )
    for sid, soul in ledger.souls.items():
        if soul.balance < 0 or soul.locked < 0 or soul.locked > soul.balance:
            raise InvariantViolation("balance-bounds", f"{sid}: balance={soul.balance} locked={soul.locked}")

    locked_by_owner: dict[str, int] = {}
    for schedule in ledger.vestings.values():
        if not 0 <= schedule.claimed <= schedule.total:
            raise InvariantViolation("vesting-claimed", schedule.id)
        locked_by_owner[schedule.owner] = locked_by_owner.get(schedule.owner, 0) + (
            schedule.total - schedule.claimed
        )
    for sid, soul in ledger.souls.items():
        if soul.locked != locked_by_owner.get(sid, 0):
            raise InvariantViolation("locked-ledger", f"{sid} locked={soul.locked}")

    try:
        Ledger.verify_chain(ledger.events)
    except CommonsError as exc:
        raise InvariantViolation("event-chain", str(exc)) from exc

    for sbt_id, sbt in commons.reputation.sbts.items():
        seen = sbt_baseline.setdefault(sbt_id, (sbt.subject, sbt.category.value))
        if seen != (sbt.subject, sbt.category.value):
            raise InvariantViolation("sbt-binding", f"{sbt_id} changed subject or category")

    for arc_id, arc in commons.governance.arcs.items():
        spent: dict[str, int] = {}
        for pid in arc.proposal_ids:
            prop = commons.governance.proposals[pid]
            for voter, ballot in prop.plural_ballots.items():
                key = f"{voter}@{ballot.cast_epoch}"
                spent[key] = spent.get(key, 0) + ballot.cost
        for key, cost in spent.items():
            if cost > arc.config.voice_credits_per_round:
                raise InvariantViolation("voice-budget", f"{arc_id} {key} spent {cost}")
            if arc.credit_spent.get(key, 0) != cost:
                raise InvariantViolation("credit-ledger", f"{arc_id} {key}")
        for key, cost in arc.credit_spent.items():
            if cost and spent.get(key, 0) != cost:
                raise InvariantViolation("credit-ledger", f"{arc_id} stray {key}")
        for start in arc.delegations:
            node, hops = start, 0
            while node is not None:
                node = arc.delegations.get(node)
                hops += 1
                if hops > len(arc.members):
                    raise InvariantViolation("delegation-acyclic", f"{arc_id} cycle via {start}")

    for rid, rnd in commons.funding.rounds.items():
        escrow = ledger.souls[rnd.escrow_soul].balance
        if rnd.settled:
            if escrow != 0:
                raise InvariantViolation("round-escrow", f"{rid} settled but escrow={escrow}")
        else:
            expected = rnd.pool + sum(c["amount"] for c in rnd.contributions)
            if escrow != expected:
                raise InvariantViolation("round-escrow", f"{rid} escrow={escrow} expected={expected}")

    for pid, program in commons.funding.programs.items():
        escrow = ledger.souls[program.escrow_soul].balance
        expected = 0 if program.cancelled else program.budget - program.released
        if escrow != expected:
            raise InvariantViolation("program-escrow", f"{pid} escrow={escrow} expected={expected}")

    for aid, asset in commons.market.assets.items():
        if sum(b for _, b in asset.royalty_split) != 10000:
            raise InvariantViolation("royalty-split", aid)

    for pool_id, pool in commons.market.pools.items():
        if pool.supply < 0 or pool.supply > pool.supply_cap:
            raise InvariantViolation("pool-supply", pool_id)
        held = sum(u for lots in pool.holdings.values() for u, _ in lots)
        if held != pool.supply:
            raise InvariantViolation("pool-holdings", f"{pool_id} held={held} supply={pool.supply}")
        if ledger.souls[pool.escrow_soul].balance != pool.reserve:
            raise InvariantViolation("pool-reserve", f"{pool_id} escrow != reserve")
        drift = Fraction(pool.reserve) - pool.price_integral(0, pool.supply)
        if abs(drift) > pool.trade_count:
            raise InvariantViolation("reserve-bound", f"{pool_id} drift={float(drift)}")


# --- attack runner -----------------------------------------------------------


@dataclass(frozen=True)
class AttackResult:
    attack: str
    succeeded: bool
    reason: str | None
    treasury_delta: int
    loan: int
    defenses: dict

    def outcome(self) -> str:
        return "Succeeded" if self.succeeded else f"Blocked({self.reason})"

    def result_line(self) -> str:
        if self.succeeded:
            return "attack=flashloan result=Succeeded"
        return f"attack=flashloan result=Blocked:{self.reason}"

    def to_dict(self) -> dict:
        return {
            "attack": self.attack,
            "outcome": self.outcome(),
            "reason": self.reason,
            "treasury_delta": self.treasury_delta,
            "loan": self.loan,
            "defenses": dict(self.defenses),
        }


def _flashloan_sequence(commons: Commons, arc_id: str, attacker: str, loan: int) -> AttackResult:
    """Mint, vote, try to drain, repay, all inside one epoch."""
    gov = commons.governance
    ledger = commons.ledger
    arc = gov.arcs[arc_id]
    epoch0 = ledger.epoch
    treasury0 = ledger.souls[arc.treasury_soul].balance
    drain = min(loan, treasury0)

    ledger.mint(attacker, loan)
    proposal = gov.submit_proposal(
        arc_id, attacker, ProposalKind.TREASURY_SPEND, {"to": attacker, "amount": drain}
    )
    gov.cast_token_vote(proposal, attacker, True)
    gov.close_voting(proposal)
    outcome = gov.tally(proposal)
    reason = None
    if not outcome["approved"]:
        reason = "NoVotingPower"
    else:
        try:
            gov.execute(proposal)
        except TimelockActive:
            reason = "TimelockActive"
    ledger.burn(attacker, loan)  # the loan must come back before the epoch ends

    if ledger.epoch != epoch0:
        raise InvariantViolation("flashloan-window", "attack crossed an epoch boundary")
    delta = ledger.souls[arc.treasury_soul].balance - treasury0
    return AttackResult(
        attack="flashloan",
        succeeded=delta < 0,
        reason=reason if delta >= 0 else None,
        treasury_delta=delta,
        loan=loan,
        defenses={
            "timelock": arc.config.timelock_epochs > 0,
            "snapshot": arc.config.snapshot_voting,
        },
    )


def run_attack_flashloan(
    loan: int = DEFAULT_LOAN,
    timelock_on: bool = True,
    snapshot_on: bool = True,
    seed: int = 2026,
) -> AttackResult:
    """Stage the flash-loan drain against a small token-only ARC."""
    commons = Commons(seed)
    ledger = commons.ledger
    honest = []
    for _ in range(5):
        soul = ledger.create_soul()
        ledger.mint(soul, 1_000)
        honest.append(soul)
    attacker = ledger.create_soul()
    ledger.mint(attacker, 10)
    config = GovernanceConfig(
        mode=GovMode.TOKEN_ONLY,
        timelock_epochs=3 if timelock_on else 0,
        snapshot_voting=snapshot_on,
    )
    arc = commons.governance.create_arc(honest + [attacker], treasury=loan, config=config)
    commons.advance_epoch(1)  # the roster's holdings enter the epoch-open snapshot
    return _flashloan_sequence(commons, arc, attacker, loan)


# --- scenario runner -----------------------------------------------------------


@dataclass
class SimReport:
    scenario: str
    seed: int
    mode: str
    members: int
    epochs: list
    proposals: list
    attacks: list
    event_counts: dict
    final_epoch: int
    final_state_hash: str
    agent_souls: dict
    metrics: tuple = METRIC_NAMES

    def to_dict(self) -> dict:
        body = {
            "scenario": self.scenario,
            "seed": self.seed,
            "mode": self.mode,
            "members": self.members,
            "metrics": list(self.metrics),
            "epochs": [
                {k: v for k, v in row.items() if k == "epoch" or k in self.metrics}
                for row in self.epochs
            ],
            "proposals": self.proposals,
            "attacks": self.attacks,
            "event_counts": self.event_counts,
            "final_epoch": self.final_epoch,
            "final_state_hash": self.final_state_hash,
            "agent_souls": self.agent_souls,
        }
        body["content_hash"] = digest_obj(body)
        return to_jsonable(body)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for row in self.epochs:
            lines.append(
                f"{row['epoch']},{row['gini']:.6f},{row['participation']:.6f},{row['treasury']}"
            )
        return "\n".join(lines) + "\n"

    @property
    def content_hash(self) -> str:
        return self.to_dict()["content_hash"]


@dataclass
class RunResult:
    report: SimReport
    commons: Commons
    arc: str
    labels: dict


class _Runner:
    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        config = dict(scenario.config)
        weights = config.pop("reputation_weights", None)
        fee_bp = config.pop("royalty_fee_bp", 50)
        gov_config = GovernanceConfig.from_dict(config)
        if scenario.attack is not None:
            gov_config = GovernanceConfig.from_dict(
                {
                    **gov_config.to_dict(),
                    "timelock_epochs": (gov_config.timelock_epochs or 3) if scenario.attack.timelock else 0,
                    "snapshot_voting": scenario.attack.snapshot,
                }
            )
        self.gov_config = gov_config
        self.commons = Commons(seed, reputation_weights=weights, royalty_fee_bp=fee_bp)
        self.souls: dict[str, str] = {}
        self.labels: dict[str, str] = {}
        self.sbt_baseline: dict = {}
        self.arc: str | None = None

    # -- helpers --

    def _resolve(self, value: Any) -> Any:
        if isinstance(value, str):
            if value.startswith("$"):
                return self.labels[value[1:]]
            if value in self.souls:
                return self.souls[value]
        if isinstance(value, list):
            return [self._resolve(v) for v in value]
        if isinstance(value, dict):
            return {k: self._resolve(v) for k, v in value.items()}
        return value

    def _setup(self) -> None:
        commons, scenario = self.commons, self.scenario
        for agent in scenario.agents:
            soul = commons.ledger.create_soul()
            self.souls[agent.name] = soul
            if agent.tokens:
                commons.ledger.mint(soul, agent.tokens)
        council = [self.souls[c] for c in scenario.founder_council]
        self.arc = commons.governance.create_arc(
            list(self.souls.values()),
            treasury=scenario.treasury,
            config=self.gov_config,
            founder_council=council,
        )
        treasury_soul = commons.governance.arcs[self.arc].treasury_soul
        commons.market.set_fee_recipient(treasury_soul)
        for agent in scenario.agents:
            for category in sorted(agent.sbts):
                for _ in range(agent.sbts[category]):
                    commons.reputation.issue_sbt(self.arc, self.souls[agent.name], category)
        check_invariants(commons, self.sbt_baseline)

    def _metrics_row(self) -> dict:
        commons, arc_id = self.commons, self.arc
        arc = commons.governance.arcs[arc_id]
        powers = [float(commons.governance.effective_power(arc_id, m)) for m in arc.members]
        try:
            g = gini(powers)
        except (EmptyValues, AllZeroValues):
            g = 0.0
        voters = commons.governance.ballots_cast_in_epoch(arc_id, commons.epoch)
        return {
            "epoch": commons.epoch,
            "gini": g,
            "participation": voters / len(arc.members),
            "treasury": commons.governance.treasury_balance(arc_id),
        }

    def _run_step(self, step: Step) -> None:
        commons = self.commons
        args = {k: self._resolve(v) for k, v in step.args.items()}
        op = step.op
        result = None
        if op == "mint":
            commons.ledger.mint(args["agent"], args["amount"])
        elif op == "burn":
            commons.ledger.burn(args["agent"], args["amount"])
        elif op == "transfer":
            commons.ledger.transfer(args["from"], args["to"], args["amount"])
        elif op == "create_vesting":
            result = commons.ledger.create_vesting(
                args["agent"], args["total"], args["cliff"], args["duration"]
            )
        elif op == "claim_vesting":
            commons.ledger.claim_vesting(args["schedule"])
        elif op == "issue_sbt":
            result = commons.reputation.issue_sbt(
                self.arc, args["to"], args["category"], args.get("metadata") or {}
            )
        elif op == "commit_metadata":
            commons.reputation.commit_metadata(args["agent"])
        elif op == "stake_sbt":
            result = commons.reputation.stake_sbt(args["agent"], args["sbt"], args["until_epoch"])
        elif op == "unstake":
            commons.reputation.unstake(args["stake"])
        elif op == "revoke_sbt":
            commons.reputation.revoke_sbt(args["sbt"], args["proposal"])
        elif op == "appeal_sbt":
            result = commons.reputation.appeal_sbt(args["sbt"])
        elif op == "submit_proposal":
            result = commons.governance.submit_proposal(
                self.arc, args["proposer"], args["kind"], args["payload"]
            )
        elif op == "cast_plural":
            commons.governance.cast_plural_vote(args["proposal"], args["voter"], args["votes"])
        elif op == "cast_epistemic":
            commons.governance.cast_epistemic_vote(args["proposal"], args["voter"], args["support"])
        elif op == "cast_token":
            commons.governance.cast_token_vote(args["proposal"], args["voter"], args["support"])
        elif op == "delegate":
            commons.governance.delegate(self.arc, args["delegator"], args["delegate"])
        elif op == "undelegate":
            commons.governance.undelegate(self.arc, args["delegator"])
        elif op == "close_voting":
            commons.governance.close_voting(args["proposal"])
        elif op == "tally":
            commons.governance.tally(args["proposal"])
        elif op == "execute":
            commons.governance.execute(args["proposal"])
        elif op == "council_veto":
            commons.governance.council_veto(args["proposal"], args["signers"])
        elif op == "open_round":
            result = commons.funding.open_round(
                self.arc,
                args["pool"],
                args["projects"],
                args.get("mode", "ProportionalSquares"),
                args.get("require_stake"),
            )
        elif op == "contribute":
            commons.funding.contribute(args["round"], args["from"], args["project"], args["amount"])
        elif op == "settle_round":
            commons.funding.settle_round(args["round"])
        elif op == "create_program":
            result = commons.funding.create_mission_program(
                self.arc, args["director"], args["budget"], [tuple(m) for m in args["milestones"]]
            )
        elif op == "report_milestone":
            commons.funding.report_milestone(args["program"], args["index"])
        elif op == "release_tranche":
            commons.funding.release_tranche(args["program"], args["index"], args["recipient"])
        elif op == "cancel_program":
            commons.funding.cancel_program(args["program"])
        elif op == "mint_ipnft":
            result = commons.market.mint_ipnft(
                args["owner"], args["content"], args["open_access"], args["split"]
            )
        elif op == "grant_license":
            commons.market.grant_commercial_license(
                args["asset"], args["licensee"], args["price"], args["exclusive"]
            )
        elif op == "fractionalize":
            result = commons.market.fractionalize(
                args["asset"], args["cap"], args["p0"], args["slope"], args["phi0"], args["horizon"]
            )
        elif op == "curve_buy":
            commons.market.curve_buy(args["pool"], args["buyer"], args["units"])
        elif op == "curve_sell":
            commons.market.curve_sell(args["pool"], args["seller"], args["units"])
        elif op == "distribute_royalties":
            commons.market.distribute_royalties(args["asset"], args["revenue"], args["payer"])
        else:  # pragma: no cover - load_scenario rejects unknown ops
            raise ScenarioError([f"unknown op {op!r}"])
        if step.label:
            self.labels[step.label] = result

    def run(self) -> RunResult:
        scenario = self.scenario
        self._setup()
        rows = [self._metrics_row()]
        attacks: list[dict] = []

        final_epoch = max(
            [s.epoch for s in scenario.script]
            + ([scenario.attack.epoch] if scenario.attack else [])
            + [1]
        )
        steps = list(scenario.script)
        for epoch in range(1, final_epoch + 1):
            self.commons.advance_epoch(1)
            while steps and steps[0].epoch == epoch:
                step = steps.pop(0)
                self._run_step(step)
                check_invariants(self.commons, self.sbt_baseline)
            if scenario.attack and scenario.attack.epoch == epoch:
                attacker = next(a for a in scenario.agents if a.role == "Attacker")
                result = _flashloan_sequence(
                    self.commons, self.arc, self.souls[attacker.name], scenario.attack.loan_amount
                )
                attacks.append(result.to_dict())
                check_invariants(self.commons, self.sbt_baseline)
            rows.append(self._metrics_row())

        attacks.extend(self._derived_attacks())
        commons = self.commons
        proposals = [
            {
                "id": p.id,
                "kind": p.kind.value,
                "proposer": p.proposer,
                "state": p.state.value,
                "reason": p.reason,
            }
            for p in commons.governance.proposals.values()
        ]
        counts: dict[str, int] = {}
        for event in commons.ledger.events:
            counts[event.kind] = counts.get(event.kind, 0) + 1
        report = SimReport(
            scenario=scenario.name,
            seed=self.seed,
            mode=self.gov_config.mode.value,
            members=len(scenario.agents),
            epochs=rows,
            proposals=proposals,
            attacks=attacks,
            event_counts=counts,
            final_epoch=commons.epoch,
            final_state_hash=commons.state_digest(),
            agent_souls=dict(self.souls),
            metrics=scenario.metrics,
        )
        return RunResult(report=report, commons=commons, arc=self.arc, labels=self.labels)

    def _derived_attacks(self) -> list[dict]:
        """Capture and speculation outcomes read off the finished run."""
        out: list[dict] = []
        by_soul = {soul: name for name, soul in self.souls.items()}
        roles = {a.name: a.role for a in self.scenario.agents}

        for prop in self.commons.governance.proposals.values():
            proposer = by_soul.get(prop.proposer)
            if proposer and roles.get(proposer) == "Whale":
                captured = prop.state in (ProposalState.QUEUED, ProposalState.EXECUTED)
                out.append(
                    {
                        "attack": "plutocracy_capture",
                        "proposal": prop.id,
                        "outcome": "Succeeded" if captured else f"Blocked({prop.reason})",
                    }
                )

        flows: dict[str, int] = {}
        for event in self.commons.ledger.events:
            if event.kind == "CurveBuy":
                flows[event.payload["buyer"]] = flows.get(event.payload["buyer"], 0) - event.payload["cost"]
            elif event.kind == "CurveSell":
                flows[event.payload["seller"]] = flows.get(event.payload["seller"], 0) + event.payload["net"]
        for soul, pnl in sorted(flows.items()):
            name = by_soul.get(soul)
            if name and roles.get(name) == "Attacker":
                out.append(
                    {
                        "attack": "speculation_roundtrip",
                        "agent": name,
                        "pnl": pnl,
                        "outcome": "Succeeded" if pnl > 0 else "Blocked(SellPenalty)",
                    }
                )
        return out


def run(scenario: Scenario, seed: int | None = None) -> RunResult:
    """Execute a scenario deterministically; seed override beats the file's."""
    return _Runner(scenario, scenario.seed if seed is None else seed).run()


# --- report comparison -----------------------------------------------------------


def compare(report_a: dict, report_b: dict) -> dict:
    """Diff two report dicts of the same scenario."""
    if report_a.get("scenario") != report_b.get("scenario"):
        raise ScenarioMismatch(
            f"cannot diff {report_a.get('scenario')!r} against {report_b.get('scenario')!r}"
        )
    identical = report_a.get("content_hash") == report_b.get("content_hash")
    diff: dict[str, Any] = {
        "scenario": report_a.get("scenario"),
        "identical": identical,
        "metric_deltas": {},
        "attack_outcomes": {},
        "proposal_states": {},
    }
    if identical:
        return diff

    def series(report, metric):
        return [row[metric] for row in report.get("epochs", []) if metric in row]

    for metric in METRIC_NAMES:
        sa, sb = series(report_a, metric), series(report_b, metric)
        if not sa or not sb:
            continue
        final_a, final_b = sa[-1], sb[-1]
        mean_a, mean_b = sum(sa) / len(sa), sum(sb) / len(sb)
        if final_a != final_b or mean_a != mean_b:
            diff["metric_deltas"][metric] = {
                "final_a": final_a,
                "final_b": final_b,
                "final_delta": final_b - final_a,
                "mean_a": mean_a,
                "mean_b": mean_b,
            }

    def attack_map(report):
        out = {}
        for entry in report.get("attacks", []):
            key = entry.get("attack", "?")
            out[key] = entry.get("outcome")
        return out

    attacks_a, attacks_b = attack_map(report_a), attack_map(report_b)
    for key in sorted(set(attacks_a) | set(attacks_b)):
        if attacks_a.get(key) != attacks_b.get(key):
            diff["attack_outcomes"][key] = {"a": attacks_a.get(key), "b": attacks_b.get(key)}

    def proposal_map(report):
        return {p["id"]: (p["state"], p.get("reason")) for p in report.get("proposals", [])}

    props_a, props_b = proposal_map(report_a), proposal_map(report_b)
    for key in sorted(set(props_a) | set(props_b)):
        if props_a.get(key) != props_b.get(key):
            diff["proposal_states"][key] = {"a": props_a.get(key), "b": props_b.get(key)}
    return diff
