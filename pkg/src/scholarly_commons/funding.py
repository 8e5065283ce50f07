"""Quadratic funding rounds and milestone-gated mission programs.

A round escrows a matching pool from an ARC treasury, takes contributions,
and matches each project on the square of summed square-rooted per-donor
totals, so breadth of support beats depth of pockets. Integer payouts come
from largest-remainder rounding and always conserve the pool exactly.

Mission programs are the directed complement: a budget locked up front and
released tranche by tranche as ordered milestones get reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from .canonical import id_sort_key, largest_remainder
from .errors import (
    AlreadyReported,
    AlreadySettled,
    BadConfig,
    BudgetExceeded,
    EmptyProjects,
    InsufficientTreasury,
    NoContributions,
    NotReported,
    OutOfOrder,
    RoundClosed,
    StakeRequired,
    UnknownProgram,
    UnknownProject,
    UnknownRound,
    ZeroAmount,
)

if TYPE_CHECKING:
    from .commons import Commons


class MatchingMode(str, Enum):
    PROPORTIONAL_SQUARES = "ProportionalSquares"
    CLR_SURPLUS = "ClrSurplus"


class MilestoneStatus(str, Enum):
    PENDING = "Pending"
    REPORTED = "Reported"
    RELEASED = "Released"
    CANCELLED = "Cancelled"


@dataclass
class FundingRound:
    id: str
    arc: str
    pool: int
    projects: list[str]
    mode: MatchingMode
    require_stake: str | None
    escrow_soul: str
    opened_epoch: int
    contributions: list[dict] = field(default_factory=list)
    settled: bool = False
    payouts: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MatchResult:
    scores: dict
    matches: dict


@dataclass
class Milestone:
    description_digest: str
    amount: int
    status: MilestoneStatus = MilestoneStatus.PENDING


@dataclass
class MissionProgram:
    id: str
    arc: str
    director: str
    budget: int
    escrow_soul: str
    milestones: list[Milestone]
    released: int = 0
    cancelled: bool = False


def match_scores(totals_by_project: dict) -> dict:
    """S_p = (sum_i sqrt(c_ip))^2 over per-contributor totals."""
    scores = {}
    for project, per_contributor in totals_by_project.items():
        scores[project] = sum(math.sqrt(c) for c in per_contributor.values()) ** 2
    return scores


class FundingEngine:
    """Rounds, matching math, and mission programs."""

    def __init__(self, core: "Commons"):
        self.core = core
        self.rounds: dict[str, FundingRound] = {}
        self.programs: dict[str, MissionProgram] = {}

    # --- rounds -----------------------------------------------------------------

    def open_round(
        self,
        arc: str,
        pool: int,
        projects: list[str],
        mode=MatchingMode.PROPORTIONAL_SQUARES,
        require_stake: str | None = None,
    ) -> str:
        ledger = self.core.ledger
        arc_obj = self.core.governance._require_arc(arc)
        if pool <= 0:
            raise ZeroAmount("matching pool must be positive")
        if not projects:
            raise EmptyProjects("a round needs at least one project")
        if len(set(projects)) != len(projects):
            raise EmptyProjects("duplicate project ids")
        for project in projects:
            ledger._require(project)
        try:
            mode = MatchingMode(mode)
        except ValueError:
            raise BadConfig(f"unknown matching mode: {mode!r}") from None
        if require_stake is not None:
            # normalize early so bad categories fail at open, not at contribute
            from .reputation import parse_category

            require_stake = parse_category(require_stake).value
        treasury = ledger.souls[arc_obj.treasury_soul]
        if treasury.free < pool:
            raise InsufficientTreasury(f"treasury holds {treasury.free}, cannot escrow {pool}")
        escrow = ledger._new_soul()
        ledger._debit_free(arc_obj.treasury_soul, pool)
        ledger._credit(escrow.id, pool)
        rnd = FundingRound(
            id=ledger.next_id("round"),
            arc=arc,
            pool=pool,
            projects=sorted(projects, key=id_sort_key),
            mode=mode,
            require_stake=require_stake,
            escrow_soul=escrow.id,
            opened_epoch=ledger.epoch,
        )
        self.rounds[rnd.id] = rnd
        ledger.append_event(
            "OpenRound",
            {
                "round": rnd.id,
                "arc": arc,
                "pool": pool,
                "projects": rnd.projects,
                "mode": mode.value,
                "require_stake": require_stake,
                "escrow_soul": escrow.id,
            },
        )
        return rnd.id

    def _require_round(self, round_id: str) -> FundingRound:
        rnd = self.rounds.get(round_id)
        if rnd is None:
            raise UnknownRound(f"no such round: {round_id}")
        return rnd

    def contribute(self, round_id: str, contributor: str, project: str, amount: int) -> None:
        rnd = self._require_round(round_id)
        ledger = self.core.ledger
        ledger._require(contributor)
        if rnd.settled:
            raise RoundClosed(f"{round_id} is settled")
        if project not in rnd.projects:
            raise UnknownProject(f"{project} is not in {round_id}")
        if amount <= 0:
            raise ZeroAmount("contribution must be positive")
        if rnd.require_stake is not None and not self.core.reputation.has_active_stake(
            contributor, rnd.require_stake
        ):
            raise StakeRequired(
                f"{round_id} requires an active {rnd.require_stake} stake to contribute"
            )
        ledger._debit_free(contributor, amount)
        ledger._credit(rnd.escrow_soul, amount)
        rnd.contributions.append({"contributor": contributor, "project": project, "amount": amount})
        ledger.append_event(
            "Contribute",
            {"round": round_id, "contributor": contributor, "project": project, "amount": amount},
        )

    def totals_by_project(self, rnd: FundingRound) -> dict:
        totals: dict[str, dict[str, int]] = {p: {} for p in rnd.projects}
        for c in rnd.contributions:
            per = totals[c["project"]]
            per[c["contributor"]] = per.get(c["contributor"], 0) + c["amount"]
        return totals

    def compute_matching(self, round_id: str) -> MatchResult:
        """Integer match per project under the round's mode; pure query."""
        rnd = self._require_round(round_id)
        if not rnd.contributions:
            raise NoContributions(f"{round_id} has no contributions")
        totals = self.totals_by_project(rnd)
        scores = match_scores(totals)
        if rnd.mode is MatchingMode.PROPORTIONAL_SQUARES:
            weights = [scores[p] for p in rnd.projects]
        else:
            # raw CLR surplus: score minus own money, never negative
            weights = [
                max(0.0, scores[p] - sum(totals[p].values())) for p in rnd.projects
            ]
        matches = largest_remainder(rnd.pool, weights, rnd.projects)
        return MatchResult(scores=scores, matches=matches)

    def settle_round(self, round_id: str) -> dict:
        """Pay escrowed contributions plus matches; an empty round refunds the pool."""
        rnd = self._require_round(round_id)
        ledger = self.core.ledger
        if rnd.settled:
            raise AlreadySettled(f"{round_id} is already settled")
        payouts = {p: 0 for p in rnd.projects}
        if not rnd.contributions:
            arc = self.core.governance.arcs[rnd.arc]
            ledger._debit_free(rnd.escrow_soul, rnd.pool)
            ledger._credit(arc.treasury_soul, rnd.pool)
        else:
            totals = self.totals_by_project(rnd)
            matches = self.compute_matching(round_id).matches
            for project in rnd.projects:
                amount = sum(totals[project].values()) + matches[project]
                payouts[project] = amount
                if amount:
                    ledger._debit_free(rnd.escrow_soul, amount)
                    ledger._credit(project, amount)
        rnd.settled = True
        rnd.payouts = payouts
        ledger.append_event("SettleRound", {"round": round_id, "payouts": payouts})
        return payouts

    # --- mission programs ----------------------------------------------------------

    def create_mission_program(
        self, arc: str, director: str, budget: int, milestones: list[tuple[str, int]]
    ) -> str:
        ledger = self.core.ledger
        arc_obj = self.core.governance._require_arc(arc)
        ledger._require(director)
        if budget <= 0:
            raise ZeroAmount("program budget must be positive")
        if not milestones:
            raise BudgetExceeded("a program needs at least one milestone")
        parsed = [Milestone(description_digest=str(d), amount=int(a)) for d, a in milestones]
        if any(m.amount <= 0 for m in parsed):
            raise ZeroAmount("milestone tranches must be positive")
        if sum(m.amount for m in parsed) > budget:
            raise BudgetExceeded("milestone tranches exceed the program budget")
        treasury = ledger.souls[arc_obj.treasury_soul]
        if treasury.free < budget:
            raise InsufficientTreasury(f"treasury holds {treasury.free}, cannot fund {budget}")
        escrow = ledger._new_soul()
        ledger._debit_free(arc_obj.treasury_soul, budget)
        ledger._credit(escrow.id, budget)
        program = MissionProgram(
            id=ledger.next_id("prog"),
            arc=arc,
            director=director,
            budget=budget,
            escrow_soul=escrow.id,
            milestones=parsed,
        )
        self.programs[program.id] = program
        ledger.append_event(
            "CreateMissionProgram",
            {
                "program": program.id,
                "arc": arc,
                "director": director,
                "budget": budget,
                "escrow_soul": escrow.id,
                "milestones": [[m.description_digest, m.amount] for m in parsed],
            },
        )
        return program.id

    def _require_program(self, program_id: str) -> MissionProgram:
        program = self.programs.get(program_id)
        if program is None:
            raise UnknownProgram(f"no such program: {program_id}")
        return program

    def report_milestone(self, program_id: str, index: int) -> None:
        program = self._require_program(program_id)
        if not 0 <= index < len(program.milestones):
            raise UnknownProgram(f"{program_id} has no milestone {index}")
        milestone = program.milestones[index]
        if milestone.status is not MilestoneStatus.PENDING:
            raise AlreadyReported(f"milestone {index} is {milestone.status.value}")
        milestone.status = MilestoneStatus.REPORTED
        self.core.ledger.append_event("ReportMilestone", {"program": program_id, "index": index})

    def release_tranche(self, program_id: str, index: int, recipient: str) -> int:
        """Release milestone `index` to a director-designated recipient, in order."""
        program = self._require_program(program_id)
        ledger = self.core.ledger
        ledger._require(recipient)
        if not 0 <= index < len(program.milestones):
            raise UnknownProgram(f"{program_id} has no milestone {index}")
        milestone = program.milestones[index]
        if any(m.status is not MilestoneStatus.RELEASED for m in program.milestones[:index]):
            raise OutOfOrder(f"milestone {index} cannot release before earlier tranches")
        if milestone.status is not MilestoneStatus.REPORTED:
            raise NotReported(f"milestone {index} is {milestone.status.value}, not Reported")
        if program.released + milestone.amount > program.budget:
            raise BudgetExceeded(f"releasing {milestone.amount} would exceed the budget")
        ledger._debit_free(program.escrow_soul, milestone.amount)
        ledger._credit(recipient, milestone.amount)
        milestone.status = MilestoneStatus.RELEASED
        program.released += milestone.amount
        ledger.append_event(
            "ReleaseTranche",
            {"program": program_id, "index": index, "recipient": recipient, "amount": milestone.amount},
        )
        return milestone.amount

    def cancel_program(self, program_id: str) -> int:
        """Cancel every unreleased milestone and refund the escrow remainder."""
        program = self._require_program(program_id)
        ledger = self.core.ledger
        if program.cancelled:
            raise AlreadySettled(f"{program_id} is already cancelled")
        for milestone in program.milestones:
            if milestone.status in (MilestoneStatus.PENDING, MilestoneStatus.REPORTED):
                milestone.status = MilestoneStatus.CANCELLED
        remainder = ledger.souls[program.escrow_soul].balance
        if remainder:
            arc = self.core.governance.arcs[program.arc]
            ledger._debit_free(program.escrow_soul, remainder)
            ledger._credit(arc.treasury_soul, remainder)
        program.cancelled = True
        ledger.append_event("CancelProgram", {"program": program_id, "refund": remainder})
        return remainder

    # --- serialization ---------------------------------------------------------------

    def to_state_dict(self) -> dict:
        return {
            "rounds": {
                rid: {
                    "arc": r.arc,
                    "pool": r.pool,
                    "projects": r.projects,
                    "mode": r.mode.value,
                    "require_stake": r.require_stake,
                    "escrow_soul": r.escrow_soul,
                    "opened_epoch": r.opened_epoch,
                    "contributions": r.contributions,
                    "settled": r.settled,
                    "payouts": dict(sorted(r.payouts.items())),
                }
                for rid, r in self.rounds.items()
            },
            "programs": {
                pid: {
                    "arc": p.arc,
                    "director": p.director,
                    "budget": p.budget,
                    "escrow_soul": p.escrow_soul,
                    "released": p.released,
                    "cancelled": p.cancelled,
                    "milestones": [
                        [m.description_digest, m.amount, m.status.value] for m in p.milestones
                    ],
                }
                for pid, p in self.programs.items()
            },
        }
