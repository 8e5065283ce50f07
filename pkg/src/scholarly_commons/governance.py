"""Bicameral DAO governance for autonomous research communities (ARCs).

Each ARC runs two chambers over every proposal. The plural chamber uses
quadratic voting under a per-round voice-credit budget, so conviction is
priced superlinearly. The epistemic chamber weighs yes/no by soulbound
reputation at the proposal snapshot, with transitive (acyclic) delegation.
Approval needs both chambers; constitutional questions additionally fail
if the dissenting epistemic minority is large enough.

Safety rails around execution: an approved proposal waits out a timelock,
a founder council can veto while the founder schedule still carries weight,
and voting power snapshots at the epoch the proposal opened, so nothing
acquired mid-vote counts. A one-token-one-vote mode exists purely as the
baseline these rails are measured against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Any

from .canonical import canonical_bytes, digest_obj, parse_ratio, ratio_str, to_jsonable
from .errors import (
    BadConfig,
    BadPayload,
    BelowThreshold,
    CorruptSnapshot,
    CycleDetected,
    InsufficientCredits,
    InsufficientSigners,
    InsufficientTreasury,
    ModeMismatch,
    NoDelegation,
    NotAuthorized,
    NotMember,
    NotQueued,
    NotVoting,
    SelfDelegation,
    TimelockActive,
    UnknownArc,
    UnknownProposal,
    UnknownSoul,
    VotingOpen,
    ZeroAmount,
)

if TYPE_CHECKING:
    from .commons import Commons


class ProposalKind(str, Enum):
    TREASURY_SPEND = "TreasurySpend"
    PARAMETER_CHANGE = "ParameterChange"
    SBT_REVOCATION = "SbtRevocation"
    SBT_REINSTATE = "SbtReinstate"
    CONSTITUTIONAL = "Constitutional"


class ProposalState(str, Enum):
    DRAFT = "Draft"
    VOTING = "Voting"
    QUEUED = "Queued"
    REJECTED = "Rejected"
    EXECUTED = "Executed"
    VETOED = "Vetoed"


class QvMode(str, Enum):
    CUMULATIVE_SQUARE = "CumulativeSquare"
    MARGINAL_SQUARE = "MarginalSquare"


class GovMode(str, Enum):
    BICAMERAL = "Bicameral"
    TOKEN_ONLY = "TokenOnly"


DEFAULT_FOUNDER_SCHEDULE: tuple[tuple[int, Fraction], ...] = (
    (0, Fraction(51, 100)),
    (360, Fraction(40, 100)),
    (720, Fraction(20, 100)),
    (1080, Fraction(0)),
)


def qv_cost(votes: int, mode: QvMode = QvMode.CUMULATIVE_SQUARE) -> int:
    """Voice-credit price of casting |votes| on one proposal.

    CumulativeSquare charges v^2 for the whole position; MarginalSquare
    charges each marginal vote its own square, i.e. the sum 1 + 4 + ... + v^2.
    """
    v = abs(votes)
    if mode is QvMode.CUMULATIVE_SQUARE:
        return v * v
    return v * (v + 1) * (2 * v + 1) // 6


def affordable_votes(credits: int, mode: QvMode = QvMode.CUMULATIVE_SQUARE) -> int:
    """Largest vote count whose cost fits in the credit budget."""
    v = 0
    while qv_cost(v + 1, mode) <= credits:
        v += 1
    return v


def founder_veto_weight(config: "GovernanceConfig", at_epoch: int) -> Fraction:
    """Step-scheduled founder weight at an epoch; reaches zero and stays there."""
    weight = config.founder_schedule[0][1]
    for start, value in config.founder_schedule:
        if at_epoch >= start:
            weight = value
    return weight


@dataclass(frozen=True)
class GovernanceConfig:
    mode: GovMode = GovMode.BICAMERAL
    voice_credits_per_round: int = 100
    qv_cost_mode: QvMode = QvMode.CUMULATIVE_SQUARE
    plural_quorum: Fraction = Fraction(1, 10)
    epistemic_min_reputation: Fraction = Fraction(5)
    timelock_epochs: int = 3
    veto_council_m: int = 3
    veto_council_n: int = 5
    minority_veto_threshold: Fraction = Fraction(1, 5)
    snapshot_voting: bool = True
    founder_schedule: tuple = DEFAULT_FOUNDER_SCHEDULE

    def validate(self) -> "GovernanceConfig":
        if self.voice_credits_per_round <= 0:
            raise BadConfig("voice_credits_per_round must be positive")
        if not 0 <= self.plural_quorum <= 1:
            raise BadConfig("plural_quorum must lie in [0, 1]")
        if self.epistemic_min_reputation < 0:
            raise BadConfig("epistemic_min_reputation must be non-negative")
        # timelock 0 disables the defense; anything enabled stays in 2..7 epochs
        if self.timelock_epochs != 0 and not 2 <= self.timelock_epochs <= 7:
            raise BadConfig(f"timelock_epochs {self.timelock_epochs} outside the 2..7 window")
        if self.veto_council_m < 1 or self.veto_council_m > self.veto_council_n:
            raise BadConfig("veto council quorum must satisfy 1 <= m <= n")
        if not Fraction(1, 10) <= self.minority_veto_threshold <= Fraction(3, 10):
            raise BadConfig("minority_veto_threshold must lie in [0.10, 0.30]")
        schedule = tuple((int(e), parse_ratio(w)) for e, w in self.founder_schedule)
        if not schedule or schedule[0][0] != 0:
            raise BadConfig("founder schedule must start at epoch 0")
        epochs = [e for e, _ in schedule]
        weights = [w for _, w in schedule]
        if epochs != sorted(set(epochs)):
            raise BadConfig("founder schedule epochs must strictly increase")
        if any(a < b for a, b in zip(weights, weights[1:])):
            raise BadConfig("founder weight must be non-increasing")
        if weights[-1] != 0 or any(not 0 <= w <= 1 for w in weights):
            raise BadConfig("founder weights must stay in [0, 1] and end at zero")
        return self

    FIELD_NAMES = (
        "mode",
        "voice_credits_per_round",
        "qv_cost_mode",
        "plural_quorum",
        "epistemic_min_reputation",
        "timelock_epochs",
        "veto_council_m",
        "veto_council_n",
        "minority_veto_threshold",
        "snapshot_voting",
        "founder_schedule",
    )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "voice_credits_per_round": self.voice_credits_per_round,
            "qv_cost_mode": self.qv_cost_mode.value,
            "plural_quorum": ratio_str(self.plural_quorum),
            "epistemic_min_reputation": ratio_str(self.epistemic_min_reputation),
            "timelock_epochs": self.timelock_epochs,
            "veto_council_m": self.veto_council_m,
            "veto_council_n": self.veto_council_n,
            "minority_veto_threshold": ratio_str(self.minority_veto_threshold),
            "snapshot_voting": self.snapshot_voting,
            "founder_schedule": [[e, ratio_str(parse_ratio(w))] for e, w in self.founder_schedule],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GovernanceConfig":
        unknown = set(raw) - set(cls.FIELD_NAMES)
        if unknown:
            raise BadConfig(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        try:
            if "mode" in raw:
                kwargs["mode"] = GovMode(raw["mode"])
            if "qv_cost_mode" in raw:
                kwargs["qv_cost_mode"] = QvMode(raw["qv_cost_mode"])
        except ValueError as exc:
            raise BadConfig(str(exc)) from None
        for name in ("voice_credits_per_round", "timelock_epochs", "veto_council_m", "veto_council_n"):
            if name in raw:
                value = raw[name]
                if not isinstance(value, int) or isinstance(value, bool):
                    raise BadConfig(f"{name} must be an integer")
                kwargs[name] = value
        for name in ("plural_quorum", "epistemic_min_reputation", "minority_veto_threshold"):
            if name in raw:
                try:
                    kwargs[name] = parse_ratio(raw[name])
                except (ValueError, ZeroDivisionError) as exc:
                    raise BadConfig(f"{name}: {exc}") from None
        if "snapshot_voting" in raw:
            if not isinstance(raw["snapshot_voting"], bool):
                raise BadConfig("snapshot_voting must be a boolean")
            kwargs["snapshot_voting"] = raw["snapshot_voting"]
        if "founder_schedule" in raw:
            try:
                kwargs["founder_schedule"] = tuple(
                    (int(e), parse_ratio(w)) for e, w in raw["founder_schedule"]
                )
            except (TypeError, ValueError, ZeroDivisionError) as exc:
                raise BadConfig(f"founder_schedule: {exc}") from None
        return cls(**kwargs).validate()


@dataclass
class PluralBallot:
    votes: int
    cost: int
    cast_epoch: int


@dataclass
class SignalBallot:
    """Epistemic or token-mode yes/no ballot."""

    support: bool
    cast_epoch: int


@dataclass
class Arc:
    """One autonomous research community."""

    id: str
    members: list[str]
    treasury_soul: str
    config: GovernanceConfig
    founder_council: list[str]
    delegations: dict[str, str] = field(default_factory=dict)
    credit_spent: dict[str, int] = field(default_factory=dict)
    proposal_ids: list[str] = field(default_factory=list)
    imported_history: list[str] = field(default_factory=list)


@dataclass
class Proposal:
    id: str
    arc: str
    kind: ProposalKind
    payload: dict
    proposer: str
    created_epoch: int
    snapshot_epoch: int
    constitutional: bool
    state: ProposalState = ProposalState.VOTING
    voting_open: bool = True
    queued_until: int | None = None
    reason: str | None = None
    executed_epoch: int | None = None
    snapshot_reputation: dict | None = None
    snapshot_balance: dict | None = None
    plural_ballots: dict[str, PluralBallot] = field(default_factory=dict)
    epistemic_ballots: dict[str, SignalBallot] = field(default_factory=dict)
    token_ballots: dict[str, SignalBallot] = field(default_factory=dict)
    yes_weight: Fraction = Fraction(0)
    no_weight: Fraction = Fraction(0)

    def history_digest(self) -> str:
        return digest_obj(
            {
                "arc": self.arc,
                "kind": self.kind.value,
                "payload": self.payload,
                "proposer": self.proposer,
                "created_epoch": self.created_epoch,
                "state": self.state.value,
                "reason": self.reason,
            }
        )


class Governance:
    """All ARCs, proposals, and the voting state machine."""

    def __init__(self, core: "Commons"):
        self.core = core
        self.arcs: dict[str, Arc] = {}
        self.proposals: dict[str, Proposal] = {}

    # --- arcs -----------------------------------------------------------------

    def create_arc(
        self,
        members: list[str],
        treasury: int = 0,
        config: GovernanceConfig | None = None,
        founder_council: list[str] | None = None,
    ) -> str:
        ledger = self.core.ledger
        if not members:
            raise BadConfig("an arc needs at least one member")
        if len(set(members)) != len(members):
            raise BadConfig("duplicate members")
        for m in members:
            ledger._require(m)
        council = list(founder_council or [])
        if any(c not in members for c in council):
            raise BadConfig("founder council must be drawn from the members")
        if treasury < 0:
            raise ZeroAmount("treasury cannot be negative")
        cfg = (config or GovernanceConfig()).validate()
        treasury_soul = ledger._new_soul()
        if treasury:
            ledger._mint_internal(treasury_soul.id, treasury)
        arc = Arc(
            id=ledger.next_id("arc"),
            members=sorted(members),
            treasury_soul=treasury_soul.id,
            config=cfg,
            founder_council=sorted(council),
        )
        self.arcs[arc.id] = arc
        ledger.append_event(
            "CreateArc",
            {
                "arc": arc.id,
                "members": arc.members,
                "treasury_soul": treasury_soul.id,
                "treasury": treasury,
                "founder_council": arc.founder_council,
                "config": cfg.to_dict(),
            },
        )
        return arc.id

    def _require_arc(self, arc_id: str) -> Arc:
        arc = self.arcs.get(arc_id)
        if arc is None:
            raise UnknownArc(f"no such arc: {arc_id}")
        return arc

    def _require_proposal(self, proposal_id: str) -> Proposal:
        prop = self.proposals.get(proposal_id)
        if prop is None:
            raise UnknownProposal(f"no such proposal: {proposal_id}")
        return prop

    def treasury_balance(self, arc_id: str) -> int:
        arc = self._require_arc(arc_id)
        return self.core.ledger.souls[arc.treasury_soul].balance

    # --- proposal lifecycle ------------------------------------------------------

    def _validate_payload(self, arc: Arc, kind: ProposalKind, payload: dict) -> dict:
        payload = dict(payload or {})
        if kind is ProposalKind.TREASURY_SPEND:
            to, amount = payload.get("to"), payload.get("amount")
            self.core.ledger._require(to)
            if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
                raise BadPayload("treasury spend needs a positive integer amount")
        elif kind is ProposalKind.PARAMETER_CHANGE:
            param = payload.get("param")
            if param not in GovernanceConfig.FIELD_NAMES:
                raise BadPayload(f"unknown governance parameter: {param!r}")
            if "value" not in payload:
                raise BadPayload("parameter change needs a value")
        elif kind in (ProposalKind.SBT_REVOCATION, ProposalKind.SBT_REINSTATE):
            sbt = payload.get("sbt")
            if sbt not in self.core.reputation.sbts:
                raise BadPayload(f"no such credential: {sbt!r}")
        elif kind is ProposalKind.CONSTITUTIONAL:
            action = payload.get("action")
            if action not in (None, "parameter_change", "sbt_reinstate"):
                raise BadPayload(f"unknown constitutional action: {action!r}")
        return payload

    def _create_proposal(
        self,
        arc: str,
        proposer: str,
        kind,
        payload: dict,
        constitutional: bool = False,
        check_member: bool = True,
    ) -> Proposal:
        arc_obj = self._require_arc(arc)
        kind = ProposalKind(kind)
        if check_member and proposer not in arc_obj.members:
            raise NotMember(f"{proposer} is not a member of {arc}")
        payload = self._validate_payload(arc_obj, kind, payload)
        ledger = self.core.ledger
        prop = Proposal(
            id=ledger.next_id("prop"),
            arc=arc,
            kind=kind,
            payload=payload,
            proposer=proposer,
            created_epoch=ledger.epoch,
            snapshot_epoch=ledger.epoch,
            constitutional=constitutional or kind is ProposalKind.CONSTITUTIONAL,
        )
        if arc_obj.config.snapshot_voting:
            # power frozen at the opening of the snapshot epoch
            prop.snapshot_reputation = {
                m: self.core.reputation.epoch_open_scores.get(m, Fraction(0)) for m in arc_obj.members
            }
            prop.snapshot_balance = {
                m: ledger.epoch_open_balances.get(m, 0) for m in arc_obj.members
            }
        self.proposals[prop.id] = prop
        arc_obj.proposal_ids.append(prop.id)
        return prop

    def submit_proposal(self, arc: str, proposer: str, kind, payload: dict) -> str:
        prop = self._create_proposal(arc, proposer, kind, payload)
        self.core.ledger.append_event(
            "SubmitProposal",
            {
                "proposal": prop.id,
                "arc": arc,
                "proposer": proposer,
                "kind": prop.kind.value,
                "payload": prop.payload,
                "snapshot_epoch": prop.snapshot_epoch,
            },
        )
        return prop.id

    def _voting_prop(self, proposal_id: str) -> Proposal:
        prop = self._require_proposal(proposal_id)
        if prop.state is not ProposalState.VOTING or not prop.voting_open:
            raise NotVoting(f"{proposal_id} is not open for voting")
        return prop

    # --- plural chamber ------------------------------------------------------------

    def cast_plural_vote(self, proposal_id: str, voter: str, votes: int) -> int:
        """Cast (or replace) a signed quadratic vote; returns credits left this round."""
        prop = self._voting_prop(proposal_id)
        arc = self.arcs[prop.arc]
        if arc.config.mode is not GovMode.BICAMERAL:
            raise ModeMismatch("plural voting is a bicameral-mode operation")
        if voter not in arc.members:
            raise NotMember(f"{voter} is not a member of {prop.arc}")
        epoch = self.core.ledger.epoch
        cost = qv_cost(votes, arc.config.qv_cost_mode)
        previous = prop.plural_ballots.get(voter)
        if previous is not None:
            self._refund_credits(arc, voter, previous.cast_epoch, previous.cost)
        key = f"{voter}@{epoch}"
        spent = arc.credit_spent.get(key, 0)
        if spent + cost > arc.config.voice_credits_per_round:
            if previous is not None:  # roll the refund back, the ballot stands
                arc.credit_spent[f"{voter}@{previous.cast_epoch}"] = (
                    arc.credit_spent.get(f"{voter}@{previous.cast_epoch}", 0) + previous.cost
                )
            raise InsufficientCredits(
                f"{voter} has {arc.config.voice_credits_per_round - spent} credits left, needs {cost}"
            )
        if cost:
            arc.credit_spent[key] = spent + cost
        prop.plural_ballots[voter] = PluralBallot(votes=votes, cost=cost, cast_epoch=epoch)
        self.core.ledger.append_event(
            "CastPluralVote",
            {"proposal": proposal_id, "voter": voter, "votes": votes, "cost": cost},
        )
        return arc.config.voice_credits_per_round - arc.credit_spent.get(key, 0)

    def _refund_credits(self, arc: Arc, voter: str, epoch: int, cost: int) -> None:
        if not cost:
            return
        key = f"{voter}@{epoch}"
        remaining = arc.credit_spent.get(key, 0) - cost
        if remaining > 0:
            arc.credit_spent[key] = remaining
        else:
            arc.credit_spent.pop(key, None)

    def credits_remaining(self, arc_id: str, voter: str) -> int:
        arc = self._require_arc(arc_id)
        spent = arc.credit_spent.get(f"{voter}@{self.core.ledger.epoch}", 0)
        return arc.config.voice_credits_per_round - spent

    # --- epistemic chamber ------------------------------------------------------------

    def _member_reputation(self, prop: Proposal, soul: str) -> Fraction:
        if prop.snapshot_reputation is not None:
            return prop.snapshot_reputation.get(soul, Fraction(0))
        return self.core.reputation.reputation(soul)

    def _first_caster(self, arc: Arc, start: str, casters: set) -> str | None:
        """Walk the delegation chain; weight lands on the first soul that voted."""
        node = start
        while node is not None:
            if node in casters:
                return node
            node = arc.delegations.get(node)
        return None

    def _delegated_inflow(self, prop: Proposal, arc: Arc, voter: str) -> Fraction:
        casters = set(prop.epistemic_ballots) | {voter}
        inflow = Fraction(0)
        for member in arc.members:
            if member != voter and self._first_caster(arc, member, casters) == voter:
                inflow += self._member_reputation(prop, member)
        return inflow

    def cast_epistemic_vote(self, proposal_id: str, voter: str, support: bool) -> None:
        prop = self._voting_prop(proposal_id)
        arc = self.arcs[prop.arc]
        if arc.config.mode is not GovMode.BICAMERAL:
            raise ModeMismatch("epistemic voting is a bicameral-mode operation")
        if voter not in arc.members:
            raise NotMember(f"{voter} is not a member of {prop.arc}")
        own = self._member_reputation(prop, voter)
        if own < arc.config.epistemic_min_reputation and self._delegated_inflow(prop, arc, voter) == 0:
            raise BelowThreshold(
                f"{voter} holds reputation {own}, below {arc.config.epistemic_min_reputation}, "
                "and carries no delegated weight"
            )
        prop.epistemic_ballots[voter] = SignalBallot(support=bool(support), cast_epoch=self.core.ledger.epoch)
        self.core.ledger.append_event(
            "CastEpistemicVote", {"proposal": proposal_id, "voter": voter, "support": bool(support)}
        )

    def delegate(self, arc_id: str, delegator: str, delegate: str) -> None:
        arc = self._require_arc(arc_id)
        for soul in (delegator, delegate):
            if soul not in arc.members:
                raise NotMember(f"{soul} is not a member of {arc_id}")
        if delegator == delegate:
            raise SelfDelegation(f"{delegator} cannot delegate to itself")
        # walk the graph as it would look with this edge in place
        node = delegate
        while node is not None:
            if node == delegator:
                raise CycleDetected(f"delegating {delegator} -> {delegate} closes a cycle")
            node = arc.delegations.get(node)
        arc.delegations[delegator] = delegate
        self.core.ledger.append_event(
            "Delegate", {"arc": arc_id, "delegator": delegator, "delegate": delegate}
        )

    def undelegate(self, arc_id: str, delegator: str) -> None:
        arc = self._require_arc(arc_id)
        if delegator not in arc.delegations:
            raise NoDelegation(f"{delegator} has no outgoing delegation")
        del arc.delegations[delegator]
        self.core.ledger.append_event("Undelegate", {"arc": arc_id, "delegator": delegator})

    # --- token-only comparison mode ---------------------------------------------------

    def cast_token_vote(self, proposal_id: str, voter: str, support: bool) -> None:
        prop = self._voting_prop(proposal_id)
        arc = self.arcs[prop.arc]
        if arc.config.mode is not GovMode.TOKEN_ONLY:
            raise ModeMismatch("token voting only exists in the one-token-one-vote baseline")
        if voter not in arc.members:
            raise NotMember(f"{voter} is not a member of {prop.arc}")
        prop.token_ballots[voter] = SignalBallot(support=bool(support), cast_epoch=self.core.ledger.epoch)
        self.core.ledger.append_event(
            "CastTokenVote", {"proposal": proposal_id, "voter": voter, "support": bool(support)}
        )

    def _member_token_power(self, prop: Proposal, arc: Arc, soul: str) -> int:
        if prop.snapshot_balance is not None:
            return prop.snapshot_balance.get(soul, 0)
        return self.core.ledger.souls[soul].balance

    # --- tallying -----------------------------------------------------------------------

    def close_voting(self, proposal_id: str) -> None:
        prop = self._require_proposal(proposal_id)
        if prop.state is not ProposalState.VOTING or not prop.voting_open:
            raise NotVoting(f"{proposal_id} is not open")
        prop.voting_open = False
        self.core.ledger.append_event("CloseVoting", {"proposal": proposal_id})

    def tally(self, proposal_id: str) -> dict:
        """Score both chambers and move the proposal to Queued or Rejected."""
        prop = self._require_proposal(proposal_id)
        if prop.state is not ProposalState.VOTING:
            raise NotVoting(f"{proposal_id} is not in the voting stage")
        if prop.voting_open:
            raise VotingOpen(f"{proposal_id} must be closed before tallying")
        arc = self.arcs[prop.arc]
        if arc.config.mode is GovMode.TOKEN_ONLY:
            outcome = self._tally_token(prop, arc)
        else:
            outcome = self._tally_bicameral(prop, arc)
        if outcome["approved"]:
            prop.state = ProposalState.QUEUED
            prop.queued_until = self.core.ledger.epoch + arc.config.timelock_epochs
            outcome["queued_until"] = prop.queued_until
        else:
            prop.state = ProposalState.REJECTED
            prop.reason = outcome["reason"]
        self.core.ledger.append_event("Tally", {"proposal": proposal_id, **to_jsonable(outcome)})
        return outcome

    def _tally_bicameral(self, prop: Proposal, arc: Arc) -> dict:
        net = sum(b.votes for b in prop.plural_ballots.values())
        participants = len(prop.plural_ballots)
        quorum_ok = Fraction(participants) >= arc.config.plural_quorum * len(arc.members)

        casters = set(prop.epistemic_ballots)
        yes = Fraction(0)
        no = Fraction(0)
        for member in arc.members:
            target = self._first_caster(arc, member, casters)
            if target is None:
                continue
            if prop.epistemic_ballots[target].support:
                yes += self._member_reputation(prop, member)
            else:
                no += self._member_reputation(prop, member)
        prop.yes_weight, prop.no_weight = yes, no

        total_rep = sum(
            (self._member_reputation(prop, m) for m in arc.members), start=Fraction(0)
        )
        outcome = {
            "approved": False,
            "reason": None,
            "plural_net": net,
            "participants": participants,
            "members": len(arc.members),
            "epistemic_yes": yes,
            "epistemic_no": no,
        }
        if not quorum_ok:
            outcome["reason"] = "QuorumFail"
        elif net <= 0:
            outcome["reason"] = "PluralRejected"
        elif yes <= no:
            outcome["reason"] = "EpistemicRejected"
        elif prop.constitutional and no >= arc.config.minority_veto_threshold * total_rep:
            outcome["reason"] = "MinorityVeto"
        else:
            outcome["approved"] = True
        return outcome

    def _tally_token(self, prop: Proposal, arc: Arc) -> dict:
        yes = no = 0
        for voter, ballot in prop.token_ballots.items():
            power = self._member_token_power(prop, arc, voter)
            if ballot.support:
                yes += power
            else:
                no += power
        total = sum(self._member_token_power(prop, arc, m) for m in arc.members)
        prop.yes_weight, prop.no_weight = Fraction(yes), Fraction(no)
        approved = yes > no and 2 * yes > total
        return {
            "approved": approved,
            "reason": None if approved else "NoTokenMajority",
            "token_yes": yes,
            "token_no": no,
            "token_supply": total,
        }

    # --- execution, veto, founder schedule ------------------------------------------------

    def execute(self, proposal_id: str) -> None:
        prop = self._require_proposal(proposal_id)
        if prop.state is not ProposalState.QUEUED:
            raise NotQueued(f"{proposal_id} is not queued")
        now = self.core.ledger.epoch
        if now < (prop.queued_until or 0):
            raise TimelockActive(
                f"{proposal_id} is timelocked until epoch {prop.queued_until}, now {now}"
            )
        self._apply_payload(prop)
        prop.state = ProposalState.EXECUTED
        prop.executed_epoch = now
        self.core.ledger.append_event("ExecuteProposal", {"proposal": proposal_id})

    def _apply_payload(self, prop: Proposal) -> None:
        arc = self.arcs[prop.arc]
        ledger = self.core.ledger
        kind, payload = prop.kind, prop.payload
        if kind is ProposalKind.CONSTITUTIONAL:
            action = payload.get("action")
            if action == "parameter_change":
                self._apply_parameter(arc, payload)
            elif action == "sbt_reinstate":
                self.core.reputation._apply_reinstate(payload["sbt"])
            return
        if kind is ProposalKind.TREASURY_SPEND:
            amount = payload["amount"]
            treasury = ledger.souls[arc.treasury_soul]
            if treasury.free < amount:
                raise InsufficientTreasury(
                    f"{prop.arc} treasury holds {treasury.free}, cannot spend {amount}"
                )
            ledger._debit_free(arc.treasury_soul, amount)
            ledger._credit(payload["to"], amount)
        elif kind is ProposalKind.PARAMETER_CHANGE:
            self._apply_parameter(arc, payload)
        elif kind is ProposalKind.SBT_REVOCATION:
            self.core.reputation._apply_revoke(payload["sbt"])
        elif kind is ProposalKind.SBT_REINSTATE:
            self.core.reputation._apply_reinstate(payload["sbt"])

    def _apply_parameter(self, arc: Arc, payload: dict) -> None:
        merged = arc.config.to_dict()
        merged[payload["param"]] = payload["value"]
        arc.config = GovernanceConfig.from_dict(merged)

    def council_veto(self, proposal_id: str, signers: list[str]) -> None:
        """Founder-council veto of a queued proposal, gated by the decaying
        founder weight: strong chamber approval overrides the veto outright."""
        prop = self._require_proposal(proposal_id)
        if prop.state is not ProposalState.QUEUED:
            raise NotQueued(f"{proposal_id} is not queued")
        arc = self.arcs[prop.arc]
        valid = sorted(set(signers) & set(arc.founder_council))
        if len(valid) < arc.config.veto_council_m:
            raise InsufficientSigners(
                f"{len(valid)} council signatures, need {arc.config.veto_council_m}"
            )
        weight = founder_veto_weight(arc.config, self.core.ledger.epoch)
        cast = prop.yes_weight + prop.no_weight
        approval_share = prop.yes_weight / cast if cast else Fraction(0)
        if approval_share >= Fraction(1, 2) + weight / 2:
            raise NotAuthorized(
                f"chamber approval {approval_share} overrides a founder veto at weight {weight}"
            )
        prop.state = ProposalState.VETOED
        self.core.ledger.append_event(
            "CouncilVeto", {"proposal": proposal_id, "signers": valid}
        )

    # --- forking ---------------------------------------------------------------------------

    def fork_export(self, arc_id: str) -> bytes:
        """Canonical snapshot of the ARC, content-hashed for tamper evidence."""
        arc = self._require_arc(arc_id)
        credentials = {}
        for member in arc.members:
            mine = [
                {"sbt": s.id, "category": s.category.value, "status": s.status.value}
                for s in self.core.reputation.sbts.values()
                if s.subject == member
            ]
            credentials[member] = sorted(mine, key=lambda r: r["sbt"])
        body = {
            "arc_id": arc.id,
            "members": list(arc.members),
            "founder_council": list(arc.founder_council),
            "config": arc.config.to_dict(),
            "treasury": self.core.ledger.souls[arc.treasury_soul].balance,
            "proposal_digests": list(arc.imported_history)
            + [self.proposals[pid].history_digest() for pid in arc.proposal_ids],
            "member_credentials": credentials,
        }
        preimage = {k: v for k, v in body.items() if k != "arc_id"}
        body["content_hash"] = digest_obj(preimage)
        return canonical_bytes(body)

    def fork_import(self, snapshot: bytes | str) -> str:
        """Rebuild an equivalent ARC (fresh id) from an exported snapshot."""
        raw = snapshot.decode("utf-8") if isinstance(snapshot, bytes) else snapshot
        try:
            body = json.loads(raw)
        except ValueError as exc:
            raise CorruptSnapshot(f"snapshot is not valid JSON: {exc}") from None
        if not isinstance(body, dict) or "content_hash" not in body:
            raise CorruptSnapshot("snapshot is missing its content hash")
        preimage = {k: v for k, v in body.items() if k not in ("arc_id", "content_hash")}
        if digest_obj(preimage) != body["content_hash"]:
            raise CorruptSnapshot("content hash does not match snapshot body")
        try:
            members = list(body["members"])
            council = list(body.get("founder_council", []))
            config = GovernanceConfig.from_dict(body["config"])
            treasury = int(body["treasury"])
            history = list(body.get("proposal_digests", []))
        except (KeyError, TypeError, ValueError, BadConfig) as exc:
            raise CorruptSnapshot(f"snapshot fields invalid: {exc}") from None
        ledger = self.core.ledger
        for m in members:
            ledger._require(m)
        treasury_soul = ledger._new_soul()
        if treasury:
            ledger._mint_internal(treasury_soul.id, treasury)
        arc = Arc(
            id=ledger.next_id("arc"),
            members=sorted(members),
            treasury_soul=treasury_soul.id,
            config=config,
            founder_council=sorted(council),
            imported_history=history,
        )
        self.arcs[arc.id] = arc
        ledger.append_event("ForkImport", {"arc": arc.id, "snapshot": body})
        return arc.id

    # --- queries for metrics and reporting ----------------------------------------------------

    def effective_power(self, arc_id: str, soul: str) -> Fraction:
        """Voting power a member could bring to bear on one proposal right now."""
        arc = self._require_arc(arc_id)
        if arc.config.mode is GovMode.TOKEN_ONLY:
            return Fraction(self.core.ledger.souls[soul].balance)
        reach = affordable_votes(arc.config.voice_credits_per_round, arc.config.qv_cost_mode)
        return self.core.reputation.reputation(soul) + reach

    def ballots_cast_in_epoch(self, arc_id: str, epoch: int) -> int:
        arc = self._require_arc(arc_id)
        voters = set()
        for pid in arc.proposal_ids:
            prop = self.proposals[pid]
            for voter, ballot in prop.plural_ballots.items():
                if ballot.cast_epoch == epoch:
                    voters.add(voter)
            for voter, ballot in prop.token_ballots.items():
                if ballot.cast_epoch == epoch:
                    voters.add(voter)
        return len(voters)

    def to_state_dict(self) -> dict:
        def ballot_map(ballots):
            return {
                voter: {k: v for k, v in vars(b).items()}
                for voter, b in sorted(ballots.items())
            }

        return {
            "arcs": {
                aid: {
                    "members": a.members,
                    "treasury_soul": a.treasury_soul,
                    "config": a.config.to_dict(),
                    "founder_council": a.founder_council,
                    "delegations": dict(sorted(a.delegations.items())),
                    "credit_spent": dict(sorted(a.credit_spent.items())),
                    "proposal_ids": a.proposal_ids,
                    "imported_history": a.imported_history,
                }
                for aid, a in self.arcs.items()
            },
            "proposals": {
                pid: {
                    "arc": p.arc,
                    "kind": p.kind.value,
                    "payload": p.payload,
                    "proposer": p.proposer,
                    "created_epoch": p.created_epoch,
                    "snapshot_epoch": p.snapshot_epoch,
                    "constitutional": p.constitutional,
                    "state": p.state.value,
                    "voting_open": p.voting_open,
                    "queued_until": p.queued_until,
                    "reason": p.reason,
                    "executed_epoch": p.executed_epoch,
                    "snapshot_reputation": (
                        None
                        if p.snapshot_reputation is None
                        else {k: ratio_str(v) for k, v in sorted(p.snapshot_reputation.items())}
                    ),
                    "snapshot_balance": (
                        None
                        if p.snapshot_balance is None
                        else dict(sorted(p.snapshot_balance.items()))
                    ),
                    "plural_ballots": ballot_map(p.plural_ballots),
                    "epistemic_ballots": ballot_map(p.epistemic_ballots),
                    "token_ballots": ballot_map(p.token_ballots),
                    "yes_weight": ratio_str(p.yes_weight),
                    "no_weight": ratio_str(p.no_weight),
                }
                for pid, p in self.proposals.items()
            },
        }
