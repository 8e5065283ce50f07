"""Single-process protocol state machine.

Commons wires the ledger, reputation registry, governance, funding engine,
and IP market over one event log. Construction writes a Genesis record with
the seed and constructor knobs; every public command appends exactly one
event, so `Commons.replay` can rebuild an identical instance from the log
and prove it by comparing hashes link by link.
"""

from __future__ import annotations

from .canonical import canonical_json, digest_obj, ratio_str
from .errors import CommonsError, LogCorrupt
from .funding import FundingEngine
from .governance import Governance, GovernanceConfig
from .ipmarket import IpMarket
from .ledger import EventRecord, Ledger
from .reputation import SbtRegistry

PROTOCOL_VERSION = 1


class Commons:
    """Facade over all protocol modules sharing one ledger and log."""

    def __init__(self, seed: int, reputation_weights: dict | None = None, royalty_fee_bp: int = 50):
        self.ledger = Ledger(seed)
        self.reputation = SbtRegistry(self, reputation_weights)
        self.governance = Governance(self)
        self.funding = FundingEngine(self)
        self.market = IpMarket(self, royalty_fee_bp)
        self.ledger.append_event(
            "Genesis",
            {
                "seed": seed,
                "version": PROTOCOL_VERSION,
                "weights": {cat.value: ratio_str(w) for cat, w in self.reputation.weights.items()},
                "fee_bp": royalty_fee_bp,
            },
        )
        self.ledger.capture_epoch_open()
        self.reputation.capture_epoch_open()

    @property
    def epoch(self) -> int:
        return self.ledger.epoch

    def advance_epoch(self, epochs: int = 1) -> int:
        """Move the clock; epoch-open snapshots refresh for the new epoch."""
        new_epoch = self.ledger._advance(epochs)
        self.reputation.capture_epoch_open()
        return new_epoch

    def state_digest(self) -> str:
        """Hash of the full protocol state under canonical serialization."""
        return digest_obj(
            {
                "ledger": self.ledger.to_state_dict(),
                "reputation": self.reputation.to_state_dict(),
                "governance": self.governance.to_state_dict(),
                "funding": self.funding.to_state_dict(),
                "market": self.market.to_state_dict(),
            }
        )

    # --- replay ---------------------------------------------------------------

    @classmethod
    def replay(cls, events: list[EventRecord]) -> "Commons":
        """Re-execute a recorded log; any divergence raises LogCorrupt."""
        Ledger.verify_chain(events)
        if not events or events[0].kind != "Genesis":
            raise LogCorrupt(1, "log must start with a Genesis record")
        genesis = events[0].payload
        commons = cls(
            seed=genesis["seed"],
            reputation_weights=genesis.get("weights"),
            royalty_fee_bp=genesis.get("fee_bp", 50),
        )
        if commons.ledger.events[0].hash != events[0].hash:
            raise LogCorrupt(1, "genesis parameters do not reproduce the recorded genesis")
        for record in events[1:]:
            handler = COMMANDS.get(record.kind)
            if handler is None:
                raise LogCorrupt(record.seq, f"unknown command kind {record.kind!r}")
            try:
                handler(commons, record.payload)
            except CommonsError as exc:
                raise LogCorrupt(record.seq, f"command failed on replay: {exc}") from exc
            replayed = commons.ledger.events[-1]
            if len(commons.ledger.events) != record.seq or replayed.hash != record.hash:
                raise LogCorrupt(record.seq, "replayed event diverges from the recorded one")
        return commons

    @classmethod
    def replay_file(cls, path) -> tuple["Commons", list[EventRecord]]:
        events = []
        with open(path, "r", encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if line:
                    events.append(Ledger.parse_event_line(line, seq_hint=i))
        return cls.replay(events), events


# command kind -> replay handler; every handler re-runs the public operation
COMMANDS = {
    "CreateSoul": lambda c, p: c.ledger.create_soul(),
    "Mint": lambda c, p: c.ledger.mint(p["soul"], p["amount"]),
    "Burn": lambda c, p: c.ledger.burn(p["soul"], p["amount"]),
    "Transfer": lambda c, p: c.ledger.transfer(p["from"], p["to"], p["amount"]),
    "CreateVesting": lambda c, p: c.ledger.create_vesting(
        p["owner"], p["total"], p["cliff_epochs"], p["duration_epochs"]
    ),
    "ClaimVesting": lambda c, p: c.ledger.claim_vesting(p["schedule"]),
    "AdvanceEpoch": lambda c, p: c.advance_epoch(p["epochs"]),
    "IssueSbt": lambda c, p: c.reputation.issue_sbt(
        p["issuer"], p["subject"], p["category"], p.get("metadata") or {}
    ),
    "RevokeSbt": lambda c, p: c.reputation.revoke_sbt(p["sbt"], p["proposal"]),
    "AppealSbt": lambda c, p: c.reputation.appeal_sbt(p["sbt"]),
    "CommitMetadata": lambda c, p: c.reputation.commit_metadata(p["soul"]),
    "StakeSbt": lambda c, p: c.reputation.stake_sbt(p["soul"], p["sbt"], p["until_epoch"]),
    "UnstakeSbt": lambda c, p: c.reputation.unstake(p["stake"]),
    "CreateArc": lambda c, p: c.governance.create_arc(
        p["members"],
        p["treasury"],
        GovernanceConfig.from_dict(p["config"]),
        p["founder_council"],
    ),
    "SubmitProposal": lambda c, p: c.governance.submit_proposal(
        p["arc"], p["proposer"], p["kind"], p["payload"]
    ),
    "CastPluralVote": lambda c, p: c.governance.cast_plural_vote(p["proposal"], p["voter"], p["votes"]),
    "CastEpistemicVote": lambda c, p: c.governance.cast_epistemic_vote(
        p["proposal"], p["voter"], p["support"]
    ),
    "CastTokenVote": lambda c, p: c.governance.cast_token_vote(p["proposal"], p["voter"], p["support"]),
    "Delegate": lambda c, p: c.governance.delegate(p["arc"], p["delegator"], p["delegate"]),
    "Undelegate": lambda c, p: c.governance.undelegate(p["arc"], p["delegator"]),
    "CloseVoting": lambda c, p: c.governance.close_voting(p["proposal"]),
    "Tally": lambda c, p: c.governance.tally(p["proposal"]),
    "CouncilVeto": lambda c, p: c.governance.council_veto(p["proposal"], p["signers"]),
    "ExecuteProposal": lambda c, p: c.governance.execute(p["proposal"]),
    "ForkImport": lambda c, p: c.governance.fork_import(canonical_json(p["snapshot"])),
    "OpenRound": lambda c, p: c.funding.open_round(
        p["arc"], p["pool"], p["projects"], p["mode"], p.get("require_stake")
    ),
    "Contribute": lambda c, p: c.funding.contribute(
        p["round"], p["contributor"], p["project"], p["amount"]
    ),
    "SettleRound": lambda c, p: c.funding.settle_round(p["round"]),
    "CreateMissionProgram": lambda c, p: c.funding.create_mission_program(
        p["arc"], p["director"], p["budget"], [tuple(m) for m in p["milestones"]]
    ),
    "ReportMilestone": lambda c, p: c.funding.report_milestone(p["program"], p["index"]),
    "ReleaseTranche": lambda c, p: c.funding.release_tranche(p["program"], p["index"], p["recipient"]),
    "CancelProgram": lambda c, p: c.funding.cancel_program(p["program"]),
    "SetFeeRecipient": lambda c, p: c.market.set_fee_recipient(p["soul"]),
    "MintIpNft": lambda c, p: c.market.mint_ipnft(
        p["owner"], p["content_commitment"], p["open_access"], p["royalty_split"]
    ),
    "SetOpenAccess": lambda c, p: c.market.set_open_access(p["asset"], p["value"]),
    "GrantLicense": lambda c, p: c.market.grant_commercial_license(
        p["asset"], p["licensee"], p["price"], p["exclusive"]
    ),
    "Fractionalize": lambda c, p: c.market.fractionalize(
        p["asset"], p["supply_cap"], p["p0"], p["slope"], p["phi0"], p["horizon"]
    ),
    "CurveBuy": lambda c, p: c.market.curve_buy(p["pool"], p["buyer"], p["units"]),
    "CurveSell": lambda c, p: c.market.curve_sell(p["pool"], p["seller"], p["units"], p["at_epoch"]),
    "DistributeRoyalties": lambda c, p: c.market.distribute_royalties(
        p["asset"], p["revenue"], p["payer"]
    ),
}
