"""Soulbound reputation: non-transferable credential tokens, weighted scores,
salted Merkle commitments, and selective disclosure proofs.

Credentials (SBTs) bind to a subject soul forever; every transfer attempt
fails and changes nothing. Revocation happens only through an executed
governance decision and flips status rather than deleting, so the issuance
record stays auditable. One appeal per credential may put reinstatement in
front of the constitutional bar.

A soul's portfolio commits to a Merkle root over per-credential leaves
leaf = H(category || H(salt || detail_fields)), which lets "at least k of
category C" proofs reveal the category and the path and nothing else.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Any

from . import merkle
from .canonical import canonical_bytes, id_sort_key, parse_ratio, ratio_str
from .errors import (
    AlreadyRevoked,
    AlreadyStaked,
    AppealExhausted,
    BadWeights,
    InactiveSbt,
    InsufficientCredentials,
    InvalidStake,
    NonTransferable,
    NotAuthorized,
    NotMature,
    NotOwner,
    NotRevoked,
    UnknownArc,
    UnknownCategory,
    UnknownSbt,
    UnknownSoul,
)

if TYPE_CHECKING:
    from .commons import Commons


class SbtCategory(str, Enum):
    PUBLICATION = "Publication"
    PEER_REVIEW = "PeerReview"
    REPLICATION = "Replication"
    DATA_SHARING = "DataSharing"
    MENTORING = "Mentoring"
    CREDENTIAL = "Credential"


class SbtStatus(str, Enum):
    ACTIVE = "Active"
    REVOKED = "Revoked"
    REINSTATED = "Reinstated"


# replication work is deliberately the scarcest signal, so it weighs most
DEFAULT_WEIGHTS: dict[SbtCategory, Fraction] = {
    SbtCategory.PUBLICATION: Fraction(2),
    SbtCategory.PEER_REVIEW: Fraction(1),
    SbtCategory.REPLICATION: Fraction(3),
    SbtCategory.DATA_SHARING: Fraction(1),
    SbtCategory.MENTORING: Fraction(1),
    SbtCategory.CREDENTIAL: Fraction(1),
}

EMPTY_PORTFOLIO_ROOT = hashlib.sha256(b"scholarly-commons:empty-credential-set").hexdigest()


def validate_weights(weights: dict) -> dict[SbtCategory, Fraction]:
    """Normalize and check a weight table: all six categories, non-negative,
    replication at least as heavy as everything else."""
    table = {}
    for category in SbtCategory:
        if category not in weights and category.value not in weights:
            raise BadWeights(f"missing weight for {category.value}")
        raw = weights.get(category, weights.get(category.value))
        w = parse_ratio(raw)
        if w < 0:
            raise BadWeights(f"negative weight for {category.value}")
        table[category] = w
    if any(table[SbtCategory.REPLICATION] < w for w in table.values()):
        raise BadWeights("replication must weigh at least as much as every other category")
    return table


def parse_category(value: Any) -> SbtCategory:
    try:
        return SbtCategory(value)
    except ValueError:
        raise UnknownCategory(f"no such category: {value!r}") from None


@dataclass
class Sbt:
    id: str
    subject: str
    issuer: str
    category: SbtCategory
    issued_epoch: int
    status: SbtStatus = SbtStatus.ACTIVE
    metadata: dict = field(default_factory=dict)
    salt: str = ""
    appealed: bool = False

    @property
    def countable(self) -> bool:
        return self.status in (SbtStatus.ACTIVE, SbtStatus.REINSTATED)

    def inner_digest(self) -> bytes:
        """Salted digest hiding every field except (via the leaf) the category."""
        return hashlib.sha256(bytes.fromhex(self.salt) + canonical_bytes(self.metadata)).digest()

    def leaf_digest(self) -> bytes:
        return leaf_from_inner(self.category.value, self.inner_digest())


def leaf_from_inner(category: str, inner: bytes) -> bytes:
    return hashlib.sha256(category.encode("utf-8") + inner).digest()


@dataclass
class Stake:
    id: str
    soul: str
    sbt: str
    category: SbtCategory
    staked_epoch: int
    until_epoch: int
    released: bool = False


class SbtRegistry:
    """Registry of soulbound credentials plus commitments and stakes."""

    def __init__(self, core: "Commons", weights: dict | None = None):
        self.core = core
        self.weights = validate_weights(weights) if weights else dict(DEFAULT_WEIGHTS)
        self.sbts: dict[str, Sbt] = {}
        self.roots: dict[str, str] = {}
        self.stakes: dict[str, Stake] = {}
        # reputation per soul as of the start of the current epoch
        self.epoch_open_scores: dict[str, Fraction] = {}

    # --- issuance and scoring -------------------------------------------------

    def issue_sbt(self, issuer_arc: str, subject: str, category, metadata: dict | None = None) -> str:
        ledger = self.core.ledger
        if issuer_arc not in self.core.governance.arcs:
            raise UnknownArc(f"no such arc: {issuer_arc}")
        ledger._require(subject)
        cat = parse_category(category)
        sbt = Sbt(
            id=ledger.next_id("sbt"),
            subject=subject,
            issuer=issuer_arc,
            category=cat,
            issued_epoch=ledger.epoch,
            metadata=dict(metadata or {}),
            salt=ledger.rng.randbytes(16).hex(),
        )
        self.sbts[sbt.id] = sbt
        root = self._recompute_root(subject)
        ledger.append_event(
            "IssueSbt",
            {
                "sbt": sbt.id,
                "issuer": issuer_arc,
                "subject": subject,
                "category": cat.value,
                "metadata": sbt.metadata,
                "root": root,
            },
        )
        return sbt.id

    def attempt_transfer_sbt(self, sbt_id: str, to_soul: str) -> None:
        # soulbound, unconditionally; no event, no state change
        raise NonTransferable(f"credential {sbt_id} is bound to its subject and cannot move to {to_soul}")

    def reputation(self, soul: str, weights: dict | None = None) -> Fraction:
        """Weighted count of the soul's countable credentials; pure query."""
        self.core.ledger._require(soul)
        table = validate_weights(weights) if weights else self.weights
        score = Fraction(0)
        for sbt in self.sbts.values():
            if sbt.subject == soul and sbt.countable:
                score += table[sbt.category]
        return score

    # --- revocation and appeal --------------------------------------------------

    def _require_sbt(self, sbt_id: str) -> Sbt:
        sbt = self.sbts.get(sbt_id)
        if sbt is None:
            raise UnknownSbt(f"no such credential: {sbt_id}")
        return sbt

    def revoke_sbt(self, sbt_id: str, authorizing_proposal: str) -> None:
        """Revoke under an executed governance decision that targets this SBT."""
        sbt = self._require_sbt(sbt_id)
        proposal = self.core.governance.proposals.get(authorizing_proposal)
        if (
            proposal is None
            or proposal.state.value != "Executed"
            or proposal.kind.value != "SbtRevocation"
            or proposal.payload.get("sbt") != sbt_id
        ):
            raise NotAuthorized(f"no executed revocation decision covers {sbt_id}")
        self._apply_revoke(sbt_id)
        self.core.ledger.append_event("RevokeSbt", {"sbt": sbt_id, "proposal": authorizing_proposal})

    def _apply_revoke(self, sbt_id: str) -> None:
        sbt = self._require_sbt(sbt_id)
        if sbt.status is SbtStatus.REVOKED:
            raise AlreadyRevoked(f"{sbt_id} is already revoked")
        if sbt.status is SbtStatus.REINSTATED:
            raise NotAuthorized(f"{sbt_id} was reinstated on appeal and cannot be revoked again")
        sbt.status = SbtStatus.REVOKED
        self._recompute_root(sbt.subject)

    def _apply_reinstate(self, sbt_id: str) -> None:
        sbt = self._require_sbt(sbt_id)
        if sbt.status is not SbtStatus.REVOKED:
            raise NotRevoked(f"{sbt_id} is not revoked")
        sbt.status = SbtStatus.REINSTATED
        self._recompute_root(sbt.subject)

    def appeal_sbt(self, sbt_id: str) -> str:
        """One-shot appeal: opens a constitutional-class reinstatement proposal."""
        sbt = self._require_sbt(sbt_id)
        if sbt.status is not SbtStatus.REVOKED:
            raise NotRevoked(f"{sbt_id} is not revoked, nothing to appeal")
        if sbt.appealed:
            raise AppealExhausted(f"{sbt_id} has already been appealed once")
        proposal = self.core.governance._create_proposal(
            arc=sbt.issuer,
            proposer=sbt.subject,
            kind="SbtReinstate",
            payload={"sbt": sbt_id},
            constitutional=True,
            check_member=False,
        )
        sbt.appealed = True
        self.core.ledger.append_event("AppealSbt", {"sbt": sbt_id, "proposal": proposal.id})
        return proposal.id

    # --- commitments and disclosure ----------------------------------------------

    def _portfolio(self, soul: str) -> list[Sbt]:
        mine = [s for s in self.sbts.values() if s.subject == soul and s.countable]
        return sorted(mine, key=lambda s: id_sort_key(s.id))

    def _recompute_root(self, soul: str) -> str:
        leaves = [s.leaf_digest() for s in self._portfolio(soul)]
        root = merkle.merkle_root(leaves).hex() if leaves else EMPTY_PORTFOLIO_ROOT
        self.roots[soul] = root
        return root

    def commit_metadata(self, soul: str) -> str:
        """Recommit the soul's portfolio root and log it."""
        self.core.ledger._require(soul)
        root = self._recompute_root(soul)
        self.core.ledger.append_event("CommitMetadata", {"soul": soul, "root": root})
        return root

    def current_root(self, soul: str) -> str:
        self.core.ledger._require(soul)
        return self.roots.get(soul, EMPTY_PORTFOLIO_ROOT)

    def prove_count_at_least(self, soul: str, category, k: int) -> dict:
        """Build a disclosure proof that the soul holds >= k countable
        credentials of the category; reveals category and paths only."""
        self.core.ledger._require(soul)
        cat = parse_category(category)
        if k < 0:
            raise InsufficientCredentials("k must be non-negative")
        portfolio = self._portfolio(soul)
        chosen = [s for s in portfolio if s.category is cat][:k]
        if len(chosen) < k:
            raise InsufficientCredentials(
                f"{soul} holds {sum(1 for s in portfolio if s.category is cat)} countable "
                f"{cat.value} credentials, cannot prove {k}"
            )
        root = self.current_root(soul)
        leaves = [s.leaf_digest() for s in portfolio]
        branches = []
        for sbt in chosen:
            index = portfolio.index(sbt)
            path = merkle.merkle_path(leaves, index)
            branches.append(
                {
                    "leaf_digest": sbt.inner_digest().hex(),
                    "path": [{"side": side, "digest": sib.hex()} for side, sib in path],
                }
            )
        return {"root": root, "category": cat.value, "k": k, "branches": branches}

    @staticmethod
    def verify_proof(root: str, proof: dict) -> bool:
        """Check a disclosure proof against a commitment root; never raises."""
        try:
            if proof["root"] != root:
                return False
            category = proof["category"]
            k = proof["k"]
            branches = proof["branches"]
            if not isinstance(category, str) or not isinstance(k, int) or k < 0:
                return False
            if not isinstance(branches, list) or len(branches) < k:
                return False
            seen = set()
            for branch in branches:
                inner_hex = branch["leaf_digest"]
                inner = bytes.fromhex(inner_hex)
                if len(inner) != 32 or inner_hex in seen:
                    return False
                seen.add(inner_hex)
                leaf = leaf_from_inner(category, inner)
                path = [(step["side"], bytes.fromhex(step["digest"])) for step in branch["path"]]
                if any(len(sib) != 32 for _, sib in path):
                    return False
                if not merkle.verify_path(leaf, path, bytes.fromhex(root)):
                    return False
            return True
        except (KeyError, TypeError, ValueError):
            return False

    # --- staking ----------------------------------------------------------------

    def stake_sbt(self, soul: str, sbt_id: str, until_epoch: int) -> str:
        ledger = self.core.ledger
        ledger._require(soul)
        sbt = self._require_sbt(sbt_id)
        if sbt.subject != soul:
            raise NotOwner(f"{sbt_id} belongs to {sbt.subject}, not {soul}")
        if not sbt.countable:
            raise InactiveSbt(f"{sbt_id} is revoked and cannot be staked")
        if until_epoch <= ledger.epoch:
            raise InvalidStake(f"until_epoch {until_epoch} is not in the future")
        if any(st.sbt == sbt_id and not st.released for st in self.stakes.values()):
            raise AlreadyStaked(f"{sbt_id} is already staked")
        stake = Stake(
            id=ledger.next_id("stake"),
            soul=soul,
            sbt=sbt_id,
            category=sbt.category,
            staked_epoch=ledger.epoch,
            until_epoch=until_epoch,
        )
        self.stakes[stake.id] = stake
        ledger.append_event(
            "StakeSbt",
            {"stake": stake.id, "soul": soul, "sbt": sbt_id, "until_epoch": until_epoch},
        )
        return stake.id

    def unstake(self, stake_id: str) -> None:
        stake = self.stakes.get(stake_id)
        if stake is None:
            raise UnknownSbt(f"no such stake: {stake_id}")
        if stake.released:
            raise InvalidStake(f"{stake_id} was already released")
        if self.core.ledger.epoch < stake.until_epoch:
            raise NotMature(f"{stake_id} is locked until epoch {stake.until_epoch}")
        stake.released = True
        self.core.ledger.append_event("UnstakeSbt", {"stake": stake_id})

    def has_active_stake(self, soul: str, category) -> bool:
        """True if the soul has a live stake on a countable SBT of this category."""
        cat = parse_category(category)
        now = self.core.ledger.epoch
        for stake in self.stakes.values():
            if stake.released or stake.soul != soul or stake.category is not cat:
                continue
            if stake.until_epoch > now and self.sbts[stake.sbt].countable:
                return True
        return False

    # --- snapshots and serialization ----------------------------------------------

    def capture_epoch_open(self) -> None:
        scores: dict[str, Fraction] = {}
        for sbt in self.sbts.values():
            if sbt.countable:
                scores[sbt.subject] = scores.get(sbt.subject, Fraction(0)) + self.weights[sbt.category]
        self.epoch_open_scores = scores

    def to_state_dict(self) -> dict:
        return {
            "weights": {cat.value: ratio_str(w) for cat, w in self.weights.items()},
            "sbts": {
                sid: {
                    "subject": s.subject,
                    "issuer": s.issuer,
                    "category": s.category.value,
                    "issued_epoch": s.issued_epoch,
                    "status": s.status.value,
                    "metadata": s.metadata,
                    "salt": s.salt,
                    "appealed": s.appealed,
                }
                for sid, s in self.sbts.items()
            },
            "roots": dict(self.roots),
            "stakes": {
                stid: {
                    "soul": st.soul,
                    "sbt": st.sbt,
                    "category": st.category.value,
                    "staked_epoch": st.staked_epoch,
                    "until_epoch": st.until_epoch,
                    "released": st.released,
                }
                for stid, st in self.stakes.items()
            },
            "epoch_open_scores": {sid: ratio_str(v) for sid, v in self.epoch_open_scores.items()},
        }
