"""Token ledger: souls, balances, vesting lockups, the epoch clock, and the
append-only event log.

One epoch is one simulated day. All state mutation across the protocol is
serialized through commands that append exactly one event each, so replaying
the log from the genesis seed rebuilds the whole state byte for byte. Queries
never write.

Conservation holds at all times: the sum of every soul balance equals total
minted minus total burned. Vested grants sit inside the owner's balance but
count as locked until claimed; locked funds cannot be transferred or burned.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .canonical import ZERO_DIGEST, canonical_bytes, sha256_hex, to_jsonable
from .errors import (
    BadSchedule,
    InsufficientFree,
    LogCorrupt,
    NothingClaimable,
    SelfTransfer,
    UnknownSchedule,
    UnknownSoul,
    ZeroAmount,
)


@dataclass(frozen=True)
class EventRecord:
    """One link of the hash-chained log."""

    seq: int
    epoch: int
    kind: str
    payload: dict
    hash: str

    def body(self) -> dict:
        return {"epoch": self.epoch, "kind": self.kind, "payload": self.payload, "seq": self.seq}

    def to_line(self) -> str:
        record = dict(self.body())
        record["hash"] = self.hash
        return json.dumps(to_jsonable(record), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def chain_digest(prev_hash: str, body: dict) -> str:
    return sha256_hex(bytes.fromhex(prev_hash) + canonical_bytes(body))


@dataclass
class Soul:
    """A non-transferable account bound to one participant."""

    id: str
    balance: int = 0
    locked: int = 0
    created_epoch: int = 0

    @property
    def free(self) -> int:
        return self.balance - self.locked


@dataclass
class VestingSchedule:
    """Linear release after a cliff; the cliff epoch releases pro-rata."""

    id: str
    owner: str
    total: int
    cliff_epochs: int
    duration_epochs: int
    start_epoch: int
    claimed: int = 0

    def vested(self, at_epoch: int) -> int:
        elapsed = at_epoch - self.start_epoch
        if elapsed < self.cliff_epochs:
            return 0
        if elapsed >= self.duration_epochs:
            return self.total
        return self.total * elapsed // self.duration_epochs


class Ledger:
    """Account book plus the event log that feeds replay."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = random.Random(seed)
        self.epoch = 0
        self.souls: dict[str, Soul] = {}
        self.vestings: dict[str, VestingSchedule] = {}
        self.minted = 0
        self.burned = 0
        self.events: list[EventRecord] = []
        self.head = ZERO_DIGEST
        self.counters: dict[str, int] = {}
        # balances as of the start of the current epoch; snapshot votes read
        # these so nothing acquired mid-epoch carries voting weight
        self.epoch_open_balances: dict[str, int] = {}

    # --- id generation and event plumbing -----------------------------------

    def next_id(self, prefix: str) -> str:
        n = self.counters.get(prefix, 0) + 1
        self.counters[prefix] = n
        return f"{prefix}#{n}"

    def append_event(self, kind: str, payload: dict) -> EventRecord:
        body = {
            "epoch": self.epoch,
            "kind": kind,
            "payload": to_jsonable(payload),
            "seq": len(self.events) + 1,
        }
        record = EventRecord(
            seq=body["seq"],
            epoch=self.epoch,
            kind=kind,
            payload=body["payload"],
            hash=chain_digest(self.head, body),
        )
        self.events.append(record)
        self.head = record.hash
        return record

    # --- internal mutations used inside other commands ----------------------

    def _require(self, soul_id: str) -> Soul:
        soul = self.souls.get(soul_id)
        if soul is None:
            raise UnknownSoul(f"no such soul: {soul_id}")
        return soul

    def _new_soul(self) -> Soul:
        soul = Soul(id=self.next_id("soul"), created_epoch=self.epoch)
        self.souls[soul.id] = soul
        return soul

    def _credit(self, soul_id: str, amount: int) -> None:
        self._require(soul_id).balance += amount

    def _debit_free(self, soul_id: str, amount: int) -> None:
        soul = self._require(soul_id)
        if soul.free < amount:
            raise InsufficientFree(f"{soul_id} has {soul.free} free, needs {amount}")
        soul.balance -= amount

    def _mint_internal(self, soul_id: str, amount: int) -> None:
        self._credit(soul_id, amount)
        self.minted += amount

    # --- commands ------------------------------------------------------------

    def create_soul(self) -> str:
        soul = self._new_soul()
        self.append_event("CreateSoul", {"soul": soul.id})
        return soul.id

    def mint(self, soul_id: str, amount: int) -> None:
        self._require(soul_id)
        if amount <= 0:
            raise ZeroAmount("mint amount must be positive")
        self._mint_internal(soul_id, amount)
        self.append_event("Mint", {"soul": soul_id, "amount": amount})

    def burn(self, soul_id: str, amount: int) -> None:
        self._require(soul_id)
        if amount <= 0:
            raise ZeroAmount("burn amount must be positive")
        self._debit_free(soul_id, amount)
        self.burned += amount
        self.append_event("Burn", {"soul": soul_id, "amount": amount})

    def transfer(self, src: str, dst: str, amount: int) -> None:
        self._require(src)
        self._require(dst)
        if src == dst:
            raise SelfTransfer(f"{src} cannot transfer to itself")
        if amount <= 0:
            raise ZeroAmount("transfer amount must be positive")
        self._debit_free(src, amount)
        self._credit(dst, amount)
        self.append_event("Transfer", {"from": src, "to": dst, "amount": amount})

    def create_vesting(self, owner: str, total: int, cliff_epochs: int, duration_epochs: int) -> str:
        soul = self._require(owner)
        if total <= 0:
            raise ZeroAmount("vesting total must be positive")
        if duration_epochs <= 0 or cliff_epochs < 0 or cliff_epochs > duration_epochs:
            raise BadSchedule(f"cliff {cliff_epochs} / duration {duration_epochs} is not a valid window")
        if soul.free < total:
            raise InsufficientFree(f"{owner} has {soul.free} free, cannot lock {total}")
        schedule = VestingSchedule(
            id=self.next_id("vest"),
            owner=owner,
            total=total,
            cliff_epochs=cliff_epochs,
            duration_epochs=duration_epochs,
            start_epoch=self.epoch,
        )
        soul.locked += total
        self.vestings[schedule.id] = schedule
        self.append_event(
            "CreateVesting",
            {
                "schedule": schedule.id,
                "owner": owner,
                "total": total,
                "cliff_epochs": cliff_epochs,
                "duration_epochs": duration_epochs,
            },
        )
        return schedule.id

    def claimable(self, schedule_id: str, at_epoch: int | None = None) -> int:
        """Released but not yet claimed amount; pure query."""
        schedule = self.vestings.get(schedule_id)
        if schedule is None:
            raise UnknownSchedule(f"no such schedule: {schedule_id}")
        at = self.epoch if at_epoch is None else at_epoch
        return schedule.vested(at) - schedule.claimed

    def claim_vesting(self, schedule_id: str) -> int:
        """Move released funds out of the locked sub-ledger."""
        amount = self.claimable(schedule_id)
        if amount <= 0:
            raise NothingClaimable(f"{schedule_id} has nothing released to claim")
        schedule = self.vestings[schedule_id]
        schedule.claimed += amount
        self.souls[schedule.owner].locked -= amount
        self.append_event("ClaimVesting", {"schedule": schedule_id, "amount": amount})
        return amount

    def _advance(self, epochs: int) -> int:
        if epochs <= 0:
            raise ZeroAmount("must advance by at least one epoch")
        self.epoch += epochs
        self.capture_epoch_open()
        self.append_event("AdvanceEpoch", {"epochs": epochs, "epoch": self.epoch})
        return self.epoch

    def capture_epoch_open(self) -> None:
        self.epoch_open_balances = {sid: soul.balance for sid, soul in self.souls.items()}

    # --- log verification and serialization ----------------------------------

    def write_events(self, path) -> int:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.events:
                fh.write(record.to_line() + "\n")
        return len(self.events)

    @staticmethod
    def parse_event_line(line: str, seq_hint: int) -> EventRecord:
        try:
            raw = json.loads(line)
            return EventRecord(
                seq=raw["seq"],
                epoch=raw["epoch"],
                kind=raw["kind"],
                payload=raw["payload"],
                hash=raw["hash"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LogCorrupt(seq_hint, f"unparseable record ({exc})") from exc

    @staticmethod
    def verify_chain(events: list[EventRecord]) -> None:
        """Check seq continuity and the hash chain; raise LogCorrupt on the first bad link."""
        prev = ZERO_DIGEST
        for i, record in enumerate(events):
            expected_seq = i + 1
            if record.seq != expected_seq:
                raise LogCorrupt(expected_seq, f"seq jumps to {record.seq}")
            recomputed = chain_digest(prev, record.body())
            if recomputed != record.hash:
                raise LogCorrupt(record.seq, "hash mismatch")
            prev = record.hash

    def to_state_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "seed": self.seed,
            "minted": self.minted,
            "burned": self.burned,
            "counters": dict(self.counters),
            "souls": {
                sid: {"balance": s.balance, "locked": s.locked, "created_epoch": s.created_epoch}
                for sid, s in self.souls.items()
            },
            "vesting": {
                vid: {
                    "owner": v.owner,
                    "total": v.total,
                    "cliff_epochs": v.cliff_epochs,
                    "duration_epochs": v.duration_epochs,
                    "start_epoch": v.start_epoch,
                    "claimed": v.claimed,
                }
                for vid, v in self.vestings.items()
            },
            "epoch_open_balances": dict(self.epoch_open_balances),
        }
