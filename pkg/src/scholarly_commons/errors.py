"""Protocol error hierarchy.

Every rejected operation raises a CommonsError subclass and leaves state
untouched. The CLI maps CommonsError to exit code 1; anything else is a bug.
"""

from __future__ import annotations


class CommonsError(Exception):
    """Base class for all domain errors."""


# --- ledger ---------------------------------------------------------------

class UnknownSoul(CommonsError):
    pass


class ZeroAmount(CommonsError):
    pass


class InsufficientFree(CommonsError):
    pass


class SelfTransfer(CommonsError):
    pass


class BadSchedule(CommonsError):
    pass


class UnknownSchedule(CommonsError):
    pass


class NothingClaimable(CommonsError):
    pass


class LogCorrupt(CommonsError):
    """Event log fails hash-chain or replay verification."""

    def __init__(self, seq: int, reason: str):
        super().__init__(f"event log invalid at seq={seq}: {reason}")
        self.seq = seq
        self.reason = reason


# --- reputation ------------------------------------------------------------

class UnknownSbt(CommonsError):
    pass


class UnknownArc(CommonsError):
    pass


class UnknownCategory(CommonsError):
    pass


class NonTransferable(CommonsError):
    pass


class NotAuthorized(CommonsError):
    pass


class AlreadyRevoked(CommonsError):
    pass


class NotRevoked(CommonsError):
    pass


class AppealExhausted(CommonsError):
    pass


class InsufficientCredentials(CommonsError):
    pass


class AlreadyStaked(CommonsError):
    pass


class NotMature(CommonsError):
    pass


class NotOwner(CommonsError):
    pass


class InactiveSbt(CommonsError):
    pass


class InvalidStake(CommonsError):
    pass


class BadWeights(CommonsError):
    pass


# --- governance ------------------------------------------------------------

class NotMember(CommonsError):
    pass


class InsufficientCredits(CommonsError):
    pass


class NotVoting(CommonsError):
    pass


class VotingOpen(CommonsError):
    pass


class BelowThreshold(CommonsError):
    pass


class CycleDetected(CommonsError):
    pass


class SelfDelegation(CommonsError):
    pass


class NoDelegation(CommonsError):
    pass


class NotQueued(CommonsError):
    pass


class InsufficientSigners(CommonsError):
    pass


class TimelockActive(CommonsError):
    pass


class CorruptSnapshot(CommonsError):
    pass


class BadConfig(CommonsError):
    pass


class BadPayload(CommonsError):
    pass


class ModeMismatch(CommonsError):
    pass


class UnknownProposal(CommonsError):
    pass


# --- funding ---------------------------------------------------------------

class EmptyProjects(CommonsError):
    pass


class UnknownProject(CommonsError):
    pass


class InsufficientTreasury(CommonsError):
    pass


class StakeRequired(CommonsError):
    pass


class RoundClosed(CommonsError):
    pass


class NoContributions(CommonsError):
    pass


class AlreadySettled(CommonsError):
    pass


class OutOfOrder(CommonsError):
    pass


class NotReported(CommonsError):
    pass


class AlreadyReported(CommonsError):
    pass


class BudgetExceeded(CommonsError):
    pass


class UnknownRound(CommonsError):
    pass


class UnknownProgram(CommonsError):
    pass


# --- ip market ---------------------------------------------------------------

class BadSplit(CommonsError):
    pass


class ExclusiveConflict(CommonsError):
    pass


class AlreadyFractionalized(CommonsError):
    pass


class InsufficientUnits(CommonsError):
    pass


class ZeroRevenue(CommonsError):
    pass


class SupplyCapExceeded(CommonsError):
    pass


class OpenAccessPermanent(CommonsError):
    pass


class UnknownAsset(CommonsError):
    pass


class UnknownPool(CommonsError):
    pass


# --- simulation ---------------------------------------------------------------

class ParseError(CommonsError):
    pass


class UnknownAgentRef(CommonsError):
    pass


class ScenarioError(CommonsError):
    """Scenario failed validation; carries every diagnostic found."""

    def __init__(self, diagnostics: list):
        super().__init__("; ".join(diagnostics) or "invalid scenario")
        self.diagnostics = list(diagnostics)


class ScenarioMismatch(CommonsError):
    pass


class EmptyValues(CommonsError):
    pass


class AllZeroValues(CommonsError):
    pass


class InvariantViolation(CommonsError):
    """A module invariant failed mid-run; the simulation aborts."""

    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"invariant '{name}' violated" + (f": {detail}" if detail else ""))
        self.name = name
