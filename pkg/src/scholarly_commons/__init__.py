"""Deterministic simulator for a decentralized scholarly commons.

The package models a token ledger with vesting, soulbound reputation with
selective disclosure, bicameral DAO governance, quadratic funding, and an
IP market, all behind one hash-chained event log, plus a scenario harness
that runs the adversarial stress tests (plutocracy, flash loans, apathy,
speculation) against those modules.
"""

from .commons import Commons
from .errors import CommonsError, InvariantViolation
from .funding import FundingEngine, MatchingMode
from .governance import (
    Governance,
    GovernanceConfig,
    GovMode,
    ProposalKind,
    ProposalState,
    QvMode,
    founder_veto_weight,
    qv_cost,
)
from .ipmarket import IpMarket
from .ledger import EventRecord, Ledger
from .reputation import DEFAULT_WEIGHTS, SbtCategory, SbtRegistry, SbtStatus

__version__ = "0.1.0"

__all__ = [
    "Commons",
    "CommonsError",
    "DEFAULT_WEIGHTS",
    "EventRecord",
    "FundingEngine",
    "GovMode",
    "Governance",
    "GovernanceConfig",
    "InvariantViolation",
    "IpMarket",
    "Ledger",
    "MatchingMode",
    "ProposalKind",
    "ProposalState",
    "QvMode",
    "SbtCategory",
    "SbtRegistry",
    "SbtStatus",
    "founder_veto_weight",
    "qv_cost",
    "__version__",
]
