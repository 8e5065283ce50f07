"""IP assets, licensing, fractional ownership on a bonding curve, and
automatic royalty distribution.

Research outputs mint as IP-NFTs carrying a royalty split in basis points
that must sum to exactly 10000. An open-access flag is a one-way ratchet:
once public, always public, although exclusive commercial licensing can
coexist with the standing non-commercial grant.

Fractional units (IPTs) trade against a linear curve p(s) = p0 + m*s with
integer settlement: buys round the price integral up, sells round it down,
so the reserve can never go insolvent. Quick flips pay a time-decay penalty
phi0 * max(0, 1 - h/H) on gross proceeds, aged per FIFO acquisition lot and
forwarded to the commons treasury.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING

from .canonical import largest_remainder, parse_ratio, ratio_str
from .errors import (
    AlreadyFractionalized,
    BadConfig,
    BadSplit,
    ExclusiveConflict,
    InsufficientUnits,
    OpenAccessPermanent,
    SupplyCapExceeded,
    UnknownAsset,
    UnknownPool,
    ZeroAmount,
    ZeroRevenue,
)

if TYPE_CHECKING:
    from .commons import Commons


@dataclass
class License:
    licensee: str
    price: int
    exclusive: bool
    granted_epoch: int


@dataclass
class IpAsset:
    id: str
    owner: str
    content_commitment: str
    open_access: bool
    royalty_split: list  # [recipient, basis points] pairs, bps sum to 10000
    licenses: list = field(default_factory=list)
    pool: str | None = None


@dataclass
class IptPool:
    id: str
    asset: str
    supply_cap: int
    p0: Fraction
    slope: Fraction
    phi0: Fraction
    horizon: int
    escrow_soul: str
    supply: int = 0
    reserve: int = 0
    trade_count: int = 0
    # holder -> ordered [units, acquired_epoch] lots; list order is FIFO
    holdings: dict = field(default_factory=dict)

    def price_integral(self, s0: int, s1: int) -> Fraction:
        """Exact integral of p0 + m*s over [s0, s1]."""
        return self.p0 * (s1 - s0) + self.slope * Fraction(s1 * s1 - s0 * s0, 2)


@dataclass(frozen=True)
class RoyaltyReceipt:
    asset: str
    revenue: int
    protocol_fee: int
    payouts: dict


class IpMarket:
    """Asset registry, license grants, curve trading, royalty flows."""

    def __init__(self, core: "Commons", fee_bp: int = 50):
        if not 0 <= fee_bp <= 10000:
            raise BadConfig("protocol fee must lie in [0, 10000] basis points")
        self.core = core
        self.fee_bp = fee_bp
        self.fee_recipient: str | None = None
        self.assets: dict[str, IpAsset] = {}
        self.pools: dict[str, IptPool] = {}

    # --- registry ------------------------------------------------------------------

    def set_fee_recipient(self, soul: str) -> None:
        """Route protocol fees and sell penalties to a treasury soul."""
        self.core.ledger._require(soul)
        self.fee_recipient = soul
        self.core.ledger.append_event("SetFeeRecipient", {"soul": soul})

    def mint_ipnft(
        self, owner: str, content_commitment: str, open_access: bool, royalty_split: list
    ) -> str:
        ledger = self.core.ledger
        ledger._require(owner)
        if not royalty_split:
            raise BadSplit("royalty split cannot be empty")
        split = []
        seen = set()
        for entry in royalty_split:
            try:
                recipient, bps = entry
            except (TypeError, ValueError):
                raise BadSplit(f"malformed royalty entry: {entry!r}") from None
            ledger._require(recipient)
            if not isinstance(bps, int) or isinstance(bps, bool) or bps <= 0:
                raise BadSplit(f"share for {recipient} must be a positive integer of basis points")
            if recipient in seen:
                raise BadSplit(f"duplicate royalty recipient {recipient}")
            seen.add(recipient)
            split.append([recipient, bps])
        if sum(b for _, b in split) != 10000:
            raise BadSplit("royalty shares must sum to exactly 10000 basis points")
        asset = IpAsset(
            id=ledger.next_id("ip"),
            owner=owner,
            content_commitment=str(content_commitment),
            open_access=bool(open_access),
            royalty_split=split,
        )
        self.assets[asset.id] = asset
        ledger.append_event(
            "MintIpNft",
            {
                "asset": asset.id,
                "owner": owner,
                "content_commitment": asset.content_commitment,
                "open_access": asset.open_access,
                "royalty_split": split,
            },
        )
        return asset.id

    def _require_asset(self, asset_id: str) -> IpAsset:
        asset = self.assets.get(asset_id)
        if asset is None:
            raise UnknownAsset(f"no such asset: {asset_id}")
        return asset

    def set_open_access(self, asset_id: str, value: bool) -> None:
        """Raise the open-access flag; lowering it is impossible by design."""
        asset = self._require_asset(asset_id)
        if asset.open_access and not value:
            raise OpenAccessPermanent(f"{asset_id} is permanently open access")
        asset.open_access = bool(value)
        self.core.ledger.append_event("SetOpenAccess", {"asset": asset_id, "value": bool(value)})

    # --- licensing -------------------------------------------------------------------

    def grant_commercial_license(
        self, asset_id: str, licensee: str, price: int, exclusive: bool
    ) -> RoyaltyReceipt | None:
        asset = self._require_asset(asset_id)
        self.core.ledger._require(licensee)
        if price < 0:
            raise ZeroAmount("license price cannot be negative")
        if exclusive and asset.licenses:
            raise ExclusiveConflict(f"{asset_id} already carries licenses; exclusivity impossible")
        if any(lic.exclusive for lic in asset.licenses):
            raise ExclusiveConflict(f"{asset_id} is exclusively licensed")
        receipt = None
        if price:
            receipt = self._distribute(asset, price, payer=licensee)
        asset.licenses.append(
            License(licensee=licensee, price=price, exclusive=bool(exclusive),
                    granted_epoch=self.core.ledger.epoch)
        )
        self.core.ledger.append_event(
            "GrantLicense",
            {
                "asset": asset_id,
                "licensee": licensee,
                "price": price,
                "exclusive": bool(exclusive),
                "protocol_fee": receipt.protocol_fee if receipt else 0,
            },
        )
        return receipt

    # --- fractional units on the curve ---------------------------------------------------

    def fractionalize(
        self,
        asset_id: str,
        supply_cap: int,
        p0,
        slope,
        phi0,
        horizon: int,
    ) -> str:
        asset = self._require_asset(asset_id)
        if asset.pool is not None:
            raise AlreadyFractionalized(f"{asset_id} already has a unit pool")
        if supply_cap <= 0:
            raise ZeroAmount("supply cap must be positive")
        p0, slope, phi0 = parse_ratio(p0), parse_ratio(slope), parse_ratio(phi0)
        if p0 < 0 or slope < 0:
            raise BadConfig("curve parameters cannot be negative")
        if not 0 <= phi0 <= 1:
            raise BadConfig("phi0 must lie in [0, 1]")
        if horizon < 1:
            raise BadConfig("penalty horizon must be at least one epoch")
        ledger = self.core.ledger
        escrow = ledger._new_soul()
        pool = IptPool(
            id=ledger.next_id("pool"),
            asset=asset_id,
            supply_cap=supply_cap,
            p0=p0,
            slope=slope,
            phi0=phi0,
            horizon=horizon,
            escrow_soul=escrow.id,
        )
        self.pools[pool.id] = pool
        asset.pool = pool.id
        ledger.append_event(
            "Fractionalize",
            {
                "asset": asset_id,
                "pool": pool.id,
                "supply_cap": supply_cap,
                "p0": ratio_str(p0),
                "slope": ratio_str(slope),
                "phi0": ratio_str(phi0),
                "horizon": horizon,
                "escrow_soul": escrow.id,
            },
        )
        return pool.id

    def _require_pool(self, pool_id: str) -> IptPool:
        pool = self.pools.get(pool_id)
        if pool is None:
            raise UnknownPool(f"no such pool: {pool_id}")
        return pool

    def curve_buy(self, pool_id: str, buyer: str, units: int) -> int:
        """Buy units up the curve; cost is the price integral rounded up."""
        pool = self._require_pool(pool_id)
        ledger = self.core.ledger
        ledger._require(buyer)
        if units <= 0:
            raise ZeroAmount("must buy at least one unit")
        if pool.supply + units > pool.supply_cap:
            raise SupplyCapExceeded(
                f"{pool_id} supply {pool.supply}+{units} would exceed cap {pool.supply_cap}"
            )
        cost = math.ceil(pool.price_integral(pool.supply, pool.supply + units))
        ledger._debit_free(buyer, cost)
        ledger._credit(pool.escrow_soul, cost)
        pool.reserve += cost
        pool.supply += units
        pool.holdings.setdefault(buyer, []).append([units, ledger.epoch])
        pool.trade_count += 1
        ledger.append_event(
            "CurveBuy", {"pool": pool_id, "buyer": buyer, "units": units, "cost": cost}
        )
        return cost

    def curve_sell(self, pool_id: str, seller: str, units: int, at_epoch: int | None = None) -> int:
        """Sell units down the curve; gross rounds down, and young lots pay
        the anti-speculation penalty into the commons treasury."""
        pool = self._require_pool(pool_id)
        ledger = self.core.ledger
        ledger._require(seller)
        now = ledger.epoch if at_epoch is None else at_epoch
        if units <= 0:
            raise ZeroAmount("must sell at least one unit")
        lots = pool.holdings.get(seller, [])
        held = sum(u for u, _ in lots)
        if held < units:
            raise InsufficientUnits(f"{seller} holds {held} units of {pool_id}, cannot sell {units}")
        gross = math.floor(pool.price_integral(pool.supply - units, pool.supply))

        # FIFO aging: oldest lots leave first; penalty decays linearly to the horizon
        weighted_decay = Fraction(0)
        remaining = units
        new_lots = []
        for lot_units, acquired in lots:
            if remaining <= 0:
                new_lots.append([lot_units, acquired])
                continue
            take = min(lot_units, remaining)
            age = max(0, now - acquired)
            decay = max(Fraction(0), 1 - Fraction(age, pool.horizon))
            weighted_decay += take * decay
            remaining -= take
            if lot_units > take:
                new_lots.append([lot_units - take, acquired])
        penalty = math.ceil(Fraction(gross) * pool.phi0 * weighted_decay / units)
        net = gross - penalty

        if new_lots:
            pool.holdings[seller] = new_lots
        else:
            pool.holdings.pop(seller, None)
        pool.supply -= units
        pool.reserve -= gross
        pool.trade_count += 1
        ledger._debit_free(pool.escrow_soul, gross)
        if net:
            ledger._credit(seller, net)
        if penalty:
            if self.fee_recipient is not None:
                ledger._credit(self.fee_recipient, penalty)
            else:
                ledger.burned += penalty
        ledger.append_event(
            "CurveSell",
            {
                "pool": pool_id,
                "seller": seller,
                "units": units,
                "gross": gross,
                "penalty": penalty,
                "net": net,
                "at_epoch": now,
            },
        )
        return net

    def holdings_of(self, pool_id: str, soul: str) -> int:
        pool = self._require_pool(pool_id)
        return sum(u for u, _ in pool.holdings.get(soul, []))

    # --- royalties ----------------------------------------------------------------------

    def distribute_royalties(self, asset_id: str, revenue: int, payer: str) -> RoyaltyReceipt:
        """Split revenue by the asset's royalty table after the protocol fee."""
        asset = self._require_asset(asset_id)
        self.core.ledger._require(payer)
        receipt = self._distribute(asset, revenue, payer)
        self.core.ledger.append_event(
            "DistributeRoyalties",
            {
                "asset": asset_id,
                "revenue": revenue,
                "payer": payer,
                "protocol_fee": receipt.protocol_fee,
                "payouts": receipt.payouts,
            },
        )
        return receipt

    def _distribute(self, asset: IpAsset, revenue: int, payer: str) -> RoyaltyReceipt:
        ledger = self.core.ledger
        if revenue <= 0:
            raise ZeroRevenue("royalty revenue must be positive")
        ledger._debit_free(payer, revenue)
        fee = revenue * self.fee_bp // 10000
        recipients = [r for r, _ in asset.royalty_split]
        weights = [b for _, b in asset.royalty_split]
        payouts = largest_remainder(revenue - fee, weights, recipients)
        for recipient, amount in payouts.items():
            if amount:
                ledger._credit(recipient, amount)
        if fee:
            if self.fee_recipient is not None:
                ledger._credit(self.fee_recipient, fee)
            else:
                ledger.burned += fee
        return RoyaltyReceipt(asset=asset.id, revenue=revenue, protocol_fee=fee, payouts=payouts)

    # --- serialization ---------------------------------------------------------------------

    def to_state_dict(self) -> dict:
        return {
            "fee_bp": self.fee_bp,
            "fee_recipient": self.fee_recipient,
            "assets": {
                aid: {
                    "owner": a.owner,
                    "content_commitment": a.content_commitment,
                    "open_access": a.open_access,
                    "royalty_split": a.royalty_split,
                    "licenses": [
                        {
                            "licensee": lic.licensee,
                            "price": lic.price,
                            "exclusive": lic.exclusive,
                            "granted_epoch": lic.granted_epoch,
                        }
                        for lic in a.licenses
                    ],
                    "pool": a.pool,
                }
                for aid, a in self.assets.items()
            },
            "pools": {
                pid: {
                    "asset": p.asset,
                    "supply_cap": p.supply_cap,
                    "p0": ratio_str(p.p0),
                    "slope": ratio_str(p.slope),
                    "phi0": ratio_str(p.phi0),
                    "horizon": p.horizon,
                    "escrow_soul": p.escrow_soul,
                    "supply": p.supply,
                    "reserve": p.reserve,
                    "trade_count": p.trade_count,
                    "holdings": {
                        holder: [[u, e] for u, e in lots]
                        for holder, lots in sorted(p.holdings.items())
                    },
                }
                for pid, p in self.pools.items()
            },
        }
