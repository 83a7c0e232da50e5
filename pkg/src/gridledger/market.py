"""Order book of sell offers with greedy cheapest-first matching.

Prices are integer milli currency units per kWh and energy is integer
milli-kWh, so matching and cost arithmetic are exact. The live book is
mirrored to a CSV file on every mutation.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .chain import Transaction
from .wire import format_milli, kwh_to_milli

__all__ = [
    "MarketError",
    "OfferValidationError",
    "InsufficientSupplyError",
    "MarketConfig",
    "SellOffer",
    "BuyRequest",
    "TradeFill",
    "OrderBook",
    "fills_to_transactions",
]

CSV_HEADER = ["seller", "ppu", "units"]


class MarketError(Exception):
    """Base error for market operations."""


class OfferValidationError(MarketError):
    """An offer or request falls outside the allowed price/units domain."""

    def __init__(self, reason: str, bound: str):
        super().__init__(reason)
        self.bound = bound  # which domain bound failed, e.g. "ppu" or "units"


class InsufficientSupplyError(MarketError):
    """A buy request asks for more energy than the market has to offer."""


@dataclass(frozen=True)
class MarketConfig:
    """Regional market domain: price cap (exclusive) and per-offer demand cap."""

    ppu_cap_milli: int
    max_demand_milli: int

    def __post_init__(self):
        if self.ppu_cap_milli <= 0 or self.max_demand_milli <= 0:
            raise MarketError("ppu cap and max demand must be positive")


@dataclass
class SellOffer:
    seller: str
    ppu_milli: int
    units_milli: int
    posted_at: int = 0


@dataclass(frozen=True)
class BuyRequest:
    buyer: str
    units_milli: int


@dataclass(frozen=True)
class TradeFill:
    """One matched slice of a buy request against a single offer."""

    seller: str
    buyer: str
    units_milli: int
    ppu_milli: int

    @property
    def cost_micro(self) -> int:
        # milli-kWh times milli-currency/kWh is exact in micro currency units
        return self.units_milli * self.ppu_milli


def validate_offer(offer: SellOffer, config: MarketConfig) -> None:
    """Enforce the market domain: 0 <= ppu < cap and 0 < units <= max demand."""
    if not offer.seller:
        raise OfferValidationError("seller must be non-empty", bound="seller")
    if offer.ppu_milli < 0:
        raise OfferValidationError("ppu must not be negative", bound="ppu")
    if offer.ppu_milli >= config.ppu_cap_milli:
        raise OfferValidationError(
            f"ppu must stay below the regional cap of {format_milli(config.ppu_cap_milli)}",
            bound="ppu",
        )
    if offer.units_milli <= 0:
        raise OfferValidationError("units must be positive", bound="units")
    if offer.units_milli > config.max_demand_milli:
        raise OfferValidationError(
            f"units must not exceed the maximum demand of {format_milli(config.max_demand_milli)}",
            bound="units",
        )


def validate_buy(request: BuyRequest, config: MarketConfig) -> None:
    if not request.buyer:
        raise OfferValidationError("buyer must be non-empty", bound="buyer")
    if request.units_milli <= 0:
        raise OfferValidationError("units must be positive", bound="units")
    if request.units_milli > config.max_demand_milli:
        raise OfferValidationError(
            f"units must not exceed the maximum demand of {format_milli(config.max_demand_milli)}",
            bound="units",
        )


@dataclass
class OrderBook:
    """Live sell offers in posting order, persisted to the CSV store.

    One mutation at a time; a failed buy leaves the book and the CSV file
    untouched.
    """

    config: MarketConfig
    csv_path: Path | None = None
    offers: list[SellOffer] = field(default_factory=list)
    _next_seq: int = 1

    @classmethod
    def open(cls, config: MarketConfig, csv_path: str | Path) -> "OrderBook":
        """Create a book backed by the CSV store, loading rows if the file exists."""
        book = cls(config=config, csv_path=Path(csv_path))
        if book.csv_path.exists():
            book._load_csv()
        else:
            book._persist()
        return book

    def total_units_milli(self) -> int:
        return sum(o.units_milli for o in self.offers)

    def post_offer(self, seller: str, ppu_milli: int, units_milli: int) -> SellOffer:
        offer = SellOffer(seller=seller, ppu_milli=ppu_milli, units_milli=units_milli)
        validate_offer(offer, self.config)
        offer.posted_at = self._next_seq
        self._next_seq += 1
        self.offers.append(offer)
        self._persist()
        return offer

    def match_buy(self, request: BuyRequest) -> list[TradeFill]:
        """Greedy cheapest-price matching with a partial final fill.

        Offers from the buyer themselves are never matched. Fully consumed
        offers leave the book; a partially consumed offer keeps its place
        with reduced units.
        """
        validate_buy(request, self.config)
        candidates = [o for o in self.offers if o.seller != request.buyer]
        if request.units_milli > sum(o.units_milli for o in candidates):
            raise InsufficientSupplyError("insufficient market supply for the requested units")

        remaining = request.units_milli
        fills: list[TradeFill] = []
        consumed: set[int] = set()
        partial: tuple[SellOffer, int] | None = None
        while remaining > 0:
            best = min(
                (o for o in candidates if o.posted_at not in consumed),
                key=lambda o: (o.ppu_milli, o.posted_at),
            )
            take = best.units_milli if remaining >= best.units_milli else remaining
            fills.append(
                TradeFill(
                    seller=best.seller,
                    buyer=request.buyer,
                    units_milli=take,
                    ppu_milli=best.ppu_milli,
                )
            )
            if take == best.units_milli:
                consumed.add(best.posted_at)
            else:
                partial = (best, best.units_milli - take)
            remaining -= take

        # commit: nothing above mutated the book, so a raise leaves it intact
        if partial is not None:
            partial[0].units_milli = partial[1]
        self.offers = [o for o in self.offers if o.posted_at not in consumed]
        self._persist()
        return fills

    def table_rows(self) -> list[dict]:
        """Display rows with contiguous 1-based indexes in posting order."""
        return [
            {
                "index": i,
                "seller": o.seller,
                "ppu": o.ppu_milli,
                "units": o.units_milli,
            }
            for i, o in enumerate(self.offers, start=1)
        ]

    def _persist(self) -> None:
        if self.csv_path is None:
            return
        # write-then-rename keeps readers from ever seeing a half-written store
        fd, tmp = tempfile.mkstemp(dir=str(self.csv_path.parent), prefix=".book-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_HEADER)
                for offer in self.offers:
                    writer.writerow(
                        [offer.seller, format_milli(offer.ppu_milli), format_milli(offer.units_milli)]
                    )
            os.replace(tmp, self.csv_path)
        except BaseException:
            os.unlink(tmp)
            raise

    def _load_csv(self) -> None:
        with open(self.csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != CSV_HEADER:
            raise MarketError(f"{self.csv_path}: not a recognizable order-book store")
        self.offers = []
        for row in rows[1:]:
            if len(row) != 3:
                raise MarketError(f"{self.csv_path}: malformed row {row!r}")
            seller, ppu, units = row
            offer = SellOffer(
                seller=seller,
                ppu_milli=kwh_to_milli(ppu, "ppu"),
                units_milli=kwh_to_milli(units, "units"),
                posted_at=self._next_seq,
            )
            validate_offer(offer, self.config)
            self._next_seq += 1
            self.offers.append(offer)


def fills_to_transactions(fills: list[TradeFill]) -> list[Transaction]:
    """One chain transaction per fill: buyer pays, seller delivers the kWh."""
    return [
        Transaction(sender=f.buyer, recipient=f.seller, amount_milli=f.units_milli)
        for f in fills
    ]
