// View-model builders and the client-side offer validation that mirrors the
// node's price/units domain. Pure functions; the DOM layer just renders them.

import type { BuyResult, Fill, TableOffer, WireBlock } from "./api.js";
import type { AnnotatedBlock } from "./canonical.js";

export interface MarketBounds {
  /** exclusive price-per-kWh cap set for the region */
  ppuCap: number;
  /** kWh cap per offer or request */
  maxDemand: number;
}

export const DEFAULT_BOUNDS: MarketBounds = { ppuCap: 10, maxDemand: 1000 };

export interface OfferInput {
  seller: string;
  ppu: number;
  units: number;
}

/** First bound violation, or null when the offer is inside the domain. */
export function offerProblem(offer: OfferInput, bounds: MarketBounds): string | null {
  if (!offer.seller.trim()) return "seller is required";
  if (!Number.isFinite(offer.ppu) || offer.ppu < 0) return "ppu must be at least 0";
  if (offer.ppu >= bounds.ppuCap) return `ppu must stay below the cap of ${bounds.ppuCap}`;
  if (!Number.isFinite(offer.units) || offer.units <= 0) return "units must be positive";
  if (offer.units > bounds.maxDemand) return `units must not exceed ${bounds.maxDemand}`;
  return null;
}

export function buyProblem(buyer: string, units: number, bounds: MarketBounds): string | null {
  if (!buyer.trim()) return "buyer is required";
  if (!Number.isFinite(units) || units <= 0) return "units must be positive";
  if (units > bounds.maxDemand) return `units must not exceed ${bounds.maxDemand}`;
  return null;
}

export interface TableRow {
  index: number;
  seller: string;
  ppu: string;
  units: string;
}

export function tableRows(offers: TableOffer[]): TableRow[] {
  return offers.map((offer) => ({
    index: offer.index,
    seller: offer.seller,
    ppu: offer.ppu.toString(),
    units: offer.units.toString(),
  }));
}

export interface FillRow {
  seller: string;
  units: string;
  ppu: string;
  cost: string;
}

export interface BuyView {
  fills: FillRow[];
  totalCost: string;
  message: string;
}

export function buyView(result: BuyResult): BuyView {
  return {
    fills: result.fills.map((fill: Fill) => ({
      seller: fill.seller,
      units: fill.units.toString(),
      ppu: fill.ppu.toString(),
      cost: fill.cost.toString(),
    })),
    totalCost: result.total_cost.toString(),
    message: result.message,
  };
}

export interface BlockCard {
  index: number;
  valid: boolean;
  proof: number;
  previousHash: string;
  timestamp: string;
  transactions: { sender: string; recipient: string; amountKwh: string }[];
}

export function blockCards(scan: AnnotatedBlock[]): BlockCard[] {
  return scan.map(({ block, valid }) => ({
    index: block.index,
    valid,
    proof: block.proof,
    previousHash: block.previousHash,
    timestamp: block.timestampRaw,
    transactions: block.transactions.map((tx) => ({
      sender: tx.sender,
      recipient: tx.recipient,
      amountKwh: (tx.amountMilli / 1000).toString(),
    })),
  }));
}

export function minedBlockSummary(block: WireBlock): string {
  const trades = block.transactions.filter((tx) => tx.sender !== "0").length;
  return `Block ${block.index} forged with proof ${block.proof} (${trades} trade(s) + mining reward)`;
}
