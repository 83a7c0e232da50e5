import { describe, expect, it } from "vitest";

import { buyProblem, offerProblem, type MarketBounds } from "../src/views.js";

const bounds: MarketBounds = { ppuCap: 10, maxDemand: 100 };

describe("client-side offer validation", () => {
  it("rejects ppu at the cap (strict upper bound)", () => {
    expect(offerProblem({ seller: "a", ppu: 10, units: 5 }, bounds)).toMatch(/cap/);
  });

  it("rejects zero units (strict lower bound)", () => {
    expect(offerProblem({ seller: "a", ppu: 1, units: 0 }, bounds)).toMatch(/positive/);
  });

  it("rejects negative ppu and oversized units", () => {
    expect(offerProblem({ seller: "a", ppu: -0.5, units: 5 }, bounds)).not.toBeNull();
    expect(offerProblem({ seller: "a", ppu: 1, units: 101 }, bounds)).not.toBeNull();
  });

  it("accepts the boundary interior", () => {
    expect(offerProblem({ seller: "a", ppu: 0, units: 0.001 }, bounds)).toBeNull();
    expect(offerProblem({ seller: "a", ppu: 9.999, units: 100 }, bounds)).toBeNull();
  });

  it("requires a seller name", () => {
    expect(offerProblem({ seller: "  ", ppu: 1, units: 5 }, bounds)).toMatch(/seller/);
  });
});

describe("client-side buy validation", () => {
  it("mirrors the units bounds", () => {
    expect(buyProblem("b", 0, bounds)).not.toBeNull();
    expect(buyProblem("b", 101, bounds)).not.toBeNull();
    expect(buyProblem("b", 5, bounds)).toBeNull();
  });

  it("requires a buyer name", () => {
    expect(buyProblem("", 5, bounds)).not.toBeNull();
  });
});
