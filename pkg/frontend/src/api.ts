// Typed fetch client for a gridledger node. The UI performs no business
// logic of its own; every state change round-trips through these endpoints.

export interface WireTransaction {
  amount: number;
  recipient: string;
  sender: string;
}

export interface WireBlock {
  index: number;
  previous_hash: string;
  proof: number;
  timestamp: number;
  transactions: WireTransaction[];
}

export interface ChainPayload {
  chain: WireBlock[];
  length: number;
}

export interface TableOffer {
  index: number;
  seller: string;
  ppu: number;
  units: number;
}

export interface Fill {
  seller: string;
  buyer: string;
  units: number;
  ppu: number;
  cost: number;
}

export interface BuyResult {
  message: string;
  fills: Fill[];
  total_cost: number;
}

export interface MineResult extends WireBlock {
  message: string;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let reason = `${response.status} ${response.statusText}`;
    try {
      const body = await response.json();
      if (body && typeof body.error === "string") reason = body.error;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(reason, response.status);
  }
  return (await response.json()) as T;
}

export class NodeClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  /** Raw /chain body; the explorer needs the exact text, not parsed floats. */
  async chainText(): Promise<string> {
    const response = await fetch(this.url("/chain"));
    if (!response.ok) throw new ApiError(`${response.status} ${response.statusText}`, response.status);
    return await response.text();
  }

  async chain(): Promise<ChainPayload> {
    return unwrap(await fetch(this.url("/chain")));
  }

  async table(): Promise<TableOffer[]> {
    const body = await unwrap<{ offers: TableOffer[] }>(await fetch(this.url("/market/table")));
    return body.offers;
  }

  async sell(seller: string, ppu: number, units: number): Promise<void> {
    await unwrap(
      await fetch(this.url("/market/sell"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ seller, ppu, units }),
      }),
    );
  }

  async buy(buyer: string, units: number): Promise<BuyResult> {
    return unwrap(
      await fetch(this.url("/market/buy"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ buyer, units }),
      }),
    );
  }

  async mine(): Promise<MineResult> {
    return unwrap(await fetch(this.url("/mine")));
  }

  async newTransaction(sender: string, recipient: string, amount: number): Promise<string> {
    const body = await unwrap<{ message: string }>(
      await fetch(this.url("/transactions/new"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ sender, recipient, amount }),
      }),
    );
    return body.message;
  }

  async resolve(): Promise<{ message: string }> {
    return unwrap(await fetch(this.url("/nodes/resolve")));
  }
}
