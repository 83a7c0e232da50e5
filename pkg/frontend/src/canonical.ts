// Client-side canonical block serialization and link verification for the
// chain explorer. Hash inputs must match the node's byte-for-byte: sorted
// keys, no whitespace, integer milli-kWh amounts, and the timestamp as a
// decimal string with exactly six fraction digits.

export interface CanonicalTransaction {
  amountMilli: number;
  recipient: string;
  sender: string;
}

export interface CanonicalBlock {
  index: number;
  previousHash: string;
  proof: number;
  /** seconds.micros with exactly 6 fraction digits, taken verbatim from the wire */
  timestampRaw: string;
  transactions: CanonicalTransaction[];
}

export interface AnnotatedBlock {
  block: CanonicalBlock;
  valid: boolean;
}

export interface ChainScan {
  blocks: AnnotatedBlock[];
  /** stored index of the first block whose link check fails, null when intact */
  breakIndex: number | null;
}

export const GENESIS_HASH =
  "064810d63530c1a1e47b3427a1fb6af78d9c04555fda524089f0b50b852d1dc5";

const TIMESTAMP_TOKEN = /"timestamp":(\d+\.\d{6})/g;
const AMOUNT_TOKEN = /"amount":(-?\d+(?:\.\d+)?)/g;

function tokens(raw: string, pattern: RegExp): string[] {
  return Array.from(raw.matchAll(pattern), (m) => m[1]);
}

function amountToMilli(token: string): number {
  const [whole, frac = ""] = token.split(".");
  if (frac.length > 3) throw new Error(`amount ${token} is finer than milli precision`);
  const sign = whole.startsWith("-") ? -1 : 1;
  return sign * (Math.abs(parseInt(whole, 10)) * 1000 + parseInt(frac.padEnd(3, "0") || "0", 10));
}

/**
 * Parse a raw /chain body, keeping exact decimal renderings.
 *
 * JSON.parse would lose sub-float-precision timestamps, so the exact tokens
 * are lifted from the text: the node's serializer never lets an unescaped
 * `"timestamp":`/`"amount":` sequence appear inside a string value, so the
 * token streams line up one-to-one with the parsed structure.
 */
export function parseChainText(raw: string): CanonicalBlock[] {
  const payload = JSON.parse(raw) as { chain?: unknown };
  if (!payload || !Array.isArray(payload.chain)) {
    throw new Error("payload has no chain");
  }
  const stamps = tokens(raw, TIMESTAMP_TOKEN);
  const amounts = tokens(raw, AMOUNT_TOKEN);
  const blocks: CanonicalBlock[] = [];
  let amountCursor = 0;
  payload.chain.forEach((entry, position) => {
    const obj = entry as Record<string, unknown>;
    const txs = (obj.transactions as Array<Record<string, unknown>>) ?? [];
    blocks.push({
      index: obj.index as number,
      previousHash: obj.previous_hash as string,
      proof: obj.proof as number,
      timestampRaw: stamps[position],
      transactions: txs.map((tx, k) => ({
        amountMilli: amountToMilli(amounts[amountCursor + k]),
        recipient: tx.recipient as string,
        sender: tx.sender as string,
      })),
    });
    amountCursor += txs.length;
  });
  if (stamps.length !== blocks.length || amountCursor !== amounts.length) {
    throw new Error("wire payload does not line up with its number tokens");
  }
  return blocks;
}

export function canonicalBytes(block: CanonicalBlock): Uint8Array {
  const txs = block.transactions
    .map(
      (tx) =>
        `{"amount":${tx.amountMilli},"recipient":${JSON.stringify(tx.recipient)},` +
        `"sender":${JSON.stringify(tx.sender)}}`,
    )
    .join(",");
  const text =
    `{"index":${block.index},"previous_hash":${JSON.stringify(block.previousHash)},` +
    `"proof":${block.proof},"timestamp":"${block.timestampRaw}","transactions":[${txs}]}`;
  return new TextEncoder().encode(text);
}

export async function sha256Hex(data: Uint8Array): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", data as BufferSource);
  return Array.from(new Uint8Array(digest), (b) => b.toString(16).padStart(2, "0")).join("");
}

export async function hashBlock(block: CanonicalBlock): Promise<string> {
  return sha256Hex(canonicalBytes(block));
}

/**
 * Recompute link hashes and annotate every block; all blocks at and after
 * the first broken link render as broken. Proof-of-work is not re-checked
 * client-side, only the genesis pin, index continuity and hash links.
 */
export async function scanChain(blocks: CanonicalBlock[]): Promise<ChainScan> {
  let breakPosition: number | null = null;
  if (blocks.length === 0 || (await hashBlock(blocks[0])) !== GENESIS_HASH) {
    breakPosition = 0;
  } else {
    for (let k = 1; k < blocks.length; k++) {
      const linked =
        blocks[k].index === blocks[k - 1].index + 1 &&
        blocks[k].previousHash === (await hashBlock(blocks[k - 1]));
      if (!linked) {
        breakPosition = k;
        break;
      }
    }
  }
  return {
    blocks: blocks.map((block, position) => ({
      block,
      valid: breakPosition === null || position < breakPosition,
    })),
    breakIndex: breakPosition === null ? null : blocks[breakPosition]?.index ?? 1,
  };
}
