// Single-page marketplace UI: Home, Table, Sell, Buy, Mine and a chain
// explorer that highlights broken blocks. All state lives on the node; this
// layer only renders view-models and posts forms.

import { ApiError, NodeClient } from "./api.js";
import { parseChainText, scanChain } from "./canonical.js";
import {
  DEFAULT_BOUNDS,
  MarketBounds,
  blockCards,
  buyProblem,
  buyView,
  minedBlockSummary,
  offerProblem,
  tableRows,
} from "./views.js";

const POLL_MS = 5000;

interface Settings {
  nodeUrl: string;
  bounds: MarketBounds;
}

function loadSettings(): Settings {
  try {
    const raw = localStorage.getItem("gridledger-settings");
    if (raw) return JSON.parse(raw) as Settings;
  } catch {
    // fall through to defaults
  }
  return { nodeUrl: "http://127.0.0.1:5000", bounds: { ...DEFAULT_BOUNDS } };
}

function saveSettings(settings: Settings): void {
  localStorage.setItem("gridledger-settings", JSON.stringify(settings));
}

let settings = loadSettings();
let client = new NodeClient(settings.nodeUrl);
let pollTimer: number | undefined;

const app = () => document.getElementById("app")!;

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function errorBox(message: string): HTMLElement {
  return el("p", { class: "error" }, message);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return err instanceof Error ? `node unreachable: ${err.message}` : String(err);
}

function header(): HTMLElement {
  const bar = el("nav");
  for (const [label, hash] of [
    ["Home", "#/home"],
    ["Table", "#/table"],
    ["Sell", "#/sell"],
    ["Buy", "#/buy"],
    ["Mine", "#/mine"],
    ["Chain Explorer", "#/chain"],
  ]) {
    bar.appendChild(el("a", { href: hash }, label));
  }
  const nodeInput = el("input", {
    value: settings.nodeUrl,
    size: "28",
    title: "node base URL",
  }) as HTMLInputElement;
  nodeInput.addEventListener("change", () => {
    settings.nodeUrl = nodeInput.value.trim();
    client = new NodeClient(settings.nodeUrl);
    saveSettings(settings);
    render();
  });
  bar.appendChild(nodeInput);
  return bar;
}

function renderHome(root: HTMLElement): void {
  root.appendChild(el("h1", {}, "Peer-to-peer energy market"));
  root.appendChild(
    el(
      "p",
      {},
      "Post energy for sale, buy from the cheapest offers, mine the pending " +
        "trades into the chain, and inspect every block.",
    ),
  );
  const list = el("ul", { class: "home-links" });
  for (const [label, hash, hint] of [
    ["Sell energy", "#/sell", "post a price-per-kWh offer"],
    ["Buy energy", "#/buy", "request kWh, matched cheapest-first"],
    ["Current listings", "#/table", "live order-book table"],
    ["Mine", "#/mine", "forge pending trades into a block"],
    ["Chain explorer", "#/chain", "verify links, spot broken blocks"],
  ]) {
    const item = el("li");
    item.appendChild(el("a", { href: hash }, label));
    item.appendChild(el("span", {}, ` — ${hint}`));
    list.appendChild(item);
  }
  root.appendChild(list);
}

async function renderTable(root: HTMLElement): Promise<void> {
  root.appendChild(el("h1", {}, "Current listings"));
  try {
    const rows = tableRows(await client.table());
    if (rows.length === 0) {
      root.appendChild(el("p", {}, "No live offers."));
      return;
    }
    const table = el("table");
    const head = el("tr");
    for (const title of ["#", "Seller", "Price / kWh", "Units (kWh)"]) {
      head.appendChild(el("th", {}, title));
    }
    table.appendChild(head);
    for (const row of rows) {
      const tr = el("tr");
      tr.appendChild(el("td", {}, String(row.index)));
      tr.appendChild(el("td", {}, row.seller));
      tr.appendChild(el("td", {}, row.ppu));
      tr.appendChild(el("td", {}, row.units));
      table.appendChild(tr);
    }
    root.appendChild(table);
  } catch (err) {
    root.appendChild(errorBox(describe(err)));
  }
}

function renderSell(root: HTMLElement): void {
  root.appendChild(el("h1", {}, "Sell energy"));
  const form = el("form") as HTMLFormElement;
  const seller = el("input", { placeholder: "seller name" }) as HTMLInputElement;
  const ppu = el("input", { placeholder: "price per kWh", type: "number", step: "0.001" }) as HTMLInputElement;
  const units = el("input", { placeholder: "units (kWh)", type: "number", step: "0.001" }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, "Post offer");
  const status = el("p");
  for (const field of [seller, ppu, units, submit]) form.appendChild(field);
  form.appendChild(status);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const offer = { seller: seller.value, ppu: Number(ppu.value), units: Number(units.value) };
    const problem = offerProblem(offer, settings.bounds);
    if (problem) {
      status.className = "error";
      status.textContent = problem;
      return;
    }
    try {
      await client.sell(offer.seller, offer.ppu, offer.units);
      location.hash = "#/table"; // show the updated pricing right away
    } catch (err) {
      status.className = "error";
      status.textContent = describe(err);
    }
  });
  root.appendChild(form);
}

function renderBuy(root: HTMLElement): void {
  root.appendChild(el("h1", {}, "Buy energy"));
  const form = el("form") as HTMLFormElement;
  const buyer = el("input", { placeholder: "buyer name" }) as HTMLInputElement;
  const units = el("input", { placeholder: "units (kWh)", type: "number", step: "0.001" }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, "Request energy");
  const status = el("p");
  const result = el("div");
  for (const field of [buyer, units, submit]) form.appendChild(field);
  form.appendChild(status);
  root.appendChild(form);
  root.appendChild(result);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    result.replaceChildren();
    const problem = buyProblem(buyer.value, Number(units.value), settings.bounds);
    if (problem) {
      status.className = "error";
      status.textContent = problem;
      return;
    }
    try {
      const view = buyView(await client.buy(buyer.value, Number(units.value)));
      status.className = "";
      status.textContent = view.message;
      const table = el("table");
      const head = el("tr");
      for (const title of ["Seller", "Units", "Price / kWh", "Cost"]) {
        head.appendChild(el("th", {}, title));
      }
      table.appendChild(head);
      for (const fill of view.fills) {
        const tr = el("tr");
        tr.appendChild(el("td", {}, fill.seller));
        tr.appendChild(el("td", {}, fill.units));
        tr.appendChild(el("td", {}, fill.ppu));
        tr.appendChild(el("td", {}, fill.cost));
        table.appendChild(tr);
      }
      result.appendChild(table);
      result.appendChild(el("p", {}, `Total cost: ${view.totalCost}`));
    } catch (err) {
      status.className = "error";
      status.textContent = describe(err);
    }
  });
}

function renderMine(root: HTMLElement): void {
  root.appendChild(el("h1", {}, "Mine"));
  const button = el("button", {}, "Mine pending transactions");
  const status = el("p");
  const detail = el("pre");
  button.addEventListener("click", async () => {
    status.textContent = "mining…";
    try {
      const block = await client.mine();
      status.className = "";
      status.textContent = minedBlockSummary(block);
      detail.textContent = JSON.stringify(block, null, 2);
    } catch (err) {
      status.className = "error";
      status.textContent = describe(err);
    }
  });
  root.appendChild(button);
  root.appendChild(status);
  root.appendChild(detail);
}

async function renderChain(root: HTMLElement): Promise<void> {
  root.appendChild(el("h1", {}, "Chain explorer"));
  try {
    const scan = await scanChain(parseChainText(await client.chainText()));
    if (scan.breakIndex !== null) {
      root.appendChild(
        errorBox(`chain breaks at block ${scan.breakIndex}; later blocks are untrustworthy`),
      );
    }
    for (const card of blockCards(scan.blocks)) {
      const box = el("div", { class: card.valid ? "block" : "block broken" });
      box.appendChild(el("h2", {}, `Block ${card.index}${card.valid ? "" : " (broken)"}`));
      box.appendChild(el("p", {}, `proof ${card.proof} · ${card.timestamp}`));
      box.appendChild(el("p", { class: "hash" }, `prev ${card.previousHash}`));
      const list = el("ul");
      for (const tx of card.transactions) {
        const label =
          tx.sender === "0"
            ? `mining reward → ${tx.recipient}: ${tx.amountKwh} kWh`
            : `${tx.sender} → ${tx.recipient}: ${tx.amountKwh} kWh`;
        list.appendChild(el("li", {}, label));
      }
      box.appendChild(list);
      root.appendChild(box);
    }
  } catch (err) {
    root.appendChild(errorBox(describe(err)));
  }
}

async function render(): Promise<void> {
  if (pollTimer !== undefined) clearTimeout(pollTimer);
  const route = location.hash || "#/home";
  const root = app();
  root.replaceChildren(header());
  const page = el("main");
  root.appendChild(page);
  if (route === "#/table") {
    await renderTable(page);
  } else if (route === "#/sell") {
    renderSell(page);
  } else if (route === "#/buy") {
    renderBuy(page);
  } else if (route === "#/mine") {
    renderMine(page);
  } else if (route === "#/chain") {
    await renderChain(page);
  } else {
    renderHome(page);
  }
  if (route === "#/table" || route === "#/chain") {
    pollTimer = window.setTimeout(render, POLL_MS);
  }
}

window.addEventListener("hashchange", render);
window.addEventListener("load", render);
