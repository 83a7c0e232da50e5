// Spawns a real backend node subprocess so the UI modules are tested against
// the live HTTP contract rather than mocks.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");

export interface LiveNode {
  baseUrl: string;
  stop(): Promise<void>;
}

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    server.once("error", reject);
    server.listen(0, "127.0.0.1", () => {
      const { port } = server.address() as net.AddressInfo;
      server.close(() => resolve(port));
    });
  });
}

async function waitReady(baseUrl: string, proc: ChildProcess): Promise<void> {
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) throw new Error(`node exited early (${proc.exitCode})`);
    try {
      const response = await fetch(`${baseUrl}/chain`);
      if (response.ok) return;
    } catch {
      await new Promise((r) => setTimeout(r, 50));
    }
  }
  throw new Error(`node at ${baseUrl} did not become ready`);
}

export async function spawnNode(difficulty = 1): Promise<LiveNode> {
  const port = await freePort();
  const workdir = mkdtempSync(path.join(os.tmpdir(), "gridledger-ui-test-"));
  const proc = spawn(
    "python3",
    [
      "-m",
      "gridledger",
      "node",
      "--port",
      String(port),
      "--difficulty",
      String(difficulty),
      "--test-hooks",
      "--book-path",
      path.join(workdir, "energydemand.csv"),
    ],
    {
      env: {
        ...process.env,
        PYTHONPATH: [path.join(REPO_ROOT, "src"), process.env.PYTHONPATH ?? ""].join(":"),
      },
      stdio: "ignore",
    },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  await waitReady(baseUrl, proc);
  return {
    baseUrl,
    stop: () =>
      new Promise((resolve) => {
        proc.once("exit", () => resolve());
        proc.kill("SIGTERM");
        setTimeout(() => proc.kill("SIGKILL"), 5000).unref();
      }),
  };
}

export async function mutateBlock(
  baseUrl: string,
  blockIndex: number,
  txIndex: number,
  newAmount: number,
): Promise<void> {
  const response = await fetch(`${baseUrl}/testing/mutate`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ block_index: blockIndex, tx_index: txIndex, new_amount: newAmount }),
  });
  if (!response.ok) throw new Error(`mutate failed: ${await response.text()}`);
}
