/**
 * Scripted end-to-end session against a live `spixel serve` process:
 * boot a 64x64 session, click the small object, and verify the
 * doubling loop, single-flight request discipline, the uncertainty
 * toast, and a frozen overlay snapshot.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SegmentationClient, type SessionInfo } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { renderOverlay, type Rgba } from "../src/overlay.js";
import { checkGolden } from "./golden.js";

const GOLDEN_DIR = join(dirname(fileURLToPath(import.meta.url)), "golden");

const W = 64;
const H = 64;
const UNCERTAIN_ROWS = 4;
const SQUARE = { x0: 24, y0: 24, x1: 35, y1: 35 };
const K = 250;

function insideSquare(x: number, y: number): boolean {
  return (
    x >= SQUARE.x0 && x <= SQUARE.x1 && y >= SQUARE.y0 && y <= SQUARE.y1
  );
}

/** Smooth background with one strongly colored square object. */
function sessionImageBytes(): Buffer {
  const header = Buffer.from(`P6\n${W} ${H}\n255\n`, "ascii");
  const body = Buffer.alloc(W * H * 3);
  for (let y = 0; y < H; y++) {
    for (let x = 0; x < W; x++) {
      const at = (y * W + x) * 3;
      if (insideSquare(x, y)) {
        body[at] = 220;
        body[at + 1] = 60;
        body[at + 2] = 60;
      } else {
        body[at] = 40 + x;
        body[at + 1] = 40 + y;
        body[at + 2] = 80;
      }
    }
  }
  return Buffer.concat([header, body]);
}

/** Object 0 everywhere except an uncertain top margin and the square (object 1). */
function priorBytes(): Buffer {
  const buf = Buffer.alloc(12 + W * H * 4);
  buf.write("SPL1", 0, "ascii");
  buf.writeUInt32LE(H, 4);
  buf.writeUInt32LE(W, 8);
  for (let y = 0; y < H; y++) {
    for (let x = 0; x < W; x++) {
      const at = 12 + (y * W + x) * 4;
      if (y < UNCERTAIN_ROWS) buf.writeUInt32LE(0xffffffff, at);
      else if (insideSquare(x, y)) buf.writeUInt32LE(1, at);
      else buf.writeUInt32LE(0, at);
    }
  }
  return buf;
}

type HttpProbe = {
  fetch: typeof fetch;
  open: () => number;
  maxOpen: () => number;
  segmentRequests: () => number;
};

/** Count open /api/segment calls at the transport layer. */
function instrumentedFetch(): HttpProbe {
  let open = 0;
  let maxOpen = 0;
  let segmentRequests = 0;
  const wrapped: typeof fetch = async (input, init) => {
    const url = String(input);
    const isSegment = url.endsWith("/api/segment");
    if (isSegment) {
      open += 1;
      segmentRequests += 1;
      maxOpen = Math.max(maxOpen, open);
    }
    try {
      return await fetch(input, init);
    } finally {
      if (isSegment) open -= 1;
    }
  };
  return {
    fetch: wrapped,
    open: () => open,
    maxOpen: () => maxOpen,
    segmentRequests: () => segmentRequests,
  };
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

async function spawnServer(): Promise<{ proc: ChildProcess; baseUrl: string }> {
  const dir = mkdtempSync(join(tmpdir(), "annotator-e2e-"));
  const imagePath = join(dir, "session.ppm");
  const priorPath = join(dir, "prior.spl1");
  writeFileSync(imagePath, sessionImageBytes());
  writeFileSync(priorPath, priorBytes());

  const proc = spawn(
    "spixel",
    [
      "serve",
      "--image",
      imagePath,
      "--prior",
      priorPath,
      "--host",
      "127.0.0.1",
      "--port",
      "0",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );

  const baseUrl = await new Promise<string>((resolve, reject) => {
    let log = "";
    const onData = (chunk: Buffer) => {
      log += chunk.toString();
      const m = log.match(/running on (http:\/\/127\.0\.0\.1:\d+)/i);
      if (m) resolve(m[1]);
    };
    proc.stdout?.on("data", onData);
    proc.stderr?.on("data", onData);
    proc.on("exit", (code) =>
      reject(new Error(`server exited early (${code}): ${log}`)),
    );
    setTimeout(() => reject(new Error(`server never came up: ${log}`)), 30000);
  });

  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${baseUrl}/api/session`);
      if (res.ok) {
        await res.json();
        return { proc, baseUrl };
      }
    } catch {
      // not accepting connections yet
    }
    await sleep(100);
  }
  proc.kill();
  throw new Error("server did not answer /api/session");
}

let proc: ChildProcess;
let baseUrl: string;
let probe: HttpProbe;
let client: SegmentationClient;
let session: SessionInfo;
let base: Rgba;

beforeAll(async () => {
  ({ proc, baseUrl } = await spawnServer());
  probe = instrumentedFetch();
  client = new SegmentationClient(baseUrl, probe.fetch);
  session = await client.getSession();
  const png = PNG.sync.read(Buffer.from(await client.getImagePng()));
  base = {
    width: png.width,
    height: png.height,
    data: new Uint8ClampedArray(png.data),
  };
}, 60000);

afterAll(async () => {
  if (proc !== undefined && proc.exitCode === null) {
    proc.kill("SIGTERM");
    await new Promise((r) => proc.once("exit", r));
  }
});

describe("live 64x64 session", () => {
  it("reports the expected objects and image", () => {
    expect(session.width).toBe(W);
    expect(session.height).toBe(H);
    expect(session.objects).toEqual([
      { id: 0, area: 3696, bbox: [0, UNCERTAIN_ROWS, 63, 63] },
      { id: 1, area: 144, bbox: [24, 24, 35, 35] },
    ]);
    expect(base.width).toBe(W);
    expect(base.height).toBe(H);
    const at = (30 * W + 30) * 4;
    expect([base.data[at], base.data[at + 1], base.data[at + 2]]).toEqual([
      220, 60, 60,
    ]);
    const bg = (4 * W + 0) * 4;
    expect([base.data[bg], base.data[bg + 1], base.data[bg + 2]]).toEqual([
      40, 44, 80,
    ]);
  });

  it(
    "doubles the clicked budget, keeps one request in flight, and matches the golden overlay",
    async () => {
      const controller = new SessionController(client, session, { k: K });

      controller.requestSegmentation();
      await controller.settle();
      expect(controller.errorBanner).toBeNull();
      const baseline = controller.result;
      expect(baseline).not.toBeNull();
      if (baseline === null) throw new Error("unreachable");
      const baseCount = baseline.per_object_counts["1"];
      expect(baseCount).toBeGreaterThan(2);

      // The click loop of record: one primary click on the square.
      expect(controller.clickObject(29, 29, "primary")).toBe(1);
      expect(controller.acknowledgedFactor(1)).toBe(1);
      await controller.settle();
      expect(controller.errorBanner).toBeNull();
      expect(controller.acknowledgedFactor(1)).toBe(2);
      const doubled = controller.result;
      if (doubled === null) throw new Error("unreachable");
      const boostedCount = doubled.per_object_counts["1"];
      expect(Math.abs(boostedCount - 2 * baseCount)).toBeLessThanOrEqual(1);
      expect(controller.view().badges[1]).toEqual({
        objectId: 1,
        factor: 2,
        tone: "raise",
      });

      // Edit while a request is in flight: it must coalesce, not overlap.
      controller.clickObject(29, 29, "primary");
      while (probe.open() === 0) await sleep(2);
      controller.clickObject(29, 29, "secondary");
      expect(probe.open()).toBe(1);
      await controller.settle();
      expect(controller.acknowledgedFactor(1)).toBe(2);
      expect(controller.result?.per_object_counts["1"]).toBe(boostedCount);

      // Uncertainty region: toast, no request.
      const sent = probe.segmentRequests();
      expect(controller.clickObject(2, 1, "primary")).toBeNull();
      expect(controller.toast).toBe("no object at (2, 1)");
      await controller.settle();
      expect(probe.segmentRequests()).toBe(sent);

      expect(probe.maxOpen()).toBe(1);
      expect(controller.stats.maxInFlight).toBe(1);
      expect(probe.segmentRequests()).toBe(controller.stats.sent);

      const final = controller.result;
      if (final === null) throw new Error("unreachable");
      const { image, labels } = renderOverlay(
        base,
        final.boundaries,
        final.labels_rle,
        session.objects,
      );
      expect(labels.length).toBe(W * H);
      const verdict = checkGolden(
        join(GOLDEN_DIR, "e2e-overlay-64.bin"),
        image.data,
      );
      expect(verdict.reason).toMatch(/match|updated/);
      expect(verdict.ok).toBe(true);
    },
    120000,
  );

  it("answers repeated identical requests byte-identically", async () => {
    const a = await client.segment({ k: 120, factors: { "1": 2 } });
    const b = await client.segment({ k: 120, factors: { "1": 2 } });
    expect(b).toEqual(a);
  });
});
