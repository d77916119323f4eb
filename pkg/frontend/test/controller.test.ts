import { describe, expect, it } from "vitest";

import type {
  SegmentRequest,
  SegmentResponse,
  SegmentTransport,
  SessionInfo,
} from "../src/api.js";
import {
  DEFAULT_DEBOUNCE_MS,
  DEFAULT_K,
  SessionController,
} from "../src/controller.js";

const SESSION: SessionInfo = {
  width: 8,
  height: 8,
  objects: [
    { id: 0, area: 40, bbox: [0, 0, 7, 4] },
    { id: 3, area: 12, bbox: [2, 5, 5, 7] },
    { id: 7, area: 6, bbox: [1, 1, 3, 2] },
  ],
};

function cannedResponse(req: SegmentRequest): SegmentResponse {
  return {
    k_realized: req.k,
    labels_rle: [[0, 64]],
    boundaries: [[0, 0]],
    per_object_counts: { "0": req.k - 2, "3": 1, "7": 1 },
  };
}

/** Transport double: records request bodies, optional manual resolution. */
class MockTransport implements SegmentTransport {
  calls: SegmentRequest[] = [];
  open = 0;
  maxOpen = 0;
  manual = false;
  failWith: Error | null = null;
  private waiting: { req: SegmentRequest; resolve: (r: SegmentResponse) => void }[] =
    [];

  async segment(req: SegmentRequest): Promise<SegmentResponse> {
    this.calls.push(JSON.parse(JSON.stringify(req)));
    this.open += 1;
    this.maxOpen = Math.max(this.maxOpen, this.open);
    try {
      if (this.failWith !== null) throw this.failWith;
      if (this.manual) {
        return await new Promise<SegmentResponse>((resolve) =>
          this.waiting.push({ req, resolve }),
        );
      }
      await new Promise((r) => setTimeout(r, 0));
      return cannedResponse(req);
    } finally {
      this.open -= 1;
    }
  }

  release(): void {
    const entry = this.waiting.shift();
    if (entry === undefined) throw new Error("no request waiting");
    entry.resolve(cannedResponse(entry.req));
  }
}

function makeController(transport: MockTransport, onChange?: () => void) {
  return new SessionController(transport, SESSION, {
    debounceMs: 1,
    k: 50,
    onChange,
  });
}

const tick = (ms = 10) => new Promise((r) => setTimeout(r, ms));

describe("defaults", () => {
  it("pins the documented debounce and budget", () => {
    expect(DEFAULT_DEBOUNCE_MS).toBe(150);
    expect(DEFAULT_K).toBe(250);
  });
});

describe("hitTest", () => {
  it("resolves clicks to the smallest containing object", () => {
    const c = makeController(new MockTransport());
    expect(c.hitTest(0, 0)).toBe(0);
    expect(c.hitTest(2, 2)).toBe(7);
    expect(c.hitTest(3, 6)).toBe(3);
    expect(c.hitTest(7, 4)).toBe(0);
  });

  it("reports the uncertainty region as null", () => {
    const c = makeController(new MockTransport());
    expect(c.hitTest(7, 7)).toBeNull();
    expect(c.hitTest(0, 6)).toBeNull();
  });
});

describe("clickObject", () => {
  it("doubles on primary and sends the factor", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    expect(c.clickObject(3, 6, "primary")).toBe(3);
    expect(c.pendingFactor(3)).toBe(2);
    expect(c.acknowledgedFactor(3)).toBe(1);
    await c.settle();
    expect(transport.calls).toEqual([{ k: 50, seed: 0, factors: { "3": 2 } }]);
    expect(c.acknowledgedFactor(3)).toBe(2);
    expect(c.result?.k_realized).toBe(50);
  });

  it("halves on secondary", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    c.clickObject(3, 6, "secondary");
    await c.settle();
    expect(transport.calls[0].factors).toEqual({ "3": 0.5 });
  });

  it("returns to exactly one after two raises and two lowers", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    c.clickObject(3, 6, "primary");
    c.clickObject(3, 6, "primary");
    c.clickObject(3, 6, "secondary");
    c.clickObject(3, 6, "secondary");
    await c.settle();
    expect(c.pendingFactor(3)).toBe(1);
    expect(c.acknowledgedFactor(3)).toBe(1);
    const last = transport.calls[transport.calls.length - 1];
    expect(last.factors).toEqual({});
  });

  it("is a toast-only no-op on the uncertainty region", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    expect(c.clickObject(7, 7, "primary")).toBeNull();
    expect(c.toast).toBe("no object at (7, 7)");
    await tick(20);
    expect(transport.calls.length).toBe(0);
    c.clearToast();
    expect(c.toast).toBeNull();
  });

  it("coalesces rapid clicks inside the debounce window", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    c.clickObject(3, 6, "primary");
    c.clickObject(3, 6, "primary");
    await c.settle();
    expect(transport.calls.length).toBe(1);
    expect(transport.calls[0].factors).toEqual({ "3": 4 });
  });
});

describe("request pipeline", () => {
  it("keeps at most one request in flight and coalesces newest-wins", async () => {
    const transport = new MockTransport();
    transport.manual = true;
    const c = makeController(transport);
    c.clickObject(3, 6, "primary");
    while (transport.open === 0) await tick(2);

    c.clickObject(3, 6, "secondary");
    c.clickObject(3, 6, "secondary");
    await tick(20);
    expect(transport.open).toBe(1);
    expect(transport.calls.length).toBe(1);

    transport.release();
    while (transport.calls.length < 2) await tick(2);
    transport.release();
    await c.settle();

    expect(transport.calls.length).toBe(2);
    expect(transport.calls[1].factors).toEqual({ "3": 0.5 });
    expect(transport.maxOpen).toBe(1);
    expect(c.stats.maxInFlight).toBe(1);
    expect(c.acknowledgedFactor(3)).toBe(0.5);
  });

  it("surfaces request failures in the error banner and recovers", async () => {
    const transport = new MockTransport();
    transport.failWith = new Error("k is required");
    const c = makeController(transport);
    c.clickObject(3, 6, "primary");
    await c.settle();
    expect(c.errorBanner).toBe("k is required");
    expect(c.stats.failed).toBe(1);
    expect(c.acknowledgedFactor(3)).toBe(1);

    transport.failWith = null;
    c.requestSegmentation();
    await c.settle();
    expect(c.errorBanner).toBeNull();
    expect(c.acknowledgedFactor(3)).toBe(2);
  });
});

describe("direct state edits", () => {
  it("accepts arbitrary positive factors", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    c.setFactor(0, 3.5);
    await c.settle();
    expect(transport.calls[0].factors).toEqual({ "0": 3.5 });
  });

  it("rejects non-positive factors and unknown objects", () => {
    const c = makeController(new MockTransport());
    expect(() => c.setFactor(0, 0)).toThrow(RangeError);
    expect(() => c.setFactor(0, -2)).toThrow(RangeError);
    expect(() => c.setFactor(0, Number.NaN)).toThrow(RangeError);
    expect(() => c.setFactor(99, 2)).toThrow(RangeError);
  });

  it("re-segments with a new k", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    c.setK(80);
    await c.settle();
    expect(transport.calls[0].k).toBe(80);
    expect(() => c.setK(0)).toThrow(RangeError);
    expect(() => c.setK(2.5)).toThrow(RangeError);
  });
});

describe("view", () => {
  it("derives badges from acknowledged state only", async () => {
    const transport = new MockTransport();
    const c = makeController(transport);
    c.clickObject(3, 6, "primary");
    c.clickObject(0, 0, "secondary");
    let view = c.view();
    expect(view.badges).toEqual([
      { objectId: 0, factor: 1, tone: "unit" },
      { objectId: 3, factor: 1, tone: "unit" },
      { objectId: 7, factor: 1, tone: "unit" },
    ]);
    await c.settle();
    view = c.view();
    expect(view.badges).toEqual([
      { objectId: 0, factor: 0.5, tone: "lower" },
      { objectId: 3, factor: 2, tone: "raise" },
      { objectId: 7, factor: 1, tone: "unit" },
    ]);
    expect(view.boundaries).toEqual([[0, 0]]);
    expect(view.kRealized).toBe(50);
    expect(view.busy).toBe(false);
  });

  it("notifies the change hook on edits and completions", async () => {
    const transport = new MockTransport();
    let changes = 0;
    const c = makeController(transport, () => {
      changes += 1;
    });
    c.clickObject(3, 6, "primary");
    const afterClick = changes;
    expect(afterClick).toBeGreaterThan(0);
    await c.settle();
    expect(changes).toBeGreaterThan(afterClick);
  });
});
