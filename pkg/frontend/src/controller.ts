/**
 * Session state machine.
 *
 * Holds the per-object factor map and funnels every change through
 * /api/segment: the server is the single source of truth, the UI never
 * re-labels pixels locally.  Factor badges always reflect the factors
 * of the last acknowledged response, not optimistic local state.
 *
 * Requests are debounced and single-flight: while one request is
 * outstanding, further edits only mark the state dirty, and one more
 * request with the newest state fires after completion (newest-wins
 * coalescing).
 */

import type {
  ObjectInfo,
  SegmentResponse,
  SegmentTransport,
  SessionInfo,
} from "./api.js";

export type ClickButton = "primary" | "secondary";

export type FactorBadge = {
  objectId: number;
  factor: number;
  /** "raise" renders blue, "lower" red, "unit" neutral */
  tone: "raise" | "lower" | "unit";
};

export type SessionView = {
  width: number;
  height: number;
  /** Outline rectangles for every prior object */
  objects: ObjectInfo[];
  /** One badge per object, from the last acknowledged server state */
  badges: FactorBadge[];
  /** Boundary pixels of the last acknowledged segmentation */
  boundaries: [number, number][];
  perObjectCounts: Record<string, number>;
  kRealized: number | null;
  k: number;
  toast: string | null;
  errorBanner: string | null;
  busy: boolean;
};

export type RequestStats = {
  sent: number;
  completed: number;
  failed: number;
  /** Largest number of simultaneously open requests ever observed */
  maxInFlight: number;
};

export type ControllerOptions = {
  debounceMs?: number;
  k?: number;
  seed?: number;
  onChange?: () => void;
};

export const DEFAULT_DEBOUNCE_MS = 150;
export const DEFAULT_K = 250;

export function formatFactor(factor: number): string {
  return `×${factor}`;
}

export class SessionController {
  readonly session: SessionInfo;
  readonly stats: RequestStats = {
    sent: 0,
    completed: 0,
    failed: 0,
    maxInFlight: 0,
  };
  /** Body of every segment request, in send order */
  readonly requestLog: { k: number; factors: Record<string, number> }[] = [];

  k: number;
  seed: number;
  result: SegmentResponse | null = null;
  toast: string | null = null;
  errorBanner: string | null = null;

  private client: SegmentTransport;
  private debounceMs: number;
  private onChange: () => void;
  private desired = new Map<number, number>();
  private acknowledged = new Map<number, number>();
  private timer: ReturnType<typeof setTimeout> | null = null;
  private openRequests = 0;
  private dirty = false;

  constructor(
    client: SegmentTransport,
    session: SessionInfo,
    options: ControllerOptions = {},
  ) {
    this.client = client;
    this.session = session;
    this.debounceMs = options.debounceMs ?? DEFAULT_DEBOUNCE_MS;
    this.k = options.k ?? DEFAULT_K;
    this.seed = options.seed ?? 0;
    this.onChange = options.onChange ?? (() => {});
    for (const obj of session.objects) {
      this.desired.set(obj.id, 1.0);
      this.acknowledged.set(obj.id, 1.0);
    }
  }

  /** Object id under (x, y): smallest containing bbox wins, null = uncertainty. */
  hitTest(x: number, y: number): number | null {
    let best: ObjectInfo | null = null;
    for (const obj of this.session.objects) {
      const [x0, y0, x1, y1] = obj.bbox;
      if (x < x0 || x > x1 || y < y0 || y > y1) continue;
      if (
        best === null ||
        obj.area < best.area ||
        (obj.area === best.area && obj.id < best.id)
      ) {
        best = obj;
      }
    }
    return best === null ? null : best.id;
  }

  /**
   * Double (primary) or halve (secondary) the factor of the object
   * under the click, then schedule a re-segmentation.  A click on the
   * uncertainty region changes nothing and raises a toast instead.
   */
  clickObject(x: number, y: number, button: ClickButton): number | null {
    const id = this.hitTest(x, y);
    if (id === null) {
      this.toast = `no object at (${x}, ${y})`;
      this.onChange();
      return null;
    }
    this.toast = null;
    const current = this.desired.get(id) ?? 1.0;
    this.desired.set(id, button === "primary" ? current * 2 : current / 2);
    this.schedule();
    return id;
  }

  /** Set an arbitrary positive factor (numeric input path). */
  setFactor(objectId: number, factor: number): void {
    if (!this.desired.has(objectId)) {
      throw new RangeError(`unknown object id ${objectId}`);
    }
    if (!Number.isFinite(factor) || factor <= 0) {
      throw new RangeError("factor must be a positive number");
    }
    this.desired.set(objectId, factor);
    this.schedule();
  }

  setK(k: number): void {
    if (!Number.isInteger(k) || k < 1) {
      throw new RangeError("k must be an integer >= 1");
    }
    this.k = k;
    this.schedule();
  }

  /** Factor the UI may display for an object (last acknowledged). */
  acknowledgedFactor(objectId: number): number {
    return this.acknowledged.get(objectId) ?? 1.0;
  }

  /** Factor the next request will carry. */
  pendingFactor(objectId: number): number {
    return this.desired.get(objectId) ?? 1.0;
  }

  clearToast(): void {
    this.toast = null;
    this.onChange();
  }

  reportRenderError(message: string): void {
    this.errorBanner = message;
    this.onChange();
  }

  get busy(): boolean {
    return this.timer !== null || this.openRequests > 0 || this.dirty;
  }

  view(): SessionView {
    const badges: FactorBadge[] = this.session.objects.map((obj) => {
      const factor = this.acknowledgedFactor(obj.id);
      return {
        objectId: obj.id,
        factor,
        tone: factor > 1 ? "raise" : factor < 1 ? "lower" : "unit",
      };
    });
    return {
      width: this.session.width,
      height: this.session.height,
      objects: this.session.objects,
      badges,
      boundaries: this.result ? this.result.boundaries : [],
      perObjectCounts: this.result ? this.result.per_object_counts : {},
      kRealized: this.result ? this.result.k_realized : null,
      k: this.k,
      toast: this.toast,
      errorBanner: this.errorBanner,
      busy: this.busy,
    };
  }

  /** Ask for a segmentation with the current state (debounced). */
  requestSegmentation(): void {
    this.schedule();
  }

  /** Resolve once no timer, request, or coalesced follow-up is pending. */
  async settle(timeoutMs = 30000): Promise<void> {
    const start = Date.now();
    while (this.busy) {
      if (Date.now() - start > timeoutMs) {
        throw new Error("controller did not settle");
      }
      await new Promise((r) => setTimeout(r, 5));
    }
  }

  private schedule(): void {
    this.onChange();
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      if (this.openRequests > 0) {
        this.dirty = true;
        return;
      }
      void this.send();
    }, this.debounceMs);
  }

  private nonUnitFactors(): Record<string, number> {
    const factors: Record<string, number> = {};
    for (const [id, f] of this.desired) {
      if (f !== 1.0) factors[String(id)] = f;
    }
    return factors;
  }

  private async send(): Promise<void> {
    const factors = this.nonUnitFactors();
    const sentState = new Map(this.desired);
    const k = this.k;
    this.openRequests += 1;
    this.stats.sent += 1;
    this.stats.maxInFlight = Math.max(
      this.stats.maxInFlight,
      this.openRequests,
    );
    this.requestLog.push({ k, factors });
    try {
      const res = await this.client.segment({ k, seed: this.seed, factors });
      this.result = res;
      this.acknowledged = sentState;
      this.errorBanner = null;
      this.stats.completed += 1;
    } catch (err) {
      this.stats.failed += 1;
      this.errorBanner = err instanceof Error ? err.message : String(err);
    } finally {
      this.openRequests -= 1;
      if (this.dirty) {
        this.dirty = false;
        this.schedule();
      } else {
        this.onChange();
      }
    }
  }
}
