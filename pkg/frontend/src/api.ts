/**
 * Typed client for the single-session segmentation server.
 *
 * The server holds one image per process; this client is the only
 * channel the UI uses to read or change segmentation state.
 */

export type ObjectInfo = {
  id: number;
  /** Pixel count of the object in the prior partition */
  area: number;
  /** Inclusive bounding box [x0, y0, x1, y1] in image coordinates */
  bbox: [number, number, number, number];
};

export type SessionInfo = {
  width: number;
  height: number;
  objects: ObjectInfo[];
};

export type SegmentRequest = {
  k: number;
  lambda_c?: number;
  lambda_s?: number;
  iters?: number;
  seed?: number;
  /** Per-object density multipliers; objects not listed default to 1 */
  factors?: Record<string, number>;
  va_ratio?: number;
};

export type SegmentResponse = {
  k_realized: number;
  /** [value, runLength] pairs over the raster-order label map */
  labels_rle: [number, number][];
  /** Superpixel boundary pixels as [x, y] */
  boundaries: [number, number][];
  per_object_counts: Record<string, number>;
};

/** The one capability the session controller needs from the network. */
export interface SegmentTransport {
  segment(req: SegmentRequest): Promise<SegmentResponse>;
}

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // non-JSON error body, fall back to the status line
  }
  return `HTTP ${res.status}`;
}

export class SegmentationClient implements SegmentTransport {
  private baseUrl: string;
  private fetchImpl: typeof fetch;

  constructor(baseUrl: string, fetchImpl?: typeof fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async checked(res: Response): Promise<Response> {
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    return res;
  }

  async getSession(): Promise<SessionInfo> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/session`);
    return (await this.checked(res)).json();
  }

  /** Fetch the working image as an encoded PNG. */
  async getImagePng(): Promise<ArrayBuffer> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/image`);
    return (await this.checked(res)).arrayBuffer();
  }

  async segment(req: SegmentRequest): Promise<SegmentResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/segment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    return (await this.checked(res)).json();
  }

  /** Upload a raw SPL1 or SPM1 payload to replace the prior partition. */
  async uploadPrior(data: Uint8Array): Promise<SessionInfo> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/prior`, {
      method: "POST",
      headers: { "Content-Type": "application/octet-stream" },
      body: data as unknown as BodyInit,
    });
    return (await this.checked(res)).json();
  }
}
