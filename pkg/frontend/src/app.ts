/**
 * Browser wiring: canvas, badges, toast, error banner, k slider.
 *
 * Everything stateful lives in SessionController; this module only
 * translates DOM events into controller calls and controller state
 * into pixels and text.
 */

import { SegmentationClient } from "./api.js";
import { RleLengthError } from "./rle.js";
import { renderOverlay, type Rgba } from "./overlay.js";
import {
  SessionController,
  formatFactor,
  type SessionView,
} from "./controller.js";

const SCALE = 6;

const TONE_COLOR = {
  raise: "#2060ff",
  lower: "#e02020",
  unit: "#666666",
} as const;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  style: Partial<CSSStyleDeclaration> = {},
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  Object.assign(node.style, style);
  return node;
}

function must2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2d canvas unavailable");
  return ctx;
}

function toImageData(img: Rgba): ImageData {
  return new ImageData(
    new Uint8ClampedArray(img.data),
    img.width,
    img.height,
  );
}

async function decodePng(buf: ArrayBuffer): Promise<Rgba> {
  const bitmap = await createImageBitmap(new Blob([buf], { type: "image/png" }));
  const scratch = document.createElement("canvas");
  scratch.width = bitmap.width;
  scratch.height = bitmap.height;
  const ctx = must2d(scratch);
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: data.width, height: data.height, data: data.data };
}

export async function boot(apiBase: string, root: HTMLElement): Promise<void> {
  const client = new SegmentationClient(apiBase);
  const session = await client.getSession();
  const base = await decodePng(await client.getImagePng());

  const canvas = el("canvas", { imageRendering: "pixelated", cursor: "crosshair" });
  canvas.width = session.width;
  canvas.height = session.height;
  canvas.style.width = `${session.width * SCALE}px`;
  canvas.style.height = `${session.height * SCALE}px`;
  const ctx = must2d(canvas);

  const banner = el("div", {
    display: "none",
    background: "#b00020",
    color: "white",
    padding: "6px 10px",
  });
  const toast = el("div", {
    display: "none",
    background: "#333333",
    color: "white",
    padding: "4px 10px",
  });
  const badges = el("div", { margin: "8px 0", fontFamily: "monospace" });
  const status = el("div", { fontFamily: "monospace", color: "#444444" });

  const kSlider = el("input") as HTMLInputElement;
  kSlider.type = "range";
  kSlider.min = String(session.objects.length || 1);
  kSlider.max = "1000";
  const kLabel = el("span", { fontFamily: "monospace" });

  root.append(banner, toast, canvas, badges, el("div"), kLabel, kSlider, status);

  const controller = new SessionController(client, session, {
    onChange: () => render(controller.view()),
  });
  kSlider.value = String(controller.k);

  let toastTimer: ReturnType<typeof setTimeout> | null = null;

  function render(view: SessionView): void {
    banner.style.display = view.errorBanner === null ? "none" : "block";
    banner.textContent = view.errorBanner ?? "";
    if (view.toast !== null) {
      toast.style.display = "block";
      toast.textContent = view.toast;
      if (toastTimer !== null) clearTimeout(toastTimer);
      toastTimer = setTimeout(() => controller.clearToast(), 1500);
    } else {
      toast.style.display = "none";
    }

    badges.replaceChildren(
      ...view.badges.map((b) => {
        const chip = el("span", {
          display: "inline-block",
          margin: "0 6px 0 0",
          padding: "2px 8px",
          borderRadius: "10px",
          color: "white",
          background: TONE_COLOR[b.tone],
        });
        chip.textContent = `object ${b.objectId} ${formatFactor(b.factor)}`;
        return chip;
      }),
    );

    kLabel.textContent = `k = ${view.k} (realized ${view.kRealized ?? "-"}) `;
    status.textContent = view.busy
      ? "segmenting..."
      : `superpixels per object: ${JSON.stringify(view.perObjectCounts)}`;

    if (view.boundaries.length === 0 && view.kRealized === null) {
      ctx.putImageData(toImageData(base), 0, 0);
      return;
    }
    try {
      const { image } = renderOverlay(
        base,
        view.boundaries,
        controller.result ? controller.result.labels_rle : [],
        view.objects,
      );
      ctx.putImageData(toImageData(image), 0, 0);
    } catch (err) {
      if (err instanceof RleLengthError) {
        controller.reportRenderError(`render failed: ${err.message}`);
      } else {
        throw err;
      }
    }
  }

  function imageCoords(ev: MouseEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - rect.left) / rect.width) * session.width);
    const y = Math.floor(((ev.clientY - rect.top) / rect.height) * session.height);
    return [x, y];
  }

  canvas.addEventListener("click", (ev) => {
    const [x, y] = imageCoords(ev);
    controller.clickObject(x, y, ev.altKey ? "secondary" : "primary");
  });
  canvas.addEventListener("contextmenu", (ev) => {
    ev.preventDefault();
    const [x, y] = imageCoords(ev);
    controller.clickObject(x, y, "secondary");
  });
  kSlider.addEventListener("change", () => {
    controller.setK(Number(kSlider.value));
  });

  render(controller.view());
  controller.requestSegmentation();
}
