/** Pure RGBA compositing of segmentation results over the session image. */

import type { ObjectInfo } from "./api.js";
import { decodeRle } from "./rle.js";

export type Rgba = {
  width: number;
  height: number;
  /** RGBA bytes, length width * height * 4 */
  data: Uint8ClampedArray;
};

export const BOUNDARY_COLOR: readonly [number, number, number] = [255, 0, 0];
export const OUTLINE_COLOR: readonly [number, number, number] = [255, 255, 0];

function putPixel(
  img: Rgba,
  x: number,
  y: number,
  rgb: readonly [number, number, number],
): void {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const at = (y * img.width + x) * 4;
  img.data[at] = rgb[0];
  img.data[at + 1] = rgb[1];
  img.data[at + 2] = rgb[2];
  img.data[at + 3] = 255;
}

function strokeBox(
  img: Rgba,
  bbox: readonly [number, number, number, number],
  rgb: readonly [number, number, number],
): void {
  const [x0, y0, x1, y1] = bbox;
  for (let x = x0; x <= x1; x++) {
    putPixel(img, x, y0, rgb);
    putPixel(img, x, y1, rgb);
  }
  for (let y = y0; y <= y1; y++) {
    putPixel(img, x0, y, rgb);
    putPixel(img, x1, y, rgb);
  }
}

/**
 * Draw superpixel boundaries and object outlines over the image.
 *
 * The label RLE must decode to exactly width * height entries; a
 * mismatch throws RleLengthError before anything is drawn.  The input
 * buffer is never mutated.  Returns the composited frame plus the
 * decoded label map so callers can answer "which superpixel is under
 * the cursor" without a second decode.
 */
export function renderOverlay(
  base: Rgba,
  boundaries: [number, number][],
  labelsRle: [number, number][],
  objects: ObjectInfo[] = [],
): { image: Rgba; labels: Uint32Array } {
  if (base.data.length !== base.width * base.height * 4) {
    throw new RangeError("base image buffer does not match its dimensions");
  }
  const labels = decodeRle(labelsRle, base.width * base.height);
  const image: Rgba = {
    width: base.width,
    height: base.height,
    data: new Uint8ClampedArray(base.data),
  };
  for (const [x, y] of boundaries) {
    putPixel(image, x, y, BOUNDARY_COLOR);
  }
  for (const obj of objects) {
    strokeBox(image, obj.bbox, OUTLINE_COLOR);
  }
  return { image, labels };
}
