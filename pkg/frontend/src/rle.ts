/** Run-length codec for raster-order label maps. */

export class RleLengthError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "RleLengthError";
  }
}

/**
 * Expand [value, length] pairs into a label array.
 *
 * The decoded length must equal expectedLength exactly; anything else
 * (short payload, overflow, non-positive or fractional run length)
 * throws RleLengthError so the caller can surface it.
 */
export function decodeRle(
  pairs: [number, number][],
  expectedLength: number,
): Uint32Array {
  const out = new Uint32Array(expectedLength);
  let pos = 0;
  for (const [value, length] of pairs) {
    if (!Number.isInteger(length) || length <= 0) {
      throw new RleLengthError(`invalid run length ${length}`);
    }
    if (pos + length > expectedLength) {
      throw new RleLengthError(
        `decoded RLE length exceeds expected ${expectedLength}`,
      );
    }
    out.fill(value, pos, pos + length);
    pos += length;
  }
  if (pos !== expectedLength) {
    throw new RleLengthError(
      `decoded RLE length ${pos} != expected ${expectedLength}`,
    );
  }
  return out;
}

/** Inverse of decodeRle; used by tests and prior uploads. */
export function encodeRle(values: ArrayLike<number>): [number, number][] {
  const pairs: [number, number][] = [];
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    const last = pairs[pairs.length - 1];
    if (last !== undefined && last[0] === v) {
      last[1] += 1;
    } else {
      pairs.push([v, 1]);
    }
  }
  return pairs;
}
