/** Big-endian IDX image/label file reading and writing. */

import { readFileSync, writeFileSync } from "node:fs";

export const IMAGES_MAGIC = 0x00000803;
export const LABELS_MAGIC = 0x00000801;

export interface IdxImages {
  count: number;
  rows: number;
  cols: number;
  pixels: Uint8Array; // count * rows * cols
}

export function readIdxImages(path: string): IdxImages {
  const buf = readFileSync(path);
  if (buf.readInt32BE(0) !== IMAGES_MAGIC) {
    throw new Error(`${path}: bad IDX images magic`);
  }
  const count = buf.readInt32BE(4);
  const rows = buf.readInt32BE(8);
  const cols = buf.readInt32BE(12);
  const pixels = new Uint8Array(buf.subarray(16));
  if (pixels.length !== count * rows * cols) {
    throw new Error(`${path}: truncated image payload`);
  }
  return { count, rows, cols, pixels };
}

export function readIdxLabels(path: string): Uint8Array {
  const buf = readFileSync(path);
  if (buf.readInt32BE(0) !== LABELS_MAGIC) {
    throw new Error(`${path}: bad IDX labels magic`);
  }
  const count = buf.readInt32BE(4);
  const labels = new Uint8Array(buf.subarray(8));
  if (labels.length !== count) {
    throw new Error(`${path}: truncated label payload`);
  }
  return labels;
}

export function writeIdxImages(
  path: string,
  pixels: Uint8Array,
  count: number,
  rows: number,
  cols: number,
): void {
  const header = Buffer.alloc(16);
  header.writeInt32BE(IMAGES_MAGIC, 0);
  header.writeInt32BE(count, 4);
  header.writeInt32BE(rows, 8);
  header.writeInt32BE(cols, 12);
  writeFileSync(path, Buffer.concat([header, Buffer.from(pixels)]));
}

export function writeIdxLabels(path: string, labels: Uint8Array): void {
  const header = Buffer.alloc(8);
  header.writeInt32BE(LABELS_MAGIC, 0);
  header.writeInt32BE(labels.length, 4);
  writeFileSync(path, Buffer.concat([header, Buffer.from(labels)]));
}
