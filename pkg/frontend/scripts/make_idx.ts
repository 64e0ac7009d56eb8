/** Build IDX train/test files from the `mnist` npm package.
 *
 * The package ships ~10k samples as per-digit float arrays (pixel/255 at
 * 1/250 granularity); Math.round(v * 255) recovers the original byte. The
 * split is a seeded shuffle: 2000 test samples, the rest for training.
 *
 * Usage: node dist/scripts/make_idx.js [outDir]
 */

import { createRequire } from "node:module";
import { mkdirSync } from "node:fs";
import { join } from "node:path";
import { writeIdxImages, writeIdxLabels } from "../src/idx.js";
import { Rng } from "../src/rng.js";

const require = createRequire(import.meta.url);

const DIM = 784;
const TEST_COUNT = 2000;

function main(): void {
  const outDir = process.argv[2] ?? join("..", "data", "mnist");
  mkdirSync(outDir, { recursive: true });

  const mnist = require("mnist");
  const pixels: Uint8Array[] = [];
  const labels: number[] = [];
  for (let digit = 0; digit < 10; digit++) {
    const raw: number[] = mnist[digit].raw;
    const count = raw.length / DIM;
    for (let i = 0; i < count; i++) {
      const img = new Uint8Array(DIM);
      for (let k = 0; k < DIM; k++) {
        img[k] = Math.round(raw[i * DIM + k] * 255);
      }
      pixels.push(img);
      labels.push(digit);
    }
  }

  const order = new Int32Array(pixels.length);
  for (let i = 0; i < order.length; i++) order[i] = i;
  new Rng(1234).shuffle(order);

  const write = (name: string, indices: Int32Array) => {
    const imgBytes = new Uint8Array(indices.length * DIM);
    const lblBytes = new Uint8Array(indices.length);
    for (let i = 0; i < indices.length; i++) {
      imgBytes.set(pixels[indices[i]], i * DIM);
      lblBytes[i] = labels[indices[i]];
    }
    writeIdxImages(join(outDir, `${name}-images-idx3-ubyte`), imgBytes, indices.length, 28, 28);
    writeIdxLabels(join(outDir, `${name}-labels-idx1-ubyte`), lblBytes);
    console.log(`${name}: ${indices.length} samples`);
  };

  write("test", order.subarray(0, TEST_COUNT));
  write("train", order.subarray(TEST_COUNT));
}

main();
