/** Integer inference arithmetic, bit-for-bit compatible with the simulator.
 *
 * Requantization multiplies the exact int32 accumulator by a double scale
 * and rounds half away from zero; both sides use IEEE doubles so the
 * exported model predicts identically on either implementation.
 */

import { LayerJson, ModelJson } from "./model.js";

export const INT8_MIN = -128;
export const INT8_MAX = 127;

export function roundHalfAway(x: number): number {
  return x >= 0 ? Math.floor(x + 0.5) : Math.ceil(x - 0.5);
}

export function requantize(acc: number, scale: number, outputZp: number): number {
  if (!(scale > 0)) throw new Error("requantize scale must be positive");
  const out = outputZp + roundHalfAway(acc * scale);
  return Math.max(INT8_MIN, Math.min(INT8_MAX, out));
}

/** One fully connected layer on int8 inputs; returns int8 outputs. */
export function referenceLayer(layer: LayerJson, x: Int8Array): Int8Array {
  if (x.length !== layer.in) {
    throw new Error(`sample dim ${x.length} != layer in dim ${layer.in}`);
  }
  const out = new Int8Array(layer.out);
  for (let j = 0; j < layer.out; j++) {
    let acc = layer.bias[j];
    const base = j * layer.in;
    for (let k = 0; k < layer.in; k++) {
      acc += layer.weights[base + k] * (x[k] - layer.input_zp);
    }
    let q = requantize(acc, layer.requant_scales[j], layer.output_zp);
    if (layer.activation === "relu") q = Math.max(layer.output_zp, q);
    out[j] = q;
  }
  return out;
}

export function referenceForward(model: ModelJson, sample: Int8Array): Int8Array {
  let x = sample;
  for (const layer of model.layers) {
    x = referenceLayer(layer, x);
  }
  return x;
}

export function argmax(values: Int8Array | Float64Array): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

/** Real values -> int8 with the same rounding and clipping as the simulator. */
export function quantizeReal(values: Float64Array, scale: number, zp: number): Int8Array {
  const out = new Int8Array(values.length);
  for (let i = 0; i < values.length; i++) {
    const q = zp + roundHalfAway(values[i] / scale);
    out[i] = Math.max(INT8_MIN, Math.min(INT8_MAX, q));
  }
  return out;
}
