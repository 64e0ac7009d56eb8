/** Quantization-aware training: 4-bit weights, int8 activations.
 *
 * Two desk-scale recipes live here: a 784-64-10 MNIST classifier and a
 * 64-32-64 anomaly autoencoder. Both use fake-quantized weights with a
 * straight-through estimator and running activation-range observers, so the
 * exported integer model reproduces the trained behavior.
 */

import { Rng } from "./rng.js";
import { LayerJson, ModelJson } from "./model.js";
import { roundHalfAway, quantizeReal } from "./quant.js";

const WMAX = 7; // symmetric signed 4-bit, clamped to [-8, 7]

export interface Linear {
  inDim: number;
  outDim: number;
  w: Float64Array; // row-major [out][in]
  b: Float64Array;
  vw: Float64Array; // momentum buffers
  vb: Float64Array;
}

export function makeLinear(inDim: number, outDim: number, rng: Rng): Linear {
  const w = new Float64Array(outDim * inDim);
  const std = Math.sqrt(2.0 / inDim);
  for (let i = 0; i < w.length; i++) w[i] = rng.gaussian() * std;
  return {
    inDim,
    outDim,
    w,
    b: new Float64Array(outDim),
    vw: new Float64Array(outDim * inDim),
    vb: new Float64Array(outDim),
  };
}

export interface FakeQuant {
  scales: Float64Array; // per output channel, or length 1 when per-tensor
  q: Int16Array; // integer codes in [-8, 7]
  fq: Float64Array; // q * scale, used for forward and backward
}

/** Symmetric fake quantization; scale is max|w|/7 per channel or per tensor. */
export function fakeQuantWeights(layer: Linear, perChannel: boolean): FakeQuant {
  const { inDim, outDim, w } = layer;
  const scales = new Float64Array(perChannel ? outDim : 1);
  if (perChannel) {
    for (let j = 0; j < outDim; j++) {
      let m = 1e-8;
      for (let k = 0; k < inDim; k++) m = Math.max(m, Math.abs(w[j * inDim + k]));
      scales[j] = m / WMAX;
    }
  } else {
    let m = 1e-8;
    for (let i = 0; i < w.length; i++) m = Math.max(m, Math.abs(w[i]));
    scales[0] = m / WMAX;
  }
  const q = new Int16Array(w.length);
  const fq = new Float64Array(w.length);
  for (let j = 0; j < outDim; j++) {
    const s = scales[perChannel ? j : 0];
    for (let k = 0; k < inDim; k++) {
      const i = j * inDim + k;
      q[i] = Math.max(-8, Math.min(WMAX, roundHalfAway(w[i] / s)));
      fq[i] = q[i] * s;
    }
  }
  return { scales, q, fq };
}

function sgdStep(layer: Linear, gw: Float64Array, gb: Float64Array,
                 lr: number, momentum: number): void {
  for (let i = 0; i < layer.w.length; i++) {
    layer.vw[i] = momentum * layer.vw[i] - lr * gw[i];
    layer.w[i] += layer.vw[i];
  }
  for (let j = 0; j < layer.b.length; j++) {
    layer.vb[j] = momentum * layer.vb[j] - lr * gb[j];
    layer.b[j] += layer.vb[j];
  }
}

function biasToInt(b: Float64Array, scales: Float64Array, inputScale: number): number[] {
  const out = new Array<number>(b.length);
  for (let j = 0; j < b.length; j++) {
    const s = scales[scales.length === 1 ? 0 : j];
    out[j] = roundHalfAway(b[j] / (s * inputScale));
  }
  return out;
}

function requantScales(scales: Float64Array, outDim: number,
                       inputScale: number, outputScale: number): number[] {
  const out = new Array<number>(outDim);
  for (let j = 0; j < outDim; j++) {
    const s = scales[scales.length === 1 ? 0 : j];
    out[j] = (s * inputScale) / outputScale;
  }
  return out;
}

export interface MlpOptions {
  hidden?: number;
  epochs?: number;
  batch?: number;
  lr?: number;
  momentum?: number;
  seed?: number;
}

export interface TrainedMlp {
  model: ModelJson;
  hiddenScale: number;
  outputScale: number;
}

/** QAT MNIST classifier. Inputs are raw pixel bytes; the exported model uses
 * the q = pixel - 128 input convention (scale 1/255, zero point -128). */
export function trainMnistMlp(
  pixels: Uint8Array, labels: Uint8Array, count: number,
  opts: MlpOptions = {},
): TrainedMlp {
  const inDim = 784;
  const hidden = opts.hidden ?? 64;
  const classes = 10;
  const epochs = opts.epochs ?? 6;
  const batch = opts.batch ?? 32;
  const momentum = opts.momentum ?? 0.9;
  let lr = opts.lr ?? 0.08;
  const rng = new Rng(opts.seed ?? 7);

  const l1 = makeLinear(inDim, hidden, rng);
  const l2 = makeLinear(hidden, classes, rng);

  let emaH = 0; // running max of hidden activations
  let emaO = 0; // running max |logit|
  let observed = false;

  const order = new Int32Array(count);
  for (let i = 0; i < count; i++) order[i] = i;

  const x = new Float64Array(inDim);
  const hpre = new Float64Array(hidden);
  const hq = new Float64Array(hidden);
  const logits = new Float64Array(classes);
  const probs = new Float64Array(classes);
  const dlogit = new Float64Array(classes);
  const dhpre = new Float64Array(hidden);
  const gw1 = new Float64Array(l1.w.length);
  const gb1 = new Float64Array(hidden);
  const gw2 = new Float64Array(l2.w.length);
  const gb2 = new Float64Array(classes);

  for (let epoch = 0; epoch < epochs; epoch++) {
    rng.shuffle(order);
    for (let start = 0; start < count; start += batch) {
      const bsz = Math.min(batch, count - start);
      const fq1 = fakeQuantWeights(l1, true);
      const fq2 = fakeQuantWeights(l2, false);
      gw1.fill(0); gb1.fill(0); gw2.fill(0); gb2.fill(0);

      let batchMaxH = 0;
      let batchMaxO = 0;
      // first pass over the batch just to settle the observers
      if (!observed) {
        for (let bi = 0; bi < bsz; bi++) {
          const idx = order[start + bi];
          for (let k = 0; k < inDim; k++) x[k] = pixels[idx * inDim + k] / 255.0;
          for (let j = 0; j < hidden; j++) {
            let a = l1.b[j];
            const base = j * inDim;
            for (let k = 0; k < inDim; k++) a += fq1.fq[base + k] * x[k];
            if (a > batchMaxH) batchMaxH = a;
          }
        }
        emaH = Math.max(batchMaxH, 1e-6);
        emaO = 1.0;
        observed = true;
      }
      const sH = emaH / 127.0;

      for (let bi = 0; bi < bsz; bi++) {
        const idx = order[start + bi];
        const label = labels[idx];
        for (let k = 0; k < inDim; k++) x[k] = pixels[idx * inDim + k] / 255.0;

        for (let j = 0; j < hidden; j++) {
          let a = l1.b[j];
          const base = j * inDim;
          for (let k = 0; k < inDim; k++) a += fq1.fq[base + k] * x[k];
          hpre[j] = a;
          const h = a > 0 ? a : 0;
          if (h > batchMaxH) batchMaxH = h;
          // int8 activation fake-quant, clamped to [0, 127]
          const code = Math.max(0, Math.min(127, roundHalfAway(h / sH)));
          hq[j] = code * sH;
        }

        let maxLogit = -Infinity;
        for (let j = 0; j < classes; j++) {
          let a = l2.b[j];
          const base = j * hidden;
          for (let k = 0; k < hidden; k++) a += fq2.fq[base + k] * hq[k];
          logits[j] = a;
          if (Math.abs(a) > batchMaxO) batchMaxO = Math.abs(a);
          if (a > maxLogit) maxLogit = a;
        }
        let z = 0;
        for (let j = 0; j < classes; j++) {
          probs[j] = Math.exp(logits[j] - maxLogit);
          z += probs[j];
        }
        for (let j = 0; j < classes; j++) {
          dlogit[j] = (probs[j] / z - (j === label ? 1 : 0)) / bsz;
          gb2[j] += dlogit[j];
          const base = j * hidden;
          for (let k = 0; k < hidden; k++) gw2[base + k] += dlogit[j] * hq[k];
        }
        for (let k = 0; k < hidden; k++) {
          let d = 0;
          for (let j = 0; j < classes; j++) d += fq2.fq[j * hidden + k] * dlogit[j];
          // straight-through: block the gradient past the clamp and the relu
          const clipped = hpre[k] > 127 * sH;
          dhpre[k] = hpre[k] > 0 && !clipped ? d : 0;
        }
        for (let j = 0; j < hidden; j++) {
          if (dhpre[j] === 0) continue;
          gb1[j] += dhpre[j];
          const base = j * inDim;
          const d = dhpre[j];
          for (let k = 0; k < inDim; k++) gw1[base + k] += d * x[k];
        }
      }

      sgdStep(l1, gw1, gb1, lr, momentum);
      sgdStep(l2, gw2, gb2, lr, momentum);
      emaH = Math.max(0.99 * emaH, batchMaxH);
      emaO = Math.max(0.99 * emaO, batchMaxO);
    }
    lr *= 0.75;
  }

  const sX = 1 / 255.0;
  const sH = emaH / 127.0;
  const sO = emaO / 127.0;
  const fq1 = fakeQuantWeights(l1, true);
  const fq2 = fakeQuantWeights(l2, false);

  const layer1: LayerJson = {
    in: inDim,
    out: hidden,
    weights: Array.from(fq1.q),
    bias: biasToInt(l1.b, fq1.scales, sX),
    input_scale: sX,
    input_zp: -128,
    requant_scales: requantScales(fq1.scales, hidden, sX, sH),
    output_zp: 0,
    activation: "relu",
  };
  const layer2: LayerJson = {
    in: hidden,
    out: classes,
    weights: Array.from(fq2.q),
    bias: biasToInt(l2.b, fq2.scales, sH),
    input_scale: sH,
    input_zp: 0,
    requant_scales: requantScales(fq2.scales, classes, sH, sO),
    output_zp: 0,
    activation: "none",
  };
  return {
    model: { name: "mnist_qat", task: "classify", layers: [layer1, layer2] },
    hiddenScale: sH,
    outputScale: sO,
  };
}

export interface AeOptions {
  dim?: number;
  hidden?: number;
  nTrain?: number;
  epochs?: number;
  batch?: number;
  lr?: number;
  momentum?: number;
  seed?: number;
  inputScale?: number;
}

/** QAT autoencoder trained on standard-Gaussian normals; anomalies are
 * flagged downstream by reconstruction error. */
export function trainAnomalyAutoencoder(opts: AeOptions = {}): ModelJson {
  const dim = opts.dim ?? 64;
  const hidden = opts.hidden ?? 32;
  const nTrain = opts.nTrain ?? 2000;
  const epochs = opts.epochs ?? 40;
  const batch = opts.batch ?? 32;
  const momentum = opts.momentum ?? 0.9;
  const sIn = opts.inputScale ?? 0.05;
  let lr = opts.lr ?? 0.02;
  const rng = new Rng(opts.seed ?? 11);

  // train targets are the quantize/dequantize image of the input, exactly
  // what the integer pipeline can see
  const data = new Float64Array(nTrain * dim);
  const raw = new Float64Array(dim);
  for (let i = 0; i < nTrain; i++) {
    for (let k = 0; k < dim; k++) raw[k] = rng.gaussian();
    const q = quantizeReal(raw, sIn, 0);
    for (let k = 0; k < dim; k++) data[i * dim + k] = q[k] * sIn;
  }

  const l1 = makeLinear(dim, hidden, rng);
  const l2 = makeLinear(hidden, dim, rng);

  let emaH = 0;
  let emaO = 0;
  let observed = false;

  const order = new Int32Array(nTrain);
  for (let i = 0; i < nTrain; i++) order[i] = i;

  const hpre = new Float64Array(hidden);
  const hq = new Float64Array(hidden);
  const out = new Float64Array(dim);
  const dout = new Float64Array(dim);
  const dhpre = new Float64Array(hidden);
  const gw1 = new Float64Array(l1.w.length);
  const gb1 = new Float64Array(hidden);
  const gw2 = new Float64Array(l2.w.length);
  const gb2 = new Float64Array(dim);

  for (let epoch = 0; epoch < epochs; epoch++) {
    rng.shuffle(order);
    for (let start = 0; start < nTrain; start += batch) {
      const bsz = Math.min(batch, nTrain - start);
      const fq1 = fakeQuantWeights(l1, true);
      const fq2 = fakeQuantWeights(l2, false);
      gw1.fill(0); gb1.fill(0); gw2.fill(0); gb2.fill(0);

      let batchMaxH = 0;
      let batchMaxO = 0;
      if (!observed) {
        emaH = 1.0;
        emaO = 3.0;
        observed = true;
      }
      const sH = emaH / 127.0;

      for (let bi = 0; bi < bsz; bi++) {
        const base = order[start + bi] * dim;
        for (let j = 0; j < hidden; j++) {
          let a = l1.b[j];
          const wb = j * dim;
          for (let k = 0; k < dim; k++) a += fq1.fq[wb + k] * data[base + k];
          hpre[j] = a;
          const h = a > 0 ? a : 0;
          if (h > batchMaxH) batchMaxH = h;
          const code = Math.max(0, Math.min(127, roundHalfAway(h / sH)));
          hq[j] = code * sH;
        }
        for (let j = 0; j < dim; j++) {
          let a = l2.b[j];
          const wb = j * hidden;
          for (let k = 0; k < hidden; k++) a += fq2.fq[wb + k] * hq[k];
          out[j] = a;
          if (Math.abs(a) > batchMaxO) batchMaxO = Math.abs(a);
          dout[j] = (2 * (a - data[base + j])) / (dim * bsz);
          gb2[j] += dout[j];
          for (let k = 0; k < hidden; k++) gw2[wb + k] += dout[j] * hq[k];
        }
        for (let k = 0; k < hidden; k++) {
          let d = 0;
          for (let j = 0; j < dim; j++) d += fq2.fq[j * hidden + k] * dout[j];
          const clipped = hpre[k] > 127 * sH;
          dhpre[k] = hpre[k] > 0 && !clipped ? d : 0;
        }
        for (let j = 0; j < hidden; j++) {
          if (dhpre[j] === 0) continue;
          gb1[j] += dhpre[j];
          const wb = j * dim;
          for (let k = 0; k < dim; k++) gw1[wb + k] += dhpre[j] * data[base + k];
        }
      }

      sgdStep(l1, gw1, gb1, lr, momentum);
      sgdStep(l2, gw2, gb2, lr, momentum);
      emaH = Math.max(0.99 * emaH, batchMaxH);
      emaO = Math.max(0.99 * emaO, batchMaxO);
    }
    lr *= 0.95;
  }

  const sH = emaH / 127.0;
  const sO = emaO / 127.0;
  const fq1 = fakeQuantWeights(l1, true);
  const fq2 = fakeQuantWeights(l2, false);

  const layer1: LayerJson = {
    in: dim,
    out: hidden,
    weights: Array.from(fq1.q),
    bias: biasToInt(l1.b, fq1.scales, sIn),
    input_scale: sIn,
    input_zp: 0,
    requant_scales: requantScales(fq1.scales, hidden, sIn, sH),
    output_zp: 0,
    activation: "relu",
  };
  const layer2: LayerJson = {
    in: hidden,
    out: dim,
    weights: Array.from(fq2.q),
    bias: biasToInt(l2.b, fq2.scales, sH),
    input_scale: sH,
    input_zp: 0,
    requant_scales: requantScales(fq2.scales, dim, sH, sO),
    output_zp: 0,
    activation: "none",
  };
  return {
    name: "synth_ae",
    task: "reconstruct",
    layers: [layer1, layer2],
    output_scale: sO,
  };
}
