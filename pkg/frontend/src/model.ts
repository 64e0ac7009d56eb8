/** Model JSON schema shared with the simulator, plus a strict serializer. */

import { writeFileSync } from "node:fs";

export interface LayerJson {
  in: number;
  out: number;
  weights: number[]; // out-major row-major, signed 4-bit [-8, 7]
  bias: number[]; // int32 per output channel
  input_scale: number;
  input_zp: number;
  requant_scales: number[];
  output_zp: number;
  activation: "none" | "relu";
}

export interface ModelJson {
  name: string;
  task: "classify" | "reconstruct";
  layers: LayerJson[];
  output_scale?: number;
  on_chip_layer?: number;
}

export function validateModel(model: ModelJson): void {
  if (model.layers.length === 0) throw new Error("model has no layers");
  for (let i = 0; i < model.layers.length; i++) {
    const l = model.layers[i];
    if (l.weights.length !== l.in * l.out) {
      throw new Error(`layers[${i}]: weight count mismatch`);
    }
    for (const w of l.weights) {
      if (!Number.isInteger(w) || w < -8 || w > 7) {
        throw new Error(`layers[${i}]: weight ${w} outside [-8, 7]`);
      }
    }
    if (l.bias.length !== l.out || l.requant_scales.length !== l.out) {
      throw new Error(`layers[${i}]: per-channel array length mismatch`);
    }
    for (const s of l.requant_scales) {
      if (!(s > 0)) throw new Error(`layers[${i}]: non-positive requant scale`);
    }
    if (i > 0 && model.layers[i - 1].out !== l.in) {
      throw new Error(`layers[${i}]: in dim does not match previous out dim`);
    }
  }
  if (model.task === "reconstruct") {
    const first = model.layers[0];
    const last = model.layers[model.layers.length - 1];
    if (last.out !== first.in) {
      throw new Error("reconstruct model must map back to its input dim");
    }
    if (model.output_scale === undefined) {
      throw new Error("reconstruct model must declare output_scale");
    }
  }
}

export function saveModel(model: ModelJson, path: string): void {
  validateModel(model);
  writeFileSync(path, JSON.stringify(model));
}
