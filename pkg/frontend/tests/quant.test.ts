import { describe, expect, it } from "vitest";
import {
  argmax,
  quantizeReal,
  referenceForward,
  referenceLayer,
  requantize,
  roundHalfAway,
} from "../src/quant.js";
import { LayerJson, ModelJson, validateModel } from "../src/model.js";

describe("roundHalfAway", () => {
  it.each([
    [0.5, 1],
    [-0.5, -1],
    [1.5, 2],
    [-1.5, -2],
    [2.4, 2],
    [-2.4, -2],
    [0, 0],
  ])("rounds %f to %i", (x, want) => {
    expect(roundHalfAway(x)).toBe(want);
  });
});

describe("requantize", () => {
  it("applies zero point after scaling", () => {
    expect(requantize(100, 0.1, 5)).toBe(15);
  });
  it("clamps to int8", () => {
    expect(requantize(100000, 1.0, 0)).toBe(127);
    expect(requantize(-100000, 1.0, 0)).toBe(-128);
  });
  it("rejects non-positive scales", () => {
    expect(() => requantize(1, 0, 0)).toThrow();
  });
});

const layer: LayerJson = {
  in: 3,
  out: 2,
  weights: [1, -2, 3, 0, 4, -1],
  bias: [10, -10],
  input_scale: 1.0,
  input_zp: 1,
  requant_scales: [0.5, 0.5],
  output_zp: 0,
  activation: "none",
};

describe("referenceLayer", () => {
  it("matches a hand-computed example", () => {
    // x - zp = [1, 2, 3]; accs = [10+1-4+9, -10+0+8-3] = [16, -5]
    const out = referenceLayer(layer, Int8Array.from([2, 3, 4]));
    expect(Array.from(out)).toEqual([8, -3]);
  });
  it("relu floors at the output zero point", () => {
    const relu = { ...layer, activation: "relu" as const, output_zp: 3 };
    // accs scale to [11, 0] after the zero point; relu floors at zp = 3
    const out = referenceLayer(relu, Int8Array.from([2, 3, 4]));
    expect(Array.from(out)).toEqual([11, 3]);
  });
  it("rejects dimension mismatch", () => {
    expect(() => referenceLayer(layer, Int8Array.from([1, 2]))).toThrow();
  });
});

describe("referenceForward", () => {
  it("chains layers through int8", () => {
    const model: ModelJson = {
      name: "t",
      task: "classify",
      layers: [
        layer,
        {
          in: 2,
          out: 2,
          weights: [1, 0, 0, 1],
          bias: [0, 0],
          input_scale: 0.5,
          input_zp: 0,
          requant_scales: [1.0, 1.0],
          output_zp: 0,
          activation: "none",
        },
      ],
    };
    validateModel(model);
    const out = referenceForward(model, Int8Array.from([2, 3, 4]));
    expect(Array.from(out)).toEqual([8, -3]);
    expect(argmax(out)).toBe(0);
  });
});

describe("quantizeReal", () => {
  it("rounds half away and clips", () => {
    const q = quantizeReal(Float64Array.from([0.025, -0.025, 100, -100]), 0.05, 0);
    expect(Array.from(q)).toEqual([1, -1, 127, -128]);
  });
});
