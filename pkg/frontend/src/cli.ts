/** Exporter command line: train a QAT model, save the model JSON, and write
 * an evaluation report computed with the integer reference arithmetic. */

import { writeFileSync } from "node:fs";
import { join } from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { readIdxImages, readIdxLabels } from "./idx.js";
import { saveModel, ModelJson } from "./model.js";
import { referenceForward, argmax, quantizeReal } from "./quant.js";
import { accuracy, aucPairwise } from "./metrics.js";
import { trainMnistMlp, trainAnomalyAutoencoder } from "./train.js";
import { Rng } from "./rng.js";

interface TrainArgs {
  dataset: string;
  dataDir: string;
  out: string;
  evalOut?: string;
  seed: number;
  epochs?: number;
}

function evalMnist(model: ModelJson, dataDir: string) {
  const images = readIdxImages(join(dataDir, "test-images-idx3-ubyte"));
  const labels = readIdxLabels(join(dataDir, "test-labels-idx1-ubyte"));
  const dim = images.rows * images.cols;
  const predictions: number[] = [];
  const sample = new Int8Array(dim);
  for (let i = 0; i < images.count; i++) {
    for (let k = 0; k < dim; k++) sample[k] = images.pixels[i * dim + k] - 128;
    predictions.push(argmax(referenceForward(model, sample)));
  }
  return {
    dataset: "mnist-test",
    n: images.count,
    accuracy: accuracy(predictions, labels),
    predictions,
  };
}

function evalAutoencoder(model: ModelJson, seed: number) {
  const dim = model.layers[0].in;
  const sIn = model.layers[0].input_scale;
  const sOut = model.output_scale!;
  const nNormal = 400;
  const nAnomaly = 100;
  const shift = 2.0;
  const rng = new Rng(seed);
  const scores: number[] = [];
  const labels: number[] = [];
  const raw = new Float64Array(dim);
  for (let i = 0; i < nNormal + nAnomaly; i++) {
    const anomalous = i >= nNormal;
    for (let k = 0; k < dim; k++) {
      raw[k] = rng.gaussian() + (anomalous && k < dim / 2 ? shift : 0);
    }
    const q = quantizeReal(raw, sIn, 0);
    const recon = referenceForward(model, q);
    let mse = 0;
    for (let k = 0; k < dim; k++) {
      const diff = recon[k] * sOut - q[k] * sIn;
      mse += diff * diff;
    }
    scores.push(mse / dim);
    labels.push(anomalous ? 1 : 0);
  }
  return {
    dataset: "synthetic-anomaly",
    n: scores.length,
    auc: aucPairwise(scores, labels),
  };
}

export async function main(argv: string[]): Promise<void> {
  await yargs(argv)
    .command<TrainArgs>(
      "train",
      "train a model and export it as simulator JSON",
      (y) =>
        y
          .option("dataset", { choices: ["mnist", "synth-ae"] as const, demandOption: true })
          .option("data-dir", { type: "string", default: join("..", "data", "mnist") })
          .option("out", { type: "string", demandOption: true })
          .option("eval-out", { type: "string" })
          .option("seed", { type: "number", default: 7 })
          .option("epochs", { type: "number" }),
      (args) => {
        if (args.dataset === "mnist") {
          const images = readIdxImages(join(args.dataDir, "train-images-idx3-ubyte"));
          const labels = readIdxLabels(join(args.dataDir, "train-labels-idx1-ubyte"));
          const trained = trainMnistMlp(images.pixels, labels, images.count, {
            seed: args.seed,
            epochs: args.epochs,
          });
          saveModel(trained.model, args.out);
          const report = evalMnist(trained.model, args.dataDir);
          console.log(`test accuracy: ${(report.accuracy * 100).toFixed(2)}% (n=${report.n})`);
          if (args.evalOut) writeFileSync(args.evalOut, JSON.stringify(report));
        } else {
          const model = trainAnomalyAutoencoder({
            seed: args.seed,
            epochs: args.epochs,
          });
          saveModel(model, args.out);
          const report = evalAutoencoder(model, args.seed + 1);
          console.log(`anomaly AUC: ${report.auc.toFixed(4)} (n=${report.n})`);
          if (args.evalOut) writeFileSync(args.evalOut, JSON.stringify(report));
        }
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync();
}

const isDirect =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() as string);
if (isDirect) {
  main(hideBin(process.argv)).catch((err) => {
    console.error(err instanceof Error ? err.message : err);
    process.exit(1);
  });
}
