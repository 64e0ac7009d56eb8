/** Evaluation metrics for the exporter's own reporting. */

export function accuracy(predictions: number[], labels: ArrayLike<number>): number {
  if (predictions.length === 0) throw new Error("empty prediction set");
  let hit = 0;
  for (let i = 0; i < predictions.length; i++) {
    if (predictions[i] === labels[i]) hit++;
  }
  return hit / predictions.length;
}

/** Pairwise Mann-Whitney AUC; ties count half. Fine for desk-scale sets. */
export function aucPairwise(scores: number[], labels: ArrayLike<number>): number {
  const pos: number[] = [];
  const neg: number[] = [];
  for (let i = 0; i < scores.length; i++) {
    (labels[i] ? pos : neg).push(scores[i]);
  }
  if (pos.length === 0 || neg.length === 0) {
    throw new Error("AUC needs both classes present");
  }
  let wins = 0;
  for (const p of pos) {
    for (const n of neg) {
      if (p > n) wins += 1;
      else if (p === n) wins += 0.5;
    }
  }
  return wins / (pos.length * neg.length);
}
