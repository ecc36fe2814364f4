/** MAE conventions shared with the pipeline's evaluation module. */

export interface MaeSummary {
  linear: number;
  angular: number;
  total: number; // mean of the two dimensions
  n: number;
}

export function maeOfPairs(
  pred: Array<[number, number]>,
  truth: Array<[number, number]>,
): MaeSummary {
  if (pred.length !== truth.length || pred.length === 0) {
    throw new Error(`length mismatch: ${pred.length} vs ${truth.length}`);
  }
  let dv = 0;
  let dw = 0;
  for (let i = 0; i < pred.length; i++) {
    dv += Math.abs(pred[i][0] - truth[i][0]);
    dw += Math.abs(pred[i][1] - truth[i][1]);
  }
  const linear = dv / pred.length;
  const angular = dw / pred.length;
  return { linear, angular, total: (linear + angular) / 2, n: pred.length };
}

/** `frame,v_pred,w_pred` rows; String() keeps the shortest exact float form. */
export function predictionsCsv(frames: number[], pred: Array<[number, number]>): string {
  const lines = ['frame,v_pred,w_pred'];
  const order = frames.map((f, i) => [f, i] as const).sort((a, b) => a[0] - b[0]);
  for (const [frame, i] of order) {
    lines.push(`${frame},${pred[i][0]},${pred[i][1]}`);
  }
  return lines.join('\n') + '\n';
}
