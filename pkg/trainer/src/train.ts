/**
 * Behavioral-cloning loop: L1 loss, adam with decoupled weight decay,
 * early stopping on validation MAE with best-checkpoint restore.
 */

import * as tf from '@tensorflow/tfjs';

import { PreparedData } from './data.js';
import { MaeSummary, maeOfPairs } from './metrics.js';
import { ForwardInput, Policy } from './model.js';

export interface TrainConfig {
  lr: number;
  lrDecay: number; // per-epoch multiplicative decay, 1.0 = constant
  weightDecay: number;
  batchSize: number;
  maxEpochs: number;
  patience: number;
  shuffleSeed: number;
}

export const defaultTrainConfig = (overrides: Partial<TrainConfig> = {}): TrainConfig => ({
  lr: 2e-4,
  lrDecay: 1.0,
  weightDecay: 3e-4,
  batchSize: 64,
  maxEpochs: 50,
  patience: 8,
  shuffleSeed: 0,
  ...overrides,
});

export interface TrainRecord {
  trainLoss: number[];
  valMae: number[];
  bestEpoch: number;
  stoppedEpoch: number;
  bestValMae: number;
}

function mulberry32(seed: number) {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): number[] {
  const idx = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [idx[i], idx[j]] = [idx[j], idx[i]];
  }
  return idx;
}

function gatherInput(policy: Policy, data: PreparedData, idx: tf.Tensor1D): ForwardInput {
  const input: ForwardInput = {};
  if (policy.needsEvent()) input.event = tf.gather(data.xEvent, idx) as tf.Tensor4D;
  if (policy.needsRgb()) {
    if (!data.xRgb) throw new Error('missing modality: data has no rgb tensors');
    input.rgb = tf.gather(data.xRgb, idx) as tf.Tensor4D;
  }
  return input;
}

export function predictAll(policy: Policy, data: PreparedData, batchSize = 256): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let start = 0; start < data.count; start += batchSize) {
    const n = Math.min(batchSize, data.count - start);
    const values = tf.tidy(() => {
      const idx = tf.range(start, start + n, 1, 'int32') as tf.Tensor1D;
      const { pred } = policy.forward(gatherInput(policy, data, idx));
      return pred.dataSync();
    });
    for (let i = 0; i < n; i++) out.push([values[2 * i], values[2 * i + 1]]);
  }
  return out;
}

export function validationMae(policy: Policy, data: PreparedData): MaeSummary {
  return maeOfPairs(predictAll(policy, data), data.truth);
}

export function trainBc(
  policy: Policy,
  train: PreparedData,
  val: PreparedData,
  cfg: TrainConfig,
): TrainRecord {
  const optimizer = tf.train.adam(cfg.lr);
  const trainables = policy.trainables();
  const decayed = trainables.filter((v) => v.name.includes('kernel'));
  const record: TrainRecord = {
    trainLoss: [],
    valMae: [],
    bestEpoch: 0,
    stoppedEpoch: 0,
    bestValMae: Infinity,
  };
  let bestWeights: Float32Array[] | null = null;

  for (let epoch = 1; epoch <= cfg.maxEpochs; epoch++) {
    const lrEpoch = cfg.lr * Math.pow(cfg.lrDecay, epoch - 1);
    (optimizer as unknown as { learningRate: number }).learningRate = lrEpoch;
    const rand = mulberry32(cfg.shuffleSeed * 7919 + epoch);
    const order = shuffled(train.count, rand);
    let lossSum = 0;
    let batches = 0;
    for (let start = 0; start < train.count; start += cfg.batchSize) {
      const slice = order.slice(start, start + cfg.batchSize);
      const lossVal = tf.tidy(() => {
        const idx = tf.tensor1d(slice, 'int32');
        const input = gatherInput(policy, train, idx);
        const target = tf.gather(train.y, idx);
        const { grads, value } = tf.variableGrads(
          () => tf.mean(tf.abs(tf.sub(policy.forward(input).pred, target))) as tf.Scalar,
          trainables,
        );
        optimizer.applyGradients(grads as unknown as { [name: string]: tf.Variable });
        // decoupled weight decay on kernels only, coupled to the lr schedule
        if (cfg.weightDecay > 0) {
          for (const v of decayed) v.assign(tf.mul(v, 1 - lrEpoch * cfg.weightDecay));
        }
        return value.dataSync()[0];
      });
      lossSum += lossVal;
      batches += 1;
    }
    record.trainLoss.push(lossSum / batches);

    const valSummary = validationMae(policy, val);
    record.valMae.push(valSummary.total);
    if (valSummary.total < record.bestValMae) {
      record.bestValMae = valSummary.total;
      record.bestEpoch = epoch;
      bestWeights = trainables.map((v) => new Float32Array(v.dataSync() as Float32Array));
    }
    record.stoppedEpoch = epoch;
    if (epoch - record.bestEpoch >= cfg.patience) break;
  }

  if (bestWeights) {
    trainables.forEach((v, i) => {
      const t = tf.tensor(bestWeights![i], v.shape as number[]);
      v.assign(t as tf.Tensor);
      t.dispose();
    });
  }
  optimizer.dispose();
  return record;
}
