/**
 * Trainer acceptance: overfit sanity, frozen-branch equality, exact early
 * stopping, and numeric consistency with the pipeline's own eval command.
 */

import { execSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as path from 'node:path';

import { beforeAll, describe, expect, it } from 'vitest';
import * as tf from '@tensorflow/tfjs';

import { predictionsCsv } from '../src/metrics.js';
import { defaultPolicyConfig, Policy } from '../src/model.js';
import { defaultTrainConfig, predictAll, trainBc, validationMae } from '../src/train.js';
import { containerDir, FIXTURES, overfitSlice, prepared } from './helpers.js';

beforeAll(async () => {
  await tf.setBackend('cpu');
});

function pass(name: string, detail = '') {
  console.log(`[PASS] ${name}${detail ? `  (${detail})` : ''}`);
}

describe('trainer acceptance', () => {
  it('fusion overfits the 64-sample slice below 0.02 train MAE within 200 epochs', () => {
    const data = overfitSlice();
    expect(data.count).toBe(64);
    const cfg = defaultPolicyConfig('fusion', data.height, data.width, 42);
    cfg.tokenDim = 64;
    const policy = new Policy(cfg);
    const frozenBefore = policy.rgbWeightData();
    // 120-epoch budget: the reference run crossed 0.02 at epoch 42
    const rec = trainBc(
      policy,
      data,
      data,
      defaultTrainConfig({ maxEpochs: 120, patience: 200, lr: 3e-3, lrDecay: 0.99 }),
    );
    const best = Math.min(...rec.trainLoss);
    const crossed = rec.trainLoss.findIndex((x) => x < 0.02) + 1;
    expect(best).toBeLessThan(0.02);
    expect(crossed).toBeLessThanOrEqual(200);

    // frozen contract: the rgb encoder is bitwise untouched by training
    const frozenAfter = policy.rgbWeightData();
    expect(frozenAfter.length).toBe(frozenBefore.length);
    for (let i = 0; i < frozenBefore.length; i++) {
      expect(Array.from(frozenAfter[i])).toEqual(Array.from(frozenBefore[i]));
    }
    pass('overfit sanity', `train MAE ${best.toFixed(4)} (<0.02 at epoch ${crossed}), frozen rgb bitwise equal`);
  });

  it('early stopping fires at best_epoch + 8 on a plateaued run', () => {
    const data = prepared(['p1_normal_a'], { requireRgb: true });
    const cfg = defaultPolicyConfig('fusion', data.height, data.width, 1);
    cfg.tokenDim = 16;
    const rec = trainBc(
      new Policy(cfg),
      data,
      data,
      defaultTrainConfig({ maxEpochs: 50, patience: 8, lr: 0 }),
    );
    expect(rec.bestEpoch).toBe(1);
    expect(rec.stoppedEpoch).toBe(rec.bestEpoch + 8);
    pass('early stopping', `stopped at epoch ${rec.stoppedEpoch} = best ${rec.bestEpoch} + 8`);
  });

  it('trainer validation MAE equals pipeline eval within 1e-6', () => {
    const train = prepared(['p1_normal_a'], { requireRgb: true, excludeHeld: true });
    const val = prepared(['p1_normal_b'], { requireRgb: true });
    const cfg = defaultPolicyConfig('fusion', train.height, train.width, 5);
    cfg.tokenDim = 32;
    const policy = new Policy(cfg);
    trainBc(policy, train, val, defaultTrainConfig({ maxEpochs: 5, patience: 10, lr: 1e-3 }));

    const reported = validationMae(policy, val);
    const csvPath = path.join(FIXTURES, 'cross_preds.csv');
    fs.writeFileSync(csvPath, predictionsCsv(val.frames, predictAll(policy, val)));
    const out = execSync(
      `evpipe --json eval --predictions ${csvPath} ` +
        `--container ${containerDir('p1_normal_b')} --group-by lighting`,
      { encoding: 'utf-8' },
    );
    const rows = JSON.parse(out).rows as Array<Record<string, number>>;
    expect(rows.length).toBe(1);
    expect(Math.abs(rows[0].raw_total_mae - reported.total)).toBeLessThan(1e-6);
    expect(Math.abs(rows[0].raw_linear_mae - reported.linear)).toBeLessThan(1e-6);
    expect(Math.abs(rows[0].raw_angular_mae - reported.angular)).toBeLessThan(1e-6);
    pass(
      'cross-component consistency',
      `trainer ${reported.total.toFixed(8)} vs eval ${rows[0].raw_total_mae.toFixed(8)}`,
    );
  });

  it('inference is deterministic for identical inputs', () => {
    const val = prepared(['p1_low_a'], { requireRgb: true });
    const cfg = defaultPolicyConfig('fusion', val.height, val.width, 6);
    cfg.tokenDim = 16;
    const policy = new Policy(cfg);
    const a = predictAll(policy, val);
    const b = predictAll(policy, val);
    expect(a).toEqual(b);
    pass('inference determinism');
  });
});
