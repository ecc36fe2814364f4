/** Container records to training tensors, with the event normalization. */

import * as tf from '@tensorflow/tfjs';

import { DatasetManifest, SampleRecord, readDataset } from './container.js';

export interface PreparedData {
  count: number;
  height: number;
  width: number;
  frames: number[];
  truth: Array<[number, number]>;
  xEvent: tf.Tensor4D;
  xRgb: tf.Tensor4D | null;
  y: tf.Tensor2D;
}

export interface PrepareOptions {
  excludeHeld?: boolean; // training-set concern; keep everything for val/test
  requireRgb?: boolean;
}

/** Per-sample event normalization: log1p(count) / log1p(max count in sample). */
export function normalizeHist(hist: Uint16Array, height: number, width: number): Float32Array {
  const hw = height * width;
  let max = 0;
  for (let i = 0; i < hist.length; i++) if (hist[i] > max) max = hist[i];
  const denom = Math.log1p(Math.max(max, 1));
  const out = new Float32Array(hw * 2); // HWC
  for (let c = 0; c < 2; c++) {
    for (let p = 0; p < hw; p++) {
      out[p * 2 + c] = Math.log1p(hist[c * hw + p]) / denom;
    }
  }
  return out;
}

export function loadContainers(dirs: string[]) {
  return dirs.map((d) => readDataset(d));
}

export function prepare(
  bundles: Array<{ manifest: DatasetManifest; records: SampleRecord[] }>,
  opts: PrepareOptions = {},
): PreparedData {
  if (bundles.length === 0) throw new Error('degenerate split: no containers given');
  const { height, width } = bundles[0].manifest;
  for (const b of bundles) {
    if (b.manifest.height !== height || b.manifest.width !== width) {
      throw new Error('shape mismatch: containers disagree on dims');
    }
    if (opts.requireRgb && !b.manifest.rgbIncluded) {
      throw new Error('missing modality: variant needs rgb but container has none');
    }
  }
  const picked: Array<{ rec: SampleRecord; rgb: boolean }> = [];
  for (const b of bundles) {
    for (const rec of b.records) {
      if (opts.excludeHeld && rec.held) continue;
      picked.push({ rec, rgb: b.manifest.rgbIncluded });
    }
  }
  if (picked.length === 0) throw new Error('degenerate split: no usable samples');

  const hw = height * width;
  const ev = new Float32Array(picked.length * hw * 2);
  const useRgb = opts.requireRgb === true;
  const rgbArr = useRgb ? new Float32Array(picked.length * hw * 3) : null;
  const y = new Float32Array(picked.length * 2);
  const frames: number[] = [];
  const truth: Array<[number, number]> = [];
  picked.forEach(({ rec }, i) => {
    ev.set(normalizeHist(rec.hist, height, width), i * hw * 2);
    if (rgbArr && rec.rgb) {
      const base = i * hw * 3;
      for (let j = 0; j < hw * 3; j++) rgbArr[base + j] = rec.rgb[j] / 255;
    }
    y[2 * i] = rec.v;
    y[2 * i + 1] = rec.w;
    frames.push(rec.frameIndex);
    truth.push([rec.v, rec.w]);
  });
  return {
    count: picked.length,
    height,
    width,
    frames,
    truth,
    xEvent: tf.tensor4d(ev, [picked.length, height, width, 2]),
    xRgb: rgbArr ? tf.tensor4d(rgbArr, [picked.length, height, width, 3]) : null,
    y: tf.tensor2d(y, [picked.length, 2]),
  };
}

export function disposePrepared(d: PreparedData) {
  d.xEvent.dispose();
  d.xRgb?.dispose();
  d.y.dispose();
}
