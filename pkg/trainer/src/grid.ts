/** The 3 variants x 4 dataset slices grid and its table report. */

import { loadContainers, prepare, PreparedData, disposePrepared } from './data.js';
import { maeOfPairs } from './metrics.js';
import { defaultPolicyConfig, Policy, Variant } from './model.js';
import { defaultTrainConfig, TrainConfig, trainBc } from './train.js';

export interface SliceSpec {
  name: string;
  train: string[];
  val: string[];
}

export interface GridCell {
  variation: string;
  modal: Variant;
  trainedEpochs: number;
  bestEpoch: number;
  mae: number;
}

export const VARIANTS: Variant[] = ['rgb', 'event', 'fusion'];

function prepareSlice(dirs: string[], needRgb: boolean, excludeHeld: boolean): PreparedData {
  return prepare(loadContainers(dirs), { requireRgb: needRgb, excludeHeld });
}

export function runVariantGrid(
  slices: SliceSpec[],
  trainCfg: TrainConfig = defaultTrainConfig(),
  seed = 0,
  tokenDim = 128,
): GridCell[] {
  if (slices.length === 0) throw new Error('missing slice: no dataset slices given');
  const cells: GridCell[] = [];
  for (const slice of slices) {
    for (const variant of VARIANTS) {
      const needRgb = variant !== 'event';
      const train = prepareSlice(slice.train, needRgb, true);
      const val = prepareSlice(slice.val, needRgb, false);
      const cfg = defaultPolicyConfig(variant, train.height, train.width, seed);
      cfg.tokenDim = tokenDim;
      const policy = new Policy(cfg);
      const record = trainBc(policy, train, val, trainCfg);
      cells.push({
        variation: slice.name,
        modal: variant,
        trainedEpochs: record.stoppedEpoch,
        bestEpoch: record.bestEpoch,
        mae: record.bestValMae,
      });
      disposePrepared(train);
      disposePrepared(val);
    }
  }
  return cells;
}

export function renderGridMarkdown(cells: GridCell[]): string {
  const lines = [
    '| Variation | Modal | Train* | Best | MAE |',
    '|-----------|-------|--------|------|-----|',
  ];
  for (const c of cells) {
    lines.push(
      `| ${c.variation} | ${c.modal} | ${c.trainedEpochs} | ${c.bestEpoch} | ${c.mae.toFixed(4)} |`,
    );
  }
  return lines.join('\n') + '\n';
}
