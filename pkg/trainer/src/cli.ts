/** CLI: train a policy, emit predictions, or run the variant grid. */

import * as fs from 'node:fs';
import * as tf from '@tensorflow/tfjs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { disposePrepared, loadContainers, prepare } from './data.js';
import { renderGridMarkdown, runVariantGrid, SliceSpec } from './grid.js';
import { predictionsCsv } from './metrics.js';
import { defaultPolicyConfig, loadPolicy, Policy, savePolicy, Variant } from './model.js';
import { defaultTrainConfig, predictAll, trainBc, validationMae } from './train.js';

async function main() {
  await tf.setBackend('cpu');
  await yargs(hideBin(process.argv))
    .command(
      'train',
      'train one policy variant on container directories',
      (y) =>
        y
          .option('variant', { choices: ['rgb', 'event', 'fusion'] as const, demandOption: true })
          .option('train', { type: 'array', demandOption: true })
          .option('val', { type: 'array', demandOption: true })
          .option('out', { type: 'string', demandOption: true })
          .option('seed', { type: 'number', default: 0 })
          .option('epochs', { type: 'number', default: 50 })
          .option('token-dim', { type: 'number', default: 128 })
          .option('include-held', { type: 'boolean', default: false }),
      (argv) => {
        const variant = argv.variant as Variant;
        const needRgb = variant !== 'event';
        const train = prepare(loadContainers(argv.train as string[]), {
          requireRgb: needRgb,
          excludeHeld: !argv.includeHeld,
        });
        const val = prepare(loadContainers(argv.val as string[]), { requireRgb: needRgb });
        const cfg = defaultPolicyConfig(variant, train.height, train.width, argv.seed);
        cfg.tokenDim = argv.tokenDim;
        const policy = new Policy(cfg);
        const record = trainBc(
          policy,
          train,
          val,
          defaultTrainConfig({ maxEpochs: argv.epochs, shuffleSeed: argv.seed }),
        );
        fs.writeFileSync(argv.out, JSON.stringify(savePolicy(policy)));
        const summary = validationMae(policy, val);
        console.log(
          JSON.stringify({
            best_epoch: record.bestEpoch,
            stopped_epoch: record.stoppedEpoch,
            val_mae: summary.total,
            val_linear_mae: summary.linear,
            val_angular_mae: summary.angular,
          }),
        );
        disposePrepared(train);
        disposePrepared(val);
      },
    )
    .command(
      'predict',
      'emit frame,v_pred,w_pred for a container',
      (y) =>
        y
          .option('model', { type: 'string', demandOption: true })
          .option('container', { type: 'array', demandOption: true })
          .option('out', { type: 'string', demandOption: true }),
      (argv) => {
        const policy = loadPolicy(JSON.parse(fs.readFileSync(argv.model, 'utf-8')));
        const data = prepare(loadContainers(argv.container as string[]), {
          requireRgb: policy.needsRgb(),
        });
        const preds = predictAll(policy, data);
        fs.writeFileSync(argv.out, predictionsCsv(data.frames, preds));
        console.log(JSON.stringify({ predictions: preds.length, out: argv.out }));
        disposePrepared(data);
      },
    )
    .command(
      'grid',
      'train the 3-variant x 4-slice grid and emit the table report',
      (y) =>
        y
          .option('config', { type: 'string', demandOption: true })
          .option('out', { type: 'string', demandOption: true })
          .option('epochs', { type: 'number', default: 50 })
          .option('token-dim', { type: 'number', default: 128 })
          .option('seed', { type: 'number', default: 0 }),
      (argv) => {
        const spec = JSON.parse(fs.readFileSync(argv.config, 'utf-8')) as { slices: SliceSpec[] };
        const cells = runVariantGrid(
          spec.slices,
          defaultTrainConfig({ maxEpochs: argv.epochs, shuffleSeed: argv.seed }),
          argv.seed,
          argv.tokenDim,
        );
        fs.writeFileSync(argv.out + '.json', JSON.stringify(cells, null, 2));
        fs.writeFileSync(argv.out + '.md', renderGridMarkdown(cells));
        console.log(renderGridMarkdown(cells));
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync();
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});
