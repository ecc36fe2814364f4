import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { loadContainers, prepare, PrepareOptions, PreparedData } from '../src/data.js';

const here = path.dirname(fileURLToPath(import.meta.url));
export const FIXTURES = path.join(here, 'fixtures');

export function containerDir(name: string): string {
  return path.join(FIXTURES, name, 'dataset');
}

export function prepared(names: string[], opts: PrepareOptions = {}): PreparedData {
  return prepare(loadContainers(names.map(containerDir)), opts);
}

/** The 64 post-ramp samples of the overfit fixture. */
export function overfitSlice(): PreparedData {
  const bundles = loadContainers([containerDir('overfit64')]);
  bundles[0].records = bundles[0].records.slice(32, 96);
  return prepare(bundles, { requireRgb: true });
}
