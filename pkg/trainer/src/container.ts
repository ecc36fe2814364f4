/**
 * Minimal reader for the evpipe dataset container (manifest.json + samples.bin).
 *
 * Record layout (little-endian):
 *   frame_index u32 | t_evt u64 | v f32 | w f32 | held u8
 *   | hist u16 x (2*H*W)   channel-major (ON then OFF), row-major
 *   | rgb u8 x (3*H*W)     only when the manifest declares rgb
 *   | crc32 u32            over the preceding record bytes
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { crc32 } from 'node:zlib';

export interface DatasetManifest {
  formatVersion: number;
  episode: Record<string, string>;
  height: number;
  width: number;
  rgbIncluded: boolean;
  split: string;
  labelSource: string;
  sampleCount: number;
  blobCrc32: number;
}

export interface SampleRecord {
  frameIndex: number;
  tEvt: number;
  v: number;
  w: number;
  held: boolean;
  hist: Uint16Array; // [2][H][W]
  rgb: Uint8Array | null; // [H][W][3]
}

const FIXED_HEAD_BYTES = 4 + 8 + 4 + 4 + 1;

export function readManifest(dir: string): DatasetManifest {
  const raw = JSON.parse(fs.readFileSync(path.join(dir, 'manifest.json'), 'utf-8'));
  return {
    formatVersion: raw.format_version,
    episode: raw.episode ?? {},
    height: raw.dims.height,
    width: raw.dims.width,
    rgbIncluded: raw.rgb_included,
    split: raw.split,
    labelSource: raw.label_source,
    sampleCount: raw.sample_count,
    blobCrc32: raw.checksums['samples.bin'],
  };
}

export function recordSize(m: DatasetManifest): number {
  let n = FIXED_HEAD_BYTES + 2 * 2 * m.height * m.width;
  if (m.rgbIncluded) n += 3 * m.height * m.width;
  return n + 4;
}

export function readDataset(dir: string): { manifest: DatasetManifest; records: SampleRecord[] } {
  const manifest = readManifest(dir);
  const blob = fs.readFileSync(path.join(dir, 'samples.bin'));
  const rec = recordSize(manifest);
  if (blob.length % rec !== 0) {
    throw new Error(`blob size ${blob.length} is not a multiple of the ${rec}-byte record`);
  }
  if (blob.length / rec !== manifest.sampleCount) {
    throw new Error(
      `manifest declares ${manifest.sampleCount} records, blob holds ${blob.length / rec}`,
    );
  }
  const records: SampleRecord[] = [];
  const histLen = 2 * manifest.height * manifest.width;
  const rgbLen = 3 * manifest.height * manifest.width;
  for (let i = 0; i < manifest.sampleCount; i++) {
    const base = i * rec;
    const body = blob.subarray(base, base + rec - 4);
    const stored = blob.readUInt32LE(base + rec - 4);
    if ((crc32(body) >>> 0) !== stored) {
      throw new Error(`record ${i} failed its CRC check`);
    }
    let off = base;
    const frameIndex = blob.readUInt32LE(off);
    off += 4;
    const tEvt = Number(blob.readBigUInt64LE(off));
    off += 8;
    const v = blob.readFloatLE(off);
    off += 4;
    const w = blob.readFloatLE(off);
    off += 4;
    const held = blob.readUInt8(off) !== 0;
    off += 1;
    const hist = new Uint16Array(histLen);
    for (let j = 0; j < histLen; j++) hist[j] = blob.readUInt16LE(off + 2 * j);
    off += 2 * histLen;
    let rgb: Uint8Array | null = null;
    if (manifest.rgbIncluded) {
      rgb = new Uint8Array(blob.subarray(off, off + rgbLen));
      off += rgbLen;
    }
    records.push({ frameIndex, tEvt, v, w, held, hist, rgb });
  }
  const blobCrc = crc32(blob) >>> 0;
  if (blobCrc !== manifest.blobCrc32) {
    throw new Error('blob-level CRC does not match manifest');
  }
  return { manifest, records };
}
