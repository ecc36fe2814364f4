/**
 * Policy family: frozen-RGB encoder, trainable event encoder, transformer
 * fusion over the 2-token sequence, and an MLP head emitting (v, w).
 */

import * as tf from '@tensorflow/tfjs';

export type Variant = 'rgb' | 'event' | 'fusion';

export interface PolicyConfig {
  variant: Variant;
  height: number;
  width: number;
  tokenDim: number;
  headHidden: number;
  attnHeads: number;
  seed: number;
}

export const defaultPolicyConfig = (
  variant: Variant,
  height = 180,
  width = 320,
  seed = 0,
): PolicyConfig => ({
  variant,
  height,
  width,
  tokenDim: 128,
  headHidden: 64,
  attnHeads: 4,
  seed,
});

function glorot(seed: number) {
  return tf.initializers.glorotUniform({ seed });
}

/** Small convolutional encoder standing in for a mobile backbone. */
function buildEncoder(
  name: string,
  channels: number,
  cfg: PolicyConfig,
  trainable: boolean,
  seedBase: number,
): tf.Sequential {
  const m = tf.sequential({ name });
  m.add(
    tf.layers.conv2d({
      inputShape: [cfg.height, cfg.width, channels],
      filters: 8,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: glorot(seedBase + 1),
    }),
  );
  m.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: glorot(seedBase + 2),
    }),
  );
  m.add(
    tf.layers.conv2d({
      filters: 32,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: glorot(seedBase + 3),
    }),
  );
  // flatten (not pooled) so the token keeps coarse spatial layout; at desk
  // scale the target's column position is the dominant control signal
  m.add(tf.layers.flatten());
  m.add(tf.layers.dense({ units: cfg.tokenDim, kernelInitializer: glorot(seedBase + 4) }));
  m.trainable = trainable;
  return m;
}

/** One transformer encoder layer specialized to the 2-token sequence. */
export class TwoTokenFusion {
  readonly heads: number;
  readonly dim: number;
  private wq: tf.layers.Layer;
  private wk: tf.layers.Layer;
  private wv: tf.layers.Layer;
  private wo: tf.layers.Layer;
  private ln1: tf.layers.Layer;
  private ln2: tf.layers.Layer;
  private ffn1: tf.layers.Layer;
  private ffn2: tf.layers.Layer;

  constructor(tokenDim: number, heads: number, seedBase: number) {
    if (tokenDim % heads !== 0) throw new Error('tokenDim must divide by attnHeads');
    this.heads = heads;
    this.dim = tokenDim;
    this.wq = tf.layers.dense({ units: tokenDim, kernelInitializer: glorot(seedBase + 1) });
    this.wk = tf.layers.dense({ units: tokenDim, kernelInitializer: glorot(seedBase + 2) });
    this.wv = tf.layers.dense({ units: tokenDim, kernelInitializer: glorot(seedBase + 3) });
    this.wo = tf.layers.dense({ units: tokenDim, kernelInitializer: glorot(seedBase + 4) });
    this.ln1 = tf.layers.layerNormalization({});
    this.ln2 = tf.layers.layerNormalization({});
    this.ffn1 = tf.layers.dense({
      units: 2 * tokenDim,
      activation: 'relu',
      kernelInitializer: glorot(seedBase + 5),
    });
    this.ffn2 = tf.layers.dense({ units: tokenDim, kernelInitializer: glorot(seedBase + 6) });
  }

  /** tokens [B, 2, D] -> { out [B, 2, D], attn [B, heads, 2, 2] } */
  apply(tokens: tf.Tensor3D): { out: tf.Tensor3D; attn: tf.Tensor4D } {
    const b = tokens.shape[0];
    const dk = this.dim / this.heads;
    const split = (t: tf.Tensor) =>
      t.reshape([b, 2, this.heads, dk]).transpose([0, 2, 1, 3]); // [B,h,2,dk]
    const q = split(this.wq.apply(tokens) as tf.Tensor);
    const k = split(this.wk.apply(tokens) as tf.Tensor);
    const v = split(this.wv.apply(tokens) as tf.Tensor);
    const scores = tf.matMul(q, k, false, true).div(Math.sqrt(dk));
    const attn = tf.softmax(scores, -1) as tf.Tensor4D;
    const ctx = tf
      .matMul(attn, v)
      .transpose([0, 2, 1, 3])
      .reshape([b, 2, this.dim]);
    const mixed = this.wo.apply(ctx) as tf.Tensor;
    const res1 = this.ln1.apply(tokens.add(mixed)) as tf.Tensor;
    const ff = this.ffn2.apply(this.ffn1.apply(res1) as tf.Tensor) as tf.Tensor;
    const out = this.ln2.apply(res1.add(ff)) as tf.Tensor3D;
    return { out, attn };
  }

  layers(): tf.layers.Layer[] {
    return [this.wq, this.wk, this.wv, this.wo, this.ln1, this.ln2, this.ffn1, this.ffn2];
  }
}

export interface ForwardInput {
  event?: tf.Tensor4D;
  rgb?: tf.Tensor4D;
}

export class Policy {
  readonly cfg: PolicyConfig;
  readonly rgbEncoder: tf.Sequential | null;
  readonly eventEncoder: tf.Sequential | null;
  readonly fusion: TwoTokenFusion | null;
  private headHidden: tf.layers.Layer;
  private headOut: tf.layers.Layer;

  constructor(cfg: PolicyConfig) {
    this.cfg = cfg;
    const useRgb = cfg.variant !== 'event';
    const useEvent = cfg.variant !== 'rgb';
    // the RGB branch stays frozen; only the event branch learns features
    this.rgbEncoder = useRgb ? buildEncoder('rgb_encoder', 3, cfg, false, cfg.seed + 100) : null;
    this.eventEncoder = useEvent
      ? buildEncoder('event_encoder', 2, cfg, true, cfg.seed + 200)
      : null;
    this.fusion =
      cfg.variant === 'fusion'
        ? new TwoTokenFusion(cfg.tokenDim, cfg.attnHeads, cfg.seed + 300)
        : null;
    this.headHidden = tf.layers.dense({
      units: cfg.headHidden,
      activation: 'relu',
      kernelInitializer: glorot(cfg.seed + 401),
    });
    this.headOut = tf.layers.dense({ units: 2, kernelInitializer: glorot(cfg.seed + 402) });
    this.warmBuild();
  }

  private warmBuild() {
    tf.tidy(() => {
      const dummy: ForwardInput = {};
      if (this.eventEncoder) {
        dummy.event = tf.zeros([1, this.cfg.height, this.cfg.width, 2]);
      }
      if (this.rgbEncoder) {
        dummy.rgb = tf.zeros([1, this.cfg.height, this.cfg.width, 3]);
      }
      this.forward(dummy);
    });
  }

  forward(input: ForwardInput, withAttn = false): { pred: tf.Tensor2D; attn: tf.Tensor4D | null } {
    let fused: tf.Tensor;
    let attn: tf.Tensor4D | null = null;
    if (this.cfg.variant === 'rgb') {
      if (!input.rgb) throw new Error('missing modality: rgb input required');
      fused = this.rgbEncoder!.apply(input.rgb) as tf.Tensor;
    } else if (this.cfg.variant === 'event') {
      if (!input.event) throw new Error('missing modality: event input required');
      fused = this.eventEncoder!.apply(input.event) as tf.Tensor;
    } else {
      if (!input.rgb || !input.event) {
        throw new Error('missing modality: fusion needs rgb and event inputs');
      }
      const tokRgb = this.rgbEncoder!.apply(input.rgb) as tf.Tensor2D;
      const tokEvent = this.eventEncoder!.apply(input.event) as tf.Tensor2D;
      const tokens = tf.stack([tokRgb, tokEvent], 1) as tf.Tensor3D; // [B,2,D]
      const out = this.fusion!.apply(tokens);
      attn = withAttn ? out.attn : null;
      fused = out.out.reshape([tokens.shape[0], 2 * this.cfg.tokenDim]);
    }
    const hidden = this.headHidden.apply(fused) as tf.Tensor;
    const pred = this.headOut.apply(hidden) as tf.Tensor2D;
    return { pred, attn };
  }

  needsRgb(): boolean {
    return this.cfg.variant !== 'event';
  }

  needsEvent(): boolean {
    return this.cfg.variant !== 'rgb';
  }

  /** Trainable variables only; the frozen RGB branch never appears here. */
  trainables(): tf.Variable[] {
    const vars: tf.Variable[] = [];
    const collect = (layers: tf.layers.Layer[]) => {
      for (const layer of layers) {
        for (const w of layer.trainableWeights) {
          vars.push((w as unknown as { val: tf.Variable }).val);
        }
      }
    };
    if (this.eventEncoder) collect(this.eventEncoder.layers);
    if (this.fusion) collect(this.fusion.layers());
    collect([this.headHidden, this.headOut]);
    return vars;
  }

  /** Bitwise snapshot of the RGB encoder parameters (frozen-branch check). */
  rgbWeightData(): Float32Array[] {
    if (!this.rgbEncoder) return [];
    return this.rgbEncoder.getWeights().map((w) => new Float32Array(w.dataSync() as Float32Array));
  }

  allComponents(): Array<{ name: string; layers: tf.layers.Layer[] }> {
    const parts: Array<{ name: string; layers: tf.layers.Layer[] }> = [];
    if (this.rgbEncoder) parts.push({ name: 'rgb', layers: this.rgbEncoder.layers });
    if (this.eventEncoder) parts.push({ name: 'event', layers: this.eventEncoder.layers });
    if (this.fusion) parts.push({ name: 'fusion', layers: this.fusion.layers() });
    parts.push({ name: 'head', layers: [this.headHidden, this.headOut] });
    return parts;
  }

  exportWeights(): Record<string, { shape: number[]; data: number[] }[]> {
    const out: Record<string, { shape: number[]; data: number[] }[]> = {};
    for (const part of this.allComponents()) {
      const entries: { shape: number[]; data: number[] }[] = [];
      for (const layer of part.layers) {
        for (const w of layer.getWeights()) {
          entries.push({ shape: w.shape.slice(), data: Array.from(w.dataSync()) });
        }
      }
      out[part.name] = entries;
    }
    return out;
  }

  importWeights(payload: Record<string, { shape: number[]; data: number[] }[]>) {
    for (const part of this.allComponents()) {
      const entries = payload[part.name];
      if (!entries) throw new Error(`weight payload missing component ${part.name}`);
      let i = 0;
      for (const layer of part.layers) {
        const current = layer.getWeights();
        const next = current.map((w) => {
          const e = entries[i++];
          if (JSON.stringify(e.shape) !== JSON.stringify(w.shape)) {
            throw new Error(`shape mismatch restoring ${part.name}`);
          }
          return tf.tensor(e.data, e.shape as number[]);
        });
        layer.setWeights(next);
        next.forEach((t) => t.dispose());
      }
    }
  }
}

export interface SavedPolicy {
  config: PolicyConfig;
  weights: Record<string, { shape: number[]; data: number[] }[]>;
}

export function savePolicy(policy: Policy): SavedPolicy {
  return { config: policy.cfg, weights: policy.exportWeights() };
}

export function loadPolicy(saved: SavedPolicy): Policy {
  const policy = new Policy(saved.config);
  policy.importWeights(saved.weights);
  return policy;
}
