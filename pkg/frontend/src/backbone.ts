/*
 Feature extraction behind a small interface so a real pretrained network can
 be dropped in later. The default extractor is a deterministic stand-in with
 the same output contract: reduction 32, 304 channels, values bounded by
 tanh. It summarizes each 32x32 block with local statistics and mixes them
 through a fixed seeded projection, which is enough to make textures and
 planted defects separable without shipping any weights.
*/

import { ConfigError } from './errors';
import { Image } from './image';

export interface FeatureMap {
  channels: number;
  height: number;
  width: number;
  /** length channels*height*width, C-order */
  data: Float32Array;
}

export interface Backbone {
  readonly id: string;
  /** input edge length must be a multiple of this */
  readonly reduction: number;
  /** channel count of every output map */
  readonly channels: number;
  /** image values are expected normalized (see normalizeImage) */
  extract(img: Image): FeatureMap;
}

/* Channel statistics commonly used to whiten natural RGB input. */
export const NORMALIZE_MEAN = [0.485, 0.456, 0.406];
export const NORMALIZE_STD = [0.229, 0.224, 0.225];

export function normalizeImage(img: Image): Image {
  const data = new Float64Array(img.data.length);
  for (let i = 0; i < img.data.length; i += 3) {
    for (let c = 0; c < 3; c++) {
      data[i + c] = (img.data[i + c] - NORMALIZE_MEAN[c]) / NORMALIZE_STD[c];
    }
  }
  return { height: img.height, width: img.width, channels: 3, data };
}

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const STAT_DIM = 9;

function seededProjection(channels: number, seed: number): Float64Array {
  const rand = mulberry32(seed);
  const scale = Math.sqrt(3 / STAT_DIM);
  const weights = new Float64Array(channels * STAT_DIM);
  for (let i = 0; i < weights.length; i++) {
    weights[i] = (2 * rand() - 1) * scale;
  }
  return weights;
}

class SeededBackbone implements Backbone {
  readonly reduction = 32;
  readonly channels = 304;
  private readonly weights: Float64Array;

  constructor(readonly id: string) {
    this.weights = seededProjection(this.channels, fnv1a(id));
  }

  extract(img: Image): FeatureMap {
    const r = this.reduction;
    if (img.height % r !== 0 || img.width % r !== 0) {
      throw new Error(
        `input ${img.height}x${img.width} is not a multiple of the reduction ${r}`,
      );
    }
    const gh = img.height / r;
    const gw = img.width / r;
    const out = new Float32Array(this.channels * gh * gw);
    const stats = new Float64Array(STAT_DIM);
    for (let gy = 0; gy < gh; gy++) {
      for (let gx = 0; gx < gw; gx++) {
        this.blockStats(img, gy * r, gx * r, stats);
        for (let c = 0; c < this.channels; c++) {
          let acc = 0;
          for (let k = 0; k < STAT_DIM; k++) {
            acc += this.weights[c * STAT_DIM + k] * stats[k];
          }
          out[c * gh * gw + gy * gw + gx] = Math.tanh(acc);
        }
      }
    }
    return { channels: this.channels, height: gh, width: gw, data: out };
  }

  /* mean and std per channel, mean luminance gradients, and a bias term */
  private blockStats(img: Image, top: number, left: number, stats: Float64Array): void {
    const r = this.reduction;
    const n = r * r;
    const sums = [0, 0, 0];
    const squares = [0, 0, 0];
    let gradX = 0;
    let gradY = 0;
    for (let y = top; y < top + r; y++) {
      for (let x = left; x < left + r; x++) {
        const base = (y * img.width + x) * 3;
        for (let c = 0; c < 3; c++) {
          const v = img.data[base + c];
          sums[c] += v;
          squares[c] += v * v;
        }
        const lum = img.data[base] + img.data[base + 1] + img.data[base + 2];
        if (x + 1 < left + r) {
          const right = (y * img.width + x + 1) * 3;
          gradX += Math.abs(
            img.data[right] + img.data[right + 1] + img.data[right + 2] - lum,
          );
        }
        if (y + 1 < top + r) {
          const below = ((y + 1) * img.width + x) * 3;
          gradY += Math.abs(
            img.data[below] + img.data[below + 1] + img.data[below + 2] - lum,
          );
        }
      }
    }
    for (let c = 0; c < 3; c++) {
      const mean = sums[c] / n;
      stats[c] = mean;
      const variance = Math.max(squares[c] / n - mean * mean, 0);
      stats[3 + c] = Math.sqrt(variance);
    }
    stats[6] = gradX / (r * (r - 1));
    stats[7] = gradY / (r * (r - 1));
    stats[8] = 1;
  }
}

const FACTORIES: Record<string, () => Backbone> = {
  'seeded-304': () => new SeededBackbone('seeded-304'),
};

export const DEFAULT_BACKBONE = 'seeded-304';

export function resolveBackbone(id: string): Backbone {
  const factory = FACTORIES[id];
  if (factory === undefined) {
    const known = Object.keys(FACTORIES).sort().join(', ');
    throw new ConfigError(`unknown backbone ${JSON.stringify(id)}, known: ${known}`);
  }
  return factory();
}
