/**
 * Encoder registry and backends.
 *
 * Checkpoint geometry (layer count counts the input embedding, so encoder
 * depth + 1 outputs; frame rate from the feature-extractor stride at 16 kHz)
 * matches the published models. The Whisper encoders operate on a fixed
 * 30-second input window; emitted frames are cropped back to the true audio
 * duration so downstream windowing never reads padding.
 *
 * Backends:
 *  - "reference": a deterministic DSP filterbank encoder (log band energies
 *    followed by per-layer smoothing and seeded mixing). It produces real
 *    frame-level features from audio with the registered geometry and is
 *    fully reproducible, which is what the conformance tests need. It is
 *    NOT the neural checkpoint.
 *  - "transformers": reserved for running the actual checkpoints; loading
 *    fails fast when the runtime/weights are unavailable.
 */

export interface ModelInfo {
  id: string;
  /** encoder depth + 1 (the input embedding is layer 0) */
  layerOutputs: number;
  dim: number;
  frameHz: number;
  /** fixed receptive field in seconds (Whisper-style padding), if any */
  fixedInputSeconds?: number;
}

export const MODEL_REGISTRY: ModelInfo[] = [
  { id: "wav2vec2-large-xlsr-53", layerOutputs: 25, dim: 1024, frameHz: 50 },
  { id: "hubert-large-ls960-ft", layerOutputs: 25, dim: 1024, frameHz: 50 },
  { id: "hubert-xlarge-ls960-ft", layerOutputs: 49, dim: 1280, frameHz: 50 },
  { id: "whisper-medium", layerOutputs: 25, dim: 1024, frameHz: 50, fixedInputSeconds: 30 },
  { id: "whisper-large-v3", layerOutputs: 33, dim: 1280, frameHz: 50, fixedInputSeconds: 30 },
  // small geometry for fast pipeline tests
  { id: "test-tiny", layerOutputs: 4, dim: 8, frameHz: 50 },
];

export function modelInfo(id: string): ModelInfo {
  const info = MODEL_REGISTRY.find((m) => m.id === id);
  if (!info) {
    const known = MODEL_REGISTRY.map((m) => m.id).join(", ");
    throw new Error(`unknown model id ${JSON.stringify(id)}; known: ${known}`);
  }
  return info;
}

export interface Encoder {
  readonly info: ModelInfo;
  /**
   * Encode 16 kHz mono samples into per-layer frame embeddings.
   * Returns one Float32Array[dim][] per requested layer, all of equal length.
   */
  encode(samples: Float64Array, layers: number[]): Map<number, Float32Array[]>;
}

export class ModelLoadError extends Error {}

export type BackendName = "reference" | "transformers";

export function loadEncoder(modelId: string, backend: BackendName = "reference"): Encoder {
  const info = modelInfo(modelId);
  if (backend === "reference") {
    return new ReferenceDspEncoder(info);
  }
  throw new ModelLoadError(
    `backend "${backend}" requires the neural runtime and model weights for ` +
      `${modelId}, which are not available in this environment; use --backend reference`,
  );
}

// ---------------------------------------------------------------------------
// reference DSP encoder
// ---------------------------------------------------------------------------

const SAMPLE_RATE = 16000;
const FRAME_LENGTH = 400; // 25 ms analysis window

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Deterministic PRNG for per-layer mixing coefficients. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class ReferenceDspEncoder implements Encoder {
  readonly info: ModelInfo;
  private readonly hop: number;
  private readonly bandFrequencies: number[];
  private readonly hann: Float64Array;

  constructor(info: ModelInfo) {
    this.info = info;
    this.hop = Math.round(SAMPLE_RATE / info.frameHz);
    // log-spaced analysis bands between 60 Hz and 7600 Hz
    const lo = Math.log(60);
    const hi = Math.log(7600);
    this.bandFrequencies = Array.from({ length: info.dim }, (_, d) =>
      Math.exp(lo + ((hi - lo) * d) / Math.max(1, info.dim - 1)),
    );
    this.hann = new Float64Array(FRAME_LENGTH);
    for (let i = 0; i < FRAME_LENGTH; i++) {
      this.hann[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (FRAME_LENGTH - 1));
    }
  }

  frameCount(nSamples: number): number {
    if (nSamples < FRAME_LENGTH) {
      return 1;
    }
    return Math.floor((nSamples - FRAME_LENGTH) / this.hop) + 1;
  }

  encode(samples: Float64Array, layers: number[]): Map<number, Float32Array[]> {
    for (const layer of layers) {
      if (layer < 0 || layer >= this.info.layerOutputs) {
        throw new Error(
          `layer ${layer} out of range; ${this.info.id} emits layers 0..${this.info.layerOutputs - 1}`,
        );
      }
    }
    const trueCount = this.frameCount(samples.length);
    let padded = samples;
    if (this.info.fixedInputSeconds) {
      const fixed = this.info.fixedInputSeconds * SAMPLE_RATE;
      padded = new Float64Array(Math.max(fixed, samples.length));
      padded.set(samples);
    }
    let current = this.baseFeatures(padded);
    const maxLayer = Math.max(...layers);
    const wanted = new Set(layers);
    const out = new Map<number, Float32Array[]>();
    const keep = (layer: number, frames: Float64Array[]) => {
      // crop any fixed-field padding back to the true duration
      out.set(
        layer,
        frames.slice(0, trueCount).map((f) => Float32Array.from(f)),
      );
    };
    if (wanted.has(0)) {
      keep(0, current);
    }
    for (let layer = 1; layer <= maxLayer; layer++) {
      current = this.nextLayer(current, layer);
      if (wanted.has(layer)) {
        keep(layer, current);
      }
    }
    return out;
  }

  /** Layer 0: log band energies per frame. */
  private baseFeatures(samples: Float64Array): Float64Array[] {
    const nFrames = this.frameCount(samples.length);
    const dim = this.info.dim;
    const frames: Float64Array[] = [];
    for (let t = 0; t < nFrames; t++) {
      const start = t * this.hop;
      const feature = new Float64Array(dim);
      for (let d = 0; d < dim; d++) {
        const omega = (2 * Math.PI * this.bandFrequencies[d]) / SAMPLE_RATE;
        let re = 0;
        let im = 0;
        for (let i = 0; i < FRAME_LENGTH && start + i < samples.length; i++) {
          const v = samples[start + i] * this.hann[i];
          re += v * Math.cos(omega * i);
          im -= v * Math.sin(omega * i);
        }
        feature[d] = Math.log(1e-8 + re * re + im * im);
      }
      frames.push(feature);
    }
    return frames;
  }

  /** Deeper layers: temporal smoothing plus seeded channel mixing. */
  private nextLayer(previous: Float64Array[], layer: number): Float64Array[] {
    const rand = mulberry32(fnv1a(`${this.info.id}:${layer}`));
    const a = 0.6 + 0.3 * rand();
    const b = 0.2 + 0.6 * rand();
    const dim = this.info.dim;
    const n = previous.length;
    const frames: Float64Array[] = [];
    for (let t = 0; t < n; t++) {
      const lo = Math.max(0, t - 1);
      const hi = Math.min(n - 1, t + 1);
      const feature = new Float64Array(dim);
      for (let d = 0; d < dim; d++) {
        let smoothed = 0;
        for (let u = lo; u <= hi; u++) {
          smoothed += previous[u][d];
        }
        smoothed /= hi - lo + 1;
        feature[d] = a * smoothed + b * Math.tanh(previous[t][(d + 1) % dim]);
      }
      frames.push(feature);
    }
    return frames;
  }
}
