/**
 * Extraction pipeline: audio manifest -> embedding store + dataset manifest.
 *
 * Frame mode writes one file per (recording, layer) at the encoder's native
 * frame rate. Per-window mode re-encodes each half-overlapping window
 * independently and emits one single-frame sequence per window under the
 * recording id "<id>.w<NNNN>" (frame_hz = 1 / window_s, so each pseudo
 * recording's duration equals the window length); it exists to quantify the
 * frame-averaging approximation used downstream.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { BackendName, Encoder, loadEncoder } from "./models";
import { AudioEntry, OutputRecord, parseAudioManifest, renderManifest } from "./manifest";
import { embeddingFileName, writeEmbeddingFile } from "./lpb";
import { AudioDecodeError, decodeWavFile, resample } from "./wav";

export const TARGET_SAMPLE_RATE = 16000;

export type ExtractionMode = { kind: "frame" } | { kind: "window"; windowS: number };

export interface ExtractorConfig {
  audioManifestPath: string;
  modelId: string;
  layers: "all" | number[];
  mode: ExtractionMode;
  outDir: string;
  backend?: BackendName;
  /** passed through to neural backends; the reference backend ignores it */
  device?: string;
}

export interface ExtractionReport {
  written: number;
  skipped: { recordingId: string; reason: string }[];
  storeRoot: string;
  manifestPath: string;
}

export function parseMode(text: string): ExtractionMode {
  if (text === "frame") {
    return { kind: "frame" };
  }
  const match = /^window:(\d+(?:\.\d+)?)$/.exec(text);
  if (match) {
    const windowS = Number(match[1]);
    if (windowS > 0) {
      return { kind: "window", windowS };
    }
  }
  throw new Error(`bad mode ${JSON.stringify(text)}; expected "frame" or "window:<seconds>"`);
}

function resolveLayers(encoder: Encoder, layers: "all" | number[]): number[] {
  if (layers === "all") {
    return Array.from({ length: encoder.info.layerOutputs }, (_, i) => i);
  }
  return [...layers].sort((a, b) => a - b);
}

function meanFrame(frames: Float32Array[]): Float32Array {
  const dim = frames[0].length;
  const acc = new Float64Array(dim);
  for (const frame of frames) {
    for (let d = 0; d < dim; d++) {
      acc[d] += frame[d];
    }
  }
  return Float32Array.from(acc, (v) => v / frames.length);
}

function windowIntervals(durationS: number, windowS: number): Array<[number, number]> {
  const hop = windowS / 2;
  if (durationS + 1e-9 < windowS) {
    return [[0, durationS]];
  }
  const count = Math.floor((durationS - windowS) / hop + 1e-9) + 1;
  return Array.from({ length: count }, (_, i) => [i * hop, i * hop + windowS]);
}

function extractEntry(
  encoder: Encoder,
  entry: AudioEntry,
  layers: number[],
  mode: ExtractionMode,
  storeRoot: string,
): OutputRecord[] {
  const decoded = resample(decodeWavFile(entry.path), TARGET_SAMPLE_RATE);
  const durationS = decoded.samples.length / TARGET_SAMPLE_RATE;

  if (mode.kind === "frame") {
    const perLayer = encoder.encode(decoded.samples, layers);
    for (const layer of layers) {
      writeEmbeddingFile(
        {
          recordingId: entry.recordingId,
          layerIndex: layer,
          frameHz: encoder.info.frameHz,
          frames: perLayer.get(layer)!,
        },
        path.join(storeRoot, embeddingFileName(entry.recordingId, layer)),
      );
    }
    return [outputRecord(entry, entry.recordingId, durationS)];
  }

  const records: OutputRecord[] = [];
  const intervals = windowIntervals(durationS, mode.windowS);
  intervals.forEach(([startS, endS], index) => {
    const lo = Math.round(startS * TARGET_SAMPLE_RATE);
    const hi = Math.min(decoded.samples.length, Math.round(endS * TARGET_SAMPLE_RATE));
    const perLayer = encoder.encode(decoded.samples.subarray(lo, hi), layers);
    const windowId = `${entry.recordingId}.w${String(index).padStart(4, "0")}`;
    const windowLength = endS - startS;
    for (const layer of layers) {
      writeEmbeddingFile(
        {
          recordingId: windowId,
          layerIndex: layer,
          frameHz: 1 / windowLength,
          frames: [meanFrame(perLayer.get(layer)!)],
        },
        path.join(storeRoot, embeddingFileName(windowId, layer)),
      );
    }
    records.push(outputRecord(entry, windowId, windowLength));
  });
  return records;
}

function outputRecord(entry: AudioEntry, recordingId: string, durationS: number): OutputRecord {
  const record: OutputRecord = {
    recording_id: recordingId,
    speaker_id: entry.speakerId,
    duration_s: durationS,
    task: entry.task,
    labels: entry.labels,
  };
  if (entry.split !== undefined) {
    record.split = entry.split;
  }
  if (entry.fold !== undefined) {
    record.fold = entry.fold;
  }
  return record;
}

export function extract(config: ExtractorConfig): ExtractionReport {
  const audio = parseAudioManifest(config.audioManifestPath);
  const encoder = loadEncoder(config.modelId, config.backend ?? "reference"); // load failure is fatal
  const layers = resolveLayers(encoder, config.layers);

  const storeRoot = path.join(config.outDir, "embeddings");
  fs.mkdirSync(storeRoot, { recursive: true });

  const records: OutputRecord[] = [];
  const skipped: { recordingId: string; reason: string }[] = [];
  for (const entry of audio.entries) {
    try {
      records.push(...extractEntry(encoder, entry, layers, config.mode, storeRoot));
    } catch (error) {
      if (error instanceof AudioDecodeError || (error as NodeJS.ErrnoException).code === "ENOENT") {
        skipped.push({ recordingId: entry.recordingId, reason: String(error) });
        continue;
      }
      throw error;
    }
  }
  if (records.length === 0) {
    throw new Error("no recordings could be extracted");
  }

  const manifestPath = path.join(config.outDir, "manifest.json");
  fs.writeFileSync(manifestPath, renderManifest(audio.labelNames, audio.protocol, records));
  return { written: records.length, skipped, storeRoot, manifestPath };
}
