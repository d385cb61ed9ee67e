/**
 * Minimal RIFF/WAVE decoder and resampler.
 *
 * Supports PCM (8/16/24/32-bit integer) and IEEE float32 data chunks,
 * any channel count (channels are mixed down to mono), and linear
 * resampling to the extractor's target rate.
 */

export interface DecodedAudio {
  /** Mono samples in [-1, 1]. */
  samples: Float64Array;
  sampleRate: number;
}

export class AudioDecodeError extends Error {}

function readChunks(buf: Buffer): Map<string, { offset: number; size: number }> {
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new AudioDecodeError("not a RIFF/WAVE file");
  }
  const chunks = new Map<string, { offset: number; size: number }>();
  let pos = 12;
  while (pos + 8 <= buf.length) {
    const id = buf.toString("ascii", pos, pos + 4);
    const size = buf.readUInt32LE(pos + 4);
    chunks.set(id, { offset: pos + 8, size });
    pos += 8 + size + (size % 2); // chunks are word-aligned
  }
  return chunks;
}

/** Decode a WAV buffer to mono float samples. */
export function decodeWav(buf: Buffer): DecodedAudio {
  const chunks = readChunks(buf);
  const fmt = chunks.get("fmt ");
  const data = chunks.get("data");
  if (!fmt || !data) {
    throw new AudioDecodeError("missing fmt or data chunk");
  }
  const format = buf.readUInt16LE(fmt.offset);
  const channels = buf.readUInt16LE(fmt.offset + 2);
  const sampleRate = buf.readUInt32LE(fmt.offset + 4);
  const bitsPerSample = buf.readUInt16LE(fmt.offset + 14);
  if (channels < 1) {
    throw new AudioDecodeError("no channels");
  }
  const bytesPerSample = bitsPerSample / 8;
  const frameBytes = bytesPerSample * channels;
  const end = Math.min(data.offset + data.size, buf.length);
  const nFrames = Math.floor((end - data.offset) / frameBytes);
  if (nFrames === 0) {
    throw new AudioDecodeError("empty data chunk");
  }

  let readSample: (pos: number) => number;
  if (format === 1 && bitsPerSample === 16) {
    readSample = (pos) => buf.readInt16LE(pos) / 32768;
  } else if (format === 1 && bitsPerSample === 8) {
    readSample = (pos) => (buf.readUInt8(pos) - 128) / 128;
  } else if (format === 1 && bitsPerSample === 24) {
    readSample = (pos) => {
      const v = buf.readUIntLE(pos, 3);
      return (v >= 0x800000 ? v - 0x1000000 : v) / 8388608;
    };
  } else if (format === 1 && bitsPerSample === 32) {
    readSample = (pos) => buf.readInt32LE(pos) / 2147483648;
  } else if (format === 3 && bitsPerSample === 32) {
    readSample = (pos) => buf.readFloatLE(pos);
  } else {
    throw new AudioDecodeError(`unsupported WAV encoding: format ${format}, ${bitsPerSample} bits`);
  }

  const samples = new Float64Array(nFrames);
  for (let i = 0; i < nFrames; i++) {
    let acc = 0;
    const base = data.offset + i * frameBytes;
    for (let c = 0; c < channels; c++) {
      acc += readSample(base + c * bytesPerSample);
    }
    samples[i] = acc / channels;
  }
  return { samples, sampleRate };
}

export function decodeWavFile(path: string): DecodedAudio {
  const fs = require("node:fs") as typeof import("node:fs");
  return decodeWav(fs.readFileSync(path));
}

/** Linear-interpolation resampling; returns the input when rates match. */
export function resample(audio: DecodedAudio, targetRate: number): DecodedAudio {
  if (audio.sampleRate === targetRate) {
    return audio;
  }
  const ratio = audio.sampleRate / targetRate;
  const outLength = Math.max(1, Math.round(audio.samples.length / ratio));
  const out = new Float64Array(outLength);
  for (let i = 0; i < outLength; i++) {
    const t = i * ratio;
    const lo = Math.floor(t);
    const hi = Math.min(lo + 1, audio.samples.length - 1);
    const frac = t - lo;
    out[i] = audio.samples[lo] * (1 - frac) + audio.samples[hi] * frac;
  }
  return { samples: out, sampleRate: targetRate };
}

/** Encode mono float samples as 16-bit PCM WAV (used by tests and tools). */
export function encodeWavPcm16(samples: Float64Array | number[], sampleRate: number): Buffer {
  const n = samples.length;
  const buf = Buffer.alloc(44 + n * 2);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + n * 2, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20); // PCM
  buf.writeUInt16LE(1, 22); // mono
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(n * 2, 40);
  for (let i = 0; i < n; i++) {
    const v = Math.max(-1, Math.min(1, samples[i]));
    buf.writeInt16LE(Math.round(v * 32767), 44 + i * 2);
  }
  return buf;
}
