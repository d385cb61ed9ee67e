import assert from "node:assert/strict";
import { test } from "node:test";

import { AudioDecodeError, decodeWav, encodeWavPcm16, resample } from "../src/wav";

function sine(freq: number, seconds: number, rate: number): Float64Array {
  const out = new Float64Array(Math.round(seconds * rate));
  for (let i = 0; i < out.length; i++) {
    out[i] = 0.5 * Math.sin((2 * Math.PI * freq * i) / rate);
  }
  return out;
}

test("pcm16 round trip", () => {
  const original = sine(440, 0.25, 16000);
  const decoded = decodeWav(encodeWavPcm16(original, 16000));
  assert.equal(decoded.sampleRate, 16000);
  assert.equal(decoded.samples.length, original.length);
  let worst = 0;
  for (let i = 0; i < original.length; i++) {
    worst = Math.max(worst, Math.abs(decoded.samples[i] - original[i]));
  }
  assert.ok(worst < 1e-3, `quantization error ${worst}`);
});

test("stereo mixdown", () => {
  // hand-build a 2-channel PCM16 file: L = 0.5, R = -0.5 -> mono 0
  const n = 100;
  const buf = Buffer.alloc(44 + n * 4);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + n * 4, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20);
  buf.writeUInt16LE(2, 22);
  buf.writeUInt32LE(8000, 24);
  buf.writeUInt32LE(8000 * 4, 28);
  buf.writeUInt16LE(4, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(n * 4, 40);
  for (let i = 0; i < n; i++) {
    buf.writeInt16LE(16384, 44 + i * 4);
    buf.writeInt16LE(-16384, 44 + i * 4 + 2);
  }
  const decoded = decodeWav(buf);
  assert.equal(decoded.samples.length, n);
  for (const v of decoded.samples) {
    assert.ok(Math.abs(v) < 1e-4);
  }
});

test("resample length and rate", () => {
  const decoded = { samples: sine(100, 1.0, 44100), sampleRate: 44100 };
  const out = resample(decoded, 16000);
  assert.equal(out.sampleRate, 16000);
  assert.ok(Math.abs(out.samples.length - 16000) <= 1);
});

test("resample is identity at the target rate", () => {
  const decoded = { samples: sine(100, 0.1, 16000), sampleRate: 16000 };
  assert.equal(resample(decoded, 16000), decoded);
});

test("rejects non-wav buffers", () => {
  assert.throws(() => decodeWav(Buffer.from("definitely not audio")), AudioDecodeError);
});

test("rejects unsupported encodings", () => {
  const buf = encodeWavPcm16(sine(440, 0.05, 8000), 8000);
  buf.writeUInt16LE(7, 20); // mu-law
  assert.throws(() => decodeWav(buf), /unsupported WAV encoding/);
});
