/**
 * Conformance: extracted stores must satisfy the probing engine's contracts.
 * Validation runs through the engine's own CLI ("layerprobe validate"), the
 * only interface shared between the two packages besides the file formats.
 */

import assert from "node:assert/strict";
import { createHash } from "node:crypto";
import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { extract, parseMode } from "../src/extract";
import { readEmbeddingHeader } from "../src/lpb";
import { loadEncoder, modelInfo, ModelLoadError } from "../src/models";
import { encodeWavPcm16 } from "../src/wav";

function makeClips(dir: string): { csvPath: string; durations: Map<string, number> } {
  // three public-domain clips: two pure tones and one deterministic noise
  fs.mkdirSync(dir, { recursive: true });
  const durations = new Map<string, number>();
  const rows = ["recording_id,path,speaker_id,task,label:flagged,fold"];
  const clips: Array<[string, number, number, (i: number, rate: number) => number, string, number]> = [
    ["tone440", 3.0, 16000, (i, r) => 0.4 * Math.sin((2 * Math.PI * 440 * i) / r), "spkA", 0],
    ["tone880", 4.5, 22050, (i, r) => 0.3 * Math.sin((2 * Math.PI * 880 * i) / r), "spkB", 1],
    ["noise", 2.25, 44100, (i) => 0.2 * Math.sin(i * 12.9898) * Math.cos(i * 0.5453), "spkC", 2],
  ];
  clips.forEach(([id, seconds, rate, fn, speaker, fold], index) => {
    const samples = new Float64Array(Math.round(seconds * rate));
    for (let i = 0; i < samples.length; i++) {
      samples[i] = fn(i, rate);
    }
    const wavPath = path.join(dir, `${id}.wav`);
    fs.writeFileSync(wavPath, encodeWavPcm16(samples, rate));
    durations.set(id, samples.length / rate);
    const labelled = index % 2 === 0;
    rows.push(`${id},${wavPath},${speaker},Spontaneous,${labelled},${fold}`);
  });
  const csvPath = path.join(dir, "clips.csv");
  fs.writeFileSync(csvPath, rows.join("\n") + "\n");
  return { csvPath, durations };
}

function runPrimaryValidate(storeRoot: string, manifestPath: string) {
  const attempts = [
    ["layerprobe", ["validate", "--store", storeRoot, "--manifest", manifestPath]],
    ["python3", ["-m", "layerprobe.cli", "validate", "--store", storeRoot, "--manifest", manifestPath]],
  ] as const;
  for (const [cmd, args] of attempts) {
    const result = spawnSync(cmd, args, { encoding: "utf-8" });
    if (result.error) {
      continue; // binary not on PATH; try the next invocation
    }
    return result;
  }
  throw new Error("layerprobe CLI not available; install the probing engine first");
}

function hashTree(root: string): string {
  const h = createHash("sha256");
  for (const name of fs.readdirSync(root).sort()) {
    const full = path.join(root, name);
    if (fs.statSync(full).isFile()) {
      h.update(name);
      h.update(fs.readFileSync(full));
    }
  }
  return h.digest("hex");
}

function tmpdir(label: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), `extract-${label}-`));
}

test("frame mode conformance on three clips", () => {
  const work = tmpdir("frame");
  const { csvPath, durations } = makeClips(path.join(work, "clips"));
  const report = extract({
    audioManifestPath: csvPath,
    modelId: "test-tiny",
    layers: "all",
    mode: parseMode("frame"),
    outDir: path.join(work, "out"),
  });
  assert.equal(report.written, 3);
  assert.equal(report.skipped.length, 0);

  const info = modelInfo("test-tiny");
  const files = fs.readdirSync(report.storeRoot).sort();
  assert.equal(files.length, 3 * info.layerOutputs);

  // frame counts within +-2 of duration * frame rate
  for (const [id, duration] of durations) {
    for (let layer = 0; layer < info.layerOutputs; layer++) {
      const header = readEmbeddingHeader(
        path.join(report.storeRoot, `${id}.layer${String(layer).padStart(2, "0")}.lpb`),
      );
      assert.equal(header.recordingId, id);
      assert.equal(header.dim, info.dim);
      assert.ok(
        Math.abs(header.nFrames - duration * info.frameHz) <= 2,
        `${id} layer ${layer}: ${header.nFrames} frames vs ${duration * info.frameHz}`,
      );
    }
  }

  // the primary engine must accept the store without errors
  const result = runPrimaryValidate(report.storeRoot, report.manifestPath);
  assert.equal(result.status, 0, `layerprobe validate failed:\n${result.stdout}\n${result.stderr}`);
  assert.match(result.stdout, /0 error\(s\)/);
});

test("two runs are byte-identical", () => {
  const work = tmpdir("determinism");
  const { csvPath } = makeClips(path.join(work, "clips"));
  const config = {
    audioManifestPath: csvPath,
    modelId: "test-tiny",
    layers: "all" as const,
    mode: parseMode("frame"),
  };
  const first = extract({ ...config, outDir: path.join(work, "run1") });
  const second = extract({ ...config, outDir: path.join(work, "run2") });
  assert.equal(hashTree(first.storeRoot), hashTree(second.storeRoot));
  assert.equal(
    fs.readFileSync(first.manifestPath, "utf-8"),
    fs.readFileSync(second.manifestPath, "utf-8"),
  );
});

test("fixed-field encoder crops padding to the true duration", () => {
  // 10 s clip through a 30 s fixed-input encoder must yield ~500 frames at
  // 50 Hz, not ~1500
  const encoder = loadEncoder("whisper-large-v3");
  const samples = new Float64Array(10 * 16000);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = 0.1 * Math.sin(i / 20);
  }
  const frames = encoder.encode(samples, [0]).get(0)!;
  assert.ok(Math.abs(frames.length - 500) <= 2, `${frames.length} frames`);
});

test("per-window mode emits single-frame sequences that validate", () => {
  const work = tmpdir("window");
  const { csvPath } = makeClips(path.join(work, "clips"));
  const report = extract({
    audioManifestPath: csvPath,
    modelId: "test-tiny",
    layers: [0, 2],
    mode: parseMode("window:1"),
    outDir: path.join(work, "out"),
  });
  // 3.0 s -> 5 windows, 4.5 s -> 8, 2.25 s -> 3 (hop 0.5, trailing dropped)
  assert.equal(report.written, 5 + 8 + 3);
  const headers = fs
    .readdirSync(report.storeRoot)
    .sort()
    .map((f) => readEmbeddingHeader(path.join(report.storeRoot, f)));
  assert.equal(headers.length, report.written * 2);
  for (const header of headers) {
    assert.equal(header.nFrames, 1);
    assert.match(header.recordingId, /\.w\d{4}$/);
  }
  const result = runPrimaryValidate(report.storeRoot, report.manifestPath);
  assert.equal(result.status, 0, `layerprobe validate failed:\n${result.stdout}\n${result.stderr}`);
});

test("undecodable audio is skipped and reported", () => {
  const work = tmpdir("skip");
  const { csvPath } = makeClips(path.join(work, "clips"));
  const rows = fs.readFileSync(csvPath, "utf-8").trimEnd().split("\n");
  const badPath = path.join(work, "clips", "broken.wav");
  fs.writeFileSync(badPath, Buffer.from("this is not audio"));
  rows.push(`broken,${badPath},spkD,Spontaneous,false,1`);
  fs.writeFileSync(csvPath, rows.join("\n") + "\n");

  const report = extract({
    audioManifestPath: csvPath,
    modelId: "test-tiny",
    layers: [0],
    mode: parseMode("frame"),
    outDir: path.join(work, "out"),
  });
  assert.equal(report.written, 3);
  assert.equal(report.skipped.length, 1);
  assert.equal(report.skipped[0].recordingId, "broken");
});

test("unavailable neural backend fails fast", () => {
  assert.throws(() => loadEncoder("hubert-large-ls960-ft", "transformers"), ModelLoadError);
});

test("unknown model id is fatal", () => {
  assert.throws(() => loadEncoder("gpt-123"), /unknown model id/);
});

test("registry geometry sanity", () => {
  assert.equal(modelInfo("hubert-xlarge-ls960-ft").layerOutputs, 49);
  assert.equal(modelInfo("whisper-large-v3").fixedInputSeconds, 30);
  assert.equal(modelInfo("wav2vec2-large-xlsr-53").dim, 1024);
});
