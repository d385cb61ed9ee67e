/**
 * Writer (and self-check reader) for the layerprobe embedding file format.
 *
 * Layout, little-endian: magic "LPRB" | version u16 = 1 | layer u16 |
 * dim u32 | n_frames u32 | frame_hz f32 | id_len u16 | recording id UTF-8 |
 * payload n_frames * dim float32 row-major.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const MAGIC = "LPRB";
export const FORMAT_VERSION = 1;

export interface EmbeddingSequence {
  recordingId: string;
  layerIndex: number;
  frameHz: number;
  /** frames[t] is a dim-length vector; all frames must share one length. */
  frames: Float32Array[];
}

export function embeddingFileName(recordingId: string, layerIndex: number): string {
  return `${recordingId}.layer${String(layerIndex).padStart(2, "0")}.lpb`;
}

export function encodeEmbedding(seq: EmbeddingSequence): Buffer {
  const nFrames = seq.frames.length;
  if (nFrames === 0) {
    throw new Error(`${seq.recordingId}: refusing to write a sequence with no frames`);
  }
  const dim = seq.frames[0].length;
  if (dim === 0) {
    throw new Error(`${seq.recordingId}: zero-dimensional frames`);
  }
  for (const frame of seq.frames) {
    if (frame.length !== dim) {
      throw new Error(`${seq.recordingId}: ragged frame lengths`);
    }
    for (const v of frame) {
      if (!Number.isFinite(v)) {
        throw new Error(`${seq.recordingId}: non-finite embedding value`);
      }
    }
  }
  const idBytes = Buffer.from(seq.recordingId, "utf-8");
  if (idBytes.length === 0 || idBytes.length > 0xffff) {
    throw new Error(`${seq.recordingId}: bad recording id length`);
  }
  const header = Buffer.alloc(22 + idBytes.length);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt16LE(FORMAT_VERSION, 4);
  header.writeUInt16LE(seq.layerIndex, 6);
  header.writeUInt32LE(dim, 8);
  header.writeUInt32LE(nFrames, 12);
  header.writeFloatLE(seq.frameHz, 16);
  header.writeUInt16LE(idBytes.length, 20);
  idBytes.copy(header, 22);

  const payload = Buffer.alloc(4 * nFrames * dim);
  for (let t = 0; t < nFrames; t++) {
    for (let d = 0; d < dim; d++) {
      payload.writeFloatLE(seq.frames[t][d], 4 * (t * dim + d));
    }
  }
  return Buffer.concat([header, payload]);
}

/** Write atomically: temp file in the same directory, then rename. */
export function writeEmbeddingFile(seq: EmbeddingSequence, filePath: string): void {
  const encoded = encodeEmbedding(seq);
  const tmp = path.join(path.dirname(filePath), `.${path.basename(filePath)}.tmp`);
  fs.writeFileSync(tmp, encoded);
  fs.renameSync(tmp, filePath);
}

export interface EmbeddingHeader {
  recordingId: string;
  layerIndex: number;
  dim: number;
  nFrames: number;
  frameHz: number;
}

/** Parse a written file's header; used for self-checks and tests. */
export function readEmbeddingHeader(filePath: string): EmbeddingHeader {
  const buf = fs.readFileSync(filePath);
  if (buf.length < 22 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${filePath}: bad magic`);
  }
  const version = buf.readUInt16LE(4);
  if (version !== FORMAT_VERSION) {
    throw new Error(`${filePath}: unsupported version ${version}`);
  }
  const layerIndex = buf.readUInt16LE(6);
  const dim = buf.readUInt32LE(8);
  const nFrames = buf.readUInt32LE(12);
  const frameHz = buf.readFloatLE(16);
  const idLen = buf.readUInt16LE(20);
  const recordingId = buf.toString("utf-8", 22, 22 + idLen);
  const expected = 22 + idLen + 4 * nFrames * dim;
  if (buf.length !== expected) {
    throw new Error(`${filePath}: expected ${expected} bytes, found ${buf.length}`);
  }
  return { recordingId, layerIndex, dim, nFrames, frameHz };
}
