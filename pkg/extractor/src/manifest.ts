/**
 * Audio manifest (CSV in) and layerprobe dataset manifest (JSON out).
 *
 * Input CSV columns: recording_id, path, speaker_id, task, one column per
 * label named "label:<name>" with true/false values, and either a "split"
 * column (train/test) or a "fold" column (integer).
 */

import * as fs from "node:fs";

export interface AudioEntry {
  recordingId: string;
  path: string;
  speakerId: string;
  task: "Elicited" | "Spontaneous";
  labels: Record<string, boolean>;
  split?: "train" | "test";
  fold?: number;
}

export interface AudioManifest {
  entries: AudioEntry[];
  labelNames: string[];
  protocol: { kind: "holdout" } | { kind: "kfold"; k: number };
}

function splitCsvLine(line: string): string[] {
  const cells: string[] = [];
  let current = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"' && line[i + 1] === '"') {
        current += '"';
        i++;
      } else if (ch === '"') {
        quoted = false;
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      cells.push(current);
      current = "";
    } else {
      current += ch;
    }
  }
  cells.push(current);
  return cells;
}

function parseBool(value: string, context: string): boolean {
  const v = value.trim().toLowerCase();
  if (v === "true" || v === "1") return true;
  if (v === "false" || v === "0") return false;
  throw new Error(`${context}: expected a boolean, got ${JSON.stringify(value)}`);
}

export function parseAudioManifest(csvPath: string): AudioManifest {
  const lines = fs
    .readFileSync(csvPath, "utf-8")
    .split(/\r?\n/)
    .filter((l) => l.trim().length > 0);
  if (lines.length < 2) {
    throw new Error(`${csvPath}: need a header and at least one row`);
  }
  const header = splitCsvLine(lines[0]).map((h) => h.trim());
  const required = ["recording_id", "path", "speaker_id", "task"];
  for (const col of required) {
    if (!header.includes(col)) {
      throw new Error(`${csvPath}: missing required column ${JSON.stringify(col)}`);
    }
  }
  const labelColumns = header.filter((h) => h.startsWith("label:"));
  if (labelColumns.length === 0) {
    throw new Error(`${csvPath}: no label:<name> columns`);
  }
  const hasSplit = header.includes("split");
  const hasFold = header.includes("fold");
  if (hasSplit === hasFold) {
    throw new Error(`${csvPath}: exactly one of "split" or "fold" columns is required`);
  }

  const entries: AudioEntry[] = [];
  const seen = new Set<string>();
  let maxFold = 0;
  for (const line of lines.slice(1)) {
    const cells = splitCsvLine(line);
    if (cells.length !== header.length) {
      throw new Error(`${csvPath}: row has ${cells.length} cells, header has ${header.length}`);
    }
    const row: Record<string, string> = {};
    header.forEach((col, i) => (row[col] = cells[i]));
    const recordingId = row["recording_id"].trim();
    if (seen.has(recordingId)) {
      throw new Error(`${csvPath}: duplicate recording_id ${JSON.stringify(recordingId)}`);
    }
    seen.add(recordingId);
    const task = row["task"].trim();
    if (task !== "Elicited" && task !== "Spontaneous") {
      throw new Error(`${csvPath}: ${recordingId}: unknown task ${JSON.stringify(task)}`);
    }
    const labels: Record<string, boolean> = {};
    for (const col of labelColumns) {
      labels[col.slice("label:".length)] = parseBool(row[col], `${csvPath}: ${recordingId}: ${col}`);
    }
    const entry: AudioEntry = {
      recordingId,
      path: row["path"].trim(),
      speakerId: row["speaker_id"].trim(),
      task,
      labels,
    };
    if (hasSplit) {
      const split = row["split"].trim();
      if (split !== "train" && split !== "test") {
        throw new Error(`${csvPath}: ${recordingId}: split must be train or test`);
      }
      entry.split = split;
    } else {
      const fold = Number(row["fold"]);
      if (!Number.isInteger(fold) || fold < 0) {
        throw new Error(`${csvPath}: ${recordingId}: fold must be a non-negative integer`);
      }
      entry.fold = fold;
      maxFold = Math.max(maxFold, fold);
    }
    entries.push(entry);
  }
  return {
    entries,
    labelNames: labelColumns.map((c) => c.slice("label:".length)).sort(),
    protocol: hasSplit ? { kind: "holdout" } : { kind: "kfold", k: maxFold + 1 },
  };
}

export interface OutputRecord {
  recording_id: string;
  speaker_id: string;
  duration_s: number;
  task: string;
  labels: Record<string, boolean>;
  split?: string;
  fold?: number;
}

/** Serialize a layerprobe dataset manifest document. */
export function renderManifest(
  labelNames: string[],
  protocol: AudioManifest["protocol"],
  records: OutputRecord[],
): string {
  const labelDefinitions: Record<string, object> = {};
  for (const name of labelNames) {
    // labels arrive already binarized; the definition records provenance
    labelDefinitions[name] = {
      questionnaire: name,
      threshold: 0.5,
      rule: "score >= threshold",
    };
  }
  const doc = {
    label_definitions: labelDefinitions,
    protocol: protocol.kind === "kfold" ? { kind: "kfold", k: protocol.k } : { kind: "holdout" },
    speaker_disjoint: false,
    records,
  };
  return JSON.stringify(doc, null, 2) + "\n";
}
