#!/usr/bin/env node
/**
 * CLI: extract per-layer embeddings from an audio manifest.
 *
 *   layerprobe-extract --audio-manifest clips.csv --model test-tiny \
 *       --layers all --mode frame --out data/
 *
 * Exit codes: 0 all recordings extracted, 1 some skipped (undecodable),
 * 2 configuration or model-load errors.
 */

import { extract, parseMode } from "./extract";
import { MODEL_REGISTRY, ModelLoadError } from "./models";

interface CliArgs {
  audioManifest: string;
  model: string;
  layers: "all" | number[];
  mode: string;
  out: string;
  backend: "reference" | "transformers";
  device?: string;
}

function parseArgs(argv: string[]): CliArgs | "list-models" {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const key = argv[i];
    if (key === "--list-models") {
      return "list-models";
    }
    if (!key.startsWith("--")) {
      throw new Error(`unexpected argument ${JSON.stringify(key)}`);
    }
    const value = argv[++i];
    if (value === undefined) {
      throw new Error(`missing value for ${key}`);
    }
    args[key.slice(2)] = value;
  }
  for (const required of ["audio-manifest", "model", "out"]) {
    if (!(required in args)) {
      throw new Error(`missing required option --${required}`);
    }
  }
  const layersText = args["layers"] ?? "all";
  const layers =
    layersText === "all"
      ? ("all" as const)
      : layersText.split(",").map((v) => {
          const n = Number(v);
          if (!Number.isInteger(n) || n < 0) {
            throw new Error(`bad layer index ${JSON.stringify(v)}`);
          }
          return n;
        });
  const backend = (args["backend"] ?? "reference") as CliArgs["backend"];
  if (backend !== "reference" && backend !== "transformers") {
    throw new Error(`unknown backend ${JSON.stringify(args["backend"])}`);
  }
  return {
    audioManifest: args["audio-manifest"],
    model: args["model"],
    layers,
    mode: args["mode"] ?? "frame",
    out: args["out"],
    backend,
    device: args["device"],
  };
}

export function main(argv: string[]): number {
  let parsed: CliArgs | "list-models";
  try {
    parsed = parseArgs(argv);
  } catch (error) {
    console.error(`usage error: ${(error as Error).message}`);
    return 2;
  }
  if (parsed === "list-models") {
    for (const m of MODEL_REGISTRY) {
      const padding = m.fixedInputSeconds ? `, fixed ${m.fixedInputSeconds}s input` : "";
      console.log(`${m.id}: ${m.layerOutputs} layer outputs, dim ${m.dim}, ${m.frameHz} Hz${padding}`);
    }
    return 0;
  }
  try {
    const report = extract({
      audioManifestPath: parsed.audioManifest,
      modelId: parsed.model,
      layers: parsed.layers,
      mode: parseMode(parsed.mode),
      outDir: parsed.out,
      backend: parsed.backend,
      device: parsed.device,
    });
    console.log(`store:    ${report.storeRoot}`);
    console.log(`manifest: ${report.manifestPath}`);
    console.log(`records:  ${report.written}`);
    for (const skip of report.skipped) {
      console.error(`skipped ${skip.recordingId}: ${skip.reason}`);
    }
    return report.skipped.length > 0 ? 1 : 0;
  } catch (error) {
    if (error instanceof ModelLoadError) {
      console.error(`model load failure: ${error.message}`);
    } else {
      console.error(`error: ${(error as Error).message}`);
    }
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
