export { decodeWav, decodeWavFile, encodeWavPcm16, resample, AudioDecodeError } from "./wav";
export {
  embeddingFileName,
  encodeEmbedding,
  readEmbeddingHeader,
  writeEmbeddingFile,
} from "./lpb";
export type { EmbeddingHeader, EmbeddingSequence } from "./lpb";
export { MODEL_REGISTRY, ReferenceDspEncoder, loadEncoder, modelInfo, ModelLoadError } from "./models";
export type { BackendName, Encoder, ModelInfo } from "./models";
export { parseAudioManifest, renderManifest } from "./manifest";
export type { AudioEntry, AudioManifest, OutputRecord } from "./manifest";
export { extract, parseMode, TARGET_SAMPLE_RATE } from "./extract";
export type { ExtractionMode, ExtractionReport, ExtractorConfig } from "./extract";
