export { CSFP_MAGIC, CSFP_VERSION, ScaleMap, encodeCsfp, decodeCsfp, readCsfp, writeCsfp } from './csfp';
export { Image, decodePnm, readImage, resizeBilinear } from './image';
export {
  Backbone,
  FeatureMap,
  DEFAULT_BACKBONE,
  NORMALIZE_MEAN,
  NORMALIZE_STD,
  normalizeImage,
  resolveBackbone,
} from './backbone';
export {
  Label,
  Manifest,
  ManifestEntry,
  MANIFEST_FORMAT_VERSION,
  Split,
  encodeManifest,
  readManifest,
  validateManifest,
  writeManifest,
} from './manifest';
export {
  DEFAULT_INPUT_SIZES,
  ExportConfig,
  ExportError,
  ExportResult,
  discoverImages,
  exportDataset,
  extractPyramid,
  validateExportConfig,
} from './exporter';
export { VerifyReport, verifyExport, verifyScales } from './verify';
export { ConfigError } from './errors';
