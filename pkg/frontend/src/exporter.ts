/*
 Walks an image folder, runs every image through the backbone at each
 configured resolution, and writes one CSFP pyramid per image plus a dataset
 manifest the detector can train from directly.

 Folder layout, mirroring the usual defect-detection datasets:

   <image_dir>/train/good/*      -> split train, label normal
   <image_dir>/test/good/*       -> split test,  label normal
   <image_dir>/test/<defect>/*   -> split test,  label anomalous
   <image_dir>/*.pgm|ppm|pnm     -> split train, label normal

 Other top-level directories are ignored. A train/ subdirectory that is not
 "good" is rejected outright: the detector refuses anomalous training rows,
 so silently mislabeling them would only fail later and further away.
*/

import { mkdirSync, readdirSync, statSync } from 'fs';
import * as path from 'path';

import { Backbone, normalizeImage, resolveBackbone, DEFAULT_BACKBONE } from './backbone';
import { ConfigError } from './errors';
import { ScaleMap, writeCsfp } from './csfp';
import { readImage, resizeBilinear } from './image';
import { Label, Manifest, ManifestEntry, Split, writeManifest, MANIFEST_FORMAT_VERSION } from './manifest';

export interface ExportConfig {
  imageDir: string;
  outputDir: string;
  /** square edge lengths, strictly halving, e.g. [768, 384, 192] */
  inputSizes: number[];
  backbone: string;
  /** dataset category recorded in the manifest; defaults to the image dir's basename */
  className?: string;
}

export const DEFAULT_INPUT_SIZES = [768, 384, 192];

export interface ExportError {
  path: string;
  message: string;
}

export interface ExportResult {
  manifestPath: string;
  /** CSFP files actually written */
  written: number;
  errors: ExportError[];
}

const IMAGE_EXTENSIONS = new Set(['.pgm', '.ppm', '.pnm']);

export function validateExportConfig(cfg: ExportConfig, backbone: Backbone): void {
  const sizes = cfg.inputSizes;
  if (sizes.length === 0) {
    throw new ConfigError('at least one input size is required');
  }
  for (const s of sizes) {
    if (!Number.isInteger(s) || s < 1) {
      throw new ConfigError(`input sizes must be positive integers, got ${s}`);
    }
    if (s % backbone.reduction !== 0) {
      throw new ConfigError(
        `input size ${s} is not a multiple of the backbone reduction ${backbone.reduction}`,
      );
    }
  }
  for (let i = 1; i < sizes.length; i++) {
    if (sizes[i] * 2 !== sizes[i - 1]) {
      throw new ConfigError(
        `input sizes must halve step by step, got ${sizes[i - 1]} then ${sizes[i]}`,
      );
    }
  }
}

interface SourceImage {
  absPath: string;
  sampleId: string;
  label: Label;
  split: Split;
}

function isImageFile(name: string): boolean {
  return IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase());
}

function listSorted(dir: string): string[] {
  return readdirSync(dir).sort();
}

function sampleIdFor(...parts: string[]): string {
  const last = parts.length - 1;
  const stem = parts[last].slice(0, parts[last].length - path.extname(parts[last]).length);
  return [...parts.slice(0, last), stem].join('_');
}

export function discoverImages(imageDir: string): SourceImage[] {
  const found: SourceImage[] = [];
  for (const name of listSorted(imageDir)) {
    const abs = path.join(imageDir, name);
    const st = statSync(abs);
    if (st.isFile() && isImageFile(name)) {
      found.push({ absPath: abs, sampleId: sampleIdFor(name), label: 'normal', split: 'train' });
    } else if (st.isDirectory() && name === 'train') {
      for (const sub of listSorted(abs)) {
        const subAbs = path.join(abs, sub);
        if (!statSync(subAbs).isDirectory()) continue;
        if (sub !== 'good') {
          throw new ConfigError(
            `train/${sub} is not supported: training images must all be defect-free (put them in train/good)`,
          );
        }
        for (const file of listSorted(subAbs)) {
          if (!isImageFile(file)) continue;
          found.push({
            absPath: path.join(subAbs, file),
            sampleId: sampleIdFor('train', sub, file),
            label: 'normal',
            split: 'train',
          });
        }
      }
    } else if (st.isDirectory() && name === 'test') {
      for (const sub of listSorted(abs)) {
        const subAbs = path.join(abs, sub);
        if (!statSync(subAbs).isDirectory()) continue;
        const label: Label = sub === 'good' ? 'normal' : 'anomalous';
        for (const file of listSorted(subAbs)) {
          if (!isImageFile(file)) continue;
          found.push({
            absPath: path.join(subAbs, file),
            sampleId: sampleIdFor('test', sub, file),
            label,
            split: 'test',
          });
        }
      }
    }
  }
  if (found.length === 0) {
    throw new ConfigError(`no PNM images found under ${imageDir}`);
  }
  return found;
}

export function extractPyramid(
  backbone: Backbone,
  imagePath: string,
  inputSizes: number[],
): ScaleMap[] {
  const img = readImage(imagePath);
  const scales: ScaleMap[] = [];
  for (const size of inputSizes) {
    const map = backbone.extract(normalizeImage(resizeBilinear(img, size, size)));
    const side = size / backbone.reduction;
    // a swapped-in extractor must still produce the contracted shape
    if (map.channels !== backbone.channels || map.height !== side || map.width !== side) {
      throw new Error(
        `backbone ${backbone.id} produced ${map.channels}x${map.height}x${map.width} ` +
          `for input ${size}, expected ${backbone.channels}x${side}x${side}`,
      );
    }
    scales.push(map);
  }
  return scales;
}

export function exportDataset(cfg: ExportConfig): ExportResult {
  const backbone = resolveBackbone(cfg.backbone);
  validateExportConfig(cfg, backbone);
  const className = cfg.className ?? path.basename(path.resolve(cfg.imageDir));
  const sources = discoverImages(cfg.imageDir);

  const featureDir = path.join(cfg.outputDir, 'features');
  mkdirSync(featureDir, { recursive: true });

  const entries: ManifestEntry[] = [];
  const errors: ExportError[] = [];
  let written = 0;
  for (const src of sources) {
    let scales: ScaleMap[];
    try {
      scales = extractPyramid(backbone, src.absPath, cfg.inputSizes);
    } catch (err) {
      errors.push({ path: src.absPath, message: (err as Error).message });
      continue;
    }
    const fileName = `${src.sampleId}.csfp`;
    writeCsfp(scales, path.join(featureDir, fileName));
    written += 1;
    entries.push({
      sample_id: src.sampleId,
      feature_file_path: path.posix.join('features', fileName),
      label: src.label,
      split: src.split,
      class_name: className,
    });
  }

  const manifest: Manifest = { format_version: MANIFEST_FORMAT_VERSION, entries };
  const manifestPath = path.join(cfg.outputDir, 'manifest.json');
  writeManifest(manifest, manifestPath);
  return { manifestPath, written, errors };
}

export { DEFAULT_BACKBONE };
