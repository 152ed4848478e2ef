/*
 Dataset manifest the detector trains from: a JSON document listing every
 exported pyramid with its label and split. Written with sorted keys and
 two-space indentation so repeated exports of the same inputs are
 byte-identical.
*/

import { renameSync, writeFileSync, readFileSync } from 'fs';

export const MANIFEST_FORMAT_VERSION = 1;

export type Label = 'normal' | 'anomalous';
export type Split = 'train' | 'test';

export interface ManifestEntry {
  sample_id: string;
  /** relative to the manifest's directory */
  feature_file_path: string;
  label: Label;
  split: Split;
  class_name: string;
}

export interface Manifest {
  format_version: number;
  entries: ManifestEntry[];
}

export function validateManifest(manifest: Manifest): void {
  if (manifest.format_version !== MANIFEST_FORMAT_VERSION) {
    throw new Error(`unsupported manifest format_version ${manifest.format_version}`);
  }
  const seen = new Set<string>();
  for (const e of manifest.entries) {
    if (e.label !== 'normal' && e.label !== 'anomalous') {
      throw new Error(`bad label ${JSON.stringify(e.label)} for ${e.sample_id}`);
    }
    if (e.split !== 'train' && e.split !== 'test') {
      throw new Error(`bad split ${JSON.stringify(e.split)} for ${e.sample_id}`);
    }
    // the detector only ever fits on defect-free samples
    if (e.split === 'train' && e.label !== 'normal') {
      throw new Error(`train entry ${e.sample_id} is labeled ${e.label}`);
    }
    if (seen.has(e.sample_id)) {
      throw new Error(`duplicate sample_id ${JSON.stringify(e.sample_id)}`);
    }
    seen.add(e.sample_id);
  }
}

function sortedEntry(e: ManifestEntry): Record<string, string> {
  // alphabetical key order, matching the consumer's serializer
  return {
    class_name: e.class_name,
    feature_file_path: e.feature_file_path,
    label: e.label,
    sample_id: e.sample_id,
    split: e.split,
  };
}

export function encodeManifest(manifest: Manifest): string {
  validateManifest(manifest);
  const doc = {
    entries: manifest.entries.map(sortedEntry),
    format_version: manifest.format_version,
  };
  return JSON.stringify(doc, null, 2) + '\n';
}

export function writeManifest(manifest: Manifest, path: string): void {
  const tmp = path + '.tmp';
  writeFileSync(tmp, encodeManifest(manifest), 'utf-8');
  renameSync(tmp, path);
}

export function readManifest(path: string): Manifest {
  const doc = JSON.parse(readFileSync(path, 'utf-8'));
  if (typeof doc !== 'object' || doc === null || !Array.isArray(doc.entries)) {
    throw new Error('manifest must be an object with an entries array');
  }
  const manifest: Manifest = {
    format_version: doc.format_version,
    entries: doc.entries as ManifestEntry[],
  };
  validateManifest(manifest);
  return manifest;
}
