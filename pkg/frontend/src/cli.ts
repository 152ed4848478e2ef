#!/usr/bin/env node
/*
 Command line entry point.

   csfp-export export --images DIR --out DIR [--sizes 768,384,192]
                      [--backbone seeded-304] [--class-name NAME]
   csfp-export verify PATH [PATH...]

 verify accepts .csfp files or an export directory (its manifest.json is
 followed and every referenced pyramid is checked).

 Exit codes: 0 success, 1 runtime failure or failed verification, 2 bad
 flags or configuration.
*/

import { existsSync, readFileSync, statSync } from 'fs';
import * as path from 'path';
import { parseArgs } from 'node:util';

import { DEFAULT_BACKBONE } from './backbone';
import { ConfigError } from './errors';
import { DEFAULT_INPUT_SIZES, exportDataset } from './exporter';
import { verifyExport } from './verify';

const USAGE = `usage: csfp-export <command> [options]

commands:
  export   extract feature pyramids from an image folder
  verify   check exported .csfp files against the pyramid invariants

export options:
  --images DIR       image folder (train/good, test/good, test/<defect>)
  --out DIR          output folder for features/ and manifest.json
  --sizes LIST       comma-separated square input sizes, each half the
                     previous (default ${DEFAULT_INPUT_SIZES.join(',')})
  --backbone ID      feature extractor identifier (default ${DEFAULT_BACKBONE})
  --class-name NAME  category recorded in the manifest (default: basename
                     of the image folder)

verify arguments:
  one or more .csfp files, or an export directory with a manifest.json
`;

function parseSizes(text: string): number[] {
  const sizes = text.split(',').map((piece) => {
    const n = Number(piece.trim());
    if (!Number.isInteger(n)) {
      throw new ConfigError(`sizes must be a comma-separated list of integers, got ${JSON.stringify(text)}`);
    }
    return n;
  });
  return sizes;
}

function runExport(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      images: { type: 'string' },
      out: { type: 'string' },
      sizes: { type: 'string' },
      backbone: { type: 'string' },
      'class-name': { type: 'string' },
      help: { type: 'boolean' },
    },
    allowPositionals: false,
  });
  if (values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  if (!values.images || !values.out) {
    throw new ConfigError('--images and --out are required');
  }
  if (!existsSync(values.images) || !statSync(values.images).isDirectory()) {
    throw new ConfigError(`image folder not found: ${values.images}`);
  }
  const result = exportDataset({
    imageDir: values.images,
    outputDir: values.out,
    inputSizes: values.sizes ? parseSizes(values.sizes) : DEFAULT_INPUT_SIZES,
    backbone: values.backbone ?? DEFAULT_BACKBONE,
    className: values['class-name'],
  });
  for (const err of result.errors) {
    process.stderr.write(`error: ${err.path}: ${err.message}\n`);
  }
  process.stdout.write(`wrote ${result.written} pyramids, manifest at ${result.manifestPath}\n`);
  if (result.errors.length > 0) {
    process.stderr.write(`${result.errors.length} images failed\n`);
  }
  return result.written > 0 ? 0 : 1;
}

function collectTargets(operand: string): string[] {
  if (existsSync(operand) && statSync(operand).isDirectory()) {
    const manifestPath = path.join(operand, 'manifest.json');
    if (!existsSync(manifestPath)) {
      throw new ConfigError(`${operand} has no manifest.json`);
    }
    const doc = JSON.parse(readFileSync(manifestPath, 'utf-8'));
    if (!Array.isArray(doc.entries)) {
      throw new ConfigError(`${manifestPath} has no entries array`);
    }
    return doc.entries.map((e: { feature_file_path: string }) =>
      path.join(operand, e.feature_file_path),
    );
  }
  return [operand];
}

function runVerify(argv: string[]): number {
  const { values, positionals } = parseArgs({
    args: argv,
    options: { help: { type: 'boolean' } },
    allowPositionals: true,
  });
  if (values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  if (positionals.length === 0) {
    throw new ConfigError('verify needs at least one file or export directory');
  }
  const targets = positionals.flatMap(collectTargets);
  let bad = 0;
  for (const target of targets) {
    const report = verifyExport(target);
    if (report.violations.length === 0) {
      process.stdout.write(`ok ${target}\n`);
    } else {
      bad += 1;
      for (const violation of report.violations) {
        process.stdout.write(`BAD ${target}: ${violation}\n`);
      }
    }
  }
  process.stdout.write(`checked ${targets.length} files, ${bad} with violations\n`);
  return bad === 0 ? 0 : 1;
}

export function main(argv: string[]): number {
  try {
    const command = argv[0];
    if (command === undefined || command === '--help' || command === '-h') {
      process.stdout.write(USAGE);
      return command === undefined ? 2 : 0;
    }
    if (command === 'export') {
      return runExport(argv.slice(1));
    }
    if (command === 'verify') {
      return runVerify(argv.slice(1));
    }
    throw new ConfigError(`unknown command ${JSON.stringify(command)}`);
  } catch (err) {
    if (err instanceof ConfigError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    // parseArgs signals unknown or malformed flags with coded TypeErrors
    const code = (err as NodeJS.ErrnoException).code ?? '';
    if (typeof code === 'string' && code.startsWith('ERR_PARSE_ARGS')) {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
