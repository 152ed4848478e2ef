import { readFileSync, writeFileSync } from 'fs';
import * as path from 'path';
import { afterEach, describe, expect, it, vi } from 'vitest';

import { main } from '../src/cli';
import { encodeCsfp } from '../src/csfp';
import { tempDir, writePgm } from './helpers';

interface RunResult {
  code: number;
  out: string;
  err: string;
}

function run(argv: string[]): RunResult {
  let out = '';
  let err = '';
  const outSpy = vi
    .spyOn(process.stdout, 'write')
    .mockImplementation((chunk) => ((out += String(chunk)), true));
  const errSpy = vi
    .spyOn(process.stderr, 'write')
    .mockImplementation((chunk) => ((err += String(chunk)), true));
  try {
    return { code: main(argv), out, err };
  } finally {
    outSpy.mockRestore();
    errSpy.mockRestore();
  }
}

afterEach(() => {
  vi.restoreAllMocks();
});

function smallDataset(): string {
  const root = tempDir();
  writePgm(path.join(root, 'train', 'good'), 'a.pgm', 64, 64, 1);
  writePgm(path.join(root, 'test', 'good'), 'b.pgm', 64, 64, 2);
  writePgm(path.join(root, 'test', 'dent'), 'c.pgm', 64, 64, 3);
  return root;
}

describe('usage handling', () => {
  it('prints usage and fails without a command', () => {
    const r = run([]);
    expect(r.code).toBe(2);
    expect(r.out).toContain('usage: csfp-export');
  });

  it('prints usage on --help with exit 0', () => {
    expect(run(['--help'])).toMatchObject({ code: 0 });
    expect(run(['export', '--help']).code).toBe(0);
    expect(run(['verify', '--help']).code).toBe(0);
  });

  it('rejects unknown commands', () => {
    const r = run(['transmogrify']);
    expect(r.code).toBe(2);
    expect(r.err).toContain('unknown command');
  });

  it('rejects unknown flags', () => {
    const r = run(['export', '--frobnicate']);
    expect(r.code).toBe(2);
  });
});

describe('export command', () => {
  it('requires --images and --out', () => {
    const r = run(['export', '--images', 'somewhere']);
    expect(r.code).toBe(2);
    expect(r.err).toContain('--images and --out');
  });

  it('rejects a missing image folder', () => {
    const r = run(['export', '--images', '/no/such/dir', '--out', tempDir()]);
    expect(r.code).toBe(2);
    expect(r.err).toContain('not found');
  });

  it('rejects malformed size lists', () => {
    const r = run([
      'export',
      '--images',
      smallDataset(),
      '--out',
      tempDir(),
      '--sizes',
      '64,banana',
    ]);
    expect(r.code).toBe(2);
    expect(r.err).toContain('comma-separated');
  });

  it('rejects non-halving size lists', () => {
    const r = run([
      'export',
      '--images',
      smallDataset(),
      '--out',
      tempDir(),
      '--sizes',
      '128,96',
    ]);
    expect(r.code).toBe(2);
    expect(r.err).toContain('halve');
  });

  it('rejects unknown backbones', () => {
    const r = run([
      'export',
      '--images',
      smallDataset(),
      '--out',
      tempDir(),
      '--backbone',
      'nope',
    ]);
    expect(r.code).toBe(2);
    expect(r.err).toContain('unknown backbone');
  });

  it('exports a folder and reports the manifest path', () => {
    const out = tempDir();
    const r = run([
      'export',
      '--images',
      smallDataset(),
      '--out',
      out,
      '--sizes',
      '64,32',
      '--class-name',
      'widget',
    ]);
    expect(r.code).toBe(0);
    expect(r.out).toContain('wrote 3 pyramids');
    expect(r.out).toContain(path.join(out, 'manifest.json'));
    const manifest = JSON.parse(readFileSync(path.join(out, 'manifest.json'), 'utf-8'));
    expect(manifest.entries).toHaveLength(3);
    expect(manifest.entries[0].class_name).toBe('widget');
  });

  it('reports per-file failures on stderr but still succeeds', () => {
    const root = smallDataset();
    writeFileSync(path.join(root, 'train', 'good', 'bad.pgm'), 'junk');
    const r = run(['export', '--images', root, '--out', tempDir(), '--sizes', '64']);
    expect(r.code).toBe(0);
    expect(r.err).toContain('bad.pgm');
    expect(r.err).toContain('1 images failed');
    expect(r.out).toContain('wrote 3 pyramids');
  });

  it('fails when nothing could be exported', () => {
    const root = tempDir();
    writeFileSync(path.join(root, 'only.pgm'), 'junk');
    const r = run(['export', '--images', root, '--out', tempDir(), '--sizes', '64']);
    expect(r.code).toBe(1);
    expect(r.out).toContain('wrote 0 pyramids');
  });
});

describe('verify command', () => {
  function exported(): string {
    const out = tempDir();
    const r = run(['export', '--images', smallDataset(), '--out', out, '--sizes', '64,32']);
    expect(r.code).toBe(0);
    return out;
  }

  it('requires at least one operand', () => {
    expect(run(['verify']).code).toBe(2);
  });

  it('accepts single valid files', () => {
    const out = exported();
    const file = path.join(out, 'features', 'train_good_a.csfp');
    const r = run(['verify', file]);
    expect(r.code).toBe(0);
    expect(r.out).toContain(`ok ${file}`);
    expect(r.out).toContain('checked 1 files, 0 with violations');
  });

  it('follows a manifest when given an export directory', () => {
    const r = run(['verify', exported()]);
    expect(r.code).toBe(0);
    expect(r.out).toContain('checked 3 files, 0 with violations');
  });

  it('fails with details on a corrupted file', () => {
    const out = exported();
    const file = path.join(out, 'features', 'train_good_a.csfp');
    const whole = readFileSync(file);
    writeFileSync(file, whole.subarray(0, whole.length - 5));
    const r = run(['verify', out]);
    expect(r.code).toBe(1);
    expect(r.out).toContain('BAD');
    expect(r.out).toContain('ended early');
    expect(r.out).toContain('1 with violations');
  });

  it('flags files that violate pyramid shape rules', () => {
    const file = path.join(tempDir(), 'odd.csfp');
    writeFileSync(
      file,
      encodeCsfp([{ channels: 3, height: 2, width: 2, data: new Float32Array(12) }]),
    );
    const r = run(['verify', file]);
    expect(r.code).toBe(1);
    expect(r.out).toContain('odd channel count 3');
  });

  it('rejects directories without a manifest', () => {
    expect(run(['verify', tempDir()]).code).toBe(2);
  });
});
