/*
 Post-export validation: checks a written CSFP file against every invariant
 the detector assumes, so malformed artifacts are caught next to the bug
 that produced them instead of deep inside training.
*/

import { readFileSync } from 'fs';

import { decodeCsfp, ScaleMap } from './csfp';

export interface VerifyReport {
  path: string;
  /** empty means the file is valid */
  violations: string[];
}

export function verifyScales(scales: ScaleMap[], violations: string[]): void {
  const channels = scales[0].channels;
  scales.forEach((s, k) => {
    if (s.channels !== channels) {
      violations.push(`scale ${k} has ${s.channels} channels, scale 0 has ${channels}`);
    }
    if (s.channels % 2 !== 0) {
      violations.push(`scale ${k} has odd channel count ${s.channels}`);
    }
    if (s.height < 1 || s.width < 1) {
      violations.push(`scale ${k} has empty spatial dims ${s.height}x${s.width}`);
    }
    if (k > 0) {
      const prev = scales[k - 1];
      if (s.height * 2 !== prev.height || s.width * 2 !== prev.width) {
        violations.push(
          `scale ${k} is ${s.height}x${s.width}, expected half of ${prev.height}x${prev.width}`,
        );
      }
    }
    for (let i = 0; i < s.data.length; i++) {
      if (!Number.isFinite(s.data[i])) {
        violations.push(`scale ${k} contains a non-finite value at index ${i}`);
        break;
      }
    }
  });
}

export function verifyExport(filePath: string): VerifyReport {
  const violations: string[] = [];
  let buf: Buffer;
  try {
    buf = readFileSync(filePath);
  } catch (err) {
    return { path: filePath, violations: [`unreadable: ${(err as Error).message}`] };
  }
  let scales: ScaleMap[];
  try {
    scales = decodeCsfp(buf);
  } catch (err) {
    return { path: filePath, violations: [(err as Error).message] };
  }
  verifyScales(scales, violations);
  return { path: filePath, violations };
}
