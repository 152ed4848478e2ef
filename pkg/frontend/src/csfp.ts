/*
 CSFP container: magic "CSFP", u32 LE format version (1), u32 scale count,
 then per scale u32 C, u32 H, u32 W followed by C*H*W float32 values in
 C-order. Same byte layout the detector reads.
*/

import { renameSync, writeFileSync, readFileSync } from 'fs';

export const CSFP_MAGIC = 'CSFP';
export const CSFP_VERSION = 1;

export interface ScaleMap {
  channels: number;
  height: number;
  width: number;
  /** length channels*height*width, C-order */
  data: Float32Array;
}

export function encodeCsfp(scales: ScaleMap[]): Buffer {
  if (scales.length === 0) {
    throw new Error('a pyramid needs at least one scale');
  }
  let payload = 0;
  for (const s of scales) {
    if (s.data.length !== s.channels * s.height * s.width) {
      throw new Error(
        `scale data length ${s.data.length} does not match ${s.channels}x${s.height}x${s.width}`,
      );
    }
    payload += 12 + 4 * s.data.length;
  }
  const buf = Buffer.alloc(12 + payload);
  buf.write(CSFP_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(CSFP_VERSION, 4);
  buf.writeUInt32LE(scales.length, 8);
  let offset = 12;
  for (const s of scales) {
    buf.writeUInt32LE(s.channels, offset);
    buf.writeUInt32LE(s.height, offset + 4);
    buf.writeUInt32LE(s.width, offset + 8);
    offset += 12;
    for (let i = 0; i < s.data.length; i++) {
      buf.writeFloatLE(s.data[i], offset);
      offset += 4;
    }
  }
  return buf;
}

export function writeCsfp(scales: ScaleMap[], path: string): void {
  const tmp = path + '.tmp';
  writeFileSync(tmp, encodeCsfp(scales));
  renameSync(tmp, path);
}

export function decodeCsfp(buf: Buffer): ScaleMap[] {
  if (buf.length < 12) {
    throw new Error('file ended early while reading the header');
  }
  if (buf.toString('ascii', 0, 4) !== CSFP_MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString('ascii', 0, 4))}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== CSFP_VERSION) {
    throw new Error(`unsupported format version ${version}`);
  }
  const numScales = buf.readUInt32LE(8);
  if (numScales === 0) {
    throw new Error('a pyramid needs at least one scale');
  }
  const scales: ScaleMap[] = [];
  let offset = 12;
  for (let k = 0; k < numScales; k++) {
    if (offset + 12 > buf.length) {
      throw new Error(`file ended early while reading the header of scale ${k}`);
    }
    const channels = buf.readUInt32LE(offset);
    const height = buf.readUInt32LE(offset + 4);
    const width = buf.readUInt32LE(offset + 8);
    offset += 12;
    const count = channels * height * width;
    if (offset + 4 * count > buf.length) {
      throw new Error(`file ended early while reading scale ${k}`);
    }
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      data[i] = buf.readFloatLE(offset);
      offset += 4;
    }
    scales.push({ channels, height, width, data });
  }
  if (offset !== buf.length) {
    throw new Error(`${buf.length - offset} trailing bytes after the last scale`);
  }
  return scales;
}

export function readCsfp(path: string): ScaleMap[] {
  return decodeCsfp(readFileSync(path));
}
