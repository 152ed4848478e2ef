import { mkdtempSync, mkdirSync, writeFileSync } from 'fs';
import * as os from 'os';
import * as path from 'path';

export function tempDir(prefix = 'csfp-test-'): string {
  return mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** binary grayscale PNM; pixels is row-major, length width*height */
export function encodePgm(width: number, height: number, pixels: number[] | Uint8Array): Buffer {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii');
  return Buffer.concat([header, Buffer.from(pixels)]);
}

/** binary RGB PNM; pixels is row-major RGB triples, length width*height*3 */
export function encodePpm(width: number, height: number, pixels: number[] | Uint8Array): Buffer {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, 'ascii');
  return Buffer.concat([header, Buffer.from(pixels)]);
}

/** deterministic texture so images differ from each other without a RNG dep */
export function texturePixels(width: number, height: number, seed: number): Uint8Array {
  const out = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      out[y * width + x] = (x * 7 + y * 13 + seed * 41 + ((x * y) % 11)) % 256;
    }
  }
  return out;
}

export function writePgm(dir: string, name: string, width: number, height: number, seed: number): string {
  mkdirSync(dir, { recursive: true });
  const file = path.join(dir, name);
  writeFileSync(file, encodePgm(width, height, texturePixels(width, height, seed)));
  return file;
}
