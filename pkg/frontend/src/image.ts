/*
 Minimal image handling: binary PNM decoding (P5 grayscale, P6 RGB) and
 bilinear resizing. Values live in [0, 1] as float64, layout HWC.
*/

import { readFileSync } from 'fs';

export interface Image {
  height: number;
  width: number;
  /** always 3; grayscale is replicated on load */
  channels: number;
  /** length height*width*channels, HWC order, values in [0, 1] */
  data: Float64Array;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

/*
 PNM headers are whitespace-separated tokens with #-to-end-of-line comments
 allowed between them. Returns the token and the offset just past it.
*/
function nextToken(buf: Buffer, offset: number): [string, number] {
  let i = offset;
  for (;;) {
    while (i < buf.length && WHITESPACE.has(buf[i])) i++;
    if (i < buf.length && buf[i] === 0x23) {
      while (i < buf.length && buf[i] !== 0x0a) i++;
      continue;
    }
    break;
  }
  const start = i;
  while (i < buf.length && !WHITESPACE.has(buf[i]) && buf[i] !== 0x23) i++;
  if (i === start) {
    throw new Error('truncated header');
  }
  return [buf.toString('ascii', start, i), i];
}

export function decodePnm(buf: Buffer): Image {
  if (buf.length < 2) {
    throw new Error('not a PNM file');
  }
  const magic = buf.toString('ascii', 0, 2);
  if (magic !== 'P5' && magic !== 'P6') {
    throw new Error(`not a binary PNM file (magic ${JSON.stringify(magic)})`);
  }
  let offset = 2;
  let token: string;
  [token, offset] = nextToken(buf, offset);
  const width = Number(token);
  [token, offset] = nextToken(buf, offset);
  const height = Number(token);
  [token, offset] = nextToken(buf, offset);
  const maxval = Number(token);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad dimensions ${width}x${height}`);
  }
  if (maxval !== 255) {
    throw new Error(`only maxval 255 is supported, got ${maxval}`);
  }
  // exactly one whitespace byte separates the header from the raster
  if (offset >= buf.length || !WHITESPACE.has(buf[offset])) {
    throw new Error('truncated header');
  }
  offset += 1;
  const perPixel = magic === 'P6' ? 3 : 1;
  const expected = width * height * perPixel;
  if (buf.length - offset < expected) {
    throw new Error(
      `raster has ${buf.length - offset} bytes, expected ${expected}`,
    );
  }
  const data = new Float64Array(width * height * 3);
  if (magic === 'P6') {
    for (let i = 0; i < expected; i++) {
      data[i] = buf[offset + i] / 255;
    }
  } else {
    for (let i = 0; i < width * height; i++) {
      const v = buf[offset + i] / 255;
      data[3 * i] = v;
      data[3 * i + 1] = v;
      data[3 * i + 2] = v;
    }
  }
  return { height, width, channels: 3, data };
}

export function readImage(path: string): Image {
  return decodePnm(readFileSync(path));
}

/*
 Bilinear with half-pixel centers: source coordinate of output pixel i is
 (i + 0.5) * scale - 0.5, clamped to the valid range. Matches the usual
 align_corners=false convention.
*/
export function resizeBilinear(img: Image, outHeight: number, outWidth: number): Image {
  if (outHeight < 1 || outWidth < 1) {
    throw new Error(`bad target size ${outHeight}x${outWidth}`);
  }
  if (outHeight === img.height && outWidth === img.width) {
    return { height: img.height, width: img.width, channels: 3, data: img.data.slice() };
  }
  const { height, width, data } = img;
  const out = new Float64Array(outHeight * outWidth * 3);
  const scaleY = height / outHeight;
  const scaleX = width / outWidth;
  for (let oy = 0; oy < outHeight; oy++) {
    let sy = (oy + 0.5) * scaleY - 0.5;
    if (sy < 0) sy = 0;
    if (sy > height - 1) sy = height - 1;
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, height - 1);
    const fy = sy - y0;
    for (let ox = 0; ox < outWidth; ox++) {
      let sx = (ox + 0.5) * scaleX - 0.5;
      if (sx < 0) sx = 0;
      if (sx > width - 1) sx = width - 1;
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, width - 1);
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const v00 = data[(y0 * width + x0) * 3 + c];
        const v01 = data[(y0 * width + x1) * 3 + c];
        const v10 = data[(y1 * width + x0) * 3 + c];
        const v11 = data[(y1 * width + x1) * 3 + c];
        const top = v00 + (v01 - v00) * fx;
        const bottom = v10 + (v11 - v10) * fx;
        out[(oy * outWidth + ox) * 3 + c] = top + (bottom - top) * fy;
      }
    }
  }
  return { height: outHeight, width: outWidth, channels: 3, data: out };
}
