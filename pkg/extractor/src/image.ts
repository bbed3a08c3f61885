/** PNG decoding and extractor-input preprocessing. */

import * as fs from "fs";
import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** interleaved RGB in [0, 1], length width*height*3 */
  pixels: Float32Array;
}

export function decodePng(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const { width, height, data } = png;
  const pixels = new Float32Array(width * height * 3);
  for (let i = 0, p = 0; i < width * height; i++, p += 4) {
    pixels[i * 3] = data[p] / 255;
    pixels[i * 3 + 1] = data[p + 1] / 255;
    pixels[i * 3 + 2] = data[p + 2] / 255;
  }
  return { width, height, pixels };
}

export function encodePng(path: string, image: RgbImage): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = Math.round(Math.min(1, Math.max(0, image.pixels[i * 3])) * 255);
    png.data[i * 4 + 1] = Math.round(Math.min(1, Math.max(0, image.pixels[i * 3 + 1])) * 255);
    png.data[i * 4 + 2] = Math.round(Math.min(1, Math.max(0, image.pixels[i * 3 + 2])) * 255);
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

function bilinearSample(image: RgbImage, x: number, y: number, out: Float32Array, o: number) {
  const x0 = Math.floor(x);
  const y0 = Math.floor(y);
  const x1 = Math.min(x0 + 1, image.width - 1);
  const y1 = Math.min(y0 + 1, image.height - 1);
  const fx = x - x0;
  const fy = y - y0;
  for (let c = 0; c < 3; c++) {
    const v00 = image.pixels[(y0 * image.width + x0) * 3 + c];
    const v01 = image.pixels[(y0 * image.width + x1) * 3 + c];
    const v10 = image.pixels[(y1 * image.width + x0) * 3 + c];
    const v11 = image.pixels[(y1 * image.width + x1) * 3 + c];
    out[o + c] =
      v00 * (1 - fx) * (1 - fy) + v01 * fx * (1 - fy) + v10 * (1 - fx) * fy + v11 * fx * fy;
  }
}

/**
 * Shorter-side resize to `size`, then center crop to size x size.
 * Returns interleaved RGB in [0, 1], length size*size*3.
 */
export function preprocess(image: RgbImage, size: number): Float32Array {
  const scale = size / Math.min(image.width, image.height);
  const newW = Math.max(size, Math.round(image.width * scale));
  const newH = Math.max(size, Math.round(image.height * scale));
  const offX = (newW - size) / 2;
  const offY = (newH - size) / 2;
  const out = new Float32Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    // map output pixel centers back into source coordinates
    const sy = Math.min(image.height - 1, Math.max(0, ((y + offY + 0.5) * image.height) / newH - 0.5));
    for (let x = 0; x < size; x++) {
      const sx = Math.min(image.width - 1, Math.max(0, ((x + offX + 0.5) * image.width) / newW - 0.5));
      bilinearSample(image, sx, sy, out, (y * size + x) * 3);
    }
  }
  return out;
}

export function listImages(dir: string): string[] {
  return fs
    .readdirSync(dir)
    .filter((name) => /\.png$/i.test(name))
    .sort();
}
