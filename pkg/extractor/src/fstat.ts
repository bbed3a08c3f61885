/**
 * Binary feature files shared with the optimizer toolkit, bit-exact:
 *
 *   FMATX1\n{"rows":n,"dim":D,"dtype":"f64"}\n  then n*D little-endian f64
 *   FSTAT1\n{"dim":D,"count":n,"dtype":"f64"}\n then D (mean) + D*D (cov)
 */

import * as fs from "fs";

const FMATX_MAGIC = Buffer.from("FMATX1\n", "ascii");
const FSTAT_MAGIC = Buffer.from("FSTAT1\n", "ascii");

export interface FeatureMatrix {
  rows: number;
  dim: number;
  /** row-major, rows*dim values */
  data: Float64Array;
}

export interface FeatureStats {
  dim: number;
  count: number;
  mean: Float64Array;
  /** row-major dim*dim */
  cov: Float64Array;
}

function headerBuffer(fields: Record<string, number | string>): Buffer {
  return Buffer.from(JSON.stringify(fields) + "\n", "ascii");
}

function f64Buffer(data: Float64Array): Buffer {
  const buf = Buffer.allocUnsafe(data.length * 8);
  for (let i = 0; i < data.length; i++) buf.writeDoubleLE(data[i], i * 8);
  return buf;
}

export function writeFeatureMatrix(path: string, matrix: FeatureMatrix): void {
  if (matrix.data.length !== matrix.rows * matrix.dim) {
    throw new Error(`feature matrix size mismatch: ${matrix.data.length}`);
  }
  for (const v of matrix.data) {
    if (!Number.isFinite(v)) throw new Error("feature matrix contains non-finite values");
  }
  const header = headerBuffer({ rows: matrix.rows, dim: matrix.dim, dtype: "f64" });
  fs.writeFileSync(path, Buffer.concat([FMATX_MAGIC, header, f64Buffer(matrix.data)]));
}

export function writeStats(path: string, stats: FeatureStats): void {
  if (stats.mean.length !== stats.dim || stats.cov.length !== stats.dim * stats.dim) {
    throw new Error("stats size mismatch");
  }
  const header = headerBuffer({ dim: stats.dim, count: stats.count, dtype: "f64" });
  fs.writeFileSync(
    path,
    Buffer.concat([FSTAT_MAGIC, header, f64Buffer(stats.mean), f64Buffer(stats.cov)])
  );
}

function parseHeader(buf: Buffer, magic: Buffer, path: string): { fields: any; offset: number } {
  if (buf.length < magic.length || !buf.subarray(0, magic.length).equals(magic)) {
    throw new Error(`${path}: unrecognized format`);
  }
  const nl = buf.indexOf(0x0a, magic.length);
  if (nl < 0) throw new Error(`${path}: truncated header`);
  const fields = JSON.parse(buf.subarray(magic.length, nl).toString("ascii"));
  if (fields.dtype !== "f64") throw new Error(`${path}: unsupported dtype`);
  return { fields, offset: nl + 1 };
}

function readF64(buf: Buffer, offset: number, count: number, path: string): Float64Array {
  if (buf.length - offset < count * 8) throw new Error(`${path}: truncated payload`);
  if (buf.length - offset > count * 8) throw new Error(`${path}: trailing data after payload`);
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) out[i] = buf.readDoubleLE(offset + i * 8);
  return out;
}

export function readFeatureMatrix(path: string): FeatureMatrix {
  const buf = fs.readFileSync(path);
  const { fields, offset } = parseHeader(buf, FMATX_MAGIC, path);
  const rows = fields.rows >>> 0;
  const dim = fields.dim >>> 0;
  return { rows, dim, data: readF64(buf, offset, rows * dim, path) };
}

export function readStats(path: string): FeatureStats {
  const buf = fs.readFileSync(path);
  const { fields, offset } = parseHeader(buf, FSTAT_MAGIC, path);
  const dim = fields.dim >>> 0;
  const count = fields.count >>> 0;
  const all = readF64(buf, offset, dim + dim * dim, path);
  return { dim, count, mean: all.subarray(0, dim), cov: all.subarray(dim) };
}

/**
 * Column mean and unbiased (n-1) sample covariance, accumulated in f64 and
 * symmetrized. O(n * dim^2); fine at desk scale.
 */
export function accumulateStats(matrix: FeatureMatrix): FeatureStats {
  const { rows: n, dim: d, data } = matrix;
  if (n < 2) throw new Error(`count < 2: need at least 2 rows, got ${n}`);
  const mean = new Float64Array(d);
  for (let r = 0; r < n; r++) {
    const base = r * d;
    for (let c = 0; c < d; c++) mean[c] += data[base + c];
  }
  for (let c = 0; c < d; c++) mean[c] /= n;
  const cov = new Float64Array(d * d);
  const centered = new Float64Array(d);
  for (let r = 0; r < n; r++) {
    const base = r * d;
    for (let c = 0; c < d; c++) centered[c] = data[base + c] - mean[c];
    for (let i = 0; i < d; i++) {
      const ci = centered[i];
      if (ci === 0) continue;
      const row = i * d;
      for (let j = i; j < d; j++) cov[row + j] += ci * centered[j];
    }
  }
  const scale = 1 / (n - 1);
  for (let i = 0; i < d; i++) {
    for (let j = i; j < d; j++) {
      const v = cov[i * d + j] * scale;
      cov[i * d + j] = v;
      cov[j * d + i] = v;
    }
  }
  return { dim: d, count: n, mean, cov };
}
