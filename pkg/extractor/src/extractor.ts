/**
 * Deterministic 2048-d image feature extractor.
 *
 * A fixed convolutional pyramid with seeded pseudo-random weights followed
 * by a 1x1 expansion and global average pooling. No pretrained weights are
 * involved: the extractor id records that provenance, and distances are
 * comparable only between files produced under the same id. Inference runs
 * in 32-bit; callers serialize features as 64-bit.
 */

import * as tf from "@tensorflow/tfjs";
import { RgbImage, preprocess } from "./image";

export const FEATURE_DIM = 2048;
export const INPUT_SIZE = 32;
export const WEIGHT_SEED = 1337;
export const EXTRACTOR_ID = `seeded-conv${INPUT_SIZE}-${FEATURE_DIM}:v1:seed=${WEIGHT_SEED}`;

/** mulberry32: tiny deterministic PRNG for weight generation */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

interface ConvLayer {
  kernel: tf.Tensor4D;
  bias: tf.Tensor1D;
  stride: number;
}

// kernel plan: [size, inChannels, outChannels, stride]; a 2x2 average pool
// sits before the final 1x1 expansion to keep it cheap
const PLAN: Array<[number, number, number, number]> = [
  [3, 3, 24, 2], // 32 -> 16
  [3, 24, 48, 2], // 16 -> 8
  [3, 48, 96, 2], // 8 -> 4
  [1, 96, FEATURE_DIM, 1], // applied at 2x2 after pooling
];

let layers: ConvLayer[] | null = null;

function buildLayers(): ConvLayer[] {
  const rand = mulberry32(WEIGHT_SEED);
  return PLAN.map(([size, cin, cout, stride]) => {
    const fanIn = size * size * cin;
    const limit = Math.sqrt(6 / fanIn);
    const kernel = new Float32Array(size * size * cin * cout);
    for (let i = 0; i < kernel.length; i++) kernel[i] = (rand() * 2 - 1) * limit;
    const bias = new Float32Array(cout);
    for (let i = 0; i < bias.length; i++) bias[i] = (rand() * 2 - 1) * 0.1;
    return {
      kernel: tf.tensor4d(kernel, [size, size, cin, cout]),
      bias: tf.tensor1d(bias),
      stride,
    };
  });
}

function model(): ConvLayer[] {
  if (!layers) layers = buildLayers();
  return layers;
}

/**
 * Features for a batch of preprocessed inputs (each INPUT_SIZE^2*3 floats
 * in [0, 1]). Returns one FEATURE_DIM row per input.
 */
export function extractBatch(inputs: Float32Array[]): Float32Array {
  if (inputs.length === 0) return new Float32Array(0);
  const net = model();
  const out = tf.tidy(() => {
    const stacked = new Float32Array(inputs.length * INPUT_SIZE * INPUT_SIZE * 3);
    inputs.forEach((pix, i) => stacked.set(pix, i * INPUT_SIZE * INPUT_SIZE * 3));
    let x = tf
      .tensor4d(stacked, [inputs.length, INPUT_SIZE, INPUT_SIZE, 3])
      .mul(2)
      .sub(1) as tf.Tensor4D;
    for (const layer of net.slice(0, -1)) {
      x = tf.relu(tf.add(tf.conv2d(x, layer.kernel, layer.stride, "same"), layer.bias));
    }
    x = tf.avgPool(x, 2, 2, "same");
    const last = net[net.length - 1];
    x = tf.relu(tf.add(tf.conv2d(x, last.kernel, last.stride, "same"), last.bias));
    return tf.mean(x, [1, 2]) as tf.Tensor2D;
  });
  const data = out.dataSync() as Float32Array;
  out.dispose();
  return Float32Array.from(data);
}

export function extractImages(images: RgbImage[], batchSize = 32): Float64Array {
  const rows = new Float64Array(images.length * FEATURE_DIM);
  for (let start = 0; start < images.length; start += batchSize) {
    const chunk = images.slice(start, start + batchSize);
    const features = extractBatch(chunk.map((img) => preprocess(img, INPUT_SIZE)));
    for (let i = 0; i < chunk.length * FEATURE_DIM; i++) {
      rows[start * FEATURE_DIM + i] = features[i];
    }
  }
  return rows;
}
