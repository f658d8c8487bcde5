import * as tf from '@tensorflow/tfjs';
import type { Example } from './dataset.js';

export interface ModelSpec {
  featureDims: number;
  epochs: number;
  batchSize: number;
  seed: number;
}

// FNV-1a 32-bit; the hashing trick only needs a stable spread, not the
// pipeline's exact feature space.
function fnv1a32(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Hashed bag-of-words, L2-normalized, one row per example. */
export function featurize(texts: string[], dims: number): tf.Tensor2D {
  const data = new Float32Array(texts.length * dims);
  texts.forEach((text, i) => {
    const tokens = text.toLowerCase().match(/\w+/g) ?? [];
    for (const tok of tokens) {
      data[i * dims + (fnv1a32(tok) % dims)] += 1;
    }
    let norm = 0;
    for (let d = 0; d < dims; d++) norm += data[i * dims + d] ** 2;
    norm = Math.sqrt(norm);
    if (norm > 0) {
      for (let d = 0; d < dims; d++) data[i * dims + d] /= norm;
    }
  });
  return tf.tensor2d(data, [texts.length, dims]);
}

/** Single softmax layer; seeded initializer keeps runs reproducible. */
export function buildModel(dims: number, nClasses: number, seed: number): tf.Sequential {
  const model = tf.sequential();
  model.add(
    tf.layers.dense({
      inputShape: [dims],
      units: nClasses,
      activation: 'softmax',
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
      biasInitializer: 'zeros',
    }),
  );
  model.compile({ optimizer: tf.train.adam(0.05), loss: 'categoricalCrossentropy' });
  return model;
}

/** Predicts probabilities and renormalizes each row in float64 so the rows
 * are exactly stochastic within the pipeline's 1e-6 validator budget. */
export async function predictProbs(
  model: tf.Sequential,
  xs: tf.Tensor2D,
  nClasses: number,
): Promise<number[][]> {
  const out = model.predict(xs) as tf.Tensor2D;
  const flat = await out.data();
  out.dispose();
  const rows: number[][] = [];
  for (let i = 0; i < xs.shape[0]; i++) {
    const row = Array.from(flat.slice(i * nClasses, (i + 1) * nClasses), Number);
    const sum = row.reduce((a, b) => a + b, 0);
    rows.push(row.map((v) => v / sum));
  }
  return rows;
}

export async function trainModel(
  examples: Example[],
  nClasses: number,
  spec: ModelSpec,
  onEpochEnd?: (epoch: number, model: tf.Sequential, xs: tf.Tensor2D) => Promise<void>,
): Promise<{ model: tf.Sequential; xs: tf.Tensor2D }> {
  const xs = featurize(
    examples.map((e) => e.text),
    spec.featureDims,
  );
  const ys = tf.oneHot(
    examples.map((e) => e.label),
    nClasses,
  ) as tf.Tensor2D;
  const model = buildModel(spec.featureDims, nClasses, spec.seed);
  for (let e = 0; e < spec.epochs; e++) {
    await model.fit(xs, ys, { epochs: 1, batchSize: spec.batchSize, shuffle: false, verbose: 0 });
    if (onEpochEnd) await onEpochEnd(e, model, xs);
  }
  ys.dispose();
  return { model, xs };
}
