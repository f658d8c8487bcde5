import * as fs from 'node:fs';
import type { Dataset, Example } from './dataset.js';
import { DataFormatError, writeDynamics, writeProbMatrix } from './dataset.js';
import { featurize, predictProbs, trainModel } from './model.js';

export interface ExportConfig {
  dataset: string;
  manifest?: string;
  k: number; // folds for OOF export
  epochs: number; // dynamics export
  featureDims: number;
  batchSize: number;
  seed: number;
  out: string;
}

export const DEFAULTS = {
  k: 4,
  epochs: 10,
  featureDims: 256,
  batchSize: 32,
  seed: 0,
};

export function loadConfig(path: string, overrides: Partial<ExportConfig> = {}): ExportConfig {
  const raw = JSON.parse(fs.readFileSync(path, 'utf-8'));
  return validateConfig({ ...DEFAULTS, ...raw, ...overrides });
}

export function validateConfig(cfg: ExportConfig): ExportConfig {
  if (!cfg.dataset) throw new DataFormatError('config needs a dataset path');
  if (!cfg.out) throw new DataFormatError('config needs an output path');
  if (!Number.isInteger(cfg.k) || cfg.k < 2) {
    throw new DataFormatError(`k must be an integer >= 2, got ${cfg.k}`);
  }
  if (!Number.isInteger(cfg.epochs) || cfg.epochs < 2) {
    throw new DataFormatError(`epochs must be an integer >= 2, got ${cfg.epochs}`);
  }
  return cfg;
}

// mulberry32: small seeded PRNG for fold assignment
function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Stratified fold assignment: seeded shuffle within each class, then deal
 * the class's examples over the folds cyclically. */
export function stratifiedFolds(examples: Example[], k: number, seed: number): number[] {
  const byClass = new Map<number, number[]>();
  examples.forEach((ex, i) => {
    if (!byClass.has(ex.label)) byClass.set(ex.label, []);
    byClass.get(ex.label)!.push(i);
  });
  const folds = new Array<number>(examples.length).fill(-1);
  for (const [label, idxs] of [...byClass.entries()].sort((a, b) => a[0] - b[0])) {
    if (idxs.length < k) {
      throw new DataFormatError(`class ${label} has ${idxs.length} examples, fewer than ${k} folds`);
    }
    const rand = rng(seed * 1000003 + label);
    const shuffled = [...idxs];
    for (let i = shuffled.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [shuffled[i], shuffled[j]] = [shuffled[j], shuffled[i]];
    }
    shuffled.forEach((idx, pos) => {
      folds[idx] = pos % k;
    });
  }
  return folds;
}

/**
 * K-fold out-of-fold probability export: each example is scored by the one
 * model whose training complement excluded it, so no row ever comes from a
 * model that saw that example.
 */
export async function exportOof(ds: Dataset, cfg: ExportConfig): Promise<number[][]> {
  const folds = stratifiedFolds(ds.examples, cfg.k, cfg.seed);
  const nClasses = ds.classes.length;
  const rows: number[][] = new Array(ds.examples.length);
  for (let f = 0; f < cfg.k; f++) {
    const trainIdx = folds.flatMap((fold, i) => (fold === f ? [] : [i]));
    const heldIdx = folds.flatMap((fold, i) => (fold === f ? [i] : []));
    const { model, xs } = await trainModel(
      trainIdx.map((i) => ds.examples[i]),
      nClasses,
      { featureDims: cfg.featureDims, epochs: cfg.epochs, batchSize: cfg.batchSize, seed: cfg.seed + f },
    );
    xs.dispose();
    const heldXs = featurize(
      heldIdx.map((i) => ds.examples[i].text),
      cfg.featureDims,
    );
    const probs = await predictProbs(model, heldXs, nClasses);
    heldIdx.forEach((i, pos) => {
      rows[i] = probs[pos];
    });
    heldXs.dispose();
    model.dispose();
  }
  writeProbMatrix(
    ds.examples.map((e) => e.id),
    ds.classes,
    rows,
    cfg.out,
  );
  return rows;
}

/**
 * Full-train-set probability snapshot after every epoch, predicted in
 * evaluation mode (no stochastic layers in the probe model, so snapshots are
 * deterministic given the seed).
 */
export async function exportDynamics(ds: Dataset, cfg: ExportConfig): Promise<number[][][]> {
  const nClasses = ds.classes.length;
  const snapshots: number[][][] = [];
  const { model, xs } = await trainModel(
    ds.examples,
    nClasses,
    { featureDims: cfg.featureDims, epochs: cfg.epochs, batchSize: cfg.batchSize, seed: cfg.seed },
    async (_e, m, x) => {
      snapshots.push(await predictProbs(m, x, nClasses));
    },
  );
  xs.dispose();
  model.dispose();
  writeDynamics(
    ds.examples.map((e) => e.id),
    ds.classes,
    snapshots,
    cfg.out,
  );
  return snapshots;
}
