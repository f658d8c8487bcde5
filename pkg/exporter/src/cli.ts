#!/usr/bin/env node
// probe-exporter: emit ProbMatrix / DynamicsLog CSVs from a tfjs probe model.
//
// Usage:
//   cli.ts export-oof      --dataset d.jsonl --out proba.csv [--k 4] [--seed 0] ...
//   cli.ts export-dynamics --dataset d.jsonl --out dynamics.csv [--epochs 10] ...
//   cli.ts convert         --source rows.jsonl --out d.jsonl
//
// Any command also accepts --config <file.json>; flags override the file.

import { convertDataset, DataFormatError, loadDataset } from './dataset.js';
import { DEFAULTS, exportDynamics, exportOof, loadConfig, validateConfig } from './export.js';
import type { ExportConfig } from './export.js';

function parseFlags(argv: string[]): Record<string, string> {
  const flags: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--') || argv[i + 1] === undefined) {
      throw new DataFormatError(`bad argument: ${argv[i]}`);
    }
    flags[argv[i].slice(2)] = argv[i + 1];
  }
  return flags;
}

function buildConfig(flags: Record<string, string>): ExportConfig {
  const overrides: Partial<ExportConfig> = {};
  if (flags.dataset) overrides.dataset = flags.dataset;
  if (flags.manifest) overrides.manifest = flags.manifest;
  if (flags.out) overrides.out = flags.out;
  if (flags.k) overrides.k = Number(flags.k);
  if (flags.epochs) overrides.epochs = Number(flags.epochs);
  if (flags['feature-dims']) overrides.featureDims = Number(flags['feature-dims']);
  if (flags['batch-size']) overrides.batchSize = Number(flags['batch-size']);
  if (flags.seed) overrides.seed = Number(flags.seed);
  if (flags.config) return loadConfig(flags.config, overrides);
  return validateConfig({ ...DEFAULTS, ...overrides } as ExportConfig);
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    const flags = parseFlags(rest);
    if (command === 'convert') {
      if (!flags.source || !flags.out) {
        throw new DataFormatError('convert needs --source and --out');
      }
      const ds = convertDataset(flags.source, flags.out);
      console.log(`wrote ${ds.examples.length} examples, ${ds.classes.length} classes`);
      return 0;
    }
    if (command === 'export-oof' || command === 'export-dynamics') {
      const cfg = buildConfig(flags);
      const ds = loadDataset(cfg.dataset, cfg.manifest);
      if (command === 'export-oof') {
        await exportOof(ds, cfg);
      } else {
        await exportDynamics(ds, cfg);
      }
      console.log(`wrote ${cfg.out}`);
      return 0;
    }
    console.error(`unknown command: ${command ?? '(none)'}`);
    return 1;
  } catch (err) {
    if (err instanceof DataFormatError) {
      console.error(`probe-exporter: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

main().then((code) => {
  process.exitCode = code;
});
