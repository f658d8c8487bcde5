import * as fs from 'node:fs';
import * as path from 'node:path';

export interface Example {
  id: string;
  text: string;
  label: number;
}

export interface Dataset {
  examples: Example[];
  classes: string[];
}

export class DataFormatError extends Error {}

/** Reads the pipeline's JSON-Lines dataset plus its class manifest. */
export function loadDataset(datasetPath: string, manifestPath?: string): Dataset {
  const stem = datasetPath.replace(/\.jsonl$/, '');
  const mpath = manifestPath ?? `${stem}.manifest.json`;
  const manifest = JSON.parse(fs.readFileSync(mpath, 'utf-8'));
  const classes: string[] = manifest.classes;
  if (!Array.isArray(classes) || classes.length < 2) {
    throw new DataFormatError(`${mpath}: manifest needs at least 2 classes`);
  }
  const index = new Map(classes.map((c, j) => [c, j]));
  const examples: Example[] = [];
  const seen = new Set<string>();
  const lines = fs.readFileSync(datasetPath, 'utf-8').split('\n');
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let row;
    try {
      row = JSON.parse(line);
    } catch {
      throw new DataFormatError(`${datasetPath}:${i + 1}: invalid JSON`);
    }
    for (const field of ['id', 'text', 'label']) {
      if (!(field in row)) {
        throw new DataFormatError(`${datasetPath}:${i + 1}: missing field '${field}'`);
      }
    }
    if (seen.has(row.id)) {
      throw new DataFormatError(`${datasetPath}:${i + 1}: duplicate id '${row.id}'`);
    }
    seen.add(row.id);
    const label = index.get(row.label);
    if (label === undefined) {
      throw new DataFormatError(`${datasetPath}:${i + 1}: unknown label '${row.label}'`);
    }
    examples.push({ id: row.id, text: row.text, label });
  });
  if (examples.length === 0) {
    throw new DataFormatError(`${datasetPath}: empty dataset`);
  }
  return { examples, classes };
}

/**
 * Converts arbitrary JSON-Lines rows carrying text and label fields into the
 * pipeline dataset format. Classes are ordered by first appearance; ids come
 * from an id field when present, otherwise r0, r1, ...
 */
export function convertDataset(sourcePath: string, outPath: string): Dataset {
  const lines = fs.readFileSync(sourcePath, 'utf-8').split('\n');
  const classes: string[] = [];
  const index = new Map<string, number>();
  const examples: Example[] = [];
  const outLines: string[] = [];
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let row;
    try {
      row = JSON.parse(line);
    } catch {
      throw new DataFormatError(`${sourcePath}:${i + 1}: invalid JSON`);
    }
    if (typeof row.text !== 'string' || row.label === undefined || row.label === null) {
      throw new DataFormatError(`${sourcePath}:${i + 1}: rows need text and label fields`);
    }
    const name = String(row.label);
    if (!index.has(name)) {
      index.set(name, classes.length);
      classes.push(name);
    }
    const id = row.id !== undefined ? String(row.id) : `r${examples.length}`;
    examples.push({ id, text: row.text, label: index.get(name)! });
    outLines.push(JSON.stringify({ id, text: row.text, label: name }));
  });
  if (examples.length === 0) {
    throw new DataFormatError(`${sourcePath}: empty source`);
  }
  fs.mkdirSync(path.dirname(outPath), { recursive: true });
  fs.writeFileSync(outPath, outLines.join('\n') + '\n');
  const stem = outPath.replace(/\.jsonl$/, '');
  fs.writeFileSync(`${stem}.manifest.json`, JSON.stringify({ classes }, null, 2) + '\n');
  return { examples, classes };
}

function csvField(s: string): string {
  return /[",\n]/.test(s) ? '"' + s.replace(/"/g, '""') + '"' : s;
}

/** ProbMatrix CSV: header id,<class names>; one row per example. */
export function writeProbMatrix(
  ids: string[],
  classes: string[],
  rows: number[][],
  outPath: string,
): void {
  const lines = [['id', ...classes].map(csvField).join(',')];
  ids.forEach((id, i) => {
    lines.push([csvField(id), ...rows[i].map((v) => String(v))].join(','));
  });
  fs.mkdirSync(path.dirname(outPath), { recursive: true });
  fs.writeFileSync(outPath, lines.join('\n') + '\n');
}

/** DynamicsLog CSV: header id,epoch,<class names>; epochs numbered from 1. */
export function writeDynamics(
  ids: string[],
  classes: string[],
  snapshots: number[][][], // [epoch][example][class]
  outPath: string,
): void {
  const lines = [['id', 'epoch', ...classes].map(csvField).join(',')];
  snapshots.forEach((snap, e) => {
    ids.forEach((id, i) => {
      lines.push([csvField(id), String(e + 1), ...snap[i].map((v) => String(v))].join(','));
    });
  });
  fs.mkdirSync(path.dirname(outPath), { recursive: true });
  fs.writeFileSync(outPath, lines.join('\n') + '\n');
}
