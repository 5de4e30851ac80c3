/**
 * Deterministic synthetic checkpoint + fixed test image. The weight values
 * are random but seeded, so every run (and both sides of the parity test)
 * sees identical bytes.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ManifestGroup, SourceCheckpoint } from "../src/checkpoint.js";
import { buildNameMap, sourceShape } from "../src/names.js";

const MASK = (1n << 64n) - 1n;

export class SplitMix64 {
  private x: bigint;

  constructor(seed: number | bigint) {
    this.x = BigInt(seed) & MASK;
  }

  nextU64(): bigint {
    this.x = (this.x + 0x9e3779b97f4a7c15n) & MASK;
    let z = this.x;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK;
    return z ^ (z >> 31n);
  }

  random(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.random();
  }
}

function fillFor(name: string, count: number, rng: SplitMix64): Float32Array {
  const out = new Float32Array(count);
  if (name.endsWith("/gamma")) {
    for (let i = 0; i < count; i++) out[i] = rng.uniform(0.8, 1.2);
  } else if (name.endsWith("/beta") || name.endsWith("/moving_mean")) {
    for (let i = 0; i < count; i++) out[i] = rng.uniform(-0.2, 0.2);
  } else if (name.endsWith("/moving_variance")) {
    for (let i = 0; i < count; i++) out[i] = rng.uniform(0.5, 1.5);
  } else {
    for (let i = 0; i < count; i++) out[i] = rng.uniform(-0.3, 0.3);
  }
  return out;
}

export function makeCheckpoint(width: number, seed: number): SourceCheckpoint {
  const rng = new SplitMix64(seed);
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  for (const entry of buildNameMap(width)) {
    const shape = sourceShape(entry);
    const count = shape.reduce((a, b) => a * b, 1);
    tensors.set(entry.source, { shape, data: fillFor(entry.source, count, rng) });
  }
  return { tensors };
}

/** Write the checkpoint in the on-disk layout (two shards, split mid-list). */
export function writeCheckpoint(ckpt: SourceCheckpoint, dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
  const names = [...ckpt.tensors.keys()];
  const half = Math.ceil(names.length / 2);
  const groups: ManifestGroup[] = [];
  [names.slice(0, half), names.slice(half)].forEach((chunk, gi) => {
    const shard = `group${gi + 1}-shard1of1.bin`;
    const weights = chunk.map((name) => ({
      name,
      shape: ckpt.tensors.get(name)!.shape,
      dtype: "float32",
    }));
    const buffers = chunk.map((name) => {
      const data = ckpt.tensors.get(name)!.data;
      const buf = Buffer.alloc(4 * data.length);
      for (let i = 0; i < data.length; i++) buf.writeFloatLE(data[i], 4 * i);
      return buf;
    });
    fs.writeFileSync(path.join(dir, shard), Buffer.concat(buffers));
    groups.push({ paths: [shard], weights });
  });
  fs.writeFileSync(
    path.join(dir, "model.json"),
    JSON.stringify({ format: "layers-model", weightsManifest: groups }),
  );
}

/** Deterministic 8-bit grayscale test pattern and its PGM encoding. */
export function makeTestImage(size: number, seed: number): {
  gray: Float64Array;
  pgm: Buffer;
} {
  const rng = new SplitMix64(seed);
  const bytes = Buffer.alloc(size * size);
  const gray = new Float64Array(size * size);
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) {
      const wave =
        128 + 80 * Math.sin(i / 7) * Math.cos(j / 5) + 40 * rng.uniform(-1, 1);
      const v = Math.min(255, Math.max(0, Math.round(wave)));
      bytes[i * size + j] = v;
      gray[i * size + j] = v / 255;
    }
  }
  const header = Buffer.from(`P5\n${size} ${size}\n255\n`, "ascii");
  return { gray, pgm: Buffer.concat([header, bytes]) };
}
