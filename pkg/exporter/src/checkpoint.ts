/**
 * Reader for the distributed checkpoint layout: a directory holding
 * model.json with a weightsManifest plus binary float32 shard files.
 *
 * The manifest is a list of groups; each group names its shard paths and the
 * weights packed, in order, into the concatenation of those shards.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

export interface ManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

export interface SourceCheckpoint {
  tensors: Map<string, { shape: number[]; data: Float32Array }>;
}

export function readCheckpoint(dir: string): SourceCheckpoint {
  const modelPath = path.join(dir, "model.json");
  let parsed: { weightsManifest?: ManifestGroup[] };
  try {
    parsed = JSON.parse(fs.readFileSync(modelPath, "utf-8"));
  } catch (err) {
    throw new Error(`cannot read ${modelPath}: ${(err as Error).message}`);
  }
  const manifest = parsed.weightsManifest;
  if (!Array.isArray(manifest) || manifest.length === 0) {
    throw new Error(`${modelPath} has no weightsManifest`);
  }
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  for (const group of manifest) {
    const buffers = group.paths.map((p) => fs.readFileSync(path.join(dir, p)));
    const blob = Buffer.concat(buffers);
    let offset = 0;
    for (const spec of group.weights) {
      if (spec.dtype !== "float32") {
        throw new Error(`${spec.name}: unsupported dtype ${spec.dtype}`);
      }
      const count = spec.shape.reduce((a, b) => a * b, 1);
      if (offset + 4 * count > blob.length) {
        throw new Error(
          `${spec.name}: shard data ends early (need ${4 * count} bytes at ${offset})`,
        );
      }
      const data = new Float32Array(count);
      for (let i = 0; i < count; i++) data[i] = blob.readFloatLE(offset + 4 * i);
      offset += 4 * count;
      if (tensors.has(spec.name)) throw new Error(`duplicate weight ${spec.name}`);
      tensors.set(spec.name, { shape: spec.shape, data });
    }
    if (offset !== blob.length) {
      throw new Error(
        `group [${group.paths.join(", ")}]: ${blob.length - offset} trailing bytes`,
      );
    }
  }
  return { tensors };
}
