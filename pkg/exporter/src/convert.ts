/**
 * Conversion core: map checkpoint tensors onto the engine's canonical
 * extractor names, transpose kernels into the engine's layouts, and emit an
 * SWT buffer. Validation problems are collected exhaustively and reported
 * together before aborting.
 */

import { SourceCheckpoint } from "./checkpoint.js";
import { buildNameMap, MapEntry, sourceShape } from "./names.js";
import { encodeSwt, Tensor } from "./swt.js";

/** (kh, kw, in, out) -> (out, in, kh, kw) */
export function hwioToOihw(data: Float32Array, shape: number[]): Float32Array {
  const [kh, kw, ci, co] = shape;
  const out = new Float32Array(data.length);
  for (let o = 0; o < co; o++)
    for (let i = 0; i < ci; i++)
      for (let h = 0; h < kh; h++)
        for (let w = 0; w < kw; w++)
          out[((o * ci + i) * kh + h) * kw + w] =
            data[((h * kw + w) * ci + i) * co + o];
  return out;
}

/** (kh, kw, channels, 1) -> (channels, 1, kh, kw) */
export function hwc1ToC1hw(data: Float32Array, shape: number[]): Float32Array {
  const [kh, kw, c] = shape;
  const out = new Float32Array(data.length);
  for (let ch = 0; ch < c; ch++)
    for (let h = 0; h < kh; h++)
      for (let w = 0; w < kw; w++)
        out[(ch * kh + h) * kw + w] = data[(h * kw + w) * c + ch];
  return out;
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

export interface ConversionProblem {
  entry: MapEntry;
  kind: "missing" | "shape_mismatch";
  detail: string;
}

export function convertCheckpoint(
  checkpoint: SourceCheckpoint,
  width: number,
): { tensors: Tensor[]; problems: ConversionProblem[] } {
  const map = buildNameMap(width);
  const tensors: Tensor[] = [];
  const problems: ConversionProblem[] = [];
  for (const entry of map) {
    const source = checkpoint.tensors.get(entry.source);
    if (!source) {
      problems.push({
        entry,
        kind: "missing",
        detail: `checkpoint has no tensor ${entry.source}`,
      });
      continue;
    }
    const expected = sourceShape(entry);
    if (!shapesEqual(source.shape, expected)) {
      problems.push({
        entry,
        kind: "shape_mismatch",
        detail:
          `${entry.source}: shape [${source.shape}] != expected ` +
          `[${expected}] for width ${width}`,
      });
      continue;
    }
    let data: Float32Array;
    switch (entry.layout) {
      case "hwio_to_oihw":
        data = hwioToOihw(source.data, source.shape);
        break;
      case "hwc1_to_c1hw":
        data = hwc1ToC1hw(source.data, source.shape);
        break;
      case "copy":
        data = Float32Array.from(source.data);
        break;
    }
    tensors.push({ name: entry.target, shape: entry.targetShape, data });
  }
  return { tensors, problems };
}

export function exportPretrained(checkpoint: SourceCheckpoint, width: number): Buffer {
  const { tensors, problems } = convertCheckpoint(checkpoint, width);
  if (problems.length > 0) {
    const lines = problems.map((p) => `  ${p.kind}: ${p.detail}`);
    throw new Error(`conversion failed with ${problems.length} problem(s):\n${lines.join("\n")}`);
  }
  return encodeSwt(tensors);
}
