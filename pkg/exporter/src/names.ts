/**
 * Canonical extractor tensor names and the mapping from the Keras-style
 * MobileNet-V2 checkpoint names that public distributions use.
 *
 * Source naming (per layer, weight names inside a layer joined with "/"):
 *   Conv1/kernel, bn_Conv1/{gamma,beta,moving_mean,moving_variance}
 *   expanded_conv_depthwise/depthwise_kernel, expanded_conv_depthwise_BN/...
 *   expanded_conv_project/kernel, expanded_conv_project_BN/...
 *   block_{n}_expand/kernel, block_{n}_expand_BN/...          n = 1..16
 *   block_{n}_depthwise/depthwise_kernel, block_{n}_depthwise_BN/...
 *   block_{n}_project/kernel, block_{n}_project_BN/...
 *   Conv_1/kernel, Conv_1_bn/...
 *
 * Target naming is the engine's: extractor.stem.*, extractor.block{i}.*
 * (1-based, expand absent on block 1), extractor.final.*; batch-norm fields
 * gamma/beta/mean/var.
 */

// (expansion, output channels, repeats, first stride)
export const BLOCK_TABLE: ReadonlyArray<readonly [number, number, number, number]> = [
  [1, 16, 1, 1],
  [6, 24, 2, 2],
  [6, 32, 3, 2],
  [6, 64, 4, 2],
  [6, 96, 3, 1],
  [6, 160, 3, 2],
  [6, 320, 1, 1],
];

export const BN_FIELDS = ["gamma", "beta", "mean", "var"] as const;
const SOURCE_BN_FIELDS: Record<string, string> = {
  gamma: "gamma",
  beta: "beta",
  mean: "moving_mean",
  var: "moving_variance",
};

/** Round to the nearest multiple of 8, never below 8. */
export function roundChannels(value: number): number {
  return Math.max(8, Math.floor((value + 4) / 8) * 8);
}

export interface BlockPlan {
  index: number; // 1-based
  inChannels: number;
  hiddenChannels: number;
  outChannels: number;
  stride: number;
  expand: boolean;
  residual: boolean;
}

export interface ExtractorPlan {
  stemChannels: number;
  blocks: BlockPlan[];
  finalIn: number;
  finalChannels: number;
}

export function buildPlan(width: number): ExtractorPlan {
  const stem = roundChannels(32 * width);
  const blocks: BlockPlan[] = [];
  let inCh = stem;
  let index = 0;
  for (const [t, c, n, s] of BLOCK_TABLE) {
    const outCh = roundChannels(c * width);
    for (let r = 0; r < n; r++) {
      index += 1;
      const stride = r === 0 ? s : 1;
      blocks.push({
        index,
        inChannels: inCh,
        hiddenChannels: inCh * t,
        outChannels: outCh,
        stride,
        expand: t !== 1,
        residual: stride === 1 && inCh === outCh,
      });
      inCh = outCh;
    }
  }
  return {
    stemChannels: stem,
    blocks,
    finalIn: inCh,
    finalChannels: roundChannels(1280 * width),
  };
}

/** Layout conversion applied to a mapped tensor. */
export type LayoutNote = "hwio_to_oihw" | "hwc1_to_c1hw" | "copy";

export interface MapEntry {
  source: string;
  target: string;
  targetShape: number[]; // engine layout
  layout: LayoutNote;
}

function bnEntries(sourceLayer: string, targetPrefix: string, channels: number): MapEntry[] {
  return BN_FIELDS.map((field) => ({
    source: `${sourceLayer}/${SOURCE_BN_FIELDS[field]}`,
    target: `${targetPrefix}.bn.${field}`,
    targetShape: [channels],
    layout: "copy" as const,
  }));
}

/** Ordered source->target map covering exactly the extractor tensor set. */
export function buildNameMap(width: number): MapEntry[] {
  const plan = buildPlan(width);
  const entries: MapEntry[] = [];
  entries.push({
    source: "Conv1/kernel",
    target: "extractor.stem.conv.kernel",
    targetShape: [plan.stemChannels, 3, 3, 3],
    layout: "hwio_to_oihw",
  });
  entries.push(...bnEntries("bn_Conv1", "extractor.stem", plan.stemChannels));
  for (const b of plan.blocks) {
    // Keras numbers blocks 0..16 with block 0 named "expanded_conv"
    const src = b.index === 1 ? "expanded_conv" : `block_${b.index - 1}`;
    const dst = `extractor.block${b.index}`;
    if (b.expand) {
      entries.push({
        source: `${src}_expand/kernel`,
        target: `${dst}.expand.kernel`,
        targetShape: [b.hiddenChannels, b.inChannels, 1, 1],
        layout: "hwio_to_oihw",
      });
      entries.push(...bnEntries(`${src}_expand_BN`, `${dst}.expand`, b.hiddenChannels));
    }
    entries.push({
      source: `${src}_depthwise/depthwise_kernel`,
      target: `${dst}.depthwise.kernel`,
      targetShape: [b.hiddenChannels, 1, 3, 3],
      layout: "hwc1_to_c1hw",
    });
    entries.push(...bnEntries(`${src}_depthwise_BN`, `${dst}.depthwise`, b.hiddenChannels));
    entries.push({
      source: `${src}_project/kernel`,
      target: `${dst}.project.kernel`,
      targetShape: [b.outChannels, b.hiddenChannels, 1, 1],
      layout: "hwio_to_oihw",
    });
    entries.push(...bnEntries(`${src}_project_BN`, `${dst}.project`, b.outChannels));
  }
  entries.push({
    source: "Conv_1/kernel",
    target: "extractor.final.conv.kernel",
    targetShape: [plan.finalChannels, plan.finalIn, 1, 1],
    layout: "hwio_to_oihw",
  });
  entries.push(...bnEntries("Conv_1_bn", "extractor.final", plan.finalChannels));

  const targets = new Set<string>();
  for (const e of entries) {
    if (targets.has(e.target)) throw new Error(`duplicate target ${e.target}`);
    targets.add(e.target);
  }
  return entries;
}

/** Source-layout shape for a map entry (what the checkpoint must contain). */
export function sourceShape(entry: MapEntry): number[] {
  const s = entry.targetShape;
  switch (entry.layout) {
    case "hwio_to_oihw":
      return [s[2], s[3], s[1], s[0]];
    case "hwc1_to_c1hw":
      return [s[2], s[3], s[0], s[1]];
    case "copy":
      return [...s];
  }
}
