#!/usr/bin/env node
/**
 * seatnet-export: convert a pretrained MobileNet-V2 extractor checkpoint
 * (model.json + float32 shards) into a seatnet SWT weight file.
 *
 *   seatnet-export --source DIR --out extractor.swt [--width 1.0]
 *
 * Exit codes: 0 success, 1 usage, 2 unreadable checkpoint, 3 conversion
 * problems (every unmapped tensor / shape mismatch is listed).
 */

import * as fs from "node:fs";

import { readCheckpoint } from "./checkpoint.js";
import { convertCheckpoint } from "./convert.js";
import { encodeSwt } from "./swt.js";

interface Args {
  source: string;
  out: string;
  width: number;
}

function parseArgs(argv: string[]): Args {
  let source = "";
  let out = "";
  let width = 1.0;
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--source":
        source = argv[++i] ?? "";
        break;
      case "--out":
        out = argv[++i] ?? "";
        break;
      case "--width":
        width = Number(argv[++i]);
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!source || !out) throw new Error("--source and --out are required");
  if (!Number.isFinite(width) || width <= 0) {
    throw new Error(`--width must be a positive number, got ${width}`);
  }
  return { source, out, width };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 1;
  }
  let checkpoint;
  try {
    checkpoint = readCheckpoint(args.source);
  } catch (err) {
    console.error(`checkpoint error: ${(err as Error).message}`);
    return 2;
  }
  const { tensors, problems } = convertCheckpoint(checkpoint, args.width);
  if (problems.length > 0) {
    console.error(`conversion failed with ${problems.length} problem(s):`);
    for (const p of problems) console.error(`  ${p.kind}: ${p.detail}`);
    return 3;
  }
  const data = encodeSwt(tensors);
  fs.writeFileSync(args.out, data);
  console.log(`wrote ${args.out}: ${tensors.length} tensors, ${data.length} bytes`);
  return 0;
}

const invokedDirectly =
  process.argv[1] && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
