/**
 * Reference forward pass of the extractor in the checkpoint's native layout
 * (NHWC activations, HWIO / HWC1 kernels), in float64.
 *
 * This is the oracle the parity test compares the engine against: if the
 * exported weights run through the engine reproduce this feature map, the
 * name mapping, axis transposition, and batch-norm carry-over are right.
 *
 * Padding geometry matches the engine: "same" pads kernel-1 pixels per axis
 * regardless of stride, extra pixel bottom/right.
 */

import { SourceCheckpoint } from "./checkpoint.js";
import { buildPlan } from "./names.js";

export type Plane = { h: number; w: number; c: number; data: Float64Array };

const BN_EPSILON = 1e-3; // engine default

function pad(x: Plane, k: number): Plane {
  const total = k - 1;
  const top = Math.floor(total / 2);
  const left = Math.floor(total / 2);
  const h = x.h + total;
  const w = x.w + total;
  const out = new Float64Array(h * w * x.c);
  for (let i = 0; i < x.h; i++)
    for (let j = 0; j < x.w; j++)
      for (let c = 0; c < x.c; c++)
        out[((i + top) * w + (j + left)) * x.c + c] = x.data[(i * x.w + j) * x.c + c];
  return { h, w, c: x.c, data: out };
}

function conv(x: Plane, kernel: Float64Array, kh: number, kw: number,
              ci: number, co: number, stride: number, same: boolean): Plane {
  const xp = same ? pad(x, kh) : x;
  const oh = Math.floor((xp.h - kh) / stride) + 1;
  const ow = Math.floor((xp.w - kw) / stride) + 1;
  const out = new Float64Array(oh * ow * co);
  for (let oi = 0; oi < oh; oi++)
    for (let oj = 0; oj < ow; oj++)
      for (let o = 0; o < co; o++) {
        let acc = 0;
        for (let i = 0; i < kh; i++)
          for (let j = 0; j < kw; j++)
            for (let c = 0; c < ci; c++)
              acc +=
                xp.data[((oi * stride + i) * xp.w + (oj * stride + j)) * ci + c] *
                kernel[((i * kw + j) * ci + c) * co + o];
        out[(oi * ow + oj) * co + o] = acc;
      }
  return { h: oh, w: ow, c: co, data: out };
}

function depthwise(x: Plane, kernel: Float64Array, k: number, stride: number): Plane {
  const xp = pad(x, k);
  const oh = Math.floor((xp.h - k) / stride) + 1;
  const ow = Math.floor((xp.w - k) / stride) + 1;
  const out = new Float64Array(oh * ow * x.c);
  for (let oi = 0; oi < oh; oi++)
    for (let oj = 0; oj < ow; oj++)
      for (let c = 0; c < x.c; c++) {
        let acc = 0;
        for (let i = 0; i < k; i++)
          for (let j = 0; j < k; j++)
            acc +=
              xp.data[((oi * stride + i) * xp.w + (oj * stride + j)) * x.c + c] *
              kernel[(i * k + j) * x.c + c];
        out[(oi * ow + oj) * x.c + c] = acc;
      }
  return { h: oh, w: ow, c: x.c, data: out };
}

function bnRelu6(x: Plane, ckpt: SourceCheckpoint, layer: string, relu: boolean): Plane {
  const gamma = ckpt.tensors.get(`${layer}/gamma`)!.data;
  const beta = ckpt.tensors.get(`${layer}/beta`)!.data;
  const mean = ckpt.tensors.get(`${layer}/moving_mean`)!.data;
  const variance = ckpt.tensors.get(`${layer}/moving_variance`)!.data;
  const out = new Float64Array(x.data.length);
  for (let p = 0; p < x.h * x.w; p++)
    for (let c = 0; c < x.c; c++) {
      let v =
        ((x.data[p * x.c + c] - mean[c]) / Math.sqrt(variance[c] + BN_EPSILON)) *
          gamma[c] +
        beta[c];
      if (relu) v = Math.min(Math.max(v, 0), 6);
      out[p * x.c + c] = v;
    }
  return { ...x, data: out };
}

function addPlanes(a: Plane, b: Plane): Plane {
  const out = new Float64Array(a.data.length);
  for (let i = 0; i < out.length; i++) out[i] = a.data[i] + b.data[i];
  return { ...a, data: out };
}

/**
 * Run the extractor on one NHWC image plane; returns the feature map in
 * NCHW order (flattened) to compare directly against the engine's dump.
 */
export function referenceExtractorForward(
  ckpt: SourceCheckpoint,
  image: Plane,
  width: number,
): { shape: number[]; data: Float64Array } {
  const plan = buildPlan(width);
  const get = (name: string) => {
    const t = ckpt.tensors.get(name);
    if (!t) throw new Error(`checkpoint missing ${name}`);
    return t;
  };
  let x = conv(image, toF64(get("Conv1/kernel").data), 3, 3, 3, plan.stemChannels, 2, true);
  x = bnRelu6(x, ckpt, "bn_Conv1", true);
  for (const b of plan.blocks) {
    const src = b.index === 1 ? "expanded_conv" : `block_${b.index - 1}`;
    let y = x;
    if (b.expand) {
      y = conv(y, toF64(get(`${src}_expand/kernel`).data), 1, 1, b.inChannels, b.hiddenChannels, 1, false);
      y = bnRelu6(y, ckpt, `${src}_expand_BN`, true);
    }
    y = depthwise(y, toF64(get(`${src}_depthwise/depthwise_kernel`).data), 3, b.stride);
    y = bnRelu6(y, ckpt, `${src}_depthwise_BN`, true);
    y = conv(y, toF64(get(`${src}_project/kernel`).data), 1, 1, b.hiddenChannels, b.outChannels, 1, false);
    y = bnRelu6(y, ckpt, `${src}_project_BN`, false);
    x = b.residual ? addPlanes(x, y) : y;
  }
  x = conv(x, toF64(get("Conv_1/kernel").data), 1, 1, plan.finalIn, plan.finalChannels, 1, false);
  x = bnRelu6(x, ckpt, "Conv_1_bn", true);

  // NHWC -> NCHW
  const out = new Float64Array(x.data.length);
  for (let c = 0; c < x.c; c++)
    for (let i = 0; i < x.h; i++)
      for (let j = 0; j < x.w; j++)
        out[(c * x.h + i) * x.w + j] = x.data[(i * x.w + j) * x.c + c];
  return { shape: [1, x.c, x.h, x.w], data: out };
}

function toF64(a: Float32Array): Float64Array {
  return Float64Array.from(a);
}

/** Grayscale [0,1] image bytes -> NHWC plane in [-1, 1] with 3 channels. */
export function imageToPlane(gray: Float64Array, h: number, w: number): Plane {
  const data = new Float64Array(h * w * 3);
  for (let p = 0; p < h * w; p++) {
    const v = 2 * gray[p] - 1;
    data[3 * p] = v;
    data[3 * p + 1] = v;
    data[3 * p + 2] = v;
  }
  return { h, w, c: 3, data };
}
