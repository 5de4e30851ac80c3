import { crc32 } from "node:zlib";
import { describe, expect, test } from "vitest";

import { decodeSwt, encodeSwt, Tensor } from "../src/swt.js";

function tensor(name: string, shape: number[], values: number[]): Tensor {
  return { name, shape, data: Float32Array.from(values) };
}

describe("encodeSwt", () => {
  test("golden bytes for a single 1x2 tensor", () => {
    const data = encodeSwt([tensor("w", [1, 2], [1, 2])]);
    const body = Buffer.concat([
      Buffer.from("SWT1", "ascii"),
      u32(1),
      u32(1),
      u16(1),
      Buffer.from("w", "utf-8"),
      Buffer.from([0, 2]),
      u32(1),
      u32(2),
      f32(1),
      f32(2),
    ]);
    const expected = Buffer.concat([body, u32(crc32(body) >>> 0)]);
    expect(data.equals(expected)).toBe(true);
  });

  test("crc implementation matches the standard check vector", () => {
    expect(crc32(Buffer.from("123456789", "ascii")) >>> 0).toBe(0xcbf43926);
  });

  test("rejects shape/data disagreement", () => {
    expect(() => encodeSwt([tensor("w", [3], [1, 2])])).toThrow(/holds 3 values/);
  });

  test("deterministic bytes", () => {
    const tensors = [tensor("a", [2], [0.5, -0.5]), tensor("b", [1], [3])];
    expect(encodeSwt(tensors).equals(encodeSwt(tensors))).toBe(true);
  });
});

describe("decodeSwt", () => {
  const sample = () => [
    tensor("alpha", [2, 3], [0, 1, 2, 3, 4, 5]),
    tensor("beta.bias", [1], [1.5]),
  ];

  test("round trip preserves names, shapes, values", () => {
    const back = decodeSwt(encodeSwt(sample()));
    expect(back.map((t) => t.name)).toEqual(["alpha", "beta.bias"]);
    expect(back[0].shape).toEqual([2, 3]);
    expect([...back[0].data]).toEqual([0, 1, 2, 3, 4, 5]);
    expect(back[1].data[0]).toBeCloseTo(1.5, 10);
  });

  test("bad magic", () => {
    const data = Buffer.from(encodeSwt(sample()));
    data.write("NOPE", 0, "ascii");
    expect(() => decodeSwt(data)).toThrow(/bad_magic/);
  });

  test("bad version", () => {
    const data = Buffer.from(encodeSwt(sample()));
    data.writeUInt32LE(9, 4);
    expect(() => decodeSwt(data)).toThrow(/bad_version/);
  });

  test("checksum mismatch", () => {
    const data = Buffer.from(encodeSwt(sample()));
    data[data.length - 1] ^= 0xff;
    expect(() => decodeSwt(data)).toThrow(/bad_checksum/);
  });

  test("truncation", () => {
    const data = encodeSwt(sample());
    expect(() => decodeSwt(data.subarray(0, 10))).toThrow(/truncated/);
  });
});

function u32(v: number): Buffer {
  const b = Buffer.alloc(4);
  b.writeUInt32LE(v >>> 0, 0);
  return b;
}

function u16(v: number): Buffer {
  const b = Buffer.alloc(2);
  b.writeUInt16LE(v, 0);
  return b;
}

function f32(v: number): Buffer {
  const b = Buffer.alloc(4);
  b.writeFloatLE(v, 0);
  return b;
}
