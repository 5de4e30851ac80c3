/**
 * SWT weight container codec (the seat-detection engine's checkpoint format).
 *
 * Layout, all integers little-endian:
 *   bytes 0-3  magic "SWT1"
 *   u32        version (= 1)
 *   u32        tensor count
 *   per tensor: u16 name length, UTF-8 name, u8 dtype (0 = float32),
 *               u8 rank, rank * u32 dims, prod(dims) * 4 bytes float32
 *   u32        CRC-32 of every preceding byte
 */

import { crc32 } from "node:zlib";

export interface Tensor {
  name: string;
  shape: number[];
  data: Float32Array;
}

const MAGIC = Buffer.from("SWT1", "ascii");
const VERSION = 1;
const DTYPE_F32 = 0;

export function encodeSwt(tensors: Tensor[]): Buffer {
  const parts: Buffer[] = [];
  const header = Buffer.alloc(12);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(tensors.length, 8);
  parts.push(header);
  for (const t of tensors) {
    const name = Buffer.from(t.name, "utf-8");
    if (name.length > 0xffff) throw new Error(`tensor name too long: ${t.name}`);
    const count = t.shape.reduce((a, b) => a * b, 1);
    if (count !== t.data.length) {
      throw new Error(
        `${t.name}: shape [${t.shape}] holds ${count} values, data has ${t.data.length}`,
      );
    }
    const head = Buffer.alloc(2 + name.length + 2 + 4 * t.shape.length);
    let off = 0;
    off = head.writeUInt16LE(name.length, off);
    off += name.copy(head, off);
    off = head.writeUInt8(DTYPE_F32, off);
    off = head.writeUInt8(t.shape.length, off);
    for (const d of t.shape) off = head.writeUInt32LE(d, off);
    parts.push(head);
    const payload = Buffer.alloc(4 * count);
    for (let i = 0; i < count; i++) payload.writeFloatLE(t.data[i], 4 * i);
    parts.push(payload);
  }
  const body = Buffer.concat(parts);
  const tail = Buffer.alloc(4);
  tail.writeUInt32LE(crc32(body) >>> 0, 0);
  return Buffer.concat([body, tail]);
}

export function decodeSwt(data: Buffer): Tensor[] {
  if (data.length < 16) throw new Error(`truncated: file is ${data.length} bytes`);
  if (!data.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`bad_magic: ${data.subarray(0, 4).toString("hex")}`);
  }
  const version = data.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`bad_version: ${version}`);
  const count = data.readUInt32LE(8);
  const stored = data.readUInt32LE(data.length - 4);
  const actual = crc32(data.subarray(0, data.length - 4)) >>> 0;
  if (stored !== actual) {
    throw new Error(`bad_checksum: stored ${stored}, computed ${actual}`);
  }
  let off = 12;
  const need = (n: number, what: string) => {
    if (off + n > data.length - 4) throw new Error(`truncated inside ${what}`);
  };
  const tensors: Tensor[] = [];
  for (let i = 0; i < count; i++) {
    need(2, "name length");
    const nameLen = data.readUInt16LE(off);
    off += 2;
    need(nameLen + 2, "name");
    const name = data.subarray(off, off + nameLen).toString("utf-8");
    off += nameLen;
    const dtype = data.readUInt8(off);
    const rank = data.readUInt8(off + 1);
    off += 2;
    if (dtype !== DTYPE_F32) throw new Error(`bad_dtype: ${name} has tag ${dtype}`);
    need(4 * rank, "dims");
    const shape: number[] = [];
    for (let d = 0; d < rank; d++) {
      shape.push(data.readUInt32LE(off));
      off += 4;
    }
    const n = shape.reduce((a, b) => a * b, 1);
    need(4 * n, `data of ${name}`);
    const values = new Float32Array(n);
    for (let v = 0; v < n; v++) values[v] = data.readFloatLE(off + 4 * v);
    off += 4 * n;
    tensors.push({ name, shape, data: values });
  }
  if (off !== data.length - 4) {
    throw new Error(`trailing bytes after tensor payload at ${off}`);
  }
  return tensors;
}
