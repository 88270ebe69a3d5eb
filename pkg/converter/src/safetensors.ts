/** Minimal safetensors reader/writer (F16 and F32 payloads). */

import { readFileSync, writeFileSync } from "node:fs";
import { halfBufferToFloat32 } from "./fp16.js";

export interface TensorInfo {
  dtype: "F16" | "F32";
  shape: number[];
  dataOffsets: [number, number];
}

export class Safetensors {
  constructor(
    readonly tensors: Map<string, TensorInfo>,
    private readonly data: Buffer,
  ) {}

  names(): string[] {
    return [...this.tensors.keys()];
  }

  has(name: string): boolean {
    return this.tensors.has(name);
  }

  info(name: string): TensorInfo {
    const info = this.tensors.get(name);
    if (!info) throw new Error(`checkpoint has no tensor '${name}'`);
    return info;
  }

  /** Tensor payload as float32, widening half precision exactly. */
  read(name: string): Float32Array {
    const info = this.info(name);
    const [start, end] = info.dataOffsets;
    const slice = this.data.subarray(start, end);
    const count = info.shape.reduce((a, b) => a * b, 1);
    if (info.dtype === "F32") {
      const out = new Float32Array(count);
      for (let i = 0; i < count; i++) out[i] = slice.readFloatLE(i * 4);
      return out;
    }
    return halfBufferToFloat32(slice, count);
  }
}

export function loadSafetensors(path: string): Safetensors {
  const raw = readFileSync(path);
  if (raw.length < 8) throw new Error(`${path}: too short for a safetensors header`);
  const headerLen = Number(raw.readBigUInt64LE(0));
  if (8 + headerLen > raw.length) {
    throw new Error(`${path}: header length ${headerLen} exceeds file size`);
  }
  let header: Record<string, { dtype: string; shape: number[]; data_offsets: [number, number] }>;
  try {
    header = JSON.parse(raw.subarray(8, 8 + headerLen).toString("utf-8"));
  } catch (e) {
    throw new Error(`${path}: malformed safetensors header: ${e}`);
  }
  const data = raw.subarray(8 + headerLen);
  const tensors = new Map<string, TensorInfo>();
  for (const [name, meta] of Object.entries(header)) {
    if (name === "__metadata__") continue;
    if (meta.dtype !== "F16" && meta.dtype !== "F32") {
      throw new Error(`${path}: tensor '${name}' has unsupported dtype ${meta.dtype}`);
    }
    const size = meta.shape.reduce((a, b) => a * b, 1) * (meta.dtype === "F16" ? 2 : 4);
    const [start, end] = meta.data_offsets;
    if (end - start !== size || end > data.length) {
      throw new Error(`${path}: tensor '${name}' extent does not match its shape`);
    }
    tensors.set(name, { dtype: meta.dtype, shape: meta.shape, dataOffsets: [start, end] });
  }
  return new Safetensors(tensors, data);
}

/** Writer used by tests to build synthetic checkpoints. */
export function writeSafetensors(
  path: string,
  tensors: Map<string, { dtype: "F16" | "F32"; shape: number[]; data: Buffer }>,
): void {
  const header: Record<string, unknown> = {};
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const [name, t] of tensors) {
    header[name] = { dtype: t.dtype, shape: t.shape, data_offsets: [offset, offset + t.data.length] };
    chunks.push(t.data);
    offset += t.data.length;
  }
  const head = Buffer.from(JSON.stringify(header), "utf-8");
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(head.length));
  writeFileSync(path, Buffer.concat([lenBuf, head, ...chunks]));
}
