/** The engine's tensor-archive format, written bit-exactly:
 *
 *   [8 bytes]  little-endian uint64 header length H
 *   [H bytes]  UTF-8 JSON header
 *   [rest]     raw little-endian float32 blob
 *
 * Header: {"format": "naseg-tensor-archive", "version": 1,
 *          "checksum_crc32": <crc32 of blob>,
 *          "entries": {name: {"dtype": "f32", "shape": [...], "offset": n}}}
 */

import { readFileSync, writeFileSync } from "node:fs";

export const ARCHIVE_FORMAT = "naseg-tensor-archive";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(buf: Buffer): number {
  let crc = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    crc = CRC_TABLE[(crc ^ buf[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

export interface ArchiveEntry {
  shape: number[];
  offset: number;
}

export function writeArchive(path: string, tensors: Map<string, { shape: number[]; data: Float32Array }>): void {
  const entries: Record<string, { dtype: string; shape: number[]; offset: number }> = {};
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const [name, t] of tensors) {
    const bytes = Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength);
    entries[name] = { dtype: "f32", shape: t.shape, offset };
    chunks.push(bytes);
    offset += bytes.length;
  }
  const blob = Buffer.concat(chunks);
  const header = {
    format: ARCHIVE_FORMAT,
    version: 1,
    checksum_crc32: crc32(blob),
    entries,
  };
  const head = Buffer.from(JSON.stringify(header), "utf-8");
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(head.length));
  writeFileSync(path, Buffer.concat([lenBuf, head, blob]));
}

export class Archive {
  constructor(
    readonly entries: Map<string, ArchiveEntry>,
    private readonly blob: Buffer,
  ) {}

  has(name: string): boolean {
    return this.entries.has(name);
  }

  read(name: string): Float32Array {
    const entry = this.entries.get(name);
    if (!entry) throw new Error(`archive has no tensor '${name}'`);
    const count = entry.shape.reduce((a, b) => a * b, 1);
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      out[i] = this.blob.readFloatLE(entry.offset + i * 4);
    }
    return out;
  }
}

export function loadArchive(path: string): Archive {
  const raw = readFileSync(path);
  if (raw.length < 8) throw new Error(`${path}: too short for a header`);
  const headerLen = Number(raw.readBigUInt64LE(0));
  if (8 + headerLen > raw.length) throw new Error(`${path}: header length exceeds file size`);
  const header = JSON.parse(raw.subarray(8, 8 + headerLen).toString("utf-8"));
  if (header.format !== ARCHIVE_FORMAT || header.version !== 1) {
    throw new Error(`${path}: not a version-1 ${ARCHIVE_FORMAT} file`);
  }
  const blob = raw.subarray(8 + headerLen);
  if (header.checksum_crc32 !== undefined && crc32(blob) !== header.checksum_crc32) {
    throw new Error(`${path}: blob checksum mismatch`);
  }
  const entries = new Map<string, ArchiveEntry>();
  for (const [name, meta] of Object.entries<any>(header.entries ?? {})) {
    if (meta.dtype !== "f32") throw new Error(`${path}: tensor '${name}' is not f32`);
    entries.set(name, { shape: meta.shape, offset: meta.offset });
  }
  return new Archive(entries, blob);
}
