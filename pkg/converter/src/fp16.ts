/** Half-precision decoding. Widening f16 -> f32 is exact for every value,
 * including subnormals, infinities and NaN, so converted archives can be
 * verified byte-for-byte. */

export function halfToFloat(bits: number): number {
  const sign = (bits & 0x8000) ? -1 : 1;
  const exponent = (bits >> 10) & 0x1f;
  const mantissa = bits & 0x3ff;
  if (exponent === 0) {
    // zero or subnormal
    return sign * mantissa * 2 ** -24;
  }
  if (exponent === 0x1f) {
    return mantissa ? NaN : sign * Infinity;
  }
  return sign * (1 + mantissa / 1024) * 2 ** (exponent - 15);
}

export function halfBufferToFloat32(buf: Buffer, count: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = halfToFloat(buf.readUInt16LE(i * 2));
  }
  return out;
}

/** f32 -> f16 with round-to-nearest-even; used only by tests to build fixtures. */
export function floatToHalf(value: number): number {
  const f32 = new Float32Array(1);
  const u32 = new Uint32Array(f32.buffer);
  f32[0] = value;
  const x = u32[0];
  const sign = (x >>> 16) & 0x8000;
  let exponent = ((x >>> 23) & 0xff) - 127 + 15;
  let mantissa = x & 0x7fffff;
  if (((x >>> 23) & 0xff) === 0xff) {
    return sign | 0x7c00 | (mantissa ? 0x200 : 0); // inf / nan
  }
  if (exponent >= 0x1f) {
    return sign | 0x7c00; // overflow to inf
  }
  if (exponent <= 0) {
    if (exponent < -10) return sign; // underflow to zero
    mantissa |= 0x800000;
    const shift = 14 - exponent;
    const half = mantissa >> shift;
    const rest = mantissa & ((1 << shift) - 1);
    const halfway = 1 << (shift - 1);
    if (rest > halfway || (rest === halfway && (half & 1))) {
      return sign | (half + 1);
    }
    return sign | half;
  }
  const half = mantissa >> 13;
  const rest = mantissa & 0x1fff;
  let bits = sign | (exponent << 10) | half;
  if (rest > 0x1000 || (rest === 0x1000 && (half & 1))) {
    bits += 1;
  }
  return bits;
}
