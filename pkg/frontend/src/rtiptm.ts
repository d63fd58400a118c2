/**
 * Decoder for the RTIPTM1 container: magic line, JSON header, then six
 * uint8 coefficient planes per RGB channel. Dequantization mirrors the
 * Python reference bit for bit ((plane - bias) * scale in float64).
 */

export const MAGIC = "RTIPTM1\n";
export const N_PLANES = 6;
export const N_CHANNELS = 3;

export interface PtmImage {
  width: number;
  height: number;
  channels: string[];
  colorspace: string;
  /** uint8 planes laid out [plane][channel][row][col] */
  planes: Uint8Array;
  /** scale[plane][channel] */
  scale: number[][];
  /** bias[plane][channel] */
  bias: number[][];
}

export class PtmParseError extends Error {}

export function decodeRtiptm(data: Uint8Array | ArrayBuffer): PtmImage {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  const magicBytes = new TextEncoder().encode(MAGIC);
  if (bytes.length < magicBytes.length) {
    throw new PtmParseError("not an RTIPTM1 container");
  }
  for (let i = 0; i < magicBytes.length; i++) {
    if (bytes[i] !== magicBytes[i]) {
      throw new PtmParseError("not an RTIPTM1 container");
    }
  }
  let nl = -1;
  for (let i = magicBytes.length; i < bytes.length; i++) {
    if (bytes[i] === 0x0a) {
      nl = i;
      break;
    }
  }
  if (nl < 0) {
    throw new PtmParseError("truncated RTIPTM1 container");
  }
  const headerText = new TextDecoder().decode(bytes.subarray(magicBytes.length, nl));
  let header: {
    width: number;
    height: number;
    channels?: string[];
    colorspace?: string;
    scale: number[][];
    bias: number[][];
  };
  try {
    header = JSON.parse(headerText);
  } catch {
    throw new PtmParseError("malformed RTIPTM1 header");
  }
  const { width, height } = header;
  const planeBytes = width * height;
  const need = nl + 1 + N_PLANES * N_CHANNELS * planeBytes;
  if (bytes.length < need) {
    throw new PtmParseError("truncated RTIPTM1 container");
  }
  return {
    width,
    height,
    channels: header.channels ?? ["red", "green", "blue"],
    colorspace: header.colorspace ?? "srgb-linear",
    planes: bytes.slice(nl + 1, need),
    scale: header.scale,
    bias: header.bias,
  };
}

/**
 * Dequantized coefficients as float64, laid out [row][col][channel][term]
 * to match the reference decoder exactly.
 */
export function coefficients(ptm: PtmImage): Float64Array {
  const { width, height, planes, scale, bias } = ptm;
  const planeBytes = width * height;
  const out = new Float64Array(height * width * N_CHANNELS * N_PLANES);
  for (let i = 0; i < N_PLANES; i++) {
    for (let c = 0; c < N_CHANNELS; c++) {
      const s = scale[i][c];
      const b = bias[i][c];
      const base = (i * N_CHANNELS + c) * planeBytes;
      for (let p = 0; p < planeBytes; p++) {
        out[(p * N_CHANNELS + c) * N_PLANES + i] = (planes[base + p] - b) * s;
      }
    }
  }
  return out;
}
