/** Binary PGM (P5) decoding for frames streamed as base64 payloads. */

export interface Frame {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export function decodeBase64(data: string): Uint8Array {
  if (typeof atob === "function") {
    const text = atob(data);
    const bytes = new Uint8Array(text.length);
    for (let i = 0; i < text.length; i++) bytes[i] = text.charCodeAt(i);
    return bytes;
  }
  return new Uint8Array(Buffer.from(data, "base64"));
}

/** Decode a P5 greyscale image; pixels are the raster bytes, untouched. */
export function decodePgm(bytes: Uint8Array): Frame {
  if (bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a binary PGM (P5) payload");
  }
  // header is three whitespace-separated tokens after the magic
  let offset = 2;
  const tokens: string[] = [];
  while (tokens.length < 3 && offset < bytes.length) {
    while (offset < bytes.length && isSpace(bytes[offset])) offset++;
    let token = "";
    while (offset < bytes.length && !isSpace(bytes[offset])) {
      token += String.fromCharCode(bytes[offset]);
      offset++;
    }
    if (token) tokens.push(token);
  }
  offset++; // single whitespace after maxval
  const [width, height, maxval] = tokens.map((t) => parseInt(t, 10));
  if (!(width > 0) || !(height > 0) || maxval !== 255) {
    throw new Error(`bad PGM header ${tokens.join(" ")}`);
  }
  const raster = bytes.subarray(offset, offset + width * height);
  if (raster.length !== width * height) {
    throw new Error("truncated PGM raster");
  }
  return { width, height, pixels: raster };
}

export function decodePgmBase64(data: string): Frame {
  return decodePgm(decodeBase64(data));
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
