/**
 * Array exchange with the service: contiguous little-endian C-order bytes,
 * base64-encoded, next to dtype and shape.
 */

export type Dtype = 'uint8' | 'int32' | 'float32' | 'float64';

export type TypedArray = Uint8Array | Int32Array | Float32Array | Float64Array;

export interface NdArray {
  dtype: Dtype;
  shape: number[];
  data: TypedArray;
}

export interface ArrayPayload {
  dtype: string;
  shape: number[];
  data_b64: string;
}

const CONSTRUCTORS = {
  uint8: Uint8Array,
  int32: Int32Array,
  float32: Float32Array,
  float64: Float64Array,
} as const;

export function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function decodeArray(payload: ArrayPayload): NdArray {
  const dtype = payload.dtype as Dtype;
  const ctor = CONSTRUCTORS[dtype];
  if (!ctor) {
    throw new Error(`unsupported dtype ${payload.dtype}`);
  }
  const raw = Buffer.from(payload.data_b64, 'base64');
  // copy out of the node Buffer pool so the view is aligned and owned
  const bytes = raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
  const data = new ctor(bytes);
  if (data.length !== elementCount(payload.shape)) {
    throw new Error(
      `payload holds ${data.length} elements but shape ${payload.shape} needs ` +
        `${elementCount(payload.shape)}`,
    );
  }
  return { dtype, shape: [...payload.shape], data };
}

export function encodeArray(array: NdArray): ArrayPayload {
  if (array.data.length !== elementCount(array.shape)) {
    throw new Error('data length does not match shape');
  }
  const view = Buffer.from(array.data.buffer, array.data.byteOffset, array.data.byteLength);
  return {
    dtype: array.dtype,
    shape: [...array.shape],
    data_b64: view.toString('base64'),
  };
}

/** Parse a metric value string as reported by the service and the CSV cells. */
export function parseMetricValue(value: string): number {
  if (value === 'NaN') return Number.NaN;
  if (value === 'inf') return Number.POSITIVE_INFINITY;
  if (value === '-inf') return Number.NEGATIVE_INFINITY;
  const parsed = Number(value);
  if (Number.isNaN(parsed)) {
    throw new Error(`not a metric value: ${value}`);
  }
  return parsed;
}
