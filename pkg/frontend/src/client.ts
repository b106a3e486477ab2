/**
 * HTTP client for the miads service. The service computes everything with
 * the same library the CLI uses, so values observed here are bitwise equal
 * to the CLI's CSV output.
 */

import {
  ArrayPayload,
  NdArray,
  decodeArray,
  encodeArray,
  parseMetricValue,
} from './array.js';

export interface Geometry {
  spacing: number[];
  origin: number[];
  direction: number[];
}

export interface StrategyConfig {
  kind: 'empty' | 'slice' | 'patch' | 'padded_patch';
  axis?: number;
  shape?: number[];
  step?: number[];
  core_shape?: number[];
  pad?: number[];
}

export interface ExtractorConfig {
  kind: 'data' | 'pad_data' | 'selective_data' | 'subject_id' | 'geometry' | 'shape' | 'names';
  category?: string;
  channels?: string[];
  mode?: 'zero' | 'mirror';
  key?: string;
}

export interface TransformConfig {
  kind:
    | 'znormalize'
    | 'rescale_intensity'
    | 'apply_mask'
    | 'random_flip'
    | 'permute_channels_first';
  keys?: string[];
  out_min?: number;
  out_max?: number;
  mask_key?: string;
  axes?: number[];
  probability?: number;
}

export interface DatasourceConfig {
  dataset_path: string;
  strategy: StrategyConfig;
  extractors?: ExtractorConfig[];
  transforms?: TransformConfig[];
  seed?: number;
}

export interface Sample {
  sampleIndex: number;
  subjectId: string;
  subjectIndex: number;
  region: { start: number[]; size: number[] };
  pad: number[];
  plane: number | null;
  arrays: Record<string, NdArray>;
  meta: Record<string, unknown>;
}

export interface MetricConfig {
  abbreviation: string;
  beta?: number;
  percentile?: number;
  tolerance_mm?: number;
  slice_index?: number | null;
  data_range?: number | null;
}

export interface ResultRow {
  subjectId: string;
  label: string;
  metric: string;
  /** Raw string exactly as the CSV cell. */
  raw: string;
  value: number;
}

export interface PredictionStatus {
  subjectId: string;
  received: number;
  expected: number;
  ready: boolean;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = `${response.status}: ${body.detail}`;
    } catch {
      // response body was not JSON; keep the status code
    }
    throw new Error(`request to ${url} failed (${detail})`);
  }
  return (await response.json()) as T;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(body),
  });
}

export class MiadsClient {
  constructor(public readonly baseUrl: string) {}

  async health(): Promise<{ status: string; version: string }> {
    return request(`${this.baseUrl}/health`);
  }

  async openDatasource(config: DatasourceConfig): Promise<Datasource> {
    const info = await post<{
      datasource_id: string;
      length: number;
      subjects: string[];
      spatial_shapes: number[][];
    }>(`${this.baseUrl}/datasources`, config);
    return new Datasource(
      this.baseUrl,
      info.datasource_id,
      info.length,
      info.subjects,
      info.spatial_shapes,
    );
  }

  async loadImage(path: string): Promise<{ array: NdArray; geometry: Geometry }> {
    const payload = await request<{ array: ArrayPayload; geometry: Geometry }>(
      `${this.baseUrl}/images?path=${encodeURIComponent(path)}`,
    );
    return { array: decodeArray(payload.array), geometry: payload.geometry };
  }

  async evaluateSegmentation(options: {
    subjectId: string;
    reference: NdArray;
    prediction: NdArray;
    spacing: number[];
    labels: Record<string, string>;
    metrics: Array<string | MetricConfig>;
  }): Promise<ResultRow[]> {
    const body = {
      subject_id: options.subjectId,
      reference: encodeArray(options.reference),
      prediction: encodeArray(options.prediction),
      spacing: options.spacing,
      labels: options.labels,
      metrics: options.metrics,
    };
    const response = await post<{
      results: Array<{ subject_id: string; label: string; metric: string; value: string }>;
    }>(`${this.baseUrl}/evaluations/segmentation`, body);
    return response.results.map((row) => ({
      subjectId: row.subject_id,
      label: row.label,
      metric: row.metric,
      raw: row.value,
      value: parseMetricValue(row.value),
    }));
  }

  async evaluateContinuous(options: {
    subjectId: string;
    reference: NdArray;
    prediction: NdArray;
    metrics: Array<string | MetricConfig>;
  }): Promise<ResultRow[]> {
    const body = {
      subject_id: options.subjectId,
      reference: encodeArray(options.reference),
      prediction: encodeArray(options.prediction),
      metrics: options.metrics,
    };
    const response = await post<{
      results: Array<{ subject_id: string; label: string; metric: string; value: string }>;
    }>(`${this.baseUrl}/evaluations/continuous`, body);
    return response.results.map((row) => ({
      subjectId: row.subject_id,
      label: row.label,
      metric: row.metric,
      raw: row.value,
      value: parseMetricValue(row.value),
    }));
  }
}

export class Datasource {
  constructor(
    private readonly baseUrl: string,
    public readonly id: string,
    public readonly length: number,
    public readonly subjects: string[],
    public readonly spatialShapes: number[][],
  ) {}

  async sample(index: number): Promise<Sample> {
    const payload = await request<{
      sample_index: number;
      subject_id: string;
      subject_index: number;
      region: { start: number[]; size: number[] };
      pad: number[];
      plane: number | null;
      arrays: Record<string, ArrayPayload>;
      meta: Record<string, unknown>;
    }>(`${this.baseUrl}/datasources/${this.id}/samples/${index}`);
    const arrays: Record<string, NdArray> = {};
    for (const [key, value] of Object.entries(payload.arrays)) {
      arrays[key] = decodeArray(value);
    }
    return {
      sampleIndex: payload.sample_index,
      subjectId: payload.subject_id,
      subjectIndex: payload.subject_index,
      region: payload.region,
      pad: payload.pad,
      plane: payload.plane,
      arrays,
      meta: payload.meta,
    };
  }

  async assembler(): Promise<Assembler> {
    const info = await post<{ assembler_id: string; expected: Record<string, number> }>(
      `${this.baseUrl}/assemblers`,
      { datasource_id: this.id },
    );
    return new Assembler(this.baseUrl, info.assembler_id, info.expected);
  }

  async close(): Promise<void> {
    await request(`${this.baseUrl}/datasources/${this.id}`, { method: 'DELETE' });
  }
}

export class Assembler {
  constructor(
    private readonly baseUrl: string,
    public readonly id: string,
    public readonly expected: Record<string, number>,
  ) {}

  async add(sampleIndex: number, prediction: NdArray): Promise<PredictionStatus> {
    const status = await post<{
      subject_id: string;
      received: number;
      expected: number;
      ready: boolean;
    }>(`${this.baseUrl}/assemblers/${this.id}/predictions`, {
      sample_index: sampleIndex,
      prediction: encodeArray(prediction),
    });
    return {
      subjectId: status.subject_id,
      received: status.received,
      expected: status.expected,
      ready: status.ready,
    };
  }

  async assemble(subjectId: string): Promise<NdArray> {
    const payload = await request<{ subject_id: string; array: ArrayPayload }>(
      `${this.baseUrl}/assemblers/${this.id}/subjects/${encodeURIComponent(subjectId)}`,
    );
    return decodeArray(payload.array);
  }
}
