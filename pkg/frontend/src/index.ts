export {
  decodeArray,
  encodeArray,
  elementCount,
  parseMetricValue,
} from './array.js';
export type { ArrayPayload, Dtype, NdArray, TypedArray } from './array.js';
export { Assembler, Datasource, MiadsClient } from './client.js';
export type {
  DatasourceConfig,
  ExtractorConfig,
  Geometry,
  MetricConfig,
  PredictionStatus,
  ResultRow,
  Sample,
  StrategyConfig,
  TransformConfig,
} from './client.js';
