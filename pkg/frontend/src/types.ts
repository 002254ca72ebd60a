// Payload shapes of the qcfuse service API. The UI never recomputes engine
// quantities; everything rendered comes from these objects verbatim.

export const POLICIES = [
  'FullCompute', 'FullReuse', 'Random', 'EPIC', 'CacheBlend',
  'KVShare', 'QCLast', 'QCAll', 'QCFuse',
] as const

export type Policy = typeof POLICIES[number]

export interface ChunkSummary {
  chunk_id: string
  source_name: string
  n_tokens: number
  preview: string
  anchor_count: number
  cache_hit?: boolean
}

export interface Selection {
  policy: Policy
  ratio: number
  n_selected: number
  indices: number[]
  scores: number[]
}

export interface ScheduleLayer {
  layer: number
  fetch_start: number
  fetch_end: number
  compute_start: number
  compute_end: number
}

export interface Schedule {
  pre_phase: number
  ttft: number
  layers: ScheduleLayer[]
}

export interface TokenCell {
  position: number
  chunk_id: string
  text: string
  selected: boolean
  score: number
}

export interface UpdateEvent {
  layer: number
  indices: number[]
  timestamp: number
}

export interface Comparison {
  ttft_sim: number
  n_computed: number
  token_match: number
  logit_div: number
}

export interface RetrievalEntry {
  chunk_id: string
  score: number
}

export interface RunRecord {
  run_id: number
  request: {
    query: string
    policy: Policy
    ratio: number
    top_k: number
    chunk_ids: string[]
    compare_full: boolean
  }
  retrieval: RetrievalEntry[]
  result: {
    policy: Policy
    ratio: number
    answer_text: string
    answer_tokens: number[]
    first_token_logits: number[]
    selection: Selection
    schedule: Schedule
    ttft_sim: number
  }
  tokens: TokenCell[]
  events: UpdateEvent[]
  comparison: Comparison | null
}

export interface Metrics {
  cache_hits: number
  cache_misses: number
  layers_fetched: number
  bytes_fetched: number
  runs_served: number
  store_bytes: number
  config_fingerprint: string
  model: Record<string, number | string>
}
